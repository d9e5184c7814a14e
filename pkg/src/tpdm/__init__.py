"""Truthful and private data markets: encrypt-then-sign data collection with
batch-verifiable identity-based signatures, BGN-encrypted data services and
consumer-side outcome verification."""

__version__ = "0.1.0"
