"""Partially homomorphic encryption: many additions, one multiplication.

Two interchangeable backends sit behind the same key interface:

* ``"bgn"``: Boneh-Goh-Nissim over a composite-order pairing group.
* ``"transparent"``: exact plaintext arithmetic for testing service logic.

Ciphertext wire format: one level byte (1 or 2) followed by the backend's
fixed-length element encoding.
"""
from . import bgn, transparent
from .base import (
    DEFAULT_BOUND, MIN_MODULUS_BITS, Ciphertext, LevelError, PheError, PlaintextRangeError,
    system_rng,
)

BACKENDS = {"bgn": bgn, "transparent": transparent}


def keygen(bits=256, bound=DEFAULT_BOUND, backend="bgn", table_size=None, rng=None):
    """Return ``(public_key, secret_key)`` for the chosen backend."""
    try:
        mod = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown PHE backend {backend!r}") from None
    return mod.keygen(bits=bits, bound=bound, table_size=table_size, rng=rng)


def public_key_from_dict(d):
    if d["backend"] == "bgn":
        return bgn.BgnPublicKey.from_dict(d)
    if d["backend"] == "transparent":
        return transparent.TransparentPublicKey.from_dict(d)
    raise ValueError(f"unknown PHE backend {d['backend']!r}")


def secret_key_from_dict(pk, d):
    if d["backend"] != pk.backend:
        raise ValueError("secret key and public key backends differ")
    if pk.backend == "bgn":
        return bgn.BgnSecretKey(pk, int(d["q1"], 16))
    return transparent.TransparentSecretKey(pk, int(d["q1"], 16))


__all__ = [
    "BACKENDS", "Ciphertext", "DEFAULT_BOUND", "LevelError", "MIN_MODULUS_BITS", "PheError",
    "PlaintextRangeError", "keygen", "public_key_from_dict", "secret_key_from_dict", "system_rng",
]
