"""Versioned ciphertext-vector layouts.

A signed payload (d_concat) is a 20-byte header followed by the fixed-length
encodings of every ciphertext in layout order.  The header is ``b"TPDM"``
plus the first 16 bytes of SHA-256 over the schema descriptor, so a
signature also commits to the service, its version and its shape.
"""
import hashlib
from dataclasses import dataclass

HEADER_MAGIC = b"TPDM"
HEADER_BYTES = len(HEADER_MAGIC) + 16


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Schema:
    service: str
    beta: int
    theta: int
    version: int = 1

    def __post_init__(self):
        if self.service not in ("matching", "fitting"):
            raise SchemaError(f"unknown service {self.service!r}")
        if self.beta < 1 or self.theta < 0:
            raise SchemaError("need beta >= 1 and theta >= 0")

    @property
    def length(self):
        b = self.beta
        if self.service == "matching":
            return 2 * b
        return b + b * (b + 1) // 2

    def descriptor(self):
        return f"{self.service}/v{self.version}/beta={self.beta}/theta={self.theta}"

    def header(self):
        return HEADER_MAGIC + hashlib.sha256(self.descriptor().encode()).digest()[:16]

    def check_profile(self, profile):
        profile = [int(u) for u in profile]
        if len(profile) != self.beta:
            raise SchemaError(f"profile has {len(profile)} entries, schema expects {self.beta}")
        for u in profile:
            if not 0 <= u <= self.theta:
                raise SchemaError(f"rating {u} outside [0, {self.theta}]")
        return profile

    def pack(self, pk, ciphertexts):
        ciphertexts = list(ciphertexts)
        if len(ciphertexts) != self.length:
            raise SchemaError(f"{self.descriptor()} needs {self.length} ciphertexts, got {len(ciphertexts)}")
        if any(c.level != 1 for c in ciphertexts):
            raise SchemaError("payload ciphertexts must be level 1")
        return self.header() + b"".join(pk.encode(c) for c in ciphertexts)

    def unpack(self, pk, payload):
        payload = bytes(payload)
        if payload[:HEADER_BYTES] != self.header():
            raise SchemaError("payload header does not match the session schema")
        width = pk.encoded_len(1)
        body = payload[HEADER_BYTES:]
        if len(body) != width * self.length:
            raise SchemaError(f"payload carries {len(body) // width} ciphertexts, "
                              f"schema {self.descriptor()} needs {self.length}")
        return [pk.decode(body[i:i + width]) for i in range(0, len(body), width)]

    def to_dict(self):
        return {"service": self.service, "beta": self.beta, "theta": self.theta,
                "version": self.version}

    @classmethod
    def from_dict(cls, d):
        return cls(d["service"], d["beta"], d["theta"], d.get("version", 1))
