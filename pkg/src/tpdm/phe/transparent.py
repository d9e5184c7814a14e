"""Transparent debug backend.

Ciphertexts carry the plaintext residue mod N next to a random 64-bit tag, so
equal plaintexts still encode differently.  Arithmetic is exact and instant,
which lets service-level tests check logic against plaintext oracles without
paying for pairings.  Provides no confidentiality whatsoever.
"""
from .base import (
    DEFAULT_BOUND, MIN_MODULUS_BITS, PublicKeyBase, SecretKeyBase, system_rng,
)
from .bgn import _random_prime
from .dlog import OutOfRange

TAG_MASK = (1 << 64) - 1


def keygen(bits=256, bound=DEFAULT_BOUND, table_size=None, rng=None):
    if bits < MIN_MODULUS_BITS:
        raise ValueError(f"modulus must have at least {MIN_MODULUS_BITS} bits")
    rng = rng or system_rng()
    q1 = _random_prime(bits // 2, rng)
    q2 = _random_prime(bits - bits // 2, rng)
    if bound * 4 >= min(q1, q2):
        raise ValueError("plaintext bound too large for this modulus")
    pk = TransparentPublicKey(int(q1 * q2), bound, bits)
    return pk, TransparentSecretKey(pk, int(q1))


class TransparentPublicKey(PublicKeyBase):
    backend = "transparent"

    def __init__(self, modulus, bound=DEFAULT_BOUND, bits=None):
        super().__init__(int(modulus), bound, bits or int(modulus).bit_length())
        self._nlen = (int(modulus).bit_length() + 7) // 8

    def _enc(self, m, rng):
        return (m % self.N, rng.getrandbits(64))

    def _one(self):
        return (1, 0)

    def _add(self, level, a, b):
        return ((a[0] + b[0]) % self.N, (a[1] + b[1]) & TAG_MASK)

    def _mul(self, a, b):
        return (a[0] * b[0] % self.N, (a[1] * b[1] + a[1] + b[1]) & TAG_MASK)

    def _exp(self, level, a, k):
        return (a[0] * k % self.N, (a[1] * k) & TAG_MASK)

    def rerandomize(self, c, rng=None):
        rng = rng or system_rng()
        v, t = c.element
        return type(c)(c.level, (v, (t + rng.getrandbits(64)) & TAG_MASK))

    def _enc_element(self, level, el):
        return el[0].to_bytes(self._nlen, "big") + el[1].to_bytes(8, "big")

    def _dec_element(self, level, data):
        if len(data) != self._nlen + 8:
            raise ValueError("bad transparent ciphertext length")
        v = int.from_bytes(data[:self._nlen], "big")
        if v >= self.N:
            raise ValueError("residue out of range")
        return (v, int.from_bytes(data[self._nlen:], "big"))

    def encoded_len(self, level):
        return 1 + self._nlen + 8

    def to_dict(self):
        return {"backend": self.backend, "bits": self.bits, "N": hex(self.N), "bound": self.bound}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["N"], 16), d["bound"], d["bits"])


class TransparentSecretKey(SecretKeyBase):
    def __init__(self, pk, q1):
        super().__init__(pk)
        if pk.N % q1:
            raise ValueError("q1 must divide N")
        self.q1 = int(q1)

    def _signed(self, v):
        N = self.pk.N
        return v - N if v > N // 2 else v

    def _strip(self, c):
        return c.element[0]

    def _image(self, level, m):
        return m % self.pk.N

    def _decrypt(self, c):
        m = self._signed(c.element[0])
        if abs(m) > self.pk.bound:
            raise OutOfRange(f"plaintext {m} exceeds bound {self.pk.bound}")
        return m

    def to_dict(self):
        return {"backend": "transparent", "q1": hex(self.q1)}
