"""Backend-neutral pieces of the partially homomorphic layer."""
import secrets
from dataclasses import dataclass
from typing import Any

from .. import instrument
from .dlog import OutOfRange

# Smallest modulus accepted by keygen.  Anything under 1024 bits is a toy.
MIN_MODULUS_BITS = 128
DEFAULT_BOUND = 2**20


class PheError(Exception):
    pass


class PlaintextRangeError(PheError, ValueError):
    """Plaintext outside [-T, T], at encryption or after homomorphic fan-in."""


class LevelError(PheError, ValueError):
    pass


@dataclass(frozen=True)
class Ciphertext:
    level: int
    element: Any


def system_rng():
    return secrets.SystemRandom()


class PublicKeyBase:
    """Operations shared by every backend.

    Subclasses provide ``_enc``, ``_add``, ``_mul``, ``_exp``, ``_enc_element``
    and ``_dec_element`` plus the class attribute ``backend``.
    """

    backend = ""

    def __init__(self, modulus, bound, bits):
        self.N = modulus
        self.bound = int(bound)
        self.bits = int(bits)

    @property
    def toy(self):
        return self.bits < 1024

    @property
    def max_fan_in(self):
        # both prime factors have bits // 2 bits; keep |sum| under half of the smaller
        return (1 << (self.bits // 2 - 2)) // self.bound

    def check_fan_in(self, worst_case):
        """Raise when a computation whose result may reach ``worst_case`` in
        magnitude cannot be decrypted under this key."""
        if worst_case > self.bound:
            raise PlaintextRangeError(
                f"worst-case plaintext {worst_case} exceeds the decryption bound {self.bound}")

    def encrypt(self, m, rng=None):
        m = int(m)
        if abs(m) > self.bound:
            raise PlaintextRangeError(f"|{m}| exceeds plaintext bound {self.bound}")
        instrument.bump(instrument.PHE_ENC)
        return Ciphertext(1, self._enc(m, rng or system_rng()))

    def add(self, a, b):
        if a.level != b.level:
            raise LevelError(f"cannot add level {a.level} and level {b.level} ciphertexts")
        instrument.bump(instrument.PHE_ADD)
        return Ciphertext(a.level, self._add(a.level, a.element, b.element))

    def sum(self, items):
        it = iter(items)
        try:
            acc = next(it)
        except StopIteration:
            raise ValueError("sum of no ciphertexts") from None
        for c in it:
            acc = self.add(acc, c)
        return acc

    def mul(self, a, b):
        if a.level != 1 or b.level != 1:
            raise LevelError("homomorphic multiplication needs two level-1 ciphertexts")
        instrument.bump(instrument.PHE_MUL)
        return Ciphertext(2, self._mul(a.element, b.element))

    def scalar_exp(self, a, k):
        """Ciphertext of k * Dec(a); negative k allowed."""
        instrument.bump(instrument.PHE_EXP)
        return Ciphertext(a.level, self._exp(a.level, a.element, int(k)))

    def one(self):
        """Deterministic level-1 encryption of 1 (no blinding)."""
        return Ciphertext(1, self._one())

    def lift(self, a):
        """Move a level-1 ciphertext to level 2 by multiplying with E(1)."""
        return self.mul(a, self.one())

    def encode(self, c):
        if c.level not in (1, 2):
            raise LevelError("level must be 1 or 2")
        return bytes([c.level]) + self._enc_element(c.level, c.element)

    def decode(self, data):
        data = bytes(data)
        if not data or data[0] not in (1, 2):
            raise ValueError("bad ciphertext level byte")
        return Ciphertext(data[0], self._dec_element(data[0], data[1:]))

    def encoded_len(self, level):
        raise NotImplementedError


class SecretKeyBase:
    def __init__(self, pk):
        self.pk = pk
        self._images = {1: {}, 2: {}}

    def decrypt(self, c):
        instrument.bump(instrument.PHE_DEC)
        try:
            return self._decrypt(c)
        except OutOfRange as exc:
            raise PlaintextRangeError(str(exc)) from None

    def strip(self, c):
        """Blinding-free image of ``c``: equal for any two ciphertexts of the
        same plaintext at the same level."""
        return self._strip(c)

    def image(self, level, m):
        images = self._images[level]
        if m not in images:
            images[m] = self._image(level, m)
        return images[m]

    def lookup(self, c, plaintexts):
        """Plaintext of ``c`` if it is one of ``plaintexts``, else None.

        Costs one exponentiation plus a comparison per candidate instead of a
        full bounded discrete-log search.
        """
        y = self._strip(c)
        for m in plaintexts:
            if self.image(c.level, m) == y:
                return m
        return None
