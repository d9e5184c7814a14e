"""Boneh-Goh-Nissim encryption on a composite-order supersingular curve.

Public: curve with N = q1*q2 | p + 1, generator g of the order-N subgroup and
h = u^q2 of order q1.  E(m) = g^m * h^r.  Raising to q1 strips the blinding,
leaving (g^q1)^m, whose bounded log is found by baby-step/giant-step.  Level-2
ciphertexts live in the pairing target group with bases e(g, g) and e(g, h).
"""
import gmpy2
from gmpy2 import mpz

from .base import (
    DEFAULT_BOUND, MIN_MODULUS_BITS, Ciphertext, PublicKeyBase, SecretKeyBase, system_rng,
)
from .curve import INF, FixedBase, TypeACurve
from .dlog import BabyGiant

MAX_KEYGEN_TRIES = 64


def _random_prime(bits, rng):
    top = mpz(1) << (bits - 1)
    while True:
        c = gmpy2.next_prime(mpz(rng.getrandbits(bits - 1)) | top)
        if c.bit_length() == bits:
            return c


def _order_exactly(E, P, q1, q2):
    return P is not INF and E.mul(P, q1) is not INF and E.mul(P, q2) is not INF


def keygen(bits=256, bound=DEFAULT_BOUND, table_size=None, rng=None):
    if bits < MIN_MODULUS_BITS:
        raise ValueError(f"modulus must have at least {MIN_MODULUS_BITS} bits")
    rng = rng or system_rng()
    half = bits // 2
    for _ in range(MAX_KEYGEN_TRIES):
        q1 = _random_prime(half, rng)
        q2 = _random_prime(bits - half, rng)
        if q1 == q2:
            continue
        N = q1 * q2
        cof = 4
        while not gmpy2.is_prime(cof * N - 1):
            cof += 4
        E = TypeACurve(cof * N - 1, N, cof)
        g = E.random_point(rng)
        u = E.random_point(rng)
        if not (_order_exactly(E, g, q1, q2) and _order_exactly(E, u, q1, q2)):
            continue
        if bound * 4 >= min(q1, q2):
            raise ValueError("plaintext bound too large for this modulus")
        pk = BgnPublicKey(E, g, E.mul(u, q2), bound, bits, table_size)
        return pk, BgnSecretKey(pk, q1)
    raise RuntimeError("BGN parameter generation failed")


class BgnPublicKey(PublicKeyBase):
    backend = "bgn"

    def __init__(self, curve, g, h, bound=DEFAULT_BOUND, bits=None, table_size=None):
        E = curve
        super().__init__(E.order, bound, bits or int(E.order).bit_length())
        self.curve = E
        self.g = g
        self.h = h
        self.table_size = int(table_size or max(16, 1 << ((int(bound).bit_length() + 1) // 2)))
        nbits = int(E.order).bit_length()
        self._g_pow = FixedBase(g, max(32, int(bound).bit_length()), E.add, INF)
        self._h_pow = FixedBase(h, nbits, E.add, INF)
        self._gt_h = None

    # level-2 blinding base e(g, h), only needed for rerandomization
    @property
    def gt_h(self):
        if self._gt_h is None:
            E = self.curve
            self._gt_h = FixedBase(E.pair(self.g, self.h), int(E.order).bit_length(),
                                   E.f2_mul, (mpz(1), mpz(0)))
        return self._gt_h

    def _enc(self, m, rng):
        E = self.curve
        gm = self._g_pow(abs(m))
        if m < 0:
            gm = E.neg(gm)
        return E.add(gm, self._h_pow(rng.randrange(int(E.order))))

    def _one(self):
        return self.g

    def _add(self, level, a, b):
        if level == 1:
            return self.curve.add(a, b)
        return self.curve.f2_mul(a, b)

    def _mul(self, a, b):
        return self.curve.pair(a, b)

    def _exp(self, level, a, k):
        if level == 1:
            return self.curve.mul(a, k)
        return self.curve.f2_pow(a, k)

    def rerandomize(self, c, rng=None):
        rng = rng or system_rng()
        r = rng.randrange(int(self.N))
        if c.level == 1:
            return Ciphertext(1, self.curve.add(c.element, self._h_pow(r)))
        return Ciphertext(2, self.curve.f2_mul(c.element, self.gt_h(r)))

    def _enc_element(self, level, el):
        if level == 1:
            return self.curve.encode_point(el)
        return self.curve.encode_f2(el)

    def _dec_element(self, level, data):
        if level == 1:
            return self.curve.decode_point(data)
        return self.curve.decode_f2(data)

    def encoded_len(self, level):
        n = self.curve.byte_len
        return 1 + (n + 1 if level == 1 else 2 * n)

    def to_dict(self):
        E = self.curve
        return {
            "backend": self.backend,
            "bits": self.bits,
            "p": hex(E.p),
            "N": hex(E.order),
            "cofactor": hex(E.cofactor),
            "g": E.encode_point(self.g).hex(),
            "h": E.encode_point(self.h).hex(),
            "bound": self.bound,
            "table_size": self.table_size,
        }

    @classmethod
    def from_dict(cls, d):
        E = TypeACurve(int(d["p"], 16), int(d["N"], 16), int(d["cofactor"], 16))
        return cls(E, E.decode_point(bytes.fromhex(d["g"])), E.decode_point(bytes.fromhex(d["h"])),
                   d["bound"], d["bits"], d["table_size"])


class BgnSecretKey(SecretKeyBase):
    def __init__(self, pk, q1):
        super().__init__(pk)
        self.q1 = mpz(q1)
        if pk.N % self.q1 != 0 or not gmpy2.is_prime(self.q1):
            raise ValueError("q1 must be a prime factor of N")
        self._solvers = {}

    def _solver(self, level):
        s = self._solvers.get(level)
        if s is None:
            E = self.pk.curve
            if level == 1:
                base = E.mul(self.pk.g, self.q1)
                s = BabyGiant(base, self.pk.bound, self.pk.table_size,
                              E.add, E.neg, lambda P: P[0], INF)
            else:
                base = E.f2_pow(E.pair(self.pk.g, self.pk.g), self.q1)
                s = BabyGiant(base, self.pk.bound, self.pk.table_size,
                              E.f2_mul, E.f2_conj, lambda a: a[0], (mpz(1), mpz(0)))
            self._solvers[level] = s
        return s

    def _strip(self, c):
        return self.pk._exp(c.level, c.element, self.q1)

    def _decrypt(self, c):
        return self._solver(c.level).solve(self._strip(c))

    def _image(self, level, m):
        s = self._solver(level)
        E = self.pk.curve
        if level == 1:
            return E.mul(s.elems[1], m)
        return E.f2_pow(s.elems[1], m)

    def to_dict(self):
        return {"backend": "bgn", "q1": hex(self.q1)}
