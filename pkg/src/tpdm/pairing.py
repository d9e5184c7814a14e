"""Prime-order asymmetric pairing group (BLS12-381) used by the signature layer.

Group arithmetic and the optimal ate pairing come from ``py_arkworks_bls12381``;
this module adds the pieces the protocol needs on top: integer exponents,
hashing into G1 and Z_q, a GT exponentiation, and fixed byte encodings.

Encodings (big-endian, ZCash compressed format):

* G1: 48 bytes.  Top three bits of byte 0 are flags: 0x80 compressed,
  0x40 point at infinity, 0x20 "y is the larger root".  Rest is x.
* G2: 96 bytes, same flags, x = (x.c1, x.c0).
* GT: 576 bytes, the twelve F_p coordinates as printed by the backend.
  GT values never travel between roles (verifiers recompute pairings), so
  only encoding is offered.
* Scalars: 32 bytes big-endian, value in [0, q).
"""
import hashlib
from dataclasses import dataclass

import gmpy2

from py_arkworks_bls12381 import GT, G1Point, G2Point, Scalar

from . import instrument

FIELD_P = 0x1A0111EA397FE69A4B1BA7B6434BACD764774B84F38512BF6730D2A0F6B0F6241EABFFFEB153FFFFB9FEFFFFFFFFAAAB
ORDER_Q = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
# effective cofactor for G1 (maps E(F_p) onto the order-q subgroup)
G1_COFACTOR = 0xD201000000010001
CURVE_B = 4

G1_BYTES = 48
G2_BYTES = 96
GT_BYTES = 576
SCALAR_BYTES = 32

HASH_G1_DST = b"TPDM-V1-G1-TAI:"
DIGESTS = ("sha256", "sha1")


class InvalidElement(ValueError):
    pass


@dataclass(frozen=True)
class GroupSuite:
    name: str
    q: int
    field_p: int
    g1: G1Point
    g2: G2Point

    def describe(self):
        return {"name": self.name, "q": hex(self.q), "p": hex(self.field_p),
                "g1": encode_g1(self.g1).hex(), "g2": encode_g2(self.g2).hex()}


SUITE = GroupSuite("BLS12-381", ORDER_Q, FIELD_P, G1Point(), G2Point())


def _scalar(k):
    return Scalar(int(k) % ORDER_Q)


def g1_identity():
    return G1Point.identity()


def g1_mul(P, k):
    instrument.bump(instrument.G1_EXP)
    return P * _scalar(k)


def g1_multiexp(points, ks):
    """prod P_i^k_i as one multi-scalar multiplication (counted as len(ks)
    exponentiations)."""
    points, ks = list(points), list(ks)
    instrument.bump(instrument.G1_EXP, len(ks))
    if not points:
        return G1Point.identity()
    return G1Point.multiexp_unchecked(points, [_scalar(k) for k in ks])


def g2_mul(P, k):
    return P * _scalar(k)


def g1_sum(points):
    acc = G1Point.identity()
    for P in points:
        acc = acc + P
    return acc


def pair(x, z):
    instrument.bump(instrument.PAIRING)
    return GT.pairing(x, z)


def gt_one():
    return GT.one()


def gt_pow(e, k):
    k = int(k) % ORDER_Q
    r = GT.one()
    while k:
        if k & 1:
            r = r * e
        e = e * e
        k >>= 1
    return r


def random_scalar(rng):
    return rng.randrange(1, ORDER_Q)


# -- encodings ---------------------------------------------------------------

def encode_g1(P):
    return bytes(P.to_compressed_bytes())


def encode_g2(P):
    return bytes(P.to_compressed_bytes())


def encode_gt(e):
    return bytes.fromhex(str(e))


def decode_g1(data):
    if len(data) != G1_BYTES:
        raise InvalidElement(f"G1 encoding must be {G1_BYTES} bytes")
    try:
        P = G1Point.from_compressed_bytes(list(data))
    except Exception as exc:
        raise InvalidElement(f"invalid G1 encoding: {exc}") from None
    # the backend tolerates junk bits next to the infinity flag; only the
    # canonical encoding is accepted so that elements have one byte form
    if bytes(P.to_compressed_bytes()) != bytes(data):
        raise InvalidElement("non-canonical G1 encoding")
    return P


def decode_g2(data):
    if len(data) != G2_BYTES:
        raise InvalidElement(f"G2 encoding must be {G2_BYTES} bytes")
    try:
        P = G2Point.from_compressed_bytes(list(data))
    except Exception as exc:
        raise InvalidElement(f"invalid G2 encoding: {exc}") from None
    # the backend tolerates junk bits next to the infinity flag; only the
    # canonical encoding is accepted so that elements have one byte form
    if bytes(P.to_compressed_bytes()) != bytes(data):
        raise InvalidElement("non-canonical G2 encoding")
    return P


def encode_scalar(k):
    return (int(k) % ORDER_Q).to_bytes(SCALAR_BYTES, "big")


def decode_scalar(data):
    k = int.from_bytes(data, "big")
    if len(data) != SCALAR_BYTES or k >= ORDER_Q:
        raise InvalidElement("scalar out of range")
    return k


# -- hashing -----------------------------------------------------------------

_P = gmpy2.mpz(FIELD_P)
_SQRT_EXP = (_P + 1) // 4


def _sqrt(a):
    if gmpy2.legendre(a, _P) == -1:
        return None
    # p = 3 mod 4
    return int(gmpy2.powmod(a, _SQRT_EXP, _P))


def hash_to_g1(data):
    """Deterministic try-and-increment map into the order-q subgroup of G1.

    Candidate x = SHA-512(DST || counter || data) mod p; the first x with
    x^3 + 4 a square wins, the root is picked by one more digest bit, and the
    cofactor is cleared.  Expected two attempts.
    """
    instrument.bump(instrument.HASH_TO_G1)
    data = bytes(data)
    ctr = 0
    while True:
        d = hashlib.sha512(HASH_G1_DST + ctr.to_bytes(4, "big") + data).digest()
        ctr += 1
        x = int.from_bytes(d, "big") % FIELD_P
        y = _sqrt((x * x * x + CURVE_B) % FIELD_P)
        if y is None:
            continue
        if d[-1] & 1:
            y = FIELD_P - y
        flags = 0x80 | (0x20 if y > (FIELD_P - 1) // 2 else 0)
        enc = x.to_bytes(G1_BYTES, "big")
        enc = bytes([enc[0] | flags]) + enc[1:]
        P = G1Point.from_compressed_bytes_unchecked(list(enc)) * Scalar(G1_COFACTOR)
        if P != G1Point.identity():
            return P


def hash_to_scalar(data, digest="sha256"):
    """Digest reduced mod q.  ``digest="sha1"`` reproduces the original 160-bit setting."""
    if digest not in DIGESTS:
        raise ValueError(f"unsupported digest {digest!r}")
    return int.from_bytes(hashlib.new(digest, bytes(data)).digest(), "big") % ORDER_Q


def mask(P):
    """32-byte mask derived from a G1 element, used to XOR-hide identities."""
    return hashlib.sha256(b"TPDM-V1-MASK:" + encode_g1(P)).digest()
