"""Identity-based signatures over ciphertext vectors (encrypt-then-sign).

A contributor holding (sk1, sk2) signs the byte string D (the concatenated
ciphertext encodings) as

    sigma = sk1 * sk2^h(D)

and anyone can check  e(sigma, g2) = e(pid1, P1) * e(H(pid2)^h(D), P2).
Because both sides are multiplicative in sigma, n signatures verify at once
from the products, for three pairings total.  No random small exponents
are mixed in, so signers who collude to cancel each other's errors are out
of scope here.

For large batches the n exponentiations H(pid2_i)^h(D_i) are folded into a
single multi-scalar multiplication, which computes the same product.
"""
from dataclasses import dataclass

from . import instrument
from . import pairing as pg
from .identity import PID_BYTES, PseudoIdentity


@dataclass(frozen=True)
class DataTuple:
    pid: PseudoIdentity
    payload: bytes  # d_concat: schema header followed by ciphertext encodings
    sigma: object

    def encode(self):
        return self.pid.encode() + pg.encode_g1(self.sigma) + self.payload

    @classmethod
    def decode(cls, data):
        data = bytes(data)
        pid_len = PID_BYTES
        pid = PseudoIdentity.decode(data[:pid_len])
        sigma = pg.decode_g1(data[pid_len:pid_len + pg.G1_BYTES])
        return cls(pid, data[pid_len + pg.G1_BYTES:], sigma)


@dataclass(frozen=True)
class AggregateSignature:
    sigma: object
    index_set: tuple


def message_exponent(params, d_concat):
    return pg.hash_to_scalar(d_concat, params.digest)


def sign(params, sk, d_concat):
    return sk.sk1 + pg.g1_mul(sk.sk2, message_exponent(params, d_concat))


# below this size separate exponentiations beat the multi-exponentiation
MULTIEXP_MIN = 8


def _rhs(params, pids, payloads, multiexp=True):
    """e(prod pid1, P1) * e(prod H(pid2)^h(D), P2)."""
    pid_prod = pg.g1_sum(p.pid1 for p in pids)
    points = [pg.hash_to_g1(p.pid2) for p in pids]
    ks = [message_exponent(params, d) for d in payloads]
    if multiexp and len(points) >= MULTIEXP_MIN:
        hashed = pg.g1_multiexp(points, ks)
    else:
        hashed = pg.g1_sum(pg.g1_mul(P, k) for P, k in zip(points, ks))
    return pg.pair(pid_prod, params.P1) * pg.pair(hashed, params.P2)


def verify_single(params, pid, d_concat, sigma):
    instrument.bump(instrument.SINGLE_VERIFY)
    return pg.pair(sigma, params.g2) == _rhs(params, [pid], [d_concat])


def verify_batch(params, tuples, multiexp=True):
    """Accept iff the product equation holds for all of ``tuples``.

    ``multiexp`` computes prod H(pid2_i)^h(D_i) as one multi-scalar
    multiplication; False does n separate exponentiations.
    """
    tuples = list(tuples)
    if not tuples:
        raise ValueError("cannot batch-verify an empty list")
    instrument.bump(instrument.BATCH_VERIFY)
    lhs = pg.pair(pg.g1_sum(t.sigma for t in tuples), params.g2)
    return lhs == _rhs(params, [t.pid for t in tuples], [t.payload for t in tuples], multiexp)


def aggregate(signatures, index_set=None):
    signatures = list(signatures)
    if index_set is None:
        index_set = range(len(signatures))
    index_set = tuple(index_set)
    if len(index_set) != len(signatures):
        raise ValueError("index set and signature list differ in length")
    return AggregateSignature(pg.g1_sum(signatures), index_set)


def verify_aggregate(params, agg, pids, d_concats):
    """Second-layer check of an aggregate against its members' public parts.

    ``pids`` and ``d_concats`` are aligned with ``agg.index_set``.
    """
    pids, d_concats = list(pids), list(d_concats)
    if len(pids) != len(agg.index_set) or len(d_concats) != len(agg.index_set):
        raise ValueError("aggregate members and supplied data differ in length")
    if not pids:
        return agg.sigma == pg.g1_identity()
    instrument.bump(instrument.BATCH_VERIFY)
    return pg.pair(agg.sigma, params.g2) == _rhs(params, pids, d_concats)
