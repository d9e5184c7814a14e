"""Fine-grained profile matching over encrypted profiles.

Each contributor submits E(u_1..u_beta) followed by E(u_1^2..u_beta^2).  The
consumer sends E(v_j^2) and E(-2 v_j) and a threshold delta.  Padding both
sides with E(1) turns each attribute into a three-term dot product

    (E(1), E(u), E(u^2)) . (E(v^2), E(-2v), E(1)) = E((u - v)^2)

so the provider spends 3 multiplications per attribute and ends with
E(f^2), f^2 = sum_j (u_j - v_j)^2, at level 2.  Contributor i matches when
f^2 < delta^2 (strict).

The consumer later re-derives the same similarity at level 1 from her own
plaintext, E(v^2) + (-2v) * E(u) + E(u^2), without any multiplication.
"""
from dataclasses import dataclass, field

from .. import ibs
from .. import pairing as pg
from ..identity import CacheMiss
from .schema import Schema, SchemaError


def matching_schema(beta, theta):
    return Schema("matching", beta, theta)


def check_fan_in(pk, schema):
    """Refuse sessions whose largest similarity would not decrypt."""
    pk.check_fan_in(schema.beta * schema.theta ** 2)
    pk.check_fan_in(schema.theta ** 2)


def encode_profile_matching(pk, schema, profile, rng=None):
    u = schema.check_profile(profile)
    return [pk.encrypt(x, rng) for x in u] + [pk.encrypt(x * x, rng) for x in u]


@dataclass(frozen=True)
class MatchingQuery:
    squares: tuple      # E(v_j^2)
    neg_doubles: tuple  # E(-2 v_j)
    delta: int

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("threshold must be non-negative")
        if len(self.squares) != len(self.neg_doubles):
            raise ValueError("query halves differ in length")

    @property
    def beta(self):
        return len(self.squares)

    def to_dict(self, pk):
        return {"delta": self.delta,
                "squares": [pk.encode(c).hex() for c in self.squares],
                "neg_doubles": [pk.encode(c).hex() for c in self.neg_doubles]}

    @classmethod
    def from_dict(cls, pk, d):
        dec = lambda xs: tuple(pk.decode(bytes.fromhex(x)) for x in xs)  # noqa: E731
        return cls(dec(d["squares"]), dec(d["neg_doubles"]), int(d["delta"]))


def make_query(pk, schema, profile, delta, rng=None):
    v = schema.check_profile(profile)
    return MatchingQuery(tuple(pk.encrypt(x * x, rng) for x in v),
                         tuple(pk.encrypt(-2 * x, rng) for x in v), int(delta))


def similarity(pk, vector, query, one):
    """Level-2 E(sum_j (u_j - v_j)^2) from a contributor vector and the query."""
    beta = query.beta
    if len(vector) != 2 * beta:
        raise SchemaError("contributor vector and query disagree on beta")
    terms = []
    for j in range(beta):
        terms.append(pk.mul(one, query.squares[j]))
        terms.append(pk.mul(vector[j], query.neg_doubles[j]))
        terms.append(pk.mul(vector[beta + j], one))
    return pk.sum(terms)


def cheap_similarity(pk, vector, profile, squares):
    """Level-1 E(f^2) from the consumer side: no multiplications."""
    beta = len(profile)
    acc = None
    for j, v in enumerate(profile):
        term = pk.add(pk.add(squares[j], pk.scalar_exp(vector[j], -2 * v)), vector[beta + j])
        acc = term if acc is None else pk.add(acc, term)
    return acc


@dataclass
class MatchOutcome:
    matched: tuple
    payloads: dict               # matched index -> signed payload
    unmatched: dict              # unmatched index -> forwarded f^2
    aggregate: object = None     # AggregateSignature over ``matched``

    def to_dict(self):
        agg = None
        if self.aggregate is not None:
            agg = {"sigma": pg.encode_g1(self.aggregate.sigma).hex(),
                   "index_set": list(self.aggregate.index_set)}
        return {"matched": list(self.matched),
                "payloads": {str(i): p.hex() for i, p in self.payloads.items()},
                "unmatched": {str(i): f for i, f in self.unmatched.items()},
                "aggregate": agg}

    @classmethod
    def from_dict(cls, d):
        agg = d.get("aggregate")
        if agg is not None:
            agg = ibs.AggregateSignature(pg.decode_g1(bytes.fromhex(agg["sigma"])),
                                         tuple(agg["index_set"]))
        return cls(tuple(d["matched"]), {int(i): bytes.fromhex(p) for i, p in d["payloads"].items()},
                   {int(i): int(f) for i, f in d["unmatched"].items()}, agg)


def evaluate(pk, schema, payloads, query, decrypt, one=None):
    """Decrypted f^2 for every contributor, one quota decryption each."""
    check_fan_in(pk, schema)
    if query.beta != schema.beta:
        raise SchemaError("query and schema disagree on beta")
    one = one if one is not None else pk.one()
    return {i: decrypt(similarity(pk, schema.unpack(pk, payloads[i]), query, one))
            for i in sorted(payloads)}


def run_matching(pk, schema, payloads, query, decrypt, signatures=None, one=None):
    """Provider side.  ``payloads`` maps whitelisted index -> signed payload;
    ``decrypt`` is the quota-enforced decryption service."""
    sims = evaluate(pk, schema, payloads, query, decrypt, one)
    d2 = query.delta ** 2
    matched = tuple(i for i, f in sims.items() if f < d2)
    agg = None
    if signatures is not None:
        agg = ibs.aggregate([signatures[i] for i in matched], matched)
    return MatchOutcome(matched, {i: payloads[i] for i in matched},
                        {i: f for i, f in sims.items() if f >= d2}, agg)


def plaintext_matches(profiles, profile, delta):
    """Oracle: indexes whose squared distance to ``profile`` is below delta^2."""
    return tuple(i for i in sorted(profiles)
                 if sum((a - b) ** 2 for a, b in zip(profiles[i], profile)) < delta ** 2)


@dataclass
class MatchReport:
    accepted: bool
    reason: str = ""
    index: int = None
    checked: list = field(default_factory=list)
    sampled: list = field(default_factory=list)


def verify_matching_outcome(pk, schema, outcome, profile, query, lookup, plan, whitelist,
                            fetch=None, check_aggregate=None):
    """Consumer side.

    ``lookup(c)`` returns the plaintext of a ciphertext among those already
    released for this service (raising CacheMiss otherwise).  ``fetch(idx)``
    asks the provider for ``({index: payload}, aggregate)`` of unmatched
    contributors.  ``check_aggregate(agg, payloads)`` runs the second-layer
    signature check; pass None to skip it.
    """
    v = schema.check_profile(profile)
    d2 = query.delta ** 2
    matched, unmatched = set(outcome.matched), set(outcome.unmatched)
    if matched & unmatched or matched | unmatched != set(whitelist):
        return MatchReport(False, "outcome does not partition the whitelist")
    if set(outcome.payloads) != matched:
        return MatchReport(False, "matched payloads missing")
    if check_aggregate is not None and matched:
        if outcome.aggregate is None or tuple(outcome.aggregate.index_set) != tuple(outcome.matched):
            return MatchReport(False, "aggregate does not cover the matched set")
        if not check_aggregate(outcome.aggregate, outcome.payloads):
            return MatchReport(False, "aggregate signature rejected")

    def recompute(payload):
        try:
            return _lookup(lookup, cheap_similarity(pk, schema.unpack(pk, payload), v, query.squares))
        except SchemaError:
            return None

    report = MatchReport(True)
    # correctness: every claimed match really is below the threshold
    for i in outcome.matched:
        f = recompute(outcome.payloads[i])
        report.checked.append(i)
        if f is None or f >= d2:
            return MatchReport(False, "matched contributor fails the threshold", i, report.checked)

    # completeness: spot-check forwarded similarities of the unmatched
    sample = plan.sample(unmatched)
    report.sampled = sample
    if not sample:
        return report
    if fetch is None:
        raise ValueError("completeness checks need a fetch callback")
    fetched, agg = fetch(sample)
    if set(fetched) != set(sample):
        return MatchReport(False, "provider did not return the sampled contributors", None,
                           report.checked, sample)
    if check_aggregate is not None and not check_aggregate(agg, fetched):
        return MatchReport(False, "aggregate over sampled contributors rejected", None,
                           report.checked, sample)
    for i in sample:
        claimed = outcome.unmatched[i]
        if claimed < d2:
            return MatchReport(False, "unmatched similarity below threshold", i, report.checked, sample)
        if recompute(fetched[i]) != claimed:
            return MatchReport(False, "forwarded similarity does not match", i, report.checked, sample)
    return report


def _lookup(lookup, c):
    try:
        return lookup(c)
    except CacheMiss:
        return None
