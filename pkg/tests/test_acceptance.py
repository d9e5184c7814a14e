"""End-to-end acceptance checks, one per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line straight to the
terminal (output capture is bypassed) and then asserts.  Run just this file
with ``pytest tests/test_acceptance.py``.  The whole file takes several
minutes on one core, most of it in criterion 4.
"""
import random
import time
from fractions import Fraction

import pytest
from gmpy2 import mpz

from conftest import make_rc
from tpdm import ibs, instrument, phe
from tpdm import pairing as pg
from tpdm.identity import CacheMiss, PseudoIdentity, UnknownIdentity
from tpdm.market import bench, synth
from tpdm.market.config import SessionConfig
from tpdm.market.session import run_session
from tpdm.phe.curve import INF
from tpdm.services import fitting, matching
from tpdm.services.sampling import SamplePlan, detection_probability

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


# -- 1: homomorphic encryption ------------------------------------------------------

def scan_check(solver, op, inverse, identity, limit):
    """Count disagreements between BSGS and an incremental walk for |m| <= limit."""
    base = solver.elems[1]
    bad = int(solver.solve(identity) != 0)
    up, down = identity, identity
    inv = inverse(base)
    for m in range(1, limit + 1):
        up, down = op(up, base), op(down, inv)
        bad += (solver.solve(up) != m) + (solver.solve(down) != -m)
    return bad


def test_criterion_1_phe(report):
    t0 = time.perf_counter()
    rng = random.Random(101)
    T = 2**20
    pk, sk = phe.keygen(256, T, "bgn", rng=rng)
    fails = 0
    for _ in range(1000):
        a, b = rng.randint(-T // 2, T // 2), rng.randint(-T // 2, T // 2)
        fails += sk.decrypt(pk.add(pk.encrypt(a, rng), pk.encrypt(b, rng))) != a + b
        a, b = rng.randint(-1024, 1024), rng.randint(-1024, 1024)
        fails += sk.decrypt(pk.mul(pk.encrypt(a, rng), pk.encrypt(b, rng))) != a * b
    E = pk.curve
    scan = scan_check(sk._solver(1), E.add, E.neg, INF, 2**12)
    scan += scan_check(sk._solver(2), E.f2_mul, E.f2_conj, (mpz(1), mpz(0)), 2**12)
    took = time.perf_counter() - t0
    report(1, fails == 0 and scan == 0,
           f"{fails} failures in 10^3 add + 10^3 mul trials (256-bit BGN, T=2^20); "
           f"{scan} BSGS/scan disagreements for |m| <= 2^12 at both levels; {took:.1f} s")


# -- 2: signatures ------------------------------------------------------------------

@pytest.fixture(scope="module")
def signed():
    return bench.make_tuples(1000, seed=102, payload_bytes=64)


def forge(t, rng):
    if rng.random() < 0.5:
        return ibs.DataTuple(t.pid, t.payload, pg.g1_mul(pg.SUITE.g1, pg.random_scalar(rng)))
    d = bytearray(t.payload)
    d[rng.randrange(len(d))] ^= 1 << rng.randrange(8)
    return ibs.DataTuple(t.pid, bytes(d), t.sigma)


def test_criterion_2_signatures(report, signed):
    params, tuples = signed
    rng = random.Random(102)
    honest = sum(ibs.verify_single(params, t.pid, t.payload, t.sigma) for t in tuples)
    rejected, pairings, disagree = 0, set(), 0
    for _ in range(1000):
        n = rng.randint(1, 64)
        batch = rng.sample(tuples, n)
        k = rng.randrange(n)
        batch[k] = forge(batch[k], rng)
        with instrument.track() as c:
            rejected += not ibs.verify_batch(params, batch)
        pairings.add(c[instrument.PAIRING])
    for _ in range(1000):
        n = rng.randint(1, 12)
        rate = rng.choice((0.0, 0.0, 0.1, 0.3))
        batch = [forge(t, rng) if rng.random() < rate else t for t in rng.sample(tuples, n)]
        with instrument.track() as c:
            verdict = ibs.verify_batch(params, batch)
        pairings.add(c[instrument.PAIRING])
        disagree += verdict != all(ibs.verify_single(params, t.pid, t.payload, t.sigma) for t in batch)
    report(2, honest == 1000 and rejected == 1000 and pairings == {3} and disagree == 0,
           f"{honest}/1000 honest accepted, {rejected}/1000 single-corruption batches rejected, "
           f"batch pairings {sorted(pairings)}, {disagree}/1000 differential disagreements")


# -- 3: identity ---------------------------------------------------------------------

def test_criterion_3_identity(report):
    rc = make_rc(103)
    rng = random.Random(103)
    wrong = 0
    for _ in range(1000):
        rid = rng.randbytes(32)
        rc.register(rid, "pw")
        pid, _ = rc.issue_credentials(rid, "pw")
        wrong += rc.trace(pid) != rid
    hits = 0
    for _ in range(10_000):
        forged = PseudoIdentity(pg.g1_mul(pg.SUITE.g1, pg.random_scalar(rng)), rng.randbytes(32))
        try:
            rc.trace(forged)
            hits += 1
        except UnknownIdentity:
            pass
    report(3, wrong == 0 and hits == 0,
           f"{1000 - wrong}/1000 trace(issue(rid)) round trips, {hits} registered hits in 10^4 forged PIDs")


# -- 4: matching -------------------------------------------------------------------

def oracle_for(res):
    cfg, o = res.config, res.outcome
    if cfg.dataset:
        profiles = synth.load_dataset(cfg.dataset)[:cfg.n]
    else:
        profiles = synth.generate("matching", cfg.n, cfg.beta, cfg.theta, cfg.seed).tolist()
    white = {i: profiles[i] for i in o["whitelist"]}
    return matching.plaintext_matches(white, o["consumer_profile"], cfg.delta)


def boundary_rows(rng):
    """Rows around f^2 = 144 for the consumer profile (5,...,5)."""
    rows = [
        [9] * 9 + [5],                      # 144: on the boundary
        [1] * 9 + [5],                      # 144
        [9, 1] * 4 + [5, 5],                # 128
        [9] * 9 + [6],                      # 145
        [10] * 5 + [8, 8, 5, 5, 5],         # 143
        [10] * 5 + [2, 2, 5, 5, 5],         # 143
        [1, 9] * 5,                         # 160
        [5] * 10,                           # 0
        [7, 3] * 5,                         # 40
        [9] * 4 + [1] * 5 + [5],            # 144
    ]
    rows += [[rng.randint(0, 10) for _ in range(10)] for _ in range(30)]
    return rows


def test_criterion_4_matching(report, tmp_path):
    t0 = time.perf_counter()
    bad = []
    for s in range(50):
        res = run_session(SessionConfig(n=1000, beta=10, theta=10, delta=12, seed=4000 + s,
                                        password_iterations=1))
        if not res.accepted or tuple(res.outcome["matched"]) != oracle_for(res):
            bad.append(s)
    rows = boundary_rows(random.Random(104))
    path = tmp_path / "boundary.csv"
    path.write_text("u1,u2,u3,u4,u5,u6,u7,u8,u9,u10\n" + "".join(",".join(map(str, r)) + "\n" for r in rows))
    v = [5] * 10
    res = run_session(SessionConfig(n=len(rows), dataset=str(path), consumer_profile=v, delta=12, seed=104,
                                    password_iterations=1))
    on_boundary = [i for i, r in enumerate(rows) if sum((a - b) ** 2 for a, b in zip(r, v)) == 144]
    matched = set(res.outcome["matched"])
    boundary_ok = (res.accepted and tuple(res.outcome["matched"]) == oracle_for(res) and {0, 1, 9} <= set(on_boundary)
                   and not matched & set(on_boundary) and {2, 4, 5, 7, 8} <= matched)
    took = time.perf_counter() - t0
    report(4, not bad and boundary_ok,
           f"{50 - len(bad)}/50 sessions (n=10^3, beta=10, theta=10, delta=12) equal the plaintext oracle; "
           f"{len(on_boundary)} rows with f^2 = delta^2 left unmatched: {boundary_ok}; {took:.0f} s")


# -- 5: fitting ------------------------------------------------------------------

def test_criterion_5_fitting(report):
    t0 = time.perf_counter()
    pk, sk = phe.keygen(256, 2**20, "transparent", rng=random.Random(105))
    schema = fitting.fitting_schema(8, 10)
    exact, muls = 0, 0
    for s in range(20):
        data = synth.generate("fitting", 10_000, 8, 10, 5000 + s).tolist()
        rng = random.Random(f"{s}:enc")
        payloads = {i: schema.pack(pk, fitting.encode_profile_fitting(pk, schema, u, rng))
                    for i, u in enumerate(data)}
        with instrument.track() as c:
            fit = fitting.run_fitting(pk, schema, payloads, sk.decrypt)
        muls += c[instrument.PHE_MUL]
        oracle = fitting.plaintext_fit(data)
        exact += fit == oracle and all(isinstance(x, Fraction) for x in fit.mu)
    took = time.perf_counter() - t0
    report(5, exact == 20 and muls == 0,
           f"{exact}/20 fits (m=10^4, beta=8) equal the rational oracle exactly; provider-side mul count {muls}; "
           f"{took:.0f} s")


# -- 6: completeness sampling -------------------------------------------------------

@pytest.fixture(scope="module")
def sampled_outcome():
    pk, sk = phe.keygen(128, 2**16, "transparent", rng=random.Random(106))
    schema = matching.matching_schema(10, 10)
    rng = random.Random(106)
    profiles = {i: [rng.randint(0, 10) for _ in range(10)] for i in range(200)}
    payloads = {i: schema.pack(pk, matching.encode_profile_matching(pk, schema, u, rng))
                for i, u in profiles.items()}
    v = [5] * 10
    query = matching.make_query(pk, schema, v, 5, rng)
    released = set()

    def decrypt(c):
        m = sk.decrypt(c)
        released.add(m)
        return m

    def lookup(c):
        m = sk.lookup(c, released)
        if m is None:
            raise CacheMiss("not released")
        return m
    out = matching.run_matching(pk, schema, payloads, query, decrypt)
    return pk, schema, payloads, query, lookup, out, v


def detection_rate(sampled, c, trials, p=0.2):
    pk, schema, payloads, query, lookup, out, v = sampled
    rng = random.Random(f"cheat:{c}")
    unmatched = sorted(out.unmatched)
    bad = set(rng.sample(unmatched, round(p * len(unmatched))))
    cheat = matching.MatchOutcome(out.matched, out.payloads,
                                  {i: f + 1 if i in bad else f for i, f in out.unmatched.items()})

    def fetch(idx):
        return {i: payloads[i] for i in idx}, None
    caught = 0
    for t in range(trials):
        r = matching.verify_matching_outcome(pk, schema, cheat, v, query, lookup, SamplePlan(c, t),
                                             sorted(payloads), fetch=fetch)
        caught += not r.accepted
    return caught / trials, len(unmatched)


def test_criterion_6_detection(report, sampled_outcome):
    rate10, pool = detection_rate(sampled_outcome, 10, 10_000)
    rate26, _ = detection_rate(sampled_outcome, 26, 2000)
    target = detection_probability(0.2, 10)
    report(6, abs(rate10 - target) <= 0.03 and rate26 >= 0.99,
           f"p=0.2 over {pool} unmatched: c=10 caught {rate10:.2%} of 10^4 trials "
           f"(target {target:.1%} +- 3 points), c=26 caught {rate26:.2%} of 2000")


# -- 7 and 8: benchmarks -------------------------------------------------------------

@pytest.fixture(scope="module")
def bench_tuples():
    return bench.make_tuples(10_000, seed=107)


def test_criterion_7_vtps(report, bench_tuples, tmp_path):
    rep = bench.bench_vtps((1, 10, 100, 1000, 10_000), tmp_path, tuples=bench_tuples, repeat=3)
    vt = {(r["n"], r["mode"]): r["vtps_ms"] for r in rep.rows}
    below = all(vt[n, "batch"] < vt[n, "single"] for n in (10, 100, 1000, 10_000))
    ratio = vt[10_000, "batch"] / vt[10, "batch"]
    note = [x for x in rep.notes if x.startswith("batch VTPS")][0]
    report(7, below and ratio <= 0.5,
           f"batch < single for n >= 10: {below}; VTPS(10^4)/VTPS(10) = {ratio:.3f}; {note}")


def test_criterion_8_tracing(report, bench_tuples, tmp_path):
    params, tuples = bench_tuples
    rep = bench.bench_tracing(1024, (0.01, 0.05, 0.10, 0.20), out_dir=tmp_path, tuples=(params, tuples[:1024]))
    exact = all(r["exact"] for r in rep.rows)
    curve = (tmp_path / "tracing.csv").exists() and (tmp_path / "tracing.png").exists()
    noted = any("16%" in x for x in rep.notes)
    cross = ", ".join(f"{k} {'none' if v is None else f'{v:.3f}'}" for k, v in rep.crossover.items())
    report(8, exact and curve and noted,
           f"{sum(r['exact'] for r in rep.rows)}/{len(rep.rows)} runs exact at n=1024 "
           f"(alpha 1/5/10/20%, uniform and clustered); crossover {cross}; 16% reference noted")


# -- 9: outcome verification cost --------------------------------------------------

def test_criterion_9_verification_cost(report):
    rng = random.Random(109)
    pk, sk = phe.keygen(256, 2**20, "bgn", rng=rng)
    schema = matching.matching_schema(10, 10)
    # every matched and every sampled contributor is re-checked at about a
    # fifth of the per-contributor evaluation cost (payload decoding dominates),
    # so the population must be large next to matched + sampled for the
    # comparison to mean anything
    n = 300
    profiles = {i: [rng.randint(0, 10) for _ in range(10)] for i in range(n)}
    payloads = {i: schema.pack(pk, matching.encode_profile_matching(pk, schema, u, rng))
                for i, u in profiles.items()}
    v = [5] * 10
    query = matching.make_query(pk, schema, v, 6, rng)
    released = set()

    def decrypt(c):
        m = sk.decrypt(c)
        released.add(m)
        return m

    def lookup(c):
        m = sk.lookup(c, released)
        if m is None:
            raise CacheMiss("not released")
        return m
    one = pk.one()
    t = time.perf_counter()
    for i in sorted(payloads):
        matching.similarity(pk, schema.unpack(pk, payloads[i]), query, one)
    t_eval = time.perf_counter() - t
    out = matching.run_matching(pk, schema, payloads, query, decrypt, one=one)
    fetch = lambda idx: ({i: payloads[i] for i in idx}, None)  # noqa: E731
    with instrument.track() as c:
        t = time.perf_counter()
        r = matching.verify_matching_outcome(pk, schema, out, v, query, lookup, SamplePlan(26, 9),
                                             sorted(payloads), fetch=fetch)
        t_ver = time.perf_counter() - t
    ratio = t_ver / t_eval
    report(9, r.accepted and c[instrument.PHE_MUL] == 0 and ratio <= 0.10,
           f"256-bit BGN, n={n}: verification used {c[instrument.PHE_MUL]} muls and took {ratio:.2%} "
           f"of the homomorphic similarity evaluation ({len(out.matched)} matched + {len(r.sampled)} sampled)")
