"""Benchmarks: verification time per signature (VTPS) for single versus batch
verification, and batch-plus-tracing versus single verification when part of
the batch is forged.

``batch`` rows use one multi-exponentiation for the hashed product,
``batch_plain`` rows n separate exponentiations, so the latter tracks
T_mtp + T_exp for large n.

Both write a CSV and a PNG plot and return a :class:`BenchReport`.  Absolute
times are whatever this host delivers; only the shapes are meaningful.
"""
import csv
import random
import statistics
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .. import ibs, instrument
from .. import pairing as pg
from ..identity import RegistrationCenter
from ..tracing import l_depth_trace

# crossover corruption rate reported for the original 159-bit MNT setup;
# printed for reference only, never asserted
REFERENCE_CROSSOVER = 0.16


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    micro: dict = field(default_factory=dict)
    counters: Counter = field(default_factory=Counter)
    csv_path: str = None
    plot_path: str = None
    notes: list = field(default_factory=list)
    crossover: dict = field(default_factory=dict)

    def summary(self):
        lines = [f"{k}: {v:.4f} ms" for k, v in sorted(self.micro.items())]
        lines += self.notes
        if self.csv_path:
            lines.append(f"csv: {self.csv_path}")
        if self.plot_path:
            lines.append(f"plot: {self.plot_path}")
        return "\n".join(lines)


def make_tuples(n, seed=0, payload_bytes=256):
    """n honestly signed tuples over random payloads, plus the system params."""
    rng = random.Random(f"{seed}:bench")
    rc = RegistrationCenter.setup(128, 2**10, "transparent", rng=rng, iterations=1)
    out = []
    for i in range(n):
        rid = rng.randbytes(32)
        rc.register(rid, "pw")
        pid, sk = rc.issue_credentials(rid, "pw")
        d = rng.randbytes(payload_bytes)
        out.append(ibs.DataTuple(pid, d, ibs.sign(rc.params, sk, d)))
    return rc.params, out


def _timeit(fn, repeat):
    best = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t)
    return statistics.median(best)


def micro_bench(params, samples=200, seed=0):
    """Host costs in ms of one pairing, one hash-to-G1 and one G1 exponentiation."""
    rng = random.Random(seed)
    pts = [pg.g1_mul(params.g1, pg.random_scalar(rng)) for _ in range(8)]
    msgs = [rng.randbytes(32) for _ in range(samples)]
    ks = [pg.random_scalar(rng) for _ in range(samples)]
    t = time.perf_counter()
    for i in range(max(20, samples // 10)):
        pg.pair(pts[i % 8], params.g2)
    t_par = (time.perf_counter() - t) / max(20, samples // 10)
    t = time.perf_counter()
    for m in msgs:
        pg.hash_to_g1(m)
    t_mtp = (time.perf_counter() - t) / samples
    t = time.perf_counter()
    for i, k in enumerate(ks):
        pg.g1_mul(pts[i % 8], k)
    t_exp = (time.perf_counter() - t) / samples
    return {"T_par": t_par * 1e3, "T_mtp": t_mtp * 1e3, "T_exp": t_exp * 1e3}


def bench_vtps(ns=(1, 10, 100, 1000, 10000), out_dir=".", seed=0, single_cap=200, repeat=3,
               tuples=None, plot=True):
    """VTPS per n for batch and single verification.

    Single verification costs the same for every signature, so it is timed on
    at most ``single_cap`` tuples per n.  Batch mode asserts 3 pairings.
    """
    ns = sorted(ns)
    if tuples is None:
        params, tuples = make_tuples(max(ns), seed)
    else:
        params, tuples = tuples
    rep = BenchReport()
    rep.micro = micro_bench(params, seed=seed)
    for n in ns:
        batch = tuples[:n]
        with instrument.track() as c:
            assert ibs.verify_batch(params, batch)
        if c[instrument.PAIRING] != 3:
            raise AssertionError(f"batch verification used {c[instrument.PAIRING]} pairings")
        reps = max(repeat, min(50, 2000 // n))
        t = _timeit(lambda: ibs.verify_batch(params, batch), reps)
        rep.rows.append({"n": n, "mode": "batch", "vtps_ms": t / n * 1e3, "pairings": 3})
        t = _timeit(lambda: ibs.verify_batch(params, batch, multiexp=False), reps)
        rep.rows.append({"n": n, "mode": "batch_plain", "vtps_ms": t / n * 1e3, "pairings": 3})
        k = min(n, single_cap)
        sub = tuples[:k]
        with instrument.track() as c:
            t = _timeit(lambda: all(ibs.verify_single(params, x.pid, x.payload, x.sigma) for x in sub), 1)
        if c[instrument.PAIRING] != 3 * k:
            raise AssertionError("single verification must use 3 pairings per signature")
        rep.rows.append({"n": n, "mode": "single", "vtps_ms": t / k * 1e3, "pairings": 3 * n})
        rep.counters[instrument.PAIRING] += 3 + 3 * n
    asym = rep.micro["T_mtp"] + rep.micro["T_exp"]
    for mode in ("batch_plain", "batch"):
        last = [r for r in rep.rows if r["mode"] == mode][-1]
        rep.notes.append(f"{mode} VTPS at n={last['n']}: {last['vtps_ms']:.4f} ms = "
                         f"{last['vtps_ms'] / asym:.2f} x (T_mtp + T_exp = {asym:.4f} ms)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep.csv_path = str(out / "vtps.csv")
    _write_csv(rep.csv_path, rep.rows, ["n", "mode", "vtps_ms", "pairings"])
    if plot:
        rep.plot_path = str(out / "vtps.png")
        _plot_vtps(rep, asym)
    return rep


def corrupt(tuples, indexes, params, seed=0):
    rng = random.Random(f"{seed}:forge")
    bad = set(indexes)
    return [ibs.DataTuple(t.pid, t.payload, pg.g1_mul(params.g1, pg.random_scalar(rng))) if i in bad else t
            for i, t in enumerate(tuples)]


def pick_invalid(n, alpha, pattern, rng):
    k = round(alpha * n)
    if k == 0:
        return []
    if pattern == "uniform":
        return sorted(rng.sample(range(n), k))
    if pattern == "clustered":
        start = rng.randrange(n - k + 1)
        return list(range(start, start + k))
    raise ValueError(f"unknown corruption pattern {pattern!r}")


def bench_tracing(n=1024, alphas=(0.0, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20),
                  patterns=("uniform", "clustered"), depth=None, out_dir=".", seed=0, single_cap=None,
                  tuples=None, plot=True):
    """Batch verification plus tracing against plain single verification."""
    if tuples is None:
        params, tuples = make_tuples(n, seed)
    else:
        params, tuples = tuples
    tuples = tuples[:n]
    rep = BenchReport()
    k = len(tuples) if single_cap is None else min(single_cap, len(tuples))
    t = time.perf_counter()
    for x in tuples[:k]:
        ibs.verify_single(params, x.pid, x.payload, x.sigma)
    single = (time.perf_counter() - t) / k * 1e3
    rep.micro = {"single_vtps": single}
    rng = random.Random(f"{seed}:alpha")
    for pattern in patterns:
        for alpha in alphas:
            bad = pick_invalid(n, alpha, pattern, rng)
            forged = corrupt(tuples, bad, params, seed)
            t = time.perf_counter()
            with instrument.track() as c:
                if ibs.verify_batch(params, forged):
                    white, black, resub, calls = list(range(n)), [], [], 1
                else:
                    res = l_depth_trace(params, forged, depth)
                    white, black, resub = res.whitelist, res.blacklist, res.resubmit_list
                    calls = res.verification_call_count + 1
            elapsed = time.perf_counter() - t
            rep.counters.update(c)
            rep.rows.append({"pattern": pattern, "alpha": alpha, "invalid": len(bad),
                             "calls": calls, "pairings": c[instrument.PAIRING],
                             "batch_vtps_ms": elapsed / n * 1e3, "single_vtps_ms": single,
                             "exact": black == bad and not resub and len(white) == n - len(bad)})
        rep.crossover[pattern] = crossover(
            [(r["alpha"], r["batch_vtps_ms"] - r["single_vtps_ms"]) for r in rep.rows if r["pattern"] == pattern])
    for pattern, x in rep.crossover.items():
        where = "not reached in the sweep" if x is None else f"at alpha = {x:.3f}"
        rep.notes.append(f"{pattern}: batch+tracing stops beating single verification {where}")
    rep.notes.append(f"reference crossover from the original MNT159 measurements: {REFERENCE_CROSSOVER:.0%} "
                     "(hardware relative, not asserted)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep.csv_path = str(out / "tracing.csv")
    _write_csv(rep.csv_path, rep.rows, ["pattern", "alpha", "invalid", "calls", "pairings",
                                        "batch_vtps_ms", "single_vtps_ms", "exact"])
    if plot:
        rep.plot_path = str(out / "tracing.png")
        _plot_tracing(rep)
    return rep


def crossover(points):
    """First alpha where the difference (batch - single) turns non-negative,
    linearly interpolated; None if it never does."""
    points = sorted(points)
    prev = None
    for a, d in points:
        if d >= 0:
            if prev is None:
                return a
            a0, d0 = prev
            return a0 + (a - a0) * (-d0) / (d - d0)
        prev = (a, d)
    return None


def _write_csv(path, rows, cols):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _plot_vtps(rep, asym):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for mode, style in (("single", "s--"), ("batch_plain", "^-"), ("batch", "o-")):
        pts = [(r["n"], r["vtps_ms"]) for r in rep.rows if r["mode"] == mode]
        ax.plot(*zip(*pts), style, label=mode)
    ax.axhline(asym, color="grey", lw=0.8, ls=":", label="T_mtp + T_exp")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("number of signatures n")
    ax.set_ylabel("VTPS (ms)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(rep.plot_path, dpi=120)
    plt.close(fig)


def _plot_tracing(rep):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for pattern in sorted({r["pattern"] for r in rep.rows}):
        pts = [(r["alpha"], r["batch_vtps_ms"]) for r in rep.rows if r["pattern"] == pattern]
        ax.plot(*zip(*pts), "o-", label=f"batch + tracing ({pattern})")
    ax.axhline(rep.micro["single_vtps"], color="k", ls="--", label="single verification")
    ax.axvline(REFERENCE_CROSSOVER, color="grey", lw=0.8, ls=":")
    ax.set_xlabel("fraction of invalid signatures")
    ax.set_ylabel("VTPS (ms)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(rep.plot_path, dpi=120)
    plt.close(fig)
