import json
import random

import numpy as np
import pytest

from tpdm import instrument
from tpdm.market import bench, synth
from tpdm.market.config import ConfigError, SessionConfig
from tpdm.market.session import replay, run_session
from tpdm.services import fitting, matching

# -- config ----------------------------------------------------------------------------


def test_config_round_trip(tmp_path):
    cfg = SessionConfig(n=20, seed=5, depth=3, consumer_profile=[1] * 10)
    path = tmp_path / "cfg.json"
    cfg.save(path)
    assert SessionConfig.load(path) == cfg
    assert cfg.session_id == "matching-5"


@pytest.mark.parametrize("bad", [
    {"service": "auction"}, {"backend": "paillier"}, {"n": 0}, {"depth": -1},
    {"corrupt_fraction": 1.5}, {"consumer_profile": [1, 2]}, {"digest": "md5"},
    {"theta": 400},                                   # beta * theta^2 > bound
    {"service": "fitting", "n": 20000},               # n * theta^2 > bound
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        SessionConfig(**bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        SessionConfig.from_dict({"n": 3, "colour": "red"})


# -- synthetic data --------------------------------------------------------------------------

def test_generation_is_byte_identical(tmp_path):
    a = synth.gen_synthetic("matching", 50, 4, 10, 3, tmp_path / "a.csv")
    b = synth.gen_synthetic("matching", 50, 4, 10, 3, tmp_path / "b.csv")
    assert open(a, "rb").read() == open(b, "rb").read()
    assert synth.load_dataset(a, 10) == synth.generate("matching", 50, 4, 10, 3).tolist()


@pytest.mark.parametrize("dist", synth.DISTRIBUTIONS)
def test_rating_bound_respected(dist):
    x = synth.generate("matching", 100_000, 10, 10, 4, distribution=dist)
    assert x.shape == (100_000, 10)
    assert x.min() >= 0 and x.max() <= 10


def test_zipf_is_skewed():
    x = synth.generate("matching", 5000, 4, 10, 5, distribution="zipf")
    counts = np.bincount(x.ravel(), minlength=11)
    assert counts[0] > counts[5] > counts[10]


def test_gaussian_recovers_generator():
    mu = np.array([3.0, 5.0, 7.0])
    sigma = np.array([[1.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 0.8]])
    x = synth.generate("fitting", 10_000, 3, 10, 6, mu=mu, sigma=sigma)
    fit = fitting.plaintext_fit(x.tolist())
    m, s = fit.as_arrays()
    assert np.allclose(m, mu, atol=0.05)
    # rounding to integers adds about 1/12 to each variance
    assert np.allclose(s, sigma + np.eye(3) / 12, atol=0.08)


def test_synth_errors(tmp_path):
    with pytest.raises(ValueError):
        synth.generate("matching", 0, 3, 10, 1)
    with pytest.raises(ValueError):
        synth.generate("matching", 3, 3, 10, 1, distribution="cauchy")
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        synth.load_dataset(p)
    p.write_text("u1,u2\n1,2\n3\n")
    with pytest.raises(ValueError):
        synth.load_dataset(p)
    p.write_text("u1,u2\n1,20\n")
    with pytest.raises(ValueError):
        synth.load_dataset(p, theta=10)


# -- sessions ---------------------------------------------------------------------------

def oracle_match(cfg, outcome):
    profiles = synth.generate("matching", cfg.n, cfg.beta, cfg.theta, cfg.seed).tolist()
    white = set(outcome["whitelist"])
    return matching.plaintext_matches({i: profiles[i] for i in white}, outcome["consumer_profile"], cfg.delta)


def test_honest_matching_session(tmp_path):
    cfg = SessionConfig(n=100, seed=1)
    path = tmp_path / "t.jsonl"
    res = run_session(cfg, path)
    assert res.accepted, res.outcome
    o = res.outcome
    assert o["first_layer_ok"] and o["whitelist"] == list(range(100))
    assert tuple(o["matched"]) == oracle_match(cfg, o)
    assert o["ledger"]["balanced"] and o["ledger"]["board_chain_ok"]
    assert o["ledger"]["decryptions"] <= o["ledger"]["quota"]
    assert res.counters[instrument.PAIRING] >= 3
    assert replay(path) == (True, None)


def test_replay_detects_edits(tmp_path):
    path = tmp_path / "t.jsonl"
    run_session(SessionConfig(n=10, seed=2), path)
    lines = path.read_text().splitlines()
    rec = json.loads(lines[-1])
    rec["matched"] = rec["matched"] + [999]
    lines[-1] = json.dumps(rec, sort_keys=True, separators=(",", ":"))
    path.write_text("\n".join(lines) + "\n")
    ok, seq = replay(path)
    assert not ok and seq == rec["seq"]


def test_corrupted_signatures_traced_and_revoked():
    cfg = SessionConfig(n=100, seed=3, corrupt_fraction=0.05)
    res = run_session(cfg)
    o = res.outcome
    assert res.accepted
    assert not o["first_layer_ok"]
    assert len(o["blacklist"]) == 5 and o["resubmit"] == []
    assert o["revoked"] == 5
    assert len([r for r in res.board.snapshot() if r["kind"] == "revocation"]) == 5
    assert o["ledger"]["balanced"]
    assert tuple(o["matched"]) == oracle_match(cfg, o)


def test_depth_limited_session_balances():
    res = run_session(SessionConfig(n=64, seed=4, corrupt_fraction=0.1, depth=2))
    o = res.outcome
    assert o["resubmit"]
    assert o["ledger"]["balanced"]
    assert set(o["whitelist"]).isdisjoint(o["resubmit"])


def test_cheating_provider_caught():
    res = run_session(SessionConfig(n=100, seed=5, cheat_fraction=0.2, checks=26))
    assert res.outcome["status"] == "ok"
    assert not res.accepted
    assert res.outcome["verification"]["reason"]


def test_fitting_session():
    cfg = SessionConfig(service="fitting", n=60, beta=3, seed=6, refit_fraction=0.2)
    res = run_session(cfg)
    assert res.accepted, res.outcome
    data = synth.generate("fitting", 60, 3, 10, 6).tolist()
    assert fitting.GaussianFit.from_dict(res.outcome["fit"]) == fitting.plaintext_fit(data)
    assert res.counters[instrument.PHE_MUL] == 0
    assert res.outcome["ledger"]["balanced"]


def test_session_from_dataset(tmp_path):
    path = synth.gen_synthetic("matching", 30, 4, 10, 7, tmp_path / "d.csv")
    res = run_session(SessionConfig(n=30, beta=4, seed=7, dataset=str(path), consumer_profile=[5, 5, 5, 5],
                                    delta=6))
    assert res.accepted
    profiles = dict(enumerate(synth.load_dataset(path)))
    assert tuple(res.outcome["matched"]) == matching.plaintext_matches(profiles, [5, 5, 5, 5], 6)


def test_failure_is_recorded(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("u1,u2\n1,2\n")
    res = run_session(SessionConfig(n=5, beta=2, dataset=str(path)))
    assert res.outcome["status"] == "failed"
    assert "dataset" in res.outcome["error"]
    assert any(r["type"] == "error" for r in res.transcript)


def test_bgn_session():
    res = run_session(SessionConfig(n=8, beta=3, theta=5, delta=4, backend="bgn", phe_bits=128,
                                    bound=2**10, seed=8, checks=5))
    assert res.accepted, res.outcome


def test_session_accepts_dict():
    assert run_session({"n": 5, "seed": 9}).accepted


def test_transcript_has_no_timings():
    res = run_session(SessionConfig(n=5, seed=10))
    text = json.dumps(res.transcript)
    assert "perf" not in text and "time" not in text


# -- benchmarks ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bench_tuples():
    return bench.make_tuples(64, seed=1)


def test_bench_vtps_small(tmp_path, bench_tuples):
    rep = bench.bench_vtps((1, 10, 40), tmp_path, tuples=bench_tuples, repeat=1)
    modes = {(r["n"], r["mode"]) for r in rep.rows}
    assert modes == {(n, m) for n in (1, 10, 40) for m in ("batch", "batch_plain", "single")}
    assert all(r["pairings"] == 3 for r in rep.rows if r["mode"] != "single")
    assert (tmp_path / "vtps.csv").exists() and (tmp_path / "vtps.png").exists()
    assert set(rep.micro) == {"T_par", "T_mtp", "T_exp"}
    assert "T_mtp + T_exp" in rep.summary()


def test_bench_tracing_small(tmp_path, bench_tuples):
    rep = bench.bench_tracing(64, (0.0, 0.05, 0.2), out_dir=tmp_path, tuples=bench_tuples, plot=False)
    assert all(r["exact"] for r in rep.rows)
    zero = [r for r in rep.rows if r["alpha"] == 0]
    assert all(r["calls"] == 1 and r["pairings"] == 3 for r in zero)
    assert (tmp_path / "tracing.csv").exists()
    assert "16%" in rep.summary()
    # counters gathered by the report are the instrumentation totals
    assert rep.counters[instrument.PAIRING] == sum(r["pairings"] for r in rep.rows)


def test_pick_invalid():
    rng = random.Random(1)
    u = bench.pick_invalid(100, 0.1, "uniform", rng)
    c = bench.pick_invalid(100, 0.1, "clustered", rng)
    assert len(u) == len(c) == 10
    assert c == list(range(c[0], c[0] + 10))
    assert bench.pick_invalid(100, 0.0, "uniform", rng) == []
    with pytest.raises(ValueError):
        bench.pick_invalid(100, 0.1, "striped", rng)


def test_crossover_interpolation():
    assert bench.crossover([(0, -2), (0.1, -1), (0.2, 1)]) == pytest.approx(0.15)
    assert bench.crossover([(0, -1), (0.2, -0.5)]) is None
    assert bench.crossover([(0, 0.5)]) == 0
