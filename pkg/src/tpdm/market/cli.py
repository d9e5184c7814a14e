"""Command line front end.

Protocol commands work on a state directory (``--state``, default
``./tpdm-state``) holding the registration center's secrets and the two
append-only logs::

    rc.json          master keys (s1, s2), PHE key pair, digest, password cost
    registry.jsonl   registration database (register / revoke operations)
    board.jsonl      bulletin board (see ``tpdm.board`` for the record layout)

Typical flow::

    tpdm keygen --backend bgn
    tpdm register --rid <hex> --password pw
    tpdm issue --rid <hex> --password pw --out alice.json
    tpdm submit --cred alice.json --profile 3,4,5,... --out subs.jsonl
    tpdm verify --submissions subs.jsonl --session s1
    tpdm match --submissions subs.jsonl --session s1 --profile 2,2,... --delta 12
    tpdm trace --session s1 --revoke

``run`` and ``replay`` drive the whole in-process simulation from a config
file, ``bench`` writes the CSV and plot artifacts and ``gen`` writes
synthetic datasets.
"""
import argparse
import json
import random
import sys
from pathlib import Path

from .. import ibs, phe
from .. import pairing as pg
from ..board import BulletinBoard
from ..identity import (
    DEFAULT_PBKDF2_ITERATIONS, IdentityError, MasterKeys, PseudoIdentity, RegistrationCenter, Registry,
)
from ..services import fitting, matching
from ..services.sampling import SamplePlan
from ..tracing import l_depth_trace
from . import bench, synth
from .config import SessionConfig
from .session import decode_tuple, ibs_keys, replay, run_session

DEFAULT_STATE = "tpdm-state"


class CliError(Exception):
    pass


# -- state --------------------------------------------------------------------

def _rng(seed):
    return phe.system_rng() if seed is None else random.Random(f"{seed}:cli")


def save_rc(state, rc):
    state = Path(state)
    sk = rc.phe_sk
    data = {"s1": hex(rc.master.s1), "s2": hex(rc.master.s2), "phe_pk": sk.pk.to_dict(),
            "phe_sk": sk.to_dict(), "digest": rc.params.digest, "iterations": rc.iterations,
            "cache_ttl": rc.cache_ttl}
    (state / "rc.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_rc(state, seed=None):
    state = Path(state)
    path = state / "rc.json"
    if not path.exists():
        raise CliError(f"no registration center in {state}; run 'tpdm keygen' first")
    d = json.loads(path.read_text())
    pk = phe.public_key_from_dict(d["phe_pk"])
    sk = phe.secret_key_from_dict(pk, d["phe_sk"])
    return RegistrationCenter(MasterKeys(int(d["s1"], 16), int(d["s2"], 16)), sk,
                              board=BulletinBoard(state / "board.jsonl"),
                              registry=Registry(state / "registry.jsonl"), digest=d["digest"],
                              iterations=d["iterations"], cache_ttl=d.get("cache_ttl"), rng=_rng(seed))


def _profile(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"profile must be comma separated integers, got {text!r}") from None


def _read_submissions(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _schema(service, beta, theta):
    return (matching.matching_schema if service == "matching" else fitting.fitting_schema)(beta, theta)


def _print(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


# -- protocol commands --------------------------------------------------------

def cmd_keygen(a):
    state = Path(a.state)
    if (state / "rc.json").exists() and not a.force:
        raise CliError(f"{state} already holds a registration center (use --force to replace it)")
    state.mkdir(parents=True, exist_ok=True)
    for name in ("board.jsonl", "registry.jsonl"):
        (state / name).unlink(missing_ok=True)
    rc = RegistrationCenter.setup(a.bits, a.bound, a.backend, rng=_rng(a.seed),
                                  board=BulletinBoard(state / "board.jsonl"),
                                  registry=Registry(state / "registry.jsonl"), digest=a.digest,
                                  iterations=a.iterations, cache_ttl=a.cache_ttl)
    save_rc(state, rc)
    print(f"registration center ready in {state} ({a.backend}, {a.bits}-bit PHE modulus, T={a.bound})")


def cmd_register(a):
    rc = load_rc(a.state, a.seed)
    rid = bytes.fromhex(a.rid) if a.rid else _rng(a.seed).randbytes(32)
    rc.register(rid, a.password)
    print(rid.hex())


def cmd_issue(a):
    rc = load_rc(a.state, a.seed)
    pid, sk = rc.issue_credentials(bytes.fromhex(a.rid), a.password)
    cred = {"pid": pid.encode().hex(), "sk1": pg.encode_g1(sk.sk1).hex(), "sk2": pg.encode_g1(sk.sk2).hex()}
    if a.out:
        Path(a.out).write_text(json.dumps(cred, indent=2) + "\n")
        print(f"credentials written to {a.out}")
    else:
        _print(cred)


def cmd_submit(a):
    rc = load_rc(a.state, a.seed)
    params = rc.params
    cred = json.loads(Path(a.cred).read_text())
    pid = PseudoIdentity.decode(bytes.fromhex(cred["pid"]))
    schema = _schema(a.service, a.beta, a.theta)
    profile = _profile(a.profile)
    pk, rng = params.phe_pk, _rng(a.seed)
    if a.service == "matching":
        cts = matching.encode_profile_matching(pk, schema, profile, rng)
    else:
        cts = fitting.encode_profile_fitting(pk, schema, profile, rng)
    payload = schema.pack(pk, cts)
    if a.forge:
        sigma = pg.g1_mul(params.g1, pg.random_scalar(rng))
    else:
        sigma = ibs.sign(params, ibs_keys(cred), payload)
    rec = {"pid": pid.encode().hex(), "payload": payload.hex(), "sigma": pg.encode_g1(sigma).hex()}
    with open(a.out, "a") as fh:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"appended a {schema.length}-ciphertext submission to {a.out}")


def cmd_verify(a):
    rc = load_rc(a.state)
    tuples = [decode_tuple(m) for m in _read_submissions(a.submissions)]
    if not tuples:
        raise CliError("no submissions to verify")
    keys = [t.pid.key for t in tuples]
    if len(set(keys)) != len(keys):
        raise CliError("duplicate pseudo identity among the submissions")
    ok = ibs.verify_batch(rc.params, tuples)
    if ok:
        white, black, resub, calls = list(range(len(tuples))), [], [], 0
    else:
        res = l_depth_trace(rc.params, tuples, a.depth)
        white, black, resub, calls = res.whitelist, res.blacklist, res.resubmit_list, res.verification_call_count
    if a.post:
        board = rc.board
        for i, t in enumerate(tuples):
            board.post("pid", {"session": a.session, "index": i, "pid": t.pid.encode().hex()})
        for kind, idx in (("whitelist", white), ("blacklist", black), ("resubmit", resub)):
            if idx:
                board.post(kind, {"session": a.session, "indexes": idx})
    _print({"session": a.session, "first_layer_ok": ok, "trace_calls": calls,
            "whitelist": white, "blacklist": black, "resubmit": resub})


def _whitelisted(rc, a):
    subs = _read_submissions(a.submissions)
    white = rc.board.whitelist(a.session)
    if not white:
        raise CliError(f"session {a.session!r} has no whitelist on the board; run 'tpdm verify' first")
    tuples = {i: decode_tuple(subs[i]) for i in white}
    for i, t in tuples.items():
        if rc.board.pid(a.session, i) != t.pid.encode().hex():
            raise CliError(f"submission {i} differs from the pseudo identity on the board")
    return tuples


def _check_aggregate(rc, a):
    def check(agg, payloads):
        if agg is None:
            return False
        idx = list(agg.index_set)
        pids = [PseudoIdentity.decode(bytes.fromhex(rc.board.pid(a.session, i))) for i in idx]
        return ibs.verify_aggregate(rc.params, agg, pids, [payloads[i] for i in idx])
    return check


def cmd_match(a):
    rc = load_rc(a.state, a.seed)
    pk = rc.params.phe_pk
    schema = _schema("matching", a.beta, a.theta)
    tuples = _whitelisted(rc, a)
    profile = _profile(a.profile)
    rng = _rng(a.seed)
    query = matching.make_query(pk, schema, profile, a.delta, rng)
    service = f"{a.session}/matching"
    rc.publish_quota(service, len(tuples))
    payloads = {i: t.payload for i, t in tuples.items()}
    sigs = {i: t.sigma for i, t in tuples.items()}
    out = matching.run_matching(pk, schema, payloads, query, lambda c: rc.quota_decrypt(service, c), sigs,
                                one=pk.encrypt(1, rng))

    def fetch(indexes):
        return ({i: payloads[i] for i in indexes}, ibs.aggregate([sigs[i] for i in indexes], list(indexes)))

    report = matching.verify_matching_outcome(
        pk, schema, out, profile, query, lambda c: rc.verify_lookup(service, c),
        SamplePlan(a.checks, a.seed or 0), sorted(tuples), fetch=fetch,
        check_aggregate=_check_aggregate(rc, a))
    _print({"matched": list(out.matched), "unmatched": {str(i): f for i, f in sorted(out.unmatched.items())},
            "verification": {"accepted": report.accepted, "reason": report.reason}})


def cmd_fit(a):
    rc = load_rc(a.state, a.seed)
    pk = rc.params.phe_pk
    schema = _schema("fitting", a.beta, a.theta)
    tuples = _whitelisted(rc, a)
    service = f"{a.session}/fitting"
    rc.publish_quota(service, schema.length)
    payloads = {i: t.payload for i, t in tuples.items()}
    fit = fitting.run_fitting(pk, schema, payloads, lambda c: rc.quota_decrypt(service, c))
    agg = ibs.aggregate([tuples[i].sigma for i in sorted(tuples)], sorted(tuples))
    report = fitting.verify_fitting_outcome(
        pk, schema, fit, payloads, lambda c: rc.verify_lookup(service, c),
        fitting.FitCheckPlan(cov_entries="all"), check_aggregate=_check_aggregate(rc, a), aggregate=agg)
    mu, sigma = fitting.fit_to_rows(fit, a.digits)
    _print({"m": fit.m, "mu": mu, "sigma": sigma, "exact": fit.to_dict(),
            "verification": {"accepted": report.accepted, "reason": report.reason}})


def cmd_trace(a):
    """Phase V: resolve the session's blacklisted pseudo identities."""
    rc = load_rc(a.state)
    found = []
    for i in rc.board.blacklist(a.session):
        pid = PseudoIdentity.decode(bytes.fromhex(rc.board.pid(a.session, i)))
        rid = rc.trace(pid)
        row = {"index": i, "rid": rid.hex()}
        if a.revoke:
            row["revoked"] = rc.revoke(rid)
        found.append(row)
    _print(found)


# -- rc subcommands -----------------------------------------------------------

def cmd_rc_trace(a):
    rc = load_rc(a.state)
    print(rc.trace(PseudoIdentity.decode(bytes.fromhex(a.pid))).hex())


def cmd_rc_revoke(a):
    rc = load_rc(a.state)
    changed = rc.revoke(bytes.fromhex(a.rid))
    print("revoked" if changed else "already revoked")


def cmd_board_show(a):
    board = BulletinBoard(Path(a.state) / "board.jsonl")
    for rec in board.snapshot():
        if a.kind and rec["kind"] != a.kind:
            continue
        body = json.dumps(rec["body"], sort_keys=True)
        if len(body) > a.width and not a.full:
            body = body[:a.width - 3] + "..."
        print(f"{rec['seq']:>5} {rec['kind']:<10} {body}")
    print(f"chain ok: {board.verify_chain()} ({len(board)} records)")


# -- simulation, data and benchmarks -------------------------------------------

def _set_pairs(pairs):
    out = {}
    for item in pairs or []:
        key, _, value = item.partition("=")
        if not _:
            raise CliError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def cmd_run(a):
    cfg = SessionConfig.load(a.config).to_dict() if a.config else {}
    cfg.update(_set_pairs(a.set))
    res = run_session(SessionConfig.from_dict(cfg), a.transcript)
    summary = {k: v for k, v in res.outcome.items() if k not in ("whitelist", "unmatched")}
    summary["whitelist_size"] = len(res.outcome.get("whitelist", []))
    summary["timings_s"] = {k: round(v, 4) for k, v in res.timings.items()}
    summary["counters"] = dict(res.counters)
    _print(summary)
    return 0 if res.accepted else 1


def cmd_replay(a):
    ok, seq = replay(a.transcript)
    print("identical" if ok else f"differs from record {seq}")
    return 0 if ok else 1


def cmd_gen(a):
    synth.gen_synthetic(a.kind, a.n, a.beta, a.theta, a.seed, a.out, distribution=a.distribution)
    print(f"wrote {a.n} x {a.beta} {a.kind} dataset to {a.out}")


def _floats(text):
    return [float(x) for x in text.split(",")]


def cmd_bench_vtps(a):
    ns = [int(x) for x in a.ns.split(",")]
    rep = bench.bench_vtps(ns, a.out, a.seed, a.single_cap, a.repeat, plot=not a.no_plot)
    print(rep.summary())


def cmd_bench_tracing(a):
    rep = bench.bench_tracing(a.n, _floats(a.alphas), a.patterns.split(","), a.depth, a.out, a.seed,
                              plot=not a.no_plot)
    print(rep.summary())


# -- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="tpdm", description="Trading private data: protocol tools, "
                                "market simulation and benchmarks.")
    sub = p.add_subparsers(dest="command", required=True)

    def state(sp, seed=False):
        sp.add_argument("--state", default=DEFAULT_STATE, help="state directory (default %(default)s)")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="seed for reproducible randomness")
        return sp

    def register_args(sp):
        state(sp, seed=True)
        sp.add_argument("--rid", help="32-byte real identity as hex (random if omitted)")
        sp.add_argument("--password", required=True)
        sp.set_defaults(func=cmd_register)

    def issue_args(sp):
        state(sp, seed=True)
        sp.add_argument("--rid", required=True)
        sp.add_argument("--password", required=True)
        sp.add_argument("--out", help="credential file (printed if omitted)")
        sp.set_defaults(func=cmd_issue)

    sp = state(sub.add_parser("keygen", help="set up a registration center"), seed=True)
    sp.add_argument("--backend", choices=sorted(phe.BACKENDS), default="bgn")
    sp.add_argument("--bits", type=int, default=256, help="PHE modulus size")
    sp.add_argument("--bound", type=int, default=2**20, help="plaintext bound T")
    sp.add_argument("--digest", choices=("sha256", "sha1"), default="sha256")
    sp.add_argument("--iterations", type=int, default=DEFAULT_PBKDF2_ITERATIONS, help="PBKDF2 rounds")
    sp.add_argument("--cache-ttl", type=float, default=None, help="plaintext cache lifetime in seconds")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_keygen)

    register_args(sub.add_parser("register", help="register a real identity"))
    issue_args(sub.add_parser("issue", help="issue a pseudo identity and signing key"))

    sp = state(sub.add_parser("submit", help="encrypt, sign and append a submission"), seed=True)
    sp.add_argument("--cred", required=True)
    sp.add_argument("--service", choices=("matching", "fitting"), default="matching")
    sp.add_argument("--beta", type=int, default=10)
    sp.add_argument("--theta", type=int, default=10)
    sp.add_argument("--profile", required=True, help="comma separated ratings")
    sp.add_argument("--out", required=True, help="submissions file (JSON lines, appended)")
    sp.add_argument("--forge", action="store_true", help="attach an invalid signature")
    sp.set_defaults(func=cmd_submit)

    sp = state(sub.add_parser("verify", help="batch-verify submissions, tracing on failure"))
    sp.add_argument("--submissions", required=True)
    sp.add_argument("--session", default="cli")
    sp.add_argument("--depth", type=int, default=None, help="tracing depth limit (unlimited if omitted)")
    sp.add_argument("--no-post", dest="post", action="store_false", help="do not write to the board")
    sp.set_defaults(func=cmd_verify)

    for name, func in (("match", cmd_match), ("fit", cmd_fit)):
        sp = state(sub.add_parser(name, help=f"run and check the {name}ing service"), seed=True)
        sp.add_argument("--submissions", required=True)
        sp.add_argument("--session", default="cli")
        sp.add_argument("--beta", type=int, default=10)
        sp.add_argument("--theta", type=int, default=10)
        if name == "match":
            sp.add_argument("--profile", required=True, help="consumer profile V")
            sp.add_argument("--delta", type=int, default=12)
            sp.add_argument("--checks", type=int, default=26, help="completeness spot checks")
        else:
            sp.add_argument("--digits", type=int, default=6)
        sp.set_defaults(func=func)

    sp = state(sub.add_parser("trace", help="reveal (and revoke) blacklisted contributors"))
    sp.add_argument("--session", default="cli")
    sp.add_argument("--revoke", action="store_true")
    sp.set_defaults(func=cmd_trace)

    rc = sub.add_parser("rc", help="registration center operations")
    rsub = rc.add_subparsers(dest="rc_command", required=True)
    register_args(rsub.add_parser("register"))
    issue_args(rsub.add_parser("issue"))
    sp = state(rsub.add_parser("trace"))
    sp.add_argument("--pid", required=True, help="pseudo identity as hex")
    sp.set_defaults(func=cmd_rc_trace)
    sp = state(rsub.add_parser("revoke"))
    sp.add_argument("--rid", required=True)
    sp.set_defaults(func=cmd_rc_revoke)
    board = rsub.add_parser("board")
    bsub = board.add_subparsers(dest="board_command", required=True)
    sp = state(bsub.add_parser("show"))
    sp.add_argument("--kind", help="only records of this kind")
    sp.add_argument("--width", type=int, default=100)
    sp.add_argument("--full", action="store_true")
    sp.set_defaults(func=cmd_board_show)

    sp = sub.add_parser("run", help="run one simulated market session")
    sp.add_argument("--config", help="JSON config file")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    sp.add_argument("--transcript", help="write the transcript here")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("replay", help="re-run a transcript and compare")
    sp.add_argument("transcript")
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("gen", help="write a synthetic dataset")
    sp.add_argument("--kind", choices=("matching", "fitting"), default="matching")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--beta", type=int, default=10)
    sp.add_argument("--theta", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--distribution", choices=synth.DISTRIBUTIONS)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="benchmarks (CSV + PNG)")
    bsub = b.add_subparsers(dest="bench_command", required=True)
    sp = bsub.add_parser("vtps")
    sp.add_argument("--ns", default="1,10,100,1000,10000")
    sp.add_argument("--out", default="bench-out")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--single-cap", type=int, default=200)
    sp.add_argument("--repeat", type=int, default=3)
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=cmd_bench_vtps)
    sp = bsub.add_parser("tracing")
    sp.add_argument("--n", type=int, default=1024)
    sp.add_argument("--alphas", default="0,0.02,0.04,0.06,0.08,0.1,0.12,0.14,0.16,0.18,0.2")
    sp.add_argument("--patterns", default="uniform,clustered")
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--out", default="bench-out")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=cmd_bench_tracing)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rc = args.func(args)
    except (CliError, IdentityError, ValueError, OSError) as exc:
        print(f"tpdm: error: {exc}", file=sys.stderr)
        return 2
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
