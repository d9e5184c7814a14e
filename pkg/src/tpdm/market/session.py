"""Four-role market simulation: registration center, contributors, service
provider and consumer, exchanging JSON messages through a logging channel.

Every message is serialized and parsed again even in-process, and the
transcript keeps one record per message (sender, receiver, kind, size and
SHA-256 of the body) plus phase markers and a final outcome record.  No
wall-clock values enter the transcript, so a seeded session on the
transparent backend reproduces it byte for byte.
"""
import hashlib
import json
import random
import time
from collections import Counter
from dataclasses import dataclass, field

from .. import ibs, instrument
from .. import pairing as pg
from ..board import BulletinBoard
from ..identity import PseudoIdentity, RegistrationCenter, SigningKeyPair
from ..services import fitting, matching
from ..services.sampling import SamplePlan
from ..tracing import l_depth_trace
from .config import SessionConfig
from .synth import generate, load_dataset

TRANSCRIPT_VERSION = 1


class SessionError(RuntimeError):
    pass


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class Transcript:
    def __init__(self, path=None):
        self.records = []
        self.path = path
        if path:
            open(path, "w").close()

    def add(self, rec):
        rec = {"seq": len(self.records), **rec}
        self.records.append(rec)
        if self.path:
            with open(self.path, "a") as fh:
                fh.write(_canonical(rec) + "\n")
        return rec


class Channel:
    """Serializes every message so roles only ever see plain JSON."""

    def __init__(self, transcript):
        self.transcript = transcript
        self.bytes = Counter()

    def send(self, sender, receiver, kind, body):
        data = _canonical(body)
        self.bytes[kind] += len(data)
        self.transcript.add({"type": "message", "from": sender, "to": receiver, "kind": kind,
                             "bytes": len(data), "sha256": hashlib.sha256(data.encode()).hexdigest()})
        return json.loads(data)


# -- roles --------------------------------------------------------------------

class Contributor:
    def __init__(self, index, rid, password, profile):
        self.index = index
        self.name = f"contributor-{index}"
        self.rid = rid
        self.password = password
        self.profile = profile
        self.pid = None
        self.sk = None

    def receive_credentials(self, msg):
        self.pid = PseudoIdentity.decode(bytes.fromhex(msg["pid"]))
        self.sk = ibs_keys(msg)

    def make_tuple(self, params, schema, rng, forge=False):
        pk = params.phe_pk
        if schema.service == "matching":
            cts = matching.encode_profile_matching(pk, schema, self.profile, rng)
        else:
            cts = fitting.encode_profile_fitting(pk, schema, self.profile, rng)
        payload = schema.pack(pk, cts)
        if forge:
            sigma = pg.g1_mul(params.g1, pg.random_scalar(rng))
        else:
            sigma = ibs.sign(params, self.sk, payload)
        return {"pid": self.pid.encode().hex(), "payload": payload.hex(),
                "sigma": pg.encode_g1(sigma).hex()}


def ibs_keys(msg):
    return SigningKeyPair(pg.decode_g1(bytes.fromhex(msg["sk1"])), pg.decode_g1(bytes.fromhex(msg["sk2"])))


def decode_tuple(msg):
    return ibs.DataTuple(PseudoIdentity.decode(bytes.fromhex(msg["pid"])), bytes.fromhex(msg["payload"]),
                         pg.decode_g1(bytes.fromhex(msg["sigma"])))


def encode_agg(agg):
    return {"sigma": pg.encode_g1(agg.sigma).hex(), "index_set": list(agg.index_set)}


def decode_agg(d):
    return ibs.AggregateSignature(pg.decode_g1(bytes.fromhex(d["sigma"])), tuple(d["index_set"]))


class Provider:
    def __init__(self, params, schema, board, session):
        self.params = params
        self.schema = schema
        self.board = board
        self.session = session
        self.tuples = []
        self._seen = set()
        self.whitelist = []
        self.trace = None

    def receive(self, msg):
        t = decode_tuple(msg)
        if t.pid.key in self._seen:
            return False
        self._seen.add(t.pid.key)
        self.board.post("pid", {"session": self.session, "index": len(self.tuples),
                                "pid": t.pid.encode().hex()})
        self.tuples.append(t)
        return True

    def first_layer(self, depth):
        ok = ibs.verify_batch(self.params, self.tuples)
        if ok:
            self.whitelist = list(range(len(self.tuples)))
            lists = {"whitelist": self.whitelist, "blacklist": [], "resubmit": []}
        else:
            self.trace = l_depth_trace(self.params, self.tuples, depth)
            self.whitelist = self.trace.whitelist
            lists = {"whitelist": self.trace.whitelist, "blacklist": self.trace.blacklist,
                     "resubmit": self.trace.resubmit_list}
        for kind, idx in lists.items():
            if idx:
                self.board.post(kind, {"session": self.session, "indexes": idx})
        return ok, lists

    def payloads(self, indexes):
        return {i: self.tuples[i].payload for i in indexes}

    def answer_fetch(self, msg):
        idx = [int(i) for i in msg["indexes"]]
        if not set(idx) <= set(self.whitelist):
            raise SessionError("fetch request outside the whitelist")
        agg = ibs.aggregate([self.tuples[i].sigma for i in idx], idx)
        return {"payloads": {str(i): self.tuples[i].payload.hex() for i in idx}, "aggregate": encode_agg(agg)}


class Consumer:
    def __init__(self, params, schema, board, session, profile):
        self.params = params
        self.schema = schema
        self.board = board
        self.session = session
        self.profile = profile

    def check_aggregate(self, agg, payloads):
        if agg is None:
            return False
        pids = [PseudoIdentity.decode(bytes.fromhex(self.board.pid(self.session, i))) for i in agg.index_set]
        return ibs.verify_aggregate(self.params, agg, pids, [payloads[i] for i in agg.index_set])


# -- session ------------------------------------------------------------------

@dataclass
class SessionResult:
    config: SessionConfig
    outcome: dict
    transcript: list
    board: BulletinBoard
    rc: RegistrationCenter
    timings: dict = field(default_factory=dict)
    counters: Counter = field(default_factory=Counter)

    @property
    def accepted(self):
        return self.outcome.get("status") == "ok" and self.outcome.get("verification", {}).get("accepted", False)


def _profiles(cfg):
    if cfg.dataset:
        data = load_dataset(cfg.dataset, cfg.theta)
        if len(data) < cfg.n or len(data[0]) != cfg.beta:
            raise SessionError("dataset shape does not fit n and beta")
        return data[:cfg.n]
    return generate(cfg.service, cfg.n, cfg.beta, cfg.theta, cfg.seed, cfg.distribution).tolist()


def run_session(cfg, transcript_path=None):
    """Run Phases I to V for one service session."""
    if isinstance(cfg, dict):
        cfg = SessionConfig.from_dict(cfg)
    tr = Transcript(transcript_path)
    ch = Channel(tr)
    tr.add({"type": "config", "version": TRANSCRIPT_VERSION, "config": cfg.to_dict()})
    seed = cfg.seed
    rng_rc = random.Random(f"{seed}:rc")
    rng_c = random.Random(f"{seed}:contributors")
    rng_v = random.Random(f"{seed}:consumer")
    rng_f = random.Random(f"{seed}:faults")
    session = cfg.session_id
    timings = {}
    outcome = {"type": "outcome", "session": session, "status": "ok", "error": None}
    state = {}

    def phase(name, fn):
        tr.add({"type": "phase", "phase": name})
        t = time.perf_counter()
        try:
            fn()
        finally:
            timings[name] = time.perf_counter() - t

    with instrument.track() as counters:
        try:
            phase("setup", lambda: _setup(cfg, state, rng_rc, rng_c))
            phase("registration", lambda: _register(cfg, state, ch))
            phase("submission", lambda: _submit(cfg, state, ch, rng_c, rng_f, session))
            phase("verification", lambda: _first_layer(cfg, state, outcome))
            if cfg.service == "matching":
                phase("processing", lambda: _matching(cfg, state, ch, rng_v, rng_f, session, outcome))
            else:
                phase("processing", lambda: _fitting(cfg, state, ch, session, outcome))
            phase("tracing", lambda: _revoke(state, ch, outcome))
        except Exception as exc:
            outcome["status"] = "failed"
            outcome["error"] = f"{type(exc).__name__}: {exc}"
            tr.add({"type": "error", "cause": outcome["error"]})
    board = state.get("board")
    if board is not None and "provider" in state:
        _ledger(cfg, state, outcome)
    tr.add(outcome)
    return SessionResult(cfg, outcome, tr.records, board, state.get("rc"), timings, counters)


def _setup(cfg, st, rng_rc, rng_c):
    st["board"] = board = BulletinBoard()
    rc = RegistrationCenter.setup(cfg.phe_bits, cfg.bound, cfg.backend, rng=rng_rc, board=board,
                                  digest=cfg.digest, iterations=cfg.password_iterations,
                                  cache_ttl=cfg.cache_ttl)
    st["rc"] = rc
    st["params"] = rc.params
    schema = (matching.matching_schema if cfg.service == "matching" else fitting.fitting_schema)(cfg.beta, cfg.theta)
    st["schema"] = schema
    profiles = _profiles(cfg)
    st["contributors"] = [Contributor(i, rng_c.randbytes(32), f"pw-{i}", profiles[i]) for i in range(cfg.n)]


def _register(cfg, st, ch):
    rc = st["rc"]
    for c in st["contributors"]:
        msg = ch.send(c.name, "rc", "register", {"rid": c.rid.hex(), "password": c.password})
        rc.register(bytes.fromhex(msg["rid"]), msg["password"])
        msg = ch.send(c.name, "rc", "issue", {"rid": c.rid.hex(), "password": c.password})
        pid, sk = rc.issue_credentials(bytes.fromhex(msg["rid"]), msg["password"])
        c.receive_credentials(ch.send("rc", c.name, "credentials", {
            "pid": pid.encode().hex(), "sk1": pg.encode_g1(sk.sk1).hex(), "sk2": pg.encode_g1(sk.sk2).hex()}))


def _submit(cfg, st, ch, rng_c, rng_f, session):
    params = st["params"]
    provider = st["provider"] = Provider(params, st["schema"], st["board"], session)
    forged = set(rng_f.sample(range(cfg.n), round(cfg.corrupt_fraction * cfg.n)))
    for c in st["contributors"]:
        msg = c.make_tuple(params, st["schema"], rng_c, forge=c.index in forged)
        if not provider.receive(ch.send(c.name, "provider", "submission", msg)):
            raise SessionError("duplicate pseudo identity submitted")
    st["forged"] = sorted(forged)


def _first_layer(cfg, st, outcome):
    provider = st["provider"]
    ok, lists = provider.first_layer(cfg.depth)
    outcome["first_layer_ok"] = ok
    outcome["whitelist"] = lists["whitelist"]
    outcome["blacklist"] = lists["blacklist"]
    outcome["resubmit"] = lists["resubmit"]
    outcome["trace_calls"] = provider.trace.verification_call_count if provider.trace else 0
    if not provider.whitelist:
        raise SessionError("no contributor passed verification")


def _rc_decrypt(ch, rc, service, pk, who="provider"):
    def decrypt(c):
        msg = ch.send(who, "rc", "decrypt", {"service": service, "ciphertext": pk.encode(c).hex()})
        m = rc.quota_decrypt(msg["service"], pk.decode(bytes.fromhex(msg["ciphertext"])))
        return ch.send("rc", who, "plaintext", {"plaintext": m})["plaintext"]
    return decrypt


def _rc_lookup(ch, rc, service, pk):
    def lookup(c):
        msg = ch.send("consumer", "rc", "lookup", {"service": service, "ciphertext": pk.encode(c).hex()})
        m = rc.verify_lookup(msg["service"], pk.decode(bytes.fromhex(msg["ciphertext"])))
        return ch.send("rc", "consumer", "plaintext", {"plaintext": m})["plaintext"]
    return lookup


def _fetch(ch, provider):
    def fetch(indexes):
        req = ch.send("consumer", "provider", "fetch", {"indexes": list(indexes)})
        resp = ch.send("provider", "consumer", "tuples", provider.answer_fetch(req))
        return ({int(i): bytes.fromhex(p) for i, p in resp["payloads"].items()}, decode_agg(resp["aggregate"]))
    return fetch


def _matching(cfg, st, ch, rng_v, rng_f, session, outcome):
    rc, params, schema, provider = st["rc"], st["params"], st["schema"], st["provider"]
    pk = params.phe_pk
    profile = cfg.consumer_profile or [rng_v.randint(0, cfg.theta) for _ in range(cfg.beta)]
    consumer = Consumer(params, schema, st["board"], session, profile)
    query = matching.make_query(pk, schema, profile, cfg.delta, rng_v)
    query = matching.MatchingQuery.from_dict(pk, ch.send("consumer", "provider", "query", query.to_dict(pk)))
    service = f"{session}/matching"
    st["service"] = service
    rc.publish_quota(service, len(provider.whitelist))
    sigs = {i: provider.tuples[i].sigma for i in provider.whitelist}
    out = matching.run_matching(pk, schema, provider.payloads(provider.whitelist), query,
                                _rc_decrypt(ch, rc, service, pk), sigs, one=pk.encrypt(1, random.Random(f"{cfg.seed}:provider")))
    if cfg.cheat_fraction > 0:
        _falsify(cfg, out, rng_f, query.delta)
    out = matching.MatchOutcome.from_dict(ch.send("provider", "consumer", "match_outcome", out.to_dict()))
    whitelist = st["board"].whitelist(session)
    report = matching.verify_matching_outcome(
        pk, schema, out, profile, query, _rc_lookup(ch, rc, service, pk),
        SamplePlan(cfg.checks, cfg.seed), whitelist, fetch=_fetch(ch, provider),
        check_aggregate=consumer.check_aggregate)
    outcome["consumer_profile"] = list(profile)
    outcome["matched"] = list(out.matched)
    outcome["unmatched"] = {str(i): f for i, f in sorted(out.unmatched.items())}
    outcome["verification"] = {"accepted": report.accepted, "reason": report.reason, "index": report.index,
                               "checked": len(report.checked), "sampled": report.sampled}


def _falsify(cfg, out, rng, delta):
    """Provider misbehaviour: replace a share of unmatched similarities."""
    lo, hi = delta ** 2, max(delta ** 2 + 1, cfg.beta * cfg.theta ** 2)
    keys = sorted(out.unmatched)
    for i in rng.sample(keys, round(cfg.cheat_fraction * len(keys))):
        true = out.unmatched[i]
        fake = rng.randint(lo, hi - 1)
        out.unmatched[i] = fake if fake != true else hi


def _fitting(cfg, st, ch, session, outcome):
    rc, params, schema, provider = st["rc"], st["params"], st["schema"], st["provider"]
    pk = params.phe_pk
    consumer = Consumer(params, schema, st["board"], session, None)
    service = f"{session}/fitting"
    st["service"] = service
    entries = schema.length
    rc.publish_quota(service, entries)
    payloads = provider.payloads(provider.whitelist)
    fit = fitting.run_fitting(pk, schema, payloads, _rc_decrypt(ch, rc, service, pk))
    agg = ibs.aggregate([provider.tuples[i].sigma for i in provider.whitelist], provider.whitelist)
    msg = ch.send("provider", "consumer", "fit_outcome", {
        "fit": fit.to_dict(), "aggregate": encode_agg(agg),
        "payloads": {str(i): p.hex() for i, p in payloads.items()}})
    fit = fitting.GaussianFit.from_dict(msg["fit"])
    got = {int(i): bytes.fromhex(p) for i, p in msg["payloads"].items()}
    threshold = cfg.refit_threshold
    if cfg.refit_fraction > 0:
        rc.publish_quota(service + "/refit", entries)
        if threshold is None:
            size = max(2, round(cfg.refit_fraction * fit.m))
            threshold = fitting.calibrate_refit_threshold(fit, size, seed=cfg.seed)
    plan = fitting.FitCheckPlan(refit_fraction=cfg.refit_fraction, refit_threshold=threshold, seed=cfg.seed)
    report = fitting.verify_fitting_outcome(
        pk, schema, fit, got, _rc_lookup(ch, rc, service, pk), plan,
        check_aggregate=consumer.check_aggregate, aggregate=decode_agg(msg["aggregate"]),
        refit_decrypt=_rc_decrypt(ch, rc, service + "/refit", pk, "consumer"), fetch=_fetch(ch, provider))
    outcome["fit"] = fit.to_dict()
    outcome["verification"] = {"accepted": report.accepted, "reason": report.reason,
                               "entry": list(report.entry) if report.entry else None,
                               "distance": None if report.distance is None else round(report.distance, 12)}


def _revoke(st, ch, outcome):
    rc, provider = st["rc"], st["provider"]
    revoked = 0
    for i in outcome.get("blacklist", []):
        msg = ch.send("provider", "rc", "trace", {"pid": provider.tuples[i].pid.encode().hex()})
        rid = rc.trace(PseudoIdentity.decode(bytes.fromhex(msg["pid"])))
        revoked += rc.revoke(rid)
    outcome["revoked"] = revoked


def _ledger(cfg, st, outcome):
    board, session = st["board"], cfg.session_id
    n = len(board.pids(session))
    lists = len(board.whitelist(session)) + len(board.blacklist(session)) + len(board.resubmit_list(session))
    service = st.get("service")
    quota = board.quota(service) if service else None
    dec = board.decryptions(service) if service else 0
    outcome["ledger"] = {"submissions": n, "listed": lists, "quota": quota, "decryptions": dec,
                         "balanced": n == lists and (quota is None or dec <= quota),
                         "board_chain_ok": board.verify_chain()}


def replay(path):
    """Re-run the session recorded in ``path`` and compare every record.

    Returns ``(identical, first_differing_seq)``.
    """
    with open(path) as fh:
        recorded = [json.loads(line) for line in fh if line.strip()]
    if not recorded or recorded[0].get("type") != "config":
        raise SessionError("transcript does not start with a config record")
    res = run_session(SessionConfig.from_dict(recorded[0]["config"]))
    for a, b in zip(recorded, res.transcript):
        if _canonical(a) != _canonical(b):
            return False, a["seq"]
    if len(recorded) != len(res.transcript):
        return False, min(len(recorded), len(res.transcript))
    return True, None
