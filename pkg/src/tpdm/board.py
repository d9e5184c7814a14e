"""Certificated bulletin board: an append-only, hash-chained public record.

Each record is one JSON object per line::

    {"seq": 7, "prev": "<hex sha256 of record 6>", "kind": "whitelist",
     "body": {...}, "digest": "<hex sha256 of this record without 'digest'>"}

``digest`` covers the canonical JSON (sorted keys, no spaces) of the other
four fields, so rewriting any past entry breaks every later ``prev`` link.

Record kinds and bodies:

==============  ==========================================================
params          published system parameters (see ``identity.SystemParams``)
pid             ``{"session", "index", "pid"}``; pid is hex of pid1||pid2
whitelist       ``{"session", "indexes"}``
blacklist       ``{"session", "indexes"}``
resubmit        ``{"session", "indexes"}``
quota           ``{"service", "count"}`` decryptions announced for a service
decryption      ``{"service", "ciphertext"}`` digest of a decrypted ciphertext
revocation      ``{"rid_digest"}`` sha256 of the revoked real identity
==============  ==========================================================
"""
import hashlib
import json
import threading
from collections import defaultdict
from pathlib import Path

GENESIS = "0" * 64
LIST_KINDS = ("whitelist", "blacklist", "resubmit")


class BoardError(ValueError):
    pass


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def record_digest(rec):
    body = {k: rec[k] for k in ("seq", "prev", "kind", "body")}
    return hashlib.sha256(_canonical(body)).hexdigest()


class BulletinBoard:
    def __init__(self, path=None):
        self._records = []
        self._lock = threading.Lock()
        self._lists = defaultdict(lambda: {k: set() for k in LIST_KINDS})
        self._pids = defaultdict(dict)
        self._quota = {}
        self._decryptions = defaultdict(int)
        self.path = Path(path) if path else None
        if self.path and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    self._ingest(json.loads(line), check=True)

    # -- writing --------------------------------------------------------------

    def post(self, kind, body):
        with self._lock:
            self._validate(kind, body)
            rec = {"seq": len(self._records),
                   "prev": self._records[-1]["digest"] if self._records else GENESIS,
                   "kind": kind, "body": body}
            rec["digest"] = record_digest(rec)
            self._ingest(rec, check=False)
            if self.path:
                with self.path.open("a") as fh:
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
            return rec

    def _validate(self, kind, body):
        if kind in LIST_KINDS:
            lists = self._lists[body["session"]]
            new = set(body["indexes"])
            for other in LIST_KINDS:
                if other != kind and lists[other] & new:
                    raise BoardError(f"indexes already on the {other} of session {body['session']}")
            known = self._pids[body["session"]]
            if known and not new <= set(known):
                raise BoardError("list entry refers to an unposted pseudo identity")
        elif kind == "pid":
            if body["index"] in self._pids[body["session"]]:
                raise BoardError("index already posted for this session")
        elif kind == "quota":
            if body["service"] in self._quota:
                raise BoardError("quota for this service is already announced")

    def _ingest(self, rec, check):
        if check:
            expected_prev = self._records[-1]["digest"] if self._records else GENESIS
            if rec["seq"] != len(self._records) or rec["prev"] != expected_prev:
                raise BoardError(f"broken chain at record {rec.get('seq')}")
            if rec["digest"] != record_digest(rec):
                raise BoardError(f"digest mismatch at record {rec['seq']}")
        kind, body = rec["kind"], rec["body"]
        if kind in LIST_KINDS:
            self._lists[body["session"]][kind].update(body["indexes"])
        elif kind == "pid":
            self._pids[body["session"]][body["index"]] = body["pid"]
        elif kind == "quota":
            self._quota[body["service"]] = body["count"]
        elif kind == "decryption":
            self._decryptions[body["service"]] += 1
        self._records.append(rec)

    # -- reading --------------------------------------------------------------

    def snapshot(self):
        with self._lock:
            return tuple(dict(r) for r in self._records)

    def __len__(self):
        return len(self._records)

    def verify_chain(self):
        prev = GENESIS
        for i, rec in enumerate(self._records):
            if rec["seq"] != i or rec["prev"] != prev or rec["digest"] != record_digest(rec):
                return False
            prev = rec["digest"]
        return True

    def latest(self, kind):
        for rec in reversed(self._records):
            if rec["kind"] == kind:
                return rec["body"]
        return None

    def pids(self, session):
        """index -> hex pid for one session, in index order."""
        return dict(sorted(self._pids[session].items()))

    def pid(self, session, index):
        try:
            return self._pids[session][index]
        except KeyError:
            raise BoardError(f"index {index} unknown in session {session}") from None

    def whitelist(self, session):
        return sorted(self._lists[session]["whitelist"])

    def blacklist(self, session):
        return sorted(self._lists[session]["blacklist"])

    def resubmit_list(self, session):
        return sorted(self._lists[session]["resubmit"])

    def quota(self, service):
        return self._quota.get(service)

    def decryptions(self, service):
        return self._decryptions[service]
