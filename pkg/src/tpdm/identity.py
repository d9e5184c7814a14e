"""Registration center: master keys, pseudo identities, tracing, revocation
and the quota-limited decryption oracle.

A contributor registers a 32-byte real identity (RID) with a password.  Each
issuance draws a fresh r and returns

    pid1 = g1^r,  pid2 = RID xor mask(P0^r),  sk1 = pid1^s1,  sk2 = H(pid2)^s2

so only the holder of s1 can unmask pid2 (P0^r = pid1^s1) and link a pseudo
identity back to its owner.
"""
import hashlib
import hmac
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import pairing as pg
from . import phe
from .board import BulletinBoard

RID_BYTES = 32
PID_BYTES = pg.G1_BYTES + RID_BYTES
DEFAULT_PBKDF2_ITERATIONS = 100_000


class IdentityError(Exception):
    pass


class UnknownIdentity(IdentityError, KeyError):
    pass


class AuthenticationError(IdentityError):
    pass


class RevokedIdentity(IdentityError):
    pass


class QuotaExhausted(IdentityError):
    pass


class CacheMiss(IdentityError):
    pass


def _xor(a, b):
    return bytes(x ^ y for x, y in zip(a, b))


def rid_digest(rid):
    return hashlib.sha256(rid).hexdigest()


@dataclass(frozen=True)
class PseudoIdentity:
    pid1: object
    pid2: bytes

    def encode(self):
        return pg.encode_g1(self.pid1) + self.pid2

    @classmethod
    def decode(cls, data):
        data = bytes(data)
        if len(data) != PID_BYTES:
            raise ValueError(f"pseudo identity must be {PID_BYTES} bytes")
        return cls(pg.decode_g1(data[:pg.G1_BYTES]), data[pg.G1_BYTES:])

    @property
    def key(self):
        # hashable handle; G1 points themselves are not hashable
        return pg.encode_g1(self.pid1)

    def __hash__(self):
        return hash(self.encode())


@dataclass(frozen=True)
class SigningKeyPair:
    sk1: object
    sk2: object


@dataclass(frozen=True)
class SystemParams:
    """Everything a verifier or contributor needs: P0 = g1^s1, P1 = g2^s1,
    P2 = g2^s2, the PHE public key and the digest behind h(.)."""
    P0: object
    P1: object
    P2: object
    phe_pk: object
    digest: str = "sha256"
    suite: pg.GroupSuite = pg.SUITE

    @property
    def g1(self):
        return self.suite.g1

    @property
    def g2(self):
        return self.suite.g2

    def to_dict(self):
        return {"suite": self.suite.name, "digest": self.digest,
                "P0": pg.encode_g1(self.P0).hex(), "P1": pg.encode_g2(self.P1).hex(),
                "P2": pg.encode_g2(self.P2).hex(), "phe": self.phe_pk.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if d["suite"] != pg.SUITE.name:
            raise ValueError(f"unsupported group suite {d['suite']}")
        return cls(pg.decode_g1(bytes.fromhex(d["P0"])), pg.decode_g2(bytes.fromhex(d["P1"])),
                   pg.decode_g2(bytes.fromhex(d["P2"])), phe.public_key_from_dict(d["phe"]),
                   d["digest"])


@dataclass(frozen=True)
class MasterKeys:
    s1: int
    s2: int

    @classmethod
    def generate(cls, rng):
        return cls(pg.random_scalar(rng), pg.random_scalar(rng))


class Registry:
    """RID -> credential record, persisted as an append-only JSONL log whose
    lines chain by SHA-256 so that silent edits are detectable on load."""

    def __init__(self, path=None):
        self._rows = {}
        self._last = "0" * 64
        self.path = Path(path) if path else None
        if self.path and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    self._apply(json.loads(line), check=True)

    def _apply(self, entry, check):
        if check:
            body = {k: v for k, v in entry.items() if k != "digest"}
            if entry["prev"] != self._last or entry["digest"] != _chain_digest(body):
                raise IdentityError("registration log failed its integrity check")
        rid = entry["rid"]
        if entry["op"] == "register":
            self._rows[rid] = {"salt": entry["salt"], "hash": entry["hash"],
                               "iterations": entry["iterations"], "revoked": False}
        elif entry["op"] == "revoke":
            self._rows[rid]["revoked"] = True
        self._last = entry["digest"]

    def append(self, op, rid, **fields):
        body = {"op": op, "rid": rid, "prev": self._last, **fields}
        body["digest"] = _chain_digest(body)
        self._apply(body, check=False)
        if self.path:
            with self.path.open("a") as fh:
                fh.write(json.dumps(body, sort_keys=True) + "\n")

    def get(self, rid_hex):
        return self._rows.get(rid_hex)

    def __contains__(self, rid_hex):
        return rid_hex in self._rows

    def __len__(self):
        return len(self._rows)


def _chain_digest(body):
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


class RegistrationCenter:
    """Trusted authority.  Holds (s1, s2) and the PHE secret key."""

    def __init__(self, master, phe_sk, board=None, registry=None, digest="sha256",
                 iterations=DEFAULT_PBKDF2_ITERATIONS, cache_ttl=None, clock=time.monotonic,
                 rng=None):
        self.master = master
        self.phe_sk = phe_sk
        self.board = board if board is not None else BulletinBoard()
        self.registry = registry if registry is not None else Registry()
        self.iterations = iterations
        self.cache_ttl = cache_ttl
        self.clock = clock
        self.rng = rng or phe.system_rng()
        g1, g2 = pg.SUITE.g1, pg.SUITE.g2
        self.params = SystemParams(pg.g1_mul(g1, master.s1), pg.g2_mul(g2, master.s1),
                                   pg.g2_mul(g2, master.s2), phe_sk.pk, digest)
        self._db_lock = threading.Lock()
        self._dec_lock = threading.Lock()
        # service -> {ciphertext digest: (plaintext, time)}
        self._cache = {}
        # service -> released plaintexts with times, plus reverse image maps
        self._released = {}

    @classmethod
    def setup(cls, phe_bits=256, bound=phe.DEFAULT_BOUND, backend="bgn", rng=None,
              publish=True, **kw):
        rng = rng or phe.system_rng()
        _, sk = phe.keygen(phe_bits, bound, backend=backend, rng=rng)
        rc = cls(MasterKeys.generate(rng), sk, rng=rng, **kw)
        if publish:
            rc.board.post("params", rc.params.to_dict())
        return rc

    # -- registration and issuance -------------------------------------------

    def _hash_password(self, password, salt, iterations):
        return hashlib.pbkdf2_hmac("sha256", password.encode(), salt, iterations)

    def register(self, rid, password):
        rid = bytes(rid)
        if len(rid) != RID_BYTES:
            raise ValueError(f"real identity must be {RID_BYTES} bytes")
        salt = self.rng.getrandbits(128).to_bytes(16, "big")
        pw = self._hash_password(password, salt, self.iterations)
        with self._db_lock:
            if rid.hex() in self.registry:
                raise IdentityError("identity already registered")
            self.registry.append("register", rid.hex(), salt=salt.hex(), hash=pw.hex(),
                                 iterations=self.iterations)

    def _authenticate(self, rid, password):
        row = self.registry.get(bytes(rid).hex())
        if row is None:
            raise UnknownIdentity("identity is not registered")
        pw = self._hash_password(password, bytes.fromhex(row["salt"]), row["iterations"])
        if not hmac.compare_digest(pw.hex(), row["hash"]):
            raise AuthenticationError("wrong password")
        if row["revoked"]:
            raise RevokedIdentity("identity has been revoked")

    def issue_credentials(self, rid, password):
        """Fresh (pseudo identity, signing key) for a registered contributor."""
        rid = bytes(rid)
        with self._db_lock:
            self._authenticate(rid, password)
        return issue(self.master, self.params, rid, self.rng)

    def trace(self, pid):
        """Real identity behind a pseudo identity."""
        rid = _xor(pid.pid2, pg.mask(pg.g1_mul(pid.pid1, self.master.s1)))
        if rid.hex() not in self.registry:
            raise UnknownIdentity("pseudo identity does not resolve to a registered identity")
        return rid

    def revoke(self, rid):
        rid = bytes(rid)
        with self._db_lock:
            row = self.registry.get(rid.hex())
            if row is None:
                raise UnknownIdentity("identity is not registered")
            if row["revoked"]:
                return False
            self.registry.append("revoke", rid.hex())
        self.board.post("revocation", {"rid_digest": rid_digest(rid)})
        return True

    def is_revoked(self, rid):
        row = self.registry.get(bytes(rid).hex())
        return bool(row and row["revoked"])

    # -- decryption oracle ------------------------------------------------------

    def publish_quota(self, service, count):
        self.board.post("quota", {"service": service, "count": int(count)})

    def remaining(self, service):
        q = self.board.quota(service)
        return None if q is None else q - self.board.decryptions(service)

    def quota_decrypt(self, service, c):
        """Decrypt one ciphertext against the service's published quota.

        A ciphertext already decrypted for this service is answered from the
        cache and consumes nothing.
        """
        key = self._digest(c)
        with self._dec_lock:
            hit = self._fresh(service, key)
            if hit is not None:
                return hit
            quota = self.board.quota(service)
            if quota is None:
                raise QuotaExhausted(f"no quota announced for service {service!r}")
            # the board's decryption records are the usage count, so a
            # center reloaded from disk keeps enforcing the same quota
            if self.board.decryptions(service) >= quota:
                raise QuotaExhausted(f"quota of {quota} decryptions used up for {service!r}")
            m = self.phe_sk.decrypt(c)
            now = self.clock()
            self._cache.setdefault(service, {})[key] = (m, now)
            self._release(service, m, now)
            self.board.post("decryption", {"service": service, "ciphertext": key})
            return m

    def verify_lookup(self, service, c):
        """Plaintext of ``c`` when it equals one already released for ``service``.

        Used by consumers to check a provider's claims: costs no quota, and
        cannot reveal anything the service has not already been told.
        """
        key = self._digest(c)
        with self._dec_lock:
            hit = self._fresh(service, key)
            if hit is not None:
                return hit
            rel = self._released.get(service)
            if rel is None:
                raise CacheMiss(f"nothing decrypted yet for service {service!r}")
            rev = rel["rev"].setdefault(c.level, {})
            pending = rel["pending"].setdefault(c.level, set(rel["times"]))
            for m in pending:
                rev[self.phe_sk.image(c.level, m)] = m
            pending.clear()
        m = rev.get(self.phe_sk.strip(c))
        if m is None or not self._alive(rel["times"][m]):
            raise CacheMiss("ciphertext matches no cached plaintext within the validity period")
        return m

    def _release(self, service, m, now):
        rel = self._released.setdefault(service, {"times": {}, "rev": {}, "pending": {}})
        if m not in rel["times"]:
            for pending in rel["pending"].values():
                pending.add(m)
        rel["times"][m] = now

    def _alive(self, t):
        return self.cache_ttl is None or self.clock() - t <= self.cache_ttl

    def _fresh(self, service, key):
        entry = self._cache.get(service, {}).get(key)
        if entry is not None and self._alive(entry[1]):
            return entry[0]
        return None

    def _digest(self, c):
        return hashlib.sha256(self.phe_sk.pk.encode(c)).hexdigest()


def issue(master, params, rid, rng):
    """Pseudo identity and matching signing key for ``rid``; the tamper-proof
    device's half of the protocol."""
    r = pg.random_scalar(rng)
    pid1 = pg.g1_mul(params.g1, r)
    pid2 = _xor(rid, pg.mask(pg.g1_mul(params.P0, r)))
    sk1 = pg.g1_mul(pid1, master.s1)
    sk2 = pg.g1_mul(pg.hash_to_g1(pid2), master.s2)
    return PseudoIdentity(pid1, pid2), SigningKeyPair(sk1, sk2)
