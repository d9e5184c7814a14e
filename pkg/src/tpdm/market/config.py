"""Session configuration, stored as a flat JSON object.

Keys (all optional except where a service needs them):

=================  ========================================================
service            "matching" or "fitting"
n                  number of data contributors
beta, theta        attributes per profile and rating upper bound
delta              matching threshold (matches have f^2 < delta^2)
backend            "bgn" or "transparent" (debug, no confidentiality)
phe_bits           PHE modulus size in bits
bound              largest plaintext magnitude decryption must recover (T)
depth              tracing depth limit; null means unlimited
checks             completeness spot checks by the consumer (c)
corrupt_fraction   share of contributors submitting a forged signature
cheat_fraction     share of unmatched similarities the provider falsifies
distribution       synthetic data: "uniform", "zipf" or "gaussian"
dataset            CSV file with columns u1..u_beta instead of synthetic data
consumer_profile   consumer's own profile V (matching); random if null
refit_fraction     share of contributors re-fitted by the consumer (fitting)
refit_threshold    largest accepted Gaussian KL distance; null = calibrate
cache_ttl          seconds cached plaintexts stay valid; null = forever
digest             "sha256" (default) or "sha1" for the message hash h(.)
seed               master seed; fixes the whole session under "transparent"
=================  ========================================================
"""
import json
from dataclasses import asdict, dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass
class SessionConfig:
    service: str = "matching"
    n: int = 100
    beta: int = 10
    theta: int = 10
    delta: int = 12
    backend: str = "transparent"
    phe_bits: int = 256
    bound: int = 2**20
    depth: float = None
    checks: int = 26
    corrupt_fraction: float = 0.0
    cheat_fraction: float = 0.0
    distribution: str = None
    dataset: str = None
    consumer_profile: list = None
    refit_fraction: float = 0.0
    refit_threshold: float = None
    cache_ttl: float = None
    digest: str = "sha256"
    password_iterations: int = 1000
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def session_id(self):
        return f"{self.service}-{self.seed}"

    def worst_case(self):
        if self.service == "matching":
            return self.beta * self.theta ** 2
        return self.n * self.theta ** 2

    def validate(self):
        if self.service not in ("matching", "fitting"):
            raise ConfigError(f"unknown service {self.service!r}")
        if self.backend not in ("bgn", "transparent"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.n < 1 or self.beta < 1 or self.theta < 0 or self.delta < 0:
            raise ConfigError("n and beta must be positive, theta and delta non-negative")
        if self.depth is not None and self.depth < 0:
            raise ConfigError("depth must be non-negative")
        for name in ("corrupt_fraction", "cheat_fraction", "refit_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.worst_case() > self.bound:
            raise ConfigError(f"worst-case plaintext {self.worst_case()} exceeds bound T={self.bound}; "
                              "raise 'bound' or shrink the session")
        if self.consumer_profile is not None and len(self.consumer_profile) != self.beta:
            raise ConfigError("consumer_profile length must equal beta")
        if self.digest not in ("sha256", "sha1"):
            raise ConfigError("digest must be sha256 or sha1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
