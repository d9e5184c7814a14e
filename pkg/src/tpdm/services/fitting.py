"""Multivariate Gaussian fitting over encrypted samples.

Contributors submit E(u_j) for every attribute and E(u_j * u_k) for every
j <= k, computed in the clear before encryption.  The provider then only
adds: S_j = sum_i u_ij and S_jk = sum_i u_ij u_ik come out of beta(beta+3)/2
decryptions, and

    mu_j = S_j / m,   Sigma_jk = S_jk / m - mu_j mu_k

is assembled in exact rational arithmetic.
"""
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .. import ibs
from ..identity import CacheMiss
from .schema import Schema


def fitting_schema(beta, theta):
    return Schema("fitting", beta, theta)


def pairs(beta):
    """(j, k) with j <= k in payload order."""
    return [(j, k) for j in range(beta) for k in range(j, beta)]


def check_fan_in(pk, schema, m):
    pk.check_fan_in(m * schema.theta ** 2)


def encode_profile_fitting(pk, schema, profile, rng=None):
    u = schema.check_profile(profile)
    pk.check_fan_in(schema.theta ** 2)
    return [pk.encrypt(x, rng) for x in u] + [pk.encrypt(u[j] * u[k], rng) for j, k in pairs(len(u))]


@dataclass(frozen=True)
class GaussianFit:
    mu: tuple     # Fractions
    sigma: tuple  # tuple of rows of Fractions
    m: int

    @classmethod
    def from_sums(cls, sums, cross, m):
        """``sums[j]`` = S_j, ``cross[(j, k)]`` = S_jk for j <= k."""
        beta = len(sums)
        mu = tuple(Fraction(s, m) for s in sums)
        sigma = [[None] * beta for _ in range(beta)]
        for (j, k), s in cross.items():
            sigma[j][k] = sigma[k][j] = Fraction(s, m) - mu[j] * mu[k]
        return cls(mu, tuple(tuple(r) for r in sigma), m)

    def to_dict(self):
        return {"m": self.m, "mu": [str(x) for x in self.mu],
                "sigma": [[str(x) for x in r] for r in self.sigma]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(Fraction(x) for x in d["mu"]),
                   tuple(tuple(Fraction(x) for x in r) for r in d["sigma"]), int(d["m"]))

    def as_arrays(self):
        return (np.array([float(x) for x in self.mu]),
                np.array([[float(x) for x in r] for r in self.sigma]))


def plaintext_fit(samples):
    """Oracle: population mean and covariance of integer samples, exactly."""
    samples = [list(s) for s in samples]
    m, beta = len(samples), len(samples[0])
    sums = [sum(s[j] for s in samples) for j in range(beta)]
    cross = {(j, k): sum(s[j] * s[k] for s in samples) for j, k in pairs(beta)}
    return GaussianFit.from_sums(sums, cross, m)


def encrypted_sums(pk, schema, vectors):
    """Homomorphic column sums of decoded payload vectors (level 1)."""
    vectors = list(vectors)
    return [pk.sum(v[t] for v in vectors) for t in range(schema.length)]


def run_fitting(pk, schema, payloads, decrypt):
    """Provider side: m*beta(beta+3)/2 additions, beta(beta+3)/2 decryptions,
    no multiplications."""
    m = len(payloads)
    if m == 0:
        raise ValueError("no contributors to fit")
    check_fan_in(pk, schema, m)
    vectors = [schema.unpack(pk, payloads[i]) for i in sorted(payloads)]
    plain = [decrypt(c) for c in encrypted_sums(pk, schema, vectors)]
    beta = schema.beta
    return GaussianFit.from_sums(plain[:beta], dict(zip(pairs(beta), plain[beta:])), m)


def gaussian_kl(mu0, s0, mu1, s1, ridge=1e-9):
    """KL(N(mu0, s0) || N(mu1, s1)) in nats; ``ridge`` keeps degenerate
    covariances (constant attributes) invertible."""
    k = len(mu0)
    eye = np.eye(k)
    s0 = s0 + ridge * eye
    s1 = s1 + ridge * eye
    inv1 = np.linalg.inv(s1)
    d = mu1 - mu0
    _, ld0 = np.linalg.slogdet(s0)
    _, ld1 = np.linalg.slogdet(s1)
    return 0.5 * (np.trace(inv1 @ s0) + d @ inv1 @ d - k + ld1 - ld0)


def calibrate_refit_threshold(fit, subset_size, trials=200, quantile=0.999, seed=0):
    """Distance a subset of ``subset_size`` honest Gaussian draws stays under
    with probability ``quantile``, simulated from the claimed fit."""
    mu, sigma = fit.as_arrays()
    rng = np.random.default_rng(seed)
    dists = []
    for _ in range(trials):
        x = rng.multivariate_normal(mu, sigma, size=subset_size, method="eigh")
        dists.append(gaussian_kl(x.mean(axis=0), np.cov(x, rowvar=False, bias=True).reshape(sigma.shape),
                                 mu, sigma))
    return float(np.quantile(dists, quantile))


@dataclass(frozen=True)
class FitCheckPlan:
    mean_entries: tuple = None        # None = all
    cov_entries: tuple = "diagonal"   # "diagonal", "all" or explicit (j, k) pairs
    refit_fraction: float = 0.0
    refit_threshold: float = None
    seed: int = 0

    def cov_pairs(self, beta):
        if self.cov_entries == "diagonal":
            return [(j, j) for j in range(beta)]
        if self.cov_entries == "all":
            return pairs(beta)
        return [tuple(sorted(p)) for p in self.cov_entries]


@dataclass
class FitReport:
    accepted: bool
    reason: str = ""
    entry: tuple = None
    distance: float = None
    checked_mean: list = field(default_factory=list)
    checked_cov: list = field(default_factory=list)


def verify_fitting_outcome(pk, schema, fit, payloads, lookup, plan, check_aggregate=None,
                           aggregate=None, refit_decrypt=None, fetch=None):
    """Consumer side.

    ``payloads`` are the m signed payloads the provider used, ``aggregate``
    their aggregate signature.  Sampled mean and covariance entries are
    recomputed homomorphically and opened through ``lookup`` (plaintexts
    the registration center already released).  With ``refit_fraction > 0``
    a random subset is re-fetched through ``fetch(indexes) -> (payloads,
    aggregate)``, decrypted with ``refit_decrypt`` and its own fit compared
    with the claimed one under ``refit_threshold``.
    """
    beta = schema.beta
    if fit.m != len(payloads):
        return FitReport(False, "fit claims a different number of contributors")
    if check_aggregate is not None and not check_aggregate(aggregate, payloads):
        return FitReport(False, "aggregate signature rejected")
    vectors = {i: schema.unpack(pk, payloads[i]) for i in sorted(payloads)}
    report = FitReport(True)
    m = fit.m
    slot = {p: beta + t for t, p in enumerate(pairs(beta))}
    opened = {}

    def column(t):
        if t not in opened:
            try:
                opened[t] = lookup(pk.sum(v[t] for v in vectors.values()))
            except CacheMiss:
                opened[t] = None
        return opened[t]

    means = range(beta) if plan.mean_entries is None else plan.mean_entries
    for j in means:
        s = column(j)
        report.checked_mean.append(j)
        if s is None or Fraction(s, m) != fit.mu[j]:
            return FitReport(False, "mean entry mismatch", (j,), None, report.checked_mean)
    for j, k in plan.cov_pairs(beta):
        sj, sk, sjk = column(j), column(k), column(slot[(j, k)])
        report.checked_cov.append((j, k))
        if None in (sj, sk, sjk) or Fraction(sjk, m) - Fraction(sj * sk, m * m) != fit.sigma[j][k]:
            return FitReport(False, "covariance entry mismatch", (j, k), None,
                             report.checked_mean, report.checked_cov)

    if plan.refit_fraction > 0:
        if plan.refit_threshold is None:
            raise ValueError("subset refit needs a distance threshold")
        size = max(2, round(plan.refit_fraction * m))
        subset = sorted(random.Random(plan.seed).sample(sorted(payloads), min(size, m)))
        sub_payloads, sub_agg = fetch(subset)
        if set(sub_payloads) != set(subset):
            return FitReport(False, "provider did not return the sampled contributors")
        if check_aggregate is not None and not check_aggregate(sub_agg, sub_payloads):
            return FitReport(False, "aggregate over the refit subset rejected")
        sub_vectors = [schema.unpack(pk, sub_payloads[i]) for i in subset]
        plain = [refit_decrypt(c) for c in encrypted_sums(pk, schema, sub_vectors)]
        sub = GaussianFit.from_sums(plain[:beta], dict(zip(pairs(beta), plain[beta:])), len(subset))
        mu0, s0 = sub.as_arrays()
        mu1, s1 = fit.as_arrays()
        report.distance = float(gaussian_kl(mu0, s0, mu1, s1))
        if report.distance > plan.refit_threshold:
            report.accepted = False
            report.reason = "subset refit too far from the claimed fit"
    return report


def aggregate_for(signatures, indexes):
    return ibs.aggregate([signatures[i] for i in indexes], indexes)


def fit_to_rows(fit, digits=6):
    """Decimal rendering for display."""
    mu = [round(float(x), digits) for x in fit.mu]
    sigma = [[round(float(x), digits) for x in r] for r in fit.sigma]
    return mu, sigma

