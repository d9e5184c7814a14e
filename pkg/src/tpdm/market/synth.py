"""Synthetic contributor data, written as headered CSV (u1, ..., u_beta)."""
import csv
import io

import numpy as np

DISTRIBUTIONS = ("uniform", "zipf", "gaussian")


def default_gaussian(beta, theta, seed):
    """Mean at the middle of the range and a random correlation structure
    with standard deviation theta/8, so that clipping at 0 and theta is rare."""
    rng = np.random.default_rng([seed, 1])
    a = rng.normal(size=(beta, beta))
    cov = a @ a.T + beta * np.eye(beta)
    d = np.sqrt(np.diag(cov))
    corr = cov / np.outer(d, d)
    sd = theta / 8
    return np.full(beta, theta / 2), corr * sd * sd


def generate(kind, n, beta, theta, seed, distribution=None, mu=None, sigma=None, zipf_a=1.5):
    """Integer matrix of shape (n, beta) with entries in [0, theta].

    ``kind`` "matching" defaults to uniform ratings, "fitting" to discretized
    Gaussian draws (round to nearest, clip to the range).
    """
    if n < 1 or beta < 1 or theta < 0:
        raise ValueError("invalid shape: need n >= 1, beta >= 1, theta >= 0")
    if distribution is None:
        distribution = "gaussian" if kind == "fitting" else "uniform"
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}")
    rng = np.random.default_rng([seed, 0])
    if distribution == "uniform":
        return rng.integers(0, theta + 1, size=(n, beta))
    if distribution == "zipf":
        w = 1.0 / np.arange(1, theta + 2) ** zipf_a
        return rng.choice(theta + 1, size=(n, beta), p=w / w.sum())
    if mu is None or sigma is None:
        m0, s0 = default_gaussian(beta, theta, seed)
        mu = m0 if mu is None else mu
        sigma = s0 if sigma is None else sigma
    x = rng.multivariate_normal(np.asarray(mu, float), np.asarray(sigma, float), size=n, method="eigh")
    return np.clip(np.rint(x), 0, theta).astype(np.int64)


def to_csv(data):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"u{j + 1}" for j in range(data.shape[1])])
    w.writerows(data.tolist())
    return buf.getvalue()


def gen_synthetic(kind, n, beta, theta, seed, path, **kw):
    data = generate(kind, n, beta, theta, seed, **kw)
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(data))
    return path


def load_dataset(path, theta=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not all(h.startswith("u") for h in rows[0]):
        raise ValueError("dataset needs a header row u1,...,u_beta")
    data = [[int(x) for x in r] for r in rows[1:] if r]
    if any(len(r) != len(rows[0]) for r in data):
        raise ValueError("ragged dataset row")
    if theta is not None and any(not 0 <= x <= theta for r in data for x in r):
        raise ValueError(f"dataset rating outside [0, {theta}]")
    return data
