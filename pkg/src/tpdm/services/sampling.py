"""Seeded random sampling for outcome verification."""
import random
from dataclasses import dataclass


def detection_probability(p, c):
    """Chance that c uniform checks hit at least one of a p-fraction of bad items."""
    if not 0 <= p <= 1 or c < 0:
        raise ValueError("need 0 <= p <= 1 and c >= 0")
    return 1 - (1 - p) ** c


def checks_for(p, target):
    """Smallest c with detection_probability(p, c) >= target."""
    if not 0 < p <= 1 or not 0 <= target < 1:
        raise ValueError("need 0 < p <= 1 and 0 <= target < 1")
    c = 0
    while detection_probability(p, c) < target:
        c += 1
    return c


@dataclass(frozen=True)
class SamplePlan:
    checks: int
    seed: int = 0

    def sample(self, pool, salt=0):
        pool = sorted(pool)
        rng = random.Random(f"{self.seed}:{salt}")
        return sorted(rng.sample(pool, min(self.checks, len(pool))))
