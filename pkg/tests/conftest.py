import random

import pytest
from hypothesis import HealthCheck, settings

from tpdm import ibs, phe
from tpdm.identity import RegistrationCenter

settings.register_profile("tpdm", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("tpdm")


@pytest.fixture(scope="session")
def bgn_keys():
    return phe.keygen(128, 2**16, "bgn", rng=random.Random(11))


@pytest.fixture(scope="session")
def plain_keys():
    return phe.keygen(128, 2**16, "transparent", rng=random.Random(12))


@pytest.fixture(params=["bgn", "transparent"])
def keys(request, bgn_keys, plain_keys):
    return bgn_keys if request.param == "bgn" else plain_keys


def make_rc(seed=0, backend="transparent", bound=2**16, **kw):
    kw.setdefault("iterations", 1)
    return RegistrationCenter.setup(128, bound, backend, rng=random.Random(seed), **kw)


def enrol(rc, rng, password="pw"):
    rid = rng.randbytes(32)
    rc.register(rid, password)
    pid, sk = rc.issue_credentials(rid, password)
    return rid, pid, sk


def signed_tuples(rc, n, seed=0, payload_bytes=64):
    rng = random.Random(f"{seed}:tuples")
    out = []
    for _ in range(n):
        _, pid, sk = enrol(rc, rng)
        d = rng.randbytes(payload_bytes)
        out.append(ibs.DataTuple(pid, d, ibs.sign(rc.params, sk, d)))
    return out


@pytest.fixture(scope="session")
def rc():
    return make_rc(1)


@pytest.fixture(scope="session")
def tuples64(rc):
    return signed_tuples(rc, 64, seed=1)
