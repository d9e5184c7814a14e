"""Operation counters.

Hot paths call :func:`bump` with an operation name; any number of nested
:func:`track` blocks receive the increments.  Counting is per execution
context, so concurrent sessions in different threads do not mix totals.
"""
from collections import Counter
from contextlib import contextmanager
from contextvars import ContextVar

_active: ContextVar[tuple] = ContextVar("tpdm_op_counters", default=())

# names used across the package
PAIRING = "pairing"
HASH_TO_G1 = "hash_to_g1"
G1_EXP = "g1_exp"
PHE_ENC = "phe_enc"
PHE_ADD = "phe_add"
PHE_MUL = "phe_mul"
PHE_EXP = "phe_exp"
PHE_DEC = "phe_dec"
BATCH_VERIFY = "batch_verify"
SINGLE_VERIFY = "single_verify"


def bump(name, k=1):
    for c in _active.get():
        c[name] += k


@contextmanager
def track():
    """Yield a Counter receiving every :func:`bump` made inside the block."""
    counter = Counter()
    token = _active.set(_active.get() + (counter,))
    try:
        yield counter
    finally:
        _active.reset(token)
