"""Depth-limited divide and conquer over a failing batch.

A range that passes batch verification is whitelisted whole.  A failing
range is split at its midpoint and each half is searched again, until a
single signature is checked on its own (and black- or whitelisted) or the
depth budget runs out, in which case the still-undecided range is put on
the resubmit list.
"""
import math
from dataclasses import dataclass, field

from . import ibs


@dataclass
class TraceResult:
    whitelist: list = field(default_factory=list)
    blacklist: list = field(default_factory=list)
    resubmit_list: list = field(default_factory=list)
    verification_call_count: int = 0
    max_depth: int = 0

    def decided(self):
        return len(self.whitelist) + len(self.blacklist)


def trace_ranges(n, check_batch, check_single=None, depth_limit=math.inf):
    """Classify indexes 0..n-1.

    ``check_batch(head, tail)`` verifies the inclusive range; ``check_single(i)``
    verifies one index and defaults to ``check_batch(i, i)``.  ``depth_limit``
    is the budget handed to the first call and decremented per level, so 0
    checks nothing and 1 checks only the whole batch; ``None`` and
    ``math.inf`` mean no limit.
    """
    if n <= 0:
        raise ValueError("nothing to trace")
    if depth_limit is None:
        depth_limit = math.inf
    if depth_limit < 0:
        raise ValueError("depth limit must be non-negative")
    if check_single is None:
        def check_single(i):
            return check_batch(i, i)

    res = TraceResult()

    def run(head, tail, limit, depth):
        res.max_depth = max(res.max_depth, depth)
        if res.decided() == n or limit == 0:
            return
        res.verification_call_count += 1
        ok = check_single(head) if head == tail else check_batch(head, tail)
        if ok:
            res.whitelist.extend(range(head, tail + 1))
        elif head == tail:
            res.blacklist.append(head)
        else:
            mid = (head + tail) // 2
            run(head, mid, limit - 1, depth + 1)
            run(mid + 1, tail, limit - 1, depth + 1)

    run(0, n - 1, depth_limit, 1)
    res.whitelist.sort()
    res.blacklist.sort()
    # whatever the search did not decide must be resubmitted
    decided = set(res.whitelist) | set(res.blacklist)
    res.resubmit_list = [i for i in range(n) if i not in decided]
    return res


def l_depth_trace(params, tuples, depth_limit=math.inf):
    """Trace invalid signatures in ``tuples`` (pseudo identities must be distinct)."""
    tuples = list(tuples)
    if not tuples:
        raise ValueError("nothing to trace")
    keys = {t.pid.key for t in tuples}
    assert len(keys) == len(tuples), "duplicate pseudo identities must be rejected at submission"

    def check_batch(head, tail):
        return ibs.verify_batch(params, tuples[head:tail + 1])

    def check_single(i):
        t = tuples[i]
        return ibs.verify_single(params, t.pid, t.payload, t.sigma)

    return trace_ranges(len(tuples), check_batch, check_single, depth_limit)
