"""Bounded discrete logarithms by baby-step/giant-step.

The table stores j*B for 0 <= j <= M keyed by a value shared by an element
and its inverse (the x coordinate of a point, the real part of a unitary
F_p2 element), so one table covers offsets in [-M, M] and the giant step is
2M + 1.  Giant steps walk outward from zero in both directions, which makes
small magnitudes of either sign the cheapest to recover.
"""


class OutOfRange(ValueError):
    pass


class BabyGiant:
    def __init__(self, base, bound, table_size, op, inverse, key, identity):
        if table_size < 1:
            raise ValueError("table_size must be positive")
        self.bound = int(bound)
        self.op = op
        self.inverse = inverse
        self.key = key
        self.identity = identity
        self.elems = [identity]
        self.index = {}
        x = identity
        for j in range(1, table_size + 1):
            x = op(x, base)
            self.elems.append(x)
            self.index.setdefault(key(x), j)
        self.step = 2 * table_size + 1
        # base^(2M+1)
        self.stride = op(op(self.elems[-1], self.elems[-1]), base)
        self.stride_inv = inverse(self.stride)
        self.max_giant = self.bound // self.step + 1

    def _lookup(self, y):
        if y == self.identity:
            return 0
        j = self.index.get(self.key(y))
        if j is None:
            return None
        return j if y == self.elems[j] else -j

    def solve(self, y):
        """Return m with base^m == y and |m| <= bound, else raise OutOfRange."""
        r = self._lookup(y)
        if r is not None:
            return self._checked(r)
        down = up = y
        op = self.op
        for i in range(1, self.max_giant + 1):
            down = op(down, self.stride_inv)   # y * base^(-i*step)
            r = self._lookup(down)
            if r is not None:
                return self._checked(i * self.step + r)
            up = op(up, self.stride)           # y * base^(i*step)
            r = self._lookup(up)
            if r is not None:
                return self._checked(-i * self.step + r)
        raise OutOfRange("discrete log not found within the plaintext bound")

    def _checked(self, m):
        if abs(m) > self.bound:
            raise OutOfRange(f"plaintext {m} exceeds bound {self.bound}")
        return m
