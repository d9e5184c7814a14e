"""Supersingular curve y^2 = x^3 + x over F_p, p = 3 (mod 4).

The curve has p + 1 points, so any N dividing p + 1 gives an order-N
subgroup.  With the distortion map (x, y) -> (-x, i*y) into F_p2 = F_p[i]/(i^2+1)
the reduced Tate pairing is a symmetric, non-degenerate bilinear map on that
subgroup.  This is the composite-order setting the BGN cryptosystem needs.

Points are affine ``(x, y)`` tuples of gmpy2 integers, ``None`` is the point at
infinity.  F_p2 elements are ``(a, b)`` meaning ``a + b*i``.
"""
import gmpy2
from gmpy2 import mpz

INF = None


class TypeACurve:
    def __init__(self, p, order, cofactor):
        p = mpz(p)
        if p % 4 != 3:
            raise ValueError("field prime must be 3 mod 4")
        if (p + 1) != mpz(order) * mpz(cofactor):
            raise ValueError("order * cofactor must equal p + 1")
        self.p = p
        self.order = mpz(order)
        self.cofactor = mpz(cofactor)
        self.byte_len = (int(p).bit_length() + 7) // 8
        # (p^2 - 1)/order = (p - 1) * cofactor; the p - 1 part is a Frobenius trick
        self._order_bits = bin(int(self.order))[3:]

    # -- points ---------------------------------------------------------------

    def is_on_curve(self, P):
        if P is INF:
            return True
        x, y = P
        p = self.p
        return (y * y - x * x * x - x) % p == 0

    def neg(self, P):
        if P is INF:
            return INF
        return (P[0], (-P[1]) % self.p)

    def add(self, P, Q):
        if P is INF:
            return Q
        if Q is INF:
            return P
        p = self.p
        x1, y1 = P
        x2, y2 = Q
        if x1 == x2:
            if (y1 + y2) % p == 0:
                return INF
            return self.double(P)
        lam = (y2 - y1) * gmpy2.invert(x2 - x1, p) % p
        x3 = (lam * lam - x1 - x2) % p
        return (x3, (lam * (x1 - x3) - y1) % p)

    def double(self, P):
        if P is INF:
            return INF
        p = self.p
        x, y = P
        if y == 0:
            return INF
        lam = (3 * x * x + 1) * gmpy2.invert(2 * y, p) % p
        x3 = (lam * lam - 2 * x) % p
        return (x3, (lam * (x - x3) - y) % p)

    def _jdouble(self, X, Y, Z):
        # Jacobian doubling for a = 1; Z = 0 encodes infinity
        p = self.p
        if Z == 0 or Y == 0:
            return X, Y, mpz(0)
        XX, YY, ZZ = X * X % p, Y * Y % p, Z * Z % p
        S = 4 * X * YY % p
        M = (3 * XX + ZZ * ZZ) % p
        X3 = (M * M - 2 * S) % p
        return X3, (M * (S - X3) - 8 * YY * YY) % p, 2 * Y * Z % p

    def _jmadd(self, X, Y, Z, x2, y2):
        # Jacobian plus affine
        p = self.p
        if Z == 0:
            return x2, y2, mpz(1)
        Z1Z1 = Z * Z % p
        H = (x2 * Z1Z1 - X) % p
        r = (y2 * Z * Z1Z1 - Y) % p
        if H == 0:
            return self._jdouble(X, Y, Z) if r == 0 else (X, Y, mpz(0))
        HH = H * H % p
        HHH = H * HH % p
        V = X * HH % p
        X3 = (r * r - HHH - 2 * V) % p
        return X3, (r * (V - X3) - Y * HHH) % p, Z * H % p

    def mul(self, P, k):
        """k*P by left-to-right double-and-add in Jacobian coordinates
        (one inversion at the end instead of one per step)."""
        k = int(k)
        if k < 0:
            P, k = self.neg(P), -k
        if P is INF or k == 0:
            return INF
        x2, y2 = P
        X, Y, Z = x2, y2, mpz(1)
        for bit in bin(k)[3:]:
            X, Y, Z = self._jdouble(X, Y, Z)
            if bit == "1":
                X, Y, Z = self._jmadd(X, Y, Z, x2, y2)
        if Z == 0:
            return INF
        p = self.p
        zi = gmpy2.invert(Z, p)
        zi2 = zi * zi % p
        return (X * zi2 % p, Y * zi2 * zi % p)

    def _slow_mul(self, P, k):
        """Affine double-and-add, kept as a reference for tests."""
        k = int(k)
        if k < 0:
            P, k = self.neg(P), -k
        R = INF
        while k:
            if k & 1:
                R = self.add(R, P)
            P = self.double(P)
            k >>= 1
        return R

    def lift_x(self, x):
        """Some point with abscissa x, or None when x^3 + x is a non-residue."""
        p = self.p
        x = mpz(x) % p
        rhs = (x * x * x + x) % p
        if rhs == 0:
            return (x, mpz(0))
        if gmpy2.legendre(rhs, p) != 1:
            return None
        return (x, gmpy2.powmod(rhs, (p + 1) // 4, p))

    def random_point(self, rng):
        """Uniform-ish point of the order-N subgroup (cofactor cleared)."""
        while True:
            P = self.lift_x(rng.randrange(int(self.p)))
            if P is None:
                continue
            if rng.getrandbits(1):
                P = self.neg(P)
            P = self.mul(P, self.cofactor)
            if P is not INF:
                return P

    # -- encoding -------------------------------------------------------------

    def encode_point(self, P):
        """1 flag byte (0 = infinity, 2/3 = y parity) followed by big-endian x."""
        n = self.byte_len
        if P is INF:
            return bytes(n + 1)
        return bytes([2 | int(P[1] & 1)]) + int(P[0]).to_bytes(n, "big")

    def decode_point(self, data):
        n = self.byte_len
        if len(data) != n + 1:
            raise ValueError("bad point encoding length")
        flag = data[0]
        if flag == 0:
            if any(data[1:]):
                raise ValueError("non-canonical infinity encoding")
            return INF
        if flag not in (2, 3):
            raise ValueError("bad point flag")
        x = mpz(int.from_bytes(data[1:], "big"))
        if x >= self.p:
            raise ValueError("x out of field range")
        P = self.lift_x(x)
        if P is None:
            raise ValueError("point not on curve")
        if (P[1] & 1) != (flag & 1):
            P = self.neg(P)
        if self.mul(P, self.order) is not INF:
            raise ValueError("point outside the order-N subgroup")
        return P

    # -- F_p2 -----------------------------------------------------------------

    def f2_mul(self, a, b):
        p = self.p
        a0, a1 = a
        b0, b1 = b
        t0 = a0 * b0
        t1 = a1 * b1
        return ((t0 - t1) % p, ((a0 + a1) * (b0 + b1) - t0 - t1) % p)

    def f2_sqr(self, a):
        p = self.p
        a0, a1 = a
        return ((a0 + a1) * (a0 - a1) % p, 2 * a0 * a1 % p)

    def f2_pow(self, a, k):
        """a^k for a unitary element (norm 1); negative k uses conjugation."""
        k = int(k)
        if k < 0:
            a, k = self.f2_conj(a), -k
        r = (mpz(1), mpz(0))
        while k:
            if k & 1:
                r = self.f2_mul(r, a)
            a = self.f2_sqr(a)
            k >>= 1
        return r

    def f2_conj(self, a):
        return (a[0], (-a[1]) % self.p)

    def f2_inv(self, a):
        p = self.p
        norm_inv = gmpy2.invert(a[0] * a[0] + a[1] * a[1], p)
        return (a[0] * norm_inv % p, (-a[1]) * norm_inv % p)

    def encode_f2(self, a):
        n = self.byte_len
        return int(a[0]).to_bytes(n, "big") + int(a[1]).to_bytes(n, "big")

    def decode_f2(self, data):
        n = self.byte_len
        if len(data) != 2 * n:
            raise ValueError("bad F_p2 encoding length")
        a = (mpz(int.from_bytes(data[:n], "big")), mpz(int.from_bytes(data[n:], "big")))
        if a[0] >= self.p or a[1] >= self.p:
            raise ValueError("coordinate out of field range")
        if (a[0] * a[0] + a[1] * a[1]) % self.p != 1:
            raise ValueError("element outside the pairing target group")
        if self.f2_pow(a, self.order) != (1, 0):
            raise ValueError("element order does not divide N")
        return a

    # -- pairing --------------------------------------------------------------

    def pair(self, P, Q):
        """Reduced Tate pairing e(P, distort(Q)) on the order-N subgroup."""
        if P is INF or Q is INF:
            return (mpz(1), mpz(0))
        p = self.p
        xp, yp = P
        xq, yq = Q
        invert = gmpy2.invert
        # line evaluations at (-xq, i*yq) are (lam*(xq + xt) - yt) + i*yq;
        # vertical lines land in F_p and vanish under the final exponentiation
        f0, f1 = mpz(1), mpz(0)
        xt, yt = xp, yp
        for bit in self._order_bits:
            lam = (3 * xt * xt + 1) * invert(2 * yt, p) % p
            l0 = (lam * (xq + xt) - yt) % p
            # f = f^2 * (l0 + i*yq)
            s0 = (f0 + f1) * (f0 - f1) % p
            s1 = 2 * f0 * f1 % p
            f0, f1 = (s0 * l0 - s1 * yq) % p, (s0 * yq + s1 * l0) % p
            x3 = (lam * lam - 2 * xt) % p
            yt = (lam * (xt - x3) - yt) % p
            xt = x3
            if bit == "1":
                if xt == xp:
                    # T = -P: the closing vertical line, T becomes infinity
                    xt = yt = None
                    break
                lam = (yp - yt) * invert(xp - xt, p) % p
                l0 = (lam * (xq + xt) - yt) % p
                f0, f1 = (f0 * l0 - f1 * yq) % p, (f0 * yq + f1 * l0) % p
                x3 = (lam * lam - xt - xp) % p
                yt = (lam * (xt - x3) - yt) % p
                xt = x3
        # f^(p-1) = conj(f) / f, then the cofactor power
        f = (f0, f1)
        f = self.f2_mul(self.f2_conj(f), self.f2_inv(f))
        return self.f2_pow(f, self.cofactor)


class FixedBase:
    """Windowed fixed-base exponentiation table for a group with a doubling-free
    ``op`` (point addition or F_p2 multiplication)."""

    def __init__(self, base, bits, op, identity, window=4):
        self.op = op
        self.identity = identity
        self.window = window
        self.table = []
        size = 1 << window
        b = base
        for _ in range((bits + window - 1) // window):
            row = [identity, b]
            for _ in range(size - 2):
                row.append(op(row[-1], b))
            self.table.append(row)
            nb = row[-1]
            b = op(nb, b)  # base * 2^window
        self.bits = bits

    def __call__(self, k):
        k = int(k)
        if k < 0 or k.bit_length() > self.bits:
            raise ValueError("exponent outside the precomputed range")
        op = self.op
        acc = self.identity
        mask = (1 << self.window) - 1
        i = 0
        while k:
            d = k & mask
            if d:
                acc = op(acc, self.table[i][d])
            k >>= self.window
            i += 1
        return acc
