"""Lattice point enumeration kernels.

Written in Cython pure-Python mode: the module runs as plain Python and
``theta-forge build-kernels`` compiles it in place into an extension with
the same interface.
"""
import math

import cython
import numpy as np

from .errors import CountCapExceeded

# relative slack on the ball boundary, so that vectors of norm exactly r2
# are not lost to rounding in the triangular recurrence
BOUNDARY_RTOL = 1e-10


def gaussian_heuristic(n: int, r2: float, logdet: float) -> float:
    """Expected number of points of a rank-n lattice of covolume e^logdet in a ball of squared radius r2."""
    if n == 0:
        return 1.0
    logv = (n / 2.0) * math.log(math.pi * r2) - math.lgamma(n / 2.0 + 1.0) - logdet
    return math.exp(min(logv, 700.0))


@cython.cfunc
@cython.locals(v=cython.double, c=cython.double)
def _zigzag_key(v, c):
    return abs(v - c)


class _Search:
    """Depth-first Fincke-Pohst search over an upper-triangular factor."""

    def __init__(self, r, r2, center, cap):
        self.n = r.shape[0]
        d = np.diag(r).astype(float)
        self.diag2 = d * d
        self.mu = r / d[:, None]
        self.r2 = float(r2)
        self.limit = self.r2 * (1.0 + BOUNDARY_RTOL) + 1e-300
        self.center = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        self.cap = cap
        self.x = np.zeros(self.n, dtype=np.int64)
        self.coords = []
        self.norms = []
        self.count = 0

    @cython.locals(level=cython.int, j=cython.int, partial=cython.double,
                   ctr=cython.double, rem=cython.double, half=cython.double,
                   lo=cython.long, hi=cython.long, xi=cython.long)
    def descend(self, level, partial):
        ctr = self.center[level]
        for j in range(level + 1, self.n):
            ctr -= self.mu[level, j] * (self.x[j] - self.center[j])
        rem = self.limit - partial
        if rem < 0.0:
            return
        half = math.sqrt(rem / self.diag2[level])
        lo = math.ceil(ctr - half)
        hi = math.floor(ctr + half)
        if lo > hi:
            return
        if level == 0:
            xs = np.arange(lo, hi + 1, dtype=np.int64)
            vals = partial + self.diag2[0] * (xs - ctr) ** 2
            keep = vals <= self.limit
            k = int(keep.sum())
            if k == 0:
                return
            block = np.empty((k, self.n), dtype=np.int64)
            block[:, 1:] = self.x[1:]
            block[:, 0] = xs[keep]
            self.coords.append(block)
            self.norms.append(vals[keep])
            self.count += k
            if self.count > self.cap:
                raise CountCapExceeded(self.count, self.cap)
            return
        # Schnorr-Euchner: closest candidates first
        for xi in sorted(range(lo, hi + 1), key=lambda v: (_zigzag_key(v, ctr), v)):
            self.x[level] = xi
            self.descend(level - 1, partial + self.diag2[level] * (xi - ctr) ** 2)
        self.x[level] = 0


def enumerate_coords(r, r2: float, center=None, cap: int = 10**8):
    """All integer x with ||R (x - center)||^2 <= r2, unordered.

    ``r`` is the upper-triangular Cholesky factor of the Gram matrix.
    Returns ``(coords, norms)``: an (N, n) int64 array and the squared
    distances computed along the recurrence.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64), np.zeros(1)
    logdet = float(np.sum(np.log(np.abs(np.diag(r)))))
    estimate = gaussian_heuristic(n, r2, logdet)
    if estimate > 4 * cap:
        raise CountCapExceeded(estimate / 4, cap)
    search = _Search(r, r2, center, cap)
    search.descend(n - 1, 0.0)
    if not search.coords:
        return np.zeros((0, n), dtype=np.int64), np.zeros(0)
    return np.concatenate(search.coords), np.concatenate(search.norms)


def gaussian_mass(r, r2: float, t: float, cap: int = 10**8) -> tuple:
    """Sum of exp(-pi t ||v||^2) over the points of the ball, and the point count."""
    _, norms = enumerate_coords(r, r2, cap=cap)
    return float(np.sum(np.exp(-math.pi * t * np.sort(norms)))), int(norms.shape[0])
