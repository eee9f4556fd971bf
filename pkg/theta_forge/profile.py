"""Geometry-of-numbers invariants and their comparison with theta invariants."""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import theta as th
from ._kernels import BOUNDARY_RTOL, enumerate_coords, gaussian_heuristic
from .errors import InconsistentBounds, ViolationDetected
from .lattice import (
    EuclideanLattice,
    ball_points,
    closest_vector,
    covolume,
    default_cap,
    degree,
    dual,
    make_lattice,
)
from .parallel import generator, ordered_map

logger = logging.getLogger(__name__)

# ties in squared norms closer than this (relative) are the same threshold
NORM_RTOL = 1e-9


@dataclass(frozen=True)
class CountingProfile:
    thresholds: tuple
    counts: tuple

    def count(self, x: float) -> int:
        """N_E(sqrt(x)) for x within the profile range."""
        idx = np.searchsorted(np.asarray(self.thresholds), x * (1.0 + BOUNDARY_RTOL), side="right")
        return int(self.counts[idx - 1]) if idx else 0

    def rows(self) -> list:
        return [(t, c, math.log(c)) for t, c in zip(self.thresholds, self.counts)]


def _group_norms(norms: np.ndarray) -> tuple:
    norms = np.sort(norms)
    thresholds, counts = [], []
    for s in norms:
        if thresholds and s <= thresholds[-1] * (1.0 + NORM_RTOL) + 1e-300:
            counts[-1] += 1
        else:
            thresholds.append(float(s))
            counts.append(1)
    return thresholds, counts


def counting_profile(lattice: EuclideanLattice, max_r2: float, cap: Optional[int] = None) -> CountingProfile:
    _, norms = ball_points(lattice, max_r2, cap)
    thresholds, counts = _group_norms(norms)
    return CountingProfile(tuple(thresholds), tuple(int(c) for c in np.cumsum(counts)))


def count(lattice: EuclideanLattice, t: float, cap: Optional[int] = None) -> int:
    """N_E(sqrt t) = |{v : ||v||^2 <= t}|."""
    if t <= 0:
        raise ValueError("t must be positive")
    if lattice.rank == 0:
        return 1
    _, norms = ball_points(lattice, t, cap)
    return int(norms.size)


def h0_ar(lattice: EuclideanLattice, t: float = 1.0, cap: Optional[int] = None) -> float:
    return math.log(count(lattice, t, cap))


def h0_ar_open(lattice: EuclideanLattice, t: float = 1.0, cap: Optional[int] = None) -> float:
    """log |{v : ||v||^2 < t}|."""
    if lattice.rank == 0:
        return 0.0
    _, norms = ball_points(lattice, t, cap)
    return math.log(int(np.sum(norms < t * (1.0 - BOUNDARY_RTOL))))


@dataclass(frozen=True)
class FirstMinimum:
    length: float
    normsq: float
    multiplicity: int


def lambda1(lattice: EuclideanLattice) -> FirstMinimum:
    """Shortest nonzero vector length and the number of vectors attaining it."""
    n = lattice.rank
    if n == 0:
        raise ValueError("lambda1 needs rank >= 1")
    ceiling = float(np.min(np.diag(lattice.gram)))
    logdet = math.log(covolume(lattice))
    # start near the radius holding a couple of points, double until nonzero vectors show up
    r2 = ceiling
    for _ in range(200):
        if gaussian_heuristic(n, r2 / 2.0, logdet) < 2.0:
            break
        r2 /= 2.0
    while True:
        _, norms = ball_points(lattice, min(r2, ceiling))
        nonzero = norms[norms > 0]
        if nonzero.size:
            m = float(np.min(nonzero))
            mult = int(np.sum(nonzero <= m * (1.0 + NORM_RTOL)))
            return FirstMinimum(math.sqrt(m), m, mult)
        r2 *= 2.0


def psi(t: float) -> float:
    return t * math.exp(-(t * t - 1.0) / 2.0)


@dataclass(frozen=True)
class TransferenceConstants:
    n: int
    t_n: float
    residual: float
    tn_bound: float

    @property
    def upper(self) -> float:
        """t_n^2 n / (2 pi), the bound on rho(E) lambda_1(E^dual)."""
        return self.t_n ** 2 * self.n / (2.0 * math.pi)

    @property
    def tn_bound_holds(self) -> bool:
        return self.t_n <= self.tn_bound

    def psi(self, t: float) -> float:
        return psi(t)


def transference_constants(n: int) -> TransferenceConstants:
    """t_n > 1 with psi(t_n) = 3^{-1/n}, by bisection."""
    if n < 1:
        raise ValueError("n must be positive")
    target = 3.0 ** (-1.0 / n)
    lo, hi = 1.0, 2.0
    while psi(hi) > target:
        hi *= 2.0
    for i in range(200):
        mid = 0.5 * (lo + hi)
        if psi(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    t_n = 0.5 * (lo + hi)
    logger.debug("t_%d = %.15g after %d bisection steps", n, t_n, i + 1)
    return TransferenceConstants(n, t_n, psi(t_n) - target, 1.0 + math.sqrt(math.log(3.0) / n))


def _lagrange_reduce(gram: np.ndarray) -> np.ndarray:
    g = np.array(gram, dtype=float)
    while True:
        if g[1, 1] < g[0, 0]:
            g = g[::-1, ::-1].copy()
        k = round(g[0, 1] / g[0, 0])
        if k == 0:
            return g
        t = np.array([[1.0, -k], [0.0, 1.0]])
        g = t.T @ g @ t


def covering_radius_exact(lattice: EuclideanLattice) -> float:
    """Exact covering radius for rank <= 2.

    In rank 2 a Lagrange-reduced basis with <b1, b2> >= 0 spans a
    non-obtuse triangle (0, b1, b2) whose circumradius is the covering radius.
    """
    n = lattice.rank
    if n == 1:
        return math.sqrt(lattice.gram[0, 0]) / 2.0
    if n != 2:
        raise ValueError("exact covering radius is available for rank <= 2 only")
    g = _lagrange_reduce(lattice.gram)
    a2, b2, ab = g[0, 0], g[1, 1], abs(g[0, 1])
    c2 = a2 + b2 - 2.0 * ab
    area2 = a2 * b2 - ab * ab
    return math.sqrt(a2 * b2 * c2) / (2.0 * math.sqrt(area2))


@dataclass(frozen=True)
class CoveringInterval:
    lower: float
    upper: float
    exact: bool
    samples: int


def covering_radius_interval(lattice: EuclideanLattice, samples: int = 1000, seed: int = 0,
                             threads: Optional[int] = None) -> CoveringInterval:
    n = lattice.rank
    if n == 0:
        raise ValueError("covering radius needs rank >= 1")
    targets = generator(seed, 0x636F76).random((samples, n))

    def distance(target):
        return closest_vector(lattice, target)[1]

    dists = ordered_map(distance, targets, threads) if samples else []
    lower = math.sqrt(max(dists)) if samples else 0.0
    consts = transference_constants(n)
    upper = consts.upper / lambda1(dual(lattice)).length
    exact = n <= 2
    if exact:
        rho = covering_radius_exact(lattice)
        upper = min(upper, rho)
        lower = max(lower, rho)
    if lower > upper * (1.0 + 1e-9):
        raise InconsistentBounds(f"covering radius lower bound {lower} exceeds upper bound {upper}")
    if exact:
        lower = upper
    return CoveringInterval(lower, upper, exact, samples)


@dataclass(frozen=True)
class TransferenceReport:
    rank: int
    rho_lower: float
    rho_upper: float
    dual_lambda1: float
    product_lower: float
    bound: float
    t_n: float
    exact: bool


def transference_check(lattice: EuclideanLattice, samples: int = 1000, seed: int = 0,
                       threads: Optional[int] = None) -> TransferenceReport:
    """1/2 <= rho(E) lambda_1(E^dual) <= t_n^2 n / (2 pi), the first half only for exact rho."""
    interval = covering_radius_interval(lattice, samples, seed, threads)
    consts = transference_constants(lattice.rank)
    mu = lambda1(dual(lattice)).length
    product = interval.lower * mu
    witness = {"rho_lower": interval.lower, "dual_lambda1": mu, "bound": consts.upper}
    if product > consts.upper * (1.0 + 1e-9):
        raise ViolationDetected(f"rho * lambda1(dual) = {product} exceeds t_n^2 n / 2pi", witness)
    if interval.exact and product < 0.5 * (1.0 - 1e-9):
        raise ViolationDetected(f"rho * lambda1(dual) = {product} is below 1/2", witness)
    return TransferenceReport(lattice.rank, interval.lower, interval.upper, mu, product,
                              consts.upper, consts.t_n, interval.exact)


def comparison_constant(n: int) -> float:
    """C(n) = log(n/2) + (1 + n/2) log(1 + 2/n)."""
    return math.log(n / 2.0) + (1.0 + n / 2.0) * math.log1p(2.0 / n)


def blichfeldt_count(lattice: EuclideanLattice, center) -> int:
    """|{v : ||v - x|| <= 1}| for x given in basis coordinates."""
    coords, _ = enumerate_coords(lattice.chol, 1.0, center=center, cap=default_cap())
    if coords.shape[0] == 0:
        return 0
    diff = coords - np.asarray(center, dtype=float)
    d2 = np.einsum("ij,jk,ik->i", diff, lattice.gram, diff)
    return int(np.sum(d2 <= 1.0 + BOUNDARY_RTOL))


def h0_bl_sampled(lattice: EuclideanLattice, centers: int = 100, seed: int = 0) -> tuple:
    """log max_x |{v : ||v - x|| <= 1}| over the origin and `centers` uniform points of a fundamental cell.

    Returns the value and the maximising centre in basis coordinates.
    """
    if centers < 0:
        raise ValueError("centers must be non-negative")
    rng = generator(seed, 0x626C69)
    best, best_x = blichfeldt_count(lattice, np.zeros(lattice.rank)), np.zeros(lattice.rank)
    for _ in range(centers):
        x = rng.random(lattice.rank)
        k = blichfeldt_count(lattice, x)
        if k > best:
            best, best_x = k, x
    return math.log(best), best_x


@dataclass
class ComparisonReport:
    rank: int
    h0_theta: float
    h0_ar: float
    h0_ar_open: float
    h0_bl: float
    lower: float
    upper: float
    constant: float
    checks: dict = field(default_factory=dict)


def comparison_suite(lattice: EuclideanLattice, xs=(0.25, 0.5, 1.0, 2.0), centers: int = 0,
                     seed: int = 0, tol: float = th.DEFAULT_TOL) -> ComparisonReport:
    """Theta versus counting invariants; raises ViolationDetected on the first failed inequality."""
    n = lattice.rank
    if n < 1:
        raise ValueError("comparison needs rank >= 1")
    res = th.theta(lattice, 1.0, tol)
    h0t = res.log_value
    slack = 2.0 * res.log_error + 1e-12
    har = h0_ar(lattice, 1.0)
    har_open = h0_ar_open(lattice, 1.0)
    c1 = math.log(1.0 - 1.0 / (2.0 * math.pi))
    lower = h0t - 0.5 * n * math.log(n) + c1
    upper = h0t + math.pi
    cn = comparison_constant(n)
    report = ComparisonReport(n, h0t, har, har_open, har, lower, upper, cn)

    def check(name, ok, **witness):
        report.checks[name] = bool(ok)
        if not ok:
            raise ViolationDetected(f"comparison check {name!r} failed", dict(witness, rank=n))

    check("naive_lower", har_open >= lower - slack, h0_ar_open=har_open, lower=lower)
    check("naive_upper", har <= upper + slack, h0_ar=har, upper=upper)
    check("minkowski", har_open >= c1 - 0.5 * n * math.log(n) + degree(lattice) - slack,
          h0_ar_open=har_open, degree=degree(lattice))
    if lambda1(lattice).normsq >= 1.0:
        check("lambda1_ge_1", h0t <= -c1 + 0.5 * n * math.log(n) + slack, h0_theta=h0t)
    for x in xs:
        lt = th.theta(lattice, n / (2.0 * math.pi * x), tol)
        check(f"theta_vs_count[{x:g}]", lt.log_value <= h0_ar(lattice, x) + cn + 2 * lt.log_error,
              x=x, log_theta=lt.log_value, h0_ar=h0_ar(lattice, x), C=cn)
    check("constant_bracket", 1.0 <= cn - math.log(n / 2.0) <= 1.5 * math.log(3.0), C=cn)
    if centers:
        report.h0_bl, x = h0_bl_sampled(lattice, centers, seed)
        check("blichfeldt", report.h0_bl <= h0t + math.pi + slack,
              center=x.tolist(), h0_bl=report.h0_bl, h0_theta=h0t)
    return report


def banaszczyk_first_minimum_bound(lattice: EuclideanLattice) -> Optional[float]:
    """q/(1-q) bounding e^{h0_theta} - 1 when lambda_1 >= sqrt(n / 2 pi), else None."""
    n = lattice.rank
    lam = lambda1(lattice).length
    scale = math.sqrt(n / (2.0 * math.pi))
    if lam < scale:
        return None
    q = th.banaszczyk_q(n, lam / scale)
    return q / (1.0 - q) if q < 1.0 else math.inf


def superadditivity_gap(first: EuclideanLattice, second: EuclideanLattice, t1: float, t2: float) -> float:
    """h0_ar(E1 + E2, t1 + t2) - h0_ar(E1, t1) - h0_ar(E2, t2); never negative."""
    from .lattice import direct_sum

    return h0_ar(direct_sum(first, second), t1 + t2) - h0_ar(first, t1) - h0_ar(second, t2)


def laplace_theta(lattice: EuclideanLattice, t: float, tol: float = th.DEFAULT_TOL) -> float:
    """pi t int_0^inf N_E(sqrt x) e^{-pi t x} dx, integrating the step function exactly."""
    r2, q = th.truncation(lattice.rank, t, tol)
    prof = counting_profile(lattice, r2)
    s = np.asarray(prof.thresholds)
    c = np.asarray(prof.counts, dtype=float)
    upper_edges = np.append(s[1:], r2)
    pieces = c * (np.exp(-math.pi * t * s) - np.exp(-math.pi * t * upper_edges))
    # the last step continues past r2; its remainder belongs to the certified tail
    return float(np.sum(pieces) + c[-1] * math.exp(-math.pi * t * r2))


def a2_family(lam: float) -> EuclideanLattice:
    """E_lambda: Z^2 with ||(x, y)||^2 = lambda (x^2 - x y) + y^2."""
    return make_lattice([[lam, -lam / 2.0], [-lam / 2.0, 1.0]], label=f"E_{lam:g}")


@dataclass(frozen=True)
class SubadditivityFailure:
    lam: float
    total: float
    sub: float
    quotient: float

    @property
    def fails(self) -> bool:
        return self.total > self.sub + self.quotient + 1e-12


def a2_counterexample(lam: float = 2.0) -> SubadditivityFailure:
    """h0_ar of E_lambda, of Z e_1 and of the quotient, showing h0_ar is not subadditive."""
    from .lattice import admissible_sequence

    seq = admissible_sequence(a2_family(lam), [[1], [0]])
    return SubadditivityFailure(lam, h0_ar(seq.total), h0_ar(seq.sub), h0_ar(seq.quotient))
