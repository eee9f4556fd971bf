"""Theta series, the invariants h0_theta / h1_theta and the functions tau, eta.

Every theta value is certified: the ball is cut at a radius where the
Banaszczyk tail bound guarantees

    sum_{||v||^2 > r2} e^{-pi t ||v||^2} <= q * theta_E(t),

so the partial sum B satisfies B <= theta_E(t) <= B / (1 - q).
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.special

from ._kernels import enumerate_coords, gaussian_mass
from .errors import DomainError
from .lattice import EuclideanLattice, default_cap, degree, dual, make_lattice, orthogonal_blocks, rescale

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
# relative accuracy of the scalar series behind tau
TAU_RTOL = 1e-15

OMEGA = math.pi ** 0.25 / scipy.special.gamma(0.75)
ETA0 = math.log(OMEGA)

# c in h0_theta(L) <= c^{[K:Q]} exp(-pi [K:Q] (e^{-2 deg_n L} - 1))
LINE_BUNDLE_C = 3.0 * math.exp(-math.pi) / (1.0 - 1.0 / (2.0 * math.pi))
# c in eta(t) <= c e^{-pi e^{2|t|}}
ETA_TAIL_C = 3.0


@dataclass(frozen=True)
class ThetaResult:
    t: float
    value: float
    log_value: float
    rel_error: float
    truncation_radius2: float
    points_used: int

    @property
    def upper(self) -> float:
        return self.value * (1.0 + self.rel_error)

    @property
    def log_error(self) -> float:
        return math.log1p(self.rel_error)

    def as_dict(self) -> dict:
        return {"t": self.t, "log_theta": self.log_value, "rel_error": self.rel_error}


def tau(x: float) -> float:
    """log sum_{n in Z} e^{-pi x n^2}."""
    if x <= 0:
        raise ValueError("tau is defined for x > 0")
    if x < 1.0:
        return tau(1.0 / x) - 0.5 * math.log(x)
    acc = 0.0
    k = 1
    while True:
        term = math.exp(-math.pi * x * k * k)
        acc += term
        if term < 1e-18 * (1.0 + acc) or term == 0.0:
            break
        k += 1
    return math.log1p(2.0 * acc)


def eta(t: float) -> float:
    return tau(math.exp(2.0 * abs(t)))


def banaszczyk_q(n: int, rtilde: float) -> float:
    """[r e^{-(r^2-1)/2}]^n: the tail fraction outside the ball of radius r sqrt(n/2 pi t)."""
    return math.exp(n * (math.log(rtilde) - (rtilde * rtilde - 1.0) / 2.0))


def truncation(n: int, t: float, tol: float) -> tuple:
    """Squared radius and tail fraction q <= tol/(1+tol) certifying relative error tol."""
    target = math.log(tol / (1.0 + tol))

    def f(r):
        return n * (math.log(r) - (r * r - 1.0) / 2.0) - target

    hi = 2.0
    while f(hi) > 0:
        hi *= 1.5
    rtilde = scipy.optimize.brentq(f, 1.0, hi, xtol=1e-12)
    rtilde *= 1.0 + 1e-12
    q = banaszczyk_q(n, rtilde)
    return n / (2.0 * math.pi * t) * rtilde * rtilde, q


def theta(lattice: EuclideanLattice, t: float = 1.0, tol: float = DEFAULT_TOL,
          cap: Optional[int] = None) -> ThetaResult:
    """theta_E(t) = sum_v e^{-pi t ||v||^2} with certified relative error <= tol."""
    if t <= 0:
        raise ValueError("t must be positive")
    if not 0 < tol < 0.5:
        raise ValueError("tol must lie in (0, 0.5)")
    n = lattice.rank
    if n == 0:
        return ThetaResult(t, 1.0, 0.0, 0.0, 0.0, 1)
    blocks = orthogonal_blocks(lattice.gram)
    if len(blocks) > 1:
        return _split_theta(lattice, blocks, t, tol, cap)
    if n == 1:
        log_value = tau(t * float(lattice.gram[0, 0]))
        return ThetaResult(t, math.exp(log_value), log_value, TAU_RTOL, 0.0, 0)
    r2, q = truncation(n, t, tol)
    value, points = gaussian_mass(lattice.chol, r2, t, cap=cap or default_cap())
    rel = q / (1.0 - q)
    logger.debug("theta %r t=%g: r2=%.4g, %d points, q=%.2e", lattice, t, r2, points, q)
    return ThetaResult(t, value, math.log(value), rel, r2, points)


def _split_theta(lattice, blocks, t, tol, cap) -> ThetaResult:
    """theta of an orthogonal sum is the product over the summands."""
    part_tol = tol / (2.0 * len(blocks))
    parts = [theta(make_lattice(lattice.gram[np.ix_(b, b)]), t, part_tol, cap) for b in blocks]
    log_value = math.fsum(p.log_value for p in parts)
    rel = math.expm1(sum(math.log1p(p.rel_error) for p in parts))
    value = math.exp(log_value) if log_value < 709.0 else math.inf
    return ThetaResult(t, value, log_value, rel, max(p.truncation_radius2 for p in parts),
                       sum(p.points_used for p in parts))


def log_theta(lattice: EuclideanLattice, t: float = 1.0, tol: float = DEFAULT_TOL) -> float:
    return theta(lattice, t, tol).log_value


def h0_theta(lattice: EuclideanLattice, tol: float = DEFAULT_TOL) -> float:
    return theta(lattice, 1.0, tol).log_value


def h1_theta(lattice: EuclideanLattice, tol: float = DEFAULT_TOL) -> float:
    return theta(dual(lattice), 1.0, tol).log_value


def poisson_rr_check(lattice: EuclideanLattice, tol: float = DEFAULT_TOL) -> float:
    """h0_theta - h1_theta - deg, which vanishes up to the certified error."""
    return h0_theta(lattice, tol) - h1_theta(lattice, tol) - degree(lattice)


def functional_equation_residual(lattice: EuclideanLattice, t: float, tol: float = DEFAULT_TOL) -> float:
    """log theta_E(t) + (n/2) log t - deg E - log theta_{E^dual}(1/t)."""
    n = lattice.rank
    return (log_theta(lattice, t, tol) + 0.5 * n * math.log(t) - degree(lattice)
            - log_theta(dual(lattice), 1.0 / t, tol))


def mass_near_origin(lattice: EuclideanLattice, t: float, r: float, tol: float = DEFAULT_TOL) -> tuple:
    """(sum over ||v|| < r of e^{-pi t ||v||^2}, lower bound (1 - n/(2 pi t r^2)) theta_E(t))."""
    full = theta(lattice, t, tol)
    _, norms = enumerate_coords(lattice.chol, r * r, cap=default_cap())
    inside = float(np.sum(np.exp(-math.pi * t * np.sort(norms[norms < r * r * (1 - 1e-12)]))))
    factor = 1.0 - lattice.rank / (2.0 * math.pi * t * r * r)
    return inside, factor * full.value


@dataclass(frozen=True)
class LineBundleBounds:
    degree: float
    field_degree: int
    upper: float
    upper_simple: float
    constant_c: float


def line_bundle_bounds(deg: float, field_degree: int = 1) -> LineBundleBounds:
    """Upper bounds on h0_theta of a hermitian line bundle of degree <= deg."""
    if field_degree < 1:
        raise ValueError("field_degree must be >= 1")
    d = field_degree
    if deg >= 0:
        upper = min(1.0 + deg, LINE_BUNDLE_C ** d + deg)
        simple = 1.0 + deg
    else:
        upper = math.exp(-math.pi * d * math.expm1(-2.0 * deg / d))
        simple = math.exp(2.0 * math.pi * deg)
    if deg == 0:
        upper = min(upper, 1.0)
    return LineBundleBounds(deg, d, upper, simple, LINE_BUNDLE_C)


@dataclass(frozen=True)
class GroenewegenBound:
    n: int
    lambda1: float
    value: float
    scaled: float
    closed: Optional[float]

    @property
    def closed_holds(self) -> Optional[bool]:
        if self.closed is None:
            return None
        return self.value <= self.closed * (1.0 + 1e-9)


def groenewegen_bound(n: int, lambda1: float, closed: bool = False) -> GroenewegenBound:
    """C(n, lambda) = 3^n (pi lambda^2)^{-n/2} int_{pi lambda^2}^inf u^{n/2} e^{-u} du.

    Evaluated as 3^n e^{-a} int_0^inf (1 + v/a)^{n/2} e^{-v} dv with a = pi lambda^2,
    Gauss-Kronrod on [0, 40] and the analytic bound for the rest.
    """
    if n < 1 or lambda1 <= 0:
        raise ValueError("need n >= 1 and lambda1 > 0")
    a = math.pi * lambda1 * lambda1
    s = n / 2.0
    head, _ = scipy.integrate.quad(lambda v: (1.0 + v / a) ** s * math.exp(-v), 0.0, 40.0,
                                   epsabs=1e-13, epsrel=1e-12, limit=200)
    # int_40^inf (1 + v/a)^s e^{-v} dv <= (1 + 40/a)^s e^{-40} / (1 - s/(a + 40))
    b = a + 40.0
    tail = (b / a) ** s * math.exp(-40.0) / (1.0 - s / b) if b > s else math.inf
    scaled = head + tail
    value = 3.0 ** n * math.exp(-a) * scaled
    closed_value = None
    if closed:
        if lambda1 * lambda1 <= n / (2.0 * math.pi):
            raise DomainError("closed Groenewegen bound needs lambda1^2 > n / (2 pi)")
        closed_value = 3.0 ** n * math.exp(-a) / (1.0 - n / (2.0 * math.pi * lambda1 * lambda1))
    return GroenewegenBound(n, lambda1, value, scaled, closed_value)


def twist_defect(lattice: EuclideanLattice, delta: float, tol: float = DEFAULT_TOL) -> float:
    """h0_theta(E) - h0_theta(E (x) O(-delta)); lies in [0, n delta] for delta >= 0."""
    return h0_theta(lattice, tol) - h0_theta(rescale(lattice, -delta), tol)
