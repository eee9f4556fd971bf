"""Pro-euclidean lattices through their finite truncations.

A projective system is a chain E_0 <- E_1 <- ... <- E_k of lattices with
surjective integer maps q_i: E_{i+1} -> E_i such that the norm of E_i is
the quotient norm of E_{i+1}. Kernels S_i = ker q_i carry the induced norm.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.integrate
import scipy.linalg

from . import intmat
from . import theta as th
from ._kernels import enumerate_coords
from .errors import InconsistentBounds, NotSaturated, NotSummableAtDepth, ViolationDetected
from .lattice import (
    EuclideanLattice,
    ball_points,
    closest_vector,
    default_cap,
    make_lattice,
    quotient_gram,
    rescale,
    sublattice,
    zero_lattice,
)

logger = logging.getLogger(__name__)

QUOTIENT_RTOL = 1e-9
TAIL_POINTS = 3
STRONG_EPS = 0.05
# kernel invariants at or below this are treated as exact zeros
NEGLIGIBLE = 1e-300
# log-slopes above -FLAT_SLOPE are read as no decay
FLAT_SLOPE = 1e-6
# hardy_invariant sums at most this many terms one by one
MAX_HARDY_TERMS = 100000
# log of the lambda where the terms have become negligible
HARDY_TAIL_LOG = 2.0


@dataclass(frozen=True, eq=False)
class ProjectiveSystem:
    levels: tuple
    maps: tuple
    kernels: tuple
    kernel_bases: tuple
    label: Optional[str] = None

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def composite(self, i: int, j: int) -> list:
        """The integer map E_j -> E_i for i <= j."""
        if not 0 <= i <= j <= self.depth:
            raise IndexError(f"no map from level {j} to level {i}")
        p = intmat.identity(self.levels[j].rank)
        for m in range(j - 1, i - 1, -1):
            p = intmat.matmul([list(r) for r in self.maps[m]], p) if self.levels[m].rank else []
        return p

    def truncate(self, depth: int) -> "ProjectiveSystem":
        return ProjectiveSystem(self.levels[: depth + 1], self.maps[:depth], self.kernels[:depth],
                                self.kernel_bases[:depth], self.label)

    def __repr__(self):
        ranks = ",".join(str(x.rank) for x in self.levels)
        return f"<ProjectiveSystem {self.label or ''} ranks=[{ranks}]>"


def make_system(levels: Sequence[EuclideanLattice], maps: Sequence, label: Optional[str] = None) -> ProjectiveSystem:
    levels = list(levels)
    if not levels:
        raise ValueError("a projective system needs at least one level")
    if len(maps) != len(levels) - 1:
        raise ValueError(f"{len(levels)} levels need {len(levels) - 1} maps, got {len(maps)}")
    int_maps, kernels, bases = [], [], []
    for i, raw in enumerate(maps):
        lo, hi = levels[i], levels[i + 1]
        q = intmat.as_int_matrix(raw) if lo.rank else []
        if lo.rank and (len(q) != lo.rank or any(len(r) != hi.rank for r in q)):
            raise ValueError(f"map {i} must be {lo.rank} x {hi.rank}")
        if not intmat.is_surjective(q):
            raise NotSaturated(intmat.elementary_divisors(q))
        if lo.rank:
            expected = quotient_gram(hi.gram, q)
            scale = max(1.0, float(np.max(np.abs(lo.gram))))
            if np.max(np.abs(expected - lo.gram)) > QUOTIENT_RTOL * scale:
                raise InconsistentBounds(f"level {i} is not the quotient of level {i + 1} through its map")
        k = intmat.kernel_basis(q, ncols=hi.rank)
        kernels.append(sublattice(hi, k) if k and k[0] else zero_lattice())
        int_maps.append(tuple(tuple(r) for r in q))
        bases.append(tuple(tuple(r) for r in k))
    return ProjectiveSystem(tuple(levels), tuple(int_maps), tuple(kernels), tuple(bases), label)


def diagonal_system(lambdas: Sequence[float], label: Optional[str] = None) -> ProjectiveSystem:
    """Truncations of V_lambda: E_k = diag(lambda_0..lambda_{k-1}) with coordinate projections."""
    lam = [float(x) for x in lambdas]
    levels = [make_lattice(np.diag(lam[:k]) if k else np.zeros((0, 0))) for k in range(len(lam) + 1)]
    maps = [[[1 if r == c else 0 for c in range(k + 1)] for r in range(k)] for k in range(len(lam))]
    return make_system(levels, maps, label)


def hardy_lambdas(radius: float, delta: float, count: int) -> list:
    """lambda_n = R^{2n} e^{-2 delta}, n = 0..count-1."""
    return [math.exp(2.0 * n * math.log(radius) - 2.0 * delta) for n in range(count)]


def hardy_system(radius: float, delta: float, depth: int) -> ProjectiveSystem:
    return diagonal_system(hardy_lambdas(radius, delta, depth), label=f"H({radius:g},{delta:g})")


def quotient_tower(lattice: EuclideanLattice) -> ProjectiveSystem:
    """E_k = quotient of E by the span of its last n - k basis vectors."""
    n = lattice.rank
    levels = []
    for k in range(n + 1):
        q = [[1 if r == c else 0 for c in range(n)] for r in range(k)]
        levels.append(make_lattice(quotient_gram(lattice.gram, q) if k else np.zeros((0, 0))))
    maps = [[[1 if r == c else 0 for c in range(k + 1)] for r in range(k)] for k in range(n)]
    return make_system(levels, maps, lattice.label)


@dataclass(frozen=True)
class DiagonalProFamily:
    kind: str
    lambdas: tuple = ()
    radius: float = 0.0
    delta: float = 0.0

    def lambda_at(self, i: int) -> float:
        if self.kind == "hardy":
            return math.exp(2.0 * i * math.log(self.radius) - 2.0 * self.delta)
        return self.lambdas[i]

    def system(self, depth: int) -> ProjectiveSystem:
        if self.kind == "hardy":
            return hardy_system(self.radius, self.delta, depth)
        return diagonal_system(self.lambdas[:depth])

    def closed_form(self, tol: float = 1e-15) -> float:
        """sum_i tau(lambda_i)."""
        if self.kind == "hardy":
            return hardy_invariant(self.radius, self.delta, tol)
        return math.fsum(th.tau(x) for x in self.lambdas)


def explicit_family(lambdas: Sequence[float]) -> DiagonalProFamily:
    if any(x <= 0 for x in lambdas):
        raise ValueError("lambdas must be positive")
    return DiagonalProFamily("explicit", tuple(float(x) for x in lambdas))


def hardy_family(radius: float, delta: float) -> DiagonalProFamily:
    if radius <= 0:
        raise ValueError("R must be positive")
    return DiagonalProFamily("hardy", radius=float(radius), delta=float(delta))


def _tau_over_x(x: float) -> float:
    return th.tau(x) / x


def _hardy_integral(delta: float) -> float:
    """int_{e^{-2 delta}}^inf tau(x) dx / x, split at 1 through tau(x) = tau(1/x) - log(x) / 2."""
    upper, _ = scipy.integrate.quad(_tau_over_x, 1.0, math.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
    if delta <= 0:
        start = math.exp(-2.0 * delta)
        part, _ = scipy.integrate.quad(_tau_over_x, start, math.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
        return part
    far, _ = scipy.integrate.quad(_tau_over_x, math.exp(2.0 * delta), math.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
    return delta * delta + 2.0 * upper - far


def hardy_invariant(radius: float, delta: float, tol: float = 1e-15) -> float:
    """h(R, delta) = sum_{n >= 0} tau(R^{2n} e^{-2 delta}); infinite unless R > 1.

    Summed term by term while that takes at most MAX_HARDY_TERMS terms,
    otherwise by Euler-Maclaurin with the integral in closed form.
    """
    if radius <= 1.0:
        return math.inf
    log_r = math.log1p(radius - 1.0)
    if max(delta, 0.0) + HARDY_TAIL_LOG > MAX_HARDY_TERMS * log_r:
        return _hardy_euler_maclaurin(log_r, delta)
    acc = 0.0
    n = 0
    while True:
        lam = math.exp(2.0 * n * log_r - 2.0 * delta)
        term = th.tau(lam)
        acc += term
        # past lambda = 1 the terms fall off doubly exponentially
        if lam >= 1.0 and (term <= tol * acc or term == 0.0):
            return acc
        n += 1


def _hardy_euler_maclaurin(log_r: float, delta: float) -> float:
    def g(n: float) -> float:
        return th.tau(math.exp(2.0 * n * log_r - 2.0 * delta))

    integral = _hardy_integral(delta) / (2.0 * log_r)
    slope = 0.5 * (g(1.0) - g(-1.0))
    # dropped corrections are O(log_r^3)
    value = integral + 0.5 * g(0.0) - slope / 12.0
    logger.debug("hardy log R=%.3e delta=%g by Euler-Maclaurin: %.17g", log_r, delta, value)
    return value


@dataclass(frozen=True)
class AsymptoticFit:
    radius: float
    quadratic: float
    linear: float
    constant: float

    @property
    def expected_quadratic(self) -> float:
        return 1.0 / (2.0 * math.log(self.radius))

    @property
    def relative_error(self) -> float:
        return abs(self.quadratic / self.expected_quadratic - 1.0)


def hardy_asymptotic_fit(radius: float, deltas: Sequence[float]) -> AsymptoticFit:
    """Least-squares h(R, delta) ~ a delta^2 + b delta + c; a tends to 1 / (2 log R)."""
    d = np.asarray(deltas, dtype=float)
    h = np.array([hardy_invariant(radius, x) for x in d])
    a, b, c = np.polyfit(d, h, 2)
    return AsymptoticFit(radius, float(a), float(b), float(c))


@dataclass
class SummabilityReport:
    eps: float
    kernel_h0: list
    partial_sums: list
    slope: Optional[float]
    tail: float
    summable: bool
    strong: str

    @property
    def total(self) -> float:
        return (self.partial_sums[-1] if self.partial_sums else 0.0) + self.tail


def _tail_model(values: Sequence[float]) -> tuple:
    """(slope, tail) of a geometric model through the last kernel invariants.

    The slope is a least-squares fit of log h0 against the level; the tail is
    extrapolated from the last value, so a decay that accelerates is overestimated.
    """
    last = list(values[-TAIL_POINTS:])
    if not last or last[-1] <= NEGLIGIBLE:
        return None, 0.0
    live = [(j, v) for j, v in zip(range(len(last)), last) if v > NEGLIGIBLE]
    if len(live) < 2:
        return 0.0, math.inf
    j, v = zip(*live)
    slope = float(np.polyfit(np.array(j, dtype=float), np.log(v), 1)[0])
    if slope >= -FLAT_SLOPE:
        return slope, math.inf
    ratio = math.exp(slope)
    return slope, last[-1] * ratio / (1.0 - ratio)


def kernel_invariants(system: ProjectiveSystem, eps: float = 0.0, tol: float = th.DEFAULT_TOL) -> list:
    """h0_theta(S_i (x) O(eps)) for every kernel."""
    return [th.h0_theta(rescale(s, eps), tol) if s.rank else 0.0 for s in system.kernels]


def summability_report(system: ProjectiveSystem, eps: float = 0.0, tol: float = th.DEFAULT_TOL,
                       strong_eps: float = STRONG_EPS) -> SummabilityReport:
    values = kernel_invariants(system, eps, tol)
    partial = list(np.cumsum(values)) if values else []
    slope, tail = _tail_model(values)
    summable = math.isfinite(tail)
    strong = "not-certified"
    if summable:
        _, strong_tail = _tail_model(kernel_invariants(system, eps + strong_eps, tol))
        if math.isfinite(strong_tail):
            # only this filtration is examined
            strong = "certified-for-this-filtration"
    logger.debug("summability of %r at eps=%g: tail %.3g, slope %s", system, eps, tail, slope)
    return SummabilityReport(eps, values, [float(x) for x in partial], slope, tail, summable, strong)


def minimal_lift(system: ProjectiveSystem, i: int, j: int, w) -> tuple:
    """Shortest v in E_j mapping to w in E_i, as ``(coords, normsq)``."""
    p = system.composite(i, j)
    top = system.levels[j]
    x0 = np.array(intmat.particular_preimage(p, [int(c) for c in w], ncols=top.rank), dtype=float)
    k = intmat.kernel_basis(p, ncols=top.rank)
    if not k or not k[0]:
        return x0.astype(np.int64), top.norm2(x0)
    kb = np.array(k, dtype=float)
    kern = sublattice(top, kb)
    # real minimizer of ||x0 + K c|| in kernel coordinates
    c = -scipy.linalg.solve(kern.gram, kb.T @ top.gram @ x0, assume_a="pos")
    z, _ = closest_vector(kern, c)
    v = x0 + kb @ z
    return np.round(v).astype(np.int64), top.norm2(v)


@dataclass(frozen=True)
class LimitEstimate:
    estimate: float
    upper: float
    lower: float
    depth: int
    tail: float


def limit_h0(system: ProjectiveSystem, tol: float = th.DEFAULT_TOL) -> LimitEstimate:
    """h0_theta of the pro-lattice: the deepest level, bracketed by a lifted sublattice
    from below and by the modeled kernel tail from above."""
    k = system.depth
    report = summability_report(system, 0.0, tol)
    if not report.summable:
        raise NotSummableAtDepth(f"kernel invariants of {system!r} do not decay at depth {k}")
    estimate = th.h0_theta(system.levels[k], tol)
    upper = estimate + report.tail
    lower = 0.0
    for m in range(k):
        rank = system.levels[m].rank
        if rank == 0:
            continue
        lifts = [minimal_lift(system, m, k, np.eye(rank, dtype=np.int64)[c])[0] for c in range(rank)]
        lower = max(lower, th.h0_theta(sublattice(system.levels[k], np.array(lifts, dtype=float).T), tol))
    slack = 1e-9
    if not lower <= estimate + slack or not estimate <= upper + slack:
        raise InconsistentBounds(f"limit bracket out of order: {lower} <= {estimate} <= {upper}")
    return LimitEstimate(estimate, upper, lower, k, report.tail)


@dataclass
class LevelReport:
    level_h0: list
    kernel_h0: list
    monotone: list
    checks: dict = field(default_factory=dict)


def level_checks(system: ProjectiveSystem, tol: float = th.DEFAULT_TOL, slack: float = 1e-9) -> LevelReport:
    """h0(E_{k+1}) <= h0(E_k) + h0(S_k), so h0(E_k) - sum_{j<k} h0(S_j) never increases."""
    levels = [th.h0_theta(x, tol) for x in system.levels]
    kernels = kernel_invariants(system, 0.0, tol)
    monotone = [levels[0]]
    acc = 0.0
    for k in range(1, len(levels)):
        acc += kernels[k - 1]
        monotone.append(levels[k] - acc)
    report = LevelReport(levels, kernels, monotone)
    for k in range(len(kernels)):
        ok = levels[k + 1] <= levels[k] + kernels[k] + slack
        report.checks[f"subadditive[{k}]"] = ok
        if not ok:
            raise ViolationDetected(f"level {k + 1} exceeds level {k} plus its kernel",
                                    {"level": k, "h0_next": levels[k + 1], "h0": levels[k], "kernel": kernels[k]})
    return report


def _fiber_log_ratio(system: ProjectiveSystem, i: int, j: int, w, tol: float) -> tuple:
    """log(p_ij* gamma_j({w}) / gamma_i({w})) and the squared distance of the nearest lift.

    The fiber over w is x0 + K Z^s; its norms split as ||w||^2 + ||K(z - c)||^2,
    so the ratio is a shifted theta sum over the kernel lattice.
    """
    p = system.composite(i, j)
    top = system.levels[j]
    k = intmat.kernel_basis(p, ncols=top.rank)
    if not k or not k[0]:
        return 0.0, 0.0
    x0 = np.array(intmat.particular_preimage(p, [int(c) for c in w], ncols=top.rank), dtype=float)
    kb = np.array(k, dtype=float)
    kern = sublattice(top, kb)
    c = -scipy.linalg.solve(kern.gram, kb.T @ top.gram @ x0, assume_a="pos")
    r2, _ = th.truncation(kern.rank, 1.0, tol)
    coords, _ = enumerate_coords(kern.chol, r2, center=c, cap=default_cap())
    diff = coords - c
    d2 = np.sort(np.einsum("ij,jk,ik->i", diff, kern.gram, diff))
    if d2.size == 0:
        _, dist = closest_vector(kern, c)
        return -math.pi * dist, dist
    return math.log(float(np.sum(np.exp(-math.pi * d2)))), float(d2[0])


@dataclass(frozen=True)
class AtomBracket:
    level: int
    coords: tuple
    normsq: float
    estimate: float
    lower: float
    upper: float
    dominated: bool

    @property
    def log_width(self) -> float:
        return math.log(self.upper) - math.log(self.lower)

    @property
    def contains_estimate(self) -> bool:
        return self.lower * (1.0 - 1e-9) <= self.estimate <= self.upper * (1.0 + 1e-9)


@dataclass
class MeasureReport:
    depth: int
    summable: bool
    kernel_h0: list
    tail: float
    atoms: list = field(default_factory=list)

    @property
    def all_dominated(self) -> bool:
        return all(a.dominated for a in self.atoms)


def limit_measure_truncation(system: ProjectiveSystem, depth: Optional[int] = None, floor: float = 1e-12,
                             tol: float = th.DEFAULT_TOL) -> MeasureReport:
    """Push-forwards of the Gaussian measures gamma_j onto the levels i <= depth.

    Every atom w of E_i with e^{-pi ||w||^2} >= floor gets the one-step
    domination check q_i* gamma_{i+1} <= e^{h0(S_i)} gamma_i, the estimate
    of mu_i({w}) from the deepest level, and the bracket
    e^{-pi ||v||^2} <= mu_i({w}) <= e^{-pi ||w||^2 + sum_{k >= i} h0(S_k)}
    with v a shortest lift of w.
    """
    k = system.depth
    depth = k if depth is None else min(depth, k)
    summ = summability_report(system, 0.0, tol)
    kernels = summ.kernel_h0
    report = MeasureReport(depth, summ.summable, kernels, summ.tail)
    r2 = -math.log(floor) / math.pi
    for i in range(depth + 1):
        level = system.levels[i]
        if level.rank:
            atoms, norms = ball_points(level, r2)
        else:
            atoms, norms = np.zeros((1, 0), dtype=np.int64), np.zeros(1)
        remaining = math.fsum(kernels[i:]) + summ.tail
        for w, s in zip(atoms, norms):
            dominated = True
            if i < k:
                step, _ = _fiber_log_ratio(system, i, i + 1, w, tol)
                dominated = step <= kernels[i] + 1e-9
            deep, dist = _fiber_log_ratio(system, i, k, w, tol) if i < k else (0.0, 0.0)
            estimate = math.exp(-math.pi * s + deep)
            lower = math.exp(-math.pi * (s + dist))
            upper = math.exp(-math.pi * s + remaining) if math.isfinite(remaining) else math.inf
            report.atoms.append(AtomBracket(i, tuple(int(x) for x in w), float(s), estimate, lower, upper, dominated))
    return report


@dataclass
class ThetaFiniteReport:
    family: DiagonalProFamily
    rows: list = field(default_factory=list)

    @property
    def theta_finite(self) -> bool:
        return all(r["series_finite"] for r in self.rows)

    @property
    def consistent(self) -> bool:
        return all(r["series_finite"] == r["h0_finite"] for r in self.rows)


def _gaussian_series(family: DiagonalProFamily, delta: float, terms: int = 100000) -> float:
    """sum_i e^{-pi lambda_i e^{-2 delta}}, infinite when the terms do not die out."""
    scale = math.exp(-2.0 * delta)
    if family.kind == "explicit":
        return math.fsum(math.exp(-math.pi * x * scale) for x in family.lambdas)
    if family.radius <= 1.0:
        return math.inf
    acc = 0.0
    for i in range(terms):
        term = math.exp(-math.pi * family.lambda_at(i) * scale)
        acc += term
        if family.lambda_at(i) * scale > 1.0 and term <= 1e-17 * acc:
            return acc
    return math.inf


def theta_finite_report(family: DiagonalProFamily, deltas: Sequence[float] = (-2.0, 0.0, 2.0, 5.0)) -> ThetaFiniteReport:
    """A diagonal family twisted by O(delta) has finite h0 iff sum e^{-pi lambda_i e^{-2 delta}} converges."""
    report = ThetaFiniteReport(family)
    for d in deltas:
        series = _gaussian_series(family, d)
        if family.kind == "hardy":
            h = hardy_invariant(family.radius, family.delta + d)
        else:
            h = math.fsum(th.tau(x * math.exp(-2.0 * d)) for x in family.lambdas)
        report.rows.append({"delta": d, "series": series, "h0": h,
                            "series_finite": math.isfinite(series), "h0_finite": math.isfinite(h)})
    return report
