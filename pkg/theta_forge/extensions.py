"""Subadditivity of h0_theta on admissible sequences and the Gext functional.

An extension of G by E is realized on Z^k x Z^m with the norm

    ||(e, g)||_T^2 = ||e - T g||_E^2 + ||g||_G^2

for a real k x m matrix T; Gext(T) is the theta value of that norm at t = 1.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import theta as th
from .errors import GridTooCoarse, ViolationDetected
from .lattice import AdmissibleSequence, EuclideanLattice, ball_points, degree, direct_sum, dual, make_lattice
from .parallel import ordered_map

logger = logging.getLogger(__name__)

MIN_GRID = 8
MAX_TORUS_DIM = 3
CHAIN_TOL = 5e-9


@dataclass(frozen=True)
class DefectReport:
    defect: float
    error: float
    split: bool
    h0_sub: float
    h0_total: float
    h0_quotient: float


def h_theta_defect(seq: AdmissibleSequence, tol: float = th.DEFAULT_TOL) -> DefectReport:
    """h0_theta(E) - h0_theta(F) + h0_theta(G), with split detection."""
    parts = [th.theta(x, 1.0, tol) for x in (seq.sub, seq.total, seq.quotient)]
    sub, total, quot = (p.log_value for p in parts)
    err = sum(p.log_error for p in parts)
    defect = sub - total + quot
    return DefectReport(defect, err, abs(defect) <= max(err, 2e-9), sub, total, quot)


def _twist(t, k: int, m: int) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(k, m)
    if not np.all(np.isfinite(t)):
        raise ValueError("extension point has non-finite entries")
    return t


def extension_lattice(sub: EuclideanLattice, quotient: EuclideanLattice, t) -> EuclideanLattice:
    """Lattice of the twisted norm ||e - T g||^2 + ||g||^2."""
    k, m = sub.rank, quotient.rank
    t = _twist(t, k, m)
    ge = sub.gram
    ge_t = ge @ t
    g = np.block([[ge, -ge_t], [-ge_t.T, quotient.gram + t.T @ ge_t]])
    return make_lattice((g + g.T) / 2)


def gext(sub: EuclideanLattice, quotient: EuclideanLattice, t, tol: float = th.DEFAULT_TOL) -> th.ThetaResult:
    return th.theta(extension_lattice(sub, quotient, t), 1.0, tol)


def gext_dual(sub: EuclideanLattice, quotient: EuclideanLattice, t, tol: float = th.DEFAULT_TOL) -> float:
    """Poisson summation over E: e^{deg E} sum e^{-pi(||e'||^2 + ||g||^2)} cos(2 pi <e', T g>).

    The sum runs over e' in the dual of E and g in G.
    """
    k, m = sub.rank, quotient.rank
    t = _twist(t, k, m)
    both = direct_sum(dual(sub), quotient)
    r2, _ = th.truncation(max(both.rank, 1), 1.0, tol)
    coords, norms = ball_points(both, r2)
    coords = coords.astype(float)
    phase = np.einsum("ij,jk,ik->i", coords[:, :k], t, coords[:, k:]) if k and m else np.zeros(len(norms))
    order = np.argsort(norms, kind="stable")
    terms = np.exp(-math.pi * norms[order]) * np.cos(2.0 * math.pi * phase[order])
    return math.exp(degree(sub)) * float(np.sum(terms))


def gext_average_target(sub: EuclideanLattice, quotient: EuclideanLattice, tol: float = th.DEFAULT_TOL) -> float:
    """1 - (1 - e^{-h1_theta(E)})(1 - e^{-h0_theta(G)})."""
    a = -math.expm1(-th.h1_theta(sub, tol))
    b = -math.expm1(-th.h0_theta(quotient, tol))
    return 1.0 - a * b


@dataclass(frozen=True)
class TorusAverage:
    average: float
    target: float
    grid: int
    points: int

    @property
    def error(self) -> float:
        return abs(self.average - self.target)


def gext_average(sub: EuclideanLattice, quotient: EuclideanLattice, grid: int = 256,
                 tol: float = th.DEFAULT_TOL, threads: Optional[int] = None) -> TorusAverage:
    """Average of Gext(T)/Gext(0) over the torus Hom(G, E) (x) R/Z on a uniform grid.

    The integrand is smooth and periodic, so the trapezoid rule on the
    product grid converges spectrally.
    """
    k, m = sub.rank, quotient.rank
    dim = k * m
    if grid < MIN_GRID:
        raise GridTooCoarse(f"grid {grid} is below the minimum {MIN_GRID}")
    if dim > MAX_TORUS_DIM:
        raise GridTooCoarse(f"torus of dimension {dim} is too large for an exhaustive grid")
    target = gext_average_target(sub, quotient, tol)
    if dim == 0:
        return TorusAverage(1.0, target, grid, 1)
    base = gext(sub, quotient, np.zeros((k, m)), tol).value
    nodes = [np.array(p, dtype=float).reshape(k, m) / grid
             for p in itertools.product(range(grid), repeat=dim)]
    values = ordered_map(lambda t: gext(sub, quotient, t, tol).value, nodes, threads)
    # index-order summation keeps the result independent of the thread count
    average = math.fsum(values) / (len(values) * base)
    logger.debug("gext average over %d points: %.12g (target %.12g)", len(values), average, target)
    return TorusAverage(average, target, grid, len(values))


def periodicity_residual(sub: EuclideanLattice, quotient: EuclideanLattice, t, shift,
                         tol: float = th.DEFAULT_TOL) -> float:
    """log Gext(T + M) - log Gext(T) for an integer matrix M."""
    k, m = sub.rank, quotient.rank
    shift = np.asarray(shift).reshape(k, m)
    if not np.array_equal(shift, np.round(shift)):
        raise ValueError("shift must be an integer matrix")
    t = _twist(t, k, m)
    return gext(sub, quotient, t + shift, tol).log_value - gext(sub, quotient, t, tol).log_value


@dataclass
class ChainReport:
    h0: dict
    h1: dict
    defect: float
    checks: dict = field(default_factory=dict)


def alternating_chain(seq: AdmissibleSequence, tol: float = th.DEFAULT_TOL, slack: float = CHAIN_TOL) -> ChainReport:
    """The alternating inequalities between h0_theta and h1_theta along 0 -> E -> F -> G -> 0."""
    names = ("sub", "total", "quotient")
    lattices = (seq.sub, seq.total, seq.quotient)
    h0 = {k: th.h0_theta(x, tol) for k, x in zip(names, lattices)}
    h1 = {k: th.h1_theta(x, tol) for k, x in zip(names, lattices)}
    defect = h0["sub"] - h0["total"] + h0["quotient"]
    report = ChainReport(h0, h1, defect)
    rules = {
        "h0_sub_nonnegative": h0["sub"] >= -slack,
        "h0_sub_le_total": h0["sub"] <= h0["total"] + slack,
        "defect_nonnegative": defect >= -slack,
        "defect_le_h1_sub": defect <= h1["sub"] + slack,
        "defect_ge_h1_gap": defect >= h1["sub"] - h1["total"] - slack,
        "alternating_sum": abs(defect - (h1["sub"] - h1["total"] + h1["quotient"])) <= slack,
    }
    for name, ok in rules.items():
        report.checks[name] = bool(ok)
        if not ok:
            raise ViolationDetected(f"alternating chain check {name!r} failed",
                                    {"h0": h0, "h1": h1, "defect": defect})
    return report
