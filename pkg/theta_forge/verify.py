"""Randomized property suites behind ``theta-forge verify``.

Each suite draws its lattices from a Philox stream keyed by (seed, suite,
trial), runs the identities and inequalities of one module, and records
every failure with its witness instead of stopping at the first.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from . import extensions, lattice as lat, profile, prolim, siegel, thermo
from . import theta as th
from .errors import ThetaForgeError
from .parallel import generator

logger = logging.getLogger(__name__)


def random_gram(rng: np.random.Generator, n: int, spread: float = 0.3) -> np.ndarray:
    """A size-reduced random Gram matrix of determinant 1, condition controlled by ``spread``."""
    b = np.eye(n) + spread * rng.standard_normal((n, n))
    g = b.T @ b
    g /= np.linalg.det(g) ** (1.0 / n)
    g, _ = lat.size_reduce(g)
    return g


def random_lattice(rng: np.random.Generator, n: int, spread: float = 0.3) -> lat.EuclideanLattice:
    return lat.make_lattice(random_gram(rng, n, spread))


def random_unimodular(rng: np.random.Generator, n: int, steps: int = 0) -> list:
    """Product of random elementary column operations with multipliers in {-2..2}."""
    u = np.eye(n, dtype=np.int64)
    for _ in range(steps or 3 * n):
        i, j = rng.choice(n, size=2, replace=False) if n > 1 else (0, 0)
        if i == j:
            continue
        u[:, i] += int(rng.integers(-2, 3)) * u[:, j]
    return u.tolist()


def random_sequence(rng: np.random.Generator, n: int, k: int) -> lat.AdmissibleSequence:
    total = random_lattice(rng, n)
    u = random_unimodular(rng, n)
    sub_basis = [row[:k] for row in u]
    return lat.admissible_sequence(total, sub_basis)


def brute_force_ball(lattice: lat.EuclideanLattice, r2: float) -> set:
    """Box search with |x_i| <= sqrt(r2 (G^-1)_ii)."""
    n = lattice.rank
    inv = np.linalg.inv(lattice.gram)
    bounds = [int(math.floor(math.sqrt(r2 * inv[i, i]))) for i in range(n)]
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in bounds], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    norms = np.einsum("ij,jk,ik->i", pts, lattice.gram, pts)
    return {tuple(int(v) for v in p) for p in pts[norms <= r2 * (1.0 + 1e-10)]}


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def check(self, label: str, ok: bool, **witness):
        self.checks += 1
        if not ok:
            self.failures.append({"check": label, **witness})
            logger.warning("verify %s: %s failed %s", self.name, label, witness)


def _lattice_suite(res: SuiteResult, rng, trial: int, tol: float):
    n = 1 + trial % 4
    l = random_lattice(rng, n)
    res.check("dual_degree", abs(lat.degree(lat.dual(l)) + lat.degree(l)) <= 1e-9, trial=trial)
    r2 = float(rng.uniform(0.5, 3.0))
    got = {v.coords for v in lat.enumerate(l, r2)}
    res.check("enumerate_vs_box", got == brute_force_ball(l, r2), trial=trial, r2=r2)
    other = random_lattice(rng, 1 + trial % 3)
    s = lat.direct_sum(l, other)
    res.check("sum_degree", abs(lat.degree(s) - lat.degree(l) - lat.degree(other)) <= 1e-9, trial=trial)
    if n > 1:
        seq = random_sequence(rng, n, 1 + trial % (n - 1))
        res.check("degree_additivity", abs(seq.degree_defect) <= 1e-9, trial=trial)


def _theta_suite(res: SuiteResult, rng, trial: int, tol: float):
    n = 1 + trial % 6
    l = random_lattice(rng, n)
    res.check("poisson_rr", abs(th.poisson_rr_check(l, tol)) <= 1e-8, trial=trial, rank=n)
    t = float(rng.choice([0.25, 1.0, 4.0]))
    if n <= 5:
        res.check("functional_equation", abs(th.functional_equation_residual(l, t, tol)) <= 2e-9,
                  trial=trial, t=t)
    other = random_lattice(rng, 1 + trial % 3)
    gap = th.h0_theta(lat.direct_sum(l, other), tol) - th.h0_theta(l, tol) - th.h0_theta(other, tol)
    res.check("additivity", abs(gap) <= 1e-8, trial=trial, gap=gap)
    delta = float(rng.uniform(0.0, 2.0))
    d = th.twist_defect(l, delta, tol)
    res.check("twist_bound", -1e-9 <= d <= n * delta + 1e-9, trial=trial, delta=delta, defect=d)
    x = 2.0 ** float(rng.integers(-10, 11))
    res.check("tau_functional_equation", abs(th.tau(x) - th.tau(1.0 / x) + 0.5 * math.log(x)) <= 1e-12, x=x)
    s = float(rng.uniform(-3.0, 3.0))
    res.check("eta_bound", th.eta(s) <= th.ETA_TAIL_C * math.exp(-math.pi * math.exp(2.0 * abs(s))), t=s)
    r = math.sqrt(n / (2.0 * math.pi * t)) * 1.5
    inside, lower = th.mass_near_origin(l, t, r, tol)
    res.check("mass_near_origin", inside >= lower * (1.0 - 1e-9), trial=trial)
    lap = profile.laplace_theta(l, t, tol)
    res.check("laplace_identity", abs(lap / th.theta(l, t, tol).value - 1.0) <= 1e-9, trial=trial)


def _profile_suite(res: SuiteResult, rng, trial: int, tol: float):
    n = 1 + trial % 4
    l = random_lattice(rng, n)
    try:
        profile.comparison_suite(l, xs=(0.5, 1.0, 2.0), centers=20, seed=trial, tol=tol)
        res.check("comparison", True)
    except ThetaForgeError as e:
        res.check("comparison", False, trial=trial, error=str(e), witness=getattr(e, "witness", {}))
    other = random_lattice(rng, 1 + trial % 2)
    t1, t2 = (float(v) for v in rng.uniform(0.3, 2.0, 2))
    res.check("superadditivity", profile.superadditivity_gap(l, other, t1, t2) >= 0, trial=trial)
    l2 = random_lattice(rng, 2)
    try:
        profile.transference_check(l2, samples=50, seed=trial)
        res.check("transference", True)
    except ThetaForgeError as e:
        res.check("transference", False, trial=trial, error=str(e))
    bound = profile.banaszczyk_first_minimum_bound(l)
    if bound is not None:
        res.check("first_minimum", math.expm1(th.h0_theta(l, tol)) <= bound * (1 + 1e-9), trial=trial)


def _extensions_suite(res: SuiteResult, rng, trial: int, tol: float):
    n = 2 + trial % 4
    k = 1 + trial % min(3, n - 1)
    seq = random_sequence(rng, n, k)
    rep = extensions.h_theta_defect(seq, tol)
    res.check("defect_nonnegative", rep.defect >= -2e-9, trial=trial, defect=rep.defect)
    try:
        extensions.alternating_chain(seq, tol)
        res.check("alternating_chain", True)
    except ThetaForgeError as e:
        res.check("alternating_chain", False, trial=trial, error=str(e))
    e, g = random_lattice(rng, 1), random_lattice(rng, 1)
    t = rng.uniform(-1.0, 1.0, (1, 1))
    res.check("periodicity", abs(extensions.periodicity_residual(e, g, t, [[int(rng.integers(-3, 4))]], tol)) <= 1e-9)
    top = extensions.gext(e, g, np.zeros((1, 1)), tol).value
    res.check("max_at_zero", extensions.gext(e, g, t, tol).value <= top * (1 + 1e-9), trial=trial)


def _thermo_suite(res: SuiteResult, rng, trial: int, tol: float):
    base = [lat.integers(1), lat.make_lattice([[1.0, -0.5], [-0.5, 1.0]])][trial % 2]
    space = thermo.from_lattice(base, 1.0 / 16.0, tol)
    beta = float(rng.choice([0.25, 0.5, 1.0, 2.0, 4.0]))
    rep = thermo.duality_roundtrip(space, [beta])
    res.check("legendre_roundtrip", rep.max_psi_residual <= 1e-6, beta=beta, residual=rep.max_psi_residual)
    res.check("slope", rep.max_slope_residual <= 1e-6, beta=beta, residual=rep.max_slope_residual)
    n = 1 + trial % 3
    l = random_lattice(rng, n)
    try:
        thermo.comparison_bracket(l, xs=[float(rng.uniform(0.2, 2.0))], tol=tol)
        res.check("comparison_bracket", True)
    except ThetaForgeError as e:
        res.check("comparison_bracket", False, trial=trial, error=str(e))
    me = thermo.max_entropy_check(thermo.ball_space(lat.integers(1), 36.0), 1.0, 8, seed=trial)
    res.check("max_entropy", me.all_decrease and abs(me.entropy - me.target) <= 1e-8, trial=trial)


def _prolim_suite(res: SuiteResult, rng, trial: int, tol: float):
    lam = sorted(float(v) for v in np.exp(rng.uniform(-1.0, 3.0, 1 + trial % 5)))
    system = prolim.diagonal_system(lam)
    closed = prolim.explicit_family(lam).closed_form()
    got = th.h0_theta(system.levels[-1], tol)
    res.check("diagonal_closed_form", abs(got - closed) <= 1e-9, trial=trial, got=got, closed=closed)
    tower = prolim.quotient_tower(random_lattice(rng, 2 + trial % 3))
    try:
        prolim.level_checks(tower, tol)
        res.check("level_monotone", True)
    except ThetaForgeError as e:
        res.check("level_monotone", False, trial=trial, error=str(e))
    radius = float(rng.choice([0.5, 1.0, 1.5, 2.0]))
    rep = prolim.theta_finite_report(prolim.hardy_family(radius, 0.0), deltas=(0.0, 1.0))
    res.check("theta_finite", rep.consistent and rep.theta_finite == (radius > 1.0), radius=radius)


def _siegel_suite(res: SuiteResult, rng, trial: int, tol: float):
    delta = float(rng.uniform(-3.0, 3.0))
    seed = int(rng.integers(0, 2**63))
    l = siegel.sample_lattice2(seed, delta)
    res.check("determinant", abs(np.linalg.det(l.gram) * math.exp(2.0 * delta) - 1.0) <= 1e-12,
              seed=seed, delta=delta)
    again = siegel.sample_lattice2(seed, delta)
    res.check("deterministic", np.array_equal(l.gram, again.gram), seed=seed)


SUITES: Dict[str, Callable] = {
    "lattice": _lattice_suite,
    "theta": _theta_suite,
    "profile": _profile_suite,
    "extensions": _extensions_suite,
    "thermo": _thermo_suite,
    "prolim": _prolim_suite,
    "siegel": _siegel_suite,
}


def run_suite(name: str, trials: int = 100, seed: int = 0, tol: float = th.DEFAULT_TOL) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    res = SuiteResult(name)
    key = sum(ord(c) << (8 * i) for i, c in enumerate(name[:8]))
    for trial in range(trials):
        SUITES[name](res, generator(seed, key, trial), trial, tol)
    logger.info("suite %s: %d checks, %d failures", name, res.checks, len(res.failures))
    return res


def run_all(trials: int = 100, seed: int = 0, tol: float = th.DEFAULT_TOL, suites: Optional[list] = None) -> list:
    return [run_suite(name, trials, seed, tol) for name in (suites or list(SUITES))]
