"""Log-Laplace transform, energy and entropy of weighted energy spaces.

A space is a finite list of atoms (weight mu({x}) > 0, energy H(x) >= 0),
possibly the certified truncation of an infinite one. For a lattice the
atoms are its vectors with H = pi ||v||^2, so Psi(beta) = log theta_E(beta)
and S(pi t) is the asymptotic counting invariant h~0_Ar(E, t).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.special

from . import theta as th
from .errors import BetaBelowCertified, GridOverflow, ViolationDetected, XBelowInfimum
from .lattice import EuclideanLattice, ball_points
from .parallel import generator
from .profile import comparison_constant, h0_ar

logger = logging.getLogger(__name__)

ENERGY_RTOL = 1e-12
NEWTON_STEPS = 8
MAX_FEKETE_N = 8
MAX_GRID_BINS = 10**6


@dataclass(frozen=True, eq=False)
class WeightedEnergySpace:
    weights: np.ndarray
    energies: np.ndarray
    beta_min: float = 0.0
    tail_rel: float = 0.0
    label: Optional[str] = None

    @property
    def infimum(self) -> float:
        return float(self.energies[0])

    @property
    def total_log_mass(self) -> float:
        return float(scipy.special.logsumexp(np.log(self.weights)))

    @property
    def atoms(self) -> list:
        return list(zip(self.weights.tolist(), self.energies.tolist()))

    def __len__(self):
        return self.energies.size


def make_space(weights: Sequence[float], energies: Sequence[float], beta_min: float = 0.0,
               tail_rel: float = 0.0, label: Optional[str] = None) -> WeightedEnergySpace:
    """Sort atoms by energy and merge those with equal energy."""
    w = np.asarray(weights, dtype=float).ravel()
    h = np.asarray(energies, dtype=float).ravel()
    if w.size == 0 or w.shape != h.shape:
        raise ValueError("need matching, non-empty weight and energy lists")
    if np.any(w <= 0) or np.any(h < 0) or not np.all(np.isfinite(h)):
        raise ValueError("weights must be positive and energies non-negative")
    order = np.argsort(h, kind="stable")
    w, h = w[order], h[order]
    keep_w, keep_h = [w[0]], [h[0]]
    for wi, hi in zip(w[1:], h[1:]):
        if hi <= keep_h[-1] * (1.0 + ENERGY_RTOL) + 1e-300:
            keep_w[-1] += wi
        else:
            keep_w.append(wi)
            keep_h.append(hi)
    return WeightedEnergySpace(np.array(keep_w), np.array(keep_h), float(beta_min), float(tail_rel), label)


def from_lattice(lattice: EuclideanLattice, beta_min: float, tol: float = th.DEFAULT_TOL) -> WeightedEnergySpace:
    """Lattice vectors as unit atoms of energy pi ||v||^2, truncated so the omitted
    mass at every beta >= beta_min is at most ``tol`` relative."""
    if beta_min <= 0:
        raise ValueError("beta_min must be positive")
    if lattice.rank == 0:
        return make_space([1.0], [0.0], beta_min, 0.0, lattice.label)
    r2, q = th.truncation(lattice.rank, beta_min, tol)
    _, norms = ball_points(lattice, r2)
    return make_space(np.ones(norms.size), math.pi * norms, beta_min, q / (1.0 - q), lattice.label)


def _check_beta(space: WeightedEnergySpace, beta: float):
    if beta < space.beta_min * (1.0 - 1e-12):
        raise BetaBelowCertified(beta, space.beta_min)


def _log_gibbs(space: WeightedEnergySpace, beta: float) -> tuple:
    a = np.log(space.weights) - beta * space.energies
    z = scipy.special.logsumexp(a)
    return a - z, float(z)


def psi(space: WeightedEnergySpace, beta: float) -> float:
    """Psi(beta) = log sum mu({x}) e^{-beta H(x)}."""
    _check_beta(space, beta)
    return _log_gibbs(space, beta)[1]


def gibbs(space: WeightedEnergySpace, beta: float) -> np.ndarray:
    _check_beta(space, beta)
    return np.exp(_log_gibbs(space, beta)[0])


def energy_u(space: WeightedEnergySpace, beta: float) -> float:
    """U(beta) = -Psi'(beta), the Gibbs mean of H."""
    return float(np.dot(gibbs(space, beta), space.energies))


def variance(space: WeightedEnergySpace, beta: float) -> float:
    """-U'(beta) = Psi''(beta)."""
    p = gibbs(space, beta)
    u = float(np.dot(p, space.energies))
    return float(np.dot(p, (space.energies - u) ** 2))


@dataclass(frozen=True)
class EntropyResult:
    x: float
    value: float
    beta: float
    tail_rel: float


def entropy_s(space: WeightedEnergySpace, x: float) -> EntropyResult:
    """S(x) = inf_{beta > 0} (beta x + Psi(beta)) and the minimizing beta."""
    inf_h = space.infimum
    if x <= inf_h:
        raise XBelowInfimum(x, inf_h)
    if len(space) == 1:
        return EntropyResult(x, float(math.log(space.weights[0])), 0.0, space.tail_rel)
    lo = space.beta_min if space.beta_min > 0 else 1e-12
    if energy_u(space, lo) <= x:
        if space.beta_min > 0:
            # the minimizer sits below the certified range
            raise BetaBelowCertified(lo, space.beta_min)
        return EntropyResult(x, space.total_log_mass, 0.0, space.tail_rel)
    hi = max(2.0 * lo, 1.0)
    while energy_u(space, hi) >= x:
        hi *= 2.0
        if hi > 1e300:
            raise XBelowInfimum(x, inf_h)

    def objective(s):
        b = math.exp(s)
        return b * x + psi(space, b)

    res = scipy.optimize.minimize_scalar(objective, bounds=(math.log(lo), math.log(hi)), method="bounded",
                                         options={"xatol": 1e-10})
    beta = math.exp(res.x)
    # Newton on U(beta) = x
    for _ in range(NEWTON_STEPS):
        var = variance(space, beta)
        if var <= 0:
            break
        step = (energy_u(space, beta) - x) / var
        nxt = min(max(beta + step, lo), hi)
        if abs(nxt - beta) <= 1e-15 * beta:
            beta = nxt
            break
        beta = nxt
    return EntropyResult(x, beta * x + psi(space, beta), beta, space.tail_rel)


def ground_state_entropy(space: WeightedEnergySpace) -> float:
    """log mu(H^{-1}(inf H)), the limit of S(x) as x decreases to inf H."""
    return float(math.log(space.weights[0]))


def htilde0_ar(lattice: EuclideanLattice, t: float, tol: float = th.DEFAULT_TOL) -> EntropyResult:
    """h~0_Ar(E, t) = S_E(pi t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    if lattice.rank == 0:
        return EntropyResult(math.pi * t, 0.0, 0.0, 0.0)
    # minimizer is near n / (2 pi t); widen the certified range until it is inside
    beta_min = lattice.rank / (8.0 * math.pi * t)
    for _ in range(60):
        try:
            return entropy_s(from_lattice(lattice, beta_min, tol), math.pi * t)
        except BetaBelowCertified:
            beta_min /= 4.0
    raise BetaBelowCertified(beta_min, beta_min)


def product(first: WeightedEnergySpace, second: WeightedEnergySpace) -> WeightedEnergySpace:
    """Product measure with additive energy."""
    w = np.outer(first.weights, second.weights).ravel()
    h = np.add.outer(first.energies, second.energies).ravel()
    tail = (1.0 + first.tail_rel) * (1.0 + second.tail_rel) - 1.0
    label = f"{first.label}x{second.label}" if first.label and second.label else None
    return make_space(w, h, max(first.beta_min, second.beta_min), tail, label)


def maxwell_psi(dim: int, m: float, beta: float) -> float:
    return 0.5 * dim * math.log(2.0 * math.pi * m / beta)


def maxwell_u(dim: int, beta: float) -> float:
    return dim / (2.0 * beta)


def maxwell_s(dim: int, m: float, x: float) -> float:
    return 0.5 * dim * (1.0 + math.log(4.0 * math.pi * m * x / dim))


def maxwell_space(dim: int, m: float = 1.0, shells: int = 4000, beta_min: float = 0.25,
                  cutoff: float = 60.0) -> WeightedEnergySpace:
    """Lebesgue measure on R^dim with H = ||p||^2 / 2m, cut into radial shells.

    Shells cover energies up to cutoff / beta_min; each carries its exact
    volume and the energy of its mid radius.
    """
    if dim < 1 or m <= 0 or shells < 1:
        raise ValueError("need dim >= 1, m > 0 and shells >= 1")
    r_max = math.sqrt(2.0 * m * cutoff / beta_min)
    r = np.linspace(0.0, r_max, shells + 1)
    unit_ball = math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)
    volumes = unit_ball * np.diff(r ** dim)
    mid = 0.5 * (r[1:] + r[:-1])
    return make_space(volumes, mid * mid / (2.0 * m), beta_min, math.exp(-cutoff), f"maxwell{dim}")


@dataclass(frozen=True)
class FeketeEntry:
    n: int
    value: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _is_integral(gram: np.ndarray) -> bool:
    diag_ok = np.allclose(np.diag(gram), np.round(np.diag(gram)), rtol=0, atol=1e-9)
    off = 2.0 * gram
    return bool(diag_ok and np.allclose(off, np.round(off), rtol=0, atol=1e-9))


def _binned_counts(bins: np.ndarray, nbins: int) -> np.ndarray:
    return np.bincount(bins[bins < nbins], minlength=nbins).astype(float)


def _cumulative_logs(base: np.ndarray, limits) -> list:
    out = []
    conv = np.ones(1)
    for n, limit in enumerate(limits, start=1):
        conv = np.convolve(conv, base)[: limits[-1] + 1]
        total = float(conv[: limit + 1].sum())
        if not math.isfinite(total):
            raise GridOverflow(f"tuple count overflows at n={n}")
        out.append(math.log(total) / n)
    return out


def fekete_oracle(lattice: EuclideanLattice, t: float = 1.0, n_max: int = 8,
                  step: Optional[float] = None) -> list:
    """(1/n) log #{(v_1..v_n) : sum ||v_i||^2 <= n t} for n = 1..n_max.

    Integral Gram matrices are convolved exactly on integer energies; any
    other lattice is bracketed between floor and ceil binnings of step h.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if not 1 <= n_max <= MAX_FEKETE_N:
        raise ValueError(f"n_max must lie in [1, {MAX_FEKETE_N}]")
    top = n_max * t
    if lattice.rank == 0:
        return [FeketeEntry(n, 0.0, 0.0, 0.0) for n in range(1, n_max + 1)]
    _, norms = ball_points(lattice, top)
    ns = range(1, n_max + 1)
    if step is None and _is_integral(lattice.gram):
        # integer energies: counts stay exact in binary64 far beyond these sizes
        limits = [int(math.floor(n * t + 1e-9)) for n in ns]
        vals = _cumulative_logs(_binned_counts(np.round(norms).astype(np.int64), limits[-1] + 1), limits)
        return [FeketeEntry(n, v, v, v) for n, v in zip(ns, vals)]
    h = step or 1e-3 * t
    limits = [int(math.floor(n * t / h * (1.0 + 1e-12))) for n in ns]
    nbins = limits[-1] + 1
    if nbins > MAX_GRID_BINS:
        raise GridOverflow(f"{nbins} energy bins exceed the limit {MAX_GRID_BINS}")
    floor_bins = np.floor(norms / h * (1.0 + 1e-12)).astype(np.int64)
    ceil_bins = np.ceil(norms / h * (1.0 - 1e-12)).astype(np.int64)
    upper = _cumulative_logs(_binned_counts(floor_bins, nbins), limits)
    lower = _cumulative_logs(_binned_counts(ceil_bins, nbins), limits)
    return [FeketeEntry(n, 0.5 * (lo + up), lo, up) for n, lo, up in zip(ns, lower, upper)]


@dataclass
class MaxEntropyReport:
    beta: float
    entropy: float
    target: float
    drops: list = field(default_factory=list)

    @property
    def all_decrease(self) -> bool:
        return all(d > 0 for d in self.drops)


def information(space: WeightedEnergySpace, p: np.ndarray) -> float:
    """I(p) = -sum p log(p / mu), the entropy of p relative to mu."""
    mask = p > 0
    return float(-np.sum(p[mask] * (np.log(p[mask]) - np.log(space.weights[mask]))))


def max_entropy_check(space: WeightedEnergySpace, beta: float, perturbations: int = 64,
                      seed: int = 0, size: float = 0.1) -> MaxEntropyReport:
    """Gibbs measure maximizes I among probabilities with the same mean energy."""
    p = gibbs(space, beta)
    u = float(np.dot(p, space.energies))
    ent = information(space, p)
    target = entropy_s(space, u).value if u > space.infimum else ground_state_entropy(space)
    report = MaxEntropyReport(beta, ent, target)
    rng = generator(seed, 0x6D6178)
    basis = np.vstack([np.ones_like(space.energies), space.energies - u])
    gram = (basis * p) @ basis.T
    for _ in range(perturbations):
        g = rng.standard_normal(space.energies.size)
        # p-weighted projection off span{1, H}
        coef = np.linalg.lstsq(gram, (basis * p) @ g, rcond=None)[0]
        g = g - coef @ basis
        scale = float(np.max(np.abs(g)))
        if scale == 0:
            continue
        q = p * (1.0 + size * g / scale)
        report.drops.append(ent - information(space, q))
    return report


@dataclass
class DualityReport:
    betas: list
    psi_residuals: list
    slope_residuals: list

    @property
    def max_psi_residual(self) -> float:
        return max(self.psi_residuals, default=0.0)

    @property
    def max_slope_residual(self) -> float:
        return max(self.slope_residuals, default=0.0)


def duality_roundtrip(space: WeightedEnergySpace, betas: Sequence[float]) -> DualityReport:
    """sup_x (S(x) - beta x) against Psi(beta), and S'(U(beta)) against beta."""
    report = DualityReport(list(betas), [], [])
    for beta in betas:
        u = energy_u(space, beta)
        lo_b = max(beta / 4.0, 1.01 * space.beta_min)
        x_hi = energy_u(space, lo_b)
        x_lo = energy_u(space, 4.0 * beta)
        res = scipy.optimize.minimize_scalar(lambda x: -(entropy_s(space, x).value - beta * x),
                                             bounds=(x_lo, x_hi), method="bounded",
                                             options={"xatol": 1e-12 * max(1.0, u)})
        report.psi_residuals.append(abs(-res.fun - psi(space, beta)))
        report.slope_residuals.append(abs(entropy_s(space, u).beta - beta))
    return report


@dataclass(frozen=True)
class SecondLawReport:
    x: float
    joint: float
    split_max: float
    argmax: float
    beta: float
    u_first: float

    @property
    def gap(self) -> float:
        return abs(self.joint - self.split_max)


def second_law_check(first: WeightedEnergySpace, second: WeightedEnergySpace, x: float,
                     grid: int = 201) -> SecondLawReport:
    """S_{AxB}(x) = max over t of S_A(t) + S_B(x - t), maximized at t = U_A(beta)."""
    joint = entropy_s(product(first, second), x)
    lo, hi = first.infimum, x - second.infimum
    if hi <= lo:
        raise XBelowInfimum(x, first.infimum + second.infimum)
    pad = (hi - lo) * 1e-6

    def split(t1):
        return entropy_s(first, t1).value + entropy_s(second, x - t1).value

    ts = np.linspace(lo + pad, hi - pad, grid)
    vals = [split(t1) for t1 in ts]
    i = int(np.argmax(vals))
    a, b = ts[max(i - 1, 0)], ts[min(i + 1, grid - 1)]
    res = scipy.optimize.minimize_scalar(lambda s: -split(s), bounds=(a, b), method="bounded",
                                         options={"xatol": 1e-12 * max(1.0, x)})
    best_t, best = (res.x, -res.fun) if -res.fun >= vals[i] else (ts[i], vals[i])
    return SecondLawReport(x, joint.value, best, float(best_t), joint.beta, energy_u(first, joint.beta))


@dataclass
class BracketReport:
    rank: int
    rows: list = field(default_factory=list)


def comparison_bracket(lattice: EuclideanLattice, xs: Sequence[float] = (), tol: float = th.DEFAULT_TOL,
                       slack: float = 1e-8) -> BracketReport:
    """h0_Ar <= h~0_Ar <= log theta(n / 2 pi x) + n/2 and log theta(n / 2 pi x) <= min(h~0_Ar, h0_Ar + C(n)).

    x = n / 2 pi is always included, where log theta(1) = h0_theta.
    """
    n = lattice.rank
    if n < 1:
        raise ValueError("comparison needs rank >= 1")
    cn = comparison_constant(n)
    report = BracketReport(n)
    for x in sorted(set(xs) | {n / (2.0 * math.pi)}):
        har = h0_ar(lattice, x)
        ht = htilde0_ar(lattice, x, tol).value
        lt = th.log_theta(lattice, n / (2.0 * math.pi * x), tol)
        row = {"x": x, "h0_ar": har, "htilde0_ar": ht, "log_theta": lt, "C": cn}
        report.rows.append(row)
        failed = [name for name, ok in (
            ("h0_ar_le_htilde", har <= ht + slack),
            ("htilde_le_theta", ht <= lt + n / 2.0 + slack),
            ("theta_le_htilde", lt <= ht + slack),
            ("theta_le_count", lt <= har + cn + slack),
        ) if not ok]
        if failed:
            raise ViolationDetected(f"comparison bracket fails at x={x:g}: {', '.join(failed)}", row)
    return report


def ball_space(lattice: EuclideanLattice, r2: float) -> WeightedEnergySpace:
    """The finite space of the vectors with ||v||^2 <= r2."""
    _, norms = ball_points(lattice, r2)
    return make_space(np.ones(norms.size), math.pi * norms, 0.0, 0.0, lattice.label)
