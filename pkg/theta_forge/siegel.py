"""Random unimodular rank-2 lattices and Monte Carlo checks of the Siegel mean values.

A lattice of rank 2 and covolume e^{-delta}, up to rotation, is a point
tau = x + i y of the standard fundamental domain
|x| <= 1/2, |tau| >= 1, with Gram matrix e^{-delta} / y [[1, x], [x, x^2 + y^2]].
The invariant probability measure there is (3/pi) dx dy / y^2.

Under that measure the mean of e^{h0_theta} is 1 + e^delta and the mean
of the point count N(sqrt t) is 1 + pi t e^delta. Both variables have
infinite variance (the cusp makes them grow like sqrt(y)), so means are
estimated by median-of-means.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import theta as th
from .errors import CountCapExceeded
from .lattice import EuclideanLattice, make_lattice
from .parallel import generator, ordered_map
from .profile import count

logger = logging.getLogger(__name__)

DEFAULT_BLOCKS = 32
# enumeration budget per sample; samples this deep in the cusp are redrawn
SAMPLE_CAP = 10**6
MAX_REDRAWS = 100


@dataclass(frozen=True)
class ModularPoint:
    x: float
    y: float

    def __post_init__(self):
        if abs(self.x) > 0.5 + 1e-12 or self.x * self.x + self.y * self.y < (1.0 - 1e-12) ** 2:
            raise ValueError(f"({self.x}, {self.y}) is outside the fundamental domain")


def sample_point(rng: np.random.Generator) -> ModularPoint:
    """Inverse-transform sample of (3/pi) dx dy / y^2.

    The x-marginal has density proportional to (1 - x^2)^{-1/2}, so x = sin(theta)
    with theta uniform on [-pi/6, pi/6]; given x, y / sqrt(1 - x^2) is Pareto(1).
    """
    u1, u2 = rng.random(2)
    x = math.sin((u1 - 0.5) * math.pi / 3.0)
    y = math.sqrt(1.0 - x * x) / (1.0 - u2)
    return ModularPoint(x, y)


def point_lattice(point: ModularPoint, delta: float = 0.0) -> EuclideanLattice:
    s = math.exp(-delta) / point.y
    x, y = point.x, point.y
    return make_lattice([[s, s * x], [s * x, s * (x * x + y * y)]])


def sample_lattice2(seed: int, delta: float = 0.0, index: int = 0) -> EuclideanLattice:
    """The ``index``-th lattice of the stream ``seed``; covolume e^{-delta}."""
    return point_lattice(sample_point(generator(seed, index)), delta)


def median_of_means(values, blocks: int = DEFAULT_BLOCKS) -> tuple:
    """Median of the means of ``blocks`` contiguous blocks, and the standard error proxy
    std(block means) / sqrt(blocks)."""
    values = np.asarray(values, dtype=float)
    blocks = max(1, min(blocks, values.size))
    means = np.array([b.mean() for b in np.array_split(values, blocks)])
    spread = float(np.std(means) / math.sqrt(blocks)) if blocks > 1 else 0.0
    return float(np.median(means)), spread


@dataclass(frozen=True)
class Estimate:
    estimate: float
    spread: float
    target: float

    @property
    def relative_error(self) -> float:
        return abs(self.estimate / self.target - 1.0)


@dataclass
class SiegelReport:
    delta: float
    t: float
    samples: int
    seed: int
    blocks: int
    redrawn: int
    theta: Estimate
    dual_theta: Estimate
    count: Estimate
    short_fraction: float
    short_fraction_lower: float
    witnesses: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"delta": self.delta, "t": self.t, "samples": self.samples, "seed": self.seed,
               "blocks": self.blocks, "redrawn": self.redrawn,
               "fraction_lambda1_sq_gt_t": self.short_fraction,
               "fraction_lower_bound": self.short_fraction_lower}
        for name in ("theta", "dual_theta", "count"):
            e = getattr(self, name)
            out[name] = {"estimate": e.estimate, "spread": e.spread, "target": e.target}
        out["witnesses"] = dict(self.witnesses)
        return out


def _draw(seed: int, index: int, delta: float, t: float, tol: float) -> tuple:
    """(theta_L(1), N_L(sqrt t), lambda_1^2, redraws) for one sample."""
    for attempt in range(MAX_REDRAWS):
        rng = generator(seed, index, attempt) if attempt else generator(seed, index)
        point = sample_point(rng)
        lattice = point_lattice(point, delta)
        try:
            value = th.theta(lattice, 1.0, tol, cap=SAMPLE_CAP).value
            n = count(lattice, t, cap=SAMPLE_CAP)
        except CountCapExceeded:
            logger.debug("sample %d: y=%.3g too deep in the cusp, redrawing", index, point.y)
            continue
        # the first basis vector of a reduced point is the shortest
        return value, n, float(lattice.gram[0, 0]), attempt
    raise CountCapExceeded(SAMPLE_CAP, SAMPLE_CAP)


def siegel_run(delta: float = 0.0, t: float = 1.0, n_samples: int = 100000, seed: int = 0,
               blocks: int = DEFAULT_BLOCKS, tol: float = 1e-8, threads: Optional[int] = None) -> SiegelReport:
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if t <= 0:
        raise ValueError("t must be positive")
    rows = ordered_map(lambda i: _draw(seed, i, delta, t, tol), range(n_samples), threads)
    thetas = np.array([r[0] for r in rows])
    counts = np.array([r[1] for r in rows], dtype=float)
    minima = np.array([r[2] for r in rows])
    redrawn = int(sum(r[3] for r in rows))
    if redrawn:
        logger.info("%d cusp samples were redrawn", redrawn)
    e_delta = math.exp(delta)
    theta_est = Estimate(*median_of_means(thetas, blocks), 1.0 + e_delta)
    # e^{h1} = e^{h0 - deg} with deg = delta for every sample
    dual_est = Estimate(*median_of_means(thetas / e_delta, blocks), 1.0 + 1.0 / e_delta)
    count_est = Estimate(*median_of_means(counts, blocks), 1.0 + math.pi * t * e_delta)
    threshold = math.log((1.0 + math.pi * t * e_delta) / (1.0 + e_delta))
    gap = np.log(counts) - np.log(thetas)
    witnesses = {
        "threshold": threshold,
        "fraction_above": float(np.mean(gap >= threshold)),
        "fraction_below": float(np.mean(gap <= threshold)),
    }
    # N - 1 >= 2 whenever lambda_1^2 <= t, so P(lambda_1^2 <= t) <= pi t e^delta / 2
    return SiegelReport(delta, t, n_samples, seed, blocks, redrawn, theta_est, dual_est, count_est,
                        float(np.mean(minima > t)), max(0.0, 1.0 - 0.5 * math.pi * t * e_delta), witnesses)


def siegel_average_h0theta(delta: float = 0.0, n_samples: int = 100000, seed: int = 0,
                           blocks: int = DEFAULT_BLOCKS, threads: Optional[int] = None) -> Estimate:
    """Median-of-means estimate of the mean of e^{h0_theta}; target 1 + e^delta."""
    return siegel_run(delta, 1.0, n_samples, seed, blocks, threads=threads).theta


def siegel_average_count(delta: float = 0.0, t: float = 1.0, n_samples: int = 100000, seed: int = 0,
                         blocks: int = DEFAULT_BLOCKS, threads: Optional[int] = None) -> Estimate:
    """Median-of-means estimate of the mean of N(sqrt t); target 1 + pi t e^delta."""
    return siegel_run(delta, t, n_samples, seed, blocks, threads=threads).count
