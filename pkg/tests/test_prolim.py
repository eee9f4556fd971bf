import math

import numpy as np
import pytest

from theta_forge import lattice as lat
from theta_forge import prolim
from theta_forge import theta as th
from theta_forge.errors import InconsistentBounds, NotSaturated, NotSummableAtDepth
from theta_forge.parallel import generator
from theta_forge.verify import random_lattice


def test_make_system_validates_maps():
    z2 = lat.integers(2)
    with pytest.raises(NotSaturated):
        prolim.make_system([lat.make_lattice([[4.0]]), z2], [[[2, 0]]])
    with pytest.raises(InconsistentBounds):
        prolim.make_system([lat.make_lattice([[2.0]]), z2], [[[1, 0]]])
    with pytest.raises(ValueError):
        prolim.make_system([lat.integers(1), z2], [])


def test_kernels_of_diagonal_system():
    s = prolim.diagonal_system([1.0, 4.0, 16.0])
    assert s.depth == 3
    assert [k.rank for k in s.kernels] == [1, 1, 1]
    np.testing.assert_allclose(s.kernels[2].gram, [[16.0]])
    assert s.composite(1, 3) == [[1, 0, 0]]
    with pytest.raises(IndexError):
        s.composite(2, 1)


def test_quotient_tower_levels_are_quotients():
    l = random_lattice(generator(23, 0), 3)
    tower = prolim.quotient_tower(l)
    np.testing.assert_allclose(tower.levels[-1].gram, l.gram)
    rep = prolim.level_checks(tower)
    assert all(rep.checks.values())
    assert all(b <= a + 1e-9 for a, b in zip(rep.monotone, rep.monotone[1:]))


def test_diagonal_family_closed_form():
    lam = [4.0 ** i for i in range(8)]
    system = prolim.diagonal_system(lam)
    closed = math.fsum(th.tau(x) for x in lam)
    assert prolim.explicit_family(lam).closed_form() == pytest.approx(closed, abs=1e-15)
    est = prolim.limit_h0(system, tol=1e-12)
    assert abs(est.estimate - closed) <= 1e-10
    assert est.lower <= est.estimate <= est.upper
    assert est.tail == 0.0


def test_hardy_invariant():
    assert prolim.hardy_invariant(1.0, 0.0) == math.inf
    assert prolim.hardy_invariant(2.0, 0.0) == pytest.approx(
        math.fsum(th.tau(4.0 ** n) for n in range(40)), abs=1e-14)
    assert prolim.hardy_family(2.0, 1.0).closed_form() == prolim.hardy_invariant(2.0, 1.0)


def test_hardy_invariant_near_one_uses_closed_integral(monkeypatch):
    direct = prolim.hardy_invariant(1.01, 2.0)
    monkeypatch.setattr(prolim, "MAX_HARDY_TERMS", 10)
    assert prolim.hardy_invariant(1.01, 2.0) == pytest.approx(direct, rel=1e-8)
    assert prolim.hardy_invariant(1.01, 0.0) == pytest.approx(
        math.fsum(th.tau(1.01 ** (2 * n)) for n in range(4000)), rel=1e-6)


def test_hardy_invariant_radius_barely_above_one():
    log_r = math.log1p(1e-9)
    h = prolim.hardy_invariant(1.0 + 1e-9, 5.0)
    assert math.isfinite(h)
    assert h == pytest.approx(25.0 / (2.0 * log_r), rel=1e-2)
    assert h > prolim.hardy_invariant(1.0 + 1e-9, 4.0)


def test_hardy_asymptotic_slope():
    fit = prolim.hardy_asymptotic_fit(math.e, np.linspace(20, 40, 11))
    assert fit.expected_quadratic == pytest.approx(0.5)
    assert fit.relative_error <= 0.05


def test_summability_of_hardy_system():
    system = prolim.hardy_system(2.0, 1.0, 8)
    rep = prolim.summability_report(system)
    assert rep.summable
    assert rep.strong == "certified-for-this-filtration"
    assert rep.total == pytest.approx(prolim.hardy_invariant(2.0, 1.0), rel=1e-6)


def test_non_summable_system():
    system = prolim.diagonal_system([0.5] * 5)
    rep = prolim.summability_report(system)
    assert not rep.summable
    with pytest.raises(NotSummableAtDepth):
        prolim.limit_h0(system)


def test_minimal_lift():
    f = lat.make_lattice([[2.0, 1.0], [1.0, 2.0]])
    q = [[1, 0]]
    g = lat.make_lattice(lat.quotient_gram(f.gram, q))
    system = prolim.make_system([g, f], [q])
    coords, norm2 = prolim.minimal_lift(system, 0, 1, [1])
    assert coords[0] == 1
    assert norm2 == pytest.approx(2.0)


def test_limit_measure_bracket_for_hardy_system():
    system = prolim.hardy_system(4.0, 0.0, 6)
    rep = prolim.limit_measure_truncation(system)
    assert rep.summable
    assert rep.all_dominated
    origin = [a for a in rep.atoms if a.level == 0][0]
    assert origin.lower <= 1.0 <= origin.upper
    assert origin.log_width <= math.fsum(rep.kernel_h0) + rep.tail + 1e-12
    assert all(a.contains_estimate for a in rep.atoms)


def test_theta_finiteness():
    assert prolim.theta_finite_report(prolim.hardy_family(2.0, 0.0)).theta_finite
    rep = prolim.theta_finite_report(prolim.hardy_family(1.0, 0.0), deltas=(0.0,))
    assert not rep.theta_finite
    assert rep.consistent
    explicit = prolim.theta_finite_report(prolim.explicit_family([1.0, 2.0]))
    assert explicit.theta_finite and explicit.consistent
