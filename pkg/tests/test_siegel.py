import math

import numpy as np
import pytest

from theta_forge import siegel
from theta_forge.parallel import generator


def test_points_lie_in_the_fundamental_domain():
    rng = generator(0, 1)
    for _ in range(2000):
        p = siegel.sample_point(rng)
        assert abs(p.x) <= 0.5 + 1e-12
        assert p.x * p.x + p.y * p.y >= 1 - 1e-12
    with pytest.raises(ValueError):
        siegel.ModularPoint(0.0, 0.5)


def test_tail_of_the_invariant_measure():
    # mu(y > Y) = 3 / (pi Y) for Y >= 1
    rng = generator(42)
    ys = np.array([siegel.sample_point(rng).y for _ in range(20000)])
    for cut in (2.0, 4.0):
        assert np.mean(ys > cut) == pytest.approx(3 / (math.pi * cut), abs=0.02)


def test_sampled_lattices_have_fixed_covolume_and_are_reproducible():
    for delta in (-1.0, 0.0, 2.5):
        l = siegel.sample_lattice2(9, delta, index=3)
        assert np.linalg.det(l.gram) * math.exp(2 * delta) == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_array_equal(l.gram, siegel.sample_lattice2(9, delta, index=3).gram)
    assert not np.array_equal(siegel.sample_lattice2(9, 0.0, 0).gram, siegel.sample_lattice2(9, 0.0, 1).gram)


def test_median_of_means():
    est, spread = siegel.median_of_means(np.arange(100, dtype=float), blocks=4)
    assert est == pytest.approx(49.5)
    assert spread > 0
    one, none = siegel.median_of_means([1.0, 2.0, 3.0], blocks=1)
    assert one == 2.0 and none == 0.0


def test_small_run_is_deterministic_across_threads():
    a = siegel.siegel_run(0.0, 1.0, 200, seed=5, blocks=8, threads=1)
    b = siegel.siegel_run(0.0, 1.0, 200, seed=5, blocks=8, threads=3)
    assert a.as_dict() == b.as_dict()
    assert a.theta.target == pytest.approx(2.0)
    assert a.count.target == pytest.approx(1 + math.pi)
    assert 0.0 <= a.short_fraction <= 1.0


def test_run_rejects_bad_arguments():
    with pytest.raises(ValueError):
        siegel.siegel_run(n_samples=0)
    with pytest.raises(ValueError):
        siegel.siegel_run(t=0.0, n_samples=10)


@pytest.mark.slow
def test_siegel_mean_values_at_zero_degree():
    report = siegel.siegel_run(0.0, 1.0, 100000, seed=0)
    assert report.theta.relative_error <= 0.05
    assert report.count.relative_error <= 0.07
    assert report.short_fraction >= report.short_fraction_lower


@pytest.mark.slow
def test_siegel_mean_value_at_negative_degree():
    est = siegel.siegel_average_h0theta(-5.0, 100000, seed=0)
    assert est.target == pytest.approx(1 + math.exp(-5))
    assert est.relative_error <= 0.01


@pytest.mark.slow
def test_siegel_mean_value_at_positive_degree():
    est = siegel.siegel_average_h0theta(1.0, 100000, seed=0)
    assert est.relative_error <= 0.07
