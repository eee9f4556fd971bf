import math

import pytest

from theta_forge import lattice as lat
from theta_forge import profile
from theta_forge import theta as th
from theta_forge.errors import ViolationDetected
from theta_forge.parallel import generator
from theta_forge.verify import random_lattice

A2 = lat.make_lattice([[1.0, -0.5], [-0.5, 1.0]])


def test_counting_profile_of_z2():
    prof = profile.counting_profile(lat.integers(2), 2.0)
    assert prof.thresholds == pytest.approx((0.0, 1.0, 2.0))
    assert prof.counts == (1, 5, 9)
    assert prof.count(1.5) == 5
    assert prof.rows()[1] == (1.0, 5, math.log(5))


def test_count_and_h0_ar():
    assert profile.count(A2, 1.0) == 7
    assert profile.h0_ar(A2, 1.0) == pytest.approx(math.log(7))
    assert profile.h0_ar_open(A2, 1.0) == 0.0
    assert profile.count(lat.zero_lattice(), 1.0) == 1
    with pytest.raises(ValueError):
        profile.count(A2, 0.0)


def test_lambda1():
    m = profile.lambda1(A2)
    assert m.length == pytest.approx(1.0)
    assert m.multiplicity == 6
    z = profile.lambda1(lat.diagonal([4.0, 9.0]))
    assert z.normsq == pytest.approx(4.0)
    assert z.multiplicity == 2
    tiny = profile.lambda1(lat.make_lattice([[1e-4, 0.0], [0.0, 1e4]]))
    assert tiny.normsq == pytest.approx(1e-4)


def test_transference_constants():
    c2 = profile.transference_constants(2)
    assert c2.t_n == pytest.approx(1.8135, abs=5e-4)
    assert abs(c2.residual) < 1e-12
    assert c2.upper == pytest.approx(1.0468, abs=1e-3)
    c1 = profile.transference_constants(1)
    assert c1.t_n == pytest.approx(2.181, abs=1e-3)
    assert c1.upper == pytest.approx(0.757, abs=1e-3)


def test_covering_radius_exact():
    assert profile.covering_radius_exact(lat.integers(2)) == pytest.approx(math.sqrt(2) / 2)
    assert profile.covering_radius_exact(A2) == pytest.approx(1 / math.sqrt(3))
    assert profile.covering_radius_exact(lat.integers(1)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        profile.covering_radius_exact(lat.integers(3))


def test_covering_radius_sampled_in_rank_three():
    iv = profile.covering_radius_interval(lat.integers(3), samples=2000, seed=1)
    assert not iv.exact
    assert 0.75 <= iv.lower <= math.sqrt(3) / 2 + 1e-12
    assert iv.upper >= math.sqrt(3) / 2


def test_transference_check():
    for l in (lat.integers(1), lat.integers(2), A2):
        rep = profile.transference_check(l, samples=100)
        assert 0.5 - 1e-9 <= rep.product_lower <= rep.bound
    for trial in range(10):
        rep = profile.transference_check(random_lattice(generator(5, trial), 2), samples=20, seed=trial)
        assert rep.exact


def test_comparison_constant():
    assert profile.comparison_constant(2) == pytest.approx(2 * math.log(2))
    for n in range(1, 20):
        c = profile.comparison_constant(n) - math.log(n / 2)
        assert 1.0 <= c <= 1.5 * math.log(3)


def test_comparison_suite():
    for trial in range(10):
        l = random_lattice(generator(13, trial), 1 + trial % 4)
        rep = profile.comparison_suite(l, centers=20, seed=trial)
        assert all(rep.checks.values())
        assert rep.lower <= rep.h0_ar_open + 1e-9
        assert rep.h0_bl >= rep.h0_ar


def test_blichfeldt_count():
    assert profile.blichfeldt_count(lat.integers(2), [0.5, 0.5]) == 4
    assert profile.blichfeldt_count(lat.integers(2), [0.0, 0.0]) == 5


def test_h0_bl_sampled():
    value, center = profile.h0_bl_sampled(lat.integers(2), centers=50, seed=4)
    assert value == pytest.approx(math.log(5))
    assert list(center) == [0.0, 0.0]
    a2 = lat.make_lattice([[0.6, -0.3], [-0.3, 0.6]])
    sampled, _ = profile.h0_bl_sampled(a2, centers=200, seed=1)
    assert sampled >= profile.h0_ar(a2, 1.0)
    assert sampled <= th.h0_theta(a2) + math.pi
    with pytest.raises(ValueError):
        profile.h0_bl_sampled(a2, centers=-1)


def test_banaszczyk_first_minimum_bound():
    assert math.expm1(th.ETA0) <= profile.banaszczyk_first_minimum_bound(lat.integers(1))
    assert profile.banaszczyk_first_minimum_bound(lat.line_bundle(3.0)) is None


def test_superadditivity():
    assert profile.superadditivity_gap(A2, lat.integers(1), 1.0, 1.0) >= 0


def test_laplace_identity():
    for t in (0.5, 1.0, 2.0):
        assert profile.laplace_theta(A2, t) == pytest.approx(th.theta(A2, t).value, rel=1e-9)


def test_a2_counterexample():
    fail = profile.a2_counterexample(2.0)
    assert fail.total >= math.log(5) - 1e-12
    assert fail.sub == pytest.approx(0.0)
    assert fail.quotient <= math.log(3) + 1e-12
    assert fail.fails


def test_violation_carries_witness():
    err = ViolationDetected("boom", {"x": 1})
    assert err.witness == {"x": 1}
