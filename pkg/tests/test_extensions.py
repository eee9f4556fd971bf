import math

import numpy as np
import pytest

from theta_forge import extensions
from theta_forge import lattice as lat
from theta_forge import theta as th
from theta_forge.errors import GridTooCoarse
from theta_forge.parallel import generator
from theta_forge.verify import random_sequence

Z = lat.integers(1)


def test_defect_of_orthogonal_split_vanishes():
    seq = lat.admissible_sequence(lat.integers(3), [[1, 0], [0, 1], [0, 0]])
    rep = extensions.h_theta_defect(seq)
    assert abs(rep.defect) <= 2e-9
    assert rep.split


def test_defect_is_nonnegative():
    for trial in range(20):
        rng = generator(17, trial)
        n = 2 + trial % 4
        seq = random_sequence(rng, n, 1 + trial % min(3, n - 1))
        assert extensions.h_theta_defect(seq).defect >= -2e-9


def test_alternating_chain():
    for trial in range(10):
        rng = generator(19, trial)
        seq = random_sequence(rng, 3, 1 + trial % 2)
        rep = extensions.alternating_chain(seq)
        assert all(rep.checks.values())


def test_gext_is_maximal_at_zero_and_periodic():
    g = lat.make_lattice([[0.7]])
    top = extensions.gext(Z, g, [[0.0]]).value
    for t in np.linspace(-1, 1, 9):
        assert extensions.gext(Z, g, [[t]]).value <= top * (1 + 1e-12)
        assert abs(extensions.periodicity_residual(Z, g, [[t]], [[2]])) <= 1e-9
    with pytest.raises(ValueError):
        extensions.periodicity_residual(Z, g, [[0.1]], [[0.5]])


def test_gext_at_zero_is_direct_sum():
    e = lat.make_lattice([[1.0, -0.5], [-0.5, 1.0]])
    value = extensions.gext(e, Z, np.zeros((2, 1))).log_value
    assert value == pytest.approx(th.h0_theta(e) + th.ETA0, abs=1e-9)


def test_gext_dual_matches_direct_sum():
    e = lat.line_bundle(0.3)
    g = lat.make_lattice([[1.5]])
    for t in (0.0, 0.2, 0.45):
        direct = extensions.gext(e, g, [[t]]).value
        assert extensions.gext_dual(e, g, [[t]]) == pytest.approx(direct, rel=1e-8)


def test_torus_average_of_integers():
    avg = extensions.gext_average(Z, Z, grid=256, threads=1)
    assert avg.target == pytest.approx(1 - (1 - math.exp(-th.ETA0)) ** 2, abs=1e-12)
    assert avg.target == pytest.approx(0.993670, abs=1e-6)
    assert avg.error <= 1e-6
    assert avg.points == 256


@pytest.mark.parametrize("sub, quotient", [(0.5, 2.0), (-3.0, -3.0)])
def test_torus_average_of_line_bundles(sub, quotient):
    avg = extensions.gext_average(lat.line_bundle(sub), lat.line_bundle(quotient), grid=256, threads=2)
    assert avg.error <= 1e-6


def test_torus_average_is_thread_independent():
    e, g = lat.line_bundle(0.2), lat.line_bundle(-0.4)
    one = extensions.gext_average(e, g, grid=32, threads=1)
    many = extensions.gext_average(e, g, grid=32, threads=4)
    assert one.average == many.average


def test_torus_average_guards():
    with pytest.raises(GridTooCoarse):
        extensions.gext_average(Z, Z, grid=4)
    with pytest.raises(GridTooCoarse):
        extensions.gext_average(lat.integers(2), lat.integers(2), grid=16)
