import math

import numpy as np
import pytest

from theta_forge import lattice as lat
from theta_forge.errors import CountCapExceeded, NotPositiveDefinite, NotSaturated, NotSymmetric, RankDeficient
from theta_forge.verify import brute_force_ball, random_lattice
from theta_forge.parallel import generator

A2 = [[1.0, -0.5], [-0.5, 1.0]]


def test_make_lattice_validates():
    z = lat.make_lattice([[1]])
    assert z.rank == 1
    assert lat.covolume(z) == pytest.approx(1.0)
    with pytest.raises(NotSymmetric):
        lat.make_lattice([[1.0, 0.5], [0.5 + 1e-6, 0.9]])
    with pytest.raises(NotPositiveDefinite) as e:
        lat.make_lattice([[1.0, 2.0], [2.0, 1.0]])
    assert e.value.pivot == 1


def test_lattice_is_immutable():
    l = lat.make_lattice(A2)
    with pytest.raises(ValueError):
        l.gram[0, 0] = 2.0


def test_covolume_and_degree():
    a2 = lat.make_lattice(A2)
    assert lat.covolume(a2) == pytest.approx(math.sqrt(3) / 2, abs=1e-12)
    assert lat.degree(a2) == pytest.approx(0.14384103622589042, abs=1e-12)
    assert lat.degree(lat.integers(3)) == pytest.approx(0.0)
    assert lat.degree(lat.rescale(lat.integers(3), 0.7)) == pytest.approx(2.1)
    assert lat.degree(lat.rescale(a2, 1.0)) == pytest.approx(2 - math.log(math.sqrt(3) / 2))


def test_dual():
    a2 = lat.make_lattice(A2)
    d = lat.dual(a2)
    np.testing.assert_allclose(d.gram, (4 / 3) * np.array([[1, 0.5], [0.5, 1]]), atol=1e-12)
    np.testing.assert_allclose(lat.dual(d).gram, a2.gram, atol=1e-10)
    np.testing.assert_allclose(lat.dual(lat.line_bundle(0.3)).gram, [[math.exp(0.6)]])


def test_direct_sum():
    s = lat.direct_sum(lat.make_lattice(A2), lat.integers(1))
    assert s.rank == 3
    assert lat.covolume(s) == pytest.approx(math.sqrt(3) / 2)
    v = lat.direct_sum(lat.line_bundle(0.5), lat.line_bundle(-1.0))
    np.testing.assert_allclose(np.diag(v.gram), [math.exp(-1.0), math.exp(2.0)])


def test_rank_zero():
    z = lat.zero_lattice()
    assert z.rank == 0
    assert lat.covolume(z) == 1.0
    assert lat.degree(z) == 0.0


@pytest.mark.parametrize(
    "gram, r2, expected",
    [
        (np.eye(2), 1.0, 5),
        (A2, 1.0, 7),
        ([[1.0]], 6.25, 5),
    ],
)
def test_enumerate_counts(gram, r2, expected):
    assert len(lat.enumerate(lat.make_lattice(gram), r2)) == expected


def test_enumerate_is_canonical():
    pts = lat.enumerate(lat.integers(2), 1.0)
    assert [p.coords for p in pts] == [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]
    assert all(p.normsq in (0.0, 1.0) for p in pts)


def test_enumerate_matches_box_search():
    for trial in range(20):
        rng = generator(7, trial)
        l = random_lattice(rng, 1 + trial % 4)
        r2 = float(rng.uniform(0.5, 3.0))
        assert {p.coords for p in lat.enumerate(l, r2)} == brute_force_ball(l, r2)


def test_enumerate_cap():
    with pytest.raises(CountCapExceeded) as e:
        lat.enumerate(lat.integers(3), 400.0, cap=1000)
    assert e.value.cap == 1000


def test_closest_vector():
    coords, d2 = lat.closest_vector(lat.integers(2), [0.4, -1.7])
    assert tuple(coords) == (0, -2)
    assert d2 == pytest.approx(0.16 + 0.09)


def test_admissible_sequence_orthogonal():
    seq = lat.admissible_sequence(lat.integers(2), [[1], [0]])
    np.testing.assert_allclose(seq.sub.gram, [[1.0]])
    np.testing.assert_allclose(seq.quotient.gram, [[1.0]])
    assert abs(seq.degree_defect) < 1e-12


def test_admissible_sequence_schur_complement():
    lam = 2.0
    f = lat.make_lattice([[lam, -lam / 2], [-lam / 2, 1.0]])
    seq = lat.admissible_sequence(f, [[1], [0]])
    np.testing.assert_allclose(seq.quotient.gram, [[1 - lam / 4]], atol=1e-12)


def test_admissible_sequence_errors():
    with pytest.raises(NotSaturated):
        lat.admissible_sequence(lat.integers(2), [[2], [0]])
    with pytest.raises(RankDeficient):
        lat.admissible_sequence(lat.integers(2), [[1, 2], [1, 2]])


def test_direct_image_gram():
    s5 = math.sqrt(5)
    emb = [[1.0, (1 + s5) / 2], [1.0, (1 - s5) / 2]]
    l = lat.direct_image_gram(emb)
    np.testing.assert_allclose(l.gram, [[2, 1], [1, 3]], atol=1e-12)
    assert lat.covolume(l) == pytest.approx(s5)
    gauss = lat.direct_image_gram([[1, 1j], [1, -1j]])
    np.testing.assert_allclose(gauss.gram, [[2, 0], [0, 2]], atol=1e-12)
    with pytest.raises(ValueError):
        lat.direct_image_gram([[1, 1j]])


def test_orthogonal_blocks():
    g = np.diag([1.0, 2.0, 3.0])
    g[0, 2] = g[2, 0] = 0.5
    blocks = lat.orthogonal_blocks(g)
    assert sorted(tuple(b) for b in blocks) == [(0, 2), (1,)]


def test_size_reduce_is_unimodular():
    g = np.array([[1.0, 3.2], [3.2, 11.0]])
    reduced, u = lat.size_reduce(g)
    np.testing.assert_allclose(u.T @ g @ u, reduced, atol=1e-9)
    assert abs(round(np.linalg.det(u))) == 1
    assert abs(reduced[0, 1]) <= 0.5 * reduced[0, 0] + 1e-12
