import pytest

from theta_forge import intmat


def test_hermite_transform_is_consistent():
    a = [[4, 6, 2], [2, 3, 7], [1, 0, 5]]
    h, u, pivots = intmat.row_hermite(a)
    assert intmat.matmul(u, a) == h
    assert pivots == [0, 1, 2]
    assert all(h[i][i] > 0 for i in range(3))
    assert all(h[i][j] == 0 for i in range(3) for j in range(i))


def test_elementary_divisors():
    assert intmat.elementary_divisors([[2, 0], [0, 3]]) == [1, 6]
    assert intmat.elementary_divisors([[2], [0]]) == [2]
    assert intmat.elementary_divisors([[1, 1], [1, -1]]) == [1, 2]


def test_saturation():
    assert intmat.is_saturated([[1], [0]])
    assert intmat.is_saturated([[2], [3]])
    assert not intmat.is_saturated([[2], [0]])
    assert not intmat.is_saturated([[2], [4]])


def test_unimodular_completion_keeps_columns():
    cols = [[2, 1], [3, 1], [0, 1]]
    c = intmat.unimodular_completion(cols)
    assert [row[:2] for row in c] == cols
    inv = intmat.unimodular_inverse(c)
    assert intmat.matmul(inv, c) == intmat.identity(3)


def test_unimodular_inverse_rejects_singular():
    with pytest.raises(ValueError):
        intmat.unimodular_inverse([[2, 0], [0, 1]])


def test_kernel_basis():
    q = [[1, 1, 0], [0, 1, 1]]
    k = intmat.kernel_basis(q)
    assert len(k) == 3 and len(k[0]) == 1
    assert intmat.matmul(q, k) == [[0], [0]]
    assert intmat.is_saturated(k)


def test_kernel_of_empty_map_is_everything():
    assert intmat.kernel_basis([], ncols=2) == [[1, 0], [0, 1]]


def test_preimage():
    q = [[2, 3]]
    assert intmat.is_surjective(q)
    x = intmat.particular_preimage(q, [5])
    assert 2 * x[0] + 3 * x[1] == 5
    with pytest.raises(ValueError):
        intmat.particular_preimage([[2, 4]], [1])


def test_as_int_matrix_rejects_fractions():
    assert intmat.as_int_matrix([[1.0, 2]]) == [[1, 2]]
    with pytest.raises(ValueError):
        intmat.as_int_matrix([[0.5]])
