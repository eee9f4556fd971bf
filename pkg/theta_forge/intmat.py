"""Exact integer matrix routines.

Matrices are lists of rows of Python ints so that no step overflows. Only
the small sizes met in lattice work (rank below a few dozen) are targeted.
"""
from math import gcd
from typing import Sequence

IntMatrix = list


def as_int_matrix(a) -> IntMatrix:
    rows = [list(r) for r in a]
    out = []
    for r in rows:
        row = []
        for x in r:
            xi = int(round(float(x))) if not isinstance(x, int) else x
            if float(xi) != float(x):
                raise ValueError(f"Non-integral entry {x!r} in integer matrix")
            row.append(xi)
        out.append(row)
    return out


def identity(n: int) -> IntMatrix:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def transpose(a: IntMatrix, ncols: int = 0) -> IntMatrix:
    if not a:
        return [[] for _ in range(ncols)]
    return [list(col) for col in zip(*a)]


def matmul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    bt = transpose(b)
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def _sub_row(m: IntMatrix, i: int, j: int, q: int):
    if q:
        ri, rj = m[i], m[j]
        for c in range(len(ri)):
            ri[c] -= q * rj[c]


def row_hermite(a: Sequence[Sequence[int]]):
    """Row-style Hermite normal form.

    Returns ``(h, u, pivots)`` with ``u @ a == h``, ``u`` unimodular, ``h`` in
    echelon form with positive pivots and entries above each pivot reduced
    into ``[0, pivot)``. ``pivots`` lists the pivot columns.
    """
    h = [list(r) for r in a]
    m = len(h)
    k = len(h[0]) if m else 0
    u = identity(m)
    row = 0
    pivots = []
    for col in range(k):
        if row >= m:
            break
        while True:
            nz = [i for i in range(row, m) if h[i][col] != 0]
            if not nz:
                break
            p = min(nz, key=lambda i: abs(h[i][col]))
            if p != row:
                h[p], h[row] = h[row], h[p]
                u[p], u[row] = u[row], u[p]
            clean = True
            for i in range(row + 1, m):
                if h[i][col]:
                    q = h[i][col] // h[row][col]
                    _sub_row(h, i, row, q)
                    _sub_row(u, i, row, q)
                    if h[i][col]:
                        clean = False
            if clean:
                break
        if h[row][col] == 0:
            continue
        if h[row][col] < 0:
            h[row] = [-x for x in h[row]]
            u[row] = [-x for x in u[row]]
        piv = h[row][col]
        for i in range(row):
            q = h[i][col] // piv
            _sub_row(h, i, row, q)
            _sub_row(u, i, row, q)
        pivots.append(col)
        row += 1
    return h, u, pivots


def rank(a: Sequence[Sequence[int]]) -> int:
    return len(row_hermite(a)[2])


def elementary_divisors(a: Sequence[Sequence[int]]) -> list:
    """Nonzero elementary divisors (Smith invariants) of ``a``, ascending."""
    h = [list(r) for r in a]
    if not h or not h[0]:
        return []
    while True:
        h, _, _ = row_hermite(h)
        h = transpose(h)
        h, _, _ = row_hermite(h)
        h = transpose(h)
        diagonal = all(
            h[i][j] == 0 for i in range(len(h)) for j in range(len(h[0])) if i != j
        )
        if diagonal:
            break
    d = [abs(h[i][i]) for i in range(min(len(h), len(h[0]))) if h[i][i] != 0]
    # enforce the divisibility chain d_1 | d_2 | ...
    changed = True
    while changed:
        changed = False
        for i in range(len(d)):
            for j in range(i + 1, len(d)):
                g = gcd(d[i], d[j])
                if g != d[i]:
                    d[i], d[j] = g, d[i] * d[j] // g
                    changed = True
    return sorted(d)


def is_saturated(columns: IntMatrix) -> bool:
    """True when the columns of the n x k matrix span a saturated rank-k sublattice."""
    k = len(columns[0]) if columns else 0
    divs = elementary_divisors(columns)
    return len(divs) == k and all(x == 1 for x in divs)


def unimodular_completion(columns: IntMatrix) -> IntMatrix:
    """Extend the columns of a saturated n x k matrix to an n x n unimodular matrix.

    The first k columns are the given ones; the remaining n - k columns are
    the trailing columns of the inverse Hermite transform, so the completion
    is a deterministic function of the input.
    """
    n = len(columns)
    k = len(columns[0]) if n else 0
    h, u, _ = row_hermite(columns)
    v = unimodular_inverse(u)
    extra = [[v[i][j] for j in range(k, n)] for i in range(n)]
    return [list(columns[i]) + extra[i] for i in range(n)]


def unimodular_inverse(u: IntMatrix) -> IntMatrix:
    n = len(u)
    h, w, _ = row_hermite(u)
    if any(h[i][j] != (1 if i == j else 0) for i in range(n) for j in range(n)):
        raise ValueError("Matrix is not unimodular")
    return w


def kernel_basis(q: IntMatrix, ncols: int = 0) -> IntMatrix:
    """Integer basis of ``{x : q x = 0}`` as the columns of an m x s matrix."""
    m = len(q[0]) if q else ncols
    if not q:
        return identity(m)
    qt = transpose(q)
    h, u, pivots = row_hermite(qt)
    r = len(pivots)
    rows = u[r:]
    return transpose(rows, ncols=m) if rows else [[] for _ in range(m)]


def is_surjective(q: IntMatrix) -> bool:
    """True when the r x m integer matrix maps Z^m onto Z^r."""
    r = len(q)
    if r == 0:
        return True
    divs = elementary_divisors(q)
    return len(divs) == r and all(x == 1 for x in divs)


def particular_preimage(q: IntMatrix, y: Sequence[int], ncols: int = 0) -> list:
    """Some integer x with ``q x = y`` for a surjective q."""
    r = len(q)
    m = len(q[0]) if r else ncols
    if r == 0:
        return [0] * m
    # q^T = u^{-1} h  =>  q = h^T (u^{-1})^T ; solve h^T z = y then x = u^T z
    qt = transpose(q)
    h, u, pivots = row_hermite(qt)
    z = [0] * m
    # h^T is lower triangular in its first r columns (pivot structure)
    for idx, col in enumerate(pivots):
        acc = y[col] - sum(h[j][col] * z[j] for j in range(idx))
        piv = h[idx][col]
        if acc % piv:
            raise ValueError("Map is not surjective onto the requested vector")
        z[idx] = acc // piv
    if len(pivots) < r:
        raise ValueError("Map is not surjective")
    ut = transpose(u)
    return [sum(ut[i][j] * z[j] for j in range(m)) for i in range(m)]
