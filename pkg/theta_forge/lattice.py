"""Euclidean lattices as Gram data.

A lattice of rank n is the free module Z^n with the norm ||x||^2 = x^T G x
for a symmetric positive definite Gram matrix G. All objects are immutable
once built.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph

from . import intmat
from ._kernels import BOUNDARY_RTOL, enumerate_coords
from .errors import (
    InconsistentBounds,
    NotPositiveDefinite,
    NotSaturated,
    NotSymmetric,
    RankDeficient,
)

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12


def default_cap() -> int:
    return int(os.environ.get("THETA_FORGE_MAX_POINTS", 10**8))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EuclideanLattice:
    gram: np.ndarray
    label: Optional[str] = None
    basis: Optional[np.ndarray] = None
    chol: np.ndarray = field(default=None, repr=False)

    @property
    def rank(self) -> int:
        return self.gram.shape[0]

    def norm2(self, coords) -> float:
        x = np.asarray(coords, dtype=float)
        return float(x @ self.gram @ x)

    def __repr__(self):
        name = f" {self.label!r}" if self.label else ""
        return f"<EuclideanLattice{name} rank={self.rank}>"


@dataclass(frozen=True)
class LatticeVector:
    coords: tuple
    normsq: float


def _cholesky_upper(gram: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(gram, lower=False)
    except np.linalg.LinAlgError:
        pass
    # locate the first failing pivot through the leading minors
    for k in range(1, gram.shape[0] + 1):
        try:
            scipy.linalg.cholesky(gram[:k, :k], lower=False)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(k - 1)
    raise NotPositiveDefinite(gram.shape[0] - 1)


def make_lattice(gram, label: Optional[str] = None, basis=None) -> EuclideanLattice:
    g = np.array(gram, dtype=float)
    if g.size == 0:
        g = np.zeros((0, 0))
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"Gram matrix must be square, got shape {g.shape}")
    if g.shape[0]:
        scale = float(np.max(np.abs(g)))
        deviation = float(np.max(np.abs(g - g.T))) / scale if scale else 0.0
        if deviation > SYMMETRY_RTOL:
            raise NotSymmetric(deviation)
        g = (g + g.T) / 2
        if not np.all(np.isfinite(g)):
            raise NotPositiveDefinite(0)
    r = _cholesky_upper(g) if g.shape[0] else np.zeros((0, 0))
    if g.shape[0] and np.any(np.diag(r) <= 0):
        raise NotPositiveDefinite(int(np.argmax(np.diag(r) <= 0)))
    b = None if basis is None else _frozen(np.array(basis, dtype=float))
    return EuclideanLattice(gram=_frozen(g), label=label, basis=b, chol=_frozen(r))


def from_basis(basis, label: Optional[str] = None) -> EuclideanLattice:
    """Lattice spanned by the columns of ``basis`` in a euclidean space."""
    b = np.array(basis, dtype=float)
    if b.ndim != 2:
        raise ValueError("Basis must be a matrix whose columns are the basis vectors")
    if np.linalg.matrix_rank(b) < b.shape[1]:
        raise RankDeficient(f"Basis columns are dependent (rank {np.linalg.matrix_rank(b)} < {b.shape[1]})")
    return make_lattice(b.T @ b, label=label, basis=b)


def zero_lattice(label: Optional[str] = None) -> EuclideanLattice:
    return make_lattice(np.zeros((0, 0)), label=label)


def integers(n: int = 1) -> EuclideanLattice:
    return make_lattice(np.eye(n), label=f"Z^{n}" if n != 1 else "Z")


def line_bundle(delta: float) -> EuclideanLattice:
    """The rank-one lattice O(delta): Z with ||1||^2 = e^{-2 delta}."""
    return make_lattice([[math.exp(-2.0 * delta)]], label=f"O({delta:g})")


def diagonal(lambdas: Sequence[float], label: Optional[str] = None) -> EuclideanLattice:
    """V_lambda: Z^n with ||x||^2 = sum lambda_i x_i^2."""
    return make_lattice(np.diag(np.asarray(lambdas, dtype=float)), label=label)


def covolume(lattice: EuclideanLattice) -> float:
    if lattice.rank == 0:
        return 1.0
    return float(np.prod(np.diag(lattice.chol)))


def degree(lattice: EuclideanLattice) -> float:
    if lattice.rank == 0:
        return 0.0
    return -float(np.sum(np.log(np.diag(lattice.chol))))


def dual(lattice: EuclideanLattice) -> EuclideanLattice:
    if lattice.rank == 0:
        return lattice
    inv = scipy.linalg.cho_solve((lattice.chol, False), np.eye(lattice.rank))
    label = f"{lattice.label}^dual" if lattice.label else None
    return make_lattice((inv + inv.T) / 2, label=label)


def rescale(lattice: EuclideanLattice, delta: float) -> EuclideanLattice:
    """E (x) O(delta): the norm is multiplied by e^{-delta}."""
    if delta == 0:
        return lattice
    return make_lattice(lattice.gram * math.exp(-2.0 * delta), label=lattice.label)


def direct_sum(first: EuclideanLattice, second: EuclideanLattice) -> EuclideanLattice:
    g = scipy.linalg.block_diag(first.gram, second.gram) if first.rank + second.rank else np.zeros((0, 0))
    label = None
    if first.label and second.label:
        label = f"{first.label}+{second.label}"
    return make_lattice(g, label=label)


def sublattice(lattice: EuclideanLattice, columns) -> EuclideanLattice:
    """Induced metric on the sublattice spanned by the integer columns."""
    c = np.array(columns, dtype=float).reshape(lattice.rank, -1)
    return make_lattice(c.T @ lattice.gram @ c)


def quotient_gram(gram: np.ndarray, qmap) -> np.ndarray:
    """Quotient metric through a surjective integer map q: ||y|| = min ||x||, q x = y."""
    q = np.array(qmap, dtype=float).reshape(-1, gram.shape[0])
    if q.shape[0] == 0:
        return np.zeros((0, 0))
    m = q @ scipy.linalg.solve(gram, q.T, assume_a="pos")
    inv = np.linalg.inv(m)
    return (inv + inv.T) / 2


def orthogonal_blocks(gram) -> list:
    """Index groups of the finest orthogonal splitting visible in the Gram matrix."""
    g = np.asarray(gram)
    if g.shape[0] == 0:
        return []
    count, labels = scipy.sparse.csgraph.connected_components(scipy.sparse.csr_matrix(g != 0), directed=False)
    return [np.flatnonzero(labels == c) for c in range(count)]


def size_reduce(gram) -> tuple:
    """One Gram-Schmidt size-reduction pass; returns the new Gram and the unimodular transform.

    Conditioning only: |mu_ij| <= 1/2 afterwards, no swaps.
    """
    g = np.array(gram, dtype=float)
    n = g.shape[0]
    u = np.eye(n, dtype=np.int64)
    for i in range(1, n):
        for j in range(i - 1, -1, -1):
            r = scipy.linalg.cholesky(g, lower=False)
            mu = r[j, i] / r[j, j]
            k = int(round(mu))
            if k:
                u[:, i] -= k * u[:, j]
                t = np.eye(n)
                t[j, i] = -k
                g = t.T @ g @ t
    return (g + g.T) / 2, u


def ball_points(lattice: EuclideanLattice, r2: float, cap: Optional[int] = None):
    """Coordinates and squared norms of the points with ||v||^2 <= r2, unordered."""
    if r2 <= 0:
        raise ValueError("r2 must be positive")
    coords, _ = enumerate_coords(lattice.chol, r2, cap=cap or default_cap())
    norms = np.einsum("ij,jk,ik->i", coords.astype(float), lattice.gram, coords.astype(float))
    keep = norms <= r2 * (1.0 + BOUNDARY_RTOL)
    return coords[keep], norms[keep]


def enumerate(lattice: EuclideanLattice, r2: float, cap: Optional[int] = None) -> list:
    """All lattice vectors with ||v||^2 <= r2, lexicographic on coordinates."""
    coords, norms = ball_points(lattice, r2, cap)
    if coords.shape[1]:
        order = np.lexsort(coords.T[::-1])
        coords, norms = coords[order], norms[order]
    logger.debug("enumerate %r r2=%g: %d points", lattice, r2, len(norms))
    return [LatticeVector(tuple(int(v) for v in c), float(s)) for c, s in zip(coords, norms)]


def closest_vector(lattice: EuclideanLattice, target, cap: Optional[int] = None) -> tuple:
    """Exact closest lattice point to ``target`` (given in basis coordinates).

    Starts from the rounded target, whose distance bounds the search radius,
    and returns ``(coords, dist2)``.
    """
    t = np.asarray(target, dtype=float)
    if lattice.rank == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    guess = np.round(t)
    d = guess - t
    r2 = float(d @ lattice.gram @ d)
    if r2 <= 0:
        return guess.astype(np.int64), 0.0
    coords, _ = enumerate_coords(lattice.chol, r2, center=t, cap=cap or default_cap())
    if coords.shape[0] == 0:
        return guess.astype(np.int64), r2
    diff = coords - t
    dist = np.einsum("ij,jk,ik->i", diff, lattice.gram, diff)
    best = int(np.argmin(dist))
    return coords[best], float(dist[best])


@dataclass(frozen=True, eq=False)
class AdmissibleSequence:
    total: EuclideanLattice
    sub_basis: tuple
    sub: EuclideanLattice
    quotient: EuclideanLattice
    quotient_map: tuple

    @property
    def degree_defect(self) -> float:
        return degree(self.total) - degree(self.sub) - degree(self.quotient)


def admissible_sequence(total: EuclideanLattice, sub_basis) -> AdmissibleSequence:
    """0 -> E -> F -> F/E -> 0 for the sublattice E spanned by the columns of ``sub_basis``."""
    n = total.rank
    s = intmat.as_int_matrix(np.array(sub_basis).reshape(n, -1).tolist()) if n else []
    k = len(s[0]) if s else 0
    if k and intmat.rank(s) < k:
        raise RankDeficient(f"Sub-basis has rank {intmat.rank(s)} < {k}")
    if k and not intmat.is_saturated(s):
        raise NotSaturated(intmat.elementary_divisors(s))
    c = intmat.unimodular_completion(s) if k else intmat.identity(n)
    cinv = intmat.unimodular_inverse(c)
    p = cinv[k:]
    # canonical quotient coordinates: Hermite form of the projection
    pc, w, _ = intmat.row_hermite(p)
    cf = np.array(c, dtype=float).reshape(n, n)
    gc = cf.T @ total.gram @ cf
    a, b, d = gc[:k, :k], gc[:k, k:], gc[k:, k:]
    schur = d - b.T @ scipy.linalg.solve(a, b, assume_a="pos") if k else d
    if n - k:
        winv = np.linalg.inv(np.array(w, dtype=float))
        schur = winv.T @ schur @ winv
    sub = make_lattice(gc[:k, :k] if k else np.zeros((0, 0)))
    quotient = make_lattice((schur + schur.T) / 2 if n - k else np.zeros((0, 0)))
    seq = AdmissibleSequence(
        total=total,
        sub_basis=tuple(tuple(r) for r in s),
        sub=sub,
        quotient=quotient,
        quotient_map=tuple(tuple(r) for r in pc),
    )
    if abs(seq.degree_defect) > 1e-9 * max(1.0, abs(degree(total))):
        raise InconsistentBounds(f"Degree additivity fails by {seq.degree_defect:.3e}")
    return seq


def direct_image_gram(embeddings, tol: float = 1e-9, label: Optional[str] = None) -> EuclideanLattice:
    """Direct image of a number-field lattice to Z.

    ``embeddings[s][j]`` is the image of the j-th integral basis element
    under the s-th complex embedding; all embeddings must be listed, so the
    rows are stable under complex conjugation.
    """
    x = np.array(embeddings, dtype=complex)
    if x.ndim != 2:
        raise ValueError("Embedding matrix must be two-dimensional")
    for row in x:
        if not np.any(np.all(np.abs(x - np.conj(row)) <= tol * max(1.0, np.max(np.abs(x))), axis=1)):
            raise ValueError("Embedding rows are not closed under complex conjugation")
    g = np.real(x.T @ np.conj(x))
    return make_lattice((g + g.T) / 2, label=label)
