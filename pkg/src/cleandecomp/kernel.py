"""Dense complex matrix kernel.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``;
:func:`as_matrix` is the single gate that validates user input (square,
non-empty, finite).  All numerical slack used anywhere in the package is
collected in :class:`ToleranceProfile`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BlockMismatch,
    DimensionMismatch,
    InvalidTolerance,
    NonFiniteEntries,
    NotHermitian,
)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ToleranceProfile:
    """Numerical thresholds.

    Parameters
    ----------
    rank_cutoff_rel : float or None
        Relative singular value cutoff; a singular value counts towards the
        rank when ``s > rank_cutoff_rel * s_max``.  ``None`` selects the
        dimension-aware default ``dim * 2**-45``.
    projection_tol : float
        Largest accepted residual for ``P @ P == P == P^*`` style checks.
    generic_tol : float
        Band around 0 and 1 in which squared principal cosines are treated
        as exact 0 or 1 (that is, folded into the meets).
    tie_tol : float
        Eigenvalues within this distance of a spectral threshold are put on
        the ``<=`` side.
    """

    rank_cutoff_rel: float | None = None
    projection_tol: float = 1e-9
    generic_tol: float = 1e-8
    tie_tol: float = 1e-10

    def __post_init__(self):
        for name in ("projection_tol", "generic_tol", "tie_tol"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise InvalidTolerance(f"{name} must lie in (0, 1), got {value!r}")
        if self.rank_cutoff_rel is not None:
            if not (EPS <= self.rank_cutoff_rel < 1.0):
                raise InvalidTolerance(
                    f"rank_cutoff_rel must lie in [eps, 1), got {self.rank_cutoff_rel!r}"
                )

    def rank_cutoff(self, dim: int) -> float:
        if self.rank_cutoff_rel is not None:
            return self.rank_cutoff_rel
        return min(max(dim, 1) * 2.0**-45, 0.5)

    def to_dict(self) -> dict:
        return {
            "rank_cutoff_rel": self.rank_cutoff_rel,
            "projection_tol": self.projection_tol,
            "generic_tol": self.generic_tol,
            "tie_tol": self.tie_tol,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ToleranceProfile":
        known = {"rank_cutoff_rel", "projection_tol", "generic_tol", "tie_tol"}
        unknown = set(data) - known
        if unknown:
            raise InvalidTolerance(f"unknown tolerance fields: {sorted(unknown)}")
        return cls(**data)


DEFAULT_TOL = ToleranceProfile()


def _tol(tol: ToleranceProfile | None) -> ToleranceProfile:
    return DEFAULT_TOL if tol is None else tol


def as_matrix(M) -> np.ndarray:
    """Validate ``M`` as an element of M_n and return a complex128 copy."""
    A = np.array(M, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        raise DimensionMismatch("empty matrix")
    if not np.all(np.isfinite(A)):
        raise NonFiniteEntries("matrix has NaN or infinite entries")
    return A


def dag(M: np.ndarray) -> np.ndarray:
    return M.conj().T


def fix_phases(V: np.ndarray) -> np.ndarray:
    """Rotate each column so that its first non-negligible entry is real positive."""
    V = np.array(V, dtype=np.complex128)
    if V.size == 0:
        return V
    mags = np.abs(V)
    thresh = 1e-8 * mags.max(axis=0, keepdims=True)
    for j in range(V.shape[1]):
        idx = np.flatnonzero(mags[:, j] > thresh[0, j])
        if idx.size:
            z = V[idx[0], j]
            V[:, j] *= np.conj(z) / abs(z)
    return V


def hermitian_eig(M, tol: ToleranceProfile | None = None):
    """Eigendecomposition of a Hermitian matrix.

    Returns ascending real eigenvalues and a unitary matrix whose columns are
    the matching eigenvectors, phase normalised.
    """
    tol = _tol(tol)
    M = as_matrix(M)
    scale = operator_norm(M)
    asym = operator_norm(M - dag(M))
    if asym > tol.projection_tol * max(scale, 1.0):
        raise NotHermitian(f"symmetry residual {asym:.3e} exceeds tolerance")
    w, V = np.linalg.eigh(0.5 * (M + dag(M)))
    return w, fix_phases(V)


def svd(M):
    """Full SVD ``M = U @ diag(s) @ V^*``; returns ``(U, s, V)`` with ``s`` descending."""
    M = as_matrix(M)
    U, s, Vh = np.linalg.svd(M)
    return U, s, dag(Vh)


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(np.asarray(M, dtype=np.complex128), compute_uv=False)


def operator_norm(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(singular_values(M)[0])


def smallest_singular_value(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    # for rectangular compressions this is the smallest of min(m, n) values
    return float(singular_values(M)[-1])


def numerical_rank(s: np.ndarray, dim: int, tol: ToleranceProfile | None = None) -> int:
    """Count singular values above the relative cutoff."""
    tol = _tol(tol)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol.rank_cutoff(dim) * s[0]))


def rank(M, tol: ToleranceProfile | None = None) -> int:
    M = as_matrix(M)
    return numerical_rank(singular_values(M), M.shape[0], tol)


def range_basis(M, tol: ToleranceProfile | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the column space of ``M``.

    ``M`` may be rectangular (``n x k``); the cutoff is relative to its
    largest singular value and scaled by the ambient dimension ``n``.
    """
    M = np.asarray(M, dtype=np.complex128)
    n = M.shape[0]
    if M.size == 0:
        return np.zeros((n, 0), dtype=np.complex128)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = numerical_rank(s, n, tol)
    return fix_phases(U[:, :r])


def polar(M, tol: ToleranceProfile | None = None):
    """Polar decomposition ``M = W @ |M|`` with ``W`` a partial isometry.

    ``W^* W`` is the right projection and ``W W^*`` the left projection of
    ``M`` (the rank is decided by the tolerance profile), so ``W`` is
    unitary exactly when ``M`` is invertible.
    """
    M = as_matrix(M)
    n = M.shape[0]
    U, s, V = svd(M)
    r = numerical_rank(s, n, tol)
    W = U[:, :r] @ dag(V[:, :r])
    absM = (V * s) @ dag(V)
    return W, 0.5 * (absM + dag(absM))


def abs_value(M) -> np.ndarray:
    """``|M| = (M^* M)^{1/2}`` computed from the SVD (accurate for small singular values)."""
    M = as_matrix(M)
    _, s, V = svd(M)
    A = (V * s) @ dag(V)
    return 0.5 * (A + dag(A))


def corner_inverse(T, tol: ToleranceProfile | None = None) -> np.ndarray:
    """The inverse of ``T`` inside the corner ``R(T) M_n L(T)``.

    The result ``S`` satisfies ``S T = R(T)``, ``T S = L(T)`` and
    ``S = R(T) S L(T)``.  It is the Moore-Penrose inverse with the rank
    decided by ``tol``; the truncated SVD replaces inverting ``T^*T`` on
    ``R(T)`` for conditioning reasons.
    """
    T = as_matrix(T)
    U, s, V = svd(T)
    r = numerical_rank(s, T.shape[0], tol)
    return (V[:, :r] / s[:r]) @ dag(U[:, :r])


def is_hermitian(M, tol: ToleranceProfile | None = None) -> bool:
    tol = _tol(tol)
    return operator_norm(M - dag(M)) <= tol.projection_tol * max(operator_norm(M), 1.0)


@dataclass(frozen=True)
class BlockOperator:
    """An element of the direct sum of matrix algebras ``M_{n_1} + ... + M_{n_k}``."""

    blocks: tuple = field()

    def __init__(self, blocks: Sequence):
        if len(blocks) == 0:
            raise BlockMismatch("a block operator needs at least one block")
        object.__setattr__(self, "blocks", tuple(as_matrix(b) for b in blocks))

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.blocks)

    @property
    def dim(self) -> int:
        return sum(self.block_dims)

    def dense(self) -> np.ndarray:
        n = self.dim
        out = np.zeros((n, n), dtype=np.complex128)
        k = 0
        for b in self.blocks:
            m = b.shape[0]
            out[k : k + m, k : k + m] = b
            k += m
        return out

    @classmethod
    def from_dense(cls, M, block_dims: Sequence[int]) -> "BlockOperator":
        M = as_matrix(M)
        if sum(block_dims) != M.shape[0] or any(d <= 0 for d in block_dims):
            raise BlockMismatch(f"block dims {list(block_dims)} do not tile dimension {M.shape[0]}")
        blocks, k = [], 0
        for d in block_dims:
            blocks.append(M[k : k + d, k : k + d])
            k += d
        return cls(blocks)

    def central_projection(self, i: int) -> np.ndarray:
        """Dense indicator of the ``i``-th summand."""
        dims = self.block_dims
        start = sum(dims[:i])
        Z = np.zeros((self.dim, self.dim), dtype=np.complex128)
        Z[start : start + dims[i], start : start + dims[i]] = np.eye(dims[i])
        return Z


def lift_blockwise(op: Callable, *operands: BlockOperator, **kwargs):
    """Apply ``op`` summand by summand.

    All operands must share ``block_dims``.  When every per-block result is
    an ndarray the results are reassembled into a :class:`BlockOperator`;
    otherwise the list of per-block results is returned and aggregation is
    left to the caller.
    """
    if not operands:
        raise BlockMismatch("no operands")
    dims = operands[0].block_dims
    for X in operands[1:]:
        if X.block_dims != dims:
            raise BlockMismatch(f"block dims differ: {list(dims)} vs {list(X.block_dims)}")
    results = [op(*parts, **kwargs) for parts in zip(*(X.blocks for X in operands))]
    if all(isinstance(r, np.ndarray) for r in results):
        return BlockOperator(results)
    return results
