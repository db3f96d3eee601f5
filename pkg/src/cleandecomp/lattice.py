"""Projection lattice of M_n.

A :class:`Projection` carries an orthonormal basis of its range alongside
the matrix, which makes compressions ``E X E`` cheap and well conditioned:
most routines here work in the coordinates of that basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CornerNotBoundedBelow,
    DimensionMismatch,
    InternalInvariantViolation,
    NotAPartialIsometry,
    NotAProjection,
)
from .kernel import (
    ToleranceProfile,
    _tol,
    as_matrix,
    dag,
    fix_phases,
    hermitian_eig,
    numerical_rank,
    operator_norm,
    range_basis,
    singular_values,
)


@dataclass(frozen=True, eq=False)
class Projection:
    """Orthogonal projection ``P = B B^*`` with ``B`` an orthonormal basis of its range."""

    matrix: np.ndarray
    rank: int
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_basis(cls, B, tol: ToleranceProfile | None = None, check: bool = True) -> "Projection":
        B = np.asarray(B, dtype=np.complex128)
        P = B @ dag(B)
        proj = cls(0.5 * (P + dag(P)), B.shape[1], B)
        if check:
            proj.validate(tol)
        return proj

    @classmethod
    def from_matrix(cls, M, tol: ToleranceProfile | None = None) -> "Projection":
        """Wrap an explicit matrix, checking the projection invariants."""
        tol = _tol(tol)
        M = as_matrix(M)
        idem = operator_norm(M @ M - M)
        herm = operator_norm(M - dag(M))
        if idem > tol.projection_tol or herm > tol.projection_tol:
            raise NotAProjection(
                f"not a projection: |P^2-P| = {idem:.3e}, |P-P*| = {herm:.3e}"
            )
        w, V = np.linalg.eigh(0.5 * (M + dag(M)))
        B = fix_phases(V[:, w > 0.5])
        proj = cls(M, B.shape[1], B)
        proj.validate(tol)
        return proj

    @classmethod
    def zero(cls, n: int) -> "Projection":
        return cls(np.zeros((n, n), dtype=np.complex128), 0, np.zeros((n, 0), dtype=np.complex128))

    @classmethod
    def identity(cls, n: int) -> "Projection":
        I = np.eye(n, dtype=np.complex128)
        return cls(I, n, I.copy())

    def validate(self, tol: ToleranceProfile | None = None) -> None:
        tol = _tol(tol)
        P = self.matrix
        n = P.shape[0]
        idem = operator_norm(P @ P - P)
        herm = operator_norm(P - dag(P))
        tr = float(np.trace(P).real)
        if idem > tol.projection_tol or herm > tol.projection_tol:
            raise NotAProjection(
                f"projection invariants fail: |P^2-P| = {idem:.3e}, |P-P*| = {herm:.3e} "
                f"(projection_tol = {tol.projection_tol:.1e})"
            )
        if abs(tr - self.rank) > n * tol.projection_tol or round(tr) != self.rank:
            raise NotAProjection(f"trace {tr:.12g} does not match rank {self.rank}")

    def perp(self) -> "Projection":
        n = self.dim
        return Projection(
            np.eye(n) - self.matrix, n - self.rank, complement_basis(self.basis, n)
        )

    def compress(self, X) -> np.ndarray:
        """``B^* X B``: the corner ``P X P`` in basis coordinates."""
        return dag(self.basis) @ X @ self.basis

    def __repr__(self) -> str:
        return f"Projection(dim={self.dim}, rank={self.rank})"


def complement_basis(B: np.ndarray, n: int) -> np.ndarray:
    r = B.shape[1]
    if r == 0:
        return np.eye(n, dtype=np.complex128)
    if r == n:
        return np.zeros((n, 0), dtype=np.complex128)
    U, _, _ = np.linalg.svd(B, full_matrices=True)
    return fix_phases(U[:, r:])


@dataclass(frozen=True, eq=False)
class PartialIsometry:
    """``V`` with ``V^* V = initial`` and ``V V^* = final``."""

    matrix: np.ndarray
    initial: Projection
    final: Projection

    def validate(self, tol: ToleranceProfile | None = None) -> None:
        tol = _tol(tol)
        V = self.matrix
        r1 = operator_norm(dag(V) @ V - self.initial.matrix)
        r2 = operator_norm(V @ dag(V) - self.final.matrix)
        if r1 > tol.projection_tol or r2 > tol.projection_tol:
            raise NotAPartialIsometry(
                f"|V*V - initial| = {r1:.3e}, |VV* - final| = {r2:.3e}"
            )


def _check_pair(E: Projection, F: Projection) -> None:
    if E.dim != F.dim:
        raise DimensionMismatch(f"projections of different dimension: {E.dim} vs {F.dim}")


def left_projection(T, tol: ToleranceProfile | None = None) -> Projection:
    """Projection onto the column space of ``T`` (``T`` may be ``n x k``)."""
    return Projection.from_basis(range_basis(T, tol), tol)


def right_projection(T, tol: ToleranceProfile | None = None) -> Projection:
    return left_projection(dag(np.asarray(T, dtype=np.complex128)), tol)


def _eig_split(M: np.ndarray, threshold: float):
    w, V = np.linalg.eigh(0.5 * (M + dag(M)))
    return fix_phases(V[:, w <= threshold]), fix_phases(V[:, w > threshold])


def meet(E: Projection, F: Projection, tol: ToleranceProfile | None = None) -> Projection:
    """``E ^ F``: the projection onto ``ran E`` intersected with ``ran F``.

    Computed as the null space of ``E^perp + F^perp``.  Its eigenvalue on a
    unit vector at principal angle ``t`` from both ranges is about
    ``1 - cos t``; the cutoff ``generic_tol / 2`` matches the classification
    used by the two-projection decomposition.
    """
    tol = _tol(tol)
    _check_pair(E, F)
    n = E.dim
    null, _ = _eig_split(2 * np.eye(n) - E.matrix - F.matrix, 0.5 * tol.generic_tol)
    return Projection.from_basis(null, tol)


def join(E: Projection, F: Projection, tol: ToleranceProfile | None = None) -> Projection:
    """``E v F``: the projection onto ``ran E + ran F`` (range of ``E + F``)."""
    tol = _tol(tol)
    _check_pair(E, F)
    _, rng = _eig_split(E.matrix + F.matrix, 0.5 * tol.generic_tol)
    return Projection.from_basis(rng, tol)


def leq(E: Projection, F: Projection, tol: ToleranceProfile | None = None) -> bool:
    """Order of the lattice: ``E <= F`` iff ``F E = E``."""
    tol = _tol(tol)
    return operator_norm(F.matrix @ E.matrix - E.matrix) <= tol.projection_tol


def spectral_projection_leq(T, c: float, tol: ToleranceProfile | None = None) -> Projection:
    """Spectral projection of the Hermitian ``T`` for ``(-inf, c]``.

    Eigenvalues within ``tie_tol`` of ``c`` are counted on the ``<=`` side.
    """
    tol = _tol(tol)
    w, V = hermitian_eig(T, tol)
    return Projection.from_basis(V[:, w <= c + tol.tie_tol], tol)


def compressed_lower_bound(T, E: Projection) -> float:
    """Largest ``a`` with ``E T^* T E >= a^2 E``: smallest singular value of ``T`` on ``ran E``."""
    if E.rank == 0:
        return float("inf")
    return float(singular_values(np.asarray(T) @ E.basis)[-1])


def equivalent(
    E: Projection,
    F: Projection,
    tol: ToleranceProfile | None = None,
    block_dims: Optional[Sequence[int]] = None,
) -> Optional[PartialIsometry]:
    """Murray-von Neumann equivalence witness ``V`` (``V^*V = E``, ``VV^* = F``).

    In M_n this exists iff the ranks agree.  With ``block_dims`` the
    projections are taken to live in the block-diagonal algebra and ranks
    are compared summand by summand; equivalence never crosses summands.
    The witness pairs the stored orthonormal range bases column by column.
    """
    _check_pair(E, F)
    if block_dims is None:
        if E.rank != F.rank:
            return None
        V = F.basis @ dag(E.basis)
        return PartialIsometry(V, E, F)

    if sum(block_dims) != E.dim:
        raise DimensionMismatch(f"block dims {list(block_dims)} do not tile {E.dim}")
    n = E.dim
    V = np.zeros((n, n), dtype=np.complex128)
    k = 0
    for d in block_dims:
        sl = slice(k, k + d)
        Eb = Projection.from_matrix(E.matrix[sl, sl], tol)
        Fb = Projection.from_matrix(F.matrix[sl, sl], tol)
        if Eb.rank != Fb.rank:
            return None
        V[sl, sl] = Fb.basis @ dag(Eb.basis)
        k += d
    return PartialIsometry(V, E, F)


def kaplansky_isometry(E: Projection, F: Projection, tol: ToleranceProfile | None = None) -> PartialIsometry:
    """Witness of ``(E v F) - F ~ E - (E ^ F)``: the polar part of ``E F^perp``.

    ``R(E F^perp) = (E v F) - F`` and ``L(E F^perp) = E - (E ^ F)``, so the
    partial isometry of the polar decomposition has exactly these as its
    initial and final projections.
    """
    _check_pair(E, F)
    X = E.matrix @ (np.eye(E.dim) - F.matrix)
    U, s, _ = np.linalg.svd(X)
    # singular values of E F^perp are sines of principal angles; use the
    # same cut as meet/join (1 - cos <= generic_tol/2) so ranks agree
    g = _tol(tol).generic_tol
    r = int(np.count_nonzero(s > np.sqrt(1.0 - (1.0 - g / 2) ** 2)))
    Ur = fix_phases(U[:, :r])
    # re-derive the right vectors from the phase-fixed left ones: X^* u = s v
    Vr = (dag(X) @ Ur) / s[:r] if r else np.zeros((E.dim, 0), dtype=np.complex128)
    W = Ur @ dag(Vr)
    return PartialIsometry(W, Projection.from_basis(Vr, tol), Projection.from_basis(Ur, tol))


def isometry_factor(T, E: Projection, a: float, tol: ToleranceProfile | None = None) -> np.ndarray:
    """Positive ``S`` in ``E M_n E`` with ``T S`` a partial isometry from ``E`` onto ``L(TE)``.

    Requires ``E T^*T E >= a^2 E``.  ``S`` is the inverse square root of the
    compression of ``T^*T`` to ``ran E``, computed from the SVD of ``T B``.
    """
    tol = _tol(tol)
    T = as_matrix(T)
    if E.rank == 0:
        return np.zeros_like(T)
    _, s, Vh = np.linalg.svd(T @ E.basis, full_matrices=False)
    if s[-1] ** 2 < a * a - tol.projection_tol:
        raise CornerNotBoundedBelow(
            f"smallest eigenvalue of the compression {s[-1] ** 2:.6g} < a^2 = {a * a:.6g}"
        )
    W = E.basis @ dag(Vh)
    S = (W / s) @ dag(W)
    return 0.5 * (S + dag(S))


def comparison_test(T, E: Projection, F_c: Projection, c: float, tol: ToleranceProfile | None = None) -> bool:
    """Whether ``E`` is subequivalent to ``F_c``, the spectral projection of ``|T|`` for ``[0, c]``.

    If ``|T E| < c`` the answer must be yes; a no in that situation raises
    :class:`InternalInvariantViolation`.
    """
    tol = _tol(tol)
    result = E.rank <= F_c.rank
    if E.rank and operator_norm(np.asarray(T) @ E.basis) < c - tol.tie_tol and not result:
        raise InternalInvariantViolation(
            f"|TE| < {c} but rank(E) = {E.rank} > rank(F_c) = {F_c.rank}"
        )
    return result
