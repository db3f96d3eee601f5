"""Two projections in general position.

Any pair ``E, F`` splits the space into the four meets
``E^F, E^F', E'^F, E'^F'`` and a generic part ``I0`` on which
``P = E - E^F - E^F'`` and ``Q = F - E^F - E'^F`` take the canonical form

    P = E11,   Q = E11 H + (E12 + E21) sqrt(H (I0 - H)) + E22 (I0 - H)

with 2x2 matrix units ``Eij`` and a positive contraction ``H`` commuting
with them.  Numerically the meets are the principal directions whose
squared cosine lies within ``generic_tol`` of 1 (for ``E^F``) or 0 (for
``E^F'``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotGenericPosition, NotInvertibleDifference, WitnessMismatch
from .kernel import ToleranceProfile, _tol, dag, fix_phases, operator_norm
from .lattice import PartialIsometry, Projection, complement_basis, join


@dataclass(frozen=True, eq=False)
class PairDecomposition:
    E: Projection
    F: Projection
    meetEF: Projection
    meetEFp: Projection
    meetEpF: Projection
    meetEpFp: Projection
    generic_unit: Projection
    E11: np.ndarray
    E12: np.ndarray
    E21: np.ndarray
    E22: np.ndarray
    H: np.ndarray
    # u: orthonormal eigenvectors of the compression of EFE to ran P,
    # v = E21 u; h the matching eigenvalues (ascending)
    u: np.ndarray
    v: np.ndarray
    h: np.ndarray

    @property
    def dim(self) -> int:
        return self.E.dim

    @property
    def P(self) -> np.ndarray:
        return self.E11

    @property
    def Q(self) -> np.ndarray:
        return self.F.matrix - self.meetEF.matrix - self.meetEpF.matrix

    @property
    def I0(self) -> np.ndarray:
        return self.generic_unit.matrix

    @property
    def generic_rank(self) -> int:
        return self.u.shape[1]

    def sqrt_h_1mh(self) -> np.ndarray:
        """``sqrt(H (I0 - H))`` as a full-space matrix."""
        return self._diag_fn(np.sqrt(self.h * (1.0 - self.h)))

    def _diag_fn(self, values: np.ndarray) -> np.ndarray:
        return (self.u * values) @ dag(self.u) + (self.v * values) @ dag(self.v)

    def canonical_Q(self) -> np.ndarray:
        """``Q`` rebuilt from the matrix units and ``H``."""
        I0 = self.I0
        return (
            self.E11 @ self.H
            + (self.E12 + self.E21) @ self.sqrt_h_1mh()
            + self.E22 @ (I0 - self.H)
        )

    def reconstruct_E(self) -> np.ndarray:
        return self.E11 + self.meetEF.matrix + self.meetEFp.matrix

    def reconstruct_F(self) -> np.ndarray:
        return self.canonical_Q() + self.meetEF.matrix + self.meetEpF.matrix

    def residuals(self) -> dict:
        """Operator-norm residuals of every structural identity."""
        I0 = self.I0
        P, Q = self.E11, self.canonical_Q()
        units = {(1, 1): self.E11, (1, 2): self.E12, (2, 1): self.E21, (2, 2): self.E22}
        unit_res = 0.0
        for (i, j), A in units.items():
            for (k, l), B in units.items():
                expected = units[(i, l)] if j == k else 0.0
                unit_res = max(unit_res, operator_norm(A @ B - expected))
        comm = max(operator_norm(self.H @ X - X @ self.H) for X in units.values())
        J = I0 - 1j * self.E21 + 1j * self.E12
        remark_q = operator_norm((J - 2 * Q) @ (J - 2 * Q) - 2 * I0)
        remark_p = operator_norm((J - 2 * P) @ (J - 2 * P) - 2 * I0)
        parts = self.meetEF.matrix + self.meetEFp.matrix + self.meetEpF.matrix + self.meetEpFp.matrix + I0
        return {
            "E": operator_norm(self.reconstruct_E() - self.E.matrix),
            "F": operator_norm(self.reconstruct_F() - self.F.matrix),
            "P_minus_Q_squared": operator_norm((P - Q) @ (P - Q) - (I0 - self.H)),
            "matrix_units": unit_res,
            "units_sum": operator_norm(self.E11 + self.E22 - I0),
            "adjoint": operator_norm(dag(self.E12) - self.E21),
            "H_commutes": comm,
            "remark_Q": remark_q,
            "remark_P": remark_p,
            "partition_of_unity": operator_norm(parts - np.eye(self.dim)),
        }


def _check_pair(E: Projection, F: Projection) -> None:
    if E.dim != F.dim:
        raise DimensionMismatch(f"projections of different dimension: {E.dim} vs {F.dim}")


def _orthonormalize(V: np.ndarray) -> np.ndarray:
    """Nearest matrix with orthonormal columns (polar factor)."""
    if V.shape[1] == 0:
        return V
    U, _, Wh = np.linalg.svd(V, full_matrices=False)
    return U @ Wh


def decompose_pair(E: Projection, F: Projection, tol: ToleranceProfile | None = None) -> PairDecomposition:
    """Five-part decomposition of the pair ``(E, F)``.

    The compression of ``F`` to ``ran E`` is diagonalised; eigenvalues
    ``h`` near 1 span ``E^F``, near 0 span ``E^F'`` and the rest give the
    generic vectors ``u`` with partners ``v = (F u - h u) / sqrt(h (1-h))``
    in ``ran E'``.  What is left of ``ran E'`` is split between ``E'^F``
    and ``E'^F'`` by the compression of ``F`` there, whose eigenvalues are
    0 or 1 up to rounding.
    """
    tol = _tol(tol)
    _check_pair(E, F)
    n = E.dim
    g = tol.generic_tol
    Fm = F.matrix

    h_all, W = np.linalg.eigh(_herm(E.compress(Fm)))
    u_all = E.basis @ W
    on_F = h_all >= 1.0 - g
    off_F = h_all <= g
    gen = ~(on_F | off_F)

    # eigh returns h ascending, which fixes the order of the generic vectors
    u = fix_phases(u_all[:, gen])
    h = h_all[gen]
    v = (Fm @ u - u * h) / np.sqrt(h * (1.0 - h))
    v = v - E.matrix @ v
    v = _orthonormalize(v)

    Ep = E.perp()
    coeff = dag(Ep.basis) @ v
    K = Ep.basis @ complement_basis(coeff, Ep.rank) if Ep.rank else Ep.basis
    f_rest, Wk = np.linalg.eigh(_herm(dag(K) @ Fm @ K)) if K.shape[1] else (np.zeros(0), np.zeros((0, 0)))
    rest = K @ Wk if K.shape[1] else K

    meetEF = Projection.from_basis(fix_phases(u_all[:, on_F]), tol)
    meetEFp = Projection.from_basis(fix_phases(u_all[:, off_F]), tol)
    meetEpF = Projection.from_basis(fix_phases(rest[:, f_rest > 0.5]), tol)
    meetEpFp = Projection.from_basis(fix_phases(rest[:, f_rest <= 0.5]), tol)
    generic = Projection.from_basis(np.hstack([u, v]), tol)

    E11 = u @ dag(u)
    E22 = v @ dag(v)
    E12 = u @ dag(v)
    E21 = v @ dag(u)
    H = (u * h) @ dag(u) + (v * h) @ dag(v)
    return PairDecomposition(
        E, F, meetEF, meetEFp, meetEpF, meetEpFp, generic,
        E11, E12, E21, E22, H, u, v, h,
    )


def _herm(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + dag(M))


def halmos_units(P: Projection, Q: Projection, tol: ToleranceProfile | None = None):
    """Matrix units and ``H`` for a pair already in generic position.

    Returns ``(E11, E12, E21, E22, H)``.  Raises
    :class:`NotGenericPosition` if any of the four meets is nonzero after
    classification (which also forces ``rank P = rank P' = n/2``).
    """
    pair = decompose_pair(P, Q, tol)
    meets = {
        "P^Q": pair.meetEF.rank,
        "P^Q'": pair.meetEFp.rank,
        "P'^Q": pair.meetEpF.rank,
        "P'^Q'": pair.meetEpFp.rank,
    }
    nonzero = {k: r for k, r in meets.items() if r}
    if nonzero:
        raise NotGenericPosition(f"nonzero meets (ranks): {nonzero}")
    if 2 * pair.generic_rank != P.dim:
        raise NotGenericPosition(f"rank P = {P.rank} is not half of {P.dim}")
    return pair.E11, pair.E12, pair.E21, pair.E22, pair.H


@dataclass(frozen=True, eq=False)
class DifferenceInverseCertificate:
    inverse_on_join: np.ndarray
    norm_value: float
    ef_norm: float
    join: Projection

    @property
    def closed_form(self) -> float:
        return (1.0 - self.ef_norm**2) ** -0.5

    @property
    def relative_gap(self) -> float:
        if self.join.rank == 0:
            return 0.0
        return abs(self.norm_value - self.closed_form) / self.closed_form


def difference_inverse(
    E: Projection, F: Projection, tol: ToleranceProfile | None = None, pair: PairDecomposition | None = None
) -> DifferenceInverseCertificate:
    """Inverse of ``E - F`` inside the corner ``(E v F) M_n (E v F)``.

    Built from the canonical form,
    ``(E-F)^{-1} = E11 - (E12 + E21) sqrt(H (I0-H)^{-1}) - E22 + E^F' - E'^F``,
    and certified against the norm law ``|(E-F)^{-1}| = (1 - |EF|^2)^{-1/2}``.
    """
    tol = _tol(tol)
    _check_pair(E, F)
    if pair is None:
        pair = decompose_pair(E, F, tol)
    J = join(E, F, tol)
    if pair.meetEF.rank or J.rank != E.rank + F.rank:
        raise NotInvertibleDifference(
            f"E ^ F != 0: rank E + rank F = {E.rank + F.rank}, rank(E v F) = {J.rank}, "
            f"rank(E ^ F) = {pair.meetEF.rank}"
        )
    ef = operator_norm(E.matrix @ F.matrix)
    if ef >= 1.0 - tol.generic_tol:
        raise NotInvertibleDifference(f"|EF| = {ef:.12g} is not below 1")
    g = np.sqrt(pair.h / (1.0 - pair.h))
    G = pair._diag_fn(g)
    X = pair.E11 - (pair.E12 + pair.E21) @ G - pair.E22 + pair.meetEFp.matrix - pair.meetEpF.matrix
    return DifferenceInverseCertificate(X, operator_norm(X), ef, J)


def build_p0(
    E: Projection,
    F: Projection,
    U: PartialIsometry,
    tol: ToleranceProfile | None = None,
    pair: PairDecomposition | None = None,
) -> Projection:
    """The projection
    ``P0 = (I0 + i E21 - i E12)/2 + E^F + (E^F' + E'^F + U + U^*)/2``.

    ``U`` must be a partial isometry from ``E^F'`` onto ``E'^F``.
    """
    tol = _tol(tol)
    _check_pair(E, F)
    if pair is None:
        pair = decompose_pair(E, F, tol)
    A, B = pair.meetEFp, pair.meetEpF
    if A.rank != B.rank:
        raise WitnessMismatch(f"rank(E^F') = {A.rank} differs from rank(E'^F) = {B.rank}")
    d_init = operator_norm(U.initial.matrix - A.matrix)
    d_final = operator_norm(U.final.matrix - B.matrix)
    if d_init > tol.projection_tol or d_final > tol.projection_tol:
        raise WitnessMismatch(
            f"witness does not connect E^F' to E'^F: initial gap {d_init:.3e}, final gap {d_final:.3e}"
        )
    Um = U.matrix
    P0 = (
        0.5 * (pair.I0 + 1j * pair.E21 - 1j * pair.E12)
        + pair.meetEF.matrix
        + 0.5 * (A.matrix + B.matrix + Um + dag(Um))
    )
    n = pair.generic_rank
    # range basis: (u + i v)/sqrt2 on the generic part, (a + U a)/sqrt2 on the corners
    gen = (pair.u + 1j * pair.v) / np.sqrt(2.0) if n else np.zeros((E.dim, 0))
    corner = (A.basis + Um @ A.basis) / np.sqrt(2.0) if A.rank else np.zeros((E.dim, 0))
    basis = np.hstack([gen, pair.meetEF.basis, corner]).astype(np.complex128)
    proj = Projection(_herm(P0), basis.shape[1], basis)
    proj.validate(tol)
    return proj


def p0_nondegenerate(pair: PairDecomposition) -> bool:
    """Whether the identity ``|P0 F'| = 1/sqrt2`` is expected (some of I0, E^F', E'^F nonzero)."""
    return bool(pair.generic_rank or pair.meetEFp.rank or pair.meetEpF.rank)


def p0_residuals(pair: PairDecomposition, P0: Projection) -> dict:
    """Residuals of the identities satisfied by ``P0``."""
    n = pair.dim
    I = np.eye(n)
    Fp = I - pair.F.matrix
    Ep = I - pair.E.matrix
    target = (
        0.5 * pair.I0
        + pair.meetEF.matrix
        + 0.5 * (pair.meetEFp.matrix + pair.meetEpF.matrix)
        + pair.meetEpFp.matrix
    )
    P = P0.matrix
    out = {
        "p0_minus_Eperp_squared": operator_norm((P - Ep) @ (P - Ep) - target),
        "p0_minus_Fperp_squared": operator_norm((P - Fp) @ (P - Fp) - target),
        "p0_Fperp_norm": operator_norm(P @ Fp),
    }
    if p0_nondegenerate(pair):
        out["p0_Fperp_gap"] = abs(out["p0_Fperp_norm"] - 2.0**-0.5)
    return out
