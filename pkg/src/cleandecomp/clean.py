"""Clean and almost *-clean decompositions with certificates.

``clean_decompose(T)`` returns an idempotent ``P`` with ``T - P`` invertible
and ``|(T - P)^{-1}| <= 4``; ``almost_star_clean(T)`` returns a projection
``P0`` with ``T - P0`` invertible.  Both work on single matrices and on
:class:`~cleandecomp.kernel.BlockOperator` values (summand by summand).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BadOffDiagonal,
    ConditionAFailed,
    ConditionBFailed,
    CornerNotInvertible,
    DimensionMismatch,
    InternalInvariantViolation,
    NotInvertibleDifference,
    WitnessMismatch,
)
from .kernel import (
    BlockOperator,
    ToleranceProfile,
    _tol,
    abs_value,
    as_matrix,
    corner_inverse,
    dag,
    numerical_rank,
    operator_norm,
    singular_values,
)
from .lattice import (
    Projection,
    compressed_lower_bound,
    equivalent,
    left_projection,
    right_projection,
    spectral_projection_leq,
)
from .twoproj import build_p0, decompose_pair, difference_inverse, p0_nondegenerate

CLEAN = "clean_idempotent"
ALMOST_STAR = "almost_star_projection"
KINDS = (CLEAN, ALMOST_STAR)

THEOREM_BOUND = 4.0
SMALL_NORM_BOUND = 2.0
HALF = 0.5


@dataclass(frozen=True)
class SplitBoundCertificate:
    """Quantities in ``1/|T| <= |S| sqrt(1 - lam) <= 1/min(a1, a2)``."""

    a1: float
    a2: float
    lam: float
    s_norm: float
    t_norm: float

    @property
    def middle(self) -> float:
        return self.s_norm * np.sqrt(max(1.0 - self.lam, 0.0))

    @property
    def lower_slack(self) -> float:
        return self.middle - 1.0 / self.t_norm

    @property
    def upper_slack(self) -> float:
        return 1.0 / min(self.a1, self.a2) - self.middle

    def holds(self, slack: float = 1e-8) -> bool:
        return self.lower_slack >= -slack and self.upper_slack >= -slack

    def to_dict(self) -> dict:
        return {"a1": self.a1, "a2": self.a2, "lambda": self.lam, "s_norm": self.s_norm, "t_norm": self.t_norm}


@dataclass(frozen=True, eq=False)
class CleanCertificate:
    summand: np.ndarray
    kind: str
    inverse: np.ndarray
    inverse_norm: float
    claimed_bound: Optional[float]
    idempotency_residual: float
    selfadjointness_residual: float
    split_projection: Projection
    lam: float
    # diagnostics beyond the core contract
    branch: str = "split"
    lemma_bound: Optional[float] = None
    summand_norm: float = 0.0
    te_norm: float = 0.0
    degenerate: bool = False
    split: Optional[SplitBoundCertificate] = None
    extra: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.summand.shape[0]

    @property
    def inverse_residual(self) -> float:
        return self.extra.get("inverse_residual", float("nan"))


@dataclass(frozen=True, eq=False)
class BlockCertificate:
    """Per-summand certificates of a block operator; scalar fields aggregate by max."""

    blocks: tuple

    @property
    def kind(self) -> str:
        return self.blocks[0].kind

    @property
    def block_dims(self) -> tuple:
        return tuple(c.dim for c in self.blocks)

    @property
    def inverse_norm(self) -> float:
        return max(c.inverse_norm for c in self.blocks)

    @property
    def claimed_bound(self) -> Optional[float]:
        bounds = [c.claimed_bound for c in self.blocks]
        return None if any(b is None for b in bounds) else max(bounds)

    @property
    def idempotency_residual(self) -> float:
        return max(c.idempotency_residual for c in self.blocks)

    @property
    def selfadjointness_residual(self) -> float:
        return max(c.selfadjointness_residual for c in self.blocks)

    @property
    def lam(self) -> float:
        return max(c.lam for c in self.blocks)

    @property
    def summand(self) -> np.ndarray:
        return BlockOperator([c.summand for c in self.blocks]).dense()

    @property
    def inverse(self) -> np.ndarray:
        return BlockOperator([c.inverse for c in self.blocks]).dense()


def idempotent_from(T, E: Projection, A, tol: ToleranceProfile | None = None) -> np.ndarray:
    """The idempotent ``P = E + E'TE + A(E - ETE)`` for ``A`` in ``E' M_n E``.

    Needs ``E - ETE`` invertible in the corner ``E M_n E``.  Then
    ``R(P) = E``, ``P - E`` lies in ``E' M_n E``,
    ``|P| <= (1 + |A|)(1 + |TE|)`` and ``L((T - P)E) = L(E + A)``.
    """
    tol = _tol(tol)
    T = as_matrix(T)
    A = as_matrix(A)
    n = T.shape[0]
    if A.shape != T.shape or E.dim != n:
        raise DimensionMismatch("T, E and A must have the same dimension")
    Em = E.matrix
    Ep = np.eye(n) - Em
    off = operator_norm(A - Ep @ A @ Em)
    if off > tol.projection_tol * max(1.0, operator_norm(A)):
        raise BadOffDiagonal(f"A is not in the (E', E) corner: residual {off:.3e}")
    if E.rank:
        m = singular_values(np.eye(E.rank) - E.compress(T))[-1]
        if m <= tol.projection_tol:
            raise CornerNotInvertible(f"E - ETE is singular on ran E (smallest singular value {m:.3e})")
    corner = Em - Em @ T @ Em
    return Em + Ep @ T @ Em + A @ corner


def _lower_bound_ok(a: float, scale: float, n: int, tol: ToleranceProfile) -> bool:
    return a > tol.rank_cutoff(n) * max(scale, 1e-300)


def invert_via_splitting(T, E: Projection, tol: ToleranceProfile | None = None):
    """Invert ``T`` from a splitting projection ``E``.

    Conditions: (a) ``T`` is bounded below on ``ran E`` and ``ran E'`` by
    ``a1`` and ``a2``; (b) ``L(TE) - L(TE')`` is invertible inside
    ``L(T) M_n L(T)``.  Returns ``(S, cert)`` with ``S T = I`` and
    ``T S = L(T)``; ``cert`` holds the terms of the two-sided norm estimate
    with ``lam = |L(TE) L(TE')|``.  ``S`` itself is taken from the SVD
    (:func:`corner_inverse`); what is certified are its defining identities.
    """
    tol = _tol(tol)
    T = as_matrix(T)
    n = T.shape[0]
    if E.dim != n:
        raise DimensionMismatch("E and T differ in dimension")
    Ep = E.perp()
    t_norm = operator_norm(T)
    a1 = compressed_lower_bound(T, E)
    a2 = compressed_lower_bound(T, Ep)
    if not _lower_bound_ok(a1, t_norm, n, tol):
        raise ConditionAFailed("E", a1)
    if not _lower_bound_ok(a2, t_norm, n, tol):
        raise ConditionAFailed("E-perp", a2)

    P1 = left_projection(T @ E.basis, tol) if E.rank else Projection.zero(n)
    P2 = left_projection(T @ Ep.basis, tol) if Ep.rank else Projection.zero(n)
    LT = left_projection(T, tol)
    try:
        diff = difference_inverse(P1, P2, tol)
    except NotInvertibleDifference as exc:
        raise ConditionBFailed(f"L(TE) - L(TE') is not invertible: {exc}") from exc
    if diff.join.rank != LT.rank:
        raise ConditionBFailed(f"L(TE) v L(TE') has rank {diff.join.rank}, L(T) has rank {LT.rank}")

    S = corner_inverse(T, tol)
    lam = operator_norm(P1.matrix @ P2.matrix)
    cert = SplitBoundCertificate(float(a1), float(a2), float(lam), operator_norm(S), t_norm)
    return S, cert


def _inverse_residual(D: np.ndarray, X: np.ndarray) -> float:
    I = np.eye(D.shape[0])
    return max(operator_norm(D @ X - I), operator_norm(X @ D - I))


def clean_split(T, E: Projection, c: float, tol: ToleranceProfile | None = None) -> CleanCertificate:
    """Clean decomposition from a projection ``E`` with

    (1) ``E - ETE`` invertible on ``ran E`` and ``E'T^*TE' >= c^2 E'``,
    (2) ``E ^ F' ~ E' ^ F`` for ``F = I - L(TE')``.

    With ``U`` the witness of (2) and ``A = i E21 + U`` the idempotent
    ``P = E + E'TE + A(E - ETE)`` gives ``T - P`` invertible with
    ``|(T-P)^{-1}| <= 2 / min(|(E - ETE)^{-1}|^{-1}, c)``.
    """
    tol = _tol(tol)
    T = as_matrix(T)
    n = T.shape[0]
    if E.dim != n:
        raise DimensionMismatch("E and T differ in dimension")
    if E.rank == n:
        raise ConditionAFailed("E-perp", 0.0, c)
    Ep = E.perp()

    corner_min = singular_values(np.eye(E.rank) - E.compress(T))[-1] if E.rank else np.inf
    if corner_min <= tol.projection_tol:
        raise CornerNotInvertible(f"E - ETE is singular on ran E (smallest singular value {corner_min:.3e})")
    a2 = compressed_lower_bound(T, Ep)
    if a2 < c - tol.tie_tol:
        raise ConditionAFailed("E-perp", a2, c)

    LTEp = left_projection(T @ Ep.basis, tol)
    F = LTEp.perp()
    pair = decompose_pair(E, F, tol)
    if pair.meetEFp.rank != pair.meetEpF.rank:
        raise WitnessMismatch(
            f"condition (2) fails: rank(E ^ F') = {pair.meetEFp.rank}, rank(E' ^ F) = {pair.meetEpF.rank}"
        )
    U = equivalent(pair.meetEFp, pair.meetEpF, tol)
    A = 1j * pair.E21 + U.matrix
    P = idempotent_from(T, E, A, tol)
    P0 = build_p0(E, F, U, tol, pair=pair)

    D = T - P
    S, split = invert_via_splitting(D, E, tol)
    inv_res = _inverse_residual(D, S)
    lemma_bound = 2.0 / min(corner_min, c)
    te_norm = operator_norm(T @ E.basis) if E.rank else 0.0
    LDE = left_projection(D @ E.basis, tol) if E.rank else Projection.zero(n)
    return CleanCertificate(
        summand=P,
        kind=CLEAN,
        inverse=S,
        inverse_norm=split.s_norm,
        claimed_bound=lemma_bound,
        idempotency_residual=operator_norm(P @ P - P),
        selfadjointness_residual=operator_norm(P - dag(P)),
        split_projection=E,
        lam=split.lam,
        branch="split",
        lemma_bound=lemma_bound,
        summand_norm=operator_norm(P),
        te_norm=te_norm,
        degenerate=not p0_nondegenerate(pair),
        split=split,
        extra={
            "inverse_residual": inv_res,
            "p0_lemma_residual": operator_norm(LDE.matrix - P0.matrix),
            "corner_min_singular": float(corner_min),
            "c": float(c),
            "ranks": _pair_ranks(pair),
        },
    )


def _pair_ranks(pair) -> dict:
    return {
        "E^F": pair.meetEF.rank,
        "E^F'": pair.meetEFp.rank,
        "E'^F": pair.meetEpF.rank,
        "E'^F'": pair.meetEpFp.rank,
        "generic": 2 * pair.generic_rank,
    }


def clean_decompose(T, tol: ToleranceProfile | None = None):
    """Idempotent ``P`` with ``T - P`` invertible and ``|(T - P)^{-1}| <= 4``.

    For ``|T| <= 1/2`` (with ``tie_tol`` slack) ``P = I``.  Otherwise ``E`` is
    the spectral projection of ``|T|`` for ``[0, 1/2]`` and the result comes
    from :func:`clean_split` with ``c = 1/2``.
    """
    tol = _tol(tol)
    if isinstance(T, BlockOperator):
        return BlockCertificate(tuple(clean_decompose(b, tol) for b in T.blocks))
    T = as_matrix(T)
    n = T.shape[0]
    t_norm = operator_norm(T)
    if t_norm <= HALF + tol.tie_tol:
        I = np.eye(n, dtype=np.complex128)
        D = T - I
        X = corner_inverse(D, tol)
        return CleanCertificate(
            summand=I,
            kind=CLEAN,
            inverse=X,
            inverse_norm=operator_norm(X),
            claimed_bound=THEOREM_BOUND,
            idempotency_residual=0.0,
            selfadjointness_residual=0.0,
            split_projection=Projection.identity(n),
            lam=0.0,
            branch="small_norm",
            lemma_bound=SMALL_NORM_BOUND,
            summand_norm=1.0,
            te_norm=t_norm,
            extra={"inverse_residual": _inverse_residual(D, X)},
        )

    E = spectral_projection_leq(abs_value(T), HALF, tol)
    try:
        cert = clean_split(T, E, HALF, tol)
    except WitnessMismatch as exc:
        raise InternalInvariantViolation(
            f"finiteness rank identity failed (rank E = {E.rank}, dim = {n}): {exc}"
        ) from exc
    except (ConditionAFailed, ConditionBFailed, CornerNotInvertible) as exc:
        raise InternalInvariantViolation(f"guaranteed condition failed (rank E = {E.rank}): {exc}") from exc
    return CleanCertificate(
        summand=cert.summand,
        kind=CLEAN,
        inverse=cert.inverse,
        inverse_norm=cert.inverse_norm,
        claimed_bound=THEOREM_BOUND,
        idempotency_residual=cert.idempotency_residual,
        selfadjointness_residual=cert.selfadjointness_residual,
        split_projection=E,
        lam=cert.lam,
        branch="split",
        lemma_bound=cert.lemma_bound,
        summand_norm=cert.summand_norm,
        te_norm=cert.te_norm,
        degenerate=cert.degenerate,
        split=cert.split,
        extra=cert.extra,
    )


def almost_star_clean(T, tol: ToleranceProfile | None = None):
    """Projection ``P0`` with ``T - P0`` invertible.

    ``E = L(T)'``, ``F = R(T)'`` and ``P0`` is the projection built from the
    two-projection decomposition of ``(E, F)`` and a witness of
    ``E ^ F' ~ E' ^ F``.  No norm bound is claimed.
    """
    tol = _tol(tol)
    if isinstance(T, BlockOperator):
        return BlockCertificate(tuple(almost_star_clean(b, tol) for b in T.blocks))
    T = as_matrix(T)
    n = T.shape[0]
    E = left_projection(T, tol).perp()
    F = right_projection(T, tol).perp()
    pair = decompose_pair(E, F, tol)
    if pair.meetEFp.rank != pair.meetEpF.rank:
        raise InternalInvariantViolation(f"rank identity failed for E = L(T)', F = R(T)': {_pair_ranks(pair)}")
    U = equivalent(pair.meetEFp, pair.meetEpF, tol)
    P0 = build_p0(E, F, U, tol, pair=pair)
    D = T - P0.matrix
    s = singular_values(D)
    if numerical_rank(s, n, tol) != n:
        raise InternalInvariantViolation(
            f"T - P0 is not invertible under the rank rule: s_min = {s[-1]:.3e}, |T - P0| = {s[0]:.3e}"
        )
    X = corner_inverse(D, tol)
    Pm = P0.matrix
    return CleanCertificate(
        summand=Pm,
        kind=ALMOST_STAR,
        inverse=X,
        inverse_norm=operator_norm(X),
        claimed_bound=None,
        idempotency_residual=operator_norm(Pm @ Pm - Pm),
        selfadjointness_residual=operator_norm(Pm - dag(Pm)),
        split_projection=E,
        lam=operator_norm(Pm @ (np.eye(n) - F.matrix)),
        branch="almost_star",
        summand_norm=operator_norm(Pm),
        degenerate=not p0_nondegenerate(pair),
        extra={
            "inverse_residual": _inverse_residual(D, X),
            "smallest_singular": float(s[-1]),
            "ranks": _pair_ranks(pair),
        },
    )


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    limit: float

    @property
    def slack(self) -> float:
        return self.limit - self.measured


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def add(self, name: str, measured: float, limit: float) -> None:
        measured = float(measured)
        self.checks.append(Check(name, bool(measured <= limit), measured, float(limit)))

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "measured": c.measured, "limit": c.limit, "slack": c.slack}
                for c in self.checks
            ],
        }

    def lines(self) -> list:
        return [
            f"{'PASS' if c.passed else 'FAIL'}  {c.name:<32} measured={c.measured:.3e}  limit={c.limit:.3e}"
            for c in self.checks
        ]


def _fresh_norm(M) -> float:
    return float(np.linalg.norm(np.asarray(M), 2))


def verify_certificate(T, cert, tol: ToleranceProfile | None = None) -> VerificationReport:
    """Recheck every certificate invariant from scratch.

    Residuals are formed by direct multiplication and norms come from a
    fresh ``numpy.linalg.norm(., 2)``; nothing stored in the certificate
    except the matrices is trusted.
    """
    tol = _tol(tol)
    if isinstance(cert, BlockCertificate):
        if not isinstance(T, BlockOperator) or T.block_dims != cert.block_dims:
            report = VerificationReport()
            report.add("block_structure", 1.0, 0.0)
            return report
        report = VerificationReport()
        for i, (Tb, cb) in enumerate(zip(T.blocks, cert.blocks)):
            for c in verify_certificate(Tb, cb, tol).checks:
                report.checks.append(Check(f"block{i}.{c.name}", c.passed, c.measured, c.limit))
        return report

    report = VerificationReport()
    T = as_matrix(T.dense() if isinstance(T, BlockOperator) else T)
    n = T.shape[0]
    Pm = np.asarray(cert.summand, dtype=np.complex128)
    X = np.asarray(cert.inverse, dtype=np.complex128)
    if Pm.shape != T.shape or X.shape != T.shape:
        report.add("dimensions", 1.0, 0.0)
        return report
    report.add("kind_known", 0.0 if cert.kind in KINDS else 1.0, 0.0)

    idem = _fresh_norm(Pm @ Pm - Pm)
    report.add("idempotency", idem, tol.projection_tol)
    report.add("idempotency_reported", abs(idem - cert.idempotency_residual), 1e-12 + 1e-6 * idem)
    if cert.kind == ALMOST_STAR:
        report.add("selfadjointness", _fresh_norm(Pm - Pm.conj().T), tol.projection_tol)

    D = T - Pm
    I = np.eye(n)
    report.add("inverse_right", _fresh_norm(D @ X - I), n * 1e-9)
    report.add("inverse_left", _fresh_norm(X @ D - I), n * 1e-9)
    xnorm = _fresh_norm(X)
    report.add("inverse_norm_reported", abs(xnorm - cert.inverse_norm), 1e-9 * max(1.0, xnorm))
    if cert.kind == CLEAN:
        bound = cert.claimed_bound if cert.claimed_bound is not None else -np.inf
        report.add("inverse_norm_bound", xnorm, bound + 1e-6)
    return report
