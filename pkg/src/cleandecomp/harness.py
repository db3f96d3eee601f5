"""Random instances and property campaigns.

Random streams come from numpy's ``Philox`` counter-based bit generator
keyed by a ``SeedSequence`` over ``(seed, dim, trial)``, so any instance can
be regenerated from the triple alone.
"""

from __future__ import annotations

import concurrent.futures
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .clean import (
    CLEAN,
    BlockCertificate,
    almost_star_clean,
    clean_decompose,
    verify_certificate,
)
from .errors import CleanDecompError, InvalidTolerance, UnknownGenerator
from .kernel import BlockOperator, ToleranceProfile, dag, operator_norm
from .lattice import Projection
from .twoproj import decompose_pair, difference_inverse

GENERATORS = (
    "ginibre",
    "haar_unitary_scaled",
    "nilpotent",
    "rank_deficient",
    "hermitian",
    "near_half_norm",
    "block",
)
NEAR_HALF_NORMS = (0.5 - 1e-9, 0.5, 0.5 + 1e-9)
PAIR_KINDS = ("haar", "admissible", "commuting", "nested", "generic")


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _ginibre(rng, n):
    return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2 * n)


def haar_unitary(rng, n) -> np.ndarray:
    Q, R = np.linalg.qr(_ginibre(rng, n))
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def _rescale(T, norm):
    s = operator_norm(T)
    return T if s == 0.0 else T * (norm / s)


def generate(kind: str, dim: int, seed, variant: int | None = None):
    """Deterministic random instance of the given kind.

    ``block`` returns a :class:`BlockOperator` of total dimension ``dim``;
    every other kind returns a dense matrix.  ``variant`` selects the
    target norm of ``near_half_norm`` (cycling through ``NEAR_HALF_NORMS``);
    by default it is taken from the seed.
    """
    if kind not in GENERATORS:
        raise UnknownGenerator(f"unknown generator {kind!r}; choose from {', '.join(GENERATORS)}")
    if dim <= 0:
        raise ValueError("dim must be positive")
    rng = make_rng(seed)
    n = dim
    if kind == "ginibre":
        return _ginibre(rng, n)
    if kind == "haar_unitary_scaled":
        return haar_unitary(rng, n) * rng.uniform(0.25, 2.0)
    if kind == "nilpotent":
        U = haar_unitary(rng, n)
        N = np.triu(_ginibre(rng, n), 1)
        return U @ N @ dag(U)
    if kind == "rank_deficient":
        r = int(rng.integers(0, n))
        U, V = haar_unitary(rng, n), haar_unitary(rng, n)
        s = rng.uniform(0.2, 2.0, r)
        return (U[:, :r] * s) @ dag(V[:, :r])
    if kind == "hermitian":
        G = _ginibre(rng, n)
        return 0.5 * (G + dag(G))
    if kind == "near_half_norm":
        if variant is None:
            variant = int(np.atleast_1d(seed)[-1])
        return _rescale(_ginibre(rng, n), NEAR_HALF_NORMS[variant % 3])
    # block: random composition of dim
    cuts = sorted(rng.choice(np.arange(1, n), size=int(rng.integers(0, n)), replace=False)) if n > 1 else []
    edges = [0, *[int(c) for c in cuts], n]
    return BlockOperator([_ginibre(rng, b - a) for a, b in zip(edges, edges[1:])])


def random_projection(rng, n: int, r: int) -> Projection:
    Q = haar_unitary(rng, n)
    return Projection.from_basis(Q[:, :r])


def generate_pair(kind: str, dim: int, seed):
    """Pair of projections ``(E, F)`` for the two-projection suites."""
    rng = make_rng(seed)
    n = dim
    if kind == "haar":
        return random_projection(rng, n, int(rng.integers(0, n + 1))), random_projection(rng, n, int(rng.integers(0, n + 1)))
    if kind == "admissible":
        # rank E + rank F <= n, so E ^ F = 0 almost surely
        p = int(rng.integers(0, n + 1))
        q = int(rng.integers(0, n - p + 1))
        if p + q == 0:
            p = 1
        return random_projection(rng, n, p), random_projection(rng, n, q)
    if kind == "commuting":
        U = haar_unitary(rng, n)
        e = rng.integers(0, 2, n).astype(bool)
        f = rng.integers(0, 2, n).astype(bool)
        return Projection.from_basis(U[:, e]), Projection.from_basis(U[:, f])
    if kind == "nested":
        U = haar_unitary(rng, n)
        p = int(rng.integers(0, n + 1))
        q = int(rng.integers(p, n + 1))
        return Projection.from_basis(U[:, :p]), Projection.from_basis(U[:, :q])
    if kind == "generic":
        # generic position plus planted meets
        U = haar_unitary(rng, n)
        k = int(rng.integers(0, n // 2 + 1))
        rest = n - 2 * k
        counts = rng.multinomial(rest, [0.25] * 4) if rest else np.zeros(4, dtype=int)
        cols = iter(range(n))
        Eb, Fb = [], []
        for _ in range(k):
            i, j = next(cols), next(cols)
            t = rng.uniform(0.05, np.pi / 2 - 0.05)
            Eb.append(U[:, i])
            Fb.append(np.cos(t) * U[:, i] + np.sin(t) * U[:, j])
        for which, c in zip(("EF", "EFp", "EpF", "EpFp"), counts):
            for _ in range(c):
                col = U[:, next(cols)]
                if which in ("EF", "EFp"):
                    Eb.append(col)
                if which in ("EF", "EpF"):
                    Fb.append(col)
        mk = lambda B: Projection.from_basis(np.array(B).T if B else np.zeros((n, 0)))
        return mk(Eb), mk(Fb)
    raise UnknownGenerator(f"unknown pair kind {kind!r}")


@dataclass
class CampaignConfig:
    dims: list = field(default_factory=lambda: list(range(1, 9)))
    trials_per_dim: int = 200
    seed: int = 0
    generators: list = field(default_factory=lambda: list(GENERATORS))
    norm_scales: list = field(default_factory=lambda: [0.1, 0.49, 0.5, 0.51, 1.0, 10.0])
    tolerance: ToleranceProfile = field(default_factory=ToleranceProfile)

    def __post_init__(self):
        if not self.dims or any(int(d) <= 0 for d in self.dims):
            raise ValueError("dims must be a non-empty list of positive integers")
        if not self.generators:
            raise ValueError("generators must be non-empty")
        unknown = [g for g in self.generators if g not in GENERATORS]
        if unknown:
            raise UnknownGenerator(f"unknown generators: {unknown}")
        if int(self.trials_per_dim) < 1:
            raise ValueError("trials_per_dim must be at least 1")
        if not self.norm_scales or any(s <= 0 for s in self.norm_scales):
            raise ValueError("norm_scales must be positive")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        data = dict(data)
        known = {"dims", "trials_per_dim", "seed", "generators", "norm_scales", "tolerance"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        tol = data.pop("tolerance", None)
        if tol is not None:
            if not isinstance(tol, dict):
                raise InvalidTolerance("tolerance must be an object")
            data["tolerance"] = ToleranceProfile.from_dict(tol)
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "dims": [int(d) for d in self.dims],
            "trials_per_dim": int(self.trials_per_dim),
            "seed": int(self.seed),
            "generators": list(self.generators),
            "norm_scales": [float(s) for s in self.norm_scales],
            "tolerance": self.tolerance.to_dict(),
        }

    def trial_plan(self, dim: int, trial: int):
        """Generator and norm scale used by ``(dim, trial)``."""
        g = self.generators[trial % len(self.generators)]
        scale = self.norm_scales[(trial // len(self.generators)) % len(self.norm_scales)]
        return g, scale


def instance(config: CampaignConfig, dim: int, trial: int):
    gen, scale = config.trial_plan(dim, trial)
    seed = [int(config.seed), int(dim), int(trial)]
    T = generate(gen, dim, seed, variant=trial // len(config.generators))
    if gen == "near_half_norm":
        return gen, None, T
    if isinstance(T, BlockOperator):
        s = max(operator_norm(b) for b in T.blocks)
        if s > 0:
            T = BlockOperator([b * (scale / s) for b in T.blocks])
        return gen, scale, T
    return gen, scale, _rescale(T, scale)


class _Recorder:
    def __init__(self):
        self.records = []

    def check(self, name, measured, limit):
        measured = float(measured)
        self.records.append((name, measured, float(limit), bool(measured <= limit)))

    def error(self, name, exc):
        self.records.append((name, 0.0, 0.0, False, f"{type(exc).__name__}: {exc}"))


def _clean_checks(rec: _Recorder, T, cert, tol: ToleranceProfile):
    certs = cert.blocks if isinstance(cert, BlockCertificate) else (cert,)
    blocks = T.blocks if isinstance(T, BlockOperator) else (T,)
    for Tb, c in zip(blocks, certs):
        kind = c.kind
        prefix = "clean" if kind == CLEAN else "almost_star"
        rec.check(f"{prefix}.idempotency", c.idempotency_residual, tol.projection_tol)
        rec.check(f"{prefix}.inverse_residual", c.inverse_residual, c.dim * 1e-9)
        report = verify_certificate(Tb, c, tol)
        rec.check(f"{prefix}.verify", 0.0 if report.passed else 1.0, 0.0)
        if kind == CLEAN:
            rec.check("clean.bound_4", c.inverse_norm, 4.0 + 1e-6)
            if c.branch == "small_norm":
                rec.check("clean.small_norm_summand_is_I", operator_norm(c.summand - np.eye(c.dim)), 0.0)
                rec.check("clean.small_norm_bound_2", c.inverse_norm, 2.0 + 1e-6)
            else:
                rec.check("clean.idempotent_norm", c.summand_norm - (2.0 + 2.0 * c.te_norm), 1e-8)
                rec.check("clean.idempotent_norm_3", c.summand_norm, 3.0 + 1e-8)
                rec.check("splitting.sandwich_lower", -c.split.lower_slack, 1e-8)
                rec.check("splitting.sandwich_upper", -c.split.upper_slack, 1e-8)
                rec.check("clean.lemma_idempotent_range", c.extra["p0_lemma_residual"], tol.projection_tol * 10)
                if not c.degenerate:
                    rec.check("clean.lambda_is_inv_sqrt2", abs(c.lam - 2.0**-0.5), 1e-8)
        else:
            rec.check("almost_star.selfadjointness", c.selfadjointness_residual, tol.projection_tol)
            n = c.dim
            s = c.extra["smallest_singular"]
            rec.check(
                "almost_star.invertible",
                tol.rank_cutoff(n) * operator_norm(Tb - c.summand) - s,
                0.0,
            )


def _pair_checks(rec: _Recorder, E, F, tol: ToleranceProfile, admissible: bool):
    n = E.dim
    pair = decompose_pair(E, F, tol)
    res = pair.residuals()
    for key in ("E", "F", "P_minus_Q_squared"):
        rec.check(f"pair.{key}", res[key], n * 1e-9)
    for key in ("matrix_units", "units_sum", "adjoint", "H_commutes"):
        rec.check(f"pair.{key}", res[key], 1e-9)
    if pair.generic_rank:
        rec.check("pair.remark_Q", res["remark_Q"], 1e-8)
        rec.check("pair.remark_P", res["remark_P"], 1e-8)
    if admissible:
        cert = difference_inverse(E, F, tol)
        rec.check("difference.norm_law", cert.relative_gap, 1e-8)
        J = cert.join.matrix
        X = cert.inverse_on_join
        D = E.matrix - F.matrix
        rec.check("difference.inverse", max(operator_norm(X @ D - J), operator_norm(D @ X - J)), n * 1e-9)


def run_trial(config: CampaignConfig, dim: int, trial: int) -> dict:
    """All suites for one ``(dim, trial)``; returns the raw check records."""
    tol = config.tolerance
    rec = _Recorder()
    gen, scale, T = instance(config, dim, trial)
    for name, fn in (("clean", clean_decompose), ("almost_star", almost_star_clean)):
        try:
            cert = fn(T, tol)
            _clean_checks(rec, T, cert, tol)
        except CleanDecompError as exc:
            rec.error(f"{name}.exception", exc)
    pair_kind = PAIR_KINDS[trial % len(PAIR_KINDS)]
    try:
        E, F = generate_pair(pair_kind, dim, [int(config.seed), int(dim), int(trial), 1])
        _pair_checks(rec, E, F, tol, admissible=pair_kind == "admissible")
    except CleanDecompError as exc:
        rec.error("pair.exception", exc)
    return {"dim": dim, "trial": trial, "generator": gen, "scale": scale, "pair_kind": pair_kind, "records": rec.records, "T": T}


def _worker_count() -> int:
    try:
        cap = int(os.environ.get("CLEAN_DECOMP_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, os.cpu_count() or 1))


def _run_trial_args(args):
    config, dim, trial = args
    return run_trial(config, dim, trial)


@dataclass
class CampaignReport:
    config: dict
    instances: int
    checks: dict
    failures: list
    wall_clock_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["failed"] == 0 for c in self.checks.values())

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "passed": self.passed,
            "config": self.config,
            "instances": self.instances,
            "checks": self.checks,
            "failures": self.failures,
        }
        if include_timing:
            out["wall_clock_s"] = self.wall_clock_s
        return out

    def lines(self) -> list:
        out = []
        for name, c in self.checks.items():
            status = "PASS" if c["failed"] == 0 else "FAIL"
            slack = "n/a" if c["worst_slack"] is None else f"{c['worst_slack']:.3e}"
            out.append(f"{status}  {name:<36} {c['passed']:>6}/{c['total']:<6} worst slack {slack}")
        return out


def run_campaign(config: CampaignConfig, max_failure_dumps: int = 50) -> CampaignReport:
    """Run every suite over ``config``; aggregation is by count and min/max only."""
    from .serialization import operator_to_json

    t0 = time.perf_counter()
    jobs = [(config, int(d), t) for d in config.dims for t in range(int(config.trials_per_dim))]
    workers = _worker_count()
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_args, jobs, chunksize=16))
    else:
        results = [_run_trial_args(j) for j in jobs]
    results.sort(key=lambda r: (r["dim"], r["trial"]))

    checks: dict = {}
    failures = []
    for r in results:
        for rec in r["records"]:
            name, measured, limit, ok = rec[:4]
            c = checks.setdefault(
                name, {"passed": 0, "failed": 0, "errors": 0, "total": 0, "worst_slack": None, "worst_measured": None, "limit": limit}
            )
            c["total"] += 1
            c["passed" if ok else "failed"] += 1
            is_error = len(rec) > 4
            if is_error:
                c["errors"] += 1
            elif c["worst_slack"] is None or limit - measured < c["worst_slack"]:
                c["worst_slack"] = limit - measured
                c["worst_measured"] = measured
            if not ok and len(failures) < max_failure_dumps:
                failures.append({
                    "check": name,
                    "measured": None if is_error else measured,
                    "limit": limit,
                    "message": rec[4] if is_error else None,
                    "seed": int(config.seed),
                    "dim": r["dim"],
                    "trial": r["trial"],
                    "generator": r["generator"],
                    "pair_kind": r["pair_kind"],
                    "matrix": operator_to_json(r["T"]),
                })
    checks = dict(sorted(checks.items()))
    return CampaignReport(config.to_dict(), len(results), checks, failures, time.perf_counter() - t0)
