"""JSON wire formats.

Matrix: ``{"dim": n, "entries": [[re, im], ...]}`` row-major, ``n*n`` pairs.
Block operator: ``{"blocks": [matrix, ...]}``.  Projections add
``"rank"``; pair decompositions and certificates are objects of named
matrices.  Floats are written with ``repr`` precision so a dump/load round
trip is bit exact.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np

from .clean import BlockCertificate, CleanCertificate, KINDS, SplitBoundCertificate
from .errors import CleanDecompError
from .kernel import BlockOperator, ToleranceProfile, as_matrix
from .lattice import Projection
from .twoproj import PairDecomposition


class FormatError(CleanDecompError, ValueError):
    """Malformed JSON document; the message names the offending line or field."""


def matrix_to_json(M) -> dict:
    M = np.asarray(M, dtype=np.complex128)
    flat = M.reshape(-1)
    return {"dim": int(M.shape[0]), "entries": [[float(z.real), float(z.imag)] for z in flat]}


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise FormatError(f"{where}: expected a number, got {type(x).__name__}")
    x = float(x)
    if not math.isfinite(x):
        raise FormatError(f"{where}: non-finite value")
    return x


def matrix_from_json(obj, where: str = "$") -> np.ndarray:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object with 'dim' and 'entries'")
    for key in ("dim", "entries"):
        if key not in obj:
            raise FormatError(f"{where}: missing field '{key}'")
    n = obj["dim"]
    if isinstance(n, bool) or not isinstance(n, int) or n <= 0:
        raise FormatError(f"{where}.dim: expected a positive integer, got {n!r}")
    entries = obj["entries"]
    if not isinstance(entries, list):
        raise FormatError(f"{where}.entries: expected a list")
    if len(entries) != n * n:
        raise FormatError(
            f"{where}.entries: expected {n * n} entries for a square {n}x{n} matrix, got {len(entries)}"
        )
    values = np.empty(n * n, dtype=np.complex128)
    for k, pair in enumerate(entries):
        if not isinstance(pair, list) or len(pair) != 2:
            raise FormatError(f"{where}.entries[{k}]: expected [re, im]")
        values[k] = complex(_number(pair[0], f"{where}.entries[{k}][0]"), _number(pair[1], f"{where}.entries[{k}][1]"))
    return as_matrix(values.reshape(n, n))


def block_to_json(X: BlockOperator) -> dict:
    return {"blocks": [matrix_to_json(b) for b in X.blocks]}


def operator_from_json(obj, where: str = "$"):
    """A matrix or, when the object has ``"blocks"``, a :class:`BlockOperator`."""
    if isinstance(obj, dict) and "blocks" in obj:
        blocks = obj["blocks"]
        if not isinstance(blocks, list) or not blocks:
            raise FormatError(f"{where}.blocks: expected a non-empty list of matrices")
        return BlockOperator([matrix_from_json(b, f"{where}.blocks[{i}]") for i, b in enumerate(blocks)])
    return matrix_from_json(obj, where)


def operator_to_json(X) -> dict:
    if isinstance(X, BlockOperator):
        return block_to_json(X)
    return matrix_to_json(X)


def projection_to_json(P: Projection) -> dict:
    out = matrix_to_json(P.matrix)
    out["rank"] = int(P.rank)
    return out


def projection_from_json(obj, tol: ToleranceProfile | None = None, where: str = "$") -> Projection:
    P = Projection.from_matrix(matrix_from_json(obj, where), tol)
    if "rank" in obj and obj["rank"] != P.rank:
        raise FormatError(f"{where}.rank: stated rank {obj['rank']!r} but trace gives {P.rank}")
    return P


def pair_to_json(pair: PairDecomposition) -> dict:
    return {
        "meetEF": projection_to_json(pair.meetEF),
        "meetEFp": projection_to_json(pair.meetEFp),
        "meetEpF": projection_to_json(pair.meetEpF),
        "meetEpFp": projection_to_json(pair.meetEpFp),
        "generic_unit": projection_to_json(pair.generic_unit),
        "E11": matrix_to_json(pair.E11),
        "E12": matrix_to_json(pair.E12),
        "E21": matrix_to_json(pair.E21),
        "E22": matrix_to_json(pair.E22),
        "H": matrix_to_json(pair.H),
        "h": [float(x) for x in pair.h],
        "residuals": {k: float(v) for k, v in pair.residuals().items()},
    }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    return x


def certificate_to_json(cert) -> dict:
    if isinstance(cert, BlockCertificate):
        return {
            "kind": cert.kind,
            "inverse_norm": cert.inverse_norm,
            "claimed_bound": cert.claimed_bound,
            "blocks": [certificate_to_json(c) for c in cert.blocks],
        }
    return {
        "kind": cert.kind,
        "summand": matrix_to_json(cert.summand),
        "inverse": matrix_to_json(cert.inverse),
        "inverse_norm": float(cert.inverse_norm),
        "claimed_bound": None if cert.claimed_bound is None else float(cert.claimed_bound),
        "residuals": {
            "idempotency": float(cert.idempotency_residual),
            "selfadjointness": float(cert.selfadjointness_residual),
            "inverse": float(cert.inverse_residual),
        },
        "lambda": float(cert.lam),
        "split_projection": projection_to_json(cert.split_projection),
        "branch": cert.branch,
        "lemma_bound": cert.lemma_bound,
        "summand_norm": float(cert.summand_norm),
        "te_norm": float(cert.te_norm),
        "degenerate": bool(cert.degenerate),
        "split_bound": None if cert.split is None else cert.split.to_dict(),
        "diagnostics": _jsonable({k: v for k, v in cert.extra.items() if k != "inverse_residual"}),
    }


def _field(obj, key, where):
    if key not in obj:
        raise FormatError(f"{where}: missing field '{key}'")
    return obj[key]


def certificate_from_json(obj, tol: ToleranceProfile | None = None, where: str = "$"):
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected a certificate object")
    if "blocks" in obj:
        blocks = obj["blocks"]
        if not isinstance(blocks, list) or not blocks:
            raise FormatError(f"{where}.blocks: expected a non-empty list")
        return BlockCertificate(tuple(certificate_from_json(b, tol, f"{where}.blocks[{i}]") for i, b in enumerate(blocks)))
    kind = _field(obj, "kind", where)
    if kind not in KINDS:
        raise FormatError(f"{where}.kind: unknown kind {kind!r}")
    residuals = _field(obj, "residuals", where)
    if not isinstance(residuals, dict):
        raise FormatError(f"{where}.residuals: expected an object")
    bound = obj.get("claimed_bound")
    split = obj.get("split_bound")
    sp = _field(obj, "split_projection", where)
    return CleanCertificate(
        summand=matrix_from_json(_field(obj, "summand", where), f"{where}.summand"),
        kind=kind,
        inverse=matrix_from_json(_field(obj, "inverse", where), f"{where}.inverse"),
        inverse_norm=_number(_field(obj, "inverse_norm", where), f"{where}.inverse_norm"),
        claimed_bound=None if bound is None else _number(bound, f"{where}.claimed_bound"),
        idempotency_residual=_number(_field(residuals, "idempotency", f"{where}.residuals"), f"{where}.residuals.idempotency"),
        selfadjointness_residual=_number(residuals.get("selfadjointness", 0.0), f"{where}.residuals.selfadjointness"),
        # the stored split projection is informational; keep it unchecked so
        # that verification reports on a tampered file rather than refusing it
        split_projection=Projection(
            matrix_from_json(sp, f"{where}.split_projection"), int(sp.get("rank", 0)), np.zeros((sp["dim"], 0))
        ),
        lam=_number(obj.get("lambda", 0.0), f"{where}.lambda"),
        branch=obj.get("branch", "split"),
        lemma_bound=obj.get("lemma_bound"),
        summand_norm=float(obj.get("summand_norm", 0.0)),
        te_norm=float(obj.get("te_norm", 0.0)),
        degenerate=bool(obj.get("degenerate", False)),
        split=None if split is None else SplitBoundCertificate(
            split["a1"], split["a2"], split["lambda"], split["s_norm"], split["t_norm"]
        ),
        extra={"inverse_residual": float(residuals.get("inverse", float("nan")))},
    )


def read_json(path) -> object:
    """Parse a JSON file, turning syntax errors into :class:`FormatError` with line/column."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


_PAIR = re.compile(r"\[\s*(-?[\w.+-]+),\s*(-?[\w.+-]+)\s*\]")


def dumps(obj) -> str:
    """Indented JSON with ``[re, im]`` pairs kept on one line."""
    return _PAIR.sub(r"[\1, \2]", json.dumps(obj, indent=1)) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))
