import json

import numpy as np
import pytest

from cleandecomp.clean import almost_star_clean, clean_decompose, verify_certificate
from cleandecomp.kernel import BlockOperator
from cleandecomp.lattice import Projection
from cleandecomp.serialization import (
    FormatError,
    certificate_from_json,
    certificate_to_json,
    dumps,
    matrix_from_json,
    matrix_to_json,
    operator_from_json,
    operator_to_json,
    projection_from_json,
    projection_to_json,
    read_json,
)

from conftest import e, ginibre


def through_text(obj):
    return json.loads(dumps(obj))


def test_matrix_round_trip_bit_exact(rng):
    for n in (1, 2, 7):
        M = ginibre(rng, n) * 1e-7 + 1e5 * ginibre(rng, n)
        np.testing.assert_array_equal(matrix_from_json(through_text(matrix_to_json(M))), M)


def test_layout_row_major():
    M = np.array([[1, 2j], [3, 4]])
    assert matrix_to_json(M)["entries"] == [[1.0, 0.0], [0.0, 2.0], [3.0, 0.0], [4.0, 0.0]]


def test_pairs_on_one_line():
    M = np.array([[1.5, complex(0.0, -2e-300)], [3, 4]])
    text = dumps(matrix_to_json(M))
    assert "[1.5, 0.0]" in text and "[0.0, -2e-300]" in text
    assert json.loads(text)["entries"][1] == [0.0, -2e-300]


@pytest.mark.parametrize(
    "obj, fragment",
    [
        ([1, 2], "expected an object"),
        ({"dim": 2}, "missing field 'entries'"),
        ({"dim": 2, "entries": [[0, 0]] * 3}, "expected 4 entries"),
        ({"dim": 0, "entries": []}, "positive integer"),
        ({"dim": 1, "entries": [[0]]}, "entries[0]"),
        ({"dim": 1, "entries": [["x", 0]]}, "entries[0][0]"),
        ({"dim": 1, "entries": [[True, 0]]}, "expected a number"),
    ],
)
def test_matrix_errors(obj, fragment):
    with pytest.raises(FormatError, match=".*" + fragment.replace("[", r"\[").replace("]", r"\]")):
        matrix_from_json(obj)


def test_block_round_trip(rng):
    X = BlockOperator([ginibre(rng, 2), ginibre(rng, 1)])
    Y = operator_from_json(through_text(operator_to_json(X)))
    assert isinstance(Y, BlockOperator)
    for a, b in zip(X.blocks, Y.blocks):
        np.testing.assert_array_equal(a, b)


def test_empty_blocks():
    with pytest.raises(FormatError):
        operator_from_json({"blocks": []})


def test_projection_rank_check():
    obj = projection_to_json(Projection.from_matrix(e(1, 1)))
    assert projection_from_json(obj).rank == 1
    obj["rank"] = 2
    with pytest.raises(FormatError, match="rank"):
        projection_from_json(obj)


@pytest.mark.parametrize("fn", [clean_decompose, almost_star_clean])
def test_certificate_round_trip(rng, fn):
    T = ginibre(rng, 4) * 2
    cert = fn(T)
    back = certificate_from_json(through_text(certificate_to_json(cert)))
    np.testing.assert_array_equal(back.summand, cert.summand)
    np.testing.assert_array_equal(back.inverse, cert.inverse)
    assert back.inverse_norm == cert.inverse_norm
    assert back.kind == cert.kind
    assert verify_certificate(T, back).passed


def test_block_certificate_round_trip():
    T = BlockOperator([e(1, 2), np.array([[0.2]])])
    cert = clean_decompose(T)
    back = certificate_from_json(through_text(certificate_to_json(cert)))
    assert back.block_dims == (2, 1)
    assert verify_certificate(T, back).passed


def test_certificate_unknown_kind():
    obj = certificate_to_json(clean_decompose(e(1, 2)))
    obj["kind"] = "unit_regular"
    with pytest.raises(FormatError, match="kind"):
        certificate_from_json(obj)


def test_read_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "dim": 2,\n "entries": [1, \n}')
    with pytest.raises(FormatError, match="line 4"):
        read_json(p)
