"""Certified clean and almost *-clean decompositions in finite-dimensional C*-algebras."""

from .clean import (
    BlockCertificate,
    CleanCertificate,
    SplitBoundCertificate,
    almost_star_clean,
    clean_decompose,
    clean_split,
    idempotent_from,
    invert_via_splitting,
    verify_certificate,
)
from .errors import *  # noqa: F401,F403
from .kernel import (
    BlockOperator,
    ToleranceProfile,
    abs_value,
    corner_inverse,
    hermitian_eig,
    lift_blockwise,
    operator_norm,
    polar,
    smallest_singular_value,
    svd,
)
from .lattice import (
    PartialIsometry,
    Projection,
    comparison_test,
    equivalent,
    isometry_factor,
    join,
    kaplansky_isometry,
    left_projection,
    meet,
    right_projection,
    spectral_projection_leq,
)
from .twoproj import DifferenceInverseCertificate, PairDecomposition, build_p0, decompose_pair, difference_inverse, halmos_units

__version__ = "0.1.0"
