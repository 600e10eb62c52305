"""Compact dual SVD, quasi-metric low-rank approximation and dual pseudoinverse.

Dual matrices ``A = A_s + A_i ε`` (``ε² = 0``) are held as
:class:`DualMatrix` pairs of dense numpy arrays.
"""

__version__ = "0.1.0"

from .approx import (
    DmpgiResult,
    RankKApproximation,
    dmpgi,
    frobenius_rank_k_degeneracy_demo,
    optimal_rank_k_factors,
    penrose_residuals,
    rank_k_approx,
    truncated_cdsvd_vs_optimal,
)
from .cdsvd import (
    CdsvdResult,
    ExistenceCertificate,
    SingularBlockStructure,
    cdsvd_exists,
    compute_cdsvd,
    group_singular_values,
    normalize_gauge,
    project_to_feasible,
)
from .errors import (
    ContainerFormatError,
    DegenerateGapError,
    DimensionError,
    DualSvdError,
    InfeasibleError,
    InfinitesimalDivisionError,
    MultiplicityError,
    SingularStandardPartError,
)
from .io import parse_container, serialize_container
from .matrix import (
    DualMatrix,
    conj_transpose,
    dmat_mul,
    dual_frobenius_norm,
    dual_inverse,
    has_unitary_columns,
    quasi_metric,
    representative_form,
)
from .scalar import DualComplexScalar, DualScalar, dual_less_than, dual_mul, dual_positive, is_appreciable
from .waves import (
    RankRecoveryReport,
    SimilarityReport,
    WaveParams,
    WaveReport,
    build_dual_from_series,
    detect_waves,
    extract_traveling_wave,
    rank_recovery,
    similarity_analysis,
    synthesize_gaussian_grid_wave,
    synthesize_wave,
)
