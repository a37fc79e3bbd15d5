"""Embedding flows for hyperbolic polynomial jets."""

from .scalars import EigenScalar, ExactnessError, PiPoly, QQi
from .jets import (
    MODE_EXACT,
    MODE_FLOAT,
    ConjugateSymmetryError,
    MultiIndex,
    PolyJet,
    RealPairing,
    compose,
    complexify,
    jacobian_apply,
    jet_distance,
    lex_sort_key,
    multiindices,
    permute_jet,
    realify,
)
from .spectral import (
    BlockMatrix,
    BranchChoice,
    EigenData,
    JordanBlock,
    LogBlock,
    NegativePairBlock,
    RotationBlock,
    SpectralError,
    TriangularLinear,
    block_matrix_from_dense,
    dense_exp,
    has_real_log,
    is_hyperbolic,
    pair_negative_blocks,
    real_log,
    weakly_nonresonant_branch,
)
from .resonance import (
    ResonanceReport,
    field_resonances,
    map_resonances,
    operator_L_field_spectrum,
    operator_L_map_spectrum,
)
from .normal_form import (
    GermSpec,
    NearResonanceError,
    NormalFormResult,
    distinguished_normal_form,
    homological_solve,
)
from .exppoly import ExpPoly
from .embedding import (
    FieldGerm,
    FlowJet,
    Obstruction,
    Tr_matrix,
    appendix_identity_check,
    embedding_residual,
    exp_B_matrix,
    exp_tB_jet_matrix,
    flow_jet,
    solve_embedding,
    time_one_check,
    time_one_residuals,
)
from .classify import (
    PlanarVerdict,
    classify_2d,
    planar_from_dense,
    positive_spectrum_log,
)
from .germfile import GermFile, GermParseError, parse_germ, serialize_germ
from .reports import Report, fmt_complex, fmt_entry, fmt_monomial, parse_machine

__version__ = "0.1.0"
