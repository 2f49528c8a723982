"""Quantum Fisher information for the spacing of a stretched 1-D emitter array."""
from .closed_form import (
    Coherent,
    EntangledOddEven,
    Method,
    OptimalNoon,
    QfiResult,
    Spe,
    Thermal,
    qcrb,
    qfi_closed,
    qfi_coherent_limit,
    qfi_coherent_series,
    qfi_entangled_odd_even,
    qfi_optimal,
    qfi_spe,
    qfi_thermal,
    ratio_summary,
)
from .errors import *  # noqa: F401,F403
from .estimator import CountingModel, cfi_quadrature, estimator_moments, photon_count_pdf, sld_pure
from .geometry import (
    Deformation,
    EmitterArray,
    deformed_positions,
    position_derivatives,
    source_positions,
    sum_sq_derivatives,
)
from .identities import appendix_a_identity_suite, appendix_b_vev_suite
from .oracle import (
    FidelityEstimate,
    fidelity_qfi,
    noon_variance_oracle,
    poisson_moment_oracle,
    state_overlap,
    thermal_series_oracle,
)
from .overlap import (
    Engine,
    EngineConfig,
    PairOverlapMatrix,
    pair_overlap_matrix,
    perm_sum_norm,
    qfi_overlap,
    term_b,
    term_c,
)
from .permanent import permanent

__version__ = "0.1.0"
