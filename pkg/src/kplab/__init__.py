"""Spectral laboratory for the generalized-dispersion KP-II equation on T x R."""

__version__ = "0.1.0"

from .symbols import (  # noqa: F401
    DispersionParams,
    FrequencyPoint,
    ModulationPoint,
    ResonanceRecord,
    denom_A,
    denom_B,
    phase,
    phi0,
    phi1,
    phi2,
    phi3,
    resonance_bounds_audit,
    resonance_identity,
    resonance_r,
)
from .fields import (  # noqa: F401
    BandSpec,
    GridSpec,
    NormSpec,
    SpaceTimeField,
    SpectralField,
    bourgain_norm,
    make_grid,
    mixed_norm,
    project_mean_zero,
    random_field,
    sobolev_norm,
    to_physical,
    to_spectral,
)
from .evolution import (  # noqa: F401
    CutoffSpec,
    SolveConfig,
    evolve_nonlinear,
    free_block,
    free_evolve,
    nonlinearity,
    picard_solve,
)
from .estimates import (  # noqa: F401
    CounterexampleConfig,
    RatioSample,
    ScalingFit,
    adversarial_pair,
    bilinear_ratio,
    counterexample_lhs,
    counterexample_verdict,
    fit_exponent,
    strichartz2d_ratio,
    strichartz3d_ratio,
)
from .illposed import (  # noqa: F401
    IllposedConfig,
    build_wN,
    first_derivative,
    illposed_scaling,
    second_derivative,
    third_derivative_norm,
)
