"""Estimation toolkit for the variable elasticity of substitution (VES) production function."""

__version__ = "0.1.0"

from .errors import VesError
from .production import (
    CesParams,
    FactorPoint,
    HlForm,
    VesParams,
    elasticity_of_substitution,
    eval_ces,
    eval_ves,
    eval_ves_intensive,
    factor_prices,
    hl_to_ves,
    ode_residual,
    ves_to_hl,
)
from .linearization import (
    DegenerateFamily,
    LinearizationCoefficients,
    invert_linearization,
    linearize_ves,
)
from .regression import (
    FitResult,
    ModelSpec,
    build_design,
    fit_model,
    fit_ols,
    information_criteria,
    select_model,
    select_polynomial_degree,
    srmse,
)
from .data_io import PlantRecord, SynthConfig, generate, ingest, write_records
from .pipeline import (
    GroupEstimate,
    IndustryComparison,
    PipelineConfig,
    capital_by_state,
    compare_groups,
    estimate_group,
    mu_interpretation,
)
