"""Compositional multivariate dynamic linear models for Bayesian
counterfactual causal prediction with synthetic controls."""

__version__ = "0.1.0"

from .causal import (
    DEFAULT_PROBS,
    EFFECT_MODES,
    PREDICTIVE_VS_PREDICTIVE,
    REALIZED_VS_COUNTERFACTUAL,
    CausalRun,
    CausalSpec,
    QuantileSummary,
    filtered_effect,
    lift_transform,
    lookahead_effect,
    predictive_effect,
    run_causal,
    summarize,
)
from .compositional import (
    CompSpec,
    CompState,
    comp_evolve,
    comp_filter_run,
    comp_forecast_k_step,
    comp_forecast_mc,
    comp_update_c_only,
    comp_update_full,
)
from .datagen import SimConfig, SimOutput, aggregate_groups, simulate, svd_stratify
from .dataset import Panel, load_dataset
from .matvar import (
    CniwParams,
    GammaPsi,
    IwParams,
    MnParams,
    PartitionedIw,
    cniw_logpdf,
    cniw_sample,
    gamma_psi_from_sigma,
    iw_logpdf,
    iw_sample,
    iw_sample_batch,
    mn_logpdf,
    mn_sample,
    niw_sample,
    niw_to_cniw,
    partition_iw,
)
from .mvdlm import (
    ModelSpec,
    NiwState,
    TForecast,
    evolve,
    filter_run,
    forecast_one_step,
    initial_state,
    update,
)

__all__ = [name for name in dir() if not name.startswith("_")]
