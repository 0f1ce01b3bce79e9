"""Bell-test protocols and selection-bias examples with exact quantum oracles."""

__version__ = "0.1.0"

from .quantum import BellLabel, PureState, bell_state, correlation, joint_distribution, tensor
from .protocols import (
    CHSH_PAIRS,
    CHSH_STRATEGY,
    Ensemble,
    Geometry,
    SettingStrategy,
    equivalence_map,
    run_classical_charlie,
    run_hopper_sort,
    run_v_fixed,
    run_v_random,
    run_w_swap,
    zero_probability_combos,
)
from .stats import JointTable, chsh, compare_to_analytic, corr, fact_deviation, msm_delta, screening_off, tabulate

__all__ = [
    "BellLabel",
    "CHSH_PAIRS",
    "CHSH_STRATEGY",
    "Ensemble",
    "Geometry",
    "JointTable",
    "PureState",
    "SettingStrategy",
    "bell_state",
    "chsh",
    "compare_to_analytic",
    "corr",
    "correlation",
    "equivalence_map",
    "fact_deviation",
    "joint_distribution",
    "msm_delta",
    "run_classical_charlie",
    "run_hopper_sort",
    "run_v_fixed",
    "run_v_random",
    "run_w_swap",
    "screening_off",
    "tabulate",
    "tensor",
    "zero_probability_combos",
]
