"""Online learning with expert advice where the experts themselves learn.

A forecaster repeatedly selects one of N experts, plays the action that
expert recommends, and suffers the adversary's loss for it.  Only the
selected expert can learn from the environment; the forecaster may
additionally gate that feedback so every expert learns at a constant rate
regardless of how often it is selected.  The package bundles the protocol
engine, expert learners, forecasters, adversary constructions (including
the three-sequence lower-bound instance), sparse-feedback convex learners,
and a reproducible experiment harness with a CLI.
"""

from .core import (
    ActionId,
    ConfigurationError,
    RegretReport,
    RunRecord,
    StepRecord,
    comparator_loss,
    export_steps_csv,
    regret_report,
    run_protocol,
    substream_seed,
)
from .experts import (
    BanditLoss,
    ExpertSpec,
    FeedbackInstance,
    FeedbackTypeError,
    FrozenPolicy,
    FullLocalLosses,
    GradientPayload,
    build_expert,
)
from .forecasters import (
    ExpWeightsForecaster,
    FixedExpertForecaster,
    ForecasterState,
    UniformForecaster,
    compute_probs,
    gate_probability,
    horizon_tuned_eta,
    loss_estimate,
    make_forecaster,
    weight_update,
)
from .scenarios import (
    HardnessTrio,
    PiecewiseTable,
    ScenarioError,
    ScenarioSpec,
    ScenarioTrace,
    build_hardness_trio,
    build_piecewise,
    build_stochastic,
    check_hardness_constraints,
    hardness_experts,
    load_scenario,
    perceived_gap_oracle,
    save_scenario,
)

__version__ = "0.1.0"
