"""Protocol engine and regret accounting.

One round of the interaction: the forecaster selects an expert, plays the
expert's recommended action, incurs that action's loss, and updates its
selection state; the selected expert then observes its feedback payload --
always, or only when the forecaster's feedback gate fires -- while every
other expert's state is untouched.

Randomness is split into named substreams derived from the master seed
(selection draws, gate draws, one stream per expert), so switching the
gate on or off never perturbs the selection trajectory, and adding a new
consumer never reshuffles existing ones.
"""

from __future__ import annotations

import csv
import hashlib
import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .experts import (
    BanditLoss,
    ExpertSpec,
    FeedbackInstance,
    FrozenPolicy,
    FullLocalLosses,
    GradientPayload,
    build_expert,
)
from .scenarios import ScenarioTrace


class ConfigurationError(ValueError):
    """Experts, forecaster, and scenario do not fit together."""


def substream_seed(master: int, label: str) -> int:
    """A 64-bit child seed derived from (master, label), stable across runs."""
    digest = hashlib.blake2b(f"{master}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class ActionId:
    """Global identity of an action: owning expert plus local index."""

    expert_index: int
    local_index: int


@dataclass(frozen=True)
class StepRecord:
    """What happened at one protocol step."""

    t: int
    selected: int
    prob: float
    action: ActionId
    loss: float
    gate: bool


@dataclass
class RunRecord:
    """Column-oriented log of one protocol execution."""

    seed: int
    mode: str
    horizon: int
    selected: np.ndarray
    probs: np.ndarray
    actions: np.ndarray
    losses: np.ndarray
    gates: np.ndarray
    cumulative_loss: float
    weights_log: np.ndarray | None = None
    expert_mean_losses: np.ndarray | None = None

    def record(self, t: int) -> StepRecord:
        return StepRecord(t=t, selected=int(self.selected[t]), prob=float(self.probs[t]),
                          action=ActionId(int(self.selected[t]), int(self.actions[t])),
                          loss=float(self.losses[t]), gate=bool(self.gates[t]))

    def __len__(self) -> int:
        return self.horizon


@dataclass(frozen=True)
class RegretReport:
    """Mean forecaster loss against the best expert's comparator loss."""

    forecaster_loss_mean: float
    comparator_losses: dict[int, float]
    regret: float
    n_seeds: int
    stderr: float


def _make_payload(kind: str, row, action: int):
    if kind == "full":
        return FullLocalLosses(tuple(row))
    if kind == "bandit":
        return BanditLoss(row[action])
    if kind == "gradient":
        return GradientPayload(tuple(row))
    raise ConfigurationError(f"unknown feedback kind {kind!r}")


def _validate(scenario: ScenarioTrace, forecaster, experts, mode: str) -> None:
    if mode not in ("always_feed", "gated"):
        raise ConfigurationError(f"mode must be 'always_feed' or 'gated', got {mode!r}")
    if len(experts) != scenario.n_experts or len(experts) < 1:
        raise ConfigurationError(
            f"{len(experts)} experts for a scenario with {scenario.n_experts}")
    if getattr(forecaster, "n", None) != len(experts):
        raise ConfigurationError("forecaster sized for a different expert count")
    for j, (expert, k) in enumerate(zip(experts, scenario.action_counts())):
        if expert.k != k:
            raise ConfigurationError(f"expert {j} has {expert.k} actions, scenario has {k}")
        if expert.spec.feedback_kind != scenario.feedback_kinds[j]:
            raise ConfigurationError(
                f"expert {j} consumes {expert.spec.feedback_kind!r} feedback, "
                f"scenario provides {scenario.feedback_kinds[j]!r}")
    if mode == "gated" and not getattr(forecaster, "gated", False):
        raise ConfigurationError("gated mode needs a forecaster with a feedback gate")


def run_protocol(scenario: ScenarioTrace, forecaster, experts: Sequence, seed: int,
                 mode: str = "always_feed", log_weights: bool = False,
                 log_expert_means: bool = False) -> RunRecord:
    """Execute one full run; deterministic in (scenario, seed, configs).

    The forecaster and experts are consumed: they are stepped in place and
    hold their final states afterwards.  With ``log_weights`` the
    forecaster's log-weight trajectory is recorded (exponential-weights
    forecasters only); with ``log_expert_means`` each expert's expected
    loss under its current policy is recorded at every step, which is what
    the post-hoc external-regret comparison consumes.
    """
    _validate(scenario, forecaster, experts, mode)
    if log_weights and not hasattr(forecaster, "state"):
        raise ConfigurationError("log_weights needs an exponential-weights forecaster")
    T = scenario.horizon
    n = len(experts)
    sel_rng = random.Random(substream_seed(seed, "select"))
    gate_rng = random.Random(substream_seed(seed, "gate"))
    exp_rngs = [random.Random(substream_seed(seed, f"expert{j}")) for j in range(n)]
    loss_rows = [arr.tolist() for arr in scenario.losses]
    kinds = scenario.feedback_kinds
    ctx = scenario.context
    gated = mode == "gated"

    sel_log = np.empty(T, dtype=np.int32)
    prob_log = np.empty(T)
    act_log = np.empty(T, dtype=np.int32)
    loss_log = np.empty(T)
    gate_log = np.empty(T, dtype=bool)
    weights = np.empty((T, n)) if log_weights else None
    expert_means = np.empty((T, n)) if log_expert_means else None

    cum = 0.0
    for t in range(T):
        probs = forecaster.probs()
        if log_weights:
            weights[t] = forecaster.state.log_weights
        if log_expert_means:
            for j in range(n):
                d = experts[j].distribution()
                row_j = loss_rows[j][t]
                expert_means[t, j] = sum(p * v for p, v in zip(d, row_j))
        r = sel_rng.random()
        i = 0
        acc = probs[0]
        while r >= acc and i < n - 1:
            i += 1
            acc += probs[i]
        a = experts[i].recommend(exp_rngs[i])
        row = loss_rows[i][t]
        loss = row[a]
        forecaster.update(i, probs, loss)
        if gated:
            fire = gate_rng.random() < forecaster.gate_probability(i, probs)
        else:
            fire = True
        if fire:
            experts[i].observe(FeedbackInstance(i, a, ctx, _make_payload(kinds[i], row, a)))
        cum += loss
        sel_log[t] = i
        prob_log[t] = probs[i]
        act_log[t] = a
        loss_log[t] = loss
        gate_log[t] = fire

    return RunRecord(seed=seed, mode=mode, horizon=T, selected=sel_log, probs=prob_log,
                     actions=act_log, losses=loss_log, gates=gate_log, cumulative_loss=cum,
                     weights_log=weights, expert_mean_losses=expert_means)


# Expert kinds whose feedback payload does not depend on their own action
# draws: their full-feedback learning roll is deterministic given the
# scenario, so it is shared across comparator seeds.
_ACTION_INDEPENDENT_FEEDBACK = {"constant", "hedge", "ogd"}


def _roll_frozen(spec: ExpertSpec, scenario: ScenarioTrace, rng: random.Random) -> FrozenPolicy:
    """Train a fresh expert on the full scenario with feedback at every step."""
    j = spec.expert_index
    expert = build_expert(spec)
    rows = scenario.losses[j].tolist()
    kind = scenario.feedback_kinds[j]
    ctx = scenario.context
    for t in range(scenario.horizon):
        a = expert.recommend(rng)
        expert.observe(FeedbackInstance(j, a, ctx, _make_payload(kind, rows[t], a)))
    return expert.freeze()


def comparator_loss(spec: ExpertSpec, scenario: ScenarioTrace, seeds: Sequence[int]) -> float:
    """Expected loss of one expert trained with feedback at every step.

    Phase 1 rolls the expert over the whole scenario fully fed; phase 2
    freezes the resulting policy and replays it over all steps with a fresh
    action draw per step.  The mean over seeds estimates the expectation
    over the expert's internal randomization; for experts whose feedback
    does not depend on their own draws the phase-1 roll is deterministic
    and computed once.
    """
    if not seeds:
        raise ValueError("comparator_loss needs at least one seed")
    j = spec.expert_index
    arr = scenario.losses[j]
    shared = spec.kind in _ACTION_INDEPENDENT_FEEDBACK
    frozen = None
    if shared:
        frozen = _roll_frozen(spec, scenario, random.Random(substream_seed(0, f"cmp-roll-{j}")))
    totals = []
    for s in seeds:
        if not shared:
            frozen = _roll_frozen(spec, scenario, random.Random(substream_seed(s, f"cmp-roll-{j}")))
        replay_rng = np.random.default_rng(substream_seed(s, f"cmp-replay-{j}"))
        totals.append(frozen.replay(arr, replay_rng))
    return float(np.mean(totals))


def regret_report(runs: Sequence[RunRecord], comparators: Mapping[int, float]) -> RegretReport:
    """Mean cumulative loss of the runs against the best comparator."""
    if not runs:
        raise ValueError("regret_report needs at least one run")
    if not comparators:
        raise ValueError("regret_report needs comparator losses")
    totals = [r.cumulative_loss for r in runs]
    mean = float(np.mean(totals))
    stderr = float(np.std(totals, ddof=1) / math.sqrt(len(totals))) if len(totals) > 1 else 0.0
    best = min(comparators.values())
    return RegretReport(forecaster_loss_mean=mean, comparator_losses=dict(comparators),
                        regret=mean - best, n_seeds=len(runs), stderr=stderr)


def export_steps_csv(path, runs: Sequence[RunRecord], run_ids: Sequence[int] | None = None) -> None:
    """Per-step log as CSV; floats printed with full round-trip precision."""
    ids = run_ids if run_ids is not None else range(len(runs))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "seed", "t", "selected_expert", "action_expert",
                         "action_local", "prob", "loss", "gate", "cumulative_loss"])
        for rid, run in zip(ids, runs):
            cum = 0.0
            for t in range(run.horizon):
                cum += float(run.losses[t])
                writer.writerow([rid, run.seed, t, int(run.selected[t]), int(run.selected[t]),
                                 int(run.actions[t]), repr(float(run.probs[t])),
                                 repr(float(run.losses[t])), int(run.gates[t]), repr(cum)])
