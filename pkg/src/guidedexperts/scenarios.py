"""Adversary generators: loss tables fixed before the run begins.

A scenario is the oblivious adversary's whole plan: per-step losses for
every action of every expert, the feedback variant each expert receives,
and an (inert) context token.  Builders produce piecewise-constant tables,
i.i.d. stochastic arms with optional mean drift, and the three-sequence
hardness construction in which a forecaster that feeds its experts
whenever it selects them leaves exploitable blind spots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .experts import ExpertSpec

FORMAT_VERSION = 1

#: Human-readable names for the hardness construction's actions.
HARDNESS_ACTION_NAMES = {(0, 0): "a1", (0, 1): "a2", (1, 0): "b"}


class ScenarioError(ValueError):
    """Raised when a scenario description is malformed or out of range."""


@dataclass(frozen=True)
class ScenarioTrace:
    """Materialized adversary plan: immutable once built.

    ``losses[j]`` has shape (T, K_j); ``feedback_kinds[j]`` names the payload
    variant expert j receives ("full", "bandit", or "gradient" -- for the
    gradient kind the payload is the local loss row, i.e. the gradient of the
    linear loss over the expert's local simplex).  The context token is
    constant; it is carried through the pipeline but plays no role here.
    """

    horizon: int
    losses: tuple[np.ndarray, ...]
    feedback_kinds: tuple[str, ...]
    context: object = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ScenarioError("horizon must be >= 1")
        for j, arr in enumerate(self.losses):
            if arr.shape[0] != self.horizon:
                raise ScenarioError(f"expert {j}: loss table has {arr.shape[0]} rows, horizon is {self.horizon}")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ScenarioError(f"expert {j}: losses must lie in [0, 1]")
            arr.setflags(write=False)

    @property
    def n_experts(self) -> int:
        return len(self.losses)

    def action_counts(self) -> tuple[int, ...]:
        return tuple(arr.shape[1] for arr in self.losses)

    def step_losses(self, t: int) -> dict[tuple[int, int], float]:
        """The loss map at step t, keyed by (expert, local action)."""
        return {(j, a): float(self.losses[j][t, a])
                for j in range(self.n_experts) for a in range(self.losses[j].shape[1])}


@dataclass(frozen=True)
class PiecewiseTable:
    """Per-action loss values constant on slots given by fractional boundaries."""

    boundaries: tuple[float, ...]
    values: Mapping[tuple[int, int], tuple[float, ...]]

    def __post_init__(self):
        b = self.boundaries
        if not b or b[-1] != 1.0 or any(y <= x for x, y in zip(b, b[1:])) or b[0] <= 0.0:
            raise ScenarioError("boundaries must be strictly increasing and end at 1")
        for key, vals in self.values.items():
            if len(vals) != len(b):
                raise ScenarioError(f"action {key}: expected {len(b)} slot values")
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ScenarioError(f"action {key}: values must lie in [0, 1]")

    @property
    def n_slots(self) -> int:
        return len(self.boundaries)

    def slot_edges(self, horizon: int) -> list[int]:
        """Step indices where each slot ends (exclusive), 0-based."""
        return [round(f * horizon) for f in self.boundaries]

    def slot_of(self, t: int, horizon: int) -> int:
        for s, edge in enumerate(self.slot_edges(horizon)):
            if t < edge:
                return s
        raise ScenarioError(f"step {t} outside horizon {horizon}")

    def action_column(self, key: tuple[int, int], horizon: int) -> np.ndarray:
        edges = self.slot_edges(horizon)
        col = np.empty(horizon)
        start = 0
        for s, edge in enumerate(edges):
            col[start:edge] = self.values[key][s]
            start = edge
        return col

    def cumulative(self, key: tuple[int, int], horizon: int) -> float:
        edges = self.slot_edges(horizon)
        total = 0.0
        start = 0
        for s, edge in enumerate(edges):
            total += (edge - start) * self.values[key][s]
            start = edge
        return total


def build_piecewise(table: PiecewiseTable, experts: Sequence[ExpertSpec], horizon: int) -> ScenarioTrace:
    """Materialize a piecewise table into a ScenarioTrace."""
    losses = []
    for spec in experts:
        cols = [table.action_column((spec.expert_index, a), horizon) for a in range(spec.k)]
        losses.append(np.column_stack(cols))
    return ScenarioTrace(horizon=horizon, losses=tuple(losses),
                         feedback_kinds=tuple(s.feedback_kind for s in experts))


def build_stochastic(experts: Sequence[ExpertSpec], means: Sequence[Sequence[float]],
                     horizon: int, seed: int, drift: float = 0.0) -> ScenarioTrace:
    """Bernoulli losses with per-action means, optionally drifting linearly.

    With nonzero ``drift`` the mean of every arm moves by +/- drift/2 across
    the horizon (clipped to [0, 1]).  Draws are fixed up front by ``seed``:
    the adversary commits to the whole table before the run.
    """
    rng = np.random.default_rng(seed)
    losses = []
    ramp = (np.arange(horizon) / max(horizon - 1, 1)) - 0.5
    for spec, arm_means in zip(experts, means):
        if len(arm_means) != spec.k:
            raise ScenarioError(f"expert {spec.expert_index}: {len(arm_means)} means for K={spec.k}")
        if any(not 0.0 <= m <= 1.0 for m in arm_means):
            raise ScenarioError("means must lie in [0, 1]")
        m = np.clip(np.asarray(arm_means)[None, :] + drift * ramp[:, None], 0.0, 1.0)
        losses.append((rng.random((horizon, spec.k)) < m).astype(float))
    return ScenarioTrace(horizon=horizon, losses=tuple(losses),
                         feedback_kinds=tuple(s.feedback_kind for s in experts))


# --- the hardness construction ---------------------------------------------

#: Slot boundaries of the hardness tables as fractions of the horizon.
HARDNESS_BOUNDARIES = (0.25, 0.5, 11.0 / 12.0, 1.0)


def hardness_experts() -> list[ExpertSpec]:
    """Two experts: a two-action multiplicative-weights learner and a singleton."""
    return [ExpertSpec(expert_index=0, kind="hedge", k=2),
            ExpertSpec(expert_index=1, kind="constant", k=1, local_index=0)]


@dataclass(frozen=True)
class HardnessTrio:
    """The three loss sequences the adversary picks among uniformly at t=0."""

    horizon: int
    delta: float
    tables: Mapping[str, PiecewiseTable]  # keys "L1", "L2", "L3"

    def scenario(self, which: str) -> ScenarioTrace:
        return build_piecewise(self.tables[which], hardness_experts(), self.horizon)


def build_hardness_trio(horizon: int, delta: float = 0.01) -> HardnessTrio:
    """Default instantiation of the three hardness sequences.

    L1's slot profile (slots [0, T/4], (T/4, T/2], (T/2, 11T/12], (11T/12, T]):
    a1 = (1, 0, 1/2, 0), a2 = (1/2, 1/2 - 3*delta/2, 1/2, 1/2),
    b = (3/4, 1/2 - 3*delta/2, 1/2, 1/2).  L2 equals L1 up to T/2 and then
    punishes the first expert (a1 = a2 = 1, b = 0); L3 equals L1 up to T/4
    and then punishes the second (a1 = 0, a2 = b = 1).
    """
    if horizon % 12 != 0:
        raise ScenarioError("horizon must be divisible by 12")
    if not 0.0 < delta <= 0.1:
        raise ScenarioError("delta must lie in (0, 0.1]")
    low = 0.5 - 1.5 * delta
    a1, a2, b = (0, 0), (0, 1), (1, 0)
    l1 = PiecewiseTable(HARDNESS_BOUNDARIES, {
        a1: (1.0, 0.0, 0.5, 0.0),
        a2: (0.5, low, 0.5, 0.5),
        b: (0.75, low, 0.5, 0.5),
    })
    l2 = PiecewiseTable(HARDNESS_BOUNDARIES, {
        a1: (1.0, 0.0, 1.0, 1.0),
        a2: (0.5, low, 1.0, 1.0),
        b: (0.75, low, 0.0, 0.0),
    })
    l3 = PiecewiseTable(HARDNESS_BOUNDARIES, {
        a1: (1.0, 0.0, 0.0, 0.0),
        a2: (0.5, 1.0, 1.0, 1.0),
        b: (0.75, 1.0, 1.0, 1.0),
    })
    return HardnessTrio(horizon=horizon, delta=delta, tables={"L1": l1, "L2": l2, "L3": l3})


def check_hardness_constraints(trio: HardnessTrio) -> list[str]:
    """Validate a trio against the constraints the construction must satisfy.

    Returns a list of violation messages (empty iff the trio is valid):

    * all tables share the slot structure and cover actions a1, a2, b;
    * all losses lie in [0, 1];
    * L3 equals L1 on [0, T/4] and L2 equals L1 on [0, T/2];
    * on L1, a1's cumulative loss equals 11T/24 exactly;
    * on L1, the floor 1/2 - 3*delta/2 holds on slot 2 for a2 and b (a1 is
      pinned to 0 there by the cumulative constraint and is perceived as
      dominated, so no run that behaves consistently with L1 plays it);
    * on L1, every action is at least 1/2 on slots 1 and 3;
    * on L1, a2 costs exactly 1/2 on the final slot;
    * on L1, a1 is the strict cumulative minimizer.
    """
    out: list[str] = []
    T, delta = trio.horizon, trio.delta
    a1, a2, b = (0, 0), (0, 1), (1, 0)
    actions = (a1, a2, b)
    for name in ("L1", "L2", "L3"):
        if name not in trio.tables:
            out.append(f"missing table {name}")
            return out
        tab = trio.tables[name]
        if tab.boundaries != HARDNESS_BOUNDARIES:
            out.append(f"{name}: slot boundaries differ from (1/4, 1/2, 11/12, 1)")
        for key in actions:
            if key not in tab.values:
                out.append(f"{name}: missing action {HARDNESS_ACTION_NAMES[key]}")
                return out
            if any(not 0.0 <= v <= 1.0 for v in tab.values[key]):
                out.append(f"{name}: {HARDNESS_ACTION_NAMES[key]} loss out of [0, 1]")
    l1, l2, l3 = trio.tables["L1"], trio.tables["L2"], trio.tables["L3"]
    for key in actions:
        if l3.values[key][0] != l1.values[key][0]:
            out.append(f"L3 prefix: {HARDNESS_ACTION_NAMES[key]} differs from L1 on slot 1")
        if l2.values[key][:2] != l1.values[key][:2]:
            out.append(f"L2 prefix: {HARDNESS_ACTION_NAMES[key]} differs from L1 on slots 1-2")
    if abs(l1.cumulative(a1, T) - 11.0 * T / 24.0) > 1e-9:
        out.append("L1: a1 cumulative != 11T/24")
    floor2 = 0.5 - 1.5 * delta
    for key in (a2, b):
        nm = HARDNESS_ACTION_NAMES[key]
        if l1.values[key][1] < floor2 - 1e-12:
            out.append(f"L1 slot 2: {nm} below 1/2 - 3*delta/2")
        if l1.values[key][0] < 0.5 - 1e-12:
            out.append(f"L1 slot 1: {nm} below 1/2")
        if l1.values[key][2] < 0.5 - 1e-12:
            out.append(f"L1 slot 3: {nm} below 1/2")
    if l1.values[a1][0] < 0.5 - 1e-12:
        out.append("L1 slot 1: a1 below 1/2")
    if l1.values[a1][2] < 0.5 - 1e-12:
        out.append("L1 slot 3: a1 below 1/2")
    if l1.values[a2][3] != 0.5:
        out.append("L1 slot 4: a2 != 1/2")
    cums = {key: l1.cumulative(key, T) for key in actions}
    if not (cums[a1] < cums[a2] and cums[a1] < cums[b]):
        out.append("L1: a1 not the strict cumulative minimizer")
    return out


def perceived_gap_oracle(trio: HardnessTrio, blocked_steps: set[int]) -> float:
    """Cumulative a1-minus-a2 loss over the steps the first expert observed.

    Direct summation over L1 of l(a1) - l(a2) for 0-based steps t < 11T/12
    not in ``blocked_steps``; this is the perceived ordering a
    cumulative-loss learner holds at the start of the final slot under any
    feedback-blocking pattern (positive means a1 looks worse).
    """
    T = trio.horizon
    l1 = trio.tables["L1"]
    col_a1 = l1.action_column((0, 0), T)
    col_a2 = l1.action_column((0, 1), T)
    cutoff = round(11.0 * T / 12.0)
    total = 0.0
    for t in range(cutoff):
        if t not in blocked_steps:
            total += col_a1[t] - col_a2[t]
    return total


# --- scenario files ---------------------------------------------------------

def _expert_to_json(spec: ExpertSpec) -> dict:
    return {"index": spec.expert_index, "kind": spec.kind, "k": spec.k,
            "local_index": spec.local_index}


def _expert_from_json(obj: dict) -> ExpertSpec:
    return ExpertSpec(expert_index=obj["index"], kind=obj["kind"], k=obj["k"],
                      local_index=obj.get("local_index", 0))


@dataclass(frozen=True)
class ScenarioSpec:
    """Serializable scenario description: piecewise table or stochastic arms."""

    kind: str  # "piecewise" | "stochastic"
    horizon: int
    experts: tuple[ExpertSpec, ...]
    table: PiecewiseTable | None = None
    means: tuple[tuple[float, ...], ...] | None = None
    drift: float = 0.0
    seed: int = 0

    def build(self) -> ScenarioTrace:
        if self.kind == "piecewise":
            return build_piecewise(self.table, self.experts, self.horizon)
        if self.kind == "stochastic":
            return build_stochastic(self.experts, self.means, self.horizon, self.seed, self.drift)
        raise ScenarioError(f"unknown scenario kind {self.kind!r}")

    def with_horizon(self, horizon: int) -> "ScenarioSpec":
        return ScenarioSpec(kind=self.kind, horizon=horizon, experts=self.experts,
                            table=self.table, means=self.means, drift=self.drift, seed=self.seed)


def scenario_to_json(spec: ScenarioSpec) -> dict:
    obj = {"version": FORMAT_VERSION, "kind": spec.kind, "T": spec.horizon,
           "experts": [_expert_to_json(e) for e in spec.experts]}
    if spec.kind == "piecewise":
        obj["slots"] = list(spec.table.boundaries)
        obj["losses"] = {f"{j}:{a}": list(vals) for (j, a), vals in spec.table.values.items()}
    else:
        obj["means"] = [list(m) for m in spec.means]
        obj["drift"] = spec.drift
        obj["seed"] = spec.seed
    return obj


def scenario_from_json(obj: dict) -> ScenarioSpec:
    if obj.get("version") != FORMAT_VERSION:
        raise ScenarioError(f"unsupported scenario format version {obj.get('version')!r}")
    experts = tuple(_expert_from_json(e) for e in obj["experts"])
    if obj["kind"] == "piecewise":
        values = {}
        for key, vals in obj["losses"].items():
            j, a = key.split(":")
            values[(int(j), int(a))] = tuple(vals)
        table = PiecewiseTable(tuple(obj["slots"]), values)
        return ScenarioSpec(kind="piecewise", horizon=obj["T"], experts=experts, table=table)
    if obj["kind"] == "stochastic":
        return ScenarioSpec(kind="stochastic", horizon=obj["T"], experts=experts,
                            means=tuple(tuple(m) for m in obj["means"]),
                            drift=obj.get("drift", 0.0), seed=obj.get("seed", 0))
    raise ScenarioError(f"unknown scenario kind {obj['kind']!r}")


def save_scenario(spec: ScenarioSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_json(spec), fh, indent=2)
        fh.write("\n")


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        return scenario_from_json(json.load(fh))


def trio_to_json(trio: HardnessTrio) -> dict:
    return {"version": FORMAT_VERSION, "kind": "hardness-trio", "T": trio.horizon,
            "delta": trio.delta,
            "tables": {name: {"slots": list(tab.boundaries),
                              "losses": {f"{j}:{a}": list(v) for (j, a), v in tab.values.items()}}
                       for name, tab in trio.tables.items()}}


def trio_from_json(obj: dict) -> HardnessTrio:
    if obj.get("kind") != "hardness-trio":
        raise ScenarioError("not a hardness-trio file")
    tables = {}
    for name, tab in obj["tables"].items():
        values = {}
        for key, vals in tab["losses"].items():
            j, a = key.split(":")
            values[(int(j), int(a))] = tuple(vals)
        tables[name] = PiecewiseTable(tuple(tab["slots"]), values)
    return HardnessTrio(horizon=obj["T"], delta=obj["delta"], tables=tables)


def save_trio(trio: HardnessTrio, path) -> None:
    with open(path, "w") as fh:
        json.dump(trio_to_json(trio), fh, indent=2)
        fh.write("\n")


def load_trio(path) -> HardnessTrio:
    with open(path) as fh:
        return trio_from_json(json.load(fh))
