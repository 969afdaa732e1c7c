"""Expert policies: learners over their own local action sets.

Each expert owns a small action set and an online learning rule fed by
FeedbackInstance records.  State evolves only through ``observe``;
``recommend`` samples from the current policy without changing it, so an
expert's behaviour is a pure function of the feedback it has seen plus
its private random stream.

Covered learning rates (average regret O(t^(beta-1)) under full feedback):
constant actions (beta = 0), multiplicative weights over full local loss
vectors and bandit-feedback exponential weights (beta = 1/2), and a
projected-gradient learner on the local simplex (beta = 1/2) that reuses
the sparse-feedback convex machinery.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Union

import numpy as np

from .convex import project_simplex


# --- feedback payloads -------------------------------------------------

@dataclass(frozen=True)
class FullLocalLosses:
    """Losses of every local action of the owning expert at one step."""

    values: tuple[float, ...]


@dataclass(frozen=True)
class BanditLoss:
    """The loss of the single action the expert just played."""

    value: float


@dataclass(frozen=True)
class GradientPayload:
    """A gradient vector over the expert's local simplex."""

    values: tuple[float, ...]


FeedbackPayload = Union[FullLocalLosses, BanditLoss, GradientPayload]


@dataclass(frozen=True)
class FeedbackInstance:
    """One observed feedback record: (action, context, payload)."""

    expert_index: int
    local_action: int
    context: object
    payload: FeedbackPayload


class FeedbackTypeError(TypeError):
    """Raised when an expert receives a payload variant it cannot consume."""


# --- expert specs -------------------------------------------------------

_DEFAULT_BETA = {"constant": 0.0, "hedge": 0.5, "exp3": 0.5, "ogd": 0.5}
_FEEDBACK_KIND = {"constant": "bandit", "hedge": "full", "exp3": "bandit", "ogd": "gradient"}


@dataclass(frozen=True)
class ExpertSpec:
    """Configuration of one expert: identity, learner kind, action count."""

    expert_index: int
    kind: str
    k: int
    beta: float | None = None
    local_index: int = 0

    def __post_init__(self):
        if self.kind not in _DEFAULT_BETA:
            raise ValueError(f"unknown expert kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.kind == "constant" and not 0 <= self.local_index < self.k:
            raise ValueError("constant expert's local_index out of range")
        if self.beta is not None:
            expected = _DEFAULT_BETA[self.kind]
            if self.beta != expected:
                raise ValueError(f"{self.kind} expert must have beta={expected}")

    @property
    def effective_beta(self) -> float:
        return self.beta if self.beta is not None else _DEFAULT_BETA[self.kind]

    @property
    def feedback_kind(self) -> str:
        return _FEEDBACK_KIND[self.kind]


@dataclass(frozen=True)
class FrozenPolicy:
    """A recommendation distribution captured at a point in time."""

    probs: tuple[float, ...]

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("frozen policy probabilities must sum to 1")

    @property
    def deterministic_action(self) -> int | None:
        for i, p in enumerate(self.probs):
            if p == 1.0:
                return i
        return None

    def replay(self, losses: np.ndarray, rng: np.random.Generator) -> float:
        """Sum losses over a whole trace with a fresh action draw per step.

        ``losses`` has shape (T, K).  Deterministic policies skip sampling.
        """
        det = self.deterministic_action
        if det is not None:
            return float(losses[:, det].sum())
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        draws = np.searchsorted(cdf, rng.random(losses.shape[0]), side="right")
        return float(losses[np.arange(losses.shape[0]), draws].sum())


# --- learner implementations -------------------------------------------

class ConstantExpert:
    """Always recommends the same local action; feedback is ignored."""

    def __init__(self, spec: ExpertSpec):
        self.spec = spec
        self.k = spec.k
        self.action = spec.local_index
        self.history: list[FeedbackInstance] = []

    def recommend(self, rng: random.Random) -> int:
        return self.action

    def distribution(self) -> list[float]:
        d = [0.0] * self.k
        d[self.action] = 1.0
        return d

    def observe(self, instance: FeedbackInstance) -> None:
        self.history.append(instance)

    def freeze(self) -> FrozenPolicy:
        return FrozenPolicy(tuple(self.distribution()))


class HedgeExpert:
    """Multiplicative weights over the local actions from full loss vectors.

    Sampling rule: softmax of -eta_H(tau) * cumulative_losses with the
    anytime rate eta_H(tau) = sqrt(8 ln K / max(tau, 1)), where tau counts
    observed feedback instances.  Before any feedback the play is uniform.
    """

    def __init__(self, spec: ExpertSpec):
        self.spec = spec
        self.k = spec.k
        self.cum_losses = [0.0] * spec.k
        self.tau = 0
        self.history: list[FeedbackInstance] = []

    def _rate(self) -> float:
        return math.sqrt(8.0 * math.log(self.k) / max(self.tau, 1)) if self.k > 1 else 0.0

    def distribution(self) -> list[float]:
        if self.k == 1:
            return [1.0]
        eta = self._rate()
        scores = [-eta * c for c in self.cum_losses]
        m = max(scores)
        ws = [math.exp(s - m) for s in scores]
        total = sum(ws)
        return [w / total for w in ws]

    def recommend(self, rng: random.Random) -> int:
        if self.k == 1:
            return 0
        probs = self.distribution()
        r = rng.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if r < acc:
                return i
        return self.k - 1

    def observe(self, instance: FeedbackInstance) -> None:
        payload = instance.payload
        if not isinstance(payload, FullLocalLosses):
            raise FeedbackTypeError(f"hedge expert needs FullLocalLosses, got {type(payload).__name__}")
        if len(payload.values) != self.k:
            raise FeedbackTypeError(f"payload length {len(payload.values)} != K={self.k}")
        for i, v in enumerate(payload.values):
            self.cum_losses[i] += v
        self.tau += 1
        self.history.append(instance)

    def freeze(self) -> FrozenPolicy:
        return FrozenPolicy(tuple(self.distribution()))


class Exp3Expert:
    """Bandit-feedback exponential weights over the local actions.

    Exploration mixing gamma(tau) = min(1, sqrt(K ln K / max(tau, 1))),
    importance-weighted estimate loss/p for the played action, update
    w_a *= exp(-gamma * estimate / K).  Log-space weights.
    """

    def __init__(self, spec: ExpertSpec):
        self.spec = spec
        self.k = spec.k
        self.log_weights = [0.0] * spec.k
        self.tau = 0
        self.history: list[FeedbackInstance] = []
        self._last_probs: list[float] | None = None

    def _gamma(self) -> float:
        if self.k == 1:
            return 0.0
        return min(1.0, math.sqrt(self.k * math.log(self.k) / max(self.tau, 1)))

    def distribution(self) -> list[float]:
        if self.k == 1:
            return [1.0]
        gamma = self._gamma()
        m = max(self.log_weights)
        ws = [math.exp(x - m) for x in self.log_weights]
        total = sum(ws)
        scale = (1.0 - gamma) / total
        mix = gamma / self.k
        return [scale * w + mix for w in ws]

    def recommend(self, rng: random.Random) -> int:
        probs = self.distribution()
        self._last_probs = probs
        if self.k == 1:
            return 0
        r = rng.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if r < acc:
                return i
        return self.k - 1

    def observe(self, instance: FeedbackInstance) -> None:
        payload = instance.payload
        if not isinstance(payload, BanditLoss):
            raise FeedbackTypeError(f"exp3 expert needs BanditLoss, got {type(payload).__name__}")
        a = instance.local_action
        # The probability the played action had under the policy that chose it.
        probs = self._last_probs if self._last_probs is not None else self.distribution()
        estimate = payload.value / probs[a]
        self.log_weights[a] -= self._gamma() * estimate / self.k
        self.tau += 1
        self._last_probs = None
        self.history.append(instance)

    def freeze(self) -> FrozenPolicy:
        return FrozenPolicy(tuple(self.distribution()))


class OgdExpert:
    """Projected-gradient learner maintaining a distribution on the simplex.

    The point w is the recommendation distribution; feedback is the local
    gradient (for linear losses, the local loss vector).  Step size
    1/sqrt(1 + feeds) with Euclidean projection back onto the simplex.
    """

    def __init__(self, spec: ExpertSpec):
        self.spec = spec
        self.k = spec.k
        self.w = np.full(spec.k, 1.0 / spec.k)
        self.feeds = 0
        self.history: list[FeedbackInstance] = []

    def distribution(self) -> list[float]:
        return self.w.tolist()

    def recommend(self, rng: random.Random) -> int:
        if self.k == 1:
            return 0
        r = rng.random()
        acc = 0.0
        for i in range(self.k):
            acc += self.w[i]
            if r < acc:
                return i
        return self.k - 1

    def observe(self, instance: FeedbackInstance) -> None:
        payload = instance.payload
        if not isinstance(payload, GradientPayload):
            raise FeedbackTypeError(f"ogd expert needs GradientPayload, got {type(payload).__name__}")
        if len(payload.values) != self.k:
            raise FeedbackTypeError(f"payload length {len(payload.values)} != K={self.k}")
        self.feeds += 1
        step = 1.0 / math.sqrt(1.0 + self.feeds)
        self.w = project_simplex(self.w - step * np.asarray(payload.values))
        self.history.append(instance)

    def freeze(self) -> FrozenPolicy:
        return FrozenPolicy(tuple(float(x) for x in self.w))


ExpertPolicy = Union[ConstantExpert, HedgeExpert, Exp3Expert, OgdExpert]

_BUILDERS = {
    "constant": ConstantExpert,
    "hedge": HedgeExpert,
    "exp3": Exp3Expert,
    "ogd": OgdExpert,
}


def build_expert(spec: ExpertSpec) -> ExpertPolicy:
    return _BUILDERS[spec.kind](spec)
