"""Selection strategies over experts.

The central algorithm picks one expert per round via exponential weights
with uniform exploration mixing, importance-weighted loss estimates, and
(optionally) a Bernoulli feedback gate that keeps every expert's chance
of learning at a given round constant at eta/N regardless of how the
selection probabilities evolve.

Weights are stored in log space: the multiplicative update underflows
once the accumulated estimated losses times eta/N get large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class ForecasterState:
    """Exponential-weights state: log-weights, mixing rate, expert count."""

    log_weights: list[float]
    eta: float
    n: int

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if len(self.log_weights) != self.n or self.n < 1:
            raise ValueError("log_weights length must equal n >= 1")

    @classmethod
    def fresh(cls, n: int, eta: float) -> "ForecasterState":
        return cls(log_weights=[0.0] * n, eta=eta, n=n)


def compute_probs(state: ForecasterState) -> list[float]:
    """Selection probabilities: (1 - eta) * w_j / sum(w) + eta / N.

    Max-shifted exponentiation keeps the normalisation stable however far
    the log-weights have drifted.  Every entry is at least eta/N.
    """
    lw = state.log_weights
    m = max(lw)
    ws = [math.exp(x - m) for x in lw]
    total = sum(ws)
    mix = state.eta / state.n
    scale = (1.0 - state.eta) / total
    return [scale * w + mix for w in ws]


def loss_estimate(loss: float, selected: int, probs: list[float]) -> list[float]:
    """Importance-weighted loss vector: loss/p at the selected index, else 0."""
    est = [0.0] * len(probs)
    est[selected] = loss / probs[selected]
    return est


def weight_update(state: ForecasterState, estimates: list[float]) -> ForecasterState:
    """Multiplicative update w_j *= exp(-eta * est_j / N), in log space."""
    coef = state.eta / state.n
    lw = [x - coef * e for x, e in zip(state.log_weights, estimates)]
    return ForecasterState(log_weights=lw, eta=state.eta, n=state.n)


def gate_probability(state: ForecasterState, selected: int, probs: list[float] | None = None) -> float:
    """Probability that the selected expert is allowed to see its feedback.

    eta / (N * p_selected); since p >= eta/N this never exceeds 1.  The
    marginal chance that expert j both gets selected and fed is therefore
    p_j * eta/(N*p_j) = eta/N at every round.
    """
    p = (probs or compute_probs(state))[selected]
    return min(1.0, state.eta / (state.n * p))


def horizon_tuned_eta(horizon: int, n_experts: int, beta: float) -> float:
    """Mixing rate tuned to the horizon and the experts' regret-rate bound.

    min(1, T^(-(1-beta)/(2-beta)) * N^((1-beta)/(2-beta)) * sqrt(ln N) [beta=0 only]).
    The sqrt(ln N) factor is dropped when N == 1 to avoid eta = 0.
    """
    if horizon < 1 or n_experts < 1:
        raise ValueError("horizon and n_experts must be >= 1")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    ex = (1.0 - beta) / (2.0 - beta)
    eta = (n_experts / horizon) ** ex
    if beta == 0.0 and n_experts > 1:
        eta *= math.sqrt(math.log(n_experts))
    return min(1.0, eta)


class ExpWeightsForecaster:
    """Exponential-weights expert selection, optionally with a feedback gate.

    ``gated=True`` is the guided-feedback forecaster; ``gated=False`` is its
    ungated twin (plain adversarial-bandit selection over experts, gate
    identically 1).  Both share the same probability, estimate, and update
    code paths, so with the gate stream separated from the selection stream
    the two produce identical trajectories whenever feedback cannot change
    the experts' recommendations.
    """

    def __init__(self, n: int, eta: float, gated: bool = True):
        self.state = ForecasterState.fresh(n, eta)
        self.gated = gated

    @property
    def n(self) -> int:
        return self.state.n

    @property
    def eta(self) -> float:
        return self.state.eta

    def probs(self) -> list[float]:
        return compute_probs(self.state)

    def update(self, selected: int, probs: list[float], loss: float) -> None:
        # Only the selected coordinate changes; skip building the zero vector.
        coef = self.state.eta / self.state.n
        self.state.log_weights[selected] -= coef * (loss / probs[selected])

    def gate_probability(self, selected: int, probs: list[float]) -> float:
        return min(1.0, self.state.eta / (self.state.n * probs[selected]))


class UniformForecaster:
    """Selects every expert with probability 1/N; never updates."""

    gated = False

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self._probs = [1.0 / n] * n

    def probs(self) -> list[float]:
        return self._probs

    def update(self, selected: int, probs: list[float], loss: float) -> None:
        pass


class FixedExpertForecaster:
    """Always selects one designated expert."""

    gated = False

    def __init__(self, n: int, index: int):
        if not 0 <= index < n:
            raise ValueError(f"expert index {index} out of range for n={n}")
        self.n = n
        self.index = index
        self._probs = [0.0] * n
        self._probs[index] = 1.0

    def probs(self) -> list[float]:
        return self._probs

    def update(self, selected: int, probs: list[float], loss: float) -> None:
        pass


def make_forecaster(kind: str, n: int, eta: float = 1.0):
    """Build a forecaster from a config string.

    Kinds: ``gated`` (exponential weights + feedback gate), ``exp3``
    (ungated exponential weights), ``uniform``, ``fixed:<j>``.
    """
    if kind == "gated":
        return ExpWeightsForecaster(n, eta, gated=True)
    if kind == "exp3":
        return ExpWeightsForecaster(n, eta, gated=False)
    if kind == "uniform":
        return UniformForecaster(n)
    if kind.startswith("fixed:"):
        return FixedExpertForecaster(n, int(kind.split(":", 1)[1]))
    raise ValueError(f"unknown forecaster kind: {kind!r}")
