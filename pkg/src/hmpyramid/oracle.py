"""Exact quantities for tiny machines by exhaustive enumeration of hidden
configurations: generative probabilities, free energies, posteriors, and the
variational bounds the wake and sleep phases descend.

Enumeration order is fixed and documented so distributions returned by
different calls line up index for index: hidden configurations are counted as
binary integers where unit j of hidden layer k occupies bit ``offset_k + j``,
with layer 1 in the least significant bits (``offset_1 = 0``) and layers
stacked upward from there.  Summations run in this enumeration order with
numpy's pairwise reduction, so results are bit-stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, DimensionError
from .machine import HelmholtzMachine
from .numerics import sigmoid

__all__ = [
    "OracleBudget",
    "PROB_CLAMP",
    "generative_prob",
    "free_energy",
    "recognition_posterior",
    "generative_posterior",
    "kl_divergence",
    "variational_free_energy",
]

# Sigmoid outputs are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] before entering
# any product that a log may later consume; saturated units then cost a
# bounded penalty instead of producing -inf.
PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class OracleBudget:
    """Cap on total hidden units; 2^units configurations are enumerated."""

    max_hidden_units: int = 16

    def __post_init__(self):
        if self.max_hidden_units < 1:
            raise ValueError("max_hidden_units must be positive")


def _check_budget(machine: HelmholtzMachine, budget: OracleBudget) -> int:
    total = sum(machine.arch.hidden_sizes)
    if total > budget.max_hidden_units:
        raise BudgetError(
            f"{total} hidden units exceed the enumeration budget of "
            f"{budget.max_hidden_units}"
        )
    return total


def _clamped(x: np.ndarray) -> np.ndarray:
    return np.clip(sigmoid(x), PROB_CLAMP, 1.0 - PROB_CLAMP)


def _hidden_states(machine: HelmholtzMachine, total: int) -> list[np.ndarray]:
    # one (2^total, s_k) block per hidden layer, bit b = configs >> b & 1
    idx = np.arange(1 << total, dtype=np.uint64)
    shifts = np.arange(total, dtype=np.uint64)
    bits = ((idx[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.float64)
    blocks, off = [], 0
    for s in machine.arch.hidden_sizes:
        blocks.append(bits[:, off:off + s])
        off += s
    return blocks


def _aug_rows(m: np.ndarray) -> np.ndarray:
    return np.concatenate([m, np.ones((m.shape[0], 1))], axis=1)


def _bernoulli_rows(states: np.ndarray, probs: np.ndarray) -> np.ndarray:
    # rows of prod_j p_j^s_j (1 - p_j)^(1 - s_j); probs broadcasts over rows
    return np.prod(np.where(states == 1.0, probs, 1.0 - probs), axis=1)


def _check_visible(machine: HelmholtzMachine, d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (machine.arch.sizes[0],):
        raise DimensionError(
            f"visible vector must have length {machine.arch.sizes[0]}, got {d.shape}"
        )
    return d


def _prior_rows(machine: HelmholtzMachine, H: list[np.ndarray]) -> np.ndarray:
    prior = _bernoulli_rows(
        H[-1], np.clip(sigmoid(machine.top_bias), PROB_CLAMP, 1.0 - PROB_CLAMP)[None, :]
    )
    for i in range(machine.n_hidden - 1, 0, -1):
        probs = _clamped(_aug_rows(H[i]) @ machine.G[i].T)
        prior *= _bernoulli_rows(H[i - 1], probs)
    return prior


def _likelihood_rows(machine: HelmholtzMachine, H: list[np.ndarray],
                     d: np.ndarray) -> np.ndarray:
    probs = _clamped(_aug_rows(H[0]) @ machine.G[0].T)
    return np.prod(np.where(d[None, :] == 1.0, probs, 1.0 - probs), axis=1)


def generative_prob(machine: HelmholtzMachine, d,
                    budget: OracleBudget = OracleBudget()) -> float:
    """Exact marginal probability the generative model assigns to ``d``."""
    d = _check_visible(machine, d)
    H = _hidden_states(machine, _check_budget(machine, budget))
    return float(np.sum(_prior_rows(machine, H) * _likelihood_rows(machine, H, d)))


def free_energy(machine: HelmholtzMachine, d,
                budget: OracleBudget = OracleBudget()) -> float:
    """Negative log of the exact generative probability of ``d``.

    Always finite: probability clamping bounds it by roughly
    ``units * -ln(PROB_CLAMP)``.
    """
    return -float(np.log(generative_prob(machine, d, budget)))


def recognition_posterior(machine: HelmholtzMachine, d,
                          budget: OracleBudget = OracleBudget()) -> np.ndarray:
    """Distribution the recognition network assigns to each hidden
    configuration given ``d``, in enumeration order."""
    d = _check_visible(machine, d)
    H = _hidden_states(machine, _check_budget(machine, budget))
    q = np.clip(sigmoid(machine.R[0] @ np.concatenate([d, [1.0]])),
                PROB_CLAMP, 1.0 - PROB_CLAMP)
    rows = _bernoulli_rows(H[0], q[None, :])
    for i in range(1, machine.n_hidden):
        probs = _clamped(_aug_rows(H[i - 1]) @ machine.R[i].T)
        rows *= _bernoulli_rows(H[i], probs)
    return rows


def generative_posterior(machine: HelmholtzMachine, d,
                         budget: OracleBudget = OracleBudget()) -> np.ndarray:
    """True posterior over hidden configurations given ``d``, in enumeration
    order."""
    d = _check_visible(machine, d)
    H = _hidden_states(machine, _check_budget(machine, budget))
    joint = _prior_rows(machine, H) * _likelihood_rows(machine, H, d)
    return joint / np.sum(joint)


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats between two distributions over the same enumeration.

    Terms with p = 0 contribute nothing; q must be positive wherever p is.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError(f"shape mismatch: {p.shape} vs {q.shape}")
    mask = p > 0.0
    if np.any(q[mask] <= 0.0):
        raise ValueError("q must be positive wherever p is positive")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def variational_free_energy(machine: HelmholtzMachine, d, direction: str = "wake",
                            budget: OracleBudget = OracleBudget()) -> float:
    """Free energy of ``d`` plus the phase's KL gap, never below the free
    energy itself.

    ``wake`` adds KL(recognition posterior || true posterior): the bound whose
    expected gradient the wake phase's generative deltas follow.  ``sleep``
    adds the reversed KL, which the sleep phase's recognition deltas shrink.
    """
    if direction not in ("wake", "sleep"):
        raise ValueError(f"direction must be 'wake' or 'sleep', got {direction!r}")
    d = _check_visible(machine, d)
    H = _hidden_states(machine, _check_budget(machine, budget))
    joint = _prior_rows(machine, H) * _likelihood_rows(machine, H, d)
    marginal = float(np.sum(joint))
    posterior = joint / marginal
    recog = recognition_posterior(machine, d, budget)
    if direction == "wake":
        gap = kl_divergence(recog, posterior)
    else:
        gap = kl_divergence(posterior, recog)
    return -float(np.log(marginal)) + gap
