"""Sequential adaptive acquisition of tree-sparse signals.

Measurements project the signal onto scaled dictionary atoms, starting at the
root of the coefficient tree and descending into a node's children only when
the measured value passes a significance threshold.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "SensingConfig",
    "Measurement",
    "MeasurementLog",
    "SensingOutcome",
    "allocate_beta",
    "adaptive_sense",
    "adaptive_sense_coeffs",
    "reconstruct_from_outcome",
    "two_stage_estimate",
    "two_stage_estimate_coeffs",
]


@dataclass(frozen=True)
class SensingConfig:
    """Parameters of one acquisition session.

    beta scales every test vector (so each measurement costs beta^2 of the
    energy budget), tau is the significance threshold on the raw measurement,
    and budget is the total sensing energy (None = unbounded).
    """

    beta: float
    tau: float
    noise_std: float = 1.0
    budget: float | None = None
    traversal: str = "queue"

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("budget must be positive or None")
        if self.traversal not in ("stack", "queue"):
            raise ValueError("traversal must be 'stack' or 'queue'")


class Measurement(NamedTuple):
    node: int
    y: float
    significant: bool


@dataclass
class MeasurementLog:
    """Ordered record of one session's measurements."""

    entries: list = field(default_factory=list)
    energy_spent: float = 0.0

    @property
    def m(self):
        return len(self.entries)

    def measured_nodes(self):
        return [e.node for e in self.entries]


@dataclass
class SensingOutcome:
    """Support estimate plus the full measurement log.

    truncated is True when the session stopped because the next measurement
    would have exceeded the energy budget (rather than the scheduler running
    empty).  coeff_estimates is filled by the two-stage estimator.
    """

    support_estimate: frozenset
    log: MeasurementLog
    truncated: bool = False
    coeff_estimates: np.ndarray | None = None


def allocate_beta(budget_R, d, k):
    """Per-measurement scale that spends budget_R over (d+1)k measurements."""
    if budget_R <= 0 or d <= 0 or k <= 0:
        raise ValueError("budget_R, d, and k must all be positive")
    return math.sqrt(budget_R / ((d + 1) * k))


def _threshold_traversal(project, children_of, roots, cfg, rng):
    """Shared traversal engine.

    project(j) returns the noiseless projection of the signal onto atom j;
    children_of(j) lists the indices to enqueue when j tests significant.
    """
    sched = deque(roots)
    pop = sched.pop if cfg.traversal == "stack" else sched.popleft
    log = MeasurementLog()
    cost = cfg.beta**2
    truncated = False
    support = set()
    seen = set(roots)
    while sched:
        if cfg.budget is not None and log.energy_spent + cost > cfg.budget * (1 + 1e-12):
            truncated = True
            break
        j = pop()
        y = cfg.beta * project(j)
        if cfg.noise_std > 0:
            y += cfg.noise_std * rng.standard_normal()
        significant = abs(y) >= cfg.tau
        log.entries.append(Measurement(node=j, y=float(y), significant=significant))
        log.energy_spent += cost
        if significant:
            support.add(j)
            for c in children_of(j):
                if c not in seen:
                    seen.add(c)
                    sched.append(c)
    return SensingOutcome(support_estimate=frozenset(support), log=log, truncated=truncated)


def adaptive_sense(signal, dictionary, cfg, rng):
    """Run the threshold-traversal acquisition of signal against dictionary.

    Returns the support estimate (nodes whose measurement passed tau) and the
    measurement log; the outcome is flagged truncated if the energy budget
    stopped the session early.
    """
    x = np.asarray(signal, dtype=float)
    atoms = dictionary.atoms
    if atoms.shape[0] != x.shape[0]:
        raise ValueError("signal dimension does not match dictionary atoms")
    tree = dictionary.tree
    return _threshold_traversal(
        project=lambda j: float(atoms[:, j - 1] @ x),
        children_of=tree.children,
        roots=[1],
        cfg=cfg,
        rng=rng,
    )


def adaptive_sense_coeffs(alpha, tree, cfg, rng):
    """Same traversal, sensing a coefficient vector directly (identity dictionary)."""
    a = np.asarray(alpha, dtype=float)
    if a.shape != (tree.p,):
        raise ValueError(f"expected length-{tree.p} coefficient vector")
    return _threshold_traversal(
        project=lambda j: float(a[j - 1]),
        children_of=tree.children,
        roots=[1],
        cfg=cfg,
        rng=rng,
    )


def reconstruct_from_outcome(outcome, dictionary, beta, mean_offset=None):
    """Weighted-atom reconstruction from a sensing outcome.

    Only atoms whose measurement passed the threshold contribute; each weight
    is the observation divided by beta, which unbiases the scaled measurement.
    """
    if beta == 0:
        raise ValueError("beta must be nonzero")
    n = dictionary.atoms.shape[0]
    x_hat = np.zeros(n) if mean_offset is None else np.array(mean_offset, dtype=float)
    for e in outcome.log.entries:
        if e.node in outcome.support_estimate:
            x_hat += (e.y / beta) * dictionary.atoms[:, e.node - 1]
    return x_hat


def _two_stage(project, tree, total_budget, k, split, tau, alpha_min,
               threshold_fraction, noise_std, traversal, rng):
    if not 0 < split < 1:
        raise ValueError("split must be in (0,1)")
    if total_budget <= 0:
        raise ValueError("total_budget must be positive")
    beta1 = allocate_beta(split * total_budget, tree.d, k)
    if tau is None:
        if alpha_min is None:
            raise ValueError("provide tau or alpha_min for the stage-1 threshold")
        tau = threshold_fraction * beta1 * alpha_min
    cfg = SensingConfig(beta=beta1, tau=tau, noise_std=noise_std,
                        budget=split * total_budget, traversal=traversal)
    outcome = _threshold_traversal(project, tree.children, [1], cfg, rng)

    coeffs = np.zeros(tree.p)
    s_hat = sorted(outcome.support_estimate)
    if s_hat:
        beta2 = math.sqrt((1 - split) * total_budget / len(s_hat))
        for j in s_hat:
            y2 = beta2 * project(j)
            if noise_std > 0:
                y2 += noise_std * rng.standard_normal()
            coeffs[j - 1] = y2 / beta2
            outcome.log.energy_spent += beta2**2
    outcome.coeff_estimates = coeffs
    return outcome


def two_stage_estimate(signal, dictionary, total_budget, k, rng, split=0.5,
                       tau=None, alpha_min=None, threshold_fraction=0.5,
                       noise_std=1.0, traversal="queue"):
    """Support recovery followed by re-measurement of the recovered support.

    Stage 1 runs the threshold traversal on a split*total_budget allowance;
    stage 2 spends the remaining energy equally on one fresh measurement per
    recovered index and stores the rescaled observations in coeff_estimates.
    An empty stage-1 support yields the all-zero estimate.
    """
    x = np.asarray(signal, dtype=float)
    atoms = dictionary.atoms
    return _two_stage(lambda j: float(atoms[:, j - 1] @ x), dictionary.tree,
                      total_budget, k, split, tau, alpha_min,
                      threshold_fraction, noise_std, traversal, rng)


def two_stage_estimate_coeffs(alpha, tree, total_budget, k, rng, split=0.5,
                              tau=None, alpha_min=None, threshold_fraction=0.5,
                              noise_std=1.0, traversal="queue"):
    """Coefficient-domain variant of two_stage_estimate."""
    a = np.asarray(alpha, dtype=float)
    return _two_stage(lambda j: float(a[j - 1]), tree, total_budget, k, split,
                      tau, alpha_min, threshold_fraction, noise_std, traversal, rng)
