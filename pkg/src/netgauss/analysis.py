"""Mean-error bound, Monte Carlo aggregation, and convergence diagnostics.

Two error curves are tracked and must not be conflated:

* ``abs_mean_error``  |mean over trials of theta - theta*|, the Monte Carlo
                      estimate of the expected-estimate error. This is the
                      quantity the analytic O(1/k) bound controls.
* ``mean_abs_error``  mean over trials of |theta - theta*|, the curve one
                      plots for a single run's typical accuracy. Its tail is
                      eventually dominated by sampling noise (a k^(-1/2)
                      central-limit floor), not by the 1/k bias decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .algorithms import TrajectoryRecord
from .graphs import GraphConstants
from .models import Population, optimal_theta


@dataclass(frozen=True)
class BoundInputs:
    """Everything the closed-form mean-error bound needs.

    ``lam_gap`` is 1 - lambda stored exactly (see GraphConstants); the
    bound only ever divides by it.
    """

    tau_max: float
    tau_min: float
    delta: float
    c: float
    lam_gap: float
    init_l1: float
    mean_l1: float

    def __post_init__(self):
        if not (0 < self.tau_min <= self.tau_max):
            raise ValueError("need 0 < tau_min <= tau_max")
        if not (0 < self.delta <= 1):
            raise ValueError(f"delta must be in (0,1], got {self.delta}")
        if not (0 < self.lam_gap <= 1):
            raise ValueError(f"1-lambda must be in (0,1], got {self.lam_gap}")
        if self.init_l1 < 0 or self.mean_l1 < 0:
            raise ValueError("L1 distances cannot be negative")


def mean_error_bound(k: int | np.ndarray, b: BoundInputs) -> float | np.ndarray:
    """O(1/k) envelope on |E[estimate] - optimum| at step k >= 1.

    (tau_max / (tau_min k delta)) * (init_l1 + 2 C mean_l1 / (1 - lambda))

    Strictly decreasing in k; doubling k exactly halves the value.
    """
    karr = np.asarray(k)
    if np.any(karr < 1):
        raise ValueError("the bound applies from step 1 onward")
    const = (b.tau_max / (b.tau_min * b.delta)) * (b.init_l1 + 2.0 * b.c * b.mean_l1 / b.lam_gap)
    out = const / karr
    return float(out) if np.isscalar(k) else out


def bound_inputs_from(pop: Population, gc: GraphConstants) -> BoundInputs:
    """Assemble bound inputs from a population and mixing constants.

    All agents contribute their initial guess to the init term, but blind
    agents carry zero observation precision and so drop out of the
    mean-heterogeneity term (and of tau_min, which is the smallest
    *non-zero* precision).
    """
    theta_star = optimal_theta(pop)
    tau = pop.precisions()
    live = tau > 0
    init_l1 = float(np.sum(np.abs(pop.theta_init() - theta_star)))
    mean_l1 = float(np.sum(np.abs(pop.theta_true()[live] - theta_star)))
    return BoundInputs(tau_max=float(tau[live].max()), tau_min=float(tau[live].min()),
                       delta=gc.delta, c=gc.c, lam_gap=gc.lam_gap,
                       init_l1=init_l1, mean_l1=mean_l1)


@dataclass(frozen=True)
class Summary:
    """Per-step per-agent Monte Carlo aggregates for one algorithm run."""

    steps: np.ndarray           # (K+1,) step indices 0..K
    mean_theta: np.ndarray      # (K+1, n)
    abs_mean_error: np.ndarray  # (K+1, n)  |E theta - theta*|
    mean_abs_error: np.ndarray  # (K+1, n)  E |theta - theta*|
    std_theta: np.ndarray       # (K+1, n)  sample std over trials (0 for 1 trial)
    trials: int
    theta_star: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("summary needs at least one trial")
        if np.any(np.diff(self.steps) <= 0):
            raise ValueError("step index must be strictly increasing")
        for name in ("abs_mean_error", "mean_abs_error", "std_theta"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"{name} has negative entries")

    @property
    def horizon(self) -> int:
        return int(self.steps[-1])

    @property
    def n(self) -> int:
        return self.mean_theta.shape[1]


class TrialAccumulator:
    """Streaming aggregation of trajectories into a Summary.

    Sums are accumulated one trial at a time in trial-index order, so the
    result is a deterministic function of the set of records regardless of
    which worker produced each one.
    """

    def __init__(self, horizon: int, n: int, theta_star: float):
        shape = (horizon + 1, n)
        self.theta_star = theta_star
        self._sum = np.zeros(shape)
        self._sum_sq = np.zeros(shape)
        self._sum_abs_err = np.zeros(shape)
        self.count = 0

    def add(self, theta_hist: np.ndarray) -> None:
        if theta_hist.shape != self._sum.shape:
            raise ValueError(f"trajectory shape {theta_hist.shape} does not match "
                             f"accumulator shape {self._sum.shape}")
        self._sum += theta_hist
        self._sum_sq += theta_hist * theta_hist
        self._sum_abs_err += np.abs(theta_hist - self.theta_star)
        self.count += 1

    def summary(self, metadata: dict | None = None) -> Summary:
        if self.count == 0:
            raise ValueError("no trials accumulated")
        t = self.count
        mean = self._sum / t
        if t > 1:
            var = np.maximum(self._sum_sq - t * mean * mean, 0.0) / (t - 1)
            std = np.sqrt(var)
        else:
            std = np.zeros_like(mean)
        return Summary(steps=np.arange(self._sum.shape[0]),
                       mean_theta=mean,
                       abs_mean_error=np.abs(mean - self.theta_star),
                       mean_abs_error=self._sum_abs_err / t,
                       std_theta=std,
                       trials=t,
                       theta_star=self.theta_star,
                       metadata=dict(metadata or {}))


def mc_mean_error(records: Sequence[TrajectoryRecord] | Iterable[TrajectoryRecord],
                  theta_star: float, metadata: dict | None = None) -> Summary:
    """Aggregate trajectory records into the two error curves."""
    acc = None
    for rec in records:
        if acc is None:
            acc = TrialAccumulator(rec.horizon, rec.n, theta_star)
        acc.add(rec.theta)
    if acc is None:
        raise ValueError("no records to aggregate")
    return acc.summary(metadata)


def check_bound(summary: Summary, b: BoundInputs, confidence_slack: float = 3.0) -> bool:
    """Does the expected-estimate error sit under the bound everywhere?

    Checks |mean theta - theta*| <= bound(k) + slack * std / sqrt(trials)
    for every step k >= 1 and every agent. The slack term is the Monte
    Carlo allowance (standard errors of the per-cell mean); use slack 0
    for noise-free runs, where the trajectory equals its expectation.
    """
    if summary.horizon < 1:
        raise ValueError("summary has no post-initialization steps")
    k = summary.steps[1:]
    allowed = mean_error_bound(k, b)[:, None] \
        + confidence_slack * summary.std_theta[1:] / math.sqrt(summary.trials)
    return bool(np.all(summary.abs_mean_error[1:] <= allowed))


def loglog_slope(curve: np.ndarray, k_lo: int, k_hi: int) -> float:
    """Least-squares slope of log(curve[k]) against log(k) for k in [k_lo, k_hi].

    ``curve`` is indexed by step (entry k = value at step k). The window
    must span at least one doubling and contain only positive values.
    """
    curve = np.asarray(curve, dtype=float)
    if k_lo < 1 or k_hi >= curve.shape[0]:
        raise ValueError(f"window [{k_lo}, {k_hi}] outside curve of length {curve.shape[0]}")
    if k_hi < 2 * k_lo:
        raise ValueError("slope window must span at least one doubling of k")
    k = np.arange(k_lo, k_hi + 1)
    vals = curve[k_lo:k_hi + 1]
    if np.any(vals <= 0):
        raise ValueError("slope window contains nonpositive values")
    return float(np.polyfit(np.log(k), np.log(vals), 1)[0])


def transition_step(curve: np.ndarray, fraction: float = 0.5) -> int:
    """First step after which the curve stays below `fraction` of its peak.

    A coarse but monotone-friendly marker for when the initial mixing
    transient ends and the decaying regime begins.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 1 or curve.shape[0] < 2:
        raise ValueError("need a per-step curve with at least two entries")
    if not (0 < fraction < 1):
        raise ValueError(f"fraction must be in (0,1), got {fraction}")
    tail_max = np.maximum.accumulate(curve[::-1])[::-1]
    threshold = fraction * float(curve[1:].max())
    below = np.nonzero(tail_max <= threshold)[0]
    return int(below[0]) if below.size else curve.shape[0]
