"""Gaussian observation model and the closed-form estimation target.

Each agent i observes s = theta_true_i + noise with noise ~ N(0, 1/precision_i).
A precision of exactly zero marks a blind agent: it never observes anything
and only relays information from its neighbors. The network-wide optimum is
the precision-weighted average of the local means, the unique minimizer of
the aggregate squared-error objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Gaussian:
    mean: float
    variance: float

    def __post_init__(self):
        if not (self.variance > 0) or not math.isfinite(self.variance):
            raise ValueError(f"variance must be positive and finite, got {self.variance}")


def kl_gaussian(p: Gaussian, q: Gaussian) -> float:
    """Kullback-Leibler divergence KL(p || q) between univariate Gaussians.

    log(s2/s1) + (s1^2 + (m1 - m2)^2) / (2 s2^2) - 1/2 with s = std dev.
    Nonnegative, and zero exactly when p equals q.
    """
    v1, v2 = p.variance, q.variance
    return 0.5 * math.log(v2 / v1) + (v1 + (p.mean - q.mean) ** 2) / (2.0 * v2) - 0.5


@dataclass(frozen=True)
class AgentProfile:
    """Local ground truth: mean, observation precision (0 = blind), initial guess."""

    theta_true: float
    precision: float
    theta_init: float = 0.0

    def __post_init__(self):
        if self.precision < 0 or not math.isfinite(self.precision):
            raise ValueError(f"precision must be finite and >= 0, got {self.precision}")

    @property
    def blind(self) -> bool:
        return self.precision == 0.0

    @property
    def variance(self) -> float:
        if self.blind:
            raise ValueError("blind agent has no observation variance")
        return 1.0 / self.precision


@dataclass(frozen=True)
class Population:
    """Ordered agent profiles; at least one agent must be able to observe."""

    profiles: tuple[AgentProfile, ...]

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if not self.profiles:
            raise ValueError("population is empty")
        if all(p.blind for p in self.profiles):
            raise ValueError("population needs at least one positive precision")

    @property
    def n(self) -> int:
        return len(self.profiles)

    def theta_true(self) -> np.ndarray:
        return np.array([p.theta_true for p in self.profiles])

    def precisions(self) -> np.ndarray:
        return np.array([p.precision for p in self.profiles])

    def theta_init(self) -> np.ndarray:
        return np.array([p.theta_init for p in self.profiles])

    def blind_mask(self) -> np.ndarray:
        return np.array([p.blind for p in self.profiles])


def objective(theta: float, pop: Population) -> float:
    """Aggregate weighted squared error sum_i precision_i (theta - theta_i)^2 / 2.

    Blind agents contribute nothing. Convex in theta with minimizer
    `optimal_theta`.
    """
    tau = pop.precisions()
    diff = theta - pop.theta_true()
    return float(0.5 * np.sum(tau * diff * diff))


def optimal_theta(pop: Population) -> float:
    """Precision-weighted average of local means, the unique optimum."""
    tau = pop.precisions()
    total = tau.sum()
    if total <= 0:
        raise ValueError("population needs at least one positive precision")
    return float(np.dot(tau, pop.theta_true()) / total)


def sample_observation(profile: AgentProfile, rng: np.random.Generator,
                       noisy: bool = True) -> float:
    """One observation theta_true + N(0,1)/sqrt(precision) from `rng`.

    With ``noisy=False`` the draw is skipped and theta_true is returned
    exactly (deterministic mode used to compare trajectories against the
    analytic error bound). Blind agents never sample.
    """
    if profile.blind:
        raise ValueError("blind agent cannot draw observations")
    if not noisy:
        return profile.theta_true
    return profile.theta_true + rng.standard_normal() / math.sqrt(profile.precision)


def iid_population(n: int, mean: float, variance: float, theta_init: float = 0.0) -> Population:
    """All agents observe the same N(mean, variance)."""
    tau = 1.0 / variance
    return Population(tuple(AgentProfile(mean, tau, theta_init) for _ in range(n)))


def hetero_variance_population(n: int, mean: float, theta_init: float = 0.0) -> Population:
    """Shared mean, observation variance i for agent i (precision 1/i)."""
    return Population(tuple(AgentProfile(mean, 1.0 / i, theta_init) for i in range(1, n + 1)))


def linear_population(n: int, theta_init: float = 0.0) -> Population:
    """Agent i observes N(i, n - i + 1): distinct means and precisions."""
    return Population(tuple(AgentProfile(float(i), 1.0 / (n - i + 1), theta_init)
                            for i in range(1, n + 1)))
