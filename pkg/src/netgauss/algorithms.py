"""Estimator update rules and single-trial trajectory execution.

Three estimators share one state shape (per-agent estimate vector, per-agent
accumulated precision, step counter):

* ``precision``        the package's main estimator: column-stochastic mixing
                       of precision mass and precision-weighted estimates,
                       with each new observation injected at its own
                       observation precision. Blind agents carry zero
                       observation precision and act as pure relays.
* ``running-average``  baseline that mixes estimates with a doubly stochastic
                       matrix and folds in each observation at weight
                       1/(k+1), i.e. a networked running sample mean.
* ``lwr``              learning-without-recall baseline: neighbors' estimates
                       arrive over noisy channels and are fused exactly like
                       observations, all at one fixed communication precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .graphs import DirectedGraph, GraphSequence, check_weight_matrix, generate_graph_sequence
from .models import Population
from .seeding import COMM_CHANNEL, OBS_CHANNEL, agent_stream

if TYPE_CHECKING:
    from .harness import ExperimentConfig

KINDS = ("precision", "running-average", "lwr")
TAU_INIT_MODES = ("observation", "zero")


@dataclass(frozen=True)
class AlgorithmSpec:
    """Which update rule to run and how to initialize it.

    ``tau_init_mode`` applies to the precision estimator: "observation"
    starts each agent's accumulated precision at its observation precision,
    "zero" starts from nothing (the mode under which the rule coincides
    with the running-average baseline on regular static graphs with unit
    precisions). ``lwr_comm_precision`` is the fixed channel precision of
    the lwr baseline; ``lwr_noise_as_variance`` flips the channel-noise
    parameter to be read as a variance instead (sensitivity switch).
    """

    kind: str = "precision"
    tau_init_mode: str = "observation"
    lwr_comm_precision: float = 1.0
    lwr_noise_as_variance: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown algorithm kind {self.kind!r}; expected one of {KINDS}")
        if self.tau_init_mode not in TAU_INIT_MODES:
            raise ValueError(f"tau_init_mode must be one of {TAU_INIT_MODES}, "
                             f"got {self.tau_init_mode!r}")
        if not (self.lwr_comm_precision > 0):
            raise ValueError(f"lwr_comm_precision must be positive, got {self.lwr_comm_precision}")

    def lwr_noise_std(self) -> float:
        if self.lwr_noise_as_variance:
            return math.sqrt(self.lwr_comm_precision)
        return 1.0 / math.sqrt(self.lwr_comm_precision)


@dataclass(frozen=True)
class EstimatorState:
    """Per-agent estimates and accumulated precisions after step k."""

    theta: np.ndarray
    tau: np.ndarray
    k: int = 0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        tau = np.array(self.tau, dtype=float)
        if theta.ndim != 1 or theta.shape != tau.shape:
            raise ValueError(f"theta and tau must be equal-length vectors, "
                             f"got {theta.shape} and {tau.shape}")
        if np.any(tau < 0):
            raise ValueError("accumulated precision cannot be negative")
        if self.k < 0:
            raise ValueError(f"step counter must be >= 0, got {self.k}")
        theta.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.theta.shape[0]


def initial_state(pop: Population, spec: AlgorithmSpec) -> EstimatorState:
    """State before any observation, per the spec's initialization rule."""
    theta0 = pop.theta_init()
    if spec.kind == "precision" and spec.tau_init_mode == "observation":
        tau0 = pop.precisions()
    elif spec.kind == "lwr":
        tau0 = np.full(pop.n, spec.lwr_comm_precision)
    else:
        tau0 = np.zeros(pop.n)
    return EstimatorState(theta0, tau0, k=0)


Observations = Sequence  # per-agent float, with None marking "no observation"


def _split_observations(obs: Observations, blind: np.ndarray) -> np.ndarray:
    """Validate the None-pattern against the blind mask; return a dense vector."""
    n = blind.shape[0]
    if len(obs) != n:
        raise ValueError(f"expected {n} observation slots, got {len(obs)}")
    vals = np.zeros(n)
    for i, s in enumerate(obs):
        if blind[i]:
            if s is not None:
                raise ValueError(f"observation supplied for blind agent {i + 1}")
        else:
            if s is None:
                raise ValueError(f"missing observation for agent {i + 1}")
            vals[i] = s
    return vals


def _dense_observations(obs: Observations, n: int) -> np.ndarray:
    if len(obs) != n:
        raise ValueError(f"expected {n} observations, got {len(obs)}")
    if any(s is None for s in obs):
        raise ValueError("this estimator requires an observation from every agent")
    return np.asarray(obs, dtype=float)


def _precision_kernel(theta, tau, a, obs_vals, tau_obs):
    """One precision-estimator update on raw arrays; returns (theta', tau')."""
    tau_next = a @ tau + tau_obs
    x = a @ (tau * theta) + obs_vals * tau_obs
    # zero accumulated precision means no information yet: carry the estimate
    live = tau_next > 0
    theta_next = np.where(live, x / np.where(live, tau_next, 1.0), theta)
    return theta_next, tau_next


def precision_weighted_step(state: EstimatorState, a: np.ndarray, obs: Observations,
                            pop: Population) -> EstimatorState:
    """Mix precision mass through `a` and fuse fresh observations.

    tau'_i = sum_j a_ij tau_j + tau_obs_i
    theta'_i = (sum_j a_ij tau_j theta_j + s_i tau_obs_i) / tau'_i

    and theta carries over unchanged wherever tau' is still zero.
    Observations must be given exactly for the non-blind agents.
    """
    a = np.asarray(a, dtype=float)
    check_weight_matrix(a)
    if pop.n != state.n or a.shape[0] != state.n:
        raise ValueError("state, matrix and population sizes disagree")
    obs_vals = _split_observations(obs, pop.blind_mask())
    theta_next, tau_next = _precision_kernel(state.theta, state.tau, a,
                                             obs_vals, pop.precisions())
    return EstimatorState(theta_next, tau_next, state.k + 1)


def running_average_step(state: EstimatorState, a: np.ndarray, obs: Observations,
                         k: int | None = None) -> EstimatorState:
    """Consensus running mean: theta' = (k/(k+1)) a theta + (1/(k+1)) s.

    Requires a doubly stochastic `a` (the rule averages, so both row and
    column sums must be one); every agent must observe. The reported tau
    is the sample count k+1.
    """
    a = np.asarray(a, dtype=float)
    check_weight_matrix(a)
    if np.max(np.abs(a.sum(axis=1) - 1.0)) > 1e-12:
        raise ValueError("running-average mixing must be doubly stochastic")
    if a.shape[0] != state.n:
        raise ValueError("state and matrix sizes disagree")
    kk = state.k if k is None else k
    obs_vals = _dense_observations(obs, state.n)
    theta_next = (kk / (kk + 1.0)) * (a @ state.theta) + obs_vals / (kk + 1.0)
    tau_next = np.full(state.n, float(kk + 1))
    return EstimatorState(theta_next, tau_next, state.k + 1)


def _lwr_kernel(theta, tau, adj, indeg, tau_c, obs_vals, eps_sums):
    """One lwr update on raw arrays; returns (theta', tau')."""
    tau_next = tau + (indeg + 1.0) * tau_c
    num = tau * theta + tau_c * (adj @ theta + eps_sums) + tau_c * obs_vals
    return num / tau_next, tau_next


def _lwr_adjacency(g: DirectedGraph) -> tuple[np.ndarray, np.ndarray]:
    adj = np.zeros((g.n, g.n))
    for j, i in g.edges:
        adj[i - 1, j - 1] = 1.0
    return adj, adj.sum(axis=1)


def _lwr_eps_sums(g: DirectedGraph, std: float,
                  rng: np.random.Generator | Sequence[np.random.Generator] | None) -> np.ndarray:
    """Total channel noise received by each agent this step.

    With one shared generator the per-edge draws happen receiver-major in
    ascending agent order; with a per-agent sequence each receiver draws
    its in-edges from its own stream (the mode the trajectory runner uses).
    """
    sums = np.zeros(g.n)
    if rng is None or std == 0.0:
        return sums
    for i in range(1, g.n + 1):
        d = len(g.in_neighbors(i))
        if d == 0:
            continue
        r = rng if isinstance(rng, np.random.Generator) else rng[i - 1]
        sums[i - 1] = std * r.standard_normal(d).sum()
    return sums


def lwr_step(state: EstimatorState, g: DirectedGraph, obs: Observations,
             spec: AlgorithmSpec,
             rng: np.random.Generator | Sequence[np.random.Generator] | None) -> EstimatorState:
    """Fuse noisy neighbor estimates and the fresh observation at one shared precision.

    tau'_i = tau_i + (|N_i| + 1) tau_c
    theta'_i = (tau_i theta_i + tau_c sum_{j in N_i}(theta_j + eps_j)
                + tau_c s_i) / tau'_i

    where N_i are the in-neighbors of i and each channel draw eps_j is an
    independent zero-mean Gaussian at the communication precision. Pass
    ``rng=None`` for noise-free channels.
    """
    if g.n != state.n:
        raise ValueError("state and graph sizes disagree")
    obs_vals = _dense_observations(obs, state.n)
    adj, indeg = _lwr_adjacency(g)
    eps = _lwr_eps_sums(g, spec.lwr_noise_std(), rng)
    theta_next, tau_next = _lwr_kernel(state.theta, state.tau, adj, indeg,
                                       spec.lwr_comm_precision, obs_vals, eps)
    return EstimatorState(theta_next, tau_next, state.k + 1)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Full per-step history of one trial: row k holds the state after step k."""

    theta: np.ndarray  # (horizon+1, n)
    tau: np.ndarray    # (horizon+1, n)
    trial: int
    master_seed: int

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        tau = np.asarray(self.tau, dtype=float)
        if theta.shape != tau.shape or theta.ndim != 2:
            raise ValueError("theta and tau histories must share shape (steps+1, n)")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "tau", tau)

    @property
    def horizon(self) -> int:
        return self.theta.shape[0] - 1

    @property
    def n(self) -> int:
        return self.theta.shape[1]


def _draw_observations(pop: Population, master_seed: int, trial: int,
                       horizon: int, noisy: bool) -> np.ndarray:
    """(horizon, n) observation table; blind columns are zero and never read."""
    theta_true = pop.theta_true()
    obs = np.tile(theta_true, (horizon, 1))
    if not noisy or horizon == 0:
        obs[:, pop.blind_mask()] = 0.0
        return obs
    for idx, profile in enumerate(pop.profiles):
        if profile.blind:
            obs[:, idx] = 0.0
            continue
        rng = agent_stream(master_seed, trial, idx + 1, OBS_CHANNEL)
        obs[:, idx] += rng.standard_normal(horizon) / math.sqrt(profile.precision)
    return obs


def _lwr_noise_table(seq: GraphSequence, spec: AlgorithmSpec, master_seed: int,
                     trial: int, horizon: int, noisy: bool) -> np.ndarray:
    """(horizon, n) summed channel noise per receiver per step.

    Each receiving agent consumes its own communication stream in step
    order, drawing exactly its in-degree at that step, so the table matches
    what repeated `lwr_step` calls with per-agent generators would draw.
    """
    sums = np.zeros((horizon, seq.n))
    std = spec.lwr_noise_std()
    if not noisy or horizon == 0:
        return sums
    indeg_cycle = np.array([[len(g.in_neighbors(i)) for i in range(1, seq.n + 1)]
                            for g in seq.graphs], dtype=int)
    for idx in range(seq.n):
        counts = indeg_cycle[np.arange(horizon) % seq.period, idx]
        total = int(counts.sum())
        if total == 0:
            continue
        rng = agent_stream(master_seed, trial, idx + 1, COMM_CHANNEL)
        draws = rng.standard_normal(total)
        bounds = np.concatenate(([0.0], np.cumsum(draws)))
        ends = np.cumsum(counts)
        starts = ends - counts
        sums[:, idx] = std * (bounds[ends] - bounds[starts])
    return sums


def run_trajectory(config: "ExperimentConfig", trial: int,
                   algorithm: AlgorithmSpec | None = None) -> TrajectoryRecord:
    """Run one seeded trial of the configured experiment.

    Observations (and lwr channel noise) come from per-(trial, agent)
    substreams of the config's master seed, so records are reproducible
    and independent of trial execution order. Row 0 of the record is the
    initial state; row k the state after step k.
    """
    if trial < 0:
        raise ValueError(f"trial index must be >= 0, got {trial}")
    spec = algorithm if algorithm is not None else config.algorithms[0]
    pop = config.population
    seq = config.graph_sequence()
    horizon = config.horizon

    state = initial_state(pop, spec)
    theta_hist = np.empty((horizon + 1, pop.n))
    tau_hist = np.empty((horizon + 1, pop.n))
    theta_hist[0] = state.theta
    tau_hist[0] = state.tau

    obs = _draw_observations(pop, config.master_seed, trial, horizon, config.noise_enabled)
    theta, tau = theta_hist[0].copy(), tau_hist[0].copy()

    if spec.kind == "precision":
        tau_obs = pop.precisions()
        cycle = seq.weight_cycle()
        for k in range(horizon):
            theta, tau = _precision_kernel(theta, tau, cycle[k % seq.period], obs[k], tau_obs)
            theta_hist[k + 1] = theta
            tau_hist[k + 1] = tau
    elif spec.kind == "running-average":
        a = config.averaging_matrix()
        if np.any(pop.blind_mask()):
            raise ValueError("running-average baseline requires every agent to observe")
        for k in range(horizon):
            theta = (k / (k + 1.0)) * (a @ theta) + obs[k] / (k + 1.0)
            theta_hist[k + 1] = theta
            tau_hist[k + 1] = float(k + 1)
    else:  # lwr
        if np.any(pop.blind_mask()):
            raise ValueError("lwr baseline requires every agent to observe")
        eps = _lwr_noise_table(seq, spec, config.master_seed, trial, horizon,
                               config.noise_enabled)
        per_step = [_lwr_adjacency(g) for g in seq.graphs]
        for k in range(horizon):
            adj, indeg = per_step[k % seq.period]
            theta, tau = _lwr_kernel(theta, tau, adj, indeg, spec.lwr_comm_precision,
                                     obs[k], eps[k])
            theta_hist[k + 1] = theta
            tau_hist[k + 1] = tau

    return TrajectoryRecord(theta_hist, tau_hist, trial=trial, master_seed=config.master_seed)
