"""Experiment configuration, deterministic Monte Carlo execution, CSV output.

A config is one YAML document:

.. code-block:: yaml

    name: grid25-iid
    topology: {kind: grid, n: 25, rows: 5, cols: 5}
    population: {preset: iid, mean: 4.0, variance: 1.0, theta_init: 0.0}
    algorithms:
      - {kind: precision, tau_init_mode: observation}
      - {kind: lwr, lwr_comm_precision: 1.0}
    horizon: 10000
    trials: 500
    master_seed: 20240601
    noise_enabled: true
    output_dir: out/grid25-iid

Outputs per algorithm label: ``summary_<label>.csv`` with columns
(k, agent, mean_theta, mean_abs_error, abs_mean_error, std_theta, bound)
and ``trajectory_<label>.csv`` with columns (trial, k, agent, theta, tau),
plus one ``bound.csv`` with columns (k, bound). Floats are printed with 17
significant digits so identical runs produce byte-identical files.
"""

from __future__ import annotations

import concurrent.futures
import functools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .algorithms import AlgorithmSpec, run_trajectory
from .analysis import (BoundInputs, Summary, TrialAccumulator, bound_inputs_from,
                       mean_error_bound)
from .graphs import (GraphSequence, TopologySpec, build_weight_matrix,
                     generate_graph_sequence, mixing_constants)
from .models import (AgentProfile, Population, hetero_variance_population,
                     iid_population, linear_population, optimal_theta)
from .seeding import derive_trial_seed  # re-exported: part of the public surface

__all__ = [
    "ConfigError", "ExperimentConfig", "parse_config", "load_config", "load_preset",
    "list_presets", "run_experiment", "derive_trial_seed", "emit_reference_curve",
    "averaging_matrix",
]

# Keep "auto" trajectory files below this many data rows.
TRAJECTORY_ROW_LIMIT = 2_000_000


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated description of one experiment."""

    topology: TopologySpec
    population: Population
    algorithms: tuple[AlgorithmSpec, ...]
    horizon: int
    trials: int
    master_seed: int
    noise_enabled: bool = True
    output_dir: Path = Path("out")
    name: str = "experiment"
    emit_trajectories: str = "auto"  # auto | always | never

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.algorithms:
            raise ConfigError("config needs at least one algorithm")
        if self.population.n != self.topology.n:
            raise ConfigError(f"population has {self.population.n} agents but the "
                              f"topology expects {self.topology.n}")
        if self.emit_trajectories not in ("auto", "always", "never"):
            raise ConfigError("emit_trajectories must be auto|always|never")
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    def graph_sequence(self) -> GraphSequence:
        return generate_graph_sequence(self.topology)

    def averaging_matrix(self) -> np.ndarray:
        """Doubly stochastic matrix for the running-average baseline."""
        return averaging_matrix(self.graph_sequence())

    def algorithm_labels(self) -> list[str]:
        labels: list[str] = []
        for spec in self.algorithms:
            label = spec.kind
            if label in labels:
                label = f"{label}-{sum(1 for s in labels if s.startswith(spec.kind)) + 1}"
            labels.append(label)
        return labels


def averaging_matrix(seq: GraphSequence) -> np.ndarray:
    """Doubly stochastic mixing for a static graph.

    Uses the out-degree matrix when the graph is regular (it is then
    already doubly stochastic); otherwise the graph must be undirected and
    lazy-Metropolis weights are used: 1/(2 max(deg_i, deg_j)) across each
    edge, remainder on the diagonal.
    """
    if seq.period != 1:
        raise ConfigError("running-average baseline needs a static topology")
    g = seq.graphs[0]
    a = build_weight_matrix(g)
    if np.max(np.abs(a.sum(axis=1) - 1.0)) <= 1e-12:
        return a
    if any((i, j) not in g.edges for (j, i) in g.edges):
        raise ConfigError("running-average baseline needs a regular or undirected "
                          "static topology (its mixing must be doubly stochastic)")
    deg = np.zeros(g.n)
    for j, i in g.edges:
        deg[j - 1] += 0.5
        deg[i - 1] += 0.5
    w = np.zeros((g.n, g.n))
    for j, i in g.edges:
        w[i - 1, j - 1] = 1.0 / (2.0 * max(deg[i - 1], deg[j - 1]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


# -- config parsing ----------------------------------------------------------

_POPULATION_PRESETS = ("iid", "hetero-variance", "linear")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _parse_topology(node: dict) -> TopologySpec:
    _require(isinstance(node, dict), "topology must be a mapping")
    _require("kind" in node, "topology.kind is required")
    _require("n" in node, "topology.n is required")
    steps = node.get("steps")
    if steps is not None:
        steps = tuple(tuple((int(a), int(b)) for a, b in step) for step in steps)
    try:
        return TopologySpec(kind=str(node["kind"]), n=int(node["n"]),
                            rows=node.get("rows"), cols=node.get("cols"),
                            directed=bool(node.get("directed", False)),
                            hub=int(node.get("hub", 1)),
                            spokes=str(node.get("spokes", "out")),
                            steps=steps, window=node.get("window"),
                            validate=bool(node.get("validate", True)))
    except ValueError as e:
        raise ConfigError(f"topology: {e}") from e


def _parse_population(node: dict, n: int) -> Population:
    _require(isinstance(node, dict), "population must be a mapping")
    if "agents" in node:
        profiles = []
        for idx, row in enumerate(node["agents"], start=1):
            _require(isinstance(row, dict), f"population.agents[{idx}] must be a mapping")
            _require("theta_true" in row, f"population.agents[{idx}].theta_true is required")
            if "precision" in row and "variance" in row:
                raise ConfigError(f"population.agents[{idx}]: give precision or variance, not both")
            if "precision" in row:
                tau = float(row["precision"])
            elif "variance" in row:
                v = float(row["variance"])
                _require(v > 0, f"population.agents[{idx}].variance must be positive")
                tau = 1.0 / v
            else:
                raise ConfigError(f"population.agents[{idx}] needs precision or variance")
            try:
                profiles.append(AgentProfile(float(row["theta_true"]), tau,
                                             float(row.get("theta_init", 0.0))))
            except ValueError as e:
                raise ConfigError(f"population.agents[{idx}]: {e}") from e
        try:
            return Population(tuple(profiles))
        except ValueError as e:
            raise ConfigError(f"population: {e}") from e

    preset = node.get("preset")
    _require(preset in _POPULATION_PRESETS,
             f"population.preset must be one of {_POPULATION_PRESETS}, got {preset!r}")
    theta_init = float(node.get("theta_init", 0.0))
    if preset == "iid":
        _require("mean" in node and "variance" in node,
                 "population preset iid needs mean and variance")
        return iid_population(n, float(node["mean"]), float(node["variance"]), theta_init)
    if preset == "hetero-variance":
        _require("mean" in node, "population preset hetero-variance needs mean")
        return hetero_variance_population(n, float(node["mean"]), theta_init)
    return linear_population(n, theta_init)


def _parse_algorithm(node: dict, where: str) -> AlgorithmSpec:
    _require(isinstance(node, dict), f"{where} must be a mapping")
    _require("kind" in node, f"{where}.kind is required")
    try:
        return AlgorithmSpec(kind=str(node["kind"]),
                             tau_init_mode=str(node.get("tau_init_mode", "observation")),
                             lwr_comm_precision=float(node.get("lwr_comm_precision", 1.0)),
                             lwr_noise_as_variance=bool(node.get("lwr_noise_as_variance", False)))
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_config(text: str, name: str | None = None) -> ExperimentConfig:
    """Parse and fully validate one YAML experiment document.

    Raises ConfigError with the YAML line position on parse failures and
    with the violated constraint on validation failures.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"config parse error at {where}: {e.problem}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config parse error: {e}") from e
    _require(isinstance(doc, dict), "config document must be a mapping")

    for key in ("topology", "population", "horizon", "trials", "master_seed"):
        _require(key in doc, f"config key {key!r} is required")

    topology = _parse_topology(doc["topology"])
    population = _parse_population(doc["population"], topology.n)

    if "algorithms" in doc:
        _require(isinstance(doc["algorithms"], list) and doc["algorithms"],
                 "algorithms must be a non-empty list")
        algorithms = tuple(_parse_algorithm(a, f"algorithms[{i}]")
                           for i, a in enumerate(doc["algorithms"]))
    elif "algorithm" in doc:
        algorithms = (_parse_algorithm(doc["algorithm"], "algorithm"),)
    else:
        raise ConfigError("config needs algorithm or algorithms")

    horizon = int(doc["horizon"])
    _require(horizon >= 1, f"horizon must be >= 1, got {horizon}")
    trials = int(doc["trials"])
    _require(trials >= 1, f"trials must be >= 1, got {trials}")

    config = ExperimentConfig(
        topology=topology, population=population, algorithms=algorithms,
        horizon=horizon, trials=trials, master_seed=int(doc["master_seed"]),
        noise_enabled=bool(doc.get("noise_enabled", True)),
        output_dir=Path(doc.get("output_dir", "out")),
        name=str(doc.get("name", name or "experiment")),
        emit_trajectories=str(doc.get("emit_trajectories", "auto")))

    # surface algorithm/topology incompatibilities at parse time
    seq = config.graph_sequence()
    if any(a.kind == "running-average" for a in config.algorithms):
        averaging_matrix(seq)
    if any(a.kind in ("running-average", "lwr") for a in config.algorithms):
        _require(not any(p.blind for p in population.profiles),
                 "baseline estimators require every agent to observe")
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), name=path.stem)


def list_presets() -> list[str]:
    """Names of the shipped scenario configs."""
    pkg = resources.files("netgauss") / "presets"
    return sorted(p.name.removesuffix(".yaml") for p in pkg.iterdir()
                  if p.name.endswith(".yaml"))


def load_preset(name: str) -> ExperimentConfig:
    pkg = resources.files("netgauss") / "presets" / f"{name}.yaml"
    if not pkg.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return parse_config(pkg.read_text(), name=name)


# -- execution ---------------------------------------------------------------

def emit_reference_curve(c: float, p: float, horizon: int) -> np.ndarray:
    """Guide curve c * k^(-p) for k = 1..horizon (for plot overlays)."""
    if c <= 0 or p <= 0:
        raise ValueError("reference curve needs positive c and p")
    k = np.arange(1, horizon + 1, dtype=float)
    return c * k ** (-p)


def _trial_payload(config: ExperimentConfig, spec: AlgorithmSpec, trial: int):
    rec = run_trajectory(config, trial, spec)
    return rec.theta, rec.tau


def _bound_curve(config: ExperimentConfig) -> tuple[np.ndarray, BoundInputs]:
    seq = config.graph_sequence()
    gc = mixing_constants(seq.n, seq.window, regular=seq.is_static_regular())
    b = bound_inputs_from(config.population, gc)
    k = np.arange(1, config.horizon + 1)
    curve = mean_error_bound(k, b) if config.horizon >= 1 else np.empty(0)
    return curve, b


def _write_summary_csv(path: Path, summary: Summary, bound: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        fh.write("k,agent,mean_theta,mean_abs_error,abs_mean_error,std_theta,bound\n")
        for k in range(summary.horizon + 1):
            bval = "nan" if k == 0 else _fmt(bound[k - 1])
            for i in range(summary.n):
                fh.write(f"{k},{i + 1},{_fmt(summary.mean_theta[k, i])},"
                         f"{_fmt(summary.mean_abs_error[k, i])},"
                         f"{_fmt(summary.abs_mean_error[k, i])},"
                         f"{_fmt(summary.std_theta[k, i])},{bval}\n")


def _write_bound_csv(path: Path, bound: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        fh.write("k,bound\n")
        for k, v in enumerate(bound, start=1):
            fh.write(f"{k},{_fmt(v)}\n")


def _trajectory_rows(fh, trial: int, theta: np.ndarray, tau: np.ndarray) -> None:
    steps, n = theta.shape
    for k in range(steps):
        for i in range(n):
            fh.write(f"{trial},{k},{i + 1},{_fmt(theta[k, i])},{_fmt(tau[k, i])}\n")


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   out_dir: str | Path | None = None) -> dict[str, Summary]:
    """Run every configured algorithm over all trials; write CSVs.

    Per-trial seeds derive from the master seed and the trial index alone,
    and aggregation always reduces in trial order, so the same config
    produces byte-identical files no matter how many workers run the
    trials. Returns one Summary per algorithm label.

    Trajectory CSVs are skipped under the "auto" policy when they would
    exceed ~2e6 rows; summaries and the bound curve are always written.
    """
    out = Path(out_dir) if out_dir is not None else config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    theta_star = optimal_theta(config.population)
    bound, bound_inputs = _bound_curve(config)
    _write_bound_csv(out / "bound.csv", bound)

    n_rows = config.trials * (config.horizon + 1) * config.population.n
    emit_traj = (config.emit_trajectories == "always"
                 or (config.emit_trajectories == "auto" and n_rows <= TRAJECTORY_ROW_LIMIT))

    summaries: dict[str, Summary] = {}
    for label, spec in zip(config.algorithm_labels(), config.algorithms):
        acc = TrialAccumulator(config.horizon, config.population.n, theta_star)
        traj_fh = None
        if emit_traj:
            traj_fh = (out / f"trajectory_{label}.csv").open("w", newline="")
            traj_fh.write("trial,k,agent,theta,tau\n")
        try:
            if workers > 1:
                run_one = functools.partial(_trial_payload, config, spec)
                with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                    results = pool.map(run_one, range(config.trials),
                                       chunksize=max(1, config.trials // (4 * workers)))
                    for trial, (theta, tau) in enumerate(results):
                        acc.add(theta)
                        if traj_fh is not None:
                            _trajectory_rows(traj_fh, trial, theta, tau)
            else:
                for trial in range(config.trials):
                    theta, tau = _trial_payload(config, spec, trial)
                    acc.add(theta)
                    if traj_fh is not None:
                        _trajectory_rows(traj_fh, trial, theta, tau)
        finally:
            if traj_fh is not None:
                traj_fh.close()

        summary = acc.summary(metadata={
            "name": config.name, "topology": config.topology.kind,
            "algorithm": label, "master_seed": config.master_seed,
            "trials": config.trials, "horizon": config.horizon,
            "noise_enabled": config.noise_enabled, "theta_star": theta_star,
        })
        summaries[label] = summary
        _write_summary_csv(out / f"summary_{label}.csv", summary, bound)
    return summaries
