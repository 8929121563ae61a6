import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from netgauss.cli import main as cli_main
from netgauss.harness import (ConfigError, ExperimentConfig, averaging_matrix,
                              emit_reference_curve, list_presets, load_preset,
                              parse_config, run_experiment)
from netgauss.analysis import mean_error_bound, mc_mean_error
from netgauss.algorithms import AlgorithmSpec, run_trajectory
from netgauss.graphs import TopologySpec, generate_graph_sequence, validate_b_connectivity
from netgauss.models import iid_population
from netgauss.seeding import derive_trial_seed

TINY_CONFIG = """
name: tiny
topology: {kind: cycle, n: 3, directed: true}
population: {preset: iid, mean: 4.0, variance: 1.0}
algorithms:
  - {kind: precision}
horizon: 40
trials: 6
master_seed: 12345
output_dir: out/tiny
"""


class TestParseConfig:
    def test_grid_preset_document(self):
        cfg = load_preset("grid25-iid")
        assert cfg.topology.kind == "grid"
        assert cfg.topology.rows == 5 and cfg.topology.cols == 5
        assert cfg.population.n == 25
        assert np.allclose(cfg.population.theta_true(), 4.0)
        assert np.allclose(cfg.population.precisions(), 1.0)
        assert [a.kind for a in cfg.algorithms] == ["precision", "lwr"]
        assert cfg.trials == 500 and cfg.horizon == 10000

    def test_zero_trials_rejected(self):
        with pytest.raises(ConfigError, match="trials"):
            parse_config(TINY_CONFIG.replace("trials: 6", "trials: 0"))

    def test_population_size_mismatch(self):
        bad = """
topology: {kind: cycle, n: 3, directed: true}
population:
  agents:
    - {theta_true: 0.0, variance: 1.0}
    - {theta_true: 1.0, variance: 1.0}
algorithm: {kind: precision}
horizon: 5
trials: 1
master_seed: 9
"""
        with pytest.raises(ConfigError, match="population has 2 agents"):
            parse_config(bad)

    def test_parse_error_reports_line(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("topology: {kind: cycle\npopulation: {}")

    def test_explicit_agents(self):
        text = """
topology: {kind: path, n: 2}
population:
  agents:
    - {theta_true: 0.0, variance: 1.0}
    - {theta_true: 2.0, precision: 0.0, theta_init: 1.0}
algorithm: {kind: precision}
horizon: 5
trials: 1
master_seed: 9
"""
        cfg = parse_config(text)
        assert cfg.population.profiles[1].blind
        assert cfg.population.profiles[1].theta_init == 1.0

    def test_blind_agents_rejected_for_baselines(self):
        text = """
topology: {kind: path, n: 2}
population:
  agents:
    - {theta_true: 0.0, variance: 1.0}
    - {theta_true: 2.0, precision: 0.0}
algorithm: {kind: lwr}
horizon: 5
trials: 1
master_seed: 9
"""
        with pytest.raises(ConfigError, match="every agent"):
            parse_config(text)

    def test_running_average_needs_doubly_stochastic_topology(self):
        text = """
topology: {kind: ring-hub, n: 5}
population: {preset: iid, mean: 0.0, variance: 1.0}
algorithm: {kind: running-average}
horizon: 5
trials: 1
master_seed: 9
"""
        with pytest.raises(ConfigError, match="doubly stochastic"):
            parse_config(text)

    def test_unknown_algorithm_kind(self):
        with pytest.raises(ConfigError, match="unknown algorithm kind"):
            parse_config(TINY_CONFIG.replace("kind: precision", "kind: sgd"))

    def test_horizon_must_be_positive(self):
        with pytest.raises(ConfigError, match="horizon"):
            parse_config(TINY_CONFIG.replace("horizon: 40", "horizon: 0"))


class TestPresets:
    def test_all_presets_parse_and_validate(self):
        names = list_presets()
        expected = {"grid25-iid", "path25-iid", "path25-hetero", "average-equivalence",
                    "ringhub-n10", "ringhub-n20", "ringhub-n30", "ringhub-n40"}
        assert expected <= set(names)
        for name in names:
            cfg = load_preset(name)
            seq = cfg.graph_sequence()
            assert validate_b_connectivity(seq, seq.window), name
            assert np.allclose(cfg.population.theta_init(), 0.0), name

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load_preset("nonexistent")


class TestSeedDerivation:
    def test_spot_injectivity(self):
        s = 987654321
        assert derive_trial_seed(s, 0, 0) != derive_trial_seed(s, 0, 1)
        assert derive_trial_seed(s, 0, 1) != derive_trial_seed(s, 1, 0)
        assert derive_trial_seed(s, 0, 0) != derive_trial_seed(s, 1, 0)

    def test_stable(self):
        assert derive_trial_seed(5, 2, 3) == derive_trial_seed(5, 2, 3)

    def test_distinct_masters_distinct_streams(self):
        seeds = {derive_trial_seed(m, 0, 0) for m in range(10_000)}
        assert len(seeds) == 10_000

    def test_channels_are_separate(self):
        assert derive_trial_seed(1, 0, 0, 0) != derive_trial_seed(1, 0, 0, 1)


class TestAveragingMatrix:
    def test_regular_graph_uses_out_degree_weights(self):
        seq = generate_graph_sequence(TopologySpec("cycle", 4, directed=True))
        a = averaging_matrix(seq)
        assert np.allclose(a.sum(axis=0), 1.0) and np.allclose(a.sum(axis=1), 1.0)
        assert a[0, 0] == pytest.approx(0.5)

    def test_path_gets_lazy_metropolis(self):
        seq = generate_graph_sequence(TopologySpec("path", 5))
        a = averaging_matrix(seq)
        assert np.allclose(a.sum(axis=0), 1.0) and np.allclose(a.sum(axis=1), 1.0)
        assert np.all(np.diag(a) > 0)
        # end node keeps 3/4 of its own mass: single neighbor of degree 2
        assert a[0, 0] == pytest.approx(0.75)

    def test_unbalanced_digraph_rejected(self):
        seq = generate_graph_sequence(TopologySpec("ring-hub", 5))
        with pytest.raises(ConfigError, match="doubly stochastic"):
            averaging_matrix(seq)


class TestReferenceCurve:
    def test_inverse_k_guide(self):
        curve = emit_reference_curve(1.0, 1.0, 10)
        assert curve[9] == pytest.approx(0.1)

    def test_inverse_sqrt_guide(self):
        curve = emit_reference_curve(2.0, 0.5, 4)
        assert curve[3] == pytest.approx(1.0)

    def test_matches_bound_when_anchored_at_k1(self):
        from netgauss.analysis import BoundInputs
        b = BoundInputs(tau_max=2.0, tau_min=1.0, delta=0.5, c=4.0, lam_gap=0.25,
                        init_l1=1.0, mean_l1=1.0)
        anchor = mean_error_bound(1, b)
        guide = emit_reference_curve(anchor, 1.0, 50)
        ks = np.arange(1, 51)
        assert np.allclose(guide, mean_error_bound(ks, b))


def _read_all_csvs(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}


class TestRunExperiment:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = parse_config(TINY_CONFIG)
        a = run_experiment(cfg, out_dir=tmp_path / "a")
        b = run_experiment(cfg, out_dir=tmp_path / "b")
        files_a = _read_all_csvs(tmp_path / "a")
        files_b = _read_all_csvs(tmp_path / "b")
        assert files_a.keys() == files_b.keys()
        assert set(files_a) == {"bound.csv", "summary_precision.csv",
                                "trajectory_precision.csv"}
        for name in files_a:
            assert files_a[name] == files_b[name], name
        assert np.array_equal(a["precision"].mean_theta, b["precision"].mean_theta)

    def test_parallel_run_matches_serial(self, tmp_path):
        cfg = parse_config(TINY_CONFIG)
        run_experiment(cfg, out_dir=tmp_path / "serial")
        run_experiment(cfg, workers=2, out_dir=tmp_path / "par")
        fa, fb = _read_all_csvs(tmp_path / "serial"), _read_all_csvs(tmp_path / "par")
        for name in fa:
            assert fa[name] == fb[name], name

    def test_summary_matches_manual_aggregation(self, tmp_path):
        cfg = parse_config(TINY_CONFIG)
        out = run_experiment(cfg, out_dir=tmp_path)["precision"]
        records = [run_trajectory(cfg, t) for t in range(cfg.trials)]
        manual = mc_mean_error(records, out.theta_star)
        assert np.array_equal(out.mean_abs_error, manual.mean_abs_error)
        assert np.array_equal(out.std_theta, manual.std_theta)

    def test_summary_csv_schema(self, tmp_path):
        cfg = parse_config(TINY_CONFIG)
        run_experiment(cfg, out_dir=tmp_path)
        lines = (tmp_path / "summary_precision.csv").read_text().splitlines()
        assert lines[0] == "k,agent,mean_theta,mean_abs_error,abs_mean_error,std_theta,bound"
        assert len(lines) == 1 + (cfg.horizon + 1) * 3
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == "1" and first[6] == "nan"
        traj = (tmp_path / "trajectory_precision.csv").read_text().splitlines()
        assert traj[0] == "trial,k,agent,theta,tau"
        assert len(traj) == 1 + cfg.trials * (cfg.horizon + 1) * 3

    def test_trajectory_emission_policy(self, tmp_path):
        from dataclasses import replace
        cfg = replace(parse_config(TINY_CONFIG), emit_trajectories="never")
        run_experiment(cfg, out_dir=tmp_path)
        assert not (tmp_path / "trajectory_precision.csv").exists()
        assert (tmp_path / "summary_precision.csv").exists()

    def test_multiple_algorithms_get_separate_files(self, tmp_path):
        cfg = load_preset("average-equivalence")
        out = run_experiment(cfg, out_dir=tmp_path)
        assert set(out) == {"precision", "running-average"}
        assert (tmp_path / "summary_running-average.csv").exists()
        # the scenario's whole point: both runs coincide
        a, b = out["precision"], out["running-average"]
        assert np.max(np.abs(a.mean_theta - b.mean_theta)) <= 1e-10


class TestCli:
    def test_run_and_check_graph_and_bound(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.yaml"
        cfg_path.write_text(TINY_CONFIG)
        assert cli_main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o"),
                         "--trials", "2", "--horizon", "10"]) == 0
        assert (tmp_path / "o" / "summary_precision.csv").exists()
        assert cli_main(["check-graph", "--config", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "window-connected: True" in out
        assert "empirical delta" in out
        assert cli_main(["bound", "--config", str(cfg_path), "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "b" / "bound.csv").exists()

    def test_presets_lists_names(self, capsys):
        assert cli_main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "grid25-iid" in out and "ringhub-n40" in out

    def test_run_by_preset_name(self, tmp_path):
        assert cli_main(["run", "--preset", "average-equivalence",
                         "--out", str(tmp_path), "--horizon", "50"]) == 0
        assert (tmp_path / "summary_precision.csv").exists()

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        p = tmp_path / "bad.yaml"
        p.write_text(TINY_CONFIG.replace("trials: 6", "trials: 0"))
        assert cli_main(["run", "--config", str(p)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_seed_override_changes_output(self, tmp_path):
        cfg_path = tmp_path / "exp.yaml"
        cfg_path.write_text(TINY_CONFIG)
        cli_main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "s1"),
                  "--seed", "1", "--horizon", "10"])
        cli_main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "s2"),
                  "--seed", "2", "--horizon", "10"])
        a = (tmp_path / "s1" / "summary_precision.csv").read_bytes()
        b = (tmp_path / "s2" / "summary_precision.csv").read_bytes()
        assert a != b
