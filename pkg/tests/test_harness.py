import json
import math

import numpy as np
import pytest

from perturbscan.harness import (
    ConfigError,
    DetectionReport,
    ExperimentConfig,
    SweepResult,
    emit_report,
    load_config,
    run_detection_experiment,
    run_threshold_sweep,
    trial_rng,
)
from perturbscan.lattice import WalkSpec, estimate_intersection_tail
from perturbscan._stats import wilson_interval


def tree_lr_config(trials=20, seed=1, nu=(0.75, 0.25), depth=4, mu=(0.5, 0.5)):
    return ExperimentConfig(
        domain={"kind": "tree", "generator": "bary", "b": 2, "depth": depth},
        pair={"mu": list(mu), "nu": list(nu)},
        path={"kind": "ray"},
        detector={"kind": "lr", "engine": "exact"},
        trials=trials, seed=seed)


class TestConfig:
    def test_trials_floor(self):
        with pytest.raises(ConfigError):
            tree_lr_config(trials=5)

    def test_unknown_keys_rejected(self):
        raw = tree_lr_config().to_dict()
        raw["typo_section"] = {}
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw)
        raw2 = tree_lr_config().to_dict()
        raw2["experiment"]["sed"] = 3
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw2)

    def test_missing_seed_rejected(self):
        raw = tree_lr_config().to_dict()
        del raw["experiment"]["seed"]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw)

    def test_yaml_round_trip(self, tmp_path):
        import yaml
        cfg = tree_lr_config()
        p = tmp_path / "cfg.yaml"
        p.write_text(yaml.safe_dump(cfg.to_dict()))
        assert load_config(p) == cfg


class TestRunExperiment:
    def test_constant_null_detector(self):
        cfg = tree_lr_config().replace(
            detector={"kind": "constant", "decision": "null"})
        rep = run_detection_experiment(cfg)
        assert rep.type_i == 0.0
        assert rep.type_ii == 1.0

    def test_constant_perturbed_detector(self):
        cfg = tree_lr_config().replace(
            detector={"kind": "constant", "decision": "perturbed"})
        rep = run_detection_experiment(cfg)
        assert rep.type_i == 1.0
        assert rep.type_ii == 0.0

    def test_equal_measures_power_matches_false_alarm(self):
        cfg = tree_lr_config(trials=100, nu=(0.5, 0.5))
        rep = run_detection_experiment(cfg)
        # both arms identically distributed: Wilson intervals must overlap
        lo1, hi1 = wilson_interval(rep.counts["P"]["perturbed"], 100)
        lo2, hi2 = wilson_interval(rep.counts["Q"]["perturbed"], 100)
        assert max(lo1, lo2) <= min(hi1, hi2)

    def test_bit_identical_reruns(self):
        cfg = tree_lr_config(trials=25, seed=77)
        a = run_detection_experiment(cfg)
        b = run_detection_experiment(cfg)
        assert a.normalized() == b.normalized()

    def test_threads_do_not_change_results(self):
        base = tree_lr_config(trials=16, seed=5)
        serial = run_detection_experiment(base)
        parallel = run_detection_experiment(base.replace(
            experiment={"trials": 16, "seed": 5, "threads": 2}))
        ser = serial.normalized()
        par = parallel.normalized()
        ser["config"]["experiment"].pop("threads")
        par["config"]["experiment"].pop("threads")
        assert ser == par

    def test_counts_sum_to_trials_and_wilson_contains_rate(self):
        cfg = tree_lr_config(trials=30, seed=9)
        rep = run_detection_experiment(cfg)
        for arm in ("P", "Q"):
            assert rep.counts[arm]["perturbed"] + rep.counts[arm]["null"] == 30
        assert rep.type_i_ci[0] <= rep.type_i <= rep.type_i_ci[1]
        assert rep.type_ii_ci[0] <= rep.type_ii <= rep.type_ii_ci[1]

    def test_trial_rng_streams_distinct(self):
        draws = {
            (arm, i): tuple(trial_rng(123, arm, i).integers(0, 2**63, 4).tolist())
            for arm in (0, 1, 2) for i in range(50)
        }
        assert len(set(draws.values())) == len(draws)

    def test_bayes_error_sharp_pair_depth6(self):
        cfg = tree_lr_config(trials=500, seed=12, depth=6,
                             mu=[0.25] * 4, nu=[0.97, 0.01, 0.01, 0.01])
        rep = run_detection_experiment(cfg)
        assert (rep.type_i + rep.type_ii) / 2 < 0.15


class TestSweep:
    def test_singleton_sweep_equals_single_experiment(self):
        cfg = tree_lr_config(trials=15, seed=3)
        sweep = run_threshold_sweep(cfg, {"nu": [[0.75, 0.25]]})
        single = run_detection_experiment(cfg)
        assert len(sweep.reports) == 1
        assert sweep.reports[0].normalized() == single.normalized()

    def test_empty_sweep_rejected_before_files(self, tmp_path):
        cfg = tree_lr_config()
        with pytest.raises(ConfigError):
            run_threshold_sweep(cfg, {"nu": []})
        out = tmp_path / "never.json"
        with pytest.raises(ConfigError):
            emit_report(SweepResult((), (), (), (), ()), out)
        assert not out.exists()

    def test_infeasible_tree_sweep_warns_and_proceeds(self):
        # binary alphabet, uniform mu: max H = log 2 == log br of the binary tree
        cfg = tree_lr_config(trials=10, seed=4)
        sweep = run_threshold_sweep(cfg, {"nu": [[0.6, 0.4]]})
        assert len(sweep.warnings) == 1
        assert "cannot cross" in sweep.warnings[0]
        assert len(sweep.reports) == 1

    def test_power_nondecreasing_in_entropy(self):
        # 4-symbol uniform mu on the binary tree: interpolate nu toward the
        # sharp pair; detection power grows with H (one Wilson slip allowed)
        sharp = np.array([0.97, 0.01, 0.01, 0.01])
        uniform = np.full(4, 0.25)
        nus = [(1 - t) * uniform + t * sharp for t in (0.3, 0.55, 0.8, 1.0)]
        cfg = tree_lr_config(trials=100, seed=6, depth=10, mu=[0.25] * 4,
                             nu=[0.97, 0.01, 0.01, 0.01])
        sweep = run_threshold_sweep(cfg, {"nu": [v.tolist() for v in nus]})
        assert all(h2 > h1 for h1, h2 in zip(sweep.entropies, sweep.entropies[1:]))
        rows = sweep.rows()
        violations = 0
        for a, b in zip(rows, rows[1:]):
            if not b["power"] >= a["power"]:
                violations += 1
                assert b["type_ii_hi"] >= a["type_ii_lo"]  # Wilson overlap
        assert violations <= 1
        assert rows[-1]["power"] > rows[0]["power"]

    def test_entropy_minus_log_br_column(self):
        cfg = tree_lr_config(trials=10, seed=8, mu=[0.25] * 4,
                             nu=[0.97, 0.01, 0.01, 0.01])
        sweep = run_threshold_sweep(cfg, {"nu": [[0.97, 0.01, 0.01, 0.01]]})
        row = sweep.rows()[0]
        assert row["log_branching"] == pytest.approx(math.log(2), abs=0.01)
        assert row["entropy_minus_log_br"] == pytest.approx(
            row["entropy"] - row["log_branching"])

    def test_oriented_dimension_sweep_tail_exponents(self):
        # fitted intersection-tail exponent rises with dimension; the d=2,3
        # fits drift toward 0 as the horizon doubles (recurrent difference
        # walks) while the transient d=4 fit is horizon-stable
        fits = {}
        for d in (2, 3, 4):
            fits[d] = estimate_intersection_tail(
                WalkSpec.oriented(d), horizon=500, samples=5000,
                rng=trial_rng(99, 0, d))
        chats = {d: e.fit.c_hat for d, e in fits.items()}
        assert chats[2] < chats[3] < chats[4]
        assert chats[2] < 0.1 * chats[4]
        assert chats[4] > 0.3
        for d in (2, 3):
            assert fits[d].fit.c_hat < fits[d].half_horizon_fit.c_hat
        rel_drift = abs(fits[4].fit.c_hat - fits[4].half_horizon_fit.c_hat)
        assert rel_drift <= 0.15 * fits[4].fit.c_hat


class TestEmit:
    def test_json_round_trip(self, tmp_path):
        cfg = tree_lr_config(trials=12, seed=10)
        rep = run_detection_experiment(cfg)
        p = emit_report(rep, tmp_path / "rep.json", fmt="json")
        loaded = DetectionReport.from_dict(json.loads(p.read_text()))
        assert loaded.normalized() == rep.normalized()

    def test_csv_row_count_matches_sweep(self, tmp_path):
        cfg = tree_lr_config(trials=10, seed=11)
        sweep = run_threshold_sweep(cfg, {"nu": [[0.7, 0.3], [0.8, 0.2]]})
        p = emit_report(sweep, tmp_path / "sweep.csv", fmt="csv")
        lines = p.read_text().strip().splitlines()
        assert len(lines) == 3  # header + 2 points

    def test_figures_rendered_alongside(self, tmp_path):
        cfg = tree_lr_config(trials=10, seed=13)
        sweep = run_threshold_sweep(cfg, {"nu": [[0.7, 0.3], [0.8, 0.2]]})
        p = emit_report(sweep, tmp_path / "sweep.csv", fmt="csv", figures=True)
        assert p.with_suffix(".png").exists()
        rep = run_detection_experiment(cfg)
        p2 = emit_report(rep, tmp_path / "rep.json", fmt="json", figures=True)
        assert p2.with_suffix(".png").exists()

    def test_unknown_format_rejected(self, tmp_path):
        cfg = tree_lr_config(trials=10, seed=14)
        rep = run_detection_experiment(cfg)
        with pytest.raises(ConfigError):
            emit_report(rep, tmp_path / "rep.xml", fmt="xml")
