"""Report pipeline: cell discovery, artifacts, errors, calibration."""

import json
import os

import numpy as np
import pytest

from utdctl.envs import PendulumEnv
from utdctl.errors import ConfigError, ReportError
from utdctl.experiment import CheckpointRecord, RunLog, write_run_csv
from utdctl.report import (
    calibrate_env,
    calibrate_references,
    discover_cells,
    report_results,
)


def make_log(seed, steps, returns, iutd=None, val=None):
    iutd = iutd or [5.0] * len(steps)
    val = val or [0.5] * len(steps)
    records = [
        CheckpointRecord(env_step=s, return_mean=float(r), iutd_ratio=float(q),
                         val_loss=float(v), train_loss=0.1, cum_train_steps=s // 5)
        for s, r, q, v in zip(steps, returns, iutd, val)
    ]
    return RunLog(seed=seed, config_hash="cafe", algorithm="adaptive",
                  records=records)


def write_cell(root, tag, logs):
    cell = os.path.join(root, tag)
    os.makedirs(cell, exist_ok=True)
    for log in logs:
        write_run_csv(log, os.path.join(cell, f"seed_{log.seed}.csv"))


def read_csv_columns(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, {
        name: np.array([float(row[i]) for row in rows])
        for i, name in enumerate(header)
    }


@pytest.fixture
def results_dir(tmp_path):
    root = str(tmp_path / "results")
    write_cell(root, "adaptive", [
        make_log(0, [100, 200], [-1.0, -0.5], val=[0.5, 0.25]),
        make_log(1, [100, 200], [-1.2, -0.7], val=[0.6, 0.30]),
        make_log(2, [100, 200], [-0.8, -0.3], val=[0.4, 0.20]),
    ])
    write_cell(root, "fixed_5", [
        make_log(0, [100, 200], [-2.0, -1.5]),
        make_log(1, [100, 200], [-2.2, -1.9]),
        make_log(2, [100, 200], [-1.8, -1.1]),
    ])
    return root


class TestDiscoverCells:
    def test_maps_tags_to_seed_sorted_runs(self, results_dir):
        cells = discover_cells(results_dir)
        assert sorted(cells) == ["adaptive", "fixed_5"]
        assert [seed for seed, _ in cells["adaptive"]] == [0, 1, 2]
        for seed, path in cells["fixed_5"]:
            assert path.endswith(os.path.join("fixed_5", f"seed_{seed}.csv"))

    def test_ignores_non_run_files(self, results_dir, tmp_path):
        cell = os.path.join(results_dir, "adaptive")
        for name in ("notes.txt", "seed_x.csv", "seed_1.json"):
            with open(os.path.join(cell, name), "w") as fh:
                fh.write("junk")
        os.makedirs(os.path.join(results_dir, "empty_cell"))
        with open(os.path.join(results_dir, "stray.csv"), "w") as fh:
            fh.write("junk")
        cells = discover_cells(results_dir)
        assert sorted(cells) == ["adaptive", "fixed_5"]
        assert len(cells["adaptive"]) == 3

    def test_missing_directory_raises(self, tmp_path):
        with pytest.raises(ReportError, match="not found"):
            discover_cells(str(tmp_path / "nope"))

    def test_no_csvs_raises(self, tmp_path):
        root = tmp_path / "results"
        (root / "cell").mkdir(parents=True)
        (root / "cell" / "readme.md").write_text("hi")
        with pytest.raises(ReportError, match="no run CSVs"):
            discover_cells(str(root))


class TestReportResults:
    def test_payload_scores_and_metrics(self, results_dir, tmp_path):
        payload = report_results(results_dir, str(tmp_path / "out"),
                                 num_bootstrap=100)
        cell = payload["cells"]["adaptive"]
        assert cell["num_runs"] == 3
        assert cell["seeds"] == [0, 1, 2]
        assert cell["scores"] == [-0.5, -0.7, -0.3]
        assert cell["final_env_steps"] == [200, 200, 200]
        assert cell["metrics"]["mean"]["point"] == pytest.approx(-0.5)
        assert cell["metrics"]["median"]["point"] == pytest.approx(-0.5)
        lo, hi = cell["metrics"]["mean"]["ci_low"], cell["metrics"]["mean"]["ci_high"]
        assert -0.7 <= lo <= hi <= -0.3
        assert payload["errors"] == {}

    def test_metadata_echoes_parameters(self, results_dir, tmp_path):
        payload = report_results(results_dir, str(tmp_path / "out"),
                                 metric="median", num_bootstrap=64,
                                 alpha=0.1, bootstrap_seed=9)
        meta = payload["metadata"]
        assert meta["metric"] == "median"
        assert meta["score_column"] == "return_mean"
        assert meta["num_bootstrap"] == 64
        assert meta["alpha"] == 0.1
        assert meta["bootstrap_seed"] == 9
        assert meta["normalized"] is False
        assert meta["references"] is None

    def test_writes_all_artifacts(self, results_dir, tmp_path):
        out = str(tmp_path / "out")
        report_results(results_dir, out, num_bootstrap=50)
        names = {"aggregate.json"}
        for tag in ("adaptive", "fixed_5"):
            names |= {f"efficiency__{tag}.csv", f"curves__{tag}.csv",
                      f"iutd__{tag}.csv"}
        assert names <= set(os.listdir(out))
        with open(os.path.join(out, "aggregate.json")) as fh:
            on_disk = json.load(fh)
        assert set(on_disk["cells"]) == {"adaptive", "fixed_5"}

    def test_same_seed_byte_identical(self, results_dir, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        report_results(results_dir, out1, num_bootstrap=200)
        report_results(results_dir, out2, num_bootstrap=200)
        for name in sorted(os.listdir(out1)):
            with open(os.path.join(out1, name), "rb") as fh:
                first = fh.read()
            with open(os.path.join(out2, name), "rb") as fh:
                second = fh.read()
            assert first == second, name

    def test_bootstrap_seed_changes_intervals(self, results_dir, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        report_results(results_dir, out1, num_bootstrap=200, bootstrap_seed=0)
        report_results(results_dir, out2, num_bootstrap=200, bootstrap_seed=7)
        with open(os.path.join(out1, "aggregate.json"), "rb") as fh:
            first = fh.read()
        with open(os.path.join(out2, "aggregate.json"), "rb") as fh:
            second = fh.read()
        assert first != second

    def test_unknown_metric_rejected(self, results_dir, tmp_path):
        with pytest.raises(ReportError, match="unknown metric"):
            report_results(results_dir, str(tmp_path / "out"), metric="max")

    def test_unknown_score_column_rejected(self, results_dir, tmp_path):
        with pytest.raises(ReportError, match="unknown score column"):
            report_results(results_dir, str(tmp_path / "out"),
                           score_column="train_loss")

    def test_val_loss_scores_are_negated(self, results_dir, tmp_path):
        payload = report_results(results_dir, str(tmp_path / "out"),
                                 score_column="val_loss", num_bootstrap=50)
        assert payload["cells"]["adaptive"]["scores"] == [-0.25, -0.30, -0.20]

    def test_normalization_against_references(self, results_dir, tmp_path):
        refs_path = str(tmp_path / "refs.json")
        with open(refs_path, "w") as fh:
            json.dump({"random_ref": -2.0, "oracle_ref": 0.0}, fh)
        payload = report_results(results_dir, str(tmp_path / "out"),
                                 num_bootstrap=50, references_path=refs_path)
        assert payload["metadata"]["normalized"] is True
        assert payload["metadata"]["references"]["random_ref"] == -2.0
        # score = (raw - random) / (oracle - random)
        assert payload["cells"]["adaptive"]["scores"] == pytest.approx(
            [0.75, 0.65, 0.85])

    def test_references_missing_key_rejected(self, results_dir, tmp_path):
        refs_path = str(tmp_path / "refs.json")
        with open(refs_path, "w") as fh:
            json.dump({"random_ref": -2.0}, fh)
        with pytest.raises(ReportError, match="oracle_ref"):
            report_results(results_dir, str(tmp_path / "out"),
                           references_path=refs_path)

    def test_divergent_cell_is_isolated(self, results_dir, tmp_path):
        write_cell(results_dir, "bad", [
            make_log(0, [100, 200], [-1.0, float("nan")]),
        ])
        out = str(tmp_path / "out")
        payload = report_results(results_dir, out, num_bootstrap=50)
        assert sorted(payload["cells"]) == ["adaptive", "fixed_5"]
        assert "non-finite" in payload["errors"]["bad"]
        assert not os.path.exists(os.path.join(out, "efficiency__bad.csv"))
        with open(os.path.join(out, "aggregate.json")) as fh:
            assert "bad" in json.load(fh)["errors"]

    def test_empty_log_is_isolated(self, results_dir, tmp_path):
        write_cell(results_dir, "hollow", [make_log(0, [], [])])
        payload = report_results(results_dir, str(tmp_path / "out"),
                                 num_bootstrap=50)
        assert "empty run log" in payload["errors"]["hollow"]

    def test_every_cell_failing_raises(self, tmp_path):
        root = str(tmp_path / "results")
        write_cell(root, "bad", [make_log(0, [100], [float("inf")])])
        with pytest.raises(ReportError, match="every cell failed"):
            report_results(root, str(tmp_path / "out"), num_bootstrap=50)


class TestArtifactContents:
    def test_single_run_efficiency_degenerate_interval(self, tmp_path):
        root = str(tmp_path / "results")
        write_cell(root, "solo", [make_log(0, [100, 300], [1.0, 3.0])])
        out = str(tmp_path / "out")
        report_results(root, out, metric="mean", num_bootstrap=50)
        header, cols = read_csv_columns(os.path.join(out, "efficiency__solo.csv"))
        assert header == ["env_step", "mean", "ci_low", "ci_high"]
        assert cols["env_step"].tolist() == [100.0, 300.0]
        # resampling a single run always returns that run: CI collapses
        assert cols["mean"].tolist() == [1.0, 3.0]
        assert cols["ci_low"].tolist() == [1.0, 3.0]
        assert cols["ci_high"].tolist() == [1.0, 3.0]

    def test_union_grid_curves_use_carry_forward(self, tmp_path):
        root = str(tmp_path / "results")
        write_cell(root, "pair", [
            make_log(0, [100, 300], [1.0, 3.0], iutd=[5.0, 2.5]),
            make_log(1, [200, 300], [2.0, 4.0], iutd=[5.0, 10.0]),
        ])
        out = str(tmp_path / "out")
        report_results(root, out, metric="mean", num_bootstrap=50)

        # aligned scores: run0 -> [1,1,3], run1 -> [2,2,4] (pre-start
        # queries take the first value)
        header, cols = read_csv_columns(os.path.join(out, "curves__pair.csv"))
        assert header == ["env_step", "mean", "std"]
        assert cols["env_step"].tolist() == [100.0, 200.0, 300.0]
        assert cols["mean"].tolist() == [1.5, 1.5, 3.5]
        assert cols["std"].tolist() == [0.5, 0.5, 0.5]

        _, eff = read_csv_columns(os.path.join(out, "efficiency__pair.csv"))
        assert eff["mean"].tolist() == [1.5, 1.5, 3.5]
        assert np.all(eff["ci_low"] <= eff["mean"])
        assert np.all(eff["mean"] <= eff["ci_high"])
        assert np.all(eff["ci_low"] >= [1.0, 1.0, 3.0])
        assert np.all(eff["ci_high"] <= [2.0, 2.0, 4.0])

    def test_iutd_trajectory_stats(self, tmp_path):
        root = str(tmp_path / "results")
        write_cell(root, "pair", [
            make_log(0, [100, 200], [0.0, 0.0], iutd=[5.0, 2.5]),
            make_log(1, [100, 200], [0.0, 0.0], iutd=[5.0, 10.0]),
        ])
        out = str(tmp_path / "out")
        report_results(root, out, num_bootstrap=50)
        header, cols = read_csv_columns(os.path.join(out, "iutd__pair.csv"))
        assert header == ["env_step", "iutd_mean", "iutd_std"]
        assert cols["iutd_mean"].tolist() == [5.0, 6.25]
        assert cols["iutd_std"].tolist() == [0.0, 3.75]


class ZeroRewardEnv:
    """Every policy earns exactly zero: forces degenerate references."""

    state_dim = 1
    action_dim = 1
    action_bounds = (-1.0, 1.0)
    horizon = 5

    def reset(self, rng):
        return np.zeros(1)

    def step(self, state, action, rng):
        return state, 0.0, False

    def mean_step(self, states, actions):
        return states, np.zeros(len(states))


class TestCalibration:
    def test_oracle_reference_beats_random(self):
        env = PendulumEnv(noise_std=0.05, horizon=200)
        refs = calibrate_references(env, episodes=2, seed=0,
                                    horizon=12, n_candidates=24)
        assert refs["oracle_ref"] > refs["random_ref"] + 300.0
        assert refs["degenerate"] is False
        assert refs["episodes"] == 2
        assert refs["seed"] == 0

    def test_degenerate_references_flagged(self):
        refs = calibrate_references(ZeroRewardEnv(), episodes=3, seed=1,
                                    horizon=2, n_candidates=4)
        assert refs["random_ref"] == 0.0
        assert refs["oracle_ref"] == 0.0
        assert refs["degenerate"] is True

    def test_nonpositive_episodes_rejected(self):
        with pytest.raises(ConfigError, match="episodes"):
            calibrate_references(ZeroRewardEnv(), episodes=0, seed=0)

    def test_calibrate_env_writes_reference_file(self, tmp_path):
        out_path = str(tmp_path / "refs.json")
        refs = calibrate_env("pendulum", episodes=1, seed=0, out_path=out_path,
                             horizon=12, n_candidates=24)
        with open(out_path) as fh:
            on_disk = json.load(fh)
        assert on_disk == refs
        assert on_disk["env"] == "pendulum"
        assert on_disk["horizon"] == 12
        assert on_disk["n_candidates"] == 24
        assert {"random_ref", "oracle_ref", "episodes", "seed",
                "degenerate"} <= set(on_disk)

    def test_unknown_env_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown env"):
            calibrate_env("cartpole", episodes=1, seed=0,
                          out_path=str(tmp_path / "refs.json"))
