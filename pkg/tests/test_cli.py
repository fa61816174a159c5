import csv
import json

import pytest

from cva.cli import main
from cva.model import load_model
from conftest import GOLDEN_DIR

SIM_CFG = """\
n_questions = 25
n_events = 900
crp_alpha = 0.8
true_lambda = 1.0
true_beta = 1.5
true_nu = 0.0
length_source = lognormal:6.0,0.5
question_weight_source = uniform
seed = 11
"""

FIT_CFG = """\
l2_weight = 1.0
tol = 1e-6
max_iters = 10000
drop_first_votes = true
seed = 0
"""


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Simulated community with fitted models, shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    (root / "sim.cfg").write_text(SIM_CFG)
    (root / "fit.cfg").write_text(FIT_CFG)
    assert run("simulate", "--config", str(root / "sim.cfg"),
               "--out", str(root / "T.jsonl"),
               "--truth", str(root / "truth.csv")) == 0
    assert run("fit", "--input", str(root / "T.jsonl"),
               "--config", str(root / "fit.cfg"),
               "--out", str(root / "model.json")) == 0
    assert run("fit", "--input", str(root / "T.jsonl"),
               "--freeze-beta", "0",
               "--out", str(root / "ablation.json")) == 0
    return root


class TestIngest:
    def test_golden_byte_identical_and_exit_codes(self, tmp_path):
        out = tmp_path / "out.jsonl"
        rejects = tmp_path / "rejects.txt"
        code = run("ingest", "--posts", str(GOLDEN_DIR / "Posts.xml"),
                   "--votes", str(GOLDEN_DIR / "Votes.xml"),
                   "--posthistory", str(GOLDEN_DIR / "PostHistory.xml"),
                   "--out", str(out), "--min-questions", "1",
                   "--reject-log", str(rejects))
        assert code == 0
        assert out.read_bytes() == \
            (GOLDEN_DIR / "expected.jsonl").read_bytes()
        assert rejects.read_text().count("\n") >= 2

    def test_community_too_small_exit_2(self, tmp_path):
        out = tmp_path / "out.jsonl"
        code = run("ingest", "--posts", str(GOLDEN_DIR / "Posts.xml"),
                   "--votes", str(GOLDEN_DIR / "Votes.xml"),
                   "--posthistory", str(GOLDEN_DIR / "PostHistory.xml"),
                   "--out", str(out))
        assert code == 2
        assert out.exists()  # explicit status, not silent empty output


class TestFit:
    def test_model_written(self, workspace):
        model = load_model(workspace / "model.json")
        assert model.fit_meta["converged"]
        assert model.fit_meta["final_grad_norm"] < 1e-6

    def test_frozen_beta_ablation(self, workspace):
        assert load_model(workspace / "ablation.json").beta == 0.0

    def test_nonconvergence_exit_3_model_still_written(self, workspace,
                                                       tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text("max_iters = 2\n")
        out = tmp_path / "model.json"
        code = run("fit", "--input", str(workspace / "T.jsonl"),
                   "--config", str(cfg), "--out", str(out))
        assert code == 3
        assert not load_model(out).fit_meta["converged"]

    def test_reproducible(self, workspace, tmp_path):
        out = tmp_path / "again.json"
        assert run("fit", "--input", str(workspace / "T.jsonl"),
                   "--config", str(workspace / "fit.cfg"),
                   "--out", str(out)) == 0
        assert out.read_bytes() == (workspace / "model.json").read_bytes()


class TestQuality:
    def test_csv_schema(self, workspace, tmp_path):
        out = tmp_path / "quality.csv"
        assert run("quality", "--model", str(workspace / "model.json"),
                   "--input", str(workspace / "T.jsonl"),
                   "--mode", "mean", "--integrate-length", "false",
                   "--out", str(out)) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows
        assert set(rows[0]) == {"question_id", "answer_id", "q", "Q_hat"}
        for row in rows:
            assert 0.0 < float(row["Q_hat"]) < 1.0

    def test_per_time_sum_mode_runs(self, workspace, tmp_path):
        out = tmp_path / "quality_sum.csv"
        assert run("quality", "--model", str(workspace / "model.json"),
                   "--input", str(workspace / "T.jsonl"),
                   "--mode", "per-time-sum", "--out", str(out)) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert any(float(r["Q_hat"]) > 1.0 for r in rows)


class TestSimulate:
    def test_truth_csv_schema(self, workspace):
        with open(workspace / "truth.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert set(rows[0]) == {"answer_id", "score", "source"}
        scores = [float(r["score"]) for r in rows]
        assert all(r["source"] == "synthetic_truth" for r in rows)
        assert min(scores) == -1.0 and max(scores) == 1.0

    def test_seeded_rerun_identical(self, workspace, tmp_path):
        out = tmp_path / "T2.jsonl"
        truth = tmp_path / "truth2.csv"
        assert run("simulate", "--config", str(workspace / "sim.cfg"),
                   "--out", str(out), "--truth", str(truth)) == 0
        assert out.read_bytes() == (workspace / "T.jsonl").read_bytes()
        assert truth.read_bytes() == (workspace / "truth.csv").read_bytes()


class TestToy:
    def test_scenario_1a_final_ordering(self, tmp_path):
        out = tmp_path / "toy.csv"
        assert run("toy", "--scenario", "1a", "--out", str(out)) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        final = {r["answer_id"]: float(r["quality"])
                 for r in rows if r["tick"] == "6"}
        assert final["B"] > final["A"]


class TestProfileAndMap:
    def test_profile_then_map(self, workspace, tmp_path):
        p1 = tmp_path / "p1.json"
        assert run("profile", "--model", str(workspace / "model.json"),
                   "--input", str(workspace / "T.jsonl"),
                   "--community", "alpha", "--out", str(p1)) == 0
        p2 = tmp_path / "p2.json"
        assert run("profile", "--model", str(workspace / "ablation.json"),
                   "--input", str(workspace / "T.jsonl"),
                   "--community", "beta", "--out", str(p2)) == 0
        out = tmp_path / "map.csv"
        assert run("map", "--profiles", str(p1), str(p2),
                   "--out", str(out)) == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["community", "herding_degree",
                           "position_sensitivity", "above_median_herding",
                           "above_median_position"]
        assert rows[-1][0] == "MEDIAN"
        assert {r[0] for r in rows[1:-1]} == {"alpha", "beta"}


class TestCounterfactual:
    def test_curves_and_power_law(self, workspace, tmp_path):
        out = tmp_path / "curves.csv"
        assert run("counterfactual", "--model",
                   str(workspace / "model.json"),
                   "--input", str(workspace / "T.jsonl"),
                   "--ranks", "10", "--out", str(out)) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        moods = {r["mood"] for r in rows}
        assert moods == {"pos", "neutral", "neg"}
        assert sum(1 for r in rows if r["mood"] == "pos") == 10
        with open(tmp_path / "curves_powerlaw.json") as fh:
            fits = json.load(fh)
        assert set(fits) == {"pos", "neutral", "neg"}
        for f in fits.values():
            assert f["b"] >= 0.0


class TestEvaluate:
    def test_report_schema(self, workspace, tmp_path):
        out = tmp_path / "report.json"
        assert run("evaluate", "--input", str(workspace / "T.jsonl"),
                   "--model", str(workspace / "model.json"),
                   "--ablation", str(workspace / "ablation.json"),
                   "--labels", str(workspace / "truth.csv"),
                   "--seed", "7", "--out", str(out)) == 0
        with open(out) as fh:
            report = json.load(fh)
        assert set(report["mean_tau"]) == {"vote_diff", "cva",
                                           "no_position"}
        assert set(report["p_values"]) == {"tau", "residual"}
        assert report["n_questions"] > 0


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run("toy", "--scenario", "1a", "--frobnicate")
        assert exc.value.code == 64

    def test_unknown_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run("transmogrify")
        assert exc.value.code == 64

    def test_unreadable_file_exit_66(self, tmp_path):
        assert run("fit", "--input", str(tmp_path / "missing.jsonl"),
                   "--out", str(tmp_path / "m.json")) == 66
