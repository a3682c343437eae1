import json

import pytest
from click.testing import CliRunner

from mission_profiler.cli import main
from mission_profiler.synth import default_specs, generate, write_bundle

from conftest import tweet_row, write_tweet_lines, BASE_TS


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_bundle")
    specs = default_specs(n_on_mission=8, n_genuine=8)
    for s in specs:
        s.tweets_per_profile = (15, 25)
    write_bundle(generate(specs, K=20, seed=5), out)
    return out


@pytest.fixture(scope="module")
def run_dir(bundle_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_run")
    config = {
        "tweets": str(bundle_dir / "tweets.jsonl"),
        "profiles": str(bundle_dir / "profiles.jsonl"),
        "tpvs": str(bundle_dir / "tpvs.jsonl"),
        "K": 20,
        "toxicity_backend": "file",
        "toxicity_path": str(bundle_dir / "toxicity_cache.jsonl"),
        "labels": str(bundle_dir / "labels.csv"),
        "detect_group": "VII",
        "seed": 5,
    }
    config_path = out / "config.json"
    config_path.write_text(json.dumps(config))
    result = CliRunner().invoke(main, ["run", "--config", str(config_path), "--out", str(out / "run")])
    assert result.exit_code == 0, result.output
    return out / "run"


def test_run_produces_report(run_dir):
    assert (run_dir / "report" / "report.json").exists()


def test_ingest_command(tmp_path):
    tweets = tmp_path / "tweets.jsonl"
    write_tweet_lines(tweets, [tweet_row(f"t{i}", "p", ts=BASE_TS + i) for i in range(12)])
    out = tmp_path / "corpus.bin"
    result = CliRunner().invoke(main, ["ingest", "--tweets", str(tweets), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "kept 1 profiles / 12 tweets" in result.output
    assert out.exists()


def test_score_command_mock(tmp_path):
    tweets = tmp_path / "tweets.jsonl"
    write_tweet_lines(tweets, [tweet_row(f"t{i}", "p", ts=BASE_TS + i) for i in range(12)])
    corpus = tmp_path / "corpus.bin"
    CliRunner().invoke(main, ["ingest", "--tweets", str(tweets), "--out", str(corpus)])
    cache = tmp_path / "tox.jsonl"
    result = CliRunner().invoke(main, [
        "score", "--corpus", str(corpus), "--backend", "mock",
        "--toxicity-cache", str(cache), "--mock-value", "0.7",
    ])
    assert result.exit_code == 0, result.output
    assert "12 scored" in result.output


def test_kappa_command(tmp_path):
    ratings = tmp_path / "ratings.csv"
    ratings.write_text("a,a,a\na,a,b\nb,b,b\na,b,b\n")
    result = CliRunner().invoke(main, ["kappa", "--ratings", str(ratings)])
    assert result.exit_code == 0, result.output
    assert "kappa=0.3333" in result.output


def test_detect_command(bundle_dir, run_dir, tmp_path):
    out = tmp_path / "designations.json"
    result = CliRunner().invoke(main, [
        "detect",
        "--corpus", str(run_dir / "ingest" / "corpus.bin"),
        "--tpv", str(bundle_dir / "tpvs.jsonl"),
        "--toxicity-cache", str(bundle_dir / "toxicity_cache.jsonl"),
        "--groups", str(run_dir / "group" / "groups.json"),
        "--group", "VII",
        "--k", "20",
        "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text())
    assert payload["group"] == "VII"
    assert payload["designations"]


def test_train_and_evaluate_commands(bundle_dir, run_dir, tmp_path):
    model_path = tmp_path / "model.json"
    features = run_dir / "features" / "features.jsonl"
    labels = bundle_dir / "labels.csv"
    result = CliRunner().invoke(main, [
        "train", "--labels", str(labels), "--features", str(features),
        "--model", "svm", "--seed", "5", "--out", str(model_path),
    ])
    assert result.exit_code == 0, result.output
    assert model_path.exists()
    result = CliRunner().invoke(main, [
        "evaluate", "--model", str(model_path), "--features", str(features),
        "--labels", str(labels),
    ])
    assert result.exit_code == 0, result.output
    assert "f1=" in result.output


def test_ablate_command(bundle_dir, run_dir, tmp_path):
    out = tmp_path / "ablation.json"
    result = CliRunner().invoke(main, [
        "ablate", "--labels", str(bundle_dir / "labels.csv"),
        "--features", str(run_dir / "features" / "features.jsonl"),
        "--seed", "5", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    table = json.loads(out.read_text())["table"]
    assert len(table) == 4


def test_flag_command(bundle_dir, run_dir, tmp_path):
    model_path = tmp_path / "model.json"
    CliRunner().invoke(main, [
        "train", "--labels", str(bundle_dir / "labels.csv"),
        "--features", str(run_dir / "features" / "features.jsonl"),
        "--model", "svm", "--seed", "5", "--out", str(model_path),
    ])
    out = tmp_path / "wild.json"
    result = CliRunner().invoke(main, [
        "flag", "--model", str(model_path),
        "--features", str(run_dir / "features" / "features.jsonl"),
        "--groups", str(run_dir / "group" / "groups.json"),
        "--exclude-group", "VII", "--sample", "5", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert "flagged" in result.output


def test_group_command(bundle_dir, run_dir, tmp_path):
    out = tmp_path / "groups.json"
    result = CliRunner().invoke(main, [
        "group", "--corpus", str(run_dir / "ingest" / "corpus.bin"),
        "--tpv", str(bundle_dir / "tpvs.jsonl"), "--k", "20",
        "--out", str(out), "--cdf-csv", str(tmp_path / "cdf.csv"),
    ])
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text())["groups"]
    assert (tmp_path / "cdf.csv").read_text().startswith("group,H")


def test_synth_command_deterministic(tmp_path):
    runner = CliRunner()
    for name in ("a", "b"):
        result = runner.invoke(main, ["synth", "--seed", "3", "--out", str(tmp_path / name)])
        assert result.exit_code == 0, result.output
    assert (tmp_path / "a" / "tweets.jsonl").read_bytes() == (tmp_path / "b" / "tweets.jsonl").read_bytes()


def test_stage_failure_exit_code(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"tweets": str(tmp_path / "missing.jsonl")}))
    result = CliRunner().invoke(main, ["run", "--config", str(config), "--out", str(tmp_path / "run")])
    assert result.exit_code == 2  # config failure class


def test_flag_group_range_parsing():
    from mission_profiler.cli import _parse_group_selection

    assert _parse_group_selection("II..VII", "VIII") == ["II", "III", "IV", "V", "VI", "VII"]
    assert _parse_group_selection("II,IV", "VIII") == ["II", "IV"]
    assert _parse_group_selection(None, "VII") == ["I", "II", "III", "IV", "V", "VI", "VIII"]


def test_topics_baseline_command(run_dir, tmp_path):
    out = tmp_path / "topics"
    result = CliRunner().invoke(main, [
        "topics", "--baseline", "--corpus", str(run_dir / "ingest" / "corpus.bin"),
        "--k", "20", "--seed", "5", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert (out / "tpvs.jsonl").exists()
    assert (out / "catalog.tsv").read_text().startswith("0\teveryday")


def test_metrics_command(bundle_dir, run_dir, tmp_path):
    out = tmp_path / "metrics.jsonl"
    result = CliRunner().invoke(main, [
        "metrics", "--corpus", str(run_dir / "ingest" / "corpus.bin"),
        "--toxicity-cache", str(bundle_dir / "toxicity_cache.jsonl"),
        "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(rows) == 16
    assert all("burstiness" in r for r in rows)
