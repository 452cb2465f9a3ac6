import json
import re
import subprocess
import sys

import numpy as np
import pytest

from bril.cli import main
from bril.demo_store import load_demoset

FAST = ["--archetypes", "rush:15,mix:15,siege:15", "--epochs", "2", "--eval-episodes", "4",
        "--adapt-episodes", "6"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "out"
    assert main(["pipeline", "--seed", "5", "--out-dir", str(out), *FAST]) == 0
    return out


def test_pipeline_artifacts(run_dir):
    for name in ("demos.jsonl", "descriptors.csv", "pca.json", "coords.csv", "labels.csv", "centroids.csv",
                 "evaluation.csv", "adaptation.csv", "adaptation_summary.csv", "clusters.svg",
                 "models/policy_il.json", "models/policy_bril.json", "models/accuracy.csv"):
        assert (run_dir / name).is_file(), name
    for csv_path in list(run_dir.glob("*.csv")) + list((run_dir / "models").glob("*.csv")):
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "# format-version: 1", csv_path.name
        assert "," in lines[1]


def test_evaluation_rows_follow_methods(run_dir):
    rows = [l.split(",")[0] for l in (run_dir / "evaluation.csv").read_text().splitlines()[2:]]
    assert rows[0] == "IL"
    assert any(re.fullmatch(r"IL \(C\d+\)", r) for r in rows)
    assert any(re.fullmatch(r"BRIL \(C\d+\)", r) for r in rows)
    summary = (run_dir / "adaptation_summary.csv").read_text().splitlines()
    assert summary[2].startswith("BRIL (UCB1),")


def test_stages_rerun_individually(run_dir, tmp_path):
    # re-running one stage from persisted inputs reproduces its artifact
    out = tmp_path / "again"
    out.mkdir()
    (out / "demos.jsonl").write_bytes((run_dir / "demos.jsonl").read_bytes())
    assert main(["extract", "--out-dir", str(out)]) == 0
    assert main(["reduce", "--out-dir", str(out)]) == 0
    assert main(["cluster", "--out-dir", str(out)]) == 0
    for name in ("descriptors.csv", "pca.json", "coords.csv", "labels.csv", "centroids.csv"):
        assert (out / name).read_bytes() == (run_dir / name).read_bytes(), name


def test_gen_demos_deterministic_and_loadable(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for p in (a, b):
        assert main(["gen-demos", "--seed", "2", "--archetypes", "rush:3,siege:3", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(load_demoset(a)) == 6


def test_gen_demos_missing_dir(tmp_path, capsys):
    target = tmp_path / "nope" / "demos.jsonl"
    assert main(["gen-demos", "--archetypes", "rush:2", "--out", str(target)]) != 0
    assert not target.parent.exists()
    assert "does not exist" in capsys.readouterr().err


def test_pipeline_requires_seed(tmp_path):
    assert main(["pipeline", "--out-dir", str(tmp_path / "o")]) == 2


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"eps": -1}))
    assert main(["pipeline", "--seed", "1", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["pipeline", "--seed", "1", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    assert main(["extract", "--out-dir", str(tmp_path)]) == 2  # no demos file


def test_stage_failure_exit_3(tmp_path, capsys):
    bad = tmp_path / "demos.jsonl"
    bad.write_text('{"record": "demo"}\n')
    assert main(["extract", "--out-dir", str(tmp_path)]) == 3
    assert "extract" in capsys.readouterr().err


def test_pipeline_failure_keeps_prior_artifacts(tmp_path):
    out = tmp_path / "o"
    # min_pts larger than the corpus: every point is noise, so adaptation has no
    # options and fails after the earlier stages wrote their files
    code = main(["pipeline", "--seed", "1", "--out-dir", str(out), "--archetypes", "rush:3",
                 "--min-pts", "50", "--epochs", "1", "--eval-episodes", "2", "--adapt-episodes", "2"])
    assert code == 3
    assert (out / "demos.jsonl").is_file() and (out / "evaluation.csv").is_file()
    assert not (out / "adaptation.csv").exists()


def test_full_rank_pipeline(tmp_path):
    out = tmp_path / "o"
    assert main(["pipeline", "--seed", "3", "--out-dir", str(out), "--p", "5", *FAST]) == 0
    header = (out / "coords.csv").read_text().splitlines()[1]
    assert header == "id,c0,c1,c2,c3,c4"


def test_plot_colors(run_dir, tmp_path):
    svg = (run_dir / "clusters.svg").read_text()
    _, labels = np.loadtxt(run_dir / "labels.csv", delimiter=",", skiprows=2, usecols=(0, 3), unpack=True)
    fills = set(re.findall(r'r="3" fill="(#[0-9a-f]{6})"', svg))
    n_clusters = len(set(labels.astype(int)) - {-1})
    assert len(fills - {"#000000"}) == n_clusters
    assert ("#000000" in fills) == bool((labels == -1).any())
    assert main(["plot", str(run_dir / "labels.csv"), "--out", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").read_bytes() == (run_dir / "clusters.svg").read_bytes()


def test_plot_three_clusters_and_noise(tmp_path):
    rows = ["# format-version: 1", "index,x,y,label"]
    pts = [(0, 0, 0), (0.1, 0, 0), (5, 5, 1), (5.1, 5, 1), (9, 0, 2), (9, 0.1, 2), (3, 3, -1)]
    rows += [f"{i},{x},{y},{l}" for i, (x, y, l) in enumerate(pts)]
    p = tmp_path / "l.csv"
    p.write_text("\n".join(rows) + "\n")
    assert main(["plot", str(p)]) == 0
    svg = p.with_suffix(".svg").read_text()
    fills = set(re.findall(r'r="3" fill="(#[0-9a-f]{6})"', svg))
    assert len(fills) == 4 and "#000000" in fills
    assert svg.count('fill="none"') == 3


def test_plot_empty_and_malformed(tmp_path):
    e = tmp_path / "e.csv"
    e.write_text("")
    assert main(["plot", str(e)]) == 0
    svg = e.with_suffix(".svg").read_text()
    assert svg.startswith("<?xml") and svg.rstrip().endswith("</svg>") and "<circle" not in svg
    bad = tmp_path / "bad.csv"
    bad.write_text("index,x,y,label\n0,a,b,c\n")
    assert main(["plot", str(bad)]) != 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "bril.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "pipeline" in r.stdout
