import csv
import json

import pytest

from clicklab.cli import main

TINY = {
    "gen": {"n_clusters": 15, "mean_cluster_size": 20, "max_results": 10, "proxy_noise_sd": 0.2},
    "train_sizes": [100, 300],
    "test_size": 400,
    "exponents": [0.5, 2.0],
    "replications": 2,
    "master_seed": 5,
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=2))
    return p


def test_run_writes_four_files(tmp_path):
    cfg = write(tmp_path, "c.json", TINY)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["diagnostics.csv", "manifest.json", "results.csv",
                                                     "summary.csv"]
    header = (out / "results.csv").read_text().splitlines()[0]
    assert header == "exponent,train_size,feature,replication,clicks_per_search"
    assert (out / "diagnostics.csv").read_text().startswith("exponent,train_size,replication,corr_ipwctr_ipwcoec")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 5 and len(manifest["config_hash"]) == 64


def test_run_rerun_and_threads_byte_identical(tmp_path):
    cfg = write(tmp_path, "c.json", TINY)
    outs = []
    for i, threads in enumerate(["1", "1", "2"]):
        out = tmp_path / f"o{i}"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--threads", threads, "--quiet"]) == 0
        outs.append(out)
    for name in ("results.csv", "summary.csv", "diagnostics.csv"):
        blobs = {(o / name).read_bytes() for o in outs}
        assert len(blobs) == 1, name


def test_run_unknown_key_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {**TINY, "colour": "blue"})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 2
    err = capsys.readouterr().err
    assert "colour" in err and "c.json:" in err


def test_run_bad_json_exit_2(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{\n  \"replications\": ,\n}")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_oracle_default_and_zero_reps(tmp_path):
    out = tmp_path / "o"
    cfg = write(tmp_path, "o.json", {"replications": 20_000})
    assert main(["oracle", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    rows = list(csv.DictReader(open(out / "oracle.csv")))
    assert list(rows[0]) == ["claim", "expected", "measured", "stderr", "status"]
    assert {r["status"] for r in rows} <= {"PASS", "INCONCLUSIVE", "SKIPPED"}
    bad = write(tmp_path, "z.json", {"replications": 0})
    assert main(["oracle", "--config", str(bad), "--out", str(tmp_path / "z"), "--quiet"]) == 2


@pytest.fixture(scope="module")
def results_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("res")
    cfg = d / "c.json"
    cfg.write_text(json.dumps({**TINY, "export_feature_pairs": True}))
    assert main(["run", "--config", str(cfg), "--out", str(d / "out"), "--quiet"]) == 0
    return d / "out"


def test_plotdata_fig1(results_dir, tmp_path):
    out = tmp_path / "fig1.csv"
    assert main(["plotdata", "--results", str(results_dir / "results.csv"), "--figure", "fig1",
                 "--out", str(out), "--quiet"]) == 0
    rows = list(csv.DictReader(open(out)))
    assert {r["feature"] for r in rows} == {"TRUE_RELEVANCE", "PROXY", "IPW_CTR"}
    assert {r["train_size"] for r in rows} == {"100", "300"}


def test_plotdata_fig7_over_exponents(results_dir, tmp_path):
    out = tmp_path / "fig7.csv"
    assert main(["plotdata", "--results", str(results_dir / "results.csv"), "--figure", "fig7",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert {r["exponent"] for r in rows} == {"0.5", "2.0"}


def test_plotdata_fig6_pairs(results_dir, tmp_path):
    out = tmp_path / "fig6.csv"
    assert main(["plotdata", "--results", str(results_dir / "results.csv"), "--figure", "fig6",
                 "--out", str(out)]) == 0
    assert out.read_text().startswith("exponent,train_size,replication,doc_id,ipw_ctr,ipw_coec")


def test_plotdata_truncated_exit_2(results_dir, tmp_path, capsys):
    lines = (results_dir / "results.csv").read_text().splitlines()
    trunc = tmp_path / "results.csv"
    trunc.write_text("\n".join(lines[: len(lines) - 5]) + "\n")
    assert main(["plotdata", "--results", str(trunc), "--figure", "fig7", "--out", str(tmp_path / "f.csv")]) == 2
    assert "missing sweep coverage" in capsys.readouterr().err
    # no pairs file next to this copy
    assert main(["plotdata", "--results", str(trunc), "--figure", "fig6", "--out", str(tmp_path / "g.csv")]) == 2
