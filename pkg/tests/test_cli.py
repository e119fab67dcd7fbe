import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import oracles
from rfamado.cli import run
from rfamado.dataset import Dataset, GridSeries, save_dataset
from rfamado.simulate import planted_spec, sample_grid


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    root = tmp_path_factory.mktemp("planted")
    spec = planted_spec(n=80, per_cluster=20)
    (root / "spec.json").write_text(json.dumps(spec.to_dict()))
    assert run(["-q", "simulate", "--spec", str(root / "spec.json"), "--seed", "3",
                "--output", str(root / "data.csv")]) == 0
    return root, spec


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def last_error(capsys):
    lines = capsys.readouterr().err.strip().splitlines()
    return json.loads(lines[-1])


def test_pipeline_recovers_planted(planted, tmp_path):
    root, spec = planted
    out = tmp_path / "run"
    assert run(["-q", "pipeline", "--input", str(root / "data.csv"), "--k", "2", "--output-dir", str(out)]) == 0
    truth = spec.truth()
    agree = total = 0
    for h in ("north", "south"):
        rows = read_rows(out / f"partition_{h}.csv")
        names = sorted({truth[r["point_id"]] for r in rows})
        ref = np.array([names.index(truth[r["point_id"]]) for r in rows])
        lab = np.array([int(r["cluster"]) for r in rows])
        agree += len(rows) - oracles.min_disagreement(ref, lab, 2)
        total += len(rows)
    assert agree / total >= 0.95
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "pipeline"
    assert set(man["outputs"]) >= {str(out / "summary.json"), str(out / "partition_north.csv")}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["north"]["points"] == 40


def test_dissim_multiple_is_zero(tmp_path):
    y = np.array([1.0, 3.0, 2.0, 5.0, 4.0])
    d = Dataset((GridSeries("a", 1, 0, y, np.arange(5)), GridSeries("b", 2, 0, 2 * y, np.arange(5))))
    save_dataset(d, tmp_path / "d.csv")
    assert run(["-q", "dissim", "--input", str(tmp_path / "d.csv"), "--output", str(tmp_path / "m.csv")]) == 0
    rows = read_rows(tmp_path / "m.csv")
    assert len(rows) == 1 and float(rows[0]["d_rfa"]) == 0.0
    assert float(rows[0]["c_star"]) == pytest.approx(2.0)
    man = json.loads((tmp_path / "m.csv.manifest.json").read_text())
    assert man["inputs"] and len(man["outputs"]) == 2
    assert (tmp_path / "m.points.csv").read_text().splitlines()[1].startswith("0,a,")


def test_unknown_flag(tmp_path, capsys):
    out = tmp_path / "x.csv"
    assert run(["dissim", "--input", "nope.csv", "--output", str(out), "--bogus"]) == 2
    assert last_error(capsys)["error"] == "usage"
    assert list(tmp_path.iterdir()) == []


def test_missing_input_is_usage(tmp_path, capsys):
    assert run(["dissim", "--input", str(tmp_path / "none.csv"), "--output", str(tmp_path / "o.csv")]) == 2
    assert list(tmp_path.iterdir()) == []


def test_bad_config_is_usage(planted, tmp_path, capsys):
    root, _ = planted
    rc = run(["dissim", "--input", str(root / "data.csv"), "--output", str(tmp_path / "o.csv"), "--k-grid", "4"])
    assert rc == 2
    assert not (tmp_path / "o.csv").exists()


def test_data_error(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("point_id,lat,lon,year,value\na,0,0,1,-3\na,0,0,2,1\n")
    assert run(["dissim", "--input", str(tmp_path / "bad.csv"), "--output", str(tmp_path / "o.csv")]) == 3
    err = last_error(capsys)
    assert err["error"] == "data" and "non-positive" in err["message"]


def test_numeric_error(tmp_path, capsys):
    rc = run(["theory-surface", "--alphas", "0.5:0.5:1", "--ratios", "3:3:1", "--abs-tol", "1e-300",
              "--output", str(tmp_path / "s.csv")])
    assert rc == 4
    assert last_error(capsys)["error"] == "numeric"


def test_threads_byte_identical(planted, tmp_path, monkeypatch):
    root, _ = planted
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert run(["-q", "dissim", "--input", str(root / "data.csv"), "--output", str(a), "--threads", "1"]) == 0
    assert run(["-q", "dissim", "--input", str(root / "data.csv"), "--output", str(b), "--threads", "4"]) == 0
    monkeypatch.setenv("RFAMADO_THREADS", "3")
    assert run(["-q", "dissim", "--input", str(root / "data.csv"), "--output", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    hashes = [json.loads((tmp_path / f"{x}.csv.manifest.json").read_text())["outputs"] for x in "abc"]
    assert len({tuple(h.values()) for h in hashes}) == 1
    assert json.loads((tmp_path / "c.csv.manifest.json").read_text())["config"]["threads"] is None


def test_bad_env_threads(planted, tmp_path, monkeypatch):
    root, _ = planted
    monkeypatch.setenv("RFAMADO_THREADS", "many")
    assert run(["-q", "dissim", "--input", str(root / "data.csv"), "--output", str(tmp_path / "o.csv")]) == 2


def test_cluster_ensemble_compare_chain(planted, tmp_path):
    root, _ = planted
    data = str(root / "data.csv")
    t = str(tmp_path)
    assert run(["-q", "dissim", "--input", data, "--hemisphere", "north", "--output", f"{t}/m.csv"]) == 0
    assert run(["-q", "cluster", "--dissim", f"{t}/m.csv", "--k", "2", "--output", f"{t}/p1.csv"]) == 0
    rows = read_rows(f"{t}/p1.csv")
    assert rows[0]["point_id"] == "N0_000"
    assert sum(int(r["is_medoid"]) for r in rows) == 2
    # a second "model": same partition with labels swapped
    with open(f"{t}/p2.csv", "w") as fh:
        fh.write("point_id,cluster,is_medoid\n")
        for r in rows:
            fh.write(f"{r['point_id']},{1 - int(r['cluster'])},{r['is_medoid']}\n")
    assert run(["-q", "ensemble", "--partitions", f"{t}/p2.csv,{t}/p1.csv", "--output", f"{t}/c.csv",
                "--geojson", f"{t}/c.geojson", "--coords", data]) == 0
    cen = read_rows(f"{t}/c.csv")
    assert all(float(r["probability"]) == 1.0 for r in cen)
    gj = json.loads(open(f"{t}/c.geojson").read())
    assert len(gj["features"]) == len(cen)
    assert run(["-q", "compare", "--a", f"{t}/c.csv", "--b", f"{t}/c.csv", "--output", f"{t}/ch.csv"]) == 0
    assert all(r["changed"] == "0" for r in read_rows(f"{t}/ch.csv"))
    assert run(["-q", "ensemble", "--partitions", f"{t}/p1.csv", "--reference", f"{t}/c.csv",
                "--output", f"{t}/c2.csv"]) == 0


def test_ensemble_geojson_needs_coords(tmp_path, capsys):
    (tmp_path / "p.csv").write_text("point_id,cluster,is_medoid\na,0,1\nb,1,1\n")
    rc = run(["ensemble", "--partitions", str(tmp_path / "p.csv"), "--output", str(tmp_path / "c.csv"),
              "--geojson", str(tmp_path / "g.json")])
    assert rc == 2 and not (tmp_path / "c.csv").exists()


def test_shuffle_test(planted, tmp_path, capsys):
    root, _ = planted
    out = tmp_path / "s.csv"
    assert run(["-q", "shuffle-test", "--input", str(root / "data.csv"), "--k", "2", "--seed", "1",
                "--output", str(out)]) == 0
    frac = float(capsys.readouterr().out.strip().split("=")[1])
    assert frac > 0.5
    man = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    assert "N0_000" in man["random_streams"]["shuffle"]


def test_simulate_deterministic(planted, tmp_path):
    root, _ = planted
    out = tmp_path / "again.csv"
    assert run(["-q", "simulate", "--spec", str(root / "spec.json"), "--seed", "3", "--output", str(out)]) == 0
    assert out.read_bytes() == (root / "data.csv").read_bytes()


def test_theory_surface(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["-q", "theory-surface", "--alphas", "0.5:1:2", "--ratios", "1:2:2", "--output", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 4
    assert float(rows[-2]["d"]) == pytest.approx(1 / 6, abs=1e-7)


def test_help_and_entry_point():
    r = subprocess.run([sys.executable, "-m", "rfamado", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "pipeline" in r.stdout
    r = subprocess.run([sys.executable, "-m", "rfamado", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == 2
    assert json.loads(r.stderr.strip().splitlines()[-1])["error"] == "usage"
