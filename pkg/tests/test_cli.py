import csv
import json

import numpy as np
import pytest

from isacdesign import cli
from isacdesign.config import format_config

from conftest import small_config


def write_cfg(tmp_path, **kw):
    p = tmp_path / "small.cfg"
    p.write_text(format_config(small_config(max_outer=20, **kw)))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_design_outputs_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path)
    codes = [cli.main(["design", "--config", cfg, "--out", str(tmp_path / d)]) for d in ("a", "b")]
    assert codes[0] in (0, 2) and codes[0] == codes[1]
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "X.csv").read_text() == (b / "X.csv").read_text()
    rows = read_csv(a / "trace.csv")
    assert list(rows[0]) == cli.TRACE_HEADER
    summary = json.loads((a / "summary.json").read_text())
    assert summary["outer_iters"] == len(rows)
    X = cli.read_complex_csv(a / "X.csv")
    assert X.shape == (2, 8) and np.allclose(np.abs(X), 1.0)
    assert float(rows[-1]["v"]) == summary["final"]["v"]


def test_seed_flag_changes_design(tmp_path):
    cfg = write_cfg(tmp_path)
    cli.main(["design", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["design", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "9"])
    assert (tmp_path / "a" / "X.csv").read_text() != (tmp_path / "b" / "X.csv").read_text()


def test_missing_key_exits_1(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("n_tx = 2\n")
    assert cli.main(["design", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "missing" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_montecarlo_aggregates(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "mc"
    assert cli.main(["montecarlo", "--config", cfg, "--seeds", "3", "--out", str(out)]) == 0
    seeds = read_csv(out / "seeds.csv")
    assert [int(r["seed"]) for r in seeds] == [0, 1, 2]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_seeds"] == 3 and summary["n_ok"] == 3
    assert summary["mean_final"]["sum_rate"] == pytest.approx(np.mean([float(r["sum_rate"]) for r in seeds]))
    hist = read_csv(out / "inner_hist.csv")
    total = sum(int(r["count"]) for r in hist)
    within = sum(int(r["count"]) for r in hist if int(r["sweeps"]) <= 10)
    assert summary["inner_within_10"] == pytest.approx(within / total)
    curves = read_csv(out / "curves.csv")
    assert len(curves) == max(int(r["outer_iters"]) for r in seeds)


def test_sweep_single_value_matches_design(tmp_path):
    cfg = write_cfg(tmp_path)
    assert cli.main(["sweep", "--config", cfg, "--axis", "alpha", "--values", "0.2",
                     "--out", str(tmp_path / "sw")]) in (0, 2)
    rows = read_csv(tmp_path / "sw" / "sweep.csv")
    assert len(rows) == 1 and float(rows[0]["alpha"]) == 0.2
    cli.main(["design", "--config", cfg, "--out", str(tmp_path / "d")])
    summary = json.loads((tmp_path / "d" / "summary.json").read_text())
    assert float(rows[0]["sum_rate"]) == summary["final"]["sum_rate"]


def test_sweep_rejects_bad_values(tmp_path):
    cfg = write_cfg(tmp_path)
    assert cli.main(["sweep", "--config", cfg, "--axis", "k_max", "--values", "1.5",
                     "--out", str(tmp_path / "sw")]) == 1
    assert cli.main(["sweep", "--config", cfg, "--axis", "alpha", "--values", "x",
                     "--out", str(tmp_path / "sw")]) == 1


def test_image_zero_noise_empty_scene(tmp_path):
    cfg = write_cfg(tmp_path)
    design = tmp_path / "d"
    cli.main(["design", "--config", cfg, "--out", str(design)])
    scene = tmp_path / "empty.txt"
    scene.write_text("# no scatterers\n")
    out = tmp_path / "img"
    assert cli.main(["image", "--config", cfg, "--scene", str(scene), "--snr-db", "inf",
                     "--design", str(design), "--out", str(out)]) == 0
    rows = read_csv(out / "image.csv")
    assert len(rows) == 181 and len(rows[0]) == 1 + 5
    assert all(float(v) == 0.0 for r in rows for k, v in r.items() if k != "angle_deg")
    pgm = (out / "image.pgm").read_bytes()
    assert pgm.startswith(b"P5\n5 181\n255\n") and set(pgm.split(b"255\n", 1)[1]) == {0}


def test_image_unreadable_scene_exits_1(tmp_path):
    cfg = write_cfg(tmp_path)
    assert cli.main(["image", "--config", cfg, "--scene", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path / "img")]) == 1


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    cli.atomic_write(p, "one")
    cli.atomic_write(p, b"two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]


def test_complex_csv_round_trip(tmp_path, rng):
    M = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    p = tmp_path / "m.csv"
    p.write_text(cli.complex_csv(M))
    assert np.array_equal(cli.read_complex_csv(p), M)
