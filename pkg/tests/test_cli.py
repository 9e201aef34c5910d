import numpy as np
import pytest

from fpslow.cli import main
from fpslow.csvio import read_columns, read_csv

SMALL = "[disc]\nX = 8.0\nnx = 161\nny = 19\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(SMALL)
    return str(p)


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["stationary", "--bogus", "1", "--out", "x.csv"])
    assert e.value.code == 2


def test_missing_or_bad_config(tmp_path, capsys):
    assert main(["stationary", "--config", str(tmp_path / "nope.cfg"), "--out",
                 str(tmp_path / "s.csv")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[disc]\nnxx = 3\n")
    assert main(["stationary", "--config", str(bad), "--out", str(tmp_path / "s.csv")]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_check_gap_gate(capsys):
    assert main(["check-gap", "--J", "2", "--eps", "1e-4", "--zeta", "1e-4", "--ny", "201"]) == 0
    out = capsys.readouterr().out
    kv = dict(line.split(" = ", 1) for line in out.strip().splitlines())
    assert kv["ok"] == "true"
    assert float(kv["L_spec"]) < 1
    assert main(["check-gap", "--J", "2", "--eps", "1e-2", "--ny", "39"]) == 1


def test_stationary_and_eigenbasis(cfg, tmp_path):
    assert main(["stationary", "--config", cfg, "--y", "0.5", "--out",
                 str(tmp_path / "ps.csv")]) == 0
    c = read_columns(tmp_path / "ps.csv")
    mass = np.trapezoid(list(c.values())[1], list(c.values())[0])
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert main(["eigenbasis", "--config", cfg, "--J", "3", "--out",
                 str(tmp_path / "basis.csv")]) == 0
    b = read_columns(tmp_path / "basis.csv")
    np.testing.assert_allclose(b["lambda"], [0, 1, 2, 3], atol=1e-12)


def test_coupling_long_format(cfg, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["coupling", "--config", cfg, "--J", "2", "--y", "0.0", "0.5", "--out",
                 str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["tensor", "k", "j", "y", "value"]
    assert {r[0] for r in rows} >= {"G", "Gkj", "Gtil", "Dkj", "Dtil"}


def test_coefficient_full_compare_reconstruct(cfg, tmp_path):
    d = str(tmp_path)
    assert main(["eigenbasis", "--config", cfg, "--J", "4", "--out", d + "/basis.csv"]) == 0
    assert main(["solve-coef", "--config", cfg, "--J", "4", "--T", "0.1", "--snapshots", "2",
                 "--exact", "--out", d + "/traj"]) == 0
    assert main(["solve-full", "--config", cfg, "--T", "0.1", "--dt", "5e-4", "--snapshots", "2",
                 "--project", "4", "--out", d + "/full"]) == 0
    assert main(["compare", "--config", cfg, "--full", d + "/full", "--traj", d + "/traj",
                 "--basis", d + "/basis.csv", "--out", d + "/cmp.csv"]) == 0
    cmp_ = read_columns(tmp_path / "cmp.csv")
    assert cmp_["L2"][0] < 1e-6
    assert np.all(cmp_["L2"] < 5e-3)
    assert main(["reconstruct", "--config", cfg, "--traj", d + "/traj", "--basis",
                 d + "/basis.csv", "--out", d + "/rec"]) == 0
    assert (tmp_path / "rec" / "density_0002.csv").exists()


def test_mc_outputs(cfg, tmp_path):
    assert main(["mc", "--config", cfg, "--paths", "2000", "--T", "0.02", "--seed", "5",
                 "--out", str(tmp_path / "mc")]) == 0
    _, rows = read_csv(tmp_path / "mc" / "absorbed.csv")
    assert len(rows) >= 1


def test_manifold_and_reduced(tmp_path):
    d = str(tmp_path)
    assert main(["manifold", "--J", "2", "--eps", "1e-4", "--ny", "201",
                 "--out", d + "/graph.csv"]) == 0
    meta = dict(read_csv(tmp_path / "graph_meta.csv")[1])
    assert meta["k0"] == "100"
    assert main(["reduced", "--graph", d + "/graph.csv", "--T", "0.01", "--dt", "1e-3",
                 "--out", d + "/red.csv"]) == 0
    assert (tmp_path / "red.csv").exists()
    assert main(["manifold", "--J", "2", "--eps", "1e-2", "--ny", "39",
                 "--out", d + "/g2.csv"]) == 1
