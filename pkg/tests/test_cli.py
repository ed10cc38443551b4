import json

import pytest

from fastslow.cli import main


def test_dirichlet_json(capsys):
    assert main(["dirichlet", "sqrt(2)", "--qcap", "10", "--count", "4", "--N", "2", "--b", "1/10"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["capped"]["q"] == 5 and out["capped"]["p"] == [7]
    assert [s["q"] for s in out["sequence"]] == [2, 5, 12, 29]
    assert out["model"]["qden"] == 29 and out["model"]["valid"]


def test_normalize_and_certify(capsys, tmp_path):
    path = tmp_path / "nf.txt"
    assert main(["normalize", "--epsilon", "0.01", "--N", "2", "--output", str(path)]) == 0
    assert "certified = True" in capsys.readouterr().out
    assert "# generator 1" in path.read_text()
    assert main(["certify", "--epsilon", "0.01", "--N", "2", "--b", "0.1"]) == 0
    assert "conservation predicate holds = True" in capsys.readouterr().out


def test_simulate(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--epsilon", "0.1", "--T", "10", "--output", str(out)]) == 0
    text = capsys.readouterr().out
    assert "status = ok" in text and out.exists()


def test_scan(capsys, tmp_path):
    cfg = tmp_path / "scan.toml"
    sys_path = tmp_path / "sys.toml"
    from fastslow.config import builtin_system_path
    sys_path.write_text(builtin_system_path().read_text())
    cfg.write_text('system = "sys.toml"\nepsilons = [0.2, 0.1]\nN = 1\nb = 0.5\nfamilies = ["sqrt2", "3/2"]\n')
    assert main(["scan", str(cfg), "--output", str(tmp_path / "d.csv")]) == 0
    assert "uniformity" in capsys.readouterr().out
    assert (tmp_path / "d.csv").read_text().count("\n") == 5


def test_bad_input_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("n = 0\nd = 1\n")
    assert main(["normalize", "--system", str(bad), "--epsilon", "0.1"]) == 2
    assert main(["dirichlet", "sqrt(2)", "--qcap", "1"]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate"])
