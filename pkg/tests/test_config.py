import math

import pytest

from fastslow.config import (ConfigError, ScanConfig, builtin_system_path, load_scan,
                             load_scan_dict, load_system, load_system_dict)

BASE = {"n": 2, "d": 1, "ratios": ["1", "sqrt(2)"], "E_star": 2.0, "E0_star": 0.1,
        "potential": [["1/2", [2], [0, 0]], ["1/2", [2], [1, 0]]]}


def test_builtin_files_load():
    system = load_system(builtin_system_path())
    assert (system.n, system.d) == (2, 1)
    assert system.slow_bound == pytest.approx(math.sqrt(0.2))
    cfg = load_scan(builtin_system_path("scan"))
    assert cfg.epsilons == tuple(sorted(cfg.epsilons, reverse=True))
    assert len(cfg.family_members()) == 5


def test_omega_form_sets_epsilon():
    data = dict(BASE)
    del data["ratios"]
    data["omega"] = ["100*sqrt(2)", "100"]
    system = load_system_dict(data)
    freq = system.frequencies()
    assert freq.epsilon == pytest.approx(0.01)
    assert sorted(freq.omega) == pytest.approx([100, 100 * math.sqrt(2)])
    with pytest.raises(ConfigError):
        load_system_dict(dict(BASE, omega=["1", "2"]))


@pytest.mark.parametrize("bad", [
    {"n": 0},
    {"ratios": ["1"]},
    {"energy": -1},
    {"potential": [["1", [2]]]},
    {"potential": [["1", [2], [1]]]},
])
def test_bad_system_rejected(bad):
    with pytest.raises(ConfigError):
        load_system_dict(dict(BASE, **bad))


def test_missing_epsilon():
    with pytest.raises(ConfigError):
        load_system_dict(BASE).frequencies()


def test_scan_validation():
    system = load_system_dict(BASE)
    for kw in ({"epsilons": ()}, {"epsilons": (0.01, 0.1)}, {"epsilons": (0.1, 0.1)},
               {"epsilons": (0.1, -0.1)}, {"N": 0}, {"b": 1.0}, {"workers": 0}):
        args = dict(epsilons=(0.1, 0.05))
        args.update(kw)
        with pytest.raises(ConfigError):
            ScanConfig(system, **args)
    with pytest.raises(ConfigError):
        load_scan_dict({"system": BASE, "epsilons": [0.1], "colour": "red"})


def test_family_members():
    system = load_system_dict(BASE)
    cfg = ScanConfig(system, (0.1,), families=("3/2", "golden", ("1", "1.25"), "random:3"), seed=4)
    members = cfg.family_members()
    assert [m.tag for m in members[:3]] == ["3/2", "golden", "explicit:1,1.25"]
    rand = [m for m in members if m.tag == "random"]
    assert len(rand) == 3 and all(1 <= float(m.ratios[1]) <= 2 for m in rand)
    assert members == cfg.family_members()
    with pytest.raises(ConfigError):
        ScanConfig(system, (0.1,), families=("cubic",)).family_members()


def test_scan_file_paths_resolved(tmp_path):
    (tmp_path / "sys.toml").write_text(builtin_system_path().read_text())
    (tmp_path / "scan.toml").write_text('system = "sys.toml"\nepsilons = [0.1]\noutput = "out.csv"\n')
    cfg = load_scan(tmp_path / "scan.toml")
    assert cfg.output == str(tmp_path / "out.csv")
    assert cfg.system.n == 2
