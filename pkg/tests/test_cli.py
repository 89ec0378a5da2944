import json
import math

import numpy as np
import pytest

from mechfol.cli import main
from mechfol.models import build_model, save_model


def run(tmp_path, *argv, name="out.json"):
    path = tmp_path / name
    code = main([*argv, "--json", str(path)])
    return code, json.loads(path.read_text())


def test_critical_points_hh(tmp_path):
    code, d = run(tmp_path, "critical-points", "--model", "henon-heiles")
    assert code == 0 and d["status"] == "ok"
    sad = [c for c in d["result"]["critical_points"] if c["kind"] == "saddle"]
    top = [c for c in sad if np.allclose(c["location"], [0.0, 1.0], atol=1e-10)]
    assert len(top) == 1 and top[0]["value"] == pytest.approx(1 / 6, abs=1e-12)


def test_stark_foliation_section(tmp_path):
    svg = tmp_path / "section.svg"
    code = main(["foliation", "--model", "stark", "--eps", "0.5", "--energy", "2.2",
                 "--out", str(svg)])
    assert code == 0
    text = svg.read_text()
    assert text.count('class="binding lyapunov"') == 2
    assert text.count('class="binding central"') == 1


def test_plane_profile_csv(tmp_path):
    out = tmp_path / "profile.csv"
    assert main(["plane", "--b", "3", "--f0", "1.0", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "s,f,g,d"
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1] ** 2 + math.sqrt(3) * data[:, 2] ** 2 - 2)) < 1e-12


def test_plane_obj(tmp_path):
    out = tmp_path / "plane.obj"
    assert main(["plane", "--b", "1", "--f0", "-0.5", "--out", str(out)]) == 0
    assert any(l.startswith("f ") for l in out.read_text().splitlines())


def test_lyapunov_and_index(tmp_path):
    E = str(1 / 6 + 1e-3)
    code, d = run(tmp_path, "lyapunov", "--model", "henon-heiles", "--energy", E)
    assert code == 0
    assert d["result"]["mu"] == 2 and d["result"]["floquet"] == "hyperbolic"
    code, d = run(tmp_path, "index", "--model", "henon-heiles", "--energy", E, "--iterates", "3")
    assert code == 0 and d["result"]["mu"] == 2


def test_custom_orbit_and_actions(tmp_path):
    code, d = run(tmp_path, "actions", "--model", "harmonic", "--state", "0,0.5,0,0",
                  "--period", str(2 * math.pi), "--energy", "0.125")
    assert code == 0
    assert "action" in json.dumps(d)
    code, d = run(tmp_path, "actions", "--model", "harmonic", "--state", "0,0.5,0,0")
    assert code == 2 and "--energy" in d["reason"]


def test_euler_regime(tmp_path):
    code, d = run(tmp_path, "euler-regime", "--mu", "0.25", "--c", "-0.2")
    assert code == 0 and d["result"]["regime"] == "II"


def test_hill_and_neck(tmp_path):
    code, d = run(tmp_path, "hill", "--model", "henon-heiles", "--energy", str(1 / 6))
    assert code == 0
    assert d["result"]["area"] == pytest.approx(3 * math.sqrt(3) / 4, abs=1e-6)
    code, d = run(tmp_path, "neck", "--approaches", "0.1,0.01,0.001")
    assert code == 0
    gains = [r["delta_min"] for r in d["result"]["runs"]]
    assert gains == sorted(gains)


def test_model_file(tmp_path):
    cfg = tmp_path / "m.json"
    save_model(build_model("chemical", {"alpha": 2.0, "beta": 1.0}), cfg)
    code, d = run(tmp_path, "critical-points", "--model-file", str(cfg))
    assert code == 0
    mins = [c for c in d["result"]["critical_points"] if c["kind"] == "minimum"]
    assert sorted(round(c["location"][0], 10) for c in mins) == [-round(math.sqrt(2), 10),
                                                                 round(math.sqrt(2), 10)]


@pytest.mark.parametrize("argv", [
    ["critical-points", "--model", "nope"],
    ["plane", "--f0", "2.0"],
    ["critical-points", "--model", "stark", "--eps", "-1"],
    ["euler-regime", "--mu", "0.25", "--c", "0.1"],
])
def test_validation_errors_exit_2(tmp_path, argv, capsys):
    code, d = run(tmp_path, *argv)
    assert code == 2
    assert d["status"] == "error" and d["kind"] == "validation" and d["reason"]
    assert d["reason"] in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["hill", "--model", "henon-heiles", "--energy", "0.1", "--point", "0,1.3"],
    ["hill", "--model", "stark", "--eps", "0.5", "--energy", "3"],
    ["lyapunov", "--model", "henon-heiles", "--state", "0.3,0.3,0.5,0.5", "--period", "3"],
])
def test_numerical_errors_exit_3(tmp_path, argv):
    code, d = run(tmp_path, *argv)
    assert code == 3
    assert d["status"] == "error" and d["kind"] == "numerical"


def test_unknown_verb_and_flag_are_rejected(capsys):
    with pytest.raises(SystemExit) as e:
        main(["bogus"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["critical-points", "--model", "henon-heiles", "--frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["critical-points", "--model", "stark", "--param", "eps=abc"])
    assert e.value.code == 2


@pytest.mark.parametrize("argv", [
    ["foliation", "--model", "stark", "--eps", "0.5", "--energy", "2.2"],
    ["index", "--model", "henon-heiles", "--energy", str(1 / 6 + 1e-3)],
])
def test_json_is_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main([*argv, "--json", str(a)]) == 0
    assert main([*argv, "--json", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
