import json
from pathlib import Path

import pytest

from holoslow.cli import dumps, main

SPECS = Path(__file__).parent.parent / "specs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out else None), out.err


def spec(name):
    return SPECS / f"{name}.json"


def test_analyze_divergent_general_system(capsys):
    code, rep, _ = run(capsys, "analyze", "--spec", spec("eq12"))
    assert code == 0
    assert rep["schema"] == "holoslow.report/1"
    assert rep["conclusion"] == "divergent formal series: no holomorphic graph manifold"
    assert rep["hyperbolicity"]["signs"] == "+"


def test_analyze_center_persists(capsys):
    code, rep, _ = run(capsys, "analyze", "--spec", spec("linear_linear_center"))
    assert code == 0
    assert "center persists" in rep["persistence"]["notes"]


def test_series_pole_coefficients(capsys):
    code, rep, _ = run(capsys, "series", "--spec", spec("linear_pole"), "--order", 12)
    assert code == 0
    s = rep["series"][0]
    eps = s["eps"]
    coeffs = {k: complex(*v) for k, v in s["coefficients"]}
    assert coeffs[3] == pytest.approx(1 / (3 * eps))
    assert coeffs[5] == pytest.approx(1 / (15 * eps**2))
    assert s["verdict"]["verdict"] == "convergent"


def test_series_sf2_toy(capsys):
    code, rep, _ = run(capsys, "series", "--spec", spec("sf2_toy"), "--order", 6)
    assert code == 0
    h = rep["series"][0]["h"]
    assert h["var"] == "z"
    assert complex(*h["coeffs"][2]) == pytest.approx(0.1 / (2 - 0.1j))


def test_resonance_exit_code_and_report(capsys):
    code, rep, err = run(capsys, "series", "--spec", spec("sf2_resonant"))
    assert code == 3
    assert rep["error"]["type"] == "Resonance" and rep["error"]["k"] == 2
    assert "Resonance" in err


def test_unsupported_family_is_a_validation_error(capsys):
    code, rep, err = run(capsys, "series", "--spec", spec("example43"))
    assert code == 2 and rep is None and "UnsupportedFamily" in err


def test_malformed_spec(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "analyze", "--spec", bad)[0] == 2
    assert run(capsys, "analyze", "--spec", tmp_path / "missing.json")[0] == 2


def test_zero_span_rejected(capsys):
    code, rep, _ = run(capsys, "integrate", "--spec", spec("example43"), "--ic", "0.1+1i,1", "--span", 0)
    assert code == 2 and rep is None


def test_verify_attraction(capsys):
    code, rep, _ = run(capsys, "verify", "--spec", spec("example43"), "--check", "attraction")
    assert code == 0
    assert [a["eps"] for a in rep["attraction"]] == [0.1, 0.05, 0.02]
    assert all(a["max_rel_deviation"] < 0.02 for a in rep["attraction"])


def test_verify_hausdorff(capsys):
    code, rep, _ = run(capsys, "verify", "--spec", spec("coupled_hausdorff"), "--check", "hausdorff")
    assert code == 0
    assert rep["hausdorff"]["slope"] == pytest.approx(1.0, abs=0.05)


def test_integrate_with_invariance(capsys):
    code, rep, _ = run(capsys, "integrate", "--spec", spec("example43"), "--eps", "0.1",
                       "--ic", "0.1+1i,1", "--span", 2, "--samples", 21, "--verify", "invariance")
    assert code == 0
    assert len(rep["trajectory"]["tau"]) == 21
    assert rep["invariance"]["residual"] < 1e-8


def test_output_is_deterministic(capsys):
    argv = ("verify", "--spec", spec("coupled_hausdorff"), "--check", "hausdorff")
    main([str(a) for a in argv])
    first = capsys.readouterr().out
    main([str(a) for a in argv])
    assert capsys.readouterr().out == first


def test_out_directory_and_csv(capsys, tmp_path):
    code = main(["integrate", "--spec", str(spec("example43")), "--eps", "0.1", "--ic", "0.1+1i,1",
                 "--span", "1", "--samples", "5", "--format", "csv", "--out", str(tmp_path)])
    assert code == 0 and capsys.readouterr().out == ""
    rep = json.loads((tmp_path / "integrate.json").read_text())
    assert rep["seed"] == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "tau,re_z,im_z,re_w,im_w" and len(lines) == 6


def test_dumps_encodes_complex_and_nonfinite():
    text = dumps({"c": 1 + 2j, "x": float("nan"), "y": 0.1})
    assert json.loads(text) == {"c": [1, 2], "x": None, "y": 0.1}
