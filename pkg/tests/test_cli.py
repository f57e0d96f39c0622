import json
import subprocess
import sys

import numpy as np
import pytest

from flexramp import cli, grid, risk
from flexramp.grid import DispatchSolution
from flexramp.risk import RiskDispatchResult
from flexramp.surface import CostSurface, ContourSet


def run(args, capsys):
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_dispatch_golden(capsys):
    code, out, _ = run(["dispatch", "--model", "threebus", "--fu", "0", "--fd", "0"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["objective"] == 12400.0
    assert data["g"] == [[100.0, 100.0], [0.0, 0.0], [10.0, 20.0]]
    sol = DispatchSolution.from_dict(data)
    assert sol.objective == 12400.0


def test_dispatch_validation_and_infeasibility(capsys):
    assert run(["dispatch", "--fu", "-1"], capsys)[0] == 1
    assert run(["dispatch", "--fu", "1e9"], capsys)[0] == 2
    assert run(["dispatch", "--model", "no-such-model"], capsys)[0] == 1


def test_dispatch_csv(capsys):
    code, out, _ = run(["dispatch", "--fu", "35", "--format", "csv"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "generator,t,g,r_up,r_down" and len(lines) == 7


def test_model_file_path(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(grid.bundled_model("garver6").to_dict()))
    code, out, _ = run(["dispatch", "--model", str(path)], capsys)
    assert code == 0 and json.loads(out)["objective"] == pytest.approx(19245.0)


def test_malformed_model_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"buses": [1]}')
    assert run(["dispatch", "--model", str(path)], capsys)[0] == 1
    path.write_text("not json")
    assert run(["dispatch", "--model", str(path)], capsys)[0] == 1


def test_surface_summary_and_file(tmp_path, capsys):
    out_path = tmp_path / "surface.json"
    code, out, _ = run(["surface", "--model", "threebus", "--out", str(out_path)], capsys)
    summary = json.loads(out)
    assert code == 0
    assert summary["triangles"] == 29
    assert (summary["free_up"], summary["free_down"]) == (30.0, 40.0)
    assert summary["argmax"] == [50.0, 70.0]
    surf = CostSurface.from_dict(json.loads(out_path.read_text()))
    assert surf.n_triangles == 29
    assert surf.query(45.0, 55.0) == pytest.approx(grid.min_cost(grid.bundled_model("threebus"), 45, 55))


def test_surface_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["surface", "--model", "garver6", "--out", str(a)], capsys)
    run(["surface", "--model", "garver6", "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_contour_files(tmp_path, capsys):
    code, _, _ = run(["contour", "--levels", "30", "--out", str(tmp_path)], capsys)
    assert code == 0
    files = sorted(tmp_path.glob("level_*.csv"))
    assert len(files) == 30
    first = ContourSet.read_csv(files[0].read_text())
    np.testing.assert_allclose(first, [[30, 0], [30, 40]])
    index = json.loads((tmp_path / "index.json").read_text())
    assert index["levels"][-1]["ds"] == 2800.0


def test_contour_two_levels_json(capsys):
    code, out, _ = run(["contour", "--levels", "2", "--format", "json"], capsys)
    assert code == 0 and json.loads(out)["levels"] == [12400.0, 15200.0]
    assert run(["contour", "--levels", "1"], capsys)[0] == 1


def test_contour_empty_region_warns(tmp_path, capsys):
    from conftest import frozen_model
    path = tmp_path / "frozen.json"
    path.write_text(json.dumps(frozen_model().to_dict()))
    code, out, err = run(["contour", "--model", str(path), "--format", "json"], capsys)
    assert code == 0 and "warning" in err
    assert json.loads(out)["levels"] == []


def write_errors(path, errors):
    path.write_text("error_mw\n" + "\n".join(f"{e!r}" for e in errors) + "\n")


def test_risk_command(tmp_path, capsys):
    rng = np.random.default_rng(0)
    samples = tmp_path / "errors.csv"
    write_errors(samples, risk.skewed_samples(2.0, 15.0, 400, 1.5, rng).tolist())
    out = tmp_path / "risk.json"
    code, _, _ = run(["risk", "--model", "threebus", "--samples", str(samples),
                      "--p", "0.95", "--out", str(out)], capsys)
    assert code == 0
    res = json.loads(out.read_text())
    assert res["confidence"] >= 0.95
    assert res["cost"] <= res["greedy"]["cost"]
    assert RiskDispatchResult.from_dict({k: v for k, v in res.items()
                                         if k in RiskDispatchResult.__dataclass_fields__})


def test_risk_zero_probability(tmp_path, capsys):
    samples = tmp_path / "errors.csv"
    write_errors(samples, [-4.0, 3.0, 8.0])
    code, out, _ = run(["risk", "--samples", str(samples), "--p", "0"], capsys)
    res = json.loads(out)
    assert code == 0 and (res["f_u"], res["f_d"], res["ds"]) == (0.0, 0.0, 0.0)


def test_risk_with_bands(tmp_path, capsys):
    rng = np.random.default_rng(1)
    recs = risk.synthetic_records(300, capacity=100.0, rng=rng)
    samples = tmp_path / "recs.csv"
    samples.write_text(risk.write_records_csv(recs))
    code, out, _ = run(["risk", "--samples", str(samples), "--capacity", "100",
                        "--band", "high", "--p", "0.9", "--format", "csv"], capsys)
    assert code == 0 and out.startswith("f_u,f_d,cost")


def test_risk_errors(tmp_path, capsys):
    assert run(["risk", "--samples", str(tmp_path / "missing.csv")], capsys)[0] == 1
    samples = tmp_path / "errors.csv"
    write_errors(samples, [500.0, 600.0])
    assert run(["risk", "--samples", str(samples), "--p", "0.9"], capsys)[0] == 2
    assert run(["risk", "--samples", str(samples), "--p", "2"], capsys)[0] == 1
    assert run(["risk", "--samples", str(samples), "--delta", "0"], capsys)[0] == 1


def test_tolerance_flag(capsys):
    assert run(["--tol", "val_rel=1e-7", "surface"], capsys)[0] == 0
    assert run(["--tol", "bogus=1", "surface"], capsys)[0] == 1


def test_round_floats():
    assert cli.round_floats({"a": [1.23456789012, -0.0]}) == {"a": [1.23456789, 0.0]}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "flexramp", "dispatch", "--fu", "30"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["objective"] == 12400.0
