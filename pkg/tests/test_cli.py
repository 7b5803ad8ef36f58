import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from approxqss.cli import ScenarioError, main, parse_grid, parse_scenario, serialize_scenario
from approxqss.qss import build_cgl_2_3_scheme

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _write(tmp_path, obj, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_identity_attack(capsys):
    code, out, _ = _run(capsys, ["analyze", str(SCENARIOS / "cgl23_identity.json")])
    assert code == 0
    rep = json.loads(out)
    assert rep["command"] == "analyze" and rep["units"] == "nats"
    assert rep["result"]["epsilon_secrecy"] <= 1e-6
    assert rep["result"]["strength_Ctilde"] <= 1e-6


def test_analyze_bits_units(capsys, tmp_path):
    path = _write(tmp_path, {"scheme": "cgl23", "attack": {"family": "depolarizing", "p": 1.0}, "sets": "minimal"})
    code, out, _ = _run(capsys, ["analyze", path, "--bits"])
    rep = json.loads(out)
    assert code == 0 and rep["units"] == "bits"
    assert rep["result"]["strength_Ctilde"] == pytest.approx(2 * np.log2(3), abs=1e-5)


def test_out_of_range_parameter(capsys, tmp_path):
    path = _write(tmp_path, {"scheme": "cgl23", "attack": {"family": "depolarizing", "p": 2}})
    code, _, err = _run(capsys, ["analyze", path])
    assert code == 1
    assert "parameter out of range [0,1]" in err


def test_non_cptp_kraus_rejected(capsys, tmp_path):
    K = (1.2 * np.eye(3)).tolist()
    path = _write(tmp_path, {"scheme": "cgl23", "attack": {"per_share": [{"kraus": [K]}, {}, {}]}})
    code, _, err = _run(capsys, ["analyze", path])
    assert code == 1
    assert "attack.per_share[0]" in err and "not CPTP" in err


def test_corrupted_encoder_rejected(capsys, tmp_path):
    sc = serialize_scenario(parse_scenario(json.dumps({"scheme": "cgl23"})))
    sc["scheme"]["encoder"][0][0] = [1.0, 0.0]
    path = _write(tmp_path, sc)
    code, _, err = _run(capsys, ["analyze", path])
    assert code == 1 and "scheme" in err


def test_malformed_json_and_unknown_keys(capsys, tmp_path):
    code, _, err = _run(capsys, ["analyze", _write(tmp_path, '{"scheme": "cgl23",')])
    assert code == 1 and "line 1" in err
    code, _, err = _run(capsys, ["analyze", _write(tmp_path, {"scheme": "cgl23", "bogus": 1})])
    assert code == 1 and "bogus" in err
    code, _, err = _run(capsys, ["analyze", _write(tmp_path, {"scheme": "cgl23", "solver": {"tol": -1}})])
    assert code == 1 and "solver" in err
    code, _, err = _run(capsys, ["analyze", str(tmp_path / "missing.json")])
    assert code == 1 and "cannot read" in err


def test_verify_passes(capsys):
    code, out, _ = _run(capsys, ["verify", str(SCENARIOS / "cgl23_depolarizing_share1_p05.json")])
    assert code == 0
    rep = json.loads(out)
    assert rep["result"]["passed"] is True
    assert all(r["fvg"]["passed"] for r in rep["result"]["rows"])


def test_sweep_rows(capsys, tmp_path):
    path = _write(tmp_path, {"scheme": "cgl23", "attack": {"family": "depolarizing", "shares": [1]}})
    code, out, _ = _run(capsys, ["sweep", path, "--param", "p", "--grid", "0,0.5,1"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3
    assert list(rows[0]) == ["parameter", "epsilon", "ctilde", "c", "delta_lower", "delta_upper"]
    assert abs(float(rows[0]["epsilon"])) <= 1e-6
    eps = [float(r["epsilon"]) for r in rows]
    assert eps == sorted(eps)


def test_sweep_grid_errors(capsys, tmp_path):
    path = _write(tmp_path, {"scheme": "cgl23", "attack": {"family": "dephasing"}})
    code, _, err = _run(capsys, ["sweep", path, "--param", "p", "--grid", ""])
    assert code == 1 and "grid must be nonempty" in err
    code, _, err = _run(capsys, ["sweep", path, "--param", "q", "--grid", "0.1"])
    assert code == 1 and "unknown parameter" in err
    code, _, err = _run(capsys, ["sweep", path, "--param", "p", "--grid", "0.5,1.5"])
    assert code == 1 and "parameter out of range [0,1]" in err


def test_parse_grid_deduplicates_with_warning():
    with pytest.warns(UserWarning, match="duplicate"):
        assert parse_grid("0.1, 0.2, 0.1") == [0.1, 0.2]
    with pytest.raises(ScenarioError):
        parse_grid("a,b")


def _strip_timestamp(text):
    d = json.loads(text)
    d.pop("timestamp")
    return json.dumps(d, sort_keys=True)


def test_verify_deterministic(capsys, tmp_path):
    path = str(SCENARIOS / "cgl23_dephasing_all_p05.json")
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["verify", path, "--out", str(a), "--seed", "7"]) == 0
    assert main(["verify", path, "--out", str(b), "--seed", "7"]) == 0
    assert _strip_timestamp(a.read_text()) == _strip_timestamp(b.read_text())
    assert json.loads(a.read_text())["seed"] == 7


def test_scenario_round_trip(rng):
    raw = {"scheme": "cgl23", "attack": {"per_share": [{"family": "dephasing", "p": 0.3}, {}, {"family": "depolarizing", "p": 0.1}]},
           "solver": {"seed": 5}, "sets": "all"}
    sc = parse_scenario(json.dumps(raw))
    again = parse_scenario(json.dumps(serialize_scenario(sc)))
    assert again.sets == "all" and again.solver == sc.solver
    assert np.allclose(again.scheme.isometry, build_cgl_2_3_scheme().isometry)
    X = rng.standard_normal((27, 27))
    assert np.allclose(again.attack.apply(X), sc.attack.apply(X))


def test_shipped_scenarios_parse():
    files = sorted(SCENARIOS.glob("*.json"))
    assert len(files) >= 5
    for f in files:
        parse_scenario(f.read_text())
