import csv
import json
import subprocess
import sys

import pytest

from schwarzschild_isosceles.cli import RunConfig, InputError, run


def call(tmp_path, *argv):
    return run(["--out", str(tmp_path), *argv])


def test_equilibria(tmp_path, capsys):
    assert call(tmp_path, "equilibria", "--C", "3") == 0
    doc = json.loads((tmp_path / "equilibria.json").read_text())
    assert json.loads(capsys.readouterr().out) == doc
    assert call(tmp_path, "equilibria", "--C", "2") == 0


def test_em_diagram(tmp_path):
    assert call(tmp_path, "em-diagram", "--n", "50") == 0
    rows = list(csv.reader((tmp_path / "em_diagram.csv").open()))
    assert rows[0] == ["R", "C", "h", "branch"] and len(rows) == 51


def test_manifold_and_trace(tmp_path):
    assert call(tmp_path, "manifold") == 0
    doc = json.loads((tmp_path / "manifold.json").read_text())
    assert len(doc["equilibria"]) == 6 and doc["connection"]["cond_up_holds"]
    assert call(tmp_path, "trace", "--eq", "Eminus", "--branch", "w_pos") == 0
    lines = (tmp_path / "trace_Eminus_w_pos.csv").read_text().splitlines()
    assert lines[0] == "# chart: collision"


def test_planar_outputs_are_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for d in (a, b):
        assert run(["--out", str(d), "planar", "--h", "1", "0", "-1", "--n", "100", "--svg"]) == 0
    for name in ("planar_0.csv", "planar_1.csv", "planar_2.csv", "planar.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "planar_0.csv").read_text().splitlines()[0]
    assert header == "r,h,v_upper,v_lower"
    assert (a / "planar.svg").read_text().startswith("<svg")


def test_simulate(tmp_path):
    code = call(tmp_path, "simulate", "--chart", "planar", "--state", "2.8", "-0.1", "--C", "2.1723",
                "--h", "-1", "--span", "5", "--winding", "--event", "r_below:0.5")
    # the state is off the energy level; the integrator still runs and records the residual
    assert code == 0
    assert (tmp_path / "trajectory.csv").read_text().startswith("# chart: planar")
    ev = json.loads((tmp_path / "events.json").read_text())
    assert "status" in ev
    assert call(tmp_path, "simulate", "--chart", "planar", "--state", "1", "0", "--event", "bogus") == 2
    assert call(tmp_path, "simulate", "--chart", "planar", "--state", "1", "0", "--event", "r_below:x") == 2


def test_classify(tmp_path):
    batch = tmp_path / "batch.json"
    batch.write_text(json.dumps([
        {"C": 0.0, "h": -1.0, "state0": {"r": 0.5, "v": -1.0, "theta": 0.0, "w": 0.0}},
    ]))
    # inconsistent state: input error
    assert call(tmp_path, "classify", "--batch", str(batch)) == 2
    from schwarzschild_isosceles.model import REFERENCE_PARAMS
    from schwarzschild_isosceles.orbits import sample_sink_states
    jobs = [{"C": C, "h": h, "state0": dict(s._asdict())}
            for C, h, s in sample_sink_states(REFERENCE_PARAMS, 3, seed=4)]
    batch.write_text(json.dumps(jobs))
    assert call(tmp_path, "classify", "--batch", str(batch)) == 0
    rows = list(csv.DictReader((tmp_path / "fates.csv").open()))
    assert [r["index"] for r in rows] == ["0", "1", "2"]


def test_config_handling(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "bogus": 2}))
    assert run(["--config", str(cfg), "--out", str(tmp_path), "equilibria", "--C", "3"]) == 2
    cfg.write_text(json.dumps({"params": {"M": 1, "m": 0.01, "A": 1, "A1": 1, "B": 0.2, "B1": 0.2},
                               "rtol": 1e-9}))
    assert run(["--config", str(cfg), "--out", str(tmp_path), "equilibria", "--C", "3"]) == 0
    assert run(["--config", str(tmp_path / "missing.json"), "equilibria", "--C", "3"]) == 2
    with pytest.raises(InputError):
        RunConfig.from_dict({"rtol": -1.0})
    with pytest.raises(InputError):
        RunConfig.from_dict({"params": {"M": -1}})


def test_bad_arguments():
    assert run([]) == 2
    assert run(["nonsense"]) == 2
    assert run(["equilibria"]) == 2


def test_verify_quick(tmp_path, capsys):
    assert call(tmp_path, "verify", "--quick") == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 12 and all(line.startswith("PASS") for line in out)
    assert len(json.loads((tmp_path / "verify.json").read_text())) == 12


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "schwarzschild_isosceles.cli", "--out", str(tmp_path),
                           "equilibria", "--C", "3"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)
