import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from varigeo.cli import DEFAULT_SEED, dumps, main, run

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def prob(name):
    return str(PROBLEMS / f"{name}.toml")


def write(tmp_path, text, name="p.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def call(*argv, tmp_path=None):
    extra = []
    if tmp_path is not None and argv[0] == "integrate":
        extra = ["--csv", str(tmp_path / "traj.csv")]
    return run(list(argv) + extra)


# --------------------------------------------------------------------------
# derive


def test_derive_herglotz_hamiltonian():
    rep, code, err = call("derive", prob("herglotz_hamiltonian"))
    assert code == 0 and err is None
    assert rep["verdict"] == "Unique"
    dyn = next(s for s in rep["stages"] if s["stage"] == "derive")["dynamics"]
    H = "H(t,q,p,s)"
    assert dyn["Z"]["q"] == f"diff({H},p)"
    assert dyn["Z"]["p"] == f"-p*diff({H},s) - diff({H},q)"
    assert dyn["Z"]["s"] == f"p*diff({H},p) - {H}"
    assert dyn["i_Z_sigma_t"] == "0"


def test_derive_tv_exits_5_with_report():
    rep, code, _ = call("derive", prob("singular_time_tv"))
    assert code == 5
    assert rep["verdict"] == "Inconsistent"


def test_missing_time_exits_2():
    rep, code, err = call("derive", prob("missing_time"))
    assert code == 2
    assert rep["error"]["type"] == "ChartError"
    assert "time" in err


def test_parse_error_exits_2(tmp_path):
    path = write(tmp_path, '[chart]\ncoordinates = [["t", "time"], ["q", "position"], '
                           '["v", "velocity"]]\n[problem]\nlagrangian = "v^"\n')
    rep, code, _ = call("derive", path)
    assert code == 2 and rep["error"]["type"] == "ParseError"


def test_bad_toml_and_unknown_stage_exit_2(tmp_path):
    _, code, _ = call("derive", write(tmp_path, "[chart\n"))
    assert code == 2
    path = write(tmp_path, '[chart]\ncoordinates = [["t", "time"]]\n'
                           '[problem]\nomega = "0"\npipeline = ["teleport"]\n', "q.toml")
    rep, code, _ = call("derive", path)
    assert code == 2 and "teleport" in rep["error"]["message"]
    _, code, _ = call("derive", str(tmp_path / "absent.toml"))
    assert code == 2


def test_failed_hypothesis_exits_3(tmp_path):
    path = write(tmp_path, """
[chart]
coordinates = [["t", "time"], ["q", "position"], ["p", "momentum"], ["s", "action"]]
functions = { H = ["t", "q", "p", "s"] }
[problem]
hamiltonian = "H"
pipeline = ["hamiltonian", "omega_bar", "derive"]
[constraints]
I1nh = ["q*dt"]
""")
    rep, code, _ = call("derive", path)
    assert code == 3
    assert "co-orientation" in rep["error"]["message"]


def test_rank_undecided_exits_4_with_pivot(tmp_path):
    path = write(tmp_path, """
[chart]
coordinates = [["t", "time"], ["q", "position"], ["v", "velocity"]]
[problem]
lagrangian = "1/2*(sin(q)^2 + cos(q)^2 - 1)*v^2 + v"
""")
    rep, code, _ = call("derive", path)
    assert code == 4
    assert rep["error"]["type"] == "RankUndecided"
    assert "pivot" in rep["error"]


# --------------------------------------------------------------------------
# classify


def summary(name):
    rep, code, _ = call("classify", prob(name))
    assert code == 0
    stage = rep["stages"][0]
    return stage["summary"], stage


def test_classify_vs():
    s, stage = summary("singular_action_vs")
    assert s["eta_L"] == "Reeb nonexistent"
    assert s["precontact"] == "fails (see discrepancy note)"
    assert any("precontact discrepancy" in n for n in stage["notes"])


def test_classify_harmonic():
    s, _ = summary("harmonic_oscillator")
    assert s["cosymplectic"] == "yes"


def test_classify_two_dof_surface_reeb():
    s, _ = summary("premulticontact_two_dof")
    assert s["surface Reeb"] == "-d/dqb"
    assert s["tangency pre-check"] == "infeasible"


def test_classify_hamiltonian_structures():
    rep, code, _ = call("classify", prob("herglotz_hamiltonian"))
    assert code == 0 and rep["stages"][0]["flags"]["cocontact"]["holds"] is True
    rep, code, _ = call("classify", prob("cosymplectic_hamiltonian"))
    assert code == 0 and rep["stages"][0]["flags"]["cosymplectic"]["holds"] is True


def test_classify_without_time():
    rep, code, _ = call("classify", prob("missing_time"))
    assert code == 0
    assert "cosymplectic" not in rep["stages"][0]["flags"]


# --------------------------------------------------------------------------
# integrate


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


def test_integrate_damped_oscillator(tmp_path):
    rep, code, _ = call("integrate", prob("damped_oscillator"), tmp_path=tmp_path)
    assert code == 0
    integ = rep["integration"]
    mx = integ["monitor_max_abs"]
    assert mx["drift_eta0"] < 1e-8 and mx["drift_kappa0"] < 1e-8
    assert mx["i_Z_sigma_t"] < 1e-10
    header, rows = read_csv(integ["csv"])
    assert header[:4] == ["t", "q", "v", "s"]
    assert "mechanical_energy" in header and "energy" in header
    assert len(rows) == 10001


def test_integrate_gauge_pinned_vs(tmp_path):
    rep, code, _ = call("integrate", prob("singular_action_vs"), tmp_path=tmp_path)
    assert code == 0
    s10 = rep["integration"]["final"]["s"]
    assert abs(s10 / math.exp(10) - 1) < 1e-6
    header, rows = read_csv(rep["integration"]["csv"])
    col = header.index("s")
    assert all(abs(r[col] / math.exp(r[0]) - 1) < 1e-6 for r in rows[::1000])


def test_integrate_without_gauge_exits_6(tmp_path):
    text = Path(prob("singular_action_vs")).read_text().replace('[gauge]\nv = "1"\n', "")
    rep, code, _ = call("integrate", write(tmp_path, text), tmp_path=tmp_path)
    assert code == 6
    assert "gauge freedom requires pinning" in rep["error"]["message"]


def test_integrate_bad_initial_state_exits_1(tmp_path):
    text = Path(prob("singular_action_vs")).read_text().replace(
        "x0 = { q = 0.0, s = 1.0 }", "x0 = { q = 0.0, s = 1.0, v = 2.0 }")
    rep, code, _ = call("integrate", write(tmp_path, text), tmp_path=tmp_path)
    assert code == 1
    assert rep["error"]["type"] == "InitialConditionError"


def test_integrate_inconsistent_exits_5(tmp_path):
    rep, code, _ = call("integrate", prob("singular_time_tv"), tmp_path=tmp_path)
    assert code == 5


# --------------------------------------------------------------------------
# verify


@pytest.mark.parametrize("name", [
    "herglotz_hamiltonian", "cosymplectic_hamiltonian", "harmonic_oscillator",
    "damped_oscillator", "free_particle_absorption",
])
def test_verify_passes(name):
    rep, code, _ = call("verify", prob(name))
    assert code == 0, rep["checks"]
    assert rep["verdict"] == "Pass"


def test_verify_absorption_lists_secondary_constraint():
    rep, _, _ = call("verify", prob("free_particle_absorption"))
    assert rep["checks"]["absorption"]["secondary_constraints"] == ["p - v"]


def test_verify_corrupted_exits_7():
    rep, code, _ = call("verify", prob("corrupted_cocontact"))
    assert code == 7
    assert rep["verdict"] == "Fail"
    assert rep["checks"]["nonholonomic"]["verdict"] == "Fail"


# --------------------------------------------------------------------------
# reports


def test_seed_echoed_and_configurable():
    rep, _, _ = call("derive", prob("harmonic_oscillator"))
    assert rep["zero_test"] == {"seed": DEFAULT_SEED, "trials": 8}
    rep, _, _ = call("derive", prob("harmonic_oscillator"), "--seed", "5", "--trials", "3")
    assert rep["zero_test"] == {"seed": 5, "trials": 3}
    rep, _, _ = call("derive", prob("missing_time"), "--seed", "9")
    assert rep["zero_test"]["seed"] == 9


def test_reports_are_byte_identical(tmp_path):
    for name in ("herglotz_hamiltonian", "damped_oscillator", "premulticontact_two_dof"):
        a = dumps(call("derive", prob(name))[0])
        b = dumps(call("derive", prob(name))[0])
        assert a == b
    a = dumps(call("integrate", prob("damped_oscillator"), tmp_path=tmp_path)[0])
    first = (tmp_path / "traj.csv").read_bytes()
    b = dumps(call("integrate", prob("damped_oscillator"), tmp_path=tmp_path)[0])
    assert a == b and (tmp_path / "traj.csv").read_bytes() == first


def test_main_writes_out_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["derive", prob("herglotz_hamiltonian"), "--out", str(out)])
    assert code == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["verdict"] == "Unique"


def test_main_stdout_and_stderr(capsys):
    code = main(["derive", prob("missing_time")])
    cap = capsys.readouterr()
    assert code == 2
    assert json.loads(cap.out)["error"]["exit_code"] == 2
    assert cap.err.startswith("varigeo: ChartError")


def test_console_script_subprocess(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "varigeo.cli", "derive", prob("singular_time_tv")],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 5
    assert json.loads(proc.stdout)["verdict"] == "Inconsistent"
