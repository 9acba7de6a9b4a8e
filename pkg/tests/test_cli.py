import csv
import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from quditdistill.cli import CHECK_SCHEMA, QRG_SCHEMA, TABLE_SCHEMA, main, parse_dims, UsageError
from quditdistill.recursion import step_general


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.reader(io.StringIO(text)))


def test_flow_qubit_final_fidelity(capsys):
    code, out, _ = run(capsys, "flow", "--d", "2", "--f0", "0.75", "--steps", "3")
    assert code == 0
    rows = rows_of(out)
    assert rows[0] == ["step", "F", "coincidence_prob"]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx([0.75, 0.9, 0.98780487804878, 0.99984760743675705], abs=1e-12)
    assert float(rows[2][2]) == pytest.approx(0.625, abs=1e-15)


def test_flow_at_unstable_point_is_constant(capsys):
    code, out, _ = run(capsys, "flow", "--d", "4", "--f0", "0.25", "--steps", "5")
    assert code == 0
    assert [float(r[1]) for r in rows_of(out)[1:]] == [0.25] * 6


def test_flow_from_matrix(tmp_path, capsys):
    rng = np.random.default_rng(3)
    w = rng.uniform(size=(3, 3))
    w /= w.sum()
    path = tmp_path / "w.csv"
    np.savetxt(path, w, delimiter=",", fmt="%.17g")
    code, out, _ = run(capsys, "flow", "--d", "3", "--matrix", str(path), "--steps", "2")
    assert code == 0
    rows = rows_of(out)
    assert len(rows[0]) == 1 + 9 + 1
    q = w
    for n in (1, 2):
        q, p = step_general(q)
        vals = np.array([float(v) for v in rows[n + 1][1:10]]).reshape(3, 3)
        assert np.max(np.abs(vals - q)) < 1e-14
        assert float(rows[n + 1][10]) == pytest.approx(p, abs=1e-14)


def test_flow_matrix_not_normalized(tmp_path, capsys):
    path = tmp_path / "w.csv"
    np.savetxt(path, [[0.5, 0.6], [0, 0]], delimiter=",")
    code, _, err = run(capsys, "flow", "--matrix", str(path))
    assert code == 1 and "error" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["flow", "--d", "2", "--f0", "1.5"],
        ["flow", "--d", "1", "--f0", "0.5"],
        ["flow", "--f0", "0.5"],
        ["flow", "--matrix", "/nonexistent.csv"],
        ["iterations", "--d", "two"],
        ["check", "--d", "20"],
        ["phase-diagram", "--resolution", "1"],
        ["continuum", "--k", "-1"],
        ["qrg", "--j", "-1"],
        ["bogus"],
        [],
    ],
)
def test_invalid_input_exits_one(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 1
    assert out == ""
    assert err


def test_check_passes(capsys):
    code, out, _ = run(capsys, "check", "--d", "2..5", "--seeds", "20", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, CHECK_SCHEMA)
    assert doc["passed"]
    assert set(doc["suites"]) == {"oracle_vs_recursion", "closed_form_vs_iteration", "bell_closure"}
    assert all(s["max_deviation"] < 1e-9 for s in doc["suites"].values())


def test_check_failure_exit_code(capsys):
    code, out, _ = run(capsys, "check", "--d", "2", "--seeds", "2", "--tol", "0", "--format", "json")
    assert code == 2
    assert json.loads(out)["passed"] is False


def test_qrg_report(capsys):
    code, out, _ = run(capsys, "qrg", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, QRG_SCHEMA)
    assert doc["ground_energy"] == pytest.approx(-1.0, abs=1e-12)
    assert doc["edge_spin_factor"] == pytest.approx(2 / 3, abs=1e-10)
    assert doc["doublet_overlap"] == pytest.approx(1.0, abs=1e-10)


def test_qrg_csv(capsys):
    code, out, _ = run(capsys, "qrg")
    table = dict(rows_of(out)[1:])
    assert float(table["ground_energy"]) == pytest.approx(-1.0, abs=1e-12)


def test_continuum_columns_integrate_to_one(capsys):
    code, out, _ = run(capsys, "continuum", "--k", "6")
    assert code == 0
    rows = rows_of(out)
    assert rows[0] == ["x"] + [f"q{k}" for k in range(7)]
    data = np.array(rows[1:], dtype=float)
    assert data.shape == (1001, 8)
    for col in range(1, 8):
        assert np.trapezoid(data[:, col], data[:, 0]) == pytest.approx(1.0, abs=1e-6)


def test_continuum_user_profile(tmp_path, capsys):
    path = tmp_path / "p.csv"
    np.savetxt(path, np.linspace(0, 1, 101) ** 2)
    code, out, _ = run(capsys, "continuum", "--k", "1", "--profile", str(path))
    assert code == 0
    data = np.array(rows_of(out)[1:], dtype=float)
    assert data.shape == (101, 3)
    assert np.argmax(data[:, 2]) == 100


def test_phase_diagram_csv(capsys):
    code, out, _ = run(capsys, "phase-diagram", "--resolution", "11")
    assert code == 0
    rows = rows_of(out)
    assert rows[0] == ["q0", "q1", "label"]
    assert len(rows) - 1 == 11 * 12 // 2
    table = {(float(a), float(b)): lab for a, b, lab in rows[1:]}
    assert table[(0.6, 0.2)] == "(1,0)"
    assert table[(0.2, 0.6)] == "(0,1)"


def test_iterations_table(capsys):
    code, out, _ = run(capsys, "iterations", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, TABLE_SCHEMA)
    assert doc["columns"] == ["F0", "K_D2", "K_D4", "K_D10"]
    assert len(doc["rows"]) == 9
    for F0, *ks in doc["rows"]:
        assert ks == sorted(ks, reverse=True)
    assert doc["rows"][4][0] == 0.75 and doc["rows"][4][1] == 3


def test_iterations_out_of_basin_is_blank(capsys):
    code, out, _ = run(capsys, "iterations", "--d", "2", "--f0-start", "0.4", "--f0-stop", "0.6", "--f0-step", "0.1")
    rows = rows_of(out)
    assert rows[1] == ["0.40000000000000002", ""]
    assert rows[3][1] != ""


@pytest.mark.parametrize(
    "argv",
    [
        ["flow", "--d", "3", "--f0", "0.5", "--steps", "4", "--format", "json"],
        ["phase-diagram", "--resolution", "21", "--format", "json"],
        ["continuum", "--k", "2", "--n", "51", "--format", "json"],
    ],
)
def test_json_tables_validate(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    jsonschema.validate(json.loads(out), TABLE_SCHEMA)


def test_output_is_byte_identical(capsys):
    argv = ["check", "--d", "2..3", "--seeds", "3", "--seed", "7"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_output_file(tmp_path, capsys):
    path = tmp_path / "out.csv"
    code, out, _ = run(capsys, "flow", "--d", "2", "--f0", "0.75", "--steps", "1", "-o", str(path))
    assert code == 0 and out == ""
    assert path.read_text().startswith("step,F,coincidence_prob\n")


def test_csv_floats_round_trip(capsys):
    _, out, _ = run(capsys, "flow", "--d", "3", "--f0", "0.4", "--steps", "2")
    from quditdistill.recursion import step_isotropic

    assert float(rows_of(out)[2][1]) == step_isotropic(0.4, 3)


def test_parse_dims():
    assert parse_dims("2..5") == [2, 3, 4, 5]
    assert parse_dims("2,4,10") == [2, 4, 10]
    with pytest.raises(UsageError):
        parse_dims("1..3")


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "quditdistill", "qrg", "--format", "json"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "qrg"
