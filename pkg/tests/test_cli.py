import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from affroll import cli

SPHERE_REST = """\
schema_version: 1
body: {kind: balanced_sphere, m: 1, I1: 0.5, I2: 2.5, I3: 3, r: 5}
initial: {M: [0, 0, 0], gamma: [0, 0.6, 0.8]}
integrator: {t_max: 2.0}
"""

SPHERE_RANDOM_W = """\
schema_version: 1
body: {kind: balanced_sphere, m: 1, I1: 0.5, I2: 2.5, I3: 3, r: 1}
fields:
  W: {kind: sphere_tangent, c: [0.3, -0.7, 0.4], sigma: 1.3, axis: [0.48, 0.6, 0.64]}
initial: {M: [0.4, -1.1, 0.7], gamma: [0.36, 0.48, 0.8]}
integrator: {t_max: 20.0}
"""

ROUTH = """\
schema_version: 1
body:
  kind: revolution
  m: 1.0
  I1: 0.4
  I3: 0.6
  profile: {id: routh, R: 1.0, a: 0.3}
fields:
  W: {kind: cats_toy, sigma: 3.0}
gravity: 1.0
initial: {M: [0.1, 0.2, 1.5], gamma: [0.0, 0.6, 0.8]}
integrator: {t_max: 20.0}
"""

BAD_PROFILE = ROUTH.replace("profile: {id: routh, R: 1.0, a: 0.3}", "profile: {id: polynomial, f1: [-1.0], f2: [0.0, -1.5]}")


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows(text):
    return list(csv.reader(io.StringIO(text)))


# ------------------------------------------------------------------ simulate


def test_simulate_fig5_time_increases(capsys):
    code, out, _ = run(["simulate", "--scenario", "fig5_eps2", "--t-max", "10"], capsys)
    r = rows(out)
    assert code == 0 and r[0] == ["time", "M1", "M2", "M3", "g1", "g2", "g3"]
    t = np.array([float(x[0]) for x in r[1:]])
    assert t[0] == 0.0 and t[-1] == 10.0 and np.all(np.diff(t) > 0)


def test_simulate_rest_state_is_constant(tmp_path, capsys):
    code, out, _ = run(["simulate", "--scenario", write(tmp_path, SPHERE_REST)], capsys)
    data = np.array([[float(v) for v in x] for x in rows(out)[1:]])
    assert code == 0 and len(data) > 1
    assert np.array_equal(data[:, 1:], np.repeat(data[:1, 1:], len(data), axis=0))


def test_simulate_full_system_columns(tmp_path, capsys):
    text = SPHERE_REST.replace("initial:", "fields: {V: {kind: rotating, eta: 1.0}}\ninitial:")
    code, out, _ = run(["simulate", "--scenario", write(tmp_path, text)], capsys)
    assert code == 0 and rows(out)[0][-3:] == ["u1", "u2", "u3"]


def test_simulate_csv_uses_round_trip_floats(capsys):
    _, out, _ = run(["simulate", "--scenario", "fig5_eps2", "--t-max", "1"], capsys)
    for v in rows(out)[5]:
        assert repr(float(v)) == v


def test_negative_mass_exit_1(tmp_path, capsys):
    code, out, err = run(["simulate", "--scenario", write(tmp_path, SPHERE_REST.replace("m: 1,", "m: -1,"))], capsys)
    assert code == 1 and out == "" and "body.m" in err


def test_missing_file_and_bad_flag_exit_1(tmp_path, capsys):
    assert run(["simulate", "--scenario", str(tmp_path / "none.yaml")], capsys)[0] == 1
    assert run(["simulate", "--scenario", "fig5_eps2", "--rtol", "-1"], capsys)[0] == 1
    assert run(["poincare", "--scenario", "fig5_eps2", "--seeds", "x"], capsys)[0] == 1


def test_inconsistent_profile_simulate_exit_1(tmp_path, capsys):
    code, _, err = run(["simulate", "--scenario", write(tmp_path, BAD_PROFILE)], capsys)
    assert code == 1 and "shape_ode_residual" in err


def test_simulate_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(["simulate", "--scenario", "fig6_E-8", "--out", str(path)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


# ------------------------------------------------------------------ invariants


def _report(out):
    r = rows(out)
    assert r[0] == ["name", "initial", "max_drift", "tol", "passed"]
    return {x[0]: (float(x[2]), x[4]) for x in r[1:]}


def test_invariants_sphere_random_W(tmp_path, capsys):
    code, out, _ = run(["invariants", "--scenario", write(tmp_path, SPHERE_RANDOM_W)], capsys)
    rep = _report(out)
    assert code == 0 and set(rep) == {"M_norm2", "M_dot_gamma"}
    assert all(ok == "true" and d < 1e-9 for d, ok in rep.values())


def test_invariants_revolution(tmp_path, capsys):
    code, out, _ = run(["invariants", "--scenario", write(tmp_path, ROUTH)], capsys)
    rep = _report(out)
    assert code == 0 and set(rep) == {"E_mov_axisymmetric", "J1", "J2"}
    assert all(ok == "true" for _, ok in rep.values())


def test_invariants_homsphere(capsys):
    code, out, _ = run(["invariants", "--scenario", "fig6_E-8"], capsys)
    rep = _report(out)
    assert code == 0 and {"G2", "f", "E_mov_homsphere"} <= set(rep)
    assert all(ok == "true" for _, ok in rep.values())


def test_invariants_failure_exit_2(capsys):
    code, out, _ = run(["invariants", "--scenario", "fig5_eps12", "--rtol", "1e-4", "--atol", "1e-6"], capsys)
    assert code == 2 and "false" in out


# ------------------------------------------------------------------ poincare


def test_poincare_csv_svg_and_summary(tmp_path, capsys):
    svg = tmp_path / "s.svg"
    code, out, err = run(["poincare", "--scenario", "fig5_eps12", "--seeds", "2", "--svg", str(svg)], capsys)
    r = rows(out)
    assert code == 0 and r[0] == ["seed", "l", "L_over_G", "t"]
    assert {x[0] for x in r[1:]} == {"0", "1"} and len(r) == 1 + 2 * 300
    assert svg.read_text().count("<circle") == 600
    lines = err.strip().splitlines()
    assert lines[-1].startswith("summary: 2 of 2 seeds produced crossings")
    assert all("max drift" in x for x in lines)


def test_poincare_missing_crossings_reported_per_seed(capsys):
    code, out, err = run(["poincare", "--scenario", "fig5_eps12", "--seeds", "2", "--t-max", "5"], capsys)
    assert code == 0 and err.count("MaxTimeExceeded") == 2
    assert len(rows(out)) > 1


def test_poincare_workers_match_serial(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["poincare", "--scenario", "fig5_eps12", "--seeds", "3", "--t-max", "100"]
    assert run(base + ["--out", str(a)], capsys)[0] == 0
    assert run(base + ["--out", str(b), "--workers", "2"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_poincare_without_section_exit_1(tmp_path, capsys):
    assert run(["poincare", "--scenario", write(tmp_path, ROUTH)], capsys)[0] == 1


# ------------------------------------------------------------------ selfcheck


def _checks(out):
    return {line.split()[1]: line.split()[0] for line in out.strip().splitlines()}


def test_selfcheck_routh(tmp_path, capsys):
    code, out, _ = run(["selfcheck", "--scenario", write(tmp_path, ROUTH), "--seeds", "50"], capsys)
    c = _checks(out)
    assert code == 0 and c["shape_ode_residual"] == "PASS" and c["W_tangency"] == "PASS"
    assert c["liouville_revolution"] == "PASS"


def test_selfcheck_fig5(capsys):
    code, out, _ = run(["selfcheck", "--scenario", "fig5_eps2", "--seeds", "50"], capsys)
    c = _checks(out)
    assert code == 0 and c["W_tangency"] == "PASS" and c["inversion_roundtrip"] == "PASS"
    assert {"liouville_mu", "liouville_nu", "liouville_chi"} <= set(c)


def test_selfcheck_inconsistent_profile_exit_3(tmp_path, capsys):
    code, out, _ = run(["selfcheck", "--scenario", write(tmp_path, BAD_PROFILE)], capsys)
    assert code == 3 and out.startswith("FAIL shape_ode_residual")


# ------------------------------------------------------------------ entry points


def test_console_entry_point_and_module(tmp_path):
    for cmd in (["affroll"], [sys.executable, "-m", "affroll"]):
        res = subprocess.run(cmd + ["simulate", "--scenario", write(tmp_path, SPHERE_REST)],
                             capture_output=True, text=True, timeout=300)
        assert res.returncode == 0 and res.stdout.startswith("time,M1")


def test_usage_error_exit_1():
    res = subprocess.run([sys.executable, "-m", "affroll", "simulate"], capture_output=True, text=True, timeout=120)
    assert res.returncode == 1 and "--scenario" in res.stderr
    res = subprocess.run([sys.executable, "-m", "affroll", "--help"], capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and "selfcheck" in res.stdout
