import json
import math
import pathlib

import numpy as np
import pytest

import gbsde_lab as gl

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / "configs"


def test_g_function():
    p = gl.GParams(0.5, 1.0)
    assert gl.g_value(p, 2.0) == 1.0
    assert gl.g_value(p, -2.0) == -0.5
    assert gl.worst_case_q(p, 0.0) == 1.0
    with pytest.raises(ValueError):
        gl.GParams(2.0, 1.0)


def test_matrix_g():
    gamma = [np.eye(2), np.diag([2.0, 0.5])]
    assert gl.g_value_matrix(gamma, np.diag([1.0, 0.0])) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gl.g_value_matrix(gamma, np.eye(3))


def test_expressions():
    e = gl.parse("a*x + y", {"a": 2.0})
    assert e(x=3.0, y=1.0) == 7.0
    with pytest.raises(gl.ParseError):
        gl.parse("x + * y")


def test_envelopes():
    m = gl.Modulus.linear(1.0, 1.0)
    assert gl.search_radius(1.0, 3.0, 0.0, 0.0) == 1.0
    assert gl.lower_envelope("abs(z)", m, 2.0, 0.7) == pytest.approx(0.7)
    assert gl.envelope_gap_bound(m, 1.0, 3.0) == 1.0


def test_heat_and_simulation():
    p = gl.GParams(0.5, 1.0)
    assert gl.upper_expectation_pde("x*x", p, 1.0) == pytest.approx(1.0, abs=5e-3)
    b, qv = gl.simulate_terminal(1.0, p, 1.0, 0.01, 20000, 3)
    assert isinstance(b, np.ndarray) and b.shape == (20000,)
    assert np.var(b) == pytest.approx(1.0, abs=0.05)
    assert np.allclose(qv, 1.0)
    b2, _ = gl.simulate_terminal(1.0, p, 1.0, 0.01, 20000, 3)
    assert np.array_equal(b, b2)


def test_solve_config():
    cfg = json.loads((CONFIGS / "gheat.json").read_text())
    cfg["grid"]["nx"] = 201
    out = gl.solve_config(json.dumps(cfg))
    x = out["x"]
    i = int(np.argmin(np.abs(x)))
    assert out["u0"][i] == pytest.approx(1.0, abs=5e-3)
    assert out["measured_gap"] == 0.0
    assert len(out["fingerprint"]) > 0


def test_run_experiment(tmp_path):
    code, log = gl.run(str(CONFIGS / "pair.json"), "compare", str(tmp_path))
    assert code == 0, log
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["experiment"] == "compare"
    assert "compare" in gl.experiment_names()


def test_config_error_pointer():
    with pytest.raises(gl.ConfigError, match="sigma_high_sq"):
        gl.solve_config('{"gparams": {"sigma_low_sq": 0.5}, "problem": {"Phi": "x"}}')
    assert math.isfinite(gl.gap_constant(1.0, gl.GParams(0.5, 1.0), 1.0))
