import numpy as np
import pytest

from platoonctl.lmi import LmiProblem, LmiSettings, LmiStatus, solve_lmi
from platoonctl.linalg import eig_sym


def test_trace_minimization_hits_identity():
    # find symmetric X with X >= I minimizing trace -> X = I
    prob = LmiProblem()
    prob.add_sym("X", 3)
    prob.add_constraint("X_minus_I", 3, "psd", lambda v: v["X"] - np.eye(3))
    sol = solve_lmi(prob, objective={"X": np.eye(3)})
    assert sol.status is LmiStatus.FEASIBLE
    np.testing.assert_allclose(sol.values["X"], np.eye(3), atol=5e-4)
    assert abs(sol.objective - 3.0) < 2e-3


def test_scalar_lyapunov():
    # a = -1: find p > 0 with 2 a p < 0; any p > 0 works
    a = -1.0
    prob = LmiProblem()
    prob.add_sym("p", 1)
    prob.add_constraint("pd", 1, "psd", lambda v: v["p"])
    prob.add_constraint("lyap", 1, "neg_def", lambda v: 2.0 * a * v["p"])
    sol = solve_lmi(prob)
    assert sol.status is LmiStatus.FEASIBLE
    assert sol.values["p"][0, 0] > 0
    assert sol.margins["lyap"] < -1e-7


def test_lyapunov_certificate_verified_by_eigenvalues():
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    prob = LmiProblem()
    prob.add_sym("P", 2)
    prob.add_constraint("P_pd", 2, "psd", lambda v: v["P"] - 0.1 * np.eye(2))
    prob.add_constraint("lyap", 2, "neg_def", lambda v: a.T @ v["P"] + v["P"] @ a)
    sol = solve_lmi(prob)
    assert sol.status is LmiStatus.FEASIBLE
    p = sol.values["P"]
    w, _ = eig_sym(a.T @ p + p @ a)
    assert w[-1] < 0
    wp, _ = eig_sym(p)
    assert wp[0] > 0


def test_infeasible_lmi_detected():
    # X >= I and X <= 0.5 I cannot both hold
    prob = LmiProblem()
    prob.add_sym("X", 2)
    prob.add_constraint("lower", 2, "psd", lambda v: v["X"] - np.eye(2))
    prob.add_constraint("upper", 2, "neg_def", lambda v: v["X"] - 0.5 * np.eye(2))
    sol = solve_lmi(prob)
    assert sol.status is LmiStatus.INFEASIBLE


def test_non_affine_assembly_rejected():
    prob = LmiProblem()
    prob.add_sym("X", 2)
    prob.add_constraint("bad", 2, "psd", lambda v: v["X"] @ v["X"])
    with pytest.raises(ValueError, match="affine"):
        prob.compile()


def test_rect_variable_packing_roundtrip():
    prob = LmiProblem()
    prob.add_sym("P", 3)
    prob.add_rect("Y", 2, 3)
    vals = {"P": np.arange(9.0).reshape(3, 3) + np.arange(9.0).reshape(3, 3).T,
            "Y": np.arange(6.0).reshape(2, 3)}
    out = prob.unpack(prob.pack(vals))
    np.testing.assert_allclose(out["P"], vals["P"])
    np.testing.assert_allclose(out["Y"], vals["Y"])


def test_warm_start_skips_phase1():
    prob = LmiProblem()
    prob.add_sym("X", 2)
    prob.add_constraint("lower", 2, "psd", lambda v: v["X"] - np.eye(2))
    warm = {"X": 3.0 * np.eye(2)}
    sol = solve_lmi(prob, objective={"X": np.eye(2)}, warm_values=warm)
    assert sol.status is LmiStatus.FEASIBLE
    np.testing.assert_allclose(sol.values["X"], np.eye(2), atol=5e-4)


def test_margins_match_external_eig_check():
    prob = LmiProblem()
    prob.add_sym("X", 2)
    prob.add_constraint("lower", 2, "psd", lambda v: v["X"] - np.eye(2))
    sol = solve_lmi(prob)
    block = prob.evaluate("lower", sol.values)
    w, _ = eig_sym(block)
    assert abs(sol.margins["lower"] - w[0]) < 1e-12


def test_bounded_feasibility_with_linear_objective():
    # random stable A, verify P found with margin for a mildly larger system
    rng = np.random.default_rng(3)
    m = rng.normal(size=(4, 4))
    a = m - (np.abs(np.linalg.eigvals(m).real).max() + 1.0) * np.eye(4)
    prob = LmiProblem()
    prob.add_sym("P", 4)
    prob.add_constraint("pd", 4, "psd", lambda v: v["P"] - 0.05 * np.eye(4))
    prob.add_constraint("lyap", 4, "neg_def", lambda v: a.T @ v["P"] + v["P"] @ a)
    sol = solve_lmi(prob, objective={"P": np.eye(4)})
    assert sol.status is LmiStatus.FEASIBLE
    assert sol.margins["lyap"] < -1e-7
