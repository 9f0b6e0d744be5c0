import numpy as np
import pytest

from quadbound.gaitlib import seed_vertical_gait
from quadbound.model import ModelParams
from quadbound.shoot import (
    Z_NAMES,
    ConvergenceError,
    SolutionVector,
    active_columns,
    fix_component,
    jacobian,
    residual,
    solve,
)


@pytest.mark.parametrize("kind", ["PP", "BP"])
@pytest.mark.parametrize("apex", [1.1, 1.5, 3.0, 8.0])
def test_closed_form_seeds_solve_the_boundary_problem(kind, apex, params):
    z = seed_vertical_gait(kind, apex, params)
    assert np.max(np.abs(residual(z, params))) < 1e-7


def test_newton_recovers_a_gait_from_a_perturbed_guess(gaits, params):
    z = gaits["B2_400"]
    guess = z.z + 1e-3 * np.sin(np.arange(14))
    sol = solve(guess, params, [fix_component("xdot", z.xdot)])
    assert np.max(np.abs(residual(sol, params))) < 1e-9
    assert np.max(np.abs(sol.z - z.z)) < 1e-6


def test_newton_reports_failure():
    p = ModelParams()
    bad = SolutionVector.from_parts(1.5, t_Htd=0.1, t_Hlo=0.2, t_Ftd=0.1, t_Flo=0.2, t_stride=0.3)
    with pytest.raises(ConvergenceError):
        solve(bad, p, [fix_component("y", 1.5)])


@pytest.mark.parametrize("name", ["PF_300", "B2_400", "F"])
def test_finite_difference_jacobian_is_step_independent(name, gaits):
    p = ModelParams(J=1.047) if name == "F" else ModelParams()
    z = gaits[name]
    cols = active_columns(p)
    h = np.maximum(1e-6, 1e-6 * np.abs(z.z[list(cols)]))
    A = jacobian(z, p, steps=h)
    B = jacobian(z, p, steps=4 * h)
    assert np.linalg.norm(A - B) / np.linalg.norm(A) < 1e-4


def test_rigid_body_drops_pitch_columns(params):
    assert len(active_columns(params)) == 11
    assert len(active_columns(ModelParams(J=2.0))) == 13


def test_solution_vector_round_trip(gaits):
    z = gaits["F"]
    assert SolutionVector.from_dict(z.to_dict()) == z
    assert list(z.to_dict()) == list(Z_NAMES)
    moved = z.copy_with(xdot=1.0)
    assert moved.xdot == 1.0 and z.xdot != 1.0
    with pytest.raises(ValueError):
        z.z[0] = 3.0
