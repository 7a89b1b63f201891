import io
import json
import math

import numpy as np
import pytest
import scipy.linalg as sla

from burgers_stab import field_expr as fe
from burgers_stab.errors import ArgumentError, ConfigurationError, ConvergenceError
from burgers_stab.fem import PhysicsParams, assemble_static, discrete_norms, l2_project
from burgers_stab.mesh import build_uniform_mesh
from burgers_stab.riccati import CareProblem, solve_generalized_care
from burgers_stab.steady_state import manufactured_forcing
from burgers_stab.timestepping import (NewtonConfig, TimeGrid, simulate_linear,
                                       simulate_nonlinear, unshift,
                                       write_norm_history)

from conftest import BUBBLE, SINE

EX1 = PhysicsParams(1.0, 0.0, (1.0, 1.0), 24.0)
EX2 = PhysicsParams(5.0, 0.0, (1.0, 1.0), 0.0)
EX3 = PhysicsParams(1.0, 0.0, (1.0, 1.0), 25.0)


def _setup(ys, params, k, control=True):
    mesh = build_uniform_mesh(k)
    mats = assemble_static(mesh, params, fe.parse(ys))
    sol = solve_generalized_care(CareProblem.from_matrices(mats)) if control else None
    return mesh, mats, sol


def test_time_grid():
    g = TimeGrid.from_target(1 / 8, 0.1)
    assert g.steps == 1 and g.dt == 0.1
    for k, steps in [(3, 2), (4, 4), (5, 7)]:
        g = TimeGrid.from_target(2.0 ** -k / 2, 0.1)
        assert g.steps == steps
        assert abs(g.dt * g.steps - 0.1) <= 1e-12
    g = TimeGrid.from_target(0.01, 0.1)
    assert g.steps == 10 and len(g.times) == 11
    with pytest.raises(ConfigurationError):
        TimeGrid.from_target(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        NewtonConfig(tol=0.0)


def test_zero_initial_state_stays_zero():
    mesh, mats, sol = _setup(BUBBLE, EX1, 2)
    grid = TimeGrid.from_target(0.01, 0.05)
    lin = simulate_linear(mats, EX1, sol, np.zeros(9), grid)
    assert np.all(lin.states == 0) and np.all(lin.controls == 0)
    non = simulate_nonlinear(mats, EX1, None, np.zeros(9), grid)
    assert np.all(non.states == 0)
    assert non.newton_iterations == [1] * grid.steps


def test_linear_scheme_matches_explicit_recurrence(rng):
    mesh, mats, sol = _setup(BUBBLE, EX1, 2)
    z0 = rng.standard_normal(9)
    grid = TimeGrid.from_target(0.02, 0.1)
    traj = simulate_linear(mats, EX1, sol, z0, grid)
    M = mats.M.toarray()
    C = mats.A_shift.toarray() - mats.B.toarray() @ sol.S @ sol.P
    dt = grid.dt
    ref = [z0, np.linalg.solve(M - dt * C, M @ z0)]
    for _ in range(grid.steps - 1):
        ref.append(np.linalg.solve(1.5 * M - dt * C, M @ (2 * ref[-1] - 0.5 * ref[-2])))
    np.testing.assert_allclose(traj.states, np.array(ref), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(traj.controls[-1], -sol.S @ sol.P @ traj.states[-1], atol=1e-12)
    l2, h1 = discrete_norms(mats, traj.states[-1])
    assert traj.l2_norms[-1] == pytest.approx(l2) and traj.h1_norms[-1] == pytest.approx(h1)


def test_linear_scheme_is_second_order_in_time(rng):
    mesh, mats, sol = _setup(BUBBLE, EX1, 2)
    z0 = l2_project(mesh, fe.parse(SINE))
    M = mats.M.toarray()
    C = mats.A_shift.toarray() - mats.B.toarray() @ sol.S @ sol.P
    exact = sla.expm(0.2 * np.linalg.solve(M, C)) @ z0
    errs = [np.linalg.norm(simulate_linear(mats, EX1, sol, z0,
                                           TimeGrid.from_target(dt, 0.2)).states[-1] - exact)
            for dt in (0.01, 0.005, 0.0025)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert orders[-1] == pytest.approx(2.0, abs=0.15)


def test_open_loop_grows_and_closed_loop_decays():
    mesh, mats, sol = _setup(BUBBLE, EX1, 3)
    z0 = l2_project(mesh, fe.parse(SINE) - fe.parse(BUBBLE))
    grid = TimeGrid.from_target(mesh.h / 2, 0.1)
    free = simulate_linear(mats, EX1, None, z0, grid)
    assert np.all(np.diff(free.l2_norms) > 0)
    ctl = simulate_linear(mats, EX1, sol, z0, grid)
    assert ctl.l2_norms[-1] < ctl.l2_norms[0]


def test_discrete_decay_rate_matches_abscissa():
    mesh, mats, sol = _setup(BUBBLE, EX1, 3)
    z0 = l2_project(mesh, fe.parse(SINE) - fe.parse(BUBBLE))
    for dt in (1e-3, 5e-4):
        traj = simulate_linear(mats, EX1, sol, z0, TimeGrid.from_target(dt, 4.0))
        i0, i1 = traj.index_at(3.0), traj.index_at(4.0)
        slope = math.log(traj.l2_norms[i1] / traj.l2_norms[i0]) / (traj.times[i1] - traj.times[i0])
        assert slope == pytest.approx(sol.closed_loop_abscissa, rel=0.05)


def test_newton_converges_quadratically_on_manufactured_problem():
    mesh = build_uniform_mesh(4)
    y_s = fe.parse(BUBBLE)
    mats = assemble_static(mesh, EX2, y_s, None)
    z = fe.parse("exp(t)*" + SINE)
    g = manufactured_forcing(z, y_s, EX2)
    # a large step makes several Newton iterations necessary
    traj = simulate_nonlinear(mats, EX2, None, 20 * l2_project(mesh, z), TimeGrid.from_target(0.05, 0.1), g)
    hist = traj.newton_residuals[0]
    assert hist[-1] <= 1e-10
    ratios = [b / a for a, b in zip(hist, hist[1:])]
    assert len(ratios) >= 3
    assert ratios[-1] < ratios[0] and ratios[-1] < 1e-2


def test_newton_failure_reports_history():
    mesh = build_uniform_mesh(3)
    mats = assemble_static(mesh, EX2, fe.parse(BUBBLE), None)
    z0 = l2_project(mesh, fe.parse(SINE))
    with pytest.raises(ConvergenceError) as info:
        simulate_nonlinear(mats, EX2, None, 50 * z0, TimeGrid.from_target(0.05, 0.05),
                           newton=NewtonConfig(tol=1e-14, max_iter=1))
    assert len(info.value.history) == 2


def test_small_data_nonlinear_run_approaches_linear_run():
    mesh, mats, sol = _setup(SINE, EX3, 3)
    z0 = l2_project(mesh, fe.parse(BUBBLE) - fe.parse(SINE))
    grid = TimeGrid.from_target(mesh.h / 2, 0.1)
    lin = simulate_linear(mats, EX3, sol, z0, grid).states[-1]
    gaps = []
    for eps in (1e-1, 1e-2, 1e-3):
        non = simulate_nonlinear(mats, EX3, sol, eps * z0, grid).states[-1] / eps
        gaps.append(np.linalg.norm(non - lin))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[2] == pytest.approx(10.0, rel=0.05)


def test_nonlinear_closed_loop_respects_energy_bound():
    mesh, mats, sol = _setup(SINE, EX3, 3)
    z0 = l2_project(mesh, fe.parse(BUBBLE) - fe.parse(SINE))
    traj = simulate_nonlinear(mats, EX3, sol, z0, TimeGrid.from_target(mesh.h / 2, 0.5))
    bound = 1.05 * np.exp(-sol.omega_P * traj.times) * traj.l2_norms[0]
    assert np.all(traj.l2_norms <= bound)


def test_unshift():
    mesh, mats, _ = _setup(BUBBLE, PhysicsParams(1.0), 2, control=False)
    z0 = np.ones(9)
    grid = TimeGrid.from_target(0.01, 0.05)
    traj = simulate_linear(mats, PhysicsParams(1.0), None, z0, grid)
    same = unshift(traj, PhysicsParams(1.0), np.zeros(9))
    np.testing.assert_array_equal(same.states, traj.states)
    # a frozen shifted state decays exactly like exp(-omega t)
    frozen = type(traj)(traj.times, np.tile(z0, (len(traj.times), 1)),
                        np.zeros((len(traj.times), 9)), traj.l2_norms, traj.h1_norms,
                        traj.control_l2, matrices=mats)
    out = unshift(frozen, PhysicsParams(1.0, omega=3.0))
    np.testing.assert_allclose(out.states[:, 0], np.exp(-3.0 * traj.times), rtol=1e-15)
    np.testing.assert_allclose(out.l2_norms, out.l2_norms[0] * np.exp(-3.0 * traj.times),
                               rtol=1e-12)


def test_physical_state_approaches_steady_state():
    mesh, mats, sol = _setup(BUBBLE, EX1, 3)
    ys = l2_project(mesh, fe.parse(BUBBLE))
    z0 = l2_project(mesh, fe.parse(SINE) - fe.parse(BUBBLE))
    traj = simulate_linear(mats, EX1, sol, z0, TimeGrid.from_target(0.01, 0.5))
    phys = unshift(traj, EX1, ys)
    dist = [np.linalg.norm(s - ys) for s in phys.states]
    assert dist[-1] < 1e-6 * dist[0]


def test_index_at():
    mesh, mats, _ = _setup(BUBBLE, EX1, 2, control=False)
    traj = simulate_linear(mats, EX1, None, np.ones(9), TimeGrid.from_target(0.01, 0.1))
    assert traj.index_at(0.1) == 10 and traj.index_at(0.0449) == 4
    with pytest.raises(ArgumentError):
        traj.index_at(0.3)


def test_norm_history_lines():
    mesh, mats, _ = _setup(BUBBLE, EX1, 2, control=False)
    traj = simulate_linear(mats, EX1, None, np.ones(9), TimeGrid.from_target(0.05, 0.1))
    buf = io.StringIO()
    write_norm_history(traj, buf, unshift(traj, EX1))
    recs = [json.loads(l) for l in buf.getvalue().splitlines()]
    assert len(recs) == 3
    assert set(recs[0]) == {"t", "l2", "h1", "control_l2", "l2_physical", "h1_physical"}
    assert recs[2]["t"] == pytest.approx(0.1)
