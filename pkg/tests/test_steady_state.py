import math

import numpy as np
import pytest

from burgers_stab import field_expr as fe
from burgers_stab.errors import ArgumentError, ConvergenceError
from burgers_stab.fem import PhysicsParams, assemble_static, load_vector
from burgers_stab.mesh import build_uniform_mesh, interpolate
from burgers_stab.riccati import CareProblem, solve_generalized_care
from burgers_stab.steady_state import (coercivity_margin, forcing_from_steady,
                                       manufactured_forcing, solve_steady_picard,
                                       steady_profile)

from conftest import BUBBLE, SINE

EX1 = PhysicsParams(1.0, 0.0, (1.0, 1.0), 24.0)


def _fd_laplacian(f, x, y, h=1e-4):
    return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / h ** 2


def test_forcing_of_zero_state():
    f = forcing_from_steady(fe.ZERO, EX1)
    assert fe.evaluate(f, 0.3, 0.4) == 0.0


def test_bubble_forcing_at_center():
    y_s = fe.parse(BUBBLE)
    f = forcing_from_steady(y_s, EX1)
    # v.grad y_s vanishes at the centre; -lap y_s = 2*(1/4) + 2*(1/4) = 1
    oracle = -_fd_laplacian(lambda a, b: a * b * (1 - a) * (1 - b), 0.5, 0.5)
    assert oracle == pytest.approx(1.0, abs=1e-6)
    assert fe.evaluate(f, 0.5, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_forcing_satisfies_steady_equation_pointwise(rng):
    y_s = fe.parse(SINE)
    params = PhysicsParams(0.7, 0.3, (1.0, -2.0))
    f = forcing_from_steady(y_s, params)
    g = lambda a, b: math.sin(math.pi * a) * math.sin(math.pi * b)  # noqa: E731
    for x, y in rng.random((10, 2)) * 0.8 + 0.1:
        h = 1e-5
        gx = (g(x + h, y) - g(x - h, y)) / (2 * h)
        gy = (g(x, y + h) - g(x, y - h)) / (2 * h)
        ref = (-0.7 * _fd_laplacian(g, x, y) + g(x, y) * (1.0 * gx - 2.0 * gy) + 0.3 * g(x, y))
        assert fe.evaluate(f, x, y) == pytest.approx(ref, rel=1e-5, abs=1e-5)


def test_viscosity_scales_only_the_diffusion_part():
    y_s = fe.parse(BUBBLE)
    f1 = forcing_from_steady(y_s, PhysicsParams(1.0, 0.0, (0.0, 0.0)))
    f2 = forcing_from_steady(y_s, PhysicsParams(2.0, 0.0, (0.0, 0.0)))
    assert fe.evaluate(f2, 0.3, 0.6) == pytest.approx(2 * fe.evaluate(f1, 0.3, 0.6), rel=1e-15)


def test_steady_profile_fields():
    prof = steady_profile(fe.parse(BUBBLE), EX1)
    assert fe.evaluate(prof.laplacian, 0.5, 0.5) == -1.0
    assert fe.evaluate(prof.grad[0], 0.5, 0.5) == 0.0


def _printed_forcing(x1, x2, t, eta):
    s1, s2 = math.sin(math.pi * x1), math.sin(math.pi * x2)
    c1, c2 = math.cos(math.pi * x1), math.cos(math.pi * x2)
    e = math.exp(t)
    bubble = x1 * x2 * (1 - x1) * (1 - x2)
    return ((1 + 2 * math.pi ** 2 * eta) * e * s1 * s2
            + (bubble + e * s1 * s2) * e * math.pi * (c1 * s2 + s1 * c2)
            + (x2 * (1 - 2 * x1) * (1 - x2) + x1 * (1 - x1) * (1 - 2 * x2)) * e * s1 * s2)


def test_manufactured_forcing_matches_printed_expression():
    params = PhysicsParams(5.0, 0.0, (1.0, 1.0), 0.0)
    z = fe.parse("exp(t)*" + SINE)
    g = manufactured_forcing(z, fe.parse(BUBBLE), params)
    for x1, x2, t in [(0.3, 0.7, 0.5), (0.1, 0.2, 0.0), (0.9, 0.45, 1.3)]:
        assert fe.evaluate(g, x1, x2, t) == pytest.approx(_printed_forcing(x1, x2, t, 5.0),
                                                         abs=1e-10)
    assert fe.evaluate(g, 0.3, 0.7, 0.5) == pytest.approx(107.5822085762684, abs=1e-10)


def test_manufactured_forcing_simple_cases():
    params = PhysicsParams(3.0, 0.0, (0.0, 0.0), 0.0)
    g = manufactured_forcing(fe.ZERO, fe.parse(BUBBLE), params)
    assert fe.evaluate(g, 0.2, 0.3, 0.4) == 0.0
    z = fe.parse("exp(t)*" + SINE)
    g = manufactured_forcing(z, fe.ZERO, params)
    x1, x2, t = 0.2, 0.65, 0.3
    expected = (1 + 2 * math.pi ** 2 * 3.0) * math.exp(t) * math.sin(math.pi * x1) * math.sin(math.pi * x2)
    assert fe.evaluate(g, x1, x2, t) == pytest.approx(expected, rel=1e-14)


def test_picard_zero_load():
    mats = assemble_static(build_uniform_mesh(3), EX1, fe.parse(BUBBLE))
    Y, inc = solve_steady_picard(mats, np.zeros(mats.n))
    assert np.all(Y == 0) and len(inc) == 1


def test_picard_recovers_steady_state_at_second_order():
    y_s = fe.parse(BUBBLE)
    f = forcing_from_steady(y_s, EX1)
    errs = []
    for k in (2, 3, 4):
        mesh = build_uniform_mesh(k)
        mats = assemble_static(mesh, EX1, y_s)
        Y, inc = solve_steady_picard(mats, load_vector(mesh, f))
        d = Y - interpolate(mesh, lambda a, b: fe.evaluate(y_s, a, b))
        errs.append(math.sqrt(d @ (mats.M @ d)))
        assert all(b < a for a, b in zip(inc, inc[1:]))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert orders[-1] == pytest.approx(2.0, abs=0.25)


def test_picard_increments_contract_geometrically():
    y_s = fe.parse(BUBBLE)
    mesh = build_uniform_mesh(3)
    mats = assemble_static(mesh, EX1, y_s)
    _, inc = solve_steady_picard(mats, 5 * load_vector(mesh, forcing_from_steady(y_s, EX1)))
    ratios = [b / a for a, b in zip(inc, inc[1:]) if b > 1e-14]
    assert max(ratios) < 0.5


def test_picard_failure_carries_history():
    y_s = fe.parse(BUBBLE)
    mesh = build_uniform_mesh(2)
    mats = assemble_static(mesh, EX1, y_s)
    with pytest.raises(ConvergenceError) as info:
        solve_steady_picard(mats, load_vector(mesh, forcing_from_steady(y_s, EX1)), max_iter=2)
    assert len(info.value.history) == 2
    with pytest.raises(ArgumentError):
        solve_steady_picard(mats, np.zeros(9), tol=0.0)


def test_coercivity_margin_approaches_dirichlet_eigenvalue():
    params = PhysicsParams(1.0, 0.0, (1.0, 1.0))
    margins = []
    for k in (2, 3, 4):
        mats = assemble_static(build_uniform_mesh(k), params, fe.ZERO)
        margins.append(coercivity_margin(mats).margin)
    assert all(m > 2 * math.pi ** 2 for m in margins)
    assert margins[0] > margins[1] > margins[2]
    assert margins[-1] == pytest.approx(2 * math.pi ** 2, rel=0.02)


def test_coercivity_margin_example_one_and_gain():
    mats = assemble_static(build_uniform_mesh(4), EX1, fe.parse(BUBBLE))
    assert coercivity_margin(mats).margin > 0
    small = assemble_static(build_uniform_mesh(3), EX1, fe.parse(BUBBLE))
    sol = solve_generalized_care(CareProblem.from_matrices(small))
    rep = coercivity_margin(small, gain=sol)
    assert np.isfinite(rep.grad_margin) and rep.level == 3


def test_coercivity_margin_invariant_under_reordering(rng):
    mats = assemble_static(build_uniform_mesh(3), EX1, fe.parse(BUBBLE))
    perm = rng.permutation(mats.n)
    from dataclasses import replace
    shuffled = replace(mats, M=mats.M[perm][:, perm], K=mats.K[perm][:, perm],
                       A1=mats.A1[perm][:, perm], A2=mats.A2[perm][:, perm],
                       B=mats.B[perm][:, perm])
    assert coercivity_margin(shuffled).margin == pytest.approx(coercivity_margin(mats).margin,
                                                               rel=1e-12)
