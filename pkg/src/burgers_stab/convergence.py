"""Errors between mesh levels, errors against exact fields, and tables."""

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import field_expr as fe
from .errors import ArgumentError, BurgersStabError
from .fem import assemble_static, discrete_norms, l2_project
from .mesh import build_uniform_mesh, prolongate
from .quadrature import physical_points, triangle_rule
from .riccati import CareProblem, solve_generalized_care
from .timestepping import (NewtonConfig, TimeGrid, simulate_linear,
                           simulate_nonlinear, unshift)

__all__ = ["ConvergenceTable", "TableRow", "error_between_levels",
           "error_vs_exact", "compute_orders", "run_experiment",
           "LevelResult", "ExperimentResult", "CSV_HEADER"]

log = logging.getLogger(__name__)

CSV_HEADER = ["h", "err_l2", "order_l2", "err_h1", "order_h1", "err_u", "order_u"]


@dataclass
class TableRow:
    h: float
    err_l2_state: float
    err_h1_state: float
    err_l2_control: Optional[float] = None
    order_l2: Optional[float] = None
    order_h1: Optional[float] = None
    order_control: Optional[float] = None


@dataclass
class ConvergenceTable:
    rows: List[TableRow]
    metadata: Dict = field(default_factory=dict)

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([_fmt(r.h), _fmt(r.err_l2_state), _fmt(r.order_l2),
                             _fmt(r.err_h1_state), _fmt(r.order_h1),
                             _fmt(r.err_l2_control), _fmt(r.order_control)])
        return buf.getvalue()

    def __str__(self):
        lines = ["{:>10} {:>13} {:>9} {:>13} {:>9} {:>13} {:>9}".format(*CSV_HEADER)]
        for r in self.rows:
            lines.append("{:>10} {:>13} {:>9} {:>13} {:>9} {:>13} {:>9}".format(
                f"1/{round(1 / r.h)}", _fmt(r.err_l2_state), _fmt(r.order_l2, "f"),
                _fmt(r.err_h1_state), _fmt(r.order_h1, "f"),
                _fmt(r.err_l2_control), _fmt(r.order_control, "f")))
        return "\n".join(lines)


def _fmt(x, style="e"):
    if x is None:
        return ""
    if math.isinf(x):
        return "inf"
    return f"{x:.5e}" if style == "e" else f"{x:.6f}"


def compute_orders(errors, h_values):
    """``log(e[i+1]/e[i]) / log(h[i+1]/h[i])``; ``None`` for the first row.

    A zero error yields ``inf``.
    """
    if len(errors) != len(h_values):
        raise ArgumentError("errors and h_values differ in length")
    if any(b >= a for a, b in zip(h_values, h_values[1:])):
        raise ArgumentError("h must be strictly decreasing")
    orders = [None]
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(h_values, h_values[1:])):
        if e0 < 0 or e1 < 0:
            raise ArgumentError("errors must be non-negative")
        if e0 == 0 or e1 == 0:
            orders.append(math.inf)
        else:
            orders.append(math.log(e1 / e0) / math.log(h1 / h0))
    return orders


def error_between_levels(fine, coarse, matrices_fine, t_eval):
    """``(l2, h1, control_l2)`` of ``fine - prolongate(coarse)`` at ``t_eval``."""
    fm, cm = fine.mesh, coarse.mesh
    if fm.k != cm.k + 1:
        raise ArgumentError(f"levels {cm.k} and {fm.k} are not nested neighbours")
    i_f = fine.index_at(t_eval)
    i_c = coarse.index_at(t_eval)
    d = fine.states[i_f] - prolongate(coarse.states[i_c], fm, cm)
    du = fine.controls[i_f] - prolongate(coarse.controls[i_c], fm, cm)
    l2, h1 = discrete_norms(matrices_fine, d)
    cu, _ = discrete_norms(matrices_fine, du)
    return l2, h1, cu


def error_vs_exact(traj, exact, mesh, t_eval, order=8):
    """L2 and H1 distance between the discrete state and the exact field.

    Integrated by triangle quadrature against the exact field and its
    symbolic gradient.
    """
    idx = traj.index_at(t_eval)
    t = float(traj.times[idx])
    nodal = mesh.full(traj.states[idx])
    area, grads = mesh.geometry()
    bary, w = triangle_rule(order)
    pts = physical_points(mesh, order)
    x1, x2 = pts[..., 0], pts[..., 1]
    zl = nodal[mesh.triangles]
    zh = zl @ bary.T                                   # (nt, nq)
    gh = np.einsum("ta,tad->td", zl, grads)            # (nt, 2)
    ones = np.ones_like(x1)
    ze = fe.evaluate(exact, x1, x2, t) * ones
    d1, d2 = fe.gradient(exact)
    g1 = fe.evaluate(d1, x1, x2, t) * ones
    g2 = fe.evaluate(d2, x1, x2, t) * ones
    l2sq = np.sum(area * (((zh - ze) ** 2) @ w))
    semi = np.sum(area * ((((gh[:, :1] - g1) ** 2) + ((gh[:, 1:] - g2) ** 2)) @ w))
    return float(np.sqrt(l2sq)), float(np.sqrt(l2sq + semi))


@dataclass(eq=False)
class LevelResult:
    level: int
    matrices: object
    trajectory: object
    physical: object
    grid: TimeGrid
    care: object = None
    seconds: float = 0.0


@dataclass(eq=False)
class ExperimentResult:
    table: ConvergenceTable
    levels: List[LevelResult]


def _run_level(config, k, controlled):
    import time
    start = time.perf_counter()
    mesh = build_uniform_mesh(k)
    params = config.physics
    y_s = fe.parse(config.ys)
    region = config.control_region if config.control_enabled else None
    matrices = assemble_static(mesh, params, y_s, region, config.quad_order)
    care = None
    if controlled:
        care = solve_generalized_care(CareProblem.from_matrices(matrices))
    z0_expr = config.initial_shifted()
    z0 = l2_project(mesh, z0_expr)
    grid = TimeGrid.from_target(config.dt_for(mesh.h), config.T)
    try:
        if config.mode == "linear":
            traj = simulate_linear(matrices, params, care, z0, grid)
        else:
            forcing = config.forcing_expr()
            traj = simulate_nonlinear(matrices, params, care, z0, grid, forcing,
                                      NewtonConfig(config.newton_tol))
    except BurgersStabError as exc:
        exc.args = (f"level {k}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
    ys_dofs = l2_project(mesh, y_s)
    physical = unshift(traj, params, ys_dofs)
    return LevelResult(k, matrices, traj, physical, grid, care,
                       time.perf_counter() - start)


def run_experiment(config, controlled=None, workers=None):
    """Run every level of ``config`` and reduce the results to a table.

    ``controlled`` overrides ``config.control_enabled`` (used to produce the
    uncontrolled companion table).  Levels may run on ``workers`` threads;
    the table is assembled sequentially in level order.
    """
    if controlled is None:
        controlled = config.control_enabled
    levels = list(config.levels)
    workers = workers or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda k: _run_level(config, k, controlled), levels))
    else:
        results = [_run_level(config, k, controlled) for k in levels]

    T = config.T
    exact = config.exact_expr()
    rows = []
    if exact is not None:
        for res in results:
            l2, h1 = error_vs_exact(res.trajectory, exact, res.matrices.mesh, T)
            rows.append(TableRow(res.matrices.mesh.h, l2, h1))
    else:
        for coarse, fine in zip(results, results[1:]):
            if fine.level != coarse.level + 1:
                raise ArgumentError("inter-level errors need consecutive levels")
            l2, h1, cu = error_between_levels(fine.trajectory, coarse.trajectory,
                                              fine.matrices, T)
            rows.append(TableRow(coarse.matrices.mesh.h, l2, h1,
                                 cu if controlled else None))
    hs = [r.h for r in rows]
    if rows:
        for name, col in (("order_l2", "err_l2_state"), ("order_h1", "err_h1_state"),
                          ("order_control", "err_l2_control")):
            vals = [getattr(r, col) for r in rows]
            if any(v is None for v in vals):
                continue
            for r, o in zip(rows, compute_orders(vals, hs)):
                setattr(r, name, o)
    metadata = {
        "example_id": config.example_id + ("-stabilized" if controlled else "-uncontrolled")
        if config.forcing == "none" else config.example_id,
        "T": T,
        "dt_rule": config.dt_rule,
        "dt": {str(r.level): r.grid.dt for r in results},
        "steps": {str(r.level): r.grid.steps for r in results},
        "omega": config.physics.omega,
        "eta": config.physics.eta,
        "nu0": config.physics.nu0,
        "v": list(config.physics.v),
        "mode": config.mode,
        "controlled": controlled,
        "levels": levels,
        "error_kind": "exact" if exact is not None else "inter-level (rows labelled by coarse h)",
        "quadrature_order": results[0].matrices.quad_order if results else None,
    }
    if controlled:
        metadata["care"] = {
            str(r.level): {"relative_residual": r.care.relative_residual,
                           "closed_loop_abscissa": r.care.closed_loop_abscissa,
                           "omega_P": r.care.omega_P, "alpha": r.care.alpha}
            for r in results}
    return ExperimentResult(ConvergenceTable(rows, metadata), results)
