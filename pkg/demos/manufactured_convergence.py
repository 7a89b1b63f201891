"""Convergence against a known solution of the nonlinear problem.

The exact shifted state ``e^t sin(pi x1) sin(pi x2)`` is imposed by a
forcing computed symbolically from the equation.  With dt = h/2 and BDF2,
the L2 error should fall like h^2 and the H1 error like h.

Run::

    python3 demos/manufactured_convergence.py
"""

from burgers_stab.config import load_config
from burgers_stab.configs import bundled_path
from burgers_stab.convergence import run_experiment

config = load_config(bundled_path("ex2")).with_levels([2, 3, 4])

result = run_experiment(config)
print(result.table)

newton = [max(r.trajectory.newton_iterations) for r in result.levels]
print("\nmost Newton iterations in any step, per level:", newton)
