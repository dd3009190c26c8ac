"""
Checking the solver against brute force
=======================================

On tiny instances every design and every price on a grid can be tried.
The solver should never lose to the grid, and never win by more than the
grid's reported gap.
"""

# %%
import numpy as np

from revlog import RiskParams, solve
from revlog.oracle import cvar_grid_min, grid_solve, micro_instances
from revlog.risk import LossDistribution, cvar

# %%
d = LossDistribution(np.array([10.0, 20.0, 30.0, 40.0]), np.full(4, 0.25))
print("cvar:", cvar(d, 0.75), "grid:", cvar_grid_min(d, 0.75, 0.01))

# %%
# a 0.01 price grid keeps this quick; the acceptance suite uses 0.001
for n, inst in enumerate(micro_instances(6)):
    risk = RiskParams(0.9, 0.3)
    sol = solve(inst, risk)
    grid = grid_solve(inst, risk, price_step=0.01)
    print(f"instance {n}: solve {sol.objective:9.4f} grid {grid.objective:9.4f} "
          f"gap bound {grid.gap:.3f}")
