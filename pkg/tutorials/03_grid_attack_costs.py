"""From grid outages to a cost matrix, and a check that variation grows linearly.

A node's attack cost is how much the optimal operating cost moves when the
node is cut off.  The script uses one synthetic day of the bundled grid.
"""
# %%
import numpy as np

from mnbgrid.adversary import compute_variation
from mnbgrid.analysis import estimate_t0, regress_costs
from mnbgrid.opf.dcopf import build_lp, cost_timeseries, solve_lp
from mnbgrid.opf.grid import bundled_grid, synthetic_states

grid = bundled_grid()
states = synthetic_states(grid, steps=96)

# %% One dispatch problem.
sol = solve_lp(build_lp(grid, states[40]))
print(f"{states[40].timestamp}: cost {sol.objective:.2f}, shed {sol.shed.sum():.1f} kW")

# %% Attack costs for every node and step, scaled into [0, 1/m].
cm = cost_timeseries(grid, states, m=3)
print("mean normalized cost per node:", np.round(cm.costs.mean(axis=0), 3))
print("cumulative variation V_T:", round(compute_variation(cm).total, 3))

# %% Linear growth of V_t and the implied threshold time.
rep = regress_costs(cm)
print(f"V_t ~ {rep.intercept:.3f} + {rep.slope:.4f} t, p = {rep.p_slope:.2g}")
print("T0 from the fitted line:", estimate_t0(rep, 3))
