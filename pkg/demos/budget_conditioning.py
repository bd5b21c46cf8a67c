"""Why four CPS devices cannot pin down four loss channels.

The MA, MS and SA columns of the participation matrix scale almost
together with the gap, so the budget solve is badly conditioned and the
solver says so. A random matrix with independent columns solves cleanly.
"""

import warnings
from importlib.resources import files

import numpy as np

from cpsloss import BudgetSystem, io, solve_budget

system, _ = io.read_budget(files("cpsloss") / "data" / "budget.csv")
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    sol = solve_budget(system, "nonnegative")
print(f"fixture matrix: condition {sol.condition:.0f}")
for w in caught:
    print(f"  warning: {w.message}")
print("  products (nm):", {k: f"{v:.2e}" for k, v in sol.products.items()})

rng = np.random.default_rng(0)
p = rng.uniform(5, 200, size=(4, 3))
qp = rng.uniform(1e-10, 1e-9, 4)
truth = np.array([2e-3, 1e-3, 1e-3, 50.0])
loss = np.column_stack([p * 1e-6, qp]) @ truth
good = solve_budget(BudgetSystem(("a", "b", "c", "d"), p[:, 0], p[:, 1], p[:, 2], qp, 1 / loss))
print(f"random matrix: condition {good.condition:.0f}, n_qp = {good.n_qp:.3f} (truth 50)")
