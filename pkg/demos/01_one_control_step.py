"""One control cycle, taken apart.

Builds a short bending path in an empty world, asks each variant for a
command from the same pose, then shows the regulation stages RPP applies.
"""

import numpy as np

from pursuit_lab import (ControllerConfig, OccupancyGrid, Path, Pose2D, Variant,
                         compute_command, compute_distance_field)
from pursuit_lab.controller import curvature_heuristic, proximity_heuristic
from pursuit_lab.scenarios import densify

path = Path(densify([(0, 0), (2, 0), (3, 1.5)], 0.05))
grid = OccupancyGrid.empty(8.0, 8.0, 0.05, -2.0, -3.0).with_rectangle(1.0, 0.45, 2.5, 0.65)
df = compute_distance_field(grid)
pose = Pose2D(0.9, 0.05, 0.0)

for variant in Variant:
    cfg = ControllerConfig(variant=variant)
    res = compute_command(pose, 0.8, path, df, cfg)
    print(f"{variant.name:>3}: v = {res.command.v:.3f} m/s, omega = {res.command.omega:+.3f} rad/s"
          f"  ({res.status.value})")

# RPP keeps every stage of the speed pipeline
b = compute_command(pose, 0.8, path, df, ControllerConfig()).breakdown
print()
print(b)

# the two heuristics on their own
print()
print("curvature heuristic, v=0.8, r_min=0.9:")
for kappa in (0.5, 1.0, 2.0, 4.0):
    print(f"  kappa {kappa:3.1f} -> {curvature_heuristic(0.8, kappa, 0.9):.3f} m/s")
print("proximity heuristic, v=0.8, d_prox=0.6, alpha=1.0:")
for d in np.linspace(0.0, 0.8, 5):
    print(f"  d_O {d:.1f} m -> {proximity_heuristic(0.8, d, 0.6, 1.0):.3f} m/s")
