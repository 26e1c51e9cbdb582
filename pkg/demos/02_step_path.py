"""Tracking a square-wave path, and what r_min does to it.

Writes step_path.svg (all three variants, colored by speed) next to this
script and prints the tracking error and completion time of each run.
"""

import dataclasses
import os

from pursuit_lab import Variant, generate_scenario, run_scenario
from pursuit_lab.report import comparison_table, render_svg

here = os.path.dirname(os.path.abspath(__file__))
sc = generate_scenario("step_path")

results, logs = {}, []
for v in Variant:
    log, m = run_scenario(sc, sc.controller_config(v), sc.sim_config())
    results[v.value] = m
    logs.append(log)
print(comparison_table(results, sc.kind))

with open(os.path.join(here, "step_path.svg"), "w") as fh:
    fh.write(render_svg(sc.grid, sc.path_points, logs, 1.0, "step path: PP, APP, RPP"))

# a larger r_min starts slowing in gentler turns: tighter tracking, longer runs
print()
print("r_min  error (m)  time (s)")
for r_min in (1.0, 1.25, 1.5, 1.75, 2.0):
    cfg = dataclasses.replace(sc.controller_config(Variant.RPP), r_min=r_min)
    _, m = run_scenario(sc, cfg, sc.sim_config())
    print(f"{r_min:5.2f}  {m.average_distance_to_path:9.4f}  {m.time:8.2f}")
