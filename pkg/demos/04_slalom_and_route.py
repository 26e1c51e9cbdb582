"""Weaving between blocks, then a longer route through an open map.

Prints the comparison tables and writes one SVG per scenario.
"""

import os

from pursuit_lab import Variant, generate_scenario, run_scenario
from pursuit_lab.report import comparison_table, render_svg

here = os.path.dirname(os.path.abspath(__file__))

for kind in ("slalom", "waypoint_route"):
    sc = generate_scenario(kind)
    results, logs = {}, []
    for v in Variant:
        log, m = run_scenario(sc, sc.controller_config(v), sc.sim_config())
        results[v.value] = m
        logs.append(log)
    print(kind)
    print(comparison_table(results, kind))
    print()
    with open(os.path.join(here, f"{kind}.svg"), "w") as fh:
        fh.write(render_svg(sc.grid, sc.path_points, logs, 0.8, kind))
