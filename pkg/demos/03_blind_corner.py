"""An obstacle appears just around a blind corner.

Each variant runs ten times with the start nudged by a fraction of a
control period. With collision checking on they all stop short; the one
that came out of the turn slower stops farther away. With checking off
they hit the block.
"""

import dataclasses

import numpy as np

from pursuit_lab import Variant, generate_scenario, run_scenario

sc = generate_scenario("blind_corner")
phases = np.arange(10) / 10

print("variant  mean stopped distance (m)  collisions (checking on / off)")
for v in Variant:
    cfg = sc.controller_config(v)
    stopped, hits, hits_off = [], 0, 0
    for phase in phases:
        sim = dataclasses.replace(sc.sim_config(), phase=float(phase))
        log, m = run_scenario(sc, cfg, sim)
        hits += m.collisions
        if m.stopped_distance_to_obstacle is not None:
            stopped.append(m.stopped_distance_to_obstacle)
        off = dataclasses.replace(cfg, use_collision_detection=False)
        hits_off += run_scenario(sc, off, sim)[1].collisions
    print(f"{v.name:>7}  {np.mean(stopped):25.3f}  {hits:2d} / {hits_off:2d}")
