"""Walk through the evaluation suite on hand-built team shapes.

    python3 demos/03_metrics_tour.py
"""

import numpy as np

from gentac.data import PitchSpec
from gentac.metrics import (defensive_disruption, depth_threat,
                            dominant_region, obet, structure, synthetic_epv,
                            width_threat)

pitch = PitchSpec.for_sport("soccer")

# --- collective structure ---------------------------------------------------
back_four = np.array([[-30.0, -12.0], [-32.0, -4.0], [-32.0, 4.0], [-30.0, 12.0]])
prev = back_four - np.array([0.3, 0.0])  # the line steps forward together
s = structure(back_four, prev_positions=prev, fps=25.0)
print("a back four stepping up:")
print(f"  stretch index {s.stretch_index:.2f} m, surface area {s.surface_area:.1f} m^2")
print(f"  width {s.team_width:.1f} m, length {s.team_length:.1f} m, "
      f"Frobenius {s.frobenius_norm:.1f} m")
print(f"  centroid displacement {s.centroid_displacement:.2f} m, "
      f"Kuramoto order {s.kuramoto_order:.3f} (parallel motion -> 1)\n")

# --- EPV-weighted offense metrics -------------------------------------------
# a synthetic threat surface peaking at the +x goal stands in for a real grid
epv = synthetic_epv(pitch)
attackers = np.array([[30.0, -8.0], [35.0, 0.0], [30.0, 8.0], [20.0, 0.0]])
defenders = np.array([[42.0, -6.0], [44.0, 0.0], [42.0, 6.0], [38.0, 0.0]])
print("attack camped at the edge of the box:")
print(f"  off-ball expected threat {obet(attackers, defenders, epv):.3f}")
print(f"  depth threat {depth_threat(attackers, defenders, epv):.3f}, "
      f"width threat {width_threat(attackers, defenders, epv):.3f}\n")

# --- defensive metrics -------------------------------------------------------
area_before = structure(defenders).surface_area
stretched = defenders + np.array([[0, -4], [0, 0], [0, 4], [-6, 0]])
area_after = structure(stretched).surface_area
print(f"defensive block pulled apart: area {area_before:.0f} -> {area_after:.0f} m^2, "
      f"disruption {defensive_disruption(area_before, area_after, pitch):+.3f}")

region = dominant_region(defenders, attackers, pitch=pitch)
sprinting = dominant_region(defenders, attackers,
                            def_velocities=np.tile([[-4.0, 0.0]], (4, 1)),
                            atk_velocities=np.zeros((4, 2)), pitch=pitch)
print(f"defensive dominant region {region:.0f} m^2 static, "
      f"{sprinting:.0f} m^2 while retreating")
