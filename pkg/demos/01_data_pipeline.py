"""Tour of the tracking-data pipeline: parse, repair, resample, window.

Run from the repository root:

    python3 demos/01_data_pipeline.py
"""

import numpy as np

from gentac import data
from gentac.data import PitchSpec, RefineParams
from gentac.fixtures import constant_velocity_clips

# --- the clip format ------------------------------------------------------
# A clip is a JSON map from frame-index strings to {ball, team0, team1};
# [null, null] marks a missing observation.
raw = """{
  "100": {"ball": [6.50, 4.20], "team0": {"P1": [-0.74, -30.28], "P2": [-12.45, -8.44]}, "team1": {"Q1": [-25.95, 10.47]}},
  "101": {"ball": [null, null], "team0": {"P1": [-0.73, -30.41], "P2": [-12.54, -8.62]}, "team1": {"Q1": [-25.86, 10.47]}}
}
"""
clip = data.parse_clip(raw)
print(f"parsed {len(clip)} frames; ball at frame 100: {clip.frames[0].ball}")
print(f"frame 101 ball missing: {clip.frames[1].ball is None}")

# serialization is canonical: parse . serialize is the identity
assert data.serialize_clip(clip) == raw
print("canonical round trip holds\n")

# --- repair: gaps, teleports, smoothing -----------------------------------
broken = constant_velocity_clips(1, seed=4, n_players=3, jitter=0.0)[0]
for t in (30, 31, 32):                       # a short dropout
    broken.frames[t].team0["A1"] = None
frame = broken.frames[50]                    # a mass teleport
for pid in list(frame.team0):
    x, y = frame.team0[pid]
    frame.team0[pid] = (x + 25.0, y)
for pid in list(frame.team1):
    x, y = frame.team1[pid]
    frame.team1[pid] = (x + 25.0, y)

repaired = data.refine(broken, RefineParams(ema_gamma=0.9))
seg = data.clip_to_segment(repaired)
speeds = np.linalg.norm(np.diff(seg.coords, axis=0), axis=-1) * repaired.fps
print(f"after refine: gap filled = {repaired.frames[31].team0['A1'] is not None}, "
      f"max inter-frame speed = {speeds[seg.visibility[1:] & seg.visibility[:-1]].max():.1f} m/s")

# --- resampling -----------------------------------------------------------
slow = data.resample(repaired, 12.5)
back = data.resample(slow, 25.0)
print(f"25 -> 12.5 -> 25 fps: {len(repaired)} -> {len(slow)} -> {len(back)} frames")

# --- normalization and windowing ------------------------------------------
pitch = PitchSpec.for_sport("soccer")
norm = data.normalize(data.clip_to_segment(repaired), pitch)
hist, fut = data.window(norm, start=0, history_len=25, future_len=25)
print(f"window: history {hist.coords.shape}, future {fut.coords.shape}, "
      f"coordinates within [{norm.coords.min():.2f}, {norm.coords.max():.2f}]")
