"""Train the hierarchical event classifier and forecast outcomes from
generated futures.

    python3 demos/04_event_recognition.py
"""

import numpy as np

from gentac.backbone import ModelConfig
from gentac.data import PitchSpec, clip_to_segment, normalize, window
from gentac.diffusion import RolloutConfig
from gentac.events import forecast_event, ground_event
from gentac.fixtures import constant_velocity_clips, event_class_clips
from gentac.rng import Rng
from gentac.training import (desk_event_config, desk_forecast_config,
                             split_clips, train)

# --- grounding: classify observed clips -------------------------------------
clips = event_class_clips(120, seed=3, duration_s=1.0)
split = split_clips(clips, 0.2, seed=0)
config = desk_event_config(l_max=25, epochs=20, seed=2)
print(f"training the event head on {len(split.train)} labeled clips ...")
model, result = train(split, config)
print(f"validation top-1 type accuracy: {result.best_metric:.2f}")

hits = 0
for clip in split.valid:
    pred = ground_event(clip, model)
    hits += pred.predicted_subtype == clip.metadata["event_subtype"]
print(f"held-out subtype accuracy: {hits}/{len(split.valid)}")
sample = split.valid[0]
pred = ground_event(sample, model)
print(f"example: truth {sample.metadata['event_subtype']!r} -> "
      f"predicted {pred.predicted_subtype!r} "
      f"(p = {pred.combined.max():.2f})\n")

# --- forecasting: classify K sampled futures --------------------------------
print("training a small forecaster for the rollout stage ...")
motion = constant_velocity_clips(200, seed=4, n_players=3, duration_s=3.0)
f_split = split_clips(motion, 0.1, seed=0)
f_config = desk_forecast_config(epochs=6, seed=3)
traj_model, _ = train(f_split, f_config)

pitch = PitchSpec.for_sport("soccer")
hist, _ = window(normalize(clip_to_segment(f_split.valid[0]), pitch), 0, 25, 25)
summary = forecast_event(
    hist, RolloutConfig(window=0.2, history=1.0, horizon=1.0, samples=6,
                        fps=25.0),
    traj_model, f_config.schedule(), model, Rng(9, ("fe",)),
    event_input_frames=25)
print("\ntop predicted outcomes across 6 sampled futures "
      "(median probability, 10-90% band):")
order = np.argsort(-summary.median)[:3]
for j in order:
    name = summary.subtype_labels[j]
    print(f"  {name:16s} median {summary.median[j]:.3f}   "
          f"[{summary.p10[j]:.3f}, {summary.p90[j]:.3f}]")
