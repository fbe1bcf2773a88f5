"""Generative multi-agent trajectory engine for team sports.

Library layout:

- ``autodiff``   dense float64 arrays with reverse-mode differentiation
- ``rng``        named, splittable counter-based random streams
- ``data``       tracking-clip parsing, refinement, resampling, windowing
- ``backbone``   token grids, embeddings, factorized space/time attention
- ``diffusion``  noise schedules, windowed denoising, causal rollout
- ``events``     attention pooling and hierarchical tactical event heads
- ``training``   optimization loops, schedules, checkpoints
- ``metrics``    geometric, structural, and offense/defense evaluation
- ``fixtures``   synthetic clip generators for tests and demos
- ``cli``        the ``gentac`` command-line entry point
"""

__version__ = "0.1.0"
