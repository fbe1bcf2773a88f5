"""Shared oracles used by both the unit tests and the acceptance suite."""

import math

import numpy as np

from gentac.diffusion import denoise_step, forward_noise, make_schedule
from gentac.rng import Rng


def oracle_sampler_mse(S, n_chains=20000, seed=0):
    """Scalar-toy reconstruction error for a perfect noise oracle.

    Each chain fixes a target x0, corrupts it to step S, then walks the
    reverse chain feeding the denoiser the exact noise content of the
    current state. The update is algebraically exact, so the measured MSE is
    the accumulated floating-point residual; it shrinks as the schedule
    refines because late-chain stochastic deviation shrinks with S.
    """
    schedule = make_schedule(S)
    rng = Rng(seed, ("oracle-sampler", S))
    x0 = rng.child("x0").uniform(-1, 1, (n_chains,))
    x, _ = forward_noise(x0, S, schedule, rng.child("fwd"))
    for s in range(S, 0, -1):
        ab = schedule.alpha_bar(s)
        eps_true = (x - math.sqrt(ab) * x0) / math.sqrt(1.0 - ab)
        x = denoise_step(x, eps_true, s, schedule, rng.child("z", s))
    return float(((x - x0) ** 2).mean())


def fd_check_model(model, loss_fn, h=1e-5):
    """Worst relative error between analytic and central-difference
    gradients over every coordinate of every parameter."""
    params = model.parameters()
    for p in params:
        p.zero_grad()
    import gentac.autodiff as ad

    ad.backward(loss_fn())
    worst = 0.0
    worst_name = ""
    for p in params:
        analytic = p.grad
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = p.data[i]
            p.data[i] = orig + h
            fp = float(loss_fn().data)
            p.data[i] = orig - h
            fm = float(loss_fn().data)
            p.data[i] = orig
            fd = (fp - fm) / (2 * h)
            m = max(abs(fd), abs(analytic[i]))
            rel = 0.0 if m < 1e-10 else abs(fd - analytic[i]) / m
            if rel > worst:
                worst, worst_name = rel, f"{p.name}{i}"
    return worst, worst_name
