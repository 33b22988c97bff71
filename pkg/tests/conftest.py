"""Shared generators for the test suite."""

from __future__ import annotations

import numpy as np

from turnlab.dynamics import FiniteBranch, StartAt, SystemInstance
from turnlab.ideals import IdealModel
from turnlab.windows import SequenceWindow


def alternating_window(n: int = 20_000) -> SequenceWindow:
    return SequenceWindow(np.where(np.arange(n) % 2 == 0, 1.0, -1.0))


def periodic_noise_window(
    seed: int,
    n: int = 20_000,
    n_levels: int | None = None,
    noise_density: float = 0.001,
    spread: float = 1.0,
):
    """Finite-valued periodic sequence plus sparse bounded noise.

    The levels are well separated relative to the default grid, so the
    cluster set of the window is exactly the level set; the noise support
    has upper density at most ``noise_density``.
    """
    rng = np.random.default_rng(seed)
    k = n_levels if n_levels is not None else int(rng.integers(3, 7))
    levels = np.linspace(-spread, spread, k) + rng.uniform(-0.02, 0.02, k) * spread
    vals = levels[np.arange(n) % k]
    n_noise = int(noise_density * n)
    if n_noise:
        support = rng.choice(n, size=n_noise, replace=False)
        vals = vals.copy()
        vals[support] = rng.uniform(-spread, spread, n_noise)
    return SequenceWindow(vals), np.sort(levels)


def random_two_branch_system(seed: int, horizon: int) -> SystemInstance:
    """Seeded contractive two-branch instance for oracle-agreement runs."""
    rng = np.random.default_rng(seed)
    slopes = rng.uniform(-0.9, 0.9, 2)
    intercepts = rng.uniform(-1.0, 1.0, 2)
    maps = tuple(
        (lambda x, a=a, b=b: a * x + b) for a, b in zip(slopes, intercepts)
    )
    return SystemInstance(
        dim=1,
        phi=FiniteBranch(maps, dim=1),
        utility=lambda pts: pts[..., 0],
        ideal=IdealModel("fin", horizon, cutoff=max(1, horizon // 2)),
        constraint=StartAt([1.0]),
        box=np.array([[-6.0, 6.0]]),
    )
