"""Seed handling and trial-level parallelism.

Every random draw goes through :class:`numpy.random.Generator` backed by
PCG64.  Trial ``t`` of an experiment with master seed ``s`` gets its own
64-bit seed derived by ``SeedSequence(s, spawn_key=(t,))``, so results do
not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

RNG_ID = "numpy-pcg64"
SEED_ENV = "TRPLAB_SEED"

T = TypeVar("T")


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(master: int, t: int) -> int:
    ss = np.random.SeedSequence(master, spawn_key=(t,))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_seeds(master: int, trials: int) -> list[int]:
    return [trial_seed(master, t) for t in range(trials)]


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw else 0


def map_trials(fn: Callable[..., T], arg_list: Sequence[tuple], jobs: int = 1) -> list[T]:
    """Apply ``fn(*args)`` to every tuple; output order follows input order."""
    if jobs <= 1 or len(arg_list) <= 1:
        return [fn(*args) for args in arg_list]
    chunk = max(1, len(arg_list) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star, [fn] * len(arg_list), arg_list, chunksize=chunk))


def _star(fn, args):
    return fn(*args)
