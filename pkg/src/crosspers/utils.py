from __future__ import annotations

import logging
import os
import time
from datetime import timedelta
from functools import wraps
from typing import Awaitable, Callable, ParamSpec, TypeVar

import numpy as np
from rich.logging import RichHandler

logger = logging.getLogger(__name__)
FORMAT = "%(message)s"

SEED_ENV = "CROSSPERS_SEED"

T = TypeVar("T")
P = ParamSpec("P")


def setup_rich_logging(level: int) -> None:
    logging.basicConfig(
        level=level,
        format=FORMAT,
        datefmt="[%X]",
        handlers=[RichHandler()],
    )


def log_call(func: Callable[P, T]) -> Callable[P, T]:
    @wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
        start = time.time()
        ret = func(*args, **kwargs)
        duration = timedelta(seconds=time.time() - start)
        logger.debug("executed %s in %s", func.__qualname__, duration)
        return ret

    return wrapper


def alog_call(func: Callable[P, Awaitable[T]]) -> Callable[P, Awaitable[T]]:
    @wraps(func)
    async def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
        start = time.time()
        ret = await func(*args, **kwargs)
        duration = timedelta(seconds=time.time() - start)
        logger.debug("executed %s in %s", func.__qualname__, duration)
        return ret

    return wrapper


def get_cpu_count() -> int:
    """Get the number of CPUs available for the current job/task.

    SLURM_CPUS_PER_TASK and PBS_NUM_PPN take precedence over os.cpu_count().

    Returns:
        int: The number of CPUs available for the current job/task.
    """
    return int(
        os.environ.get(
            "SLURM_CPUS_PER_TASK",
            os.environ.get(
                "PBS_NUM_PPN",
                os.cpu_count() or 1,
            ),
        )
    )


def resolve_n_jobs(n_jobs: int) -> int:
    """Map the ``--jobs`` convention onto a worker count, 0 means all CPUs."""
    if n_jobs < 0:
        raise ValueError(f"n_jobs must be >= 0, got {n_jobs}")
    return n_jobs or max(get_cpu_count(), 1)


def resolve_seed(*candidates: int | None) -> int:
    """Return the first seed that is set, then the environment, then 0.

    Args:
        *candidates: Seeds in order of precedence, e.g. flag then config file.

    Returns:
        int: The effective seed.
    """
    for seed in candidates:
        if seed is not None:
            return int(seed)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        try:
            return int(env_seed)
        except ValueError as exc:
            raise ValueError(f"{SEED_ENV} is not an integer: {env_seed!r}") from exc
    return 0


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent 64 bit sub-seed from a seed and integer keys."""
    sequence = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def get_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator, optionally on a derived sub-stream."""
    if keys:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *keys])))
    return np.random.Generator(np.random.PCG64(seed))


def format_float(value: float) -> str:
    """Lossless float formatting with 17 significant digits."""
    if np.isposinf(value):
        return "inf"
    if np.isneginf(value):
        return "-inf"
    return f"{value:.17g}"


def as_readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array
