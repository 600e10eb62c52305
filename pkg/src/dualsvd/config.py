"""Run configuration, seeding and thread limits."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

import numpy as np

THREADS_ENV = "DUALSVD_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a CLI run; echoed into every JSON report."""

    command: str
    flags: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self) -> None:
        for name, value in self.tolerances.items():
            if value is not None and not value > 0:
                raise ValueError(f"tolerance {name} must be positive, got {value}")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_json(self) -> dict:
        return asdict(self)


def spawn_generators(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` independent generators derived from one master seed.

    Child ``k`` is ``Generator(PCG64(SeedSequence(seed).spawn(n)[k]))``, so
    stream ``k`` depends only on ``(seed, k)`` and never on how many draws
    another stream made.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def child_generator(seed: int, index: int) -> np.random.Generator:
    """Stream ``index`` of :func:`spawn_generators` without building the others."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def thread_limit() -> int | None:
    """Value of ``DUALSVD_THREADS``; ``None`` for unset or ``0`` (library default)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {n}")
    return n or None
