"""Sample-size arithmetic and seeded stratified draws.

Implements the classic known-population sample-size recipe: an initial size
from the z-score/proportion/margin formula, a finite-population correction,
and proportional allocation across strata. All rounding is half-up, applied
independently to each figure; the summed allocations may therefore drift
from the corrected sample size by up to one per stratum.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence, TypeVar

from .model import StatusClass, StratumPlan, UrlRecord

#: Common two-sided critical values. The z-score is always passed in
#: explicitly; these are provided for convenience.
Z_90 = 1.645
Z_95 = 1.96
Z_99 = 2.576

T = TypeVar("T")


def round_half_up(x: float) -> int:
    """Round to the nearest integer with halves going up (0.5 -> 1)."""
    if x < 0:
        raise ValueError("x must be non-negative")
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class SamplingParams:
    """Inputs to the sample-size formulas."""

    z: float
    p: float
    e: float
    N: int

    def __post_init__(self) -> None:
        if self.z <= 0:
            raise ValueError("z must be positive")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if not 0 < self.e <= 1:
            raise ValueError("e must lie in (0, 1]")
        if self.N < 1:
            raise ValueError("N must be at least 1")


@dataclass(frozen=True)
class SampleSizeResult:
    """Initial and population-corrected sample sizes, raw and rounded."""

    n0_real: float
    n0: int
    n_real: float
    n: int


def initial_sample_size(z: float, p: float, e: float) -> float:
    """Initial sample size z^2 * p * (1 - p) / e^2 for an unbounded population."""
    if e == 0:
        raise ValueError("margin of error must be non-zero")
    return z * z * p * (1.0 - p) / (e * e)


def fpc_sample_size(n0: int, N: int) -> float:
    """Correct an initial size ``n0`` for a finite population of ``N``: n0*N / (n0 + N - 1)."""
    if n0 < 0:
        raise ValueError("n0 must be non-negative")
    if N < 1:
        raise ValueError("N must be at least 1")
    return n0 * N / (n0 + (N - 1))


def sample_size(params: SamplingParams) -> SampleSizeResult:
    """Run both formulas, rounding half-up at each intermediate figure."""
    n0_real = initial_sample_size(params.z, params.p, params.e)
    n0 = round_half_up(n0_real)
    n_real = fpc_sample_size(n0, params.N)
    n = round_half_up(n_real)
    return SampleSizeResult(n0_real=n0_real, n0=n0, n_real=n_real, n=n)


def allocate_strata(
    n: int, strata: Sequence[tuple[StatusClass, int]]
) -> list[tuple[StatusClass, int]]:
    """Allocate ``n`` proportionally over (label, size) strata, half-up per stratum.

    Input order is preserved. Per-stratum rounding is independent, so the
    allocations may sum to slightly more or less than ``n``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if any(size < 0 for _, size in strata):
        raise ValueError("stratum sizes must be non-negative")
    total = sum(size for _, size in strata)
    if total < 1:
        raise ValueError("at least one stratum must be non-empty")
    return [(label, round_half_up(n * size / total)) for label, size in strata]


def draw_sample(members: Sequence[T], k: int, seed: int) -> list[T]:
    """Draw ``k`` members uniformly without replacement, deterministically per seed.

    Uses the stdlib Mersenne Twister (``random.Random(seed).sample``); the only
    contract is rerun equality for a fixed (members, k, seed), not any specific
    stream.
    """
    if not 0 <= k <= len(members):
        raise ValueError(f"cannot draw {k} from {len(members)} members")
    return random.Random(seed).sample(list(members), k)


def plan_strata(
    n: int,
    strata_members: Sequence[tuple[StatusClass, Sequence[UrlRecord]]],
    seed: int,
) -> list[StratumPlan]:
    """Allocate over the given strata and draw each stratum's sample.

    Stratum i is drawn with ``seed + i`` so plans stay reproducible while the
    per-stratum streams stay independent.
    """
    sizes = [(label, len(members)) for label, members in strata_members]
    allocations = allocate_strata(n, sizes)
    plans = []
    for i, ((label, members), (_, allocation)) in enumerate(zip(strata_members, allocations)):
        picked = draw_sample(members, allocation, seed + i)
        plans.append(
            StratumPlan(
                label=label,
                population_size=len(members),
                allocation=allocation,
                members=tuple(members),
                sample=tuple(picked),
            )
        )
    return plans
