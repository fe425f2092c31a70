"""Reference schemes and brute-force oracles."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .delivery import run_delivery
from .model import EXPECTED, Config, ConfigError, RequestSchedule, as_fraction

EXHAUSTIVE_LIMIT = 10**6

UNCODED = "uncoded"
SYNC_CLOSED_FORM = "sync-closed-form"
SYNC_SIMULATED = "sync-simulated"


@dataclass(frozen=True)
class BaselineResult:
    scheme: str
    load: Fraction

    def __post_init__(self):
        if self.load < 0:
            raise ValueError("negative load")


def uncoded_load(K: int, N: int, M) -> Fraction:
    """Normalized load when each F-AP is unicast the uncached part of its file."""
    return K * (1 - as_fraction(M) / N)


def sync_closed_form(K: int, N: int, M) -> Fraction:
    """Normalized load of decentralized synchronous coded caching."""
    q = as_fraction(M) / N
    return (1 / q - 1) * (1 - (1 - q) ** K)


def sync_simulated(config: Config, schedule: RequestSchedule) -> Fraction:
    """Simulated load with the deadline relaxed to the whole horizon."""
    return run_delivery(config.replace(delta_b=config.B), schedule).normalized


def baselines(config: Config, schedule: RequestSchedule | None = None) -> list[BaselineResult]:
    out = [
        BaselineResult(UNCODED, uncoded_load(config.K, config.N, config.M)),
        BaselineResult(SYNC_CLOSED_FORM, sync_closed_form(config.K, config.N, config.M)),
    ]
    if schedule is not None:
        out.append(BaselineResult(SYNC_SIMULATED, sync_simulated(config, schedule)))
    return out


def _load_for(args) -> Fraction:
    config, arrival, demand = args
    return run_delivery(config, RequestSchedule(arrival, demand)).normalized


def exhaustive_worst_case(config: Config, schedule: RequestSchedule,
                          workers: int | None = None) -> tuple[tuple[int, ...], Fraction]:
    """Try every demand vector on a fixed arrival pattern; return the first
    maximizer (lexicographic order) and its normalized load."""
    if config.mode != EXPECTED:
        raise ConfigError("exhaustive search runs in expected-size mode only")
    count = config.N ** config.K
    if count > EXHAUSTIVE_LIMIT:
        raise ConfigError(f"{count} demand vectors exceeds the limit of {EXHAUSTIVE_LIMIT}")
    vectors = list(itertools.product(range(1, config.N + 1), repeat=config.K))
    jobs = [(config, schedule.arrival, d) for d in vectors]
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            loads = list(pool.map(_load_for, jobs, chunksize=64))
    else:
        loads = [_load_for(job) for job in jobs]
    best = max(range(len(vectors)), key=lambda i: (loads[i], -i))
    return vectors[best], loads[best]
