from fractions import Fraction

import pytest

from fogcache.baselines import (
    BaselineResult,
    baselines,
    exhaustive_worst_case,
    sync_closed_form,
    sync_simulated,
    uncoded_load,
)
from fogcache.model import Config, ConfigError, RequestSchedule


def test_uncoded_load():
    assert uncoded_load(4, 4, 2) == 2
    assert uncoded_load(3, 7, 6) == Fraction(3, 7)
    assert uncoded_load(10, 100, 10) == 9


def test_sync_closed_form():
    assert sync_closed_form(4, 4, 2) == Fraction(15, 16)
    assert sync_closed_form(1, 5, 2) == Fraction(3, 5)
    assert sync_closed_form(10, 100, 50) == Fraction(1023, 1024)


@pytest.mark.parametrize("K", range(1, 9))
@pytest.mark.parametrize("M", [1, 2, 3, Fraction(5, 2)])
def test_closed_form_matches_simulation(K, M):
    N = max(K, 4)
    cfg = Config(K=K, N=N, M=M, B=3, delta_b=1, F=999)
    sched = RequestSchedule(tuple((k % 3) + 1 for k in range(K)), tuple(range(1, K + 1)))
    assert sync_simulated(cfg, sched) == sync_closed_form(K, N, M)


def test_uncoded_dominates_sync_on_grid():
    for K in range(2, 9):
        for N in range(K, 13):
            for M in range(1, N):
                assert uncoded_load(K, N, M) >= sync_closed_form(K, N, M)


def test_baseline_bundle():
    cfg = Config(K=4, N=4, M=2, B=4, delta_b=2, F=16)
    results = baselines(cfg, RequestSchedule((1, 2, 3, 4), (1, 2, 3, 4)))
    assert [r.scheme for r in results] == ["uncoded", "sync-closed-form", "sync-simulated"]
    assert results[2].load == Fraction(15, 16)
    with pytest.raises(ValueError):
        BaselineResult("uncoded", Fraction(-1))


def test_exhaustive_k1():
    cfg = Config(K=1, N=3, M=1, B=2, delta_b=1, F=30)
    demands, load = exhaustive_worst_case(cfg, RequestSchedule((1,), (1,)))
    assert load == Fraction(2, 3)
    assert demands == (1,)


def test_exhaustive_equal_demands_cheaper():
    cfg = Config(K=2, N=2, M=1, B=2, delta_b=2, F=16)
    sched = RequestSchedule((1, 2), (1, 2))
    demands, load = exhaustive_worst_case(cfg, sched)
    assert load == Fraction(3, 4)
    assert len(set(demands)) == 2
    from fogcache.delivery import run_delivery
    assert run_delivery(cfg, RequestSchedule((1, 2), (2, 2))).normalized < load


def test_exhaustive_dominates_specific_vectors():
    cfg = Config(K=3, N=3, M=1, B=3, delta_b=2, F=27)
    sched = RequestSchedule((1, 2, 3), (1, 2, 3))
    _, worst = exhaustive_worst_case(cfg, sched)
    from fogcache.delivery import run_delivery
    for d in [(1, 1, 1), (1, 2, 1), (3, 2, 1)]:
        assert run_delivery(cfg, RequestSchedule(sched.arrival, d)).normalized <= worst


def test_exhaustive_refuses_large():
    cfg = Config(K=10, N=100, M=10, B=5, delta_b=2)
    with pytest.raises(ConfigError, match="limit"):
        exhaustive_worst_case(cfg, RequestSchedule((1,) * 10, tuple(range(1, 11))))
    with pytest.raises(ConfigError):
        exhaustive_worst_case(Config(K=2, N=2, M=1, B=2, delta_b=1, mode="sampled"),
                              RequestSchedule((1, 2), (1, 2)))
