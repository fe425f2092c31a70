from fractions import Fraction

import numpy as np
import pytest

from fogcache import delivery
from fogcache.delivery import (
    decode_all,
    init_state,
    load_of,
    run_delivery,
    simulate,
    skip_check,
    transmit_slot_async_final,
    transmit_slot_async_mid,
    transmit_sync,
    update_records,
)
from fogcache.encoding_sets import active_window
from fogcache.model import Config, RequestSchedule, make_subset
from fogcache.placement import place_caches

from helpers import at_most_once_violations, partition_mismatches, skip_safety_violations


def S(*ks):
    return make_subset(ks, 4)


EX1_CFG = Config(K=4, N=4, M=2, B=4, delta_b=2, F=16, T=4.0)
EX1 = RequestSchedule((1, 2, 3, 4), (1, 2, 3, 4))


def _stepper(config=EX1_CFG, schedule=EX1):
    """Drive the engine one slot at a time."""
    state = init_state(config, schedule, place_caches(config))

    def step(b):
        state.slot = b
        state.window = active_window(schedule, b, config.delta_b)
        if b == config.B:
            txs = transmit_slot_async_final(state)
        else:
            txs = transmit_slot_async_mid(state)
        update_records(state, decode_all(state, txs))
        state.trace.extend(txs)
        return txs

    return state, step


def _find(txs, s1, s2):
    [tx] = [t for t in txs if t.s1 == s1 and t.s2 == s2]
    return tx


def test_slot2_single_component_row():
    state, step = _stepper()
    txs = step(2)
    tx = _find(txs, S(1), S(3, 4))
    assert tx.participants == S(1)
    assert tx.composition == ((1, S(3, 4)),)
    assert tx.length_bits == 1


def test_slot2_records_update():
    state, step = _stepper()
    step(2)
    assert state.ledger.size(2, S(1, 3, 4)) == 0
    assert state.ledger.size(1, 0) == 0
    assert state.ledger.size(3, S(1, 2, 4)) == 1


def test_slot3_skip_and_emit():
    state, step = _stepper()
    step(2)
    txs = step(3)
    assert _find(txs, S(2), S(1, 3, 4)).skipped
    tx = _find(txs, S(2), S(3, 4))
    assert not tx.skipped
    assert tx.composition == ((2, S(3, 4)), (3, S(2, 4)))
    assert state.ledger.size(3, S(2, 4)) == 0


def test_final_slot_rows():
    state, step = _stepper()
    step(2)
    step(3)
    txs = step(4)
    tx = _find(txs, S(3, 4), S(2))
    assert tx.composition == ((3, S(2, 4)), (4, S(2, 3)))
    assert tx.component_bits == (0, 1)
    assert tx.length_bits == 1
    assert _find(txs, S(3), S(2)).length_bits == 0
    tx = _find(txs, S(3, 4), S(1, 2))
    assert tx.composition == ((3, S(1, 2, 4)), (4, S(1, 2, 3)))


def test_silent_slot_leaves_ledger():
    state, _ = _stepper()
    before = {key: state.ledger.size(*key) for key in [(1, 0), (2, S(1)), (4, S(1, 2, 3))]}
    state.slot = 1
    state.window = active_window(EX1, 1, 2)
    update_records(state, decode_all(state, []))
    assert {key: state.ledger.size(*key) for key in before} == before


def test_skip_check():
    state, step = _stepper()
    step(2)
    ledger = state.ledger
    assert skip_check(S(2), S(1, 3, 4), S(2, 3), ledger)
    assert not skip_check(S(2), S(3, 4), S(2, 3), ledger)
    assert skip_check(S(2), S(3), 0, ledger)


def test_example1_loads():
    # golden slots 2-4: 8 + 4 + 11 rows carry content, each subfile is F/16
    assert run_delivery(EX1_CFG, EX1).normalized == Fraction(23, 16)
    # all 15 nonempty encoding sets, one F/16 multicast each
    assert run_delivery(EX1_CFG.replace(delta_b=4), EX1).normalized == Fraction(15, 16)


def test_sync_k1():
    cfg = Config(K=1, N=3, M=1, B=2, delta_b=2, F=9)
    report = run_delivery(cfg, RequestSchedule((2,), (3,)))
    assert len(report.trace) == 1
    assert report.normalized == Fraction(2, 3)


def test_sync_small_cache_close_to_uncoded():
    cfg = Config(K=3, N=100, M=1, B=2, delta_b=2, F=100)
    load = run_delivery(cfg, RequestSchedule((1, 2, 2), (1, 2, 3))).normalized
    assert 0.95 * 3 * 0.99 < load < 3 * 0.99


def test_sync_trace_one_per_set():
    cfg = EX1_CFG.replace(delta_b=4)
    report = run_delivery(cfg, EX1)
    assert sorted(tx.s1 | tx.s2 for tx in report.trace) == list(range(1, 16))
    assert all(tx.slot == 4 for tx in report.trace)


def test_load_of_empty():
    report = load_of([], 16, 4)
    assert report.total == 0 and report.normalized == 0


def test_all_arrive_first_slot_served_at_delta_b():
    cfg = Config(K=4, N=5, M=2, B=5, delta_b=3, F=100)
    report = run_delivery(cfg, RequestSchedule((1, 1, 1, 1), (1, 2, 3, 4)))
    assert set(report.completion.values()) == {3}
    assert report.per_slot[3:] == [0, 0]
    assert report.normalized == run_delivery(cfg.replace(delta_b=5), RequestSchedule((1, 1, 1, 1), (1, 2, 3, 4))).normalized


def test_repeated_demands_dedup():
    cfg = Config(K=2, N=2, M=1, B=2, delta_b=2, F=16)
    same = run_delivery(cfg, RequestSchedule((1, 2), (1, 1)))
    distinct = run_delivery(cfg, RequestSchedule((1, 2), (1, 2)))
    assert same.normalized < distinct.normalized
    assert same.normalized == Fraction(1, 2)
    reused = [tx for tx in same.trace if tx.reuses is not None]
    assert len(reused) == 1 and reused[0].load_bits == 0


def _brute_subfile(placement, n, T, K):
    """Bits of file n cached at exactly the F-APs in T, by direct mask logic."""
    keep = np.ones(placement.config.F, dtype=bool)
    for k in range(1, K + 1):
        cached = placement.cache_mask(k, n)
        keep &= cached if T >> (k - 1) & 1 else ~cached
    return np.flatnonzero(keep)


@pytest.mark.parametrize("seed", range(6))
def test_sampled_bit_exact_recovery(seed):
    rng = np.random.default_rng(seed)
    K, B = 3, 3
    cfg = Config(K=K, N=5, M=2, B=B, delta_b=int(rng.integers(1, B + 1)), F=2048,
                 mode="sampled", seed=seed)
    sched = RequestSchedule(tuple(rng.integers(1, B + 1, K)), tuple(rng.integers(1, 6, K)))
    state, report = simulate(cfg, sched)
    placement = state.placement
    for k in range(1, K + 1):
        assert np.array_equal(state.reconstructed[k], placement.file_bits(sched.demand_of(k)))
    # every payload is the zero-padded XOR of the true subfile bits
    recovered = set()
    for tx in report.trace:
        if tx.skipped or tx.reuses is not None:
            continue
        want = np.zeros(int(tx.length_bits), dtype=np.uint8)
        for (j, T), size in zip(tx.composition, tx.component_bits):
            if (j, T) in recovered:
                assert size == 0
                continue
            n = sched.demand_of(j)
            idx = _brute_subfile(placement, n, T, K)
            assert size == len(idx)
            want[: len(idx)] ^= placement.file_bits(n)[idx]
        assert np.array_equal(tx.payload, want)
        recovered |= {key for key in tx.composition}


def test_engine_properties_on_example():
    report = run_delivery(EX1_CFG, EX1)
    assert at_most_once_violations(report.trace) == []
    assert skip_safety_violations(report.trace, EX1, 2) == []
    assert partition_mismatches(report.trace, EX1, 2, 4) == []


def test_deterministic_trace():
    cfg = Config(K=4, N=6, M=2, B=3, delta_b=2, F=4096, mode="sampled", seed=5)
    sched = RequestSchedule((1, 3, 2, 2), (6, 1, 2, 2))
    a, b = run_delivery(cfg, sched), run_delivery(cfg, sched)
    assert a.trace_rows() == b.trace_rows()
    for x, y in zip(a.trace, b.trace):
        assert (x.payload is None and y.payload is None) or np.array_equal(x.payload, y.payload)


def test_broken_skip_rule_is_caught(monkeypatch):
    # never skipping resends delivered subfiles
    monkeypatch.setattr(delivery, "skip_check", lambda s1, s2, p, ledger: not p)
    report = run_delivery(EX1_CFG, EX1)
    assert report.normalized > Fraction(23, 16)
