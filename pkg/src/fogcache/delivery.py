"""Slot-by-slot delivery engine.

With ``delta_b < B`` the server stays silent for the first ``delta_b - 1``
slots, then at the end of every slot serves the F-APs whose deadline has
come (mid-slot method), and at slot ``B`` serves everyone still active
(final-slot method).  With ``delta_b == B`` it sends the plain synchronous
coded multicast once, at the end of slot ``B``.

The server keeps cache records (a :class:`SubfileLedger`) of what every
requester has already decoded.  Physical caches never change.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .encoding_sets import ActiveWindow, active_window, chi_range
from .model import (
    SAMPLED,
    Config,
    DecodeError,
    FeasibilityError,
    InvariantError,
    LoadReport,
    RequestSchedule,
    SubfileLedger,
    Transmission,
    enumerate_subsets,
    exact_sum,
    members,
    popcount,
)
from .placement import PlacementProfile, place_caches

log = logging.getLogger(__name__)


@dataclass
class DeliveryState:
    config: Config
    schedule: RequestSchedule
    placement: PlacementProfile
    ledger: SubfileLedger
    slot: int = 0
    window: ActiveWindow | None = None
    trace: list[Transmission] = field(default_factory=list)
    completion: dict[int, int] = field(default_factory=dict)
    # sampled-bit mode: what each F-AP knows of its demanded file
    reconstructed: dict[int, np.ndarray] = field(default_factory=dict)
    known: dict[int, np.ndarray] = field(default_factory=dict)
    pending: dict[int, int] = field(default_factory=dict)

    @property
    def sampled(self) -> bool:
        return self.config.mode == SAMPLED


def init_state(config: Config, schedule: RequestSchedule, placement: PlacementProfile) -> DeliveryState:
    schedule.validate(config)
    K = config.K
    entries = {}
    for k in range(1, K + 1):
        bit = 1 << (k - 1)
        others = [S for S in range(1 << K) if not S & bit]
        if placement.sampled:
            pieces = placement.subfile_bits(schedule.demand_of(k))
            empty = np.empty(0, dtype=np.int64)
            for S in others:
                entries[(k, S)] = pieces.get(S, empty)
        else:
            for S in others:
                entries[(k, S)] = placement.expected_size(S)
    ledger = SubfileLedger(entries, sampled=placement.sampled)
    state = DeliveryState(config, schedule, placement, ledger)
    for k in range(1, K + 1):
        state.pending[k] = sum(1 for S in ledger.keys_of(k) if ledger.size(k, S))
    if placement.sampled:
        for k in range(1, K + 1):
            n = schedule.demand_of(k)
            cached = placement.cache_mask(k, n)
            state.known[k] = cached.copy()
            state.reconstructed[k] = np.where(cached, placement.file_bits(n), 0).astype(np.uint8)
    return state


def _cache_values(state: DeliveryState, k: int, n: int, idx: np.ndarray) -> np.ndarray:
    """Read bits ``idx`` of file ``n`` out of F-AP ``k``'s own cache."""
    mask = state.placement.cache_mask(k, n)
    if not mask[idx].all():
        raise DecodeError(f"F-AP {k} lacks side information from file {n}")
    return state.placement.file_bits(n)[idx]


def _payload(state: DeliveryState, composition, length: int) -> np.ndarray:
    buf = np.zeros(int(length), dtype=np.uint8)
    for k, S in composition:
        idx = state.ledger.bits(k, S)
        if len(idx):
            buf[: len(idx)] ^= state.placement.file_bits(state.schedule.demand_of(k))[idx]
    return buf


def _emit(state: DeliveryState, s: int, chi: int, s1: int, s2: int,
          participants: int, seen: dict, base: int, index: int) -> Transmission:
    encoding_set = s1 | s2
    ledger = state.ledger
    composition = tuple((k, encoding_set & ~(1 << (k - 1))) for k in members(participants))
    sizes = tuple(ledger.size(k, S) for k, S in composition)
    if state.sampled:
        length = max(sizes, default=0)
    else:
        # all components share one subfile type, so every nonzero size is equal
        length = max(sizes, key=bool, default=0)
    tx = Transmission(
        slot=state.slot, s=s, chi=chi, s1=s1, s2=s2, active=state.window.active,
        participants=participants, composition=composition, component_bits=sizes,
        length_bits=length,
    )
    # identical content already multicast this slot (only possible with repeated demands)
    key = frozenset((state.schedule.demand_of(k), S) for (k, S), size in zip(composition, sizes) if size)
    if key and key in seen:
        tx.reuses = seen[key]
        tx.length_bits = 0
    else:
        if key:
            seen[key] = base + index
        if state.sampled:
            tx.payload = _payload(state, composition, tx.length_bits)
    tx.check()
    return tx


def skip_check(s1: int, s2: int, participants: int, ledger: SubfileLedger) -> bool:
    """True when the coded multicast for ``s1 | s2`` must not be sent.

    That is the case when nobody active benefits, or when any active
    requester's component is already on record as decoded, so sending would
    repeat a subfile.
    """
    if not participants:
        return True
    encoding_set = s1 | s2
    return any(ledger.is_recovered(k, encoding_set & ~(1 << (k - 1))) for k in members(participants))


def transmit_slot_async_mid(state: DeliveryState) -> list[Transmission]:
    """Serve the F-APs whose deadline is the current slot."""
    K = state.config.K
    window = state.window
    departing, active = window.departing, window.active
    others = state.config.full_mask & ~departing
    u = popcount(departing)
    out: list[Transmission] = []
    seen: dict = {}
    base = len(state.trace)
    for s in range(K, 0, -1):
        for chi in chi_range(s, u, K):
            for s1 in enumerate_subsets(departing, chi):
                for s2 in enumerate_subsets(others, s - chi):
                    participants = (s1 | s2) & active
                    if skip_check(s1, s2, participants, state.ledger):
                        for k in members(participants & departing):
                            if state.ledger.size(k, (s1 | s2) & ~(1 << (k - 1))):
                                raise InvariantError(
                                    f"skip at slot {state.slot} starves departing F-AP {k}")
                        out.append(Transmission(
                            slot=state.slot, s=s, chi=chi, s1=s1, s2=s2, active=active,
                            participants=participants, skipped=True))
                        continue
                    out.append(_emit(state, s, chi, s1, s2, participants, seen, base, len(out)))
    return out


def transmit_slot_async_final(state: DeliveryState) -> list[Transmission]:
    """Serve every F-AP still active at the last slot."""
    K = state.config.K
    active = state.window.active
    others = state.config.full_mask & ~active
    u = popcount(active)
    out: list[Transmission] = []
    seen: dict = {}
    base = len(state.trace)
    for s in range(K, 0, -1):
        for chi in chi_range(s, u, K):
            for s1 in enumerate_subsets(active, chi):
                for s2 in enumerate_subsets(others, s - chi):
                    out.append(_emit(state, s, chi, s1, s2, s1, seen, base, len(out)))
    return out


def transmit_sync(state: DeliveryState) -> list[Transmission]:
    """One coded multicast per nonempty encoding set, all at slot ``B``."""
    K = state.config.K
    full = state.config.full_mask
    out: list[Transmission] = []
    seen: dict = {}
    base = len(state.trace)
    for s in range(K, 0, -1):
        for S in enumerate_subsets(full, s):
            out.append(_emit(state, s, s, S, 0, S, seen, base, len(out)))
    return out


def decode_all(state: DeliveryState, transmissions: list[Transmission]) -> dict[int, list[int]]:
    """Let every participant decode its component of each transmission.

    Returns the subsets ``S`` recovered by each F-AP.  In sampled-bit mode the
    decoded bits are checked against the true file content.
    """
    base = len(state.trace)
    ledger = state.ledger
    recovered: dict[int, list[int]] = {}
    for tx in transmissions:
        if tx.skipped:
            continue
        source = tx if tx.reuses is None else transmissions[tx.reuses - base]
        for k, S in tx.composition:
            if ledger.is_recovered(k, S):
                continue
            recovered.setdefault(k, []).append(S)
            if not state.sampled or not ledger.size(k, S):
                continue
            acc = source.payload.copy()
            for j, Sj in tx.composition:
                if j == k:
                    continue
                idx = ledger.bits(j, Sj)
                if len(idx):
                    acc[: len(idx)] ^= _cache_values(state, k, state.schedule.demand_of(j), idx)
            own = ledger.bits(k, S)
            bits = acc[: len(own)]
            n = state.schedule.demand_of(k)
            if not np.array_equal(bits, state.placement.file_bits(n)[own]):
                raise DecodeError(f"F-AP {k} decoded wrong bits for subfile {S}")
            state.reconstructed[k][own] = bits
            state.known[k][own] = True
    return recovered


def update_records(state: DeliveryState, recovered: dict[int, list[int]]) -> None:
    ledger = state.ledger
    for k, subsets in recovered.items():
        for S in subsets:
            if ledger.size(k, S):
                state.pending[k] -= 1
            ledger.mark_recovered(k, S)
    b = state.slot
    for k in range(1, state.config.K + 1):
        if k not in state.completion and state.schedule.arrival_of(k) <= b and not state.pending[k]:
            state.completion[k] = b


def load_of(trace: list[Transmission], F: int, B: int) -> LoadReport:
    by_slot: list[list] = [[] for _ in range(B)]
    for tx in trace:
        by_slot[tx.slot - 1].append(tx.load_bits)
    per_slot = [exact_sum(lengths) for lengths in by_slot]
    return LoadReport(F=F, per_slot=per_slot, trace=list(trace))


def _check_feasible(state: DeliveryState) -> None:
    config, schedule = state.config, state.schedule
    for k in range(1, config.K + 1):
        deadline = schedule.arrival_of(k) + config.delta_b - 1
        done = state.completion.get(k)
        if done is None or done > deadline:
            raise FeasibilityError(f"F-AP {k} not served by slot {deadline} (completed: {done})")
        if state.sampled:
            n = schedule.demand_of(k)
            if not state.known[k].all() or not np.array_equal(
                    state.reconstructed[k], state.placement.file_bits(n)):
                raise FeasibilityError(f"F-AP {k} reconstructed a wrong copy of file {n}")


def simulate(config: Config, schedule: RequestSchedule,
             placement: PlacementProfile | None = None) -> tuple[DeliveryState, LoadReport]:
    """Run the delivery phase and return the final engine state with the report."""
    if placement is None:
        placement = place_caches(config)
    state = init_state(config, schedule, placement)
    B, delta_b = config.B, config.delta_b
    for b in range(1, B + 1):
        state.slot = b
        state.window = active_window(schedule, b, delta_b)
        if delta_b < B:
            if b <= delta_b - 1:
                continue
            txs = transmit_slot_async_mid(state) if b < B else transmit_slot_async_final(state)
        else:
            if b < B:
                continue
            txs = transmit_sync(state)
        update_records(state, decode_all(state, txs))
        state.trace.extend(txs)
        log.debug("slot %d: %d emissions", b, len(txs))
    _check_feasible(state)
    report = load_of(state.trace, config.F, B)
    report.completion = dict(state.completion)
    if placement.sampled and placement.lost_bits_per_cache:
        report.notes.append(
            f"MF/N not integral: {placement.lost_bits_per_cache} cache bits per F-AP unused")
    return state, report


def run_delivery(config: Config, schedule: RequestSchedule,
                 placement: PlacementProfile | None = None) -> LoadReport:
    """Run the whole delivery phase and return the fronthaul load with trace.

    Raises :class:`FeasibilityError` if any F-AP misses its deadline.
    """
    return simulate(config, schedule, placement)[1]


def normalized_load(config: Config, schedule: RequestSchedule) -> Fraction:
    return run_delivery(config, schedule).normalized
