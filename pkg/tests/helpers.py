"""Independent trace checkers shared by the property and acceptance tests.

They only read the finished trace and the schedule; none of them calls into
the delivery engine.
"""

from fractions import Fraction
from itertools import product

from fogcache.encoding_sets import partition_encoding_set
from fogcache.model import RequestSchedule, members


def departing_at(schedule: RequestSchedule, b: int, delta_b: int) -> int:
    if b < delta_b:
        return 0
    return schedule.arrivals_in(b - delta_b + 1)


def at_most_once_violations(trace) -> list:
    seen = {}
    bad = []
    for i, tx in enumerate(trace):
        if tx.skipped or tx.reuses is not None:
            continue
        for key, size in zip(tx.composition, tx.component_bits):
            if not size:
                continue
            if key in seen:
                bad.append((key, seen[key], i))
            seen[key] = i
    return bad


def skip_safety_violations(trace, schedule: RequestSchedule, delta_b: int) -> list:
    """Every skipped mid-slot set must already have served its departing
    participants in an earlier slot."""
    delivered = set()
    bad = []
    current = None
    pending = set()
    for tx in trace:
        if tx.slot != current:
            delivered |= pending
            pending = set()
            current = tx.slot
        if tx.skipped:
            T = tx.s1 | tx.s2
            for k in members(tx.participants & departing_at(schedule, tx.slot, delta_b)):
                if (k, T & ~(1 << (k - 1))) not in delivered:
                    bad.append((tx.slot, k, T))
            continue
        for key, size in zip(tx.composition, tx.component_bits):
            if size:
                pending.add(key)
    return bad


def partition_mismatches(trace, schedule: RequestSchedule, delta_b: int, K: int) -> list:
    by_set: dict[int, list[int]] = {}
    for tx in trace:
        if tx.skipped or not tx.load_bits:
            continue
        by_set.setdefault(tx.s1 | tx.s2, []).append(tx.contributors)
    bad = []
    for S in range(1, 1 << K):
        want = sorted(partition_encoding_set(S, schedule, delta_b))
        got = sorted(by_set.get(S, []))
        if want != got:
            bad.append((S, want, got))
    return bad


def all_schedules(K: int, B: int):
    for arrival in product(range(1, B + 1), repeat=K):
        yield RequestSchedule(arrival, tuple(range(1, K + 1)))


def golden_row_load(rows: list[str]) -> Fraction:
    """Sum of the length column of golden-table rows."""
    return sum((Fraction(r.split("\t")[-1]) for r in rows), Fraction(0))
