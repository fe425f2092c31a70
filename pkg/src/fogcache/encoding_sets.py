"""Encoding-set machinery: collapsing onto the active F-APs, active windows,
the admissible range of |S1|, and the chronological partition of an
encoding set into delay-feasible pieces.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import ConfigError, RequestSchedule, members


def collapse(S: int, active: int) -> int:
    """Requesters of ``S`` that a coded multicast for ``S`` can serve now."""
    return S & active


@dataclass(frozen=True)
class ActiveWindow:
    slot: int
    active: int
    departing: int


def active_window(schedule: RequestSchedule, b: int, delta_b: int) -> ActiveWindow:
    """Active F-APs during slot ``b`` and those whose deadline is ``b``."""
    first = max(1, b - delta_b + 1)
    active = schedule.arrivals_between(first, b)
    departing = schedule.arrivals_in(b - delta_b + 1) if b >= delta_b else 0
    return ActiveWindow(b, active, departing)


@dataclass(frozen=True)
class ActiveInterval:
    beta: int
    gamma: int


def active_interval(S: int, schedule: RequestSchedule) -> ActiveInterval:
    if not S:
        raise ValueError("active interval of an empty encoding set")
    slots = [schedule.arrival_of(k) for k in members(S)]
    return ActiveInterval(min(slots) - 1, max(slots))


def partition_encoding_set(S: int, schedule: RequestSchedule, delta_b: int) -> list[int]:
    """Split ``S`` into pieces whose arrivals span at most ``delta_b`` slots.

    Windows are opened greedily at the earliest still-unassigned arrival and
    the pieces come out in chronological order.
    """
    if not S:
        raise ValueError("cannot partition an empty encoding set")
    if delta_b < 1:
        raise ConfigError("delta_b must be at least 1")
    interval = active_interval(S, schedule)
    beta, gamma = interval.beta, interval.gamma
    pieces = []
    remaining = S
    while remaining:
        while not schedule.arrivals_in(beta + 1) & remaining:
            beta += 1
        if gamma - beta >= delta_b:
            piece = remaining & schedule.arrivals_between(beta + 1, beta + delta_b)
            beta += delta_b
        else:
            piece = remaining & schedule.arrivals_between(beta + 1, gamma)
        pieces.append(piece)
        remaining &= ~piece
    return pieces


def chi_range(s: int, u: int, K: int) -> range:
    """Admissible sizes of the part of an ``s``-set drawn from ``u`` departing
    F-APs; empty when no such split exists."""
    return range(max(1, s + u - K), min(s, u) + 1)
