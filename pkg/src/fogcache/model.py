"""Core domain types: configuration, subset masks, schedules, ledgers,
transmissions and load reports.

Subsets of F-APs are plain ``int`` bitmasks: F-AP ``k`` (1-based) owns bit
``k - 1``.  All iteration over masks is in ascending integer order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Any, Iterable, Sequence

import numpy as np

MAX_K = 16

EXPECTED = "expected"
SAMPLED = "sampled"
_MODE_ALIASES = {
    "expected": EXPECTED,
    "expected-size": EXPECTED,
    "sampled": SAMPLED,
    "sampled-bit": SAMPLED,
}


class ConfigError(ValueError):
    """Invalid configuration or input parameters."""


class FeasibilityError(RuntimeError):
    """An F-AP did not recover its file by its deadline."""


class DecodeError(RuntimeError):
    """A decoder lacked side information it should have had."""


class InvariantError(AssertionError):
    """An internal consistency check of the delivery engine failed."""


def as_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # 0.1 -> 1/10, not the binary expansion
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class Config:
    K: int
    N: int
    M: Fraction
    B: int
    delta_b: int
    F: int = 1 << 20
    T: float | None = None
    mode: str = EXPECTED
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "M", as_fraction(self.M))
        mode = _MODE_ALIASES.get(self.mode)
        if mode is None:
            raise ConfigError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        for name in ("K", "N", "B", "delta_b", "F", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not 1 <= self.K <= MAX_K:
            raise ConfigError(f"K must be in 1..{MAX_K}, got {self.K}")
        if self.N < self.K:
            raise ConfigError(f"need N >= K, got N={self.N}, K={self.K}")
        if not 0 < self.M < self.N:
            raise ConfigError(f"need 0 < M < N, got M={self.M}, N={self.N}")
        if self.B < 2:
            raise ConfigError(f"need B >= 2, got {self.B}")
        if not 1 <= self.delta_b <= self.B:
            raise ConfigError(f"need 1 <= delta_b <= B, got {self.delta_b}")
        if self.F < 1:
            raise ConfigError(f"F must be positive, got {self.F}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.T is None:
            object.__setattr__(self, "T", float(self.B))

    @property
    def q(self) -> Fraction:
        """Fraction of each file cached at each F-AP."""
        return self.M / self.N

    @property
    def slot_duration(self) -> float:
        return self.T / self.B

    @property
    def full_mask(self) -> int:
        return (1 << self.K) - 1

    def replace(self, **changes) -> Config:
        values = self.to_dict()
        values["M"] = self.M
        values.update(changes)
        return Config(**values)

    def to_dict(self) -> dict[str, Any]:
        M = int(self.M) if self.M.denominator == 1 else str(self.M)
        return {
            "K": self.K, "N": self.N, "M": M, "F": self.F, "B": self.B,
            "delta_b": self.delta_b, "T": self.T, "mode": self.mode,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Config:
        known = {"K", "N", "M", "F", "B", "delta_b", "T", "mode", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = {"K", "N", "M", "B", "delta_b"} - set(data)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> Config:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)


# -- subset masks -----------------------------------------------------------

def make_subset(indices: Iterable[int], K: int) -> int:
    """Build the mask of the given 1-based F-AP indices."""
    mask = 0
    for k in indices:
        if not 1 <= k <= K:
            raise ConfigError(f"F-AP index {k} outside 1..{K}")
        bit = 1 << (k - 1)
        if mask & bit:
            raise ConfigError(f"duplicate F-AP index {k}")
        mask |= bit
    return mask


@lru_cache(maxsize=1 << 16)
def members(mask: int) -> tuple[int, ...]:
    """1-based F-AP indices in ``mask``, ascending."""
    out = []
    k = 1
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


def popcount(mask: int) -> int:
    return mask.bit_count()


def format_subset(mask: int) -> str:
    return "{" + ",".join(str(k) for k in members(mask)) + "}"


def parse_subset(text: str, K: int = MAX_K) -> int:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise ValueError(f"not a subset literal: {text!r}")
    body = text[1:-1].strip()
    if not body:
        return 0
    return make_subset([int(x) for x in body.split(",")], K)


@lru_cache(maxsize=4096)
def _subsets_cached(ground: int, size: int) -> tuple[int, ...]:
    bits = [1 << (k - 1) for k in members(ground)]
    if size > len(bits) or size < 0:
        return ()
    return tuple(sorted(sum(c) for c in combinations(bits, size)))


def enumerate_subsets(ground: int, size: int) -> list[int]:
    """All subsets of ``ground`` with ``size`` members, ascending by mask value."""
    return list(_subsets_cached(ground, size))


# -- request schedules ------------------------------------------------------

@dataclass(frozen=True)
class RequestSchedule:
    """Arrival slot and demanded file of every F-AP (index 0 is F-AP 1)."""

    arrival: tuple[int, ...]
    demand: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "arrival", tuple(int(a) for a in self.arrival))
        object.__setattr__(self, "demand", tuple(int(d) for d in self.demand))
        if len(self.arrival) != len(self.demand):
            raise ConfigError("arrival and demand must cover the same F-APs")
        if not self.arrival:
            raise ConfigError("schedule needs at least one F-AP")

    @property
    def K(self) -> int:
        return len(self.arrival)

    def arrival_of(self, k: int) -> int:
        return self.arrival[k - 1]

    def demand_of(self, k: int) -> int:
        return self.demand[k - 1]

    def arrivals_in(self, b: int) -> int:
        """Mask of the F-APs whose requests arrive during slot ``b``."""
        mask = 0
        for i, a in enumerate(self.arrival):
            if a == b:
                mask |= 1 << i
        return mask

    def arrivals_between(self, lo: int, hi: int) -> int:
        mask = 0
        for i, a in enumerate(self.arrival):
            if lo <= a <= hi:
                mask |= 1 << i
        return mask

    def validate(self, config: Config) -> None:
        if self.K != config.K:
            raise ConfigError(f"schedule has {self.K} F-APs, config has {config.K}")
        for k, a in enumerate(self.arrival, 1):
            if not 1 <= a <= config.B:
                raise ConfigError(f"F-AP {k} arrives in slot {a}, outside 1..{config.B}")
        for k, d in enumerate(self.demand, 1):
            if not 1 <= d <= config.N:
                raise ConfigError(f"F-AP {k} demands file {d}, outside 1..{config.N}")

    @classmethod
    def from_slot_sets(cls, slot_sets: Sequence[Iterable[int]], demand: Sequence[int]) -> RequestSchedule:
        """Build from per-slot F-AP lists, ``slot_sets[b-1]`` being U_b."""
        arrival = [0] * len(demand)
        for b, fap_list in enumerate(slot_sets, 1):
            for k in fap_list:
                if arrival[k - 1]:
                    raise ConfigError(f"F-AP {k} arrives twice")
                arrival[k - 1] = b
        if 0 in arrival:
            raise ConfigError("every F-AP needs an arrival slot")
        return cls(tuple(arrival), tuple(demand))


def exact_sum(values: Iterable) -> Fraction | int:
    """Sum ints and Fractions exactly over one common denominator."""
    values = list(values)
    dens = {v.denominator for v in values if isinstance(v, Fraction)}
    if not dens:
        return sum(values)
    common = math.lcm(*dens)
    total = sum(v.numerator * (common // v.denominator) if isinstance(v, Fraction) else v * common
                for v in values)
    return Fraction(total, common)


# -- ledger -----------------------------------------------------------------

_ZERO = Fraction(0)
_EMPTY_BITS = np.empty(0, dtype=np.int64)

class SubfileLedger:
    """The server's record of what each requester still needs.

    Entries are keyed by ``(k, S)`` with ``k`` not in ``S``.  A value is the
    remaining size: a :class:`~fractions.Fraction` of bits in expected-size
    mode, or a sorted ``int64`` array of bit indices of file ``d_k`` in
    sampled-bit mode.  Entries only ever shrink, and do so all at once when
    the requester decodes the subfile.
    """

    def __init__(self, entries: dict[tuple[int, int], Any], sampled: bool):
        self._entries = entries
        self.sampled = sampled
        self.recovered: set[tuple[int, int]] = set()
        self.initial_size = {key: self._size(v) for key, v in entries.items()}

    def _size(self, value) -> Fraction | int:
        return len(value) if self.sampled else value

    def size(self, k: int, S: int) -> Fraction | int:
        value = self._entries[(k, S)]
        return len(value) if self.sampled else value

    def bits(self, k: int, S: int) -> np.ndarray:
        return self._entries[(k, S)]

    def is_recovered(self, k: int, S: int) -> bool:
        return (k, S) in self.recovered

    def mark_recovered(self, k: int, S: int) -> None:
        key = (k, S)
        if key in self.recovered:
            raise InvariantError(f"subfile {key} recovered twice")
        self.recovered.add(key)
        self._entries[key] = _EMPTY_BITS if self.sampled else _ZERO

    def total_remaining(self, k: int) -> Fraction | int:
        return sum((self._size(v) for (j, _), v in self._entries.items() if j == k), start=0)

    def keys_of(self, k: int) -> list[int]:
        return sorted(S for (j, S) in self._entries if j == k)

    def is_complete(self, k: int) -> bool:
        return all(self._size(v) == 0 for (j, _), v in self._entries.items() if j == k)

    def __len__(self) -> int:
        return len(self._entries)


# -- transmissions and reports ---------------------------------------------

@dataclass
class Transmission:
    """One coded-multicast emission (or a recorded skip) at the end of a slot.

    ``composition`` lists the XOR'ed subfiles ``(k, S)``; ``component_bits``
    holds each one's remaining size at emission time.  A transmission whose
    content duplicates an earlier one in the same slot has ``reuses`` set to
    that emission's trace index and costs nothing.
    """

    slot: int
    s: int
    chi: int
    s1: int
    s2: int
    active: int
    participants: int
    composition: tuple[tuple[int, int], ...] = ()
    component_bits: tuple = ()
    length_bits: Fraction | int = 0
    skipped: bool = False
    reuses: int | None = None
    payload: np.ndarray | None = field(default=None, repr=False)

    @property
    def encoding_set(self) -> int:
        return self.s1 | self.s2

    @property
    def contributors(self) -> int:
        """Mask of requesters whose component was nonempty at emission."""
        mask = 0
        for (k, _), size in zip(self.composition, self.component_bits):
            if size:
                mask |= 1 << (k - 1)
        return mask

    @property
    def load_bits(self) -> Fraction | int:
        return 0 if self.skipped or self.reuses is not None else self.length_bits

    def check(self) -> None:
        if self.s1 & self.s2:
            raise InvariantError(f"S1 and S2 overlap in {self}")
        if popcount(self.s1) + popcount(self.s2) != self.s:
            raise InvariantError(f"|S1|+|S2| != s in {self}")
        if self.participants & ~(self.s1 | self.s2):
            raise InvariantError(f"participants outside S1 u S2 in {self}")
        if self.reuses is None:
            length = self.length_bits
            if any(size is not length and size > length for size in self.component_bits):
                raise InvariantError(f"length {length} below a component in {self}")
            if length and not any(size is length or size == length for size in self.component_bits):
                raise InvariantError(f"length {length} matches no component in {self}")

    def to_row(self) -> str:
        comp = "-" if self.skipped else "+".join(f"{k}:{format_subset(S)}" for k, S in self.composition)
        return "\t".join([
            str(self.slot), str(self.s), str(self.chi), format_subset(self.s1),
            format_subset(self.s2), format_subset(self.active), comp, str(self.load_bits),
        ])


TRACE_HEADER = "slot\ts\tchi\tS1\tS2\tactive_set\tcomposition\tlength_bits"


@dataclass
class LoadReport:
    F: int
    per_slot: list
    trace: list[Transmission]
    completion: dict[int, int] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def total(self) -> Fraction | int:
        return exact_sum(self.per_slot)

    @property
    def normalized(self) -> Fraction:
        return Fraction(self.total) / self.F

    def trace_rows(self, slots: Iterable[int] | None = None) -> list[str]:
        wanted = None if slots is None else set(slots)
        return [t.to_row() for t in self.trace if wanted is None or t.slot in wanted]

    def summary(self) -> dict[str, Any]:
        norm = self.normalized
        return {
            "total_bits": str(self.total),
            "per_slot_bits": [str(x) for x in self.per_slot],
            "normalized_load": str(norm),
            "normalized_load_float": float(norm),
            "transmissions": sum(1 for t in self.trace if not t.skipped),
            "skips": sum(1 for t in self.trace if t.skipped),
            "completion_slot": {str(k): b for k, b in sorted(self.completion.items())},
            "notes": list(self.notes),
        }
