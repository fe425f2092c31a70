"""Decentralized placement: every F-AP independently caches a fixed-size
uniformly random subset of the bits of every file.

Each file then splits into ``2**K`` subfiles indexed by the exact set of
F-APs holding those bits.  In expected-size mode only the per-bit caching
probability ``q = M/N`` is kept and subfile sizes are their exact rational
expectations.
"""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from typing import IO, Iterable

import numpy as np

from .model import EXPECTED, SAMPLED, Config, ConfigError, popcount

# stream tag for file contents; cache streams use tags 1..K
_FILE_STREAM = 0


class PlacementProfile:
    """Cache contents of all F-APs.

    Sampled-bit caches are generated lazily per ``(k, n)`` from an independent
    stream keyed on ``(seed, k, n)``, so asking for one file never perturbs
    another and the result does not depend on access order.
    """

    def __init__(self, config: Config):
        self.config = config
        self.mode = config.mode
        self.q = config.q
        self.bits_per_file = math.floor(config.M * config.F / config.N)
        self._cache_masks: dict[tuple[int, int], np.ndarray] = {}
        self._patterns: dict[int, np.ndarray] = {}
        self._files: dict[int, np.ndarray] = {}
        q, K = self.q, config.K
        self._type_size = [config.F * q**t * (1 - q) ** (K - t) for t in range(K + 1)]

    @property
    def sampled(self) -> bool:
        return self.mode == SAMPLED

    @property
    def lost_bits_per_cache(self) -> Fraction:
        """Cache budget left unused because ``MF/N`` was rounded down."""
        return self.config.M * self.config.F - self.config.N * self.bits_per_file

    def _check_file(self, n: int) -> None:
        if not 1 <= n <= self.config.N:
            raise ConfigError(f"file index {n} outside 1..{self.config.N}")

    def cache_mask(self, k: int, n: int) -> np.ndarray:
        """Boolean array over the ``F`` bits of file ``n``: cached at F-AP ``k``."""
        if not self.sampled:
            raise ConfigError("cache masks exist only in sampled-bit mode")
        self._check_file(n)
        key = (k, n)
        mask = self._cache_masks.get(key)
        if mask is None:
            rng = np.random.default_rng([self.config.seed, k, n])
            idx = rng.choice(self.config.F, size=self.bits_per_file, replace=False)
            mask = np.zeros(self.config.F, dtype=bool)
            mask[idx] = True
            self._cache_masks[key] = mask
        return mask

    def cached_bits(self, k: int, n: int) -> np.ndarray:
        return np.flatnonzero(self.cache_mask(k, n))

    def pattern(self, n: int) -> np.ndarray:
        """For each bit of file ``n``, the mask of F-APs caching it."""
        pat = self._patterns.get(n)
        if pat is None:
            pat = np.zeros(self.config.F, dtype=np.uint32)
            for k in range(1, self.config.K + 1):
                pat |= self.cache_mask(k, n).astype(np.uint32) << np.uint32(k - 1)
            self._patterns[n] = pat
        return pat

    def file_bits(self, n: int) -> np.ndarray:
        """Content of file ``n`` as a 0/1 ``uint8`` array (sampled-bit mode)."""
        self._check_file(n)
        bits = self._files.get(n)
        if bits is None:
            rng = np.random.default_rng([self.config.seed, _FILE_STREAM, n])
            bits = rng.integers(0, 2, size=self.config.F, dtype=np.uint8)
            self._files[n] = bits
        return bits

    def subfile_bits(self, n: int) -> dict[int, np.ndarray]:
        """Sorted bit indices of every nonempty subfile of file ``n``."""
        pat = self.pattern(n)
        order = np.argsort(pat, kind="stable")
        counts = np.bincount(pat, minlength=1 << self.config.K)
        pieces = np.split(order, np.cumsum(counts)[:-1])
        return {S: piece.astype(np.int64) for S, piece in enumerate(pieces) if len(piece)}

    def expected_size(self, S: int) -> Fraction:
        return self._type_size[popcount(S)]


def place_caches(config: Config) -> PlacementProfile:
    """Run the placement phase for ``config`` (deterministic given its seed)."""
    return PlacementProfile(config)


def type_of(S: int) -> int:
    return popcount(S)


def subfile_sizes(profile: PlacementProfile, n: int) -> dict[int, Fraction | int]:
    """Size in bits of ``W_{n,S}`` for every ``S`` in ``0 .. 2**K - 1``.

    Expected-size mode returns ``F q^|S| (1-q)^(K-|S|)`` exactly; sampled-bit
    mode counts the realized bits.  Either way the sizes sum to ``F``.
    """
    profile._check_file(n)
    full = 1 << profile.config.K
    if profile.mode == EXPECTED:
        return {S: profile.expected_size(S) for S in range(full)}
    counts = np.bincount(profile.pattern(n), minlength=full)
    return {S: int(c) for S, c in enumerate(counts)}


def dump_subfile_sizes(profile: PlacementProfile, files: Iterable[int], fh: IO[str]) -> None:
    """Write ``file,subset_mask,bits`` CSV rows for the given files."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["file", "subset_mask", "bits"])
    for n in files:
        for S, size in subfile_sizes(profile, n).items():
            writer.writerow([n, S, str(size)])
