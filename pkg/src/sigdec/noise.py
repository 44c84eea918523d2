"""Phenomenological noise: per-round data-qubit and measurement flips.

Randomness is counter-based (Philox4x64-10) so that every trial owns a
private substream addressed by ``(master_seed, cell_index, trial_index)``
and every round of a trial is reproducible in isolation: the 256-bit
counter is ``(block, round, trial, cell)`` and the 128-bit key is derived
from the master seed.  Trials can therefore run in any order, split
across workers, or be re-run individually with bit-identical results.

Flips are sampled sparsely but exactly: the flip count is drawn by
inversion from a precomputed binomial threshold table (probabilities
quantized to 2**-64), then distinct positions are drawn by rejection.
``eps = 0`` and ``eps = 1`` consume no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import boundary

U64 = np.uint64
_MASK = (1 << 64) - 1

PHILOX_M0 = 0xD2E7470EE14C6C93
PHILOX_M1 = 0xCA5A826395121157
PHILOX_W0 = 0x9E3779B97F4A7C15
PHILOX_W1 = 0xBB67AE8584CAA73B


@dataclass(frozen=True)
class NoiseParams:
    eps_d: float
    eps_m: float

    def __post_init__(self):
        for name, p in (("eps_d", self.eps_d), ("eps_m", self.eps_m)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")


def master_key(master_seed: int) -> tuple[int, int]:
    """128-bit Philox key derived from a master seed."""
    k = np.random.SeedSequence(master_seed).generate_state(2, dtype=np.uint64)
    return int(k[0]), int(k[1])


def philox4x64(counter: tuple[int, int, int, int], key: tuple[int, int]) -> tuple[int, ...]:
    """One Philox4x64-10 block (pure-python ints; reference implementation)."""
    x0, x1, x2, x3 = (c & _MASK for c in counter)
    k0, k1 = key[0] & _MASK, key[1] & _MASK
    for _ in range(10):
        p0 = PHILOX_M0 * x0
        p1 = PHILOX_M1 * x2
        x0, x1, x2, x3 = (
            ((p1 >> 64) ^ x1 ^ k0) & _MASK,
            p1 & _MASK,
            ((p0 >> 64) ^ x3 ^ k1) & _MASK,
            p0 & _MASK,
        )
        k0 = (k0 + PHILOX_W0) & _MASK
        k1 = (k1 + PHILOX_W1) & _MASK
    return x0, x1, x2, x3


@lru_cache(maxsize=256)
def binomial_thresholds(n: int, p: float) -> np.ndarray:
    """uint64 inversion table for Binomial(n, p): k = #{j : t[j] <= u}.

    Only meaningful for 0 < p < 1; the p = 0 and p = 1 cases are handled
    by the samplers without consuming randomness.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("thresholds are defined for 0 < p < 1")
    pmf = np.empty(n + 1)
    pmf[0] = (1.0 - p) ** n
    ratio = p / (1.0 - p)
    for k in range(n):
        pmf[k + 1] = pmf[k] * (n - k) / (k + 1) * ratio
    cdf = np.minimum(np.cumsum(pmf), 1.0)
    top = (1 << 64) - 1
    return np.array(
        [min(int(x), top) for x in np.floor(cdf[:-1] * 2.0**64)], dtype=np.uint64
    )


_LEMIRE_REJECTS = {}  # n -> rejection threshold (2**64 % n)


def _lemire_threshold(n: int) -> int:
    t = _LEMIRE_REJECTS.get(n)
    if t is None:
        t = ((1 << 64) - n) % n
        _LEMIRE_REJECTS[n] = t
    return t


class RandomStream:
    """Counter-addressed random stream for one trial.

    Draw position advances as ``(round, draw)``; each draw is one uint64
    of Philox output.  ``sample_data_flips`` must be called before
    ``sample_meas_flips`` within a round; the latter closes the round.
    """

    def __init__(self, master_seed: int, trial_index: int = 0, cell_index: int = 0):
        self.master_seed = master_seed
        self.trial_index = trial_index
        self.cell_index = cell_index
        self.key = master_key(master_seed)
        self.round_index = 0
        self._draw = 0
        self._phase = 0  # 0: expecting data flips, 1: expecting measurement flips
        self._block_idx = -1
        self._block = (0, 0, 0, 0)

    def _next_u64(self) -> int:
        b, lane = divmod(self._draw, 4)
        if b != self._block_idx:
            self._block = philox4x64(
                (b, self.round_index, self.trial_index, self.cell_index), self.key
            )
            self._block_idx = b
        self._draw += 1
        return self._block[lane]

    def _advance_round(self):
        self.round_index += 1
        self._draw = 0
        self._phase = 0
        self._block_idx = -1

    def _bounded(self, n: int) -> int:
        """Exact uniform draw from [0, n) (Lemire multiply-shift with rejection)."""
        t = _lemire_threshold(n)
        while True:
            u = self._next_u64()
            m = u * n
            if (m & _MASK) >= t:
                return m >> 64

    def _flip_count(self, n: int, p: float) -> int:
        if p <= 0.0:
            return 0
        if p >= 1.0:
            return n
        table = binomial_thresholds(n, p)
        u = self._next_u64()
        return int(np.searchsorted(table, u, side="right"))

    def _flip_positions(self, n: int, p: float) -> list[int]:
        k = self._flip_count(n, p)
        if k >= n:
            return list(range(n))
        chosen: list[int] = []
        for _ in range(k):
            while True:
                idx = self._bounded(n)
                if idx not in chosen:
                    chosen.append(idx)
                    break
        return chosen


def sample_data_flips(d: int, eps_d: float, stream: RandomStream) -> np.ndarray:
    """One round of independent edge flips, as a chain."""
    if stream._phase != 0:
        raise RuntimeError("data flips must be drawn first in each round")
    stream._phase = 1
    flips = np.zeros(2 * d * d, dtype=bool)
    for idx in stream._flip_positions(2 * d * d, eps_d):
        flips[idx] = True
    return flips.reshape(2, d, d)


def sample_meas_flips(d: int, eps_m: float, stream: RandomStream) -> np.ndarray:
    """One round of independent measurement-outcome flips, as a syndrome."""
    if stream._phase != 1:
        raise RuntimeError("measurement flips are drawn after data flips")
    flips = np.zeros(d * d, dtype=bool)
    for idx in stream._flip_positions(d * d, eps_m):
        flips[idx] = True
    stream._advance_round()
    return flips.reshape(d, d)


def noisy_syndrome(true_error: np.ndarray, meas_flips: np.ndarray) -> np.ndarray:
    """Measured syndrome: boundary of the residual error, with readout flips."""
    return boundary(true_error) ^ meas_flips
