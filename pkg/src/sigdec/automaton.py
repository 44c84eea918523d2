"""The synchronous signal-exchange update rule on the d x d torus.

Per site, the decoder memory is one defect bit, sixteen signal bits (two
signal types, forward and anti nature, four travel directions) and eight
stack counters.  One iteration runs five synchronous phases:

  0. load the fresh measurement into the defect bits;
  1. match adjacent defect pairs by a mutual-handshake Pauli correction;
  2. emit type-1 forward signals from defects (stack increment coupled to
     every emission), then propagate them one site;
  3. emit type-2 forward signals from defects (all four directions) and
     from type-1 signals (orthogonally), then propagate;
  4. pull each defect one site toward the source of the highest-priority
     forward signal present at its site (signals are not consumed);
  5. turn stack units into anti-signals where no defect (type 2: nor any
     type-1 signal) is present, then run three propagate+recombine
     sub-steps; anti-signals travel at speed 3 and erase the matching
     forward signal on contact.

Emissions are all-or-nothing (bit set + stack increment, suppressed if
either is impossible), which keeps the signal charges
``Q_k = #forward_k - sum(stack_k) - #anti_k`` exactly zero, row/column
resolved, from the zero configuration.

Arrays may carry leading batch axes; a batch of grids evolves in lockstep
with identical semantics to independent single grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import H, V, empty_chain

N, E, S, W = 0, 1, 2, 3
DIRECTIONS = (N, E, S, W)
DIR_NAMES = ("N", "E", "S", "W")
DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))

# fwd1 travelling along dir sources fwd2 in the two orthogonal directions
_FWD2_SOURCES = {N: (E, W), S: (E, W), E: (N, S), W: (N, S)}

DEFAULT_MATCHING_PRIORITY = (E, N, W, S)
# All fwd1 channels outrank fwd2; the fwd2 direction order N,E,W,S realizes
# an attraction basin asymmetric enough that two defects never mirror-chase
# each other around the torus (exhaustively checked in the pairing tests).
DEFAULT_ATTRACTION_PRIORITY = (
    (1, N), (1, E), (1, S), (1, W), (2, N), (2, E), (2, W), (2, S),
)


def opposite(direction: int) -> int:
    return (direction + 2) % 4


def rotate90(direction: int) -> int:
    return (direction + 1) % 4


@dataclass(frozen=True)
class RuleParams:
    """Rule configuration: lattice size, stack bound, tie-break priorities."""

    d: int
    stack_bound: int | None = None  # None = unbounded
    attraction_priority: tuple = DEFAULT_ATTRACTION_PRIORITY
    matching_priority: tuple = DEFAULT_MATCHING_PRIORITY

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("lattice size must be at least 3")
        if self.stack_bound is not None and self.stack_bound < 1:
            raise ValueError("stack bound must be None or >= 1")
        if sorted(self.matching_priority) != sorted(DIRECTIONS):
            raise ValueError("matching_priority must list each direction once")
        want = sorted((k, dd) for k in (1, 2) for dd in DIRECTIONS)
        if sorted(self.attraction_priority) != want:
            raise ValueError("attraction_priority must list all 8 (type, direction) pairs once")

    @property
    def effective_bound(self) -> int:
        # unbounded stacks never exceed d from the zero configuration (a
        # channel's own wavefront wraps and blocks the emission site)
        return self.stack_bound if self.stack_bound is not None else np.iinfo(np.int16).max


def memory_bits(params: RuleParams) -> int:
    """Per-site storage of this layout: defect + 16 signal bits + 8 counters."""
    bound = params.stack_bound if params.stack_bound is not None else params.d
    return 1 + 16 + 8 * math.ceil(math.log2(bound + 1))


@dataclass
class ChargeReport:
    """Signal charges; per_line[(type, dir)] resolves rows (E/W) or columns (N/S)."""

    q1: int
    q2: int
    per_line: dict = field(default_factory=dict)

    def max_line_deviation(self) -> int:
        return max((int(np.abs(v).max()) for v in self.per_line.values()), default=0)


def _roll(a: np.ndarray, dr: int, dc: int) -> np.ndarray:
    return np.roll(a, (dr, dc), axis=(-2, -1))


class AutomatonGrid:
    """Decoder state for one grid (or a lock-step batch of grids).

    Signal arrays are indexed channel-first: ``fwd1[dir][..., r, c]``.
    """

    def __init__(self, params: RuleParams, batch_shape: tuple = ()):
        self.params = params
        self.batch_shape = tuple(batch_shape)
        d = params.d
        shape = (*self.batch_shape, d, d)
        self.defect = np.zeros(shape, dtype=bool)
        self.fwd1 = np.zeros((4, *shape), dtype=bool)
        self.fwd2 = np.zeros((4, *shape), dtype=bool)
        self.anti1 = np.zeros((4, *shape), dtype=bool)
        self.anti2 = np.zeros((4, *shape), dtype=bool)
        self.stack1 = np.zeros((4, *shape), dtype=np.int16)
        self.stack2 = np.zeros((4, *shape), dtype=np.int16)

    @property
    def d(self) -> int:
        return self.params.d

    def copy(self) -> "AutomatonGrid":
        g = AutomatonGrid.__new__(AutomatonGrid)
        g.params = self.params
        g.batch_shape = self.batch_shape
        for name in ("defect", "fwd1", "fwd2", "anti1", "anti2", "stack1", "stack2"):
            setattr(g, name, getattr(self, name).copy())
        return g

    def is_zero(self) -> bool:
        return bool(self.zero_mask().all())

    def zero_mask(self) -> np.ndarray:
        """Per-batch-element flag: decoder memory entirely zero."""
        active = self.defect.any(axis=(-2, -1))
        for arr in (self.fwd1, self.fwd2, self.anti1, self.anti2):
            active = active | arr.any(axis=(0, -2, -1))
        for arr in (self.stack1, self.stack2):
            active = active | (arr != 0).any(axis=(0, -2, -1))
        return ~active

    # -- iteration phases -------------------------------------------------

    def iterate(self, measured: np.ndarray) -> np.ndarray:
        """Run one full iteration; returns the applied Pauli correction chain."""
        d = self.d
        if measured.shape != (*self.batch_shape, d, d):
            raise ValueError(
                f"syndrome shape {measured.shape} does not match grid {(*self.batch_shape, d, d)}"
            )
        self.defect[...] = measured
        correction = self.step_match()
        self.step_signals()
        correction ^= self.step_attract()
        self.step_cleanup()
        return correction

    def step_match(self) -> np.ndarray:
        """Mutual-handshake matching of adjacent defects; clears matched pairs."""
        defect = self.defect
        correction = empty_chain(self.d, self.batch_shape)
        sel = np.zeros((4, *defect.shape), dtype=bool)
        remaining = defect.copy()
        for dd in self.params.matching_priority:
            dr, dc = DELTAS[dd]
            neighbor = _roll(defect, -dr, -dc)
            sel[dd] = remaining & neighbor
            remaining &= ~sel[dd]
        fire = np.zeros_like(sel)
        for dd in DIRECTIONS:
            dr, dc = DELTAS[dd]
            fire[dd] = sel[dd] & _roll(sel[opposite(dd)], -dr, -dc)
        correction[..., H, :, :] ^= fire[E]
        correction[..., V, :, :] ^= fire[S]
        self.defect = defect & ~(fire[N] | fire[E] | fire[S] | fire[W])
        return correction

    def step_signals(self):
        """Emit and propagate forward signals (type 1 then type 2)."""
        bound = self.params.effective_bound
        for dd in DIRECTIONS:
            can = self.defect & ~self.fwd1[dd] & (self.stack1[dd] < bound)
            self.fwd1[dd] |= can
            self.stack1[dd] += can
        for dd in DIRECTIONS:
            self.fwd1[dd] = _roll(self.fwd1[dd], *DELTAS[dd])
        for dd in DIRECTIONS:
            a, b = _FWD2_SOURCES[dd]
            want = self.defect | self.fwd1[a] | self.fwd1[b]
            can = want & ~self.fwd2[dd] & (self.stack2[dd] < bound)
            self.fwd2[dd] |= can
            self.stack2[dd] += can
        for dd in DIRECTIONS:
            self.fwd2[dd] = _roll(self.fwd2[dd], *DELTAS[dd])

    def step_attract(self) -> np.ndarray:
        """Move each defect toward its highest-priority incident forward signal.

        Moves are resolved from the pre-step state and applied as XOR
        toggles, so defects meeting on a site annihilate.  The consumed
        signal keeps propagating (erasure happens only by recombination).
        """
        correction = empty_chain(self.d, self.batch_shape)
        fwd = {1: self.fwd1, 2: self.fwd2}
        remaining = self.defect.copy()
        moves = []
        for k, dd in self.params.attraction_priority:
            m = remaining & fwd[k][dd]
            remaining &= ~m
            moves.append((dd, m))
        for dd, m in moves:
            if not m.any():
                continue
            mu = opposite(dd)  # move toward the signal source
            dr, dc = DELTAS[mu]
            if mu == E:
                correction[..., H, :, :] ^= m
            elif mu == W:
                correction[..., H, :, :] ^= _roll(m, 0, -1)
            elif mu == S:
                correction[..., V, :, :] ^= m
            else:
                correction[..., V, :, :] ^= _roll(m, -1, 0)
            self.defect = self.defect ^ m ^ _roll(m, dr, dc)
        return correction

    def step_cleanup(self):
        """Emit anti-signals from stacks, then 3 x (propagate + recombine)."""
        quiet = ~self.defect
        for dd in DIRECTIONS:
            can = quiet & (self.stack1[dd] > 0) & ~self.anti1[dd]
            self.stack1[dd] -= can
            self.anti1[dd] |= can
        no_fwd1 = ~(self.fwd1[N] | self.fwd1[E] | self.fwd1[S] | self.fwd1[W])
        for dd in DIRECTIONS:
            can = quiet & no_fwd1 & (self.stack2[dd] > 0) & ~self.anti2[dd]
            self.stack2[dd] -= can
            self.anti2[dd] |= can
        self._recombine()
        for _ in range(3):
            for dd in DIRECTIONS:
                self.anti1[dd] = _roll(self.anti1[dd], *DELTAS[dd])
                self.anti2[dd] = _roll(self.anti2[dd], *DELTAS[dd])
            self._recombine()
        assert (self.stack1 >= 0).all() and (self.stack2 >= 0).all()

    def _recombine(self):
        for fwd, anti in ((self.fwd1, self.anti1), (self.fwd2, self.anti2)):
            for dd in DIRECTIONS:
                both = fwd[dd] & anti[dd]
                fwd[dd] &= ~both
                anti[dd] &= ~both

    # -- diagnostics -------------------------------------------------------

    def charges(self) -> ChargeReport:
        """Conserved signal charges, globally and per row/column line."""
        per_line = {}
        totals = {}
        for k, fwd, stack, anti in (
            (1, self.fwd1, self.stack1, self.anti1),
            (2, self.fwd2, self.stack2, self.anti2),
        ):
            totals[k] = int(fwd.sum()) - int(stack.sum()) - int(anti.sum())
            for dd in DIRECTIONS:
                q = fwd[dd].astype(np.int64) - stack[dd] - anti[dd]
                axis = -1 if dd in (E, W) else -2  # E/W live in rows, N/S in columns
                per_line[(k, dd)] = q.sum(axis=axis)
        return ChargeReport(q1=totals[1], q2=totals[2], per_line=per_line)

    def snapshot(self) -> dict:
        """Sparse JSON-ready state (single grid only)."""
        if self.batch_shape:
            raise ValueError("snapshot is defined for single grids")

        def sites(mask):
            r, c = np.nonzero(mask)
            return [[int(a), int(b)] for a, b in sorted(zip(r.tolist(), c.tolist()))]

        def channels(arr):
            return {DIR_NAMES[dd]: sites(arr[dd]) for dd in DIRECTIONS}

        def stacks(arr):
            out = []
            for dd in DIRECTIONS:
                r, c = np.nonzero(arr[dd])
                for a, b in zip(r.tolist(), c.tolist()):
                    out.append([int(a), int(b), DIR_NAMES[dd], int(arr[dd][a, b])])
            return sorted(out, key=lambda e: (e[0], e[1], e[2]))

        return {
            "defects": sites(self.defect),
            "fwd1": channels(self.fwd1),
            "fwd2": channels(self.fwd2),
            "anti1": channels(self.anti1),
            "anti2": channels(self.anti2),
            "stack1": stacks(self.stack1),
            "stack2": stacks(self.stack2),
        }


def init_zero(params: RuleParams, batch_shape: tuple = ()) -> AutomatonGrid:
    """Fresh grid in the zero configuration."""
    return AutomatonGrid(params, batch_shape)
