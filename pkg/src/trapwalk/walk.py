"""Nearest-neighbor walk paths: simulation, hitting times, reversal.

Paths carry a multiplicity map over visited sites so local edits update the
range size in O(affected sites); the polymer samplers lean on that.  The
walker is never killed during simulation -- occupancy is checked afterwards
against any field, so one trajectory can be scored against many
environments.

Step codes and letters: code 2a is +e_{a+1}, code 2a+1 is -e_{a+1}; the
serialization alphabet is A/a for the first axis, B/b for the second, C/c
for the third (uppercase positive, lowercase negative).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import uniform_array
from .lattice import (
    COORD_BITS,
    LatticeRegion,
    ModelParams,
    ObstacleField,
    pack_one,
    unpack_sites,
)

NEVER = 1 << 62  # hitting-time sentinel: event absent within the path

_UPPER = "ABC"
_LOWER = "abc"


def dir_deltas(d: int) -> np.ndarray:
    """Packed position increments per step code, length 2d."""
    out = np.empty(2 * d, dtype=np.int64)
    for a in range(d):
        out[2 * a] = 1 << (COORD_BITS * a)
        out[2 * a + 1] = -(1 << (COORD_BITS * a))
    return out


def origin_packed(d: int) -> int:
    return pack_one((0,) * d)


class LatticePath:
    """A finite nearest-neighbor path with incremental range bookkeeping."""

    __slots__ = ("d", "start", "_steps", "_pos", "_counts", "_range", "_deltas")

    def __init__(self, start, steps=()):
        self.d = len(start)
        if self.d not in (1, 2, 3):
            raise ValueError("start must have 1..3 coordinates")
        self.start = tuple(int(c) for c in start)
        self._deltas = dir_deltas(self.d)
        p0 = pack_one(self.start)
        self._steps: list[int] = []
        self._pos: list[int] = [p0]
        self._counts: dict[int, int] = {p0: 1}
        self._range = 1
        for k in steps:
            self.append_step(int(k))

    # -- incremental edits ---------------------------------------------

    def append_step(self, k: int) -> None:
        if not 0 <= k < 2 * self.d:
            raise ValueError(f"step code {k} out of range for d={self.d}")
        q = self._pos[-1] + int(self._deltas[k])
        self._steps.append(k)
        self._pos.append(q)
        c = self._counts.get(q, 0)
        self._counts[q] = c + 1
        if c == 0:
            self._range += 1

    def pop_step(self) -> int:
        if not self._steps:
            raise IndexError("pop from a zero-length path")
        k = self._steps.pop()
        q = self._pos.pop()
        c = self._counts[q]
        if c == 1:
            del self._counts[q]
            self._range -= 1
        else:
            self._counts[q] = c - 1
        return k

    # -- views -----------------------------------------------------------

    @property
    def steps(self) -> tuple[int, ...]:
        return tuple(self._steps)

    @property
    def visit_counts(self) -> dict[int, int]:
        return dict(self._counts)

    @property
    def range_size(self) -> int:
        return self._range

    @property
    def endpoint(self) -> tuple[int, ...]:
        return tuple(int(v) for v in unpack_sites(np.array([self._pos[-1]], dtype=np.int64), self.d)[0])

    def __len__(self) -> int:
        return len(self._steps)

    def packed_positions(self) -> np.ndarray:
        return np.array(self._pos, dtype=np.int64)

    def positions(self) -> np.ndarray:
        """(len+1, d) integer array of visited positions in order."""
        return unpack_sites(self.packed_positions(), self.d)

    def log_weight(self, params: ModelParams) -> float:
        """log(p^rangeSize * exp(<h, endpoint>)); exact given the ints."""
        end = self.endpoint
        acc = self._range * np.log(params.p)
        for a in range(self.d):
            acc += params.h[a] * end[a]
        return float(acc)

    # -- structure ---------------------------------------------------

    def reverse(self) -> "LatticePath":
        """Time reversal: positions in reverse order; an involution."""
        rev = [(k ^ 1) for k in reversed(self._steps)]
        return LatticePath(self.endpoint, rev)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LatticePath)
            and self.start == other.start
            and self._steps == other._steps
        )

    def __hash__(self):
        return hash((self.start, tuple(self._steps)))

    def __repr__(self) -> str:
        return f"LatticePath(start={self.start}, len={len(self._steps)}, range={self._range})"

    # -- serialization -------------------------------------------------

    def to_string(self) -> str:
        coords = ",".join(str(c) for c in self.start)
        letters = []
        for k in self._steps:
            a, sgn = divmod(k, 2)
            letters.append(_LOWER[a] if sgn else _UPPER[a])
        return coords + ":" + "".join(letters)

    @classmethod
    def from_string(cls, text: str) -> "LatticePath":
        head, _, tail = text.partition(":")
        start = tuple(int(c) for c in head.split(","))
        steps = []
        for ch in tail:
            if ch in _UPPER[: len(start)]:
                steps.append(2 * _UPPER.index(ch))
            elif ch in _LOWER[: len(start)]:
                steps.append(2 * _LOWER.index(ch) + 1)
            else:
                raise ValueError(f"bad step letter {ch!r} for d={len(start)}")
        return cls(start, steps)


@dataclass(frozen=True)
class HittingRecord:
    """One-pass hitting/exit summary of a path against a field and region.

    All times are path indices; NEVER marks events absent within the path.
    """

    tau_o: int
    tau_target: int
    tau_target_after_n: int
    tau_region: int
    last_visit: int
    x: tuple
    n_min: int

    def hit_after_n(self) -> bool:
        return self.tau_target_after_n < NEVER


def _first_true(mask: np.ndarray, offset: int = 0) -> int:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return NEVER
    return int(idx[0]) + offset


def simulate(params: ModelParams, field: ObstacleField | None, length: int, seed: int) -> LatticePath:
    """Fresh uniform-step walk from the origin, driven by (seed, counter).

    The field is accepted for interface symmetry but never stops the walk;
    score trajectories afterwards with hitting_record.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    u = uniform_array(seed, np.arange(length, dtype=np.int64))
    codes = (u * (2 * params.d)).astype(np.int64)
    np.clip(codes, 0, 2 * params.d - 1, out=codes)
    return LatticePath((0,) * params.d, codes.tolist())


def hitting_record(
    path: LatticePath,
    field: ObstacleField | None,
    x,
    N: int,
    region: LatticeRegion | None = None,
) -> HittingRecord:
    pp = path.packed_positions()
    up = unpack_sites(pp, path.d)
    if field is not None:
        occ = field.occupied_many(up)
        tau_o = _first_true(occ)
    else:
        tau_o = NEVER
    xt = tuple(int(c) for c in x)
    xp = pack_one(xt)
    hits = pp == xp
    tau_target = _first_true(hits)
    tau_after = _first_true(hits[N:], offset=N) if N <= len(path) else NEVER
    if region is not None:
        inside = region.contains(up)
        tau_region = _first_true(inside)
        idx = np.flatnonzero(inside)
        last_visit = int(idx[-1]) if idx.size else NEVER
    else:
        tau_region = NEVER
        last_visit = NEVER
    return HittingRecord(
        tau_o=tau_o,
        tau_target=tau_target,
        tau_target_after_n=tau_after,
        tau_region=tau_region,
        last_visit=last_visit,
        x=xt,
        n_min=N,
    )


def reverse(path: LatticePath) -> LatticePath:
    return path.reverse()
