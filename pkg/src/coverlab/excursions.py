"""Excursion clocks between concentric circles and traversal-count processes.

The stopping-time ladder alternates R-events (arrivals on an inner circle)
with D-events (returns to the outer circle).  All counting is a single
streaming pass over the walk: every circle is baked into a per-cell bitmask
label, and only label hits are touched in Python.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    BudgetExceededError,
    TorusPoint,
    WalkState,
    advance_to_mask,
    ball_mask,
    exterior_boundary_mask,
    torus_distance,
)

_WAIT_R = 0
_WAIT_D = 1


@dataclass(frozen=True)
class AnnulusSpec:
    """Concentric circle pair around ``center``: inner radius r, outer R."""

    center: TorusPoint
    r: float
    R: float

    def __post_init__(self):
        if not (0 < self.r < self.R):
            raise ValueError("need 0 < r < R for an annulus")
        if not self.R < self.center.n / 2:
            raise ValueError("outer radius must be < n/2")


@dataclass
class ExcursionClock:
    """Interleaved stopping times R_1 < D_1 < R_2 < D_2 < ... (relative steps)."""

    returns: list[int] = field(default_factory=list)
    departures: list[int] = field(default_factory=list)

    def validate(self):
        seq = []
        for r, d in zip(self.returns, self.departures):
            seq.extend((r, d))
        if len(self.returns) == len(self.departures) + 1:
            seq.append(self.returns[-1])
        if any(a >= b for a, b in zip(seq, seq[1:])):
            raise ValueError("clock times are not strictly interleaved")

    @property
    def pairs(self) -> int:
        return len(self.departures)


@dataclass
class TraversalRecord:
    """Traversal counts per level, produced by one streaming pass."""

    counts: dict[int, int]
    driving_level: int = 0
    m: int = 0
    intervals: dict[int, list[tuple[int, int]]] | None = None
    watch_time: int | None = None  # first hit of the watched set, if one was given

    def count(self, level: int) -> int:
        if level not in self.counts:
            raise ValueError(f"level {level} not covered by this record")
        return self.counts[level]


def validate_radii(radii, n: int | None = None, innermost_one: bool = True):
    """Schedule-build checks: strictly decreasing, unit gaps, innermost = 1."""
    radii = [float(r) for r in radii]
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    for a, b in zip(radii, radii[1:]):
        if not a > b:
            raise ValueError("radii must be strictly decreasing")
        if a - b < 1:
            raise ValueError(
                f"consecutive radii {a}, {b} differ by < 1: a unit step could cross both circles"
            )
    if innermost_one and radii[-1] != 1:
        raise ValueError("innermost radius must be 1")
    if n is not None and not radii[0] < n / 2:
        raise ValueError("outermost radius must be < n/2")
    return radii


@dataclass(frozen=True)
class _Ladder:
    level: int
    inner: int  # circle index: hits are R-events
    outer: int  # circle index: hits are D-events


class TraversalMachine:
    """Streams a walk through a family of circles, maintaining R/D ladders.

    ``circles`` are boolean cell masks; ladders reference them by index.  A
    cell may belong to several circles (inflated/deflated families), so the
    label is a bitmask.  State per ladder is one phase flag plus a counter.
    """

    def __init__(self, n: int, circles, ladders, driving: int):
        if len(circles) > 32:
            raise ValueError("at most 32 circles per machine")
        self.n = n
        self.ladders = list(ladders)
        self.driving = driving
        label = np.zeros(n * n, dtype=np.uint32)
        for idx, mask in enumerate(circles):
            if not mask.any():
                raise ValueError(f"circle {idx} is empty")
            label[mask.reshape(-1)] |= np.uint32(1 << idx)
        self._label = label
        inner_of: dict[int, list[int]] = {}
        outer_of: dict[int, list[int]] = {}
        for li, lad in enumerate(self.ladders):
            if lad.inner == lad.outer:
                raise ValueError("ladder inner and outer circles must differ")
            inner_of.setdefault(lad.inner, []).append(li)
            outer_of.setdefault(lad.outer, []).append(li)
        self._inner_of = inner_of
        self._outer_of = outer_of

    def run(
        self,
        walk: WalkState,
        m: int,
        cap: int,
        collect_intervals: bool = False,
        watch: int | None = None,
    ):
        """Advance ``walk`` until the driving ladder completes m departures.

        ``watch`` names a circle index whose first hit time is recorded on the
        returned record (used for H_x bookkeeping in late-point detection).
        """
        nlad = len(self.ladders)
        phase = [_WAIT_R] * nlad
        counts = [0] * nlad
        open_r = [0] * nlad
        intervals: list[list[tuple[int, int]]] = [[] for _ in range(nlad)]
        clock = ExcursionClock()
        done = m == 0
        taken = 0
        watch_time: int | None = None

        def on_circle(c: int, t: int) -> bool:
            nonlocal watch_time
            finished = False
            if c == watch and watch_time is None:
                watch_time = t
            for li in self._inner_of.get(c, ()):
                if phase[li] == _WAIT_R:
                    phase[li] = _WAIT_D
                    counts[li] += 1
                    open_r[li] = t
                    if li == self.driving:
                        clock.returns.append(t)
            for li in self._outer_of.get(c, ()):
                if phase[li] == _WAIT_D:
                    phase[li] = _WAIT_R
                    if collect_intervals:
                        intervals[li].append((open_r[li], t))
                    if li == self.driving:
                        clock.departures.append(t)
                        if len(clock.departures) == m:
                            finished = True
            return finished

        if not done:
            lab0 = int(self._label[walk.code])
            while lab0:
                bit = lab0 & -lab0
                done = on_circle(bit.bit_length() - 1, 0) or done
                lab0 ^= bit

        while not done:
            codes = walk.peek_block()
            limit = codes.size if taken + codes.size <= cap else int(cap - taken)
            lab = self._label[codes[:limit]]
            hits = np.nonzero(lab)[0]
            consumed = limit
            for j, v in zip(hits.tolist(), lab[hits].tolist()):
                t = taken + j + 1
                while v:
                    bit = v & -v
                    done = on_circle(bit.bit_length() - 1, t) or done
                    v ^= bit
                if done:
                    consumed = j + 1
                    break
            walk.consume(consumed)
            taken += consumed
            if not done and taken >= cap:
                raise BudgetExceededError(
                    f"driving ladder finished only {len(clock.departures)}/{m} "
                    f"departures within {cap} steps",
                    steps_taken=taken,
                )

        result = {lad.level: counts[li] for li, lad in enumerate(self.ladders)}
        record = TraversalRecord(
            counts=result,
            driving_level=self.ladders[self.driving].level,
            m=m,
            intervals={lad.level: intervals[li] for li, lad in enumerate(self.ladders)}
            if collect_intervals
            else None,
            watch_time=watch_time,
        )
        return record, clock


def _circle_masks(center: TorusPoint, radii) -> list[np.ndarray]:
    return [exterior_boundary_mask(ball_mask(center, r)) for r in radii]


def excursion_clock(walk: WalkState, annulus: AnnulusSpec, m: int, cap: int) -> ExcursionClock:
    """First m (R_k, D_k) pairs of the annulus ladder; R_1 may be 0."""
    if m < 1:
        raise ValueError("need m >= 1")
    circles = _circle_masks(annulus.center, [annulus.R, annulus.r])
    machine = TraversalMachine(walk.n, circles, [_Ladder(level=0, inner=1, outer=0)], driving=0)
    _, clock = machine.run(walk, m, cap)
    clock.validate()
    return clock


def _standard_machine(center: TorusPoint, radii, first_level: int = 0) -> TraversalMachine:
    masks = _circle_masks(center, radii)
    ladders = [
        _Ladder(level=first_level + i, inner=i + 1, outer=i) for i in range(len(radii) - 1)
    ]
    return TraversalMachine(center.n, masks, ladders, driving=0)


def traversal_counts(
    walk: WalkState,
    center: TorusPoint,
    radii,
    m: int,
    cap: int,
    collect_intervals: bool = False,
) -> tuple[TraversalRecord, ExcursionClock]:
    """Counts T_i of level-(i+1)-circle arrivals before the m-th top departure."""
    radii = validate_radii(radii, n=center.n)
    machine = _standard_machine(center, radii)
    return machine.run(walk, m, cap, collect_intervals=collect_intervals)


def intermediate_traversals(
    walk: WalkState,
    center: TorusPoint,
    radii,
    k: int,
    m: int,
    cap: int,
) -> tuple[TraversalRecord, ExcursionClock]:
    """Counts driven by m excursions of the level-k annulus; levels i >= k only."""
    radii = validate_radii(radii, n=center.n)
    if not 0 <= k <= len(radii) - 2:
        raise ValueError("driving level k out of range")
    machine = _standard_machine(center, radii[k:], first_level=k)
    return machine.run(walk, m, cap)


def tilde_traversal(
    walk: WalkState,
    center: TorusPoint,
    radii,
    m: int,
    cap: int,
) -> tuple[TraversalRecord, ExcursionClock]:
    """Traversal counts with the clock started at the first hit of the r_1 circle."""
    radii = validate_radii(radii, n=center.n)
    shift_mask = exterior_boundary_mask(ball_mask(center, radii[1]))
    used = advance_to_mask(walk, shift_mask, cap, inclusive=True)
    machine = _standard_machine(center, radii)
    return machine.run(walk, m, cap - used)


def hat_inflation(n: int) -> float:
    """Relative circle inflation sqrt(2)/(log n)^2 used by the hat counts."""
    return float(np.sqrt(2.0)) / float(np.log(n)) ** 2


def hat_traversal(
    walk: WalkState,
    center: TorusPoint,
    radii,
    m: int,
    cap: int,
    inflation: float | None = None,
) -> tuple[TraversalRecord, ExcursionClock]:
    """Hat-variant counts on inflated outer / deflated inner circles.

    Ladder i (i >= 1) runs between the inflated level-i circle and the
    deflated level-(i+1) circle; the driving clock runs between the deflated
    top circle and the inflated r_1 circle, started at the first hit of the
    latter.  Sharing one trajectory with the tilde counts gives the pathwise
    domination hat <= tilde.
    """
    radii = validate_radii(radii, n=center.n)
    eps = hat_inflation(center.n) if inflation is None else float(inflation)
    L = len(radii) - 1
    circles = []
    index: dict[tuple[str, int], int] = {}

    def add(tag: str, i: int, r: float) -> int:
        key = (tag, i)
        if key not in index:
            index[key] = len(circles)
            circles.append(exterior_boundary_mask(ball_mask(center, r)))
        return index[key]

    top_outer = add("minus", 0, (1 - eps) * radii[0])
    top_inner = add("plus", 1, (1 + eps) * radii[1])
    ladders = [_Ladder(level=0, inner=top_inner, outer=top_outer)]
    for i in range(1, L):
        outer = add("plus", i, (1 + eps) * radii[i])
        inner = add("minus", i + 1, (1 - eps) * radii[i + 1])
        ladders.append(_Ladder(level=i, inner=inner, outer=outer))
    shift_mask = circles[top_inner]
    used = advance_to_mask(walk, shift_mask, cap, inclusive=True)
    machine = TraversalMachine(center.n, circles, ladders, driving=0)
    return machine.run(walk, m, cap - used)


def detect_late_event(
    record: TraversalRecord,
    hit_time_of_x: int | None,
    clock: ExcursionClock,
    b_minus,
    b_plus,
    window,
) -> bool:
    """Late-point event: counts inside [b-, b+] on the window, x still unvisited.

    ``hit_time_of_x`` is None when x was not visited within the horizon; the
    bounds are inclusive on both sides.
    """
    if clock.pairs < record.m:
        raise ValueError("clock does not cover the m-th departure")
    for i in window:
        t = record.count(i)
        if not (b_minus(i) <= t <= b_plus(i)):
            return False
    if hit_time_of_x is None:
        return True
    return hit_time_of_x > clock.departures[record.m - 1]


def branching_level(x: TorusPoint, y: TorusPoint, radii) -> int | None:
    """Smallest k whose level-k balls around x and y are disjoint (2 r_k <= d).

    Returns None when no level qualifies (in particular for x == y).
    """
    d = torus_distance(x, y)
    for k, r in enumerate(radii):
        if 2 * float(r) <= d:
            return k
    return None
