"""Torus geometry and the simple-random-walk engine.

Positions live on the two-dimensional discrete torus of side ``n`` with the
wrapped Euclidean metric.  The walk engine generates moves in blocks from a
counter-based Philox stream so that trials keyed by ``(seed, stream)`` are
reproducible and order-independent, while per-step work stays vectorised.

The walk is not lazy: its period-2 parity is harmless for hitting and cover
times, which only ask when a set is first entered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Move encoding: 0 = +x, 1 = -x, 2 = +y, 3 = -y.
_DX = np.array([1, -1, 0, 0], dtype=np.int64)
_DY = np.array([0, 0, 1, -1], dtype=np.int64)

_FIRST_BLOCK = 1 << 10
_MAX_BLOCK = 1 << 17


class BudgetExceededError(RuntimeError):
    """Raised when a walk operation exhausts its step budget."""

    def __init__(self, message: str, steps_taken: int):
        super().__init__(message)
        self.steps_taken = steps_taken


@dataclass(frozen=True)
class TorusPoint:
    """A point of the discrete torus; coordinates are reduced mod n."""

    x: int
    y: int
    n: int

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("torus side must be positive")
        object.__setattr__(self, "x", int(self.x) % self.n)
        object.__setattr__(self, "y", int(self.y) % self.n)

    @property
    def code(self) -> int:
        """Flat cell index x * n + y."""
        return self.x * self.n + self.y

    def shifted(self, dx: int, dy: int) -> "TorusPoint":
        return TorusPoint(self.x + dx, self.y + dy, self.n)

    def neighbors(self) -> tuple["TorusPoint", ...]:
        return tuple(self.shifted(dx, dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)))


@dataclass(frozen=True)
class BallSpec:
    """Open ball B(center, radius) = {y : d(center, y) < radius}, radius real."""

    center: TorusPoint
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.radius < self.center.n / 2:
            raise ValueError("radius must be < n/2 so the ball does not wrap into itself")

    def mask(self) -> np.ndarray:
        return ball_mask(self.center, self.radius)

    def boundary_mask(self) -> np.ndarray:
        return exterior_boundary_mask(self.mask())


def torus_distance(a: TorusPoint, b: TorusPoint) -> float:
    """Euclidean length of the minimal wrapped displacement between a and b."""
    if a.n != b.n:
        raise ValueError(f"mismatched torus sides: {a.n} != {b.n}")
    dx = abs(a.x - b.x)
    dy = abs(a.y - b.y)
    dx = min(dx, a.n - dx)
    dy = min(dy, a.n - dy)
    return math.hypot(dx, dy)


def wrapped_dist2_grid(center: TorusPoint) -> np.ndarray:
    """Integer squared wrapped distance from ``center`` to every cell, shape (n, n)."""
    n = center.n
    i = np.arange(n, dtype=np.int64)
    dx = np.abs(i - center.x)
    dx = np.minimum(dx, n - dx)
    dy = np.abs(i - center.y)
    dy = np.minimum(dy, n - dy)
    return dx[:, None] ** 2 + dy[None, :] ** 2


def ball_mask(center: TorusPoint, radius: float) -> np.ndarray:
    """Boolean (n, n) membership mask of B(center, radius), strict inequality."""
    return wrapped_dist2_grid(center) < float(radius) ** 2


def exterior_boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Cells outside ``mask`` with a lattice neighbor inside it."""
    near = (
        np.roll(mask, 1, axis=0)
        | np.roll(mask, -1, axis=0)
        | np.roll(mask, 1, axis=1)
        | np.roll(mask, -1, axis=1)
    )
    return near & ~mask


def points_to_mask(points, n: int) -> np.ndarray:
    mask = np.zeros((n, n), dtype=bool)
    for p in points:
        if p.n != n:
            raise ValueError("point does not live on this torus")
        mask[p.x, p.y] = True
    return mask


def mask_to_points(mask: np.ndarray) -> frozenset:
    n = mask.shape[0]
    xs, ys = np.nonzero(mask)
    return frozenset(TorusPoint(int(x), int(y), n) for x, y in zip(xs, ys))


def boundary(points) -> frozenset:
    """Exterior lattice boundary of a point set; a singleton is its own boundary."""
    pts = frozenset(points)
    if not pts:
        raise ValueError("boundary of the empty set is undefined")
    if len(pts) == 1:
        return pts
    out = set()
    for p in pts:
        for q in p.neighbors():
            if q not in pts:
                out.add(q)
    if not out:
        raise ValueError("set has no exterior: it covers the whole torus")
    return frozenset(out)


def _philox_stream(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class WalkState:
    """A simple random walk on the torus with a deterministic move stream.

    The stream of moves is a pure function of ``(seed, stream)`` (or of the
    ``forced_moves`` array), independent of how operations slice it, so any
    sequence of operations on equal-seed walks reproduces bit-for-bit.
    A WalkState is confined to one worker at a time and never shared.
    """

    def __init__(
        self,
        start: TorusPoint,
        seed: int = 0,
        stream: int = 0,
        forced_moves=None,
        max_block: int = _MAX_BLOCK,
    ):
        self.n = start.n
        self._px = start.x
        self._py = start.y
        self.steps = 0
        self._max_block = int(max_block)
        self._next_block = _FIRST_BLOCK
        if forced_moves is not None:
            self._forced = np.asarray(forced_moves, dtype=np.int64)
            self._forced_used = 0
            self._rng = None
        else:
            self._forced = None
            self._rng = _philox_stream(seed, stream)
        self._codes = np.empty(0, dtype=np.int64)
        self._cursor = 0

    @property
    def position(self) -> TorusPoint:
        return TorusPoint(self._px, self._py, self.n)

    @property
    def code(self) -> int:
        return self._px * self.n + self._py

    # -- block machinery ---------------------------------------------------

    def _refill(self):
        if self._forced is not None:
            moves = self._forced[self._forced_used :]
            if moves.size == 0:
                raise RuntimeError("forced move stream exhausted")
            self._forced_used += moves.size
        else:
            size = min(self._next_block, self._max_block)
            self._next_block = min(self._next_block * 2, self._max_block)
            moves = self._rng.integers(0, 4, size=size, dtype=np.int64)
        cx = (self._px + np.cumsum(_DX[moves])) % self.n
        cy = (self._py + np.cumsum(_DY[moves])) % self.n
        self._codes = cx * self.n + cy
        self._cursor = 0

    def peek_block(self) -> np.ndarray:
        """Flat position codes for the not-yet-consumed part of the current block."""
        if self._cursor >= self._codes.size:
            self._refill()
        return self._codes[self._cursor :]

    def consume(self, k: int):
        """Advance the walk through the next ``k`` moves of the current block."""
        if k <= 0:
            return
        j = self._cursor + k - 1
        code = int(self._codes[j])
        self._px, self._py = divmod(code, self.n)
        self.steps += k
        self._cursor = j + 1


def step(walk: WalkState) -> WalkState:
    """Advance one uniform nearest-neighbor move; returns the same state."""
    walk.peek_block()
    walk.consume(1)
    return walk


def advance_to_mask(walk: WalkState, mask: np.ndarray, cap: int, inclusive: bool = True) -> int:
    """Run until the walk sits on ``mask``; returns steps taken by this call.

    ``inclusive`` counts an initial position already on the mask as an
    immediate hit (the i >= 0 convention of the hitting time).
    """
    flat = mask.reshape(-1)
    if inclusive and flat[walk.code]:
        return 0
    taken = 0
    while True:
        codes = walk.peek_block()
        limit = codes.size if taken + codes.size <= cap else int(cap - taken)
        hits = np.nonzero(flat[codes[:limit]])[0]
        if hits.size:
            j = int(hits[0])
            walk.consume(j + 1)
            return taken + j + 1
        walk.consume(limit)
        taken += limit
        if taken >= cap:
            raise BudgetExceededError(
                f"no hit within {cap} steps", steps_taken=taken
            )


def hitting_time(walk: WalkState, target, cap: int) -> int:
    """Steps until first entry into ``target`` (0 if already inside)."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    if isinstance(target, np.ndarray):
        mask = target
    else:
        mask = points_to_mask(target, walk.n)
    if not mask.any():
        raise ValueError("target set is empty")
    return advance_to_mask(walk, mask, cap, inclusive=True)


def default_cover_budget(n: int) -> int:
    """50x the leading-order cover time scale (4/pi) n^2 (log n)^2."""
    if n <= 1:
        return 1
    return int(50 * (4 / math.pi) * n * n * math.log(n) ** 2)


def cover_time(walk: WalkState, cap: int | None = None) -> int:
    """First step index at which every torus vertex has been visited.

    Visited cells are tracked in a flat bitset with a remaining counter;
    each block is scanned once.
    """
    n = walk.n
    if cap is None:
        cap = default_cover_budget(n)
    if cap <= 0:
        raise ValueError("cap must be positive")
    visited = np.zeros(n * n, dtype=bool)
    visited[walk.code] = True
    remaining = n * n - 1
    if remaining == 0:
        return walk.steps
    taken = 0
    while True:
        codes = walk.peek_block()
        limit = codes.size if taken + codes.size <= cap else int(cap - taken)
        block = codes[:limit]
        fresh = ~visited[block]
        if fresh.any():
            idx = np.nonzero(fresh)[0]
            cells, first = np.unique(block[idx], return_index=True)
            visited[cells] = True
            remaining -= cells.size
            if remaining == 0:
                j = int(idx[first].max())
                walk.consume(j + 1)
                return walk.steps
        walk.consume(limit)
        taken += limit
        if taken >= cap:
            raise BudgetExceededError(
                f"torus not covered within {cap} steps ({remaining} cells left)",
                steps_taken=taken,
            )
