"""Exact discrete potential theory on small tori by sparse linear solves.

Hitting probabilities, expected hitting times, harmonic measure, Green
functions, the equilibrium measure pair, the Bernoulli-splitting excursion
chain, and exact circle-chain event probabilities.  Systems are (I - Q) over
the non-absorbed cells with Q the quarter-adjacency; they are solved by a
sparse LU factorisation and every solve is residual-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix, identity
from scipy.sparse.linalg import splu

from .lattice import (
    TorusPoint,
    WalkState,
    advance_to_mask,
    ball_mask,
    exterior_boundary_mask,
)

MAX_EXACT_N = 128
RESIDUAL_TOL = 1e-10


def _check_size(n: int, size_cap: int | None):
    cap = MAX_EXACT_N if size_cap is None else size_cap
    if n > cap:
        raise ValueError(f"exact solves capped at n <= {cap} (got n = {n})")


def _neighbor_codes(n: int) -> np.ndarray:
    """(N, 4) flat codes of the four lattice neighbors of every cell."""
    codes = np.arange(n * n, dtype=np.int64)
    x, y = divmod(codes, n)
    out = np.empty((n * n, 4), dtype=np.int64)
    out[:, 0] = ((x + 1) % n) * n + y
    out[:, 1] = ((x - 1) % n) * n + y
    out[:, 2] = x * n + (y + 1) % n
    out[:, 3] = x * n + (y - 1) % n
    return out


class GridSystem:
    """(I - Q) on the free cells of the torus for one absorbing set."""

    def __init__(self, n: int, absorbing: np.ndarray, size_cap: int | None = None):
        _check_size(n, size_cap)
        self.n = n
        flat = absorbing.reshape(-1)
        if flat.all():
            raise ValueError("no free cells")
        self.absorbing = flat
        self.free_codes = np.nonzero(~flat)[0]
        self.nfree = self.free_codes.size
        self.index = np.full(n * n, -1, dtype=np.int64)
        self.index[self.free_codes] = np.arange(self.nfree)
        nb = _neighbor_codes(n)[self.free_codes]  # (nfree, 4)
        cols = self.index[nb]
        rows = np.repeat(np.arange(self.nfree), 4)
        cols = cols.reshape(-1)
        keep = cols >= 0
        data = np.full(keep.sum(), 0.25)
        Q = csr_matrix((data, (rows[keep], cols[keep])), shape=(self.nfree, self.nfree))
        self._matrix = (identity(self.nfree, format="csr") - Q).tocsc()
        self._Q = Q
        self._nb = nb
        self._lu = None

    def _solve_raw(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is None:
            self._lu = splu(self._matrix)
        return self._lu.solve(rhs)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (I - Q) h = rhs on free cells, residual-checked."""
        h = self._solve_raw(rhs)
        resid = np.abs(self._matrix @ h - rhs).max()
        scale = max(1.0, np.abs(rhs).max())
        if resid > RESIDUAL_TOL * scale:
            raise RuntimeError(f"solver residual {resid:.3e} above tolerance")
        return h

    def full_vector(self, h_free: np.ndarray) -> np.ndarray:
        """Embed a free-cell vector into all N cells (zero on absorbing)."""
        out = np.zeros(self.n * self.n, dtype=float)
        out[self.free_codes] = h_free
        return out

    def apply_Q(self, h_free: np.ndarray) -> np.ndarray:
        return self._Q @ h_free

    def one_step_to(self, target_codes: np.ndarray) -> csr_matrix:
        """Sparse (nfree, len(target_codes)) matrix of one-step probabilities."""
        tpos = np.full(self.n * self.n, -1, dtype=np.int64)
        tpos[target_codes] = np.arange(target_codes.size)
        cols = tpos[self._nb].reshape(-1)
        rows = np.repeat(np.arange(self.nfree), 4)
        keep = cols >= 0
        data = np.full(keep.sum(), 0.25)
        return csr_matrix(
            (data, (rows[keep], cols[keep])), shape=(self.nfree, target_codes.size)
        )


def _as_mask(target, n: int) -> np.ndarray:
    if isinstance(target, np.ndarray):
        return target
    from .lattice import points_to_mask

    return points_to_mask(target, n)


def hit_prob_exact(v: TorusPoint, A, B_set, n: int, size_cap: int | None = None) -> float:
    """P_v[H_A < H_B] by the discrete Dirichlet problem (1 on A, 0 on B)."""
    maskA = _as_mask(A, n)
    maskB = _as_mask(B_set, n)
    if not maskA.any() or not maskB.any():
        raise ValueError("A and B must be nonempty")
    if (maskA & maskB).any():
        raise ValueError("A and B must be disjoint")
    flatA = maskA.reshape(-1)
    if flatA[v.code]:
        return 1.0
    if maskB.reshape(-1)[v.code]:
        return 0.0
    sys = GridSystem(n, maskA | maskB, size_cap=size_cap)
    rhs = np.asarray(sys.one_step_to(np.nonzero(flatA)[0]).sum(axis=1)).ravel()
    h = sys.solve(rhs)
    return float(h[sys.index[v.code]])


def expected_hit_exact(v: TorusPoint, A, n: int, size_cap: int | None = None) -> float:
    """E_v[H_A] by the Poisson equation (I - Q) h = 1, h = 0 on A."""
    maskA = _as_mask(A, n)
    if not maskA.any():
        raise ValueError("A must be nonempty")
    if maskA.reshape(-1)[v.code]:
        return 0.0
    sys = GridSystem(n, maskA, size_cap=size_cap)
    h = sys.solve(np.ones(sys.nfree))
    return float(h[sys.index[v.code]])


def expected_hit_table(A, n: int, size_cap: int | None = None) -> np.ndarray:
    """E_v[H_A] for every cell v, as a flat length-N vector."""
    maskA = _as_mask(A, n)
    sys = GridSystem(n, maskA, size_cap=size_cap)
    return sys.full_vector(sys.solve(np.ones(sys.nfree)))


def harmonic_measure_exact(
    sources, boundary, n: int, size_cap: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Exit distributions P_v[S_{H_boundary} = u] for each source v.

    Returns (rows, boundary_codes); rows has shape (len(sources), #boundary).
    Uses one adjoint solve per source when that is the cheaper side, else one
    Dirichlet solve per boundary vertex.
    """
    mask = _as_mask(boundary, n)
    bcodes = np.nonzero(mask.reshape(-1))[0]
    src = [p.code if isinstance(p, TorusPoint) else int(p) for p in sources]
    sys = GridSystem(n, mask, size_cap=size_cap)
    B = sys.one_step_to(bcodes)
    rows = np.zeros((len(src), bcodes.size))
    free_sources = [(i, sys.index[c]) for i, c in enumerate(src) if sys.index[c] >= 0]
    if len(free_sources) <= bcodes.size:
        for i, fi in free_sources:
            e = np.zeros(sys.nfree)
            e[fi] = 1.0
            g = sys.solve(e)  # symmetric system: adjoint = direct
            rows[i] = g @ B
    else:
        H = sys.solve(B.toarray())
        for i, fi in free_sources:
            rows[i] = H[fi]
    onb = {c: j for j, c in enumerate(bcodes)}
    for i, c in enumerate(src):
        if sys.index[c] < 0:
            rows[i, onb[c]] = 1.0
    return rows, bcodes


@dataclass
class GreenTable:
    """Symmetric Green function values G(u, v) for probe cells of one domain."""

    n: int
    absorbing: np.ndarray
    probe_codes: np.ndarray
    columns: np.ndarray  # (N, #probes): G(u, probe) for every cell u

    def value(self, u_code: int, v_code: int) -> float:
        j = np.nonzero(self.probe_codes == v_code)[0]
        if j.size == 0:
            raise ValueError("v is not a probe cell")
        return float(self.columns[u_code, j[0]])

    def probe_matrix(self) -> np.ndarray:
        return self.columns[self.probe_codes]


def green_exact(absorbing, probes, n: int, size_cap: int | None = None) -> GreenTable:
    """Green table of the domain killed on ``absorbing`` at the probe cells."""
    mask = _as_mask(absorbing, n)
    sys = GridSystem(n, mask, size_cap=size_cap)
    pcodes = np.array(
        [p.code if isinstance(p, TorusPoint) else int(p) for p in probes], dtype=np.int64
    )
    cols = np.zeros((n * n, pcodes.size))
    for j, c in enumerate(pcodes):
        fi = sys.index[c]
        if fi < 0:
            continue
        e = np.zeros(sys.nfree)
        e[fi] = 1.0
        cols[:, j] = sys.full_vector(sys.solve(e))
    return GreenTable(n=n, absorbing=mask.reshape(-1), probe_codes=pcodes, columns=cols)


def green_weighted_column(
    absorbing, weights: dict[int, float], n: int, size_cap: int | None = None
) -> np.ndarray:
    """sum_v w(v) G(v, u) for all u, via one symmetric solve."""
    mask = _as_mask(absorbing, n)
    sys = GridSystem(n, mask, size_cap=size_cap)
    rhs = np.zeros(sys.nfree)
    for code, w in weights.items():
        fi = sys.index[code]
        if fi < 0:
            raise ValueError("weight placed on an absorbed cell")
        rhs[fi] = w
    return sys.full_vector(sys.solve(rhs))


# -- equilibrium pair and the excursion chain ---------------------------------


@dataclass
class EquilibriumPair:
    """Fixed-point measures on the outer and inner circles, plus q."""

    mu_outer: np.ndarray
    mu_inner: np.ndarray
    outer_codes: np.ndarray
    inner_codes: np.ndarray
    q: float
    residual: float
    iterations: int
    spectral_gap_estimate: float


class EquilibriumWorkspace:
    """All exact tables for one (y, r, R, n) annulus, built once and reused."""

    def __init__(
        self,
        y: TorusPoint,
        r: float,
        R: float,
        n: int,
        tol: float = 1e-12,
        size_cap: int | None = None,
        cache_dir: str | Path | None = None,
    ):
        if not 1 < r < R <= n / 2:
            raise ValueError("need 1 < r < R <= n/2")
        self.y = y
        self.r = float(r)
        self.R = float(R)
        self.n = n
        self.tol = tol
        self._size_cap = size_cap
        inner_mask = exterior_boundary_mask(ball_mask(y, r))
        outer_mask = exterior_boundary_mask(ball_mask(y, R))
        self.inner_mask = inner_mask
        self.outer_mask = outer_mask
        self.inner_codes = np.nonzero(inner_mask.reshape(-1))[0]
        self.outer_codes = np.nonzero(outer_mask.reshape(-1))[0]
        self._cache_dir = Path(cache_dir) if cache_dir is not None else None
        if not self._load_kernels():
            # inward kernel: from outer cells to the inner circle
            rows_in, _ = harmonic_measure_exact(
                self.outer_codes, inner_mask, n, size_cap=size_cap
            )
            # outward kernel: from inner cells to the outer circle
            rows_out, _ = harmonic_measure_exact(
                self.inner_codes, outer_mask, n, size_cap=size_cap
            )
            self.K_out2in = rows_in
            self.K_in2out = rows_out
            self._save_kernels()
        self._pair: EquilibriumPair | None = None

    # kernel cache ------------------------------------------------------------

    def _cache_path(self) -> Path | None:
        if self._cache_dir is None:
            return None
        key = f"eq_n{self.n}_y{self.y.code}_r{self.r:g}_R{self.R:g}_tol{self.tol:g}"
        return self._cache_dir / f"{key}.npz"

    def _load_kernels(self) -> bool:
        path = self._cache_path()
        if path is None or not path.exists():
            return False
        data = np.load(path)
        if not (
            np.array_equal(data["inner_codes"], self.inner_codes)
            and np.array_equal(data["outer_codes"], self.outer_codes)
        ):
            return False
        self.K_out2in = data["K_out2in"]
        self.K_in2out = data["K_in2out"]
        return True

    def _save_kernels(self):
        path = self._cache_path()
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path,
            inner_codes=self.inner_codes,
            outer_codes=self.outer_codes,
            K_out2in=self.K_out2in,
            K_in2out=self.K_in2out,
        )

    # equilibrium pair ----------------------------------------------------------

    def equilibrium_pair(self, max_iters: int = 100_000) -> EquilibriumPair:
        """Power-iterate the composed kernel to its stationary pair."""
        if self._pair is not None:
            return self._pair
        compose = self.K_out2in @ self.K_in2out  # outer -> outer
        mu = np.full(self.outer_codes.size, 1.0 / self.outer_codes.size)
        prev_delta = None
        gap = 0.0
        for it in range(1, max_iters + 1):
            nxt = mu @ compose
            nxt /= nxt.sum()
            delta = np.abs(nxt - mu).max()
            if prev_delta is not None and prev_delta > 0:
                gap = 1.0 - delta / prev_delta
            prev_delta = delta
            mu = nxt
            if delta < self.tol:
                break
        else:
            raise RuntimeError("power iteration did not converge")
        mu_inner = mu @ self.K_out2in
        mu_inner /= mu_inner.sum()
        resid = max(
            np.abs(mu_inner @ self.K_in2out - mu).max(),
            np.abs(mu @ self.K_out2in - mu_inner).max(),
        )
        q = float((self.K_in2out / mu[None, :]).min())
        self._pair = EquilibriumPair(
            mu_outer=mu,
            mu_inner=mu_inner,
            outer_codes=self.outer_codes,
            inner_codes=self.inner_codes,
            q=q,
            residual=float(resid),
            iterations=it,
            spectral_gap_estimate=float(gap),
        )
        return self._pair

    def nu_matrix(self) -> np.ndarray:
        """Residual measures nu_z per inner cell; rows are probability vectors."""
        pair = self.equilibrium_pair()
        if pair.q >= 1.0:
            raise ValueError("q = 1: the residual measure is undefined")
        nu = (self.K_in2out - pair.q * pair.mu_outer[None, :]) / (1.0 - pair.q)
        if nu.min() < -1e-12:
            raise RuntimeError(
                f"nu has a negative entry {nu.min():.3e}: q computation bug"
            )
        nu = np.clip(nu, 0.0, None)
        nu /= nu.sum(axis=1, keepdims=True)
        return nu

    # exact expectations --------------------------------------------------------

    def expected_inward_leg(self) -> float:
        """E over mu_outer of the hitting time of the inner circle."""
        pair = self.equilibrium_pair()
        h = expected_hit_table(self.inner_mask, self.n, size_cap=self._size_cap)
        return float(pair.mu_outer @ h[self.outer_codes])

    def expected_outward_leg(self) -> float:
        """E over mu_inner of the hitting time of the outer circle."""
        pair = self.equilibrium_pair()
        h = expected_hit_table(self.outer_mask, self.n, size_cap=self._size_cap)
        return float(pair.mu_inner @ h[self.inner_codes])

    def expected_d1(self) -> float:
        """Exact E over the pair of the full excursion length D_1."""
        return self.expected_inward_leg() + self.expected_outward_leg()

    def stationary_measure(self) -> np.ndarray:
        """The invariant measure built from the two Green tables and the pair."""
        pair = self.equilibrium_pair()
        w_in = {int(c): float(w) for c, w in zip(self.inner_codes, pair.mu_inner)}
        w_out = {int(c): float(w) for c, w in zip(self.outer_codes, pair.mu_outer)}
        m1 = green_weighted_column(self.outer_mask, w_in, self.n, size_cap=self._size_cap)
        m2 = green_weighted_column(self.inner_mask, w_out, self.n, size_cap=self._size_cap)
        return m1 + m2

    def stationary_check(self) -> dict[str, float]:
        """Uniformity certificate for the stationary measure."""
        m = self.stationary_measure()
        mean = m.mean()
        deviation = float(np.abs(m / mean - 1.0).max())
        return {
            "max_rel_deviation": deviation,
            "m_at_center": float(m[self.y.code]),
            "total_mass": float(m.sum()),
            "log_ratio": math.log(self.R / self.r),
        }


@dataclass
class CoupledChainRun:
    """One realisation of the Bernoulli-splitting excursion chain."""

    start_cells: np.ndarray  # outer-circle start codes per excursion
    end_cells: np.ndarray  # inner-circle endpoint codes per excursion
    durations: np.ndarray  # inward-leg step counts I_{X_l}
    flags: np.ndarray  # Bernoulli regeneration flags I_l
    regen_indices: np.ndarray  # J_0, J_1, ...
    block_sums: np.ndarray  # G_0, G_1, ...


def coupled_chain_run(
    ws: EquilibriumWorkspace,
    x: TorusPoint,
    length: int,
    seed: int = 0,
    stream: int = 0,
    cap_per_leg: int | None = None,
) -> CoupledChainRun:
    """Simulate (X_l, I_l) with exact splitting measures from the oracle.

    Start points come from mu_outer (on regeneration) or nu_z (otherwise);
    each inward leg is an honest walk segment, so durations and endpoints
    carry the exact conditional law.
    """
    pair = ws.equilibrium_pair()
    nu = ws.nu_matrix()
    n = ws.n
    if cap_per_leg is None:
        cap_per_leg = 2000 * n * n
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))
    inner_pos = {int(c): i for i, c in enumerate(ws.inner_codes)}

    starts = np.empty(length, dtype=np.int64)
    ends = np.empty(length, dtype=np.int64)
    durations = np.empty(length, dtype=np.int64)
    flags = np.empty(length, dtype=np.int64)

    # X_0: from x, run to D_1 = first outer hit after the first inner hit.
    walk = WalkState(TorusPoint(x.x, x.y, n), seed=seed, stream=stream + 1_000_000)
    advance_to_mask(walk, ws.inner_mask, cap_per_leg, inclusive=True)
    advance_to_mask(walk, ws.outer_mask, cap_per_leg, inclusive=False)
    start = walk.code

    for ell in range(length):
        leg = WalkState(
            TorusPoint(start // n, start % n, n), seed=seed, stream=stream + 2_000_000 + ell
        )
        dur = advance_to_mask(leg, ws.inner_mask, cap_per_leg, inclusive=False)
        starts[ell] = start
        ends[ell] = leg.code
        durations[ell] = dur
        flags[ell] = 1 if rng.random() < pair.q else 0
        if flags[ell]:
            start = int(rng.choice(ws.outer_codes, p=pair.mu_outer))
        else:
            start = int(rng.choice(ws.outer_codes, p=nu[inner_pos[int(ends[ell])]]))

    regen = np.nonzero(flags)[0]
    blocks = []
    prev = -1
    for j in regen:
        blocks.append(int(durations[prev + 1 : j + 1].sum()))
        prev = j
    return CoupledChainRun(
        start_cells=starts,
        end_cells=ends,
        durations=durations,
        flags=flags,
        regen_indices=regen,
        block_sums=np.array(blocks, dtype=np.int64),
    )


def equilibrium_pair(
    y: TorusPoint, r: float, R: float, n: int, tol: float = 1e-12, size_cap: int | None = None
) -> EquilibriumPair:
    return EquilibriumWorkspace(y, r, R, n, tol=tol, size_cap=size_cap).equilibrium_pair()


def stationary_check(
    y: TorusPoint, r: float, R: float, n: int, size_cap: int | None = None
) -> dict[str, float]:
    return EquilibriumWorkspace(y, r, R, n, size_cap=size_cap).stationary_check()


# -- Kac moment hierarchy ------------------------------------------------------


def kac_moment_check(A, n: int, size_cap: int | None = None) -> dict[str, float]:
    """Exact E[T^m] for m <= 3 via the recursive Poisson hierarchy.

    Returns the worst ratios lhs/rhs of Kac's inequality
    E[T^m] <= m! E[T] (max E[T])^(m-1) over all start cells.
    """
    mask = _as_mask(A, n)
    sys = GridSystem(n, mask, size_cap=size_cap)
    one = np.ones(sys.nfree)
    h1 = sys.solve(one)
    h2 = sys.solve(one + 2 * sys.apply_Q(h1))
    h3 = sys.solve(one + 3 * sys.apply_Q(h1) + 3 * sys.apply_Q(h2))
    hmax = h1.max()
    ratio2 = float((h2 / (2 * h1 * hmax)).max())
    ratio3 = float((h3 / (6 * h1 * hmax**2)).max())
    return {"ratio_m2": ratio2, "ratio_m3": ratio3, "max_expected": float(hmax)}


# -- tiny-torus cover oracle ---------------------------------------------------


def exact_cover_mean(n: int) -> float:
    """Exact expected cover time by enumerating the (position, visited-set) chain."""
    if n > 3:
        raise ValueError("state space explodes beyond n = 3")
    ncells = n * n
    full = (1 << ncells) - 1
    nb = _neighbor_codes(n)
    states = {}

    def sid(pos, vis):
        key = (pos, vis)
        if key not in states:
            states[key] = len(states)
        return states[key]

    # Breadth-first enumeration of reachable states from (0, {0}).
    from collections import deque

    start = (0, 1)
    queue = deque([start])
    seen = {start}
    transitions = []
    while queue:
        pos, vis = queue.popleft()
        if vis == full:
            continue
        for t in nb[pos]:
            nvis = vis | (1 << int(t))
            nxt = (int(t), nvis)
            transitions.append(((pos, vis), nxt))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    transient = [s for s in seen if s[1] != full]
    tid = {s: i for i, s in enumerate(transient)}
    size = len(transient)
    M = np.zeros((size, size))
    for src, dst in transitions:
        if src[1] == full:
            continue
        if dst in tid:
            M[tid[src], tid[dst]] += 0.25
    h = np.linalg.solve(np.eye(size) - M, np.ones(size))
    return float(h[tid[start]])


# -- exact circle-chain event probabilities ------------------------------------


class CircleChain:
    """Exact Markov chain of successive circle hits for a radii schedule.

    State = a cell on one of the circles; transitions are harmonic-measure
    kernels onto the adjacent circles (unit steps cannot skip a circle).
    """

    def __init__(self, center: TorusPoint, radii, n: int, size_cap: int | None = None):
        self.center = center
        self.radii = [float(r) for r in radii]
        self.n = n
        self.L = len(self.radii) - 1
        masks = [exterior_boundary_mask(ball_mask(center, r)) for r in self.radii]
        self.circle_codes = [np.nonzero(m.reshape(-1))[0] for m in masks]
        self.kern_down: dict[int, np.ndarray] = {}  # circle i -> circle i+1
        self.kern_up: dict[int, np.ndarray] = {}  # circle i -> circle i-1
        # from the outermost circle the next circle hit is circle 1 surely
        rows, bcodes = harmonic_measure_exact(
            self.circle_codes[0], masks[1], n, size_cap=size_cap
        )
        assert np.array_equal(bcodes, self.circle_codes[1])
        self.kern_down[0] = rows
        for i in range(1, self.L):
            absorbing = masks[i - 1] | masks[i + 1]
            rows, bcodes = harmonic_measure_exact(
                self.circle_codes[i], absorbing, n, size_cap=size_cap
            )
            up_pos = np.searchsorted(bcodes, self.circle_codes[i - 1])
            down_pos = np.searchsorted(bcodes, self.circle_codes[i + 1])
            self.kern_up[i] = rows[:, up_pos]
            self.kern_down[i] = rows[:, down_pos]
        # from the innermost circle the next circle hit is L-1 surely
        rows, bcodes = harmonic_measure_exact(
            self.circle_codes[self.L], masks[self.L - 1], n, size_cap=size_cap
        )
        assert np.array_equal(bcodes, self.circle_codes[self.L - 1])
        self.kern_up[self.L] = rows

    def event_probability(self, start: TorusPoint, m: int, targets: dict[int, int]) -> float:
        """P_start[T_i = targets[i] for all i, by the m-th top departure].

        ``targets`` must specify every level 1..L-1; T_i counts inward circle
        transitions i -> i+1, and the start must sit on the outermost circle.
        """
        if sorted(targets) != list(range(1, self.L)):
            raise ValueError("targets must cover levels 1..L-1")
        pos0 = np.nonzero(self.circle_codes[0] == start.code)[0]
        if pos0.size != 1:
            raise ValueError("start must lie on the outermost circle")
        total = 0.0
        counts0 = [0] * self.L

        def dfs(level: int, vec: np.ndarray, counts: list[int], dcount: int):
            nonlocal total
            if level == 0:
                if dcount == m:
                    if all(counts[i] == targets[i] for i in range(1, self.L)):
                        total += float(vec.sum())
                    return
                counts = counts.copy()
                counts[0] += 1
                dfs(1, vec @ self.kern_down[0], counts, dcount)
                return
            if level == self.L:
                dfs(self.L - 1, vec @ self.kern_up[self.L], counts, dcount)
                return
            # inward branch
            if counts[level] < targets[level]:
                c2 = counts.copy()
                c2[level] += 1
                dfs(level + 1, vec @ self.kern_down[level], c2, dcount)
            # outward branch
            dfs(level - 1, vec @ self.kern_up[level], counts, dcount + (1 if level == 1 else 0))

        vec = np.zeros(self.circle_codes[0].size)
        vec[pos0[0]] = 1.0
        dfs(0, vec, counts0, 0)
        return total
