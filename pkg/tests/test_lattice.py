import math

import numpy as np
import pytest

from coverlab.lattice import (
    BallSpec,
    BudgetExceededError,
    TorusPoint,
    WalkState,
    ball_mask,
    boundary,
    cover_time,
    exterior_boundary_mask,
    hitting_time,
    mask_to_points,
    step,
    torus_distance,
)


def test_torus_distance_examples():
    assert torus_distance(TorusPoint(0, 0, 8), TorusPoint(0, 1, 8)) == 1
    assert torus_distance(TorusPoint(0, 0, 8), TorusPoint(7, 0, 8)) == 1
    assert torus_distance(TorusPoint(0, 0, 100), TorusPoint(3, 4, 100)) == 5


def test_torus_distance_mismatched_sides():
    with pytest.raises(ValueError):
        torus_distance(TorusPoint(0, 0, 8), TorusPoint(0, 0, 16))


def test_torus_distance_is_a_metric():
    rng = np.random.default_rng(3)
    n = 17
    for _ in range(300):
        a, b, c = (TorusPoint(int(p[0]), int(p[1]), n) for p in rng.integers(0, n, (3, 2)))
        assert torus_distance(a, b) == torus_distance(b, a)
        assert torus_distance(a, c) <= torus_distance(a, b) + torus_distance(b, c) + 1e-12
        assert (torus_distance(a, b) == 0) == (a == b)


def test_point_reduction_and_equality():
    assert TorusPoint(9, -1, 8) == TorusPoint(1, 7, 8)


def test_boundary_singleton_is_itself():
    p = TorusPoint(3, 3, 9)
    assert boundary({p}) == frozenset({p})


def test_boundary_of_plus_shape_by_enumeration():
    # the 5-point plus B(x, 1.2): exterior neighbors are 4 diagonals + 4 at distance 2
    n = 9
    x = TorusPoint(4, 4, n)
    plus = mask_to_points(ball_mask(x, 1.2))
    assert len(plus) == 5
    got = boundary(plus)
    expected = set()
    for p in plus:
        for q in p.neighbors():
            if q not in plus:
                expected.add(q)
    assert got == frozenset(expected)
    assert len(got) == 8
    dists = sorted(round(torus_distance(x, q), 3) for q in got)
    assert dists == [1.414] * 4 + [2.0] * 4


def test_ball_membership_is_strict():
    # sqrt(2) < 1.5, so B(x, 1.5) is the full 3x3 block of 9 cells
    x = TorusPoint(4, 4, 9)
    assert ball_mask(x, 1.5).sum() == 9
    # strict inequality at integer radii, where the float compare is exact
    assert ball_mask(x, 1.0).sum() == 1  # d = 1 is excluded
    assert ball_mask(x, 2.0).sum() == 9  # d = 2 is excluded, diagonals stay


def test_boundary_of_whole_torus_is_an_error():
    pts = [TorusPoint(i, j, 2) for i in range(2) for j in range(2)]
    with pytest.raises(ValueError):
        boundary(pts)


def test_ballspec_rejects_wrapping_radius():
    with pytest.raises(ValueError):
        BallSpec(TorusPoint(0, 0, 8), 4.0)


def test_forced_step_up():
    w = WalkState(TorusPoint(0, 0, 4), forced_moves=[2])
    step(w)
    assert w.position == TorusPoint(0, 1, 4)
    assert w.steps == 1


def test_step_direction_frequencies():
    w = WalkState(TorusPoint(0, 0, 5), seed=42)
    n_steps = 1_000_000
    prev = w.position
    counts = np.zeros(4, dtype=np.int64)
    deltas = {(1, 0): 0, (-1, 0): 1, (0, 1): 2, (0, -1): 3}
    for _ in range(n_steps):
        step(w)
        cur = w.position
        d = ((cur.x - prev.x + 2) % 5 - 2, (cur.y - prev.y + 2) % 5 - 2)
        counts[deltas[d]] += 1
        prev = cur
    freqs = counts / n_steps
    assert np.all(np.abs(freqs - 0.25) <= 0.002)


def test_walk_steps_are_unit_moves_and_reduced():
    w = WalkState(TorusPoint(0, 0, 6), seed=9)
    prev = w.position
    for _ in range(500):
        step(w)
        cur = w.position
        assert torus_distance(prev, cur) == 1
        assert 0 <= cur.x < 6 and 0 <= cur.y < 6
        prev = cur


def test_equal_seeds_reproduce_trajectories():
    w1 = WalkState(TorusPoint(2, 2, 16), seed=7, stream=3)
    w2 = WalkState(TorusPoint(2, 2, 16), seed=7, stream=3)
    for _ in range(2000):
        step(w1)
        step(w2)
        assert w1.position == w2.position
    # different operation slicing, same stream: positions agree step-for-step
    w3 = WalkState(TorusPoint(2, 2, 16), seed=7, stream=3)
    mask = ball_mask(TorusPoint(9, 9, 16), 1.2)
    hitting_time(w3, mask, cap=10_000)
    w4 = WalkState(TorusPoint(2, 2, 16), seed=7, stream=3)
    for _ in range(w3.steps):
        step(w4)
    assert w4.position == w3.position


def test_hitting_time_zero_when_inside():
    w = WalkState(TorusPoint(5, 5, 16), seed=1)
    mask = ball_mask(TorusPoint(5, 5, 16), 2.0)
    assert hitting_time(w, mask, cap=10) == 0
    assert w.steps == 0


def test_hitting_time_of_neighbors_is_one():
    w = WalkState(TorusPoint(5, 5, 16), seed=1)
    target = frozenset(TorusPoint(5, 5, 16).neighbors())
    assert hitting_time(w, target, cap=10) == 1


def test_hitting_time_empty_target_and_bad_cap():
    w = WalkState(TorusPoint(0, 0, 8), seed=1)
    with pytest.raises(ValueError):
        hitting_time(w, np.zeros((8, 8), dtype=bool), cap=10)
    with pytest.raises(ValueError):
        hitting_time(w, ball_mask(TorusPoint(2, 2, 8), 1.2), cap=0)


def test_hitting_time_budget_error_carries_steps():
    w = WalkState(TorusPoint(0, 0, 64), seed=1)
    mask = np.zeros((64, 64), dtype=bool)
    mask[32, 32] = True
    with pytest.raises(BudgetExceededError) as err:
        hitting_time(w, mask, cap=50)
    assert err.value.steps_taken == 50


def test_exit_time_mc_mean_in_lawler_band():
    # E_center[H_boundary(B(0, R))] lies in [R^2, (R+1)^2]; MC within 3 sigma
    n, R = 128, 20.0
    center = TorusPoint(64, 64, n)
    mask = exterior_boundary_mask(ball_mask(center, R))
    vals = []
    for t in range(400):
        w = WalkState(center, seed=5, stream=t)
        vals.append(hitting_time(w, mask, cap=10**7))
    mean = np.mean(vals)
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert R**2 - 3 * se <= mean <= (R + 1) ** 2 + 3 * se


def test_hitting_monotone_in_target_pathwise():
    n = 32
    big = ball_mask(TorusPoint(20, 20, n), 4.0)
    small = ball_mask(TorusPoint(20, 20, n), 2.0)
    for t in range(25):
        w_big = WalkState(TorusPoint(3, 3, n), seed=11, stream=t)
        w_small = WalkState(TorusPoint(3, 3, n), seed=11, stream=t)
        assert hitting_time(w_big, big, 10**6) <= hitting_time(w_small, small, 10**6)


def test_cover_time_trivial_and_bounds():
    assert cover_time(WalkState(TorusPoint(0, 0, 1), seed=0)) == 0
    # cover dominates the hitting time of any fixed vertex, pathwise
    n = 8
    far = np.zeros((n, n), dtype=bool)
    far[4, 4] = True
    for t in range(25):
        w_cov = WalkState(TorusPoint(0, 0, n), seed=13, stream=t)
        w_hit = WalkState(TorusPoint(0, 0, n), seed=13, stream=t)
        assert cover_time(w_cov) >= hitting_time(w_hit, far, 10**7)


def test_cover_time_budget_error():
    with pytest.raises(BudgetExceededError):
        cover_time(WalkState(TorusPoint(0, 0, 32), seed=2), cap=100)


def test_cover_time_n2_matches_exact_chain():
    from coverlab.oracle import exact_cover_mean

    exact = exact_cover_mean(2)
    vals = [cover_time(WalkState(TorusPoint(0, 0, 2), seed=7, stream=t)) for t in range(8000)]
    mean = np.mean(vals)
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(mean - exact) <= 3 * se
