import numpy as np
import pytest

from accd.counters import CounterSet
from accd.dataset import Dataset, brute_rows
from accd.errors import InvalidQueryError, RangeError, StateError
from accd.gti import (
    BoundState,
    CandidateMatrix,
    RadiusQuery,
    TopKQuery,
    build_groups,
    filter_iterative,
    filter_oneshot,
    group_bounds,
    init_oneshot_state,
    measured_saving,
    trace_bounds,
    two_landmark_bounds,
)
from accd.metrics import MetricSpec
from accd.synth import gaussian_mixture

L2 = MetricSpec(kind="L2")


# -- grouping ---------------------------------------------------------------


def test_one_group_radius_is_max_distance():
    r = np.random.default_rng(0)
    ds = Dataset.from_values(r.normal(size=(50, 3)))
    gm = build_groups(ds, 1, seed=1, metric=L2)
    assert gm.z == 1
    assert gm.membership[0].size == 50
    assert gm.radius[0] == gm.point_to_landmark.max()


def test_each_point_its_own_group():
    r = np.random.default_rng(1)
    ds = Dataset.from_values(r.normal(size=(20, 4)))
    gm = build_groups(ds, 20, seed=2, metric=L2)
    assert all(m.size <= 1 for m in gm.membership)
    assert np.all(gm.radius == 0.0)
    assert np.all(gm.point_to_landmark == 0.0)


def test_separated_blobs_recover_labels():
    r = np.random.default_rng(3)
    a = r.normal(size=(60, 2)) + [0.0, 0.0]
    b = r.normal(size=(60, 2)) + [100.0, 100.0]
    ds = Dataset.from_values(np.vstack([a, b]))
    gm = build_groups(ds, 2, seed=5, metric=L2)
    labels = gm.group_of
    assert len(set(labels[:60])) == 1
    assert len(set(labels[60:])) == 1
    assert labels[0] != labels[60]
    # brute-force nearest-landmark check
    d = brute_rows(ds.values, gm.landmarks, L2, CounterSet())
    assert np.array_equal(labels, np.argmin(d, axis=1))


def test_membership_partitions_points():
    r = np.random.default_rng(4)
    ds = Dataset.from_values(r.normal(size=(75, 5)))
    gm = build_groups(ds, 7, seed=6, metric=L2)
    seen = np.sort(np.concatenate(gm.membership))
    assert np.array_equal(seen, np.arange(75))
    # radius recomputable from point_to_landmark
    for g, members in enumerate(gm.membership):
        want = gm.point_to_landmark[members].max() if members.size else 0.0
        assert gm.radius[g] == want
    for g, members in enumerate(gm.membership):
        if members.size:
            d = brute_rows(ds.values[members], gm.landmarks[g : g + 1], L2, CounterSet())
            assert np.allclose(d[:, 0], gm.point_to_landmark[members], atol=1e-12)


def test_group_count_out_of_range():
    ds = Dataset.from_values(np.zeros((3, 2)))
    with pytest.raises(RangeError):
        build_groups(ds, 4, seed=0, metric=L2)


def test_grouping_deterministic():
    r = np.random.default_rng(9)
    ds = Dataset.from_values(r.normal(size=(40, 3)))
    a = build_groups(ds, 5, seed=11, metric=L2)
    b = build_groups(ds, 5, seed=11, metric=L2)
    assert np.array_equal(a.group_of, b.group_of)
    assert np.array_equal(a.landmarks, b.landmarks)


# -- bound algebra ----------------------------------------------------------


def test_two_landmark_hand_values():
    assert two_landmark_bounds(10.0, 2.0, 3.0) == (5.0, 15.0)
    assert two_landmark_bounds(7.0, 0.0, 0.0) == (7.0, 7.0)
    assert two_landmark_bounds(1.0, 5.0, 5.0) == (0.0, 11.0)  # floored at zero


def test_group_bounds_hand_values():
    assert group_bounds(10.0, 2.0, 3.0) == (5.0, 15.0)
    assert group_bounds(10.0, 0.0, 0.0) == (10.0, 10.0)


def test_group_bounds_bracket_true_extremes():
    r = np.random.default_rng(17)
    a = r.normal(size=(30, 4)) + 5
    b = r.normal(size=(25, 4)) - 5
    ds_a, ds_b = Dataset.from_values(a), Dataset.from_values(b)
    gm_a = build_groups(ds_a, 1, seed=0, metric=L2)
    gm_b = build_groups(ds_b, 1, seed=0, metric=L2)
    d_ref = brute_rows(gm_a.landmarks, gm_b.landmarks, L2, CounterSet())[0, 0]
    lb, ub = group_bounds(d_ref, gm_a.radius[0], gm_b.radius[0])
    pair = brute_rows(a, b, L2, CounterSet())
    assert lb <= pair.min() + 1e-12
    assert pair.max() <= ub + 1e-12


def test_trace_bounds_hand_values():
    assert trace_bounds(10.0, 0.0, 5.0, 0.0) == (10.0, 5.0)
    assert trace_bounds(10.0, 3.0, 4.0, 1.0) == (7.0, 5.0)


def test_bound_ops_vectorized():
    lb, ub = two_landmark_bounds(np.array([10.0, 1.0]), np.array([2.0, 5.0]), 3.0)
    assert lb.tolist() == [5.0, 0.0]
    assert ub.tolist() == [15.0, 9.0]


# -- one-shot filtering -----------------------------------------------------


def _grouped_pair(n_src=80, n_trg=90, z_src=4, z_trg=5, seed=0, spread=1.0, box=50.0):
    src = gaussian_mixture(n_src, 3, z_src, seed=seed, center_box=box, spread=spread)
    trg = gaussian_mixture(n_trg, 3, z_trg, seed=seed + 1, center_box=box, spread=spread)
    c = CounterSet()
    gm_s = build_groups(src, z_src, seed=seed + 2, metric=L2, counters=c)
    gm_t = build_groups(trg, z_trg, seed=seed + 3, metric=L2, counters=c)
    state = init_oneshot_state(gm_s, gm_t, c)
    return src, trg, gm_s, gm_t, state, c


def test_single_groups_cannot_prune():
    src, trg, gm_s, gm_t, state, c = _grouped_pair(z_src=1, z_trg=1)
    cm = filter_oneshot(gm_s, gm_t, state, TopKQuery(3), c)
    assert cm.targets[0].tolist() == [0]


def test_bound_computation_budget_exact():
    m, n, zq, zt = 1000, 2000, 10, 20
    src = gaussian_mixture(m, 4, 8, seed=0)
    trg = gaussian_mixture(n, 4, 8, seed=1)
    c = CounterSet()
    gm_s = build_groups(src, zq, seed=2, metric=L2, counters=c)
    gm_t = build_groups(trg, zt, seed=3, metric=L2, counters=c)
    init_oneshot_state(gm_s, gm_t, c)
    assert c.bound_computations == m + n + zq * zt == 3200


def test_radius_filter_keeps_only_near_blobs():
    r = np.random.default_rng(2)
    src_pts = np.vstack([r.normal(size=(40, 2)), r.normal(size=(40, 2)) + 200.0])
    trg_pts = np.vstack([r.normal(size=(40, 2)) + 3.0, r.normal(size=(40, 2)) + 203.0])
    src, trg = Dataset.from_values(src_pts), Dataset.from_values(trg_pts)
    c = CounterSet()
    gm_s = build_groups(src, 2, seed=1, metric=L2, counters=c)
    gm_t = build_groups(trg, 2, seed=1, metric=L2, counters=c)
    state = init_oneshot_state(gm_s, gm_t, c)
    radius = 20.0
    cm = filter_oneshot(gm_s, gm_t, state, RadiusQuery(radius), c)
    # every source group keeps exactly its nearby target group
    pair = brute_rows(src_pts, trg_pts, L2, CounterSet())
    for g in range(2):
        members = gm_s.membership[g]
        reachable = set()
        for t in range(2):
            cols = gm_t.membership[t]
            if (pair[np.ix_(members, cols)] <= radius).any():
                reachable.add(t)
        assert reachable <= set(cm.targets[g].tolist())
        assert len(cm.targets[g]) == 1


def test_topk_filter_never_prunes_true_members():
    src, trg, gm_s, gm_t, state, c = _grouped_pair(seed=7)
    k = 5
    cm = filter_oneshot(gm_s, gm_t, state, TopKQuery(k), c)
    pair = brute_rows(src.values, trg.values, L2, CounterSet())
    for i in range(src.n):
        g = gm_s.group_of[i]
        keep = set(cm.targets[g].tolist())
        order = np.lexsort((np.arange(trg.n), pair[i]))[:k]
        for j in order:
            assert gm_t.group_of[j] in keep, (i, j)


def test_topk_monotone_in_k():
    src, trg, gm_s, gm_t, state, c = _grouped_pair(seed=8)
    prev = None
    for k in (1, 3, 9, 27):
        cm = filter_oneshot(gm_s, gm_t, state, TopKQuery(k), c)
        sizes = [t.size for t in cm.targets]
        if prev is not None:
            assert all(a >= b for a, b in zip(sizes, prev))
        prev = sizes


def test_radius_monotone_in_radius():
    src, trg, gm_s, gm_t, state, c = _grouped_pair(seed=9)
    prev = None
    for radius in (0.5, 2.0, 8.0, 32.0):
        cm = filter_oneshot(gm_s, gm_t, state, RadiusQuery(radius), c)
        sizes = [t.size for t in cm.targets]
        if prev is not None:
            assert all(a >= b for a, b in zip(sizes, prev))
        prev = sizes


def test_oneshot_invalid_query():
    src, trg, gm_s, gm_t, state, c = _grouped_pair()
    with pytest.raises(InvalidQueryError):
        filter_oneshot(gm_s, gm_t, state, TopKQuery(10_000), c)
    with pytest.raises(InvalidQueryError):
        filter_oneshot(gm_s, gm_t, state, RadiusQuery(-1.0), c)


def test_candidate_regularity_is_structural():
    # all points of a source group share the group's candidate list by
    # construction: the matrix is indexed by group, not by point
    src, trg, gm_s, gm_t, state, c = _grouped_pair(seed=10)
    cm = filter_oneshot(gm_s, gm_t, state, TopKQuery(4), c)
    assert len(cm.targets) == gm_s.z


# -- iterative filtering ----------------------------------------------------


def test_filter_iterative_requires_seeded_state():
    state = BoundState(lb=np.zeros((2, 2)), ub=np.zeros((2, 2)), iteration=0)
    src = gaussian_mixture(10, 2, 2, seed=0)
    gm = build_groups(src, 2, seed=0, metric=L2)
    with pytest.raises(StateError):
        filter_iterative(state, np.zeros(10), RadiusQuery(1.0), gm)


def test_zero_drift_radius_candidates_stable():
    pts = gaussian_mixture(60, 3, 4, seed=4)
    c = CounterSet()
    gm = build_groups(pts, 4, seed=4, metric=L2, counters=c)
    state = init_oneshot_state(gm, gm, c)
    state.iteration = 1
    before = filter_oneshot(gm, gm, state, RadiusQuery(5.0), c)
    after = filter_iterative(state, np.zeros(60), RadiusQuery(5.0), gm, c)
    for a, b in zip(before.targets, after.targets):
        assert np.array_equal(a, b)


def test_nearest_mode_prunes_soundly():
    # synthetic step: drifted lower bound beats the weakest upper bound
    # only when no member of the group can host the new nearest target
    pts = gaussian_mixture(120, 3, 3, seed=6, center_box=40.0)
    c = CounterSet()
    gm = build_groups(pts, 6, seed=6, metric=L2, counters=c)
    k = 9
    r = np.random.default_rng(8)
    centers = pts.values[r.choice(120, size=k, replace=False)].copy()
    pair = brute_rows(pts.values, centers, L2, CounterSet())
    best = np.argmin(pair, axis=1)
    best_d = pair[np.arange(120), best]
    trg_group_of = np.arange(k) % 3
    lb = np.full((6, 3), np.inf)
    for g in range(6):
        for t in range(3):
            cols = np.flatnonzero(trg_group_of == t)
            lb[g, t] = pair[np.ix_(gm.membership[g], cols)].min()
    state = BoundState(
        lb=lb.copy(),
        prev_best_dist=best_d,
        prev_best_target=best,
        target_group_of=trg_group_of,
        iteration=1,
    )
    drift = np.abs(r.normal(size=k)) * 0.1
    moved = centers + r.normal(size=centers.shape) * 0.0
    cm = filter_iterative(state, drift, TopKQuery(1), gm, c)
    # unmoved targets: pruned groups really contain no nearest target
    new_pair = brute_rows(pts.values, moved, L2, CounterSet())
    new_best = np.argmin(new_pair, axis=1)
    for i in range(120):
        g = gm.group_of[i]
        assert trg_group_of[new_best[i]] in set(cm.targets[g].tolist())


def test_measured_saving_bounds():
    assert measured_saving(100, 10, 10) == 0.0
    assert measured_saving(0, 10, 10) == 1.0
    with pytest.raises(RangeError):
        measured_saving(0, 0, 5)
