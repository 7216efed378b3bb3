"""End-to-end pipeline execution.

Three pipeline shapes are supported: iterative two-set (cluster-style),
one-shot two-set (top-K join), and iterative self-set (radius neighbors
with movement). Each run wires group construction, bound filtering,
layout packing, and the blocked kernel together, tallies every avoided or
executed point-pair, and can shadow a brute-force oracle that must agree
exactly.

Numerical discipline that keeps layout on/off runs bitwise identical:
group tiles always present member rows in ascending original-id order
(packed slices are laid out that way), and all cross-point reductions
(centroid means, force accumulation) happen in original point order.
The physics update of the self-set pipeline is deliberately outside the
distance-counter discipline; only neighbor search is counted and verified.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .counters import CounterSet
from .dataset import Dataset, TopKResult, rowwise_lexsort
from .ddsl.lowering import ExecutionPlan
from .errors import (
    InvalidQueryError,
    OracleMismatchError,
    RangeError,
    UnsupportedProgramError,
)
from .explorer import DesignConfig
from .gti import (
    BoundState,
    CandidateMatrix,
    GroupModel,
    RadiusQuery,
    TopKQuery,
    build_groups,
    filter_iterative,
    filter_oneshot,
    init_oneshot_state,
    measured_saving,
)
from .kernel import KernelConfig, rss as kernel_rss, tile_distances
from .kernel import weighted_rss
from .layout import DEFAULT_BANKS, LayoutPlan, pack_intra_group, reorder_inter_group
from .metrics import MetricSpec, rowwise_distance
from .oracles import group_means, knn_topk, nearest_assign, radius_neighbors

DEFAULT_DESIGN = DesignConfig(n_src_grp=64, n_trg_grp=8, blk=64, simd=1, unroll=1)


@dataclass
class RunConfig:
    design: DesignConfig = DEFAULT_DESIGN
    seed: int = 0
    layout_enabled: bool = True
    oracle_mode: str = "off"  # "off" | "shadow"
    thread_count: int = 1
    n_banks: int = DEFAULT_BANKS
    status_iter_cap: int = 1000  # hard stop for status-exit iteration
    dt: float = 1e-3  # self-set integrator step
    softening: float = 1e-2  # force-law smoothing length

    def __post_init__(self):
        if self.thread_count < 1:
            raise RangeError("thread_count must be >= 1")
        if self.oracle_mode not in ("off", "shadow"):
            raise RangeError(f"unknown oracle mode {self.oracle_mode!r}")

    def kernel_config(self) -> KernelConfig:
        return KernelConfig(
            blk=self.design.blk, simd=self.design.simd, unroll=self.design.unroll
        )


@dataclass
class IterationStats:
    iteration: int
    point_distances: int
    bound_computations: int
    pruned_pairs: int
    all_inside_pairs: int
    reused_pairs: int
    measured_saving: float
    source_batches: int
    source_groups: int
    changed: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "point_distances": self.point_distances,
            "bound_computations": self.bound_computations,
            "pruned_pairs": self.pruned_pairs,
            "all_inside_pairs": self.all_inside_pairs,
            "reused_pairs": self.reused_pairs,
            "measured_saving": self.measured_saving,
            "source_batches": self.source_batches,
            "source_groups": self.source_groups,
            "changed": self.changed,
        }


@dataclass
class RunResult:
    pipeline_kind: str
    outputs: dict
    iterations: int
    per_iteration: list[IterationStats]
    counters: CounterSet
    measured_saving_mean: float
    wall_time_s: float
    oracle_checked: bool
    layout: LayoutPlan | None = None


@dataclass
class _Grouped:
    """Uniform row access over a grouped dataset, packed or not.

    Group members are always presented in ascending original-id order, so
    tiles are bitwise identical with layout on or off.
    """

    values: np.ndarray  # original order
    gm: GroupModel
    plan: LayoutPlan | None
    packed: np.ndarray | None = None
    rss_orig: np.ndarray | None = None
    rss_packed: np.ndarray | None = None

    @classmethod
    def build(cls, ds: Dataset, gm: GroupModel, plan: LayoutPlan | None, metric: MetricSpec):
        packed = ds.values[plan.point_perm] if plan is not None else None
        rss_orig = None
        rss_packed = None
        if metric.kind == "L2":
            rss_orig = (
                kernel_rss(ds.values)
                if not metric.weighted
                else weighted_rss(ds.values, metric.weights)
            )
            if plan is not None:
                rss_packed = rss_orig[plan.point_perm]
        return cls(
            values=ds.values,
            gm=gm,
            plan=plan,
            packed=packed,
            rss_orig=rss_orig,
            rss_packed=rss_packed,
        )

    def batch_ids(self, batch: list[int]) -> np.ndarray:
        return np.concatenate([self.gm.membership[g] for g in batch])

    def batch_rows(self, batch: list[int]) -> tuple[np.ndarray, np.ndarray | None]:
        """(values, rss) for the batch's member rows."""
        if self.plan is not None:
            start = self.plan.group_slices[batch[0]][0]
            stop = self.plan.group_slices[batch[-1]][1]
            rows = self.packed[start:stop]
            rss_rows = self.rss_packed[start:stop] if self.rss_packed is not None else None
            return rows, rss_rows
        ids = self.batch_ids(batch)
        return self.values[ids], self.rss_orig[ids] if self.rss_orig is not None else None

    def group_rows(self, g: int) -> tuple[np.ndarray, np.ndarray | None]:
        return self.batch_rows([g])


def _source_batches(
    order: np.ndarray, cm: CandidateMatrix, layout_enabled: bool
) -> list[list[int]]:
    """Runs of adjacent groups (in processing order) with identical
    candidate lists; without layout every group stands alone."""
    if not layout_enabled:
        return [[int(g)] for g in order]
    batches: list[list[int]] = []
    current = [int(order[0])]
    for g in order[1:]:
        g = int(g)
        if cm.key(g) == cm.key(current[-1]):
            current.append(g)
        else:
            batches.append(current)
            current = [g]
    batches.append(current)
    return batches


def _map_ordered(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _check_kind(plan: ExecutionPlan, expected: str) -> None:
    if plan.pipeline_kind != expected:
        raise UnsupportedProgramError(
            f"plan is {plan.pipeline_kind}, runner expects {expected}"
        )


def _mean_saving(per_iter: list[IterationStats]) -> float:
    if not per_iter:
        return 0.0
    return float(np.mean([s.measured_saving for s in per_iter]))


# -- iterative two-set (cluster refinement) -------------------------------


def run_kmeans(
    plan: ExecutionPlan,
    points: Dataset,
    config: RunConfig,
    initial_clusters: np.ndarray | None = None,
    weights: np.ndarray | None = None,
) -> RunResult:
    """Lloyd-style iteration with trace/group-level bound pruning.

    Iteration 1 runs unpruned to seed the bounds; later iterations decay
    them by the per-cluster drift. Assignment is the nearest cluster under
    (distance, id) tie-break; centroids are member means; empty clusters
    keep their position. Exit on unchanged assignments or the iteration
    cap.
    """
    _check_kind(plan, "iterative_two_set")
    t0 = time.perf_counter()
    metric = plan.metric_spec(weights)
    n, d = points.n, points.d
    metric.check_dim(d)
    rng = np.random.default_rng(config.seed)
    if initial_clusters is None:
        k = plan.target_size
        if k < 1 or k > n:
            raise RangeError(f"cluster count {k} out of range 1..{n}")
        centroids = points.values[np.sort(rng.choice(n, size=k, replace=False))].copy()
    else:
        centroids = np.array(initial_clusters, dtype=np.float64, copy=True)
        k = centroids.shape[0]
    if centroids.shape[1] != d:
        raise RangeError(f"cluster dim {centroids.shape[1]} does not match data dim {d}")

    counters = CounterSet()
    kcfg = config.kernel_config()
    z_src = min(config.design.n_src_grp, n)
    z_trg = min(config.design.n_trg_grp, k)
    src_gm = build_groups(points, z_src, config.seed + 1, metric, counters)
    trg_gm = build_groups(Dataset.from_values(centroids), z_trg, config.seed + 2, metric, counters)
    trg_group_of = trg_gm.group_of
    trg_members = trg_gm.membership  # cluster-id groups, fixed across iterations
    trg_sizes = trg_gm.sizes

    full_cm = CandidateMatrix.full(z_src, z_trg)
    order = (
        reorder_inter_group(full_cm) if config.layout_enabled else np.arange(z_src)
    )
    lplan = (
        pack_intra_group(points, src_gm, config.n_banks, order)
        if config.layout_enabled
        else None
    )
    grouped = _Grouped.build(points, src_gm, lplan, metric)

    max_iter = plan.max_iter if plan.max_iter is not None else config.status_iter_cap
    state = BoundState(
        lb=np.zeros((z_src, z_trg)),
        target_group_of=trg_group_of,
        iteration=0,
    )
    per_iter: list[IterationStats] = []
    assignments: np.ndarray | None = None
    oracle_centroids = centroids.copy() if config.oracle_mode == "shadow" else None
    executed = 0

    for it in range(1, max_iter + 1):
        executed = it
        base = counters.snapshot()
        reused_iteration = False
        if it == 1:
            cm = CandidateMatrix.full(z_src, z_trg)
            point_ub = None
        else:
            drifts = rowwise_distance(prev_centroids, centroids, metric)
            counters.bound_computations += k
            if float(drifts.max()) == 0.0:
                reused_iteration = True
            else:
                cm = filter_iterative(
                    state, drifts, TopKQuery(1), src_gm, counters, trg_sizes=trg_sizes
                )
                point_ub = state.point_ub

        if reused_iteration:
            counters.reused_pairs += n * k
            new_assign = assignments
            best_d = state.prev_best_dist
            n_batches = 0
        else:
            crss = None
            if metric.kind == "L2":
                crss = (
                    kernel_rss(centroids)
                    if not metric.weighted
                    else weighted_rss(centroids, metric.weights)
                )
            batches = _source_batches(order, cm, config.layout_enabled)
            n_batches = len(batches)
            best_d = np.full(n, np.inf)
            best_id = np.full(n, -1, dtype=np.int64)
            comp_min = np.full((z_src, z_trg), np.inf)
            covered = np.zeros((z_src, z_trg), dtype=bool)

            def process_batch(batch: list[int]) -> CounterSet:
                local = CounterSet()
                ids = grouped.batch_ids(batch)
                if ids.size == 0:
                    return local
                rows, rss_rows = grouped.batch_rows(batch)
                cand = cm.targets[batch[0]]
                if cand.size == 0:
                    return local
                key = np.min(state.lb[np.asarray(batch)][:, cand], axis=0)
                visit = cand[np.lexsort((cand, key))]
                group_of_ids = src_gm.group_of[ids]
                for bt in visit:
                    bt = int(bt)
                    members = trg_members[bt]
                    if members.size == 0:
                        continue
                    if point_ub is None:
                        act = np.arange(ids.size)
                    else:
                        lb_pt = state.lb[group_of_ids, bt]
                        act = np.flatnonzero(point_ub[ids] >= lb_pt)
                        local.pruned_pairs += (ids.size - act.size) * members.size
                    if act.size == 0:
                        continue
                    tile = tile_distances(
                        rows[act],
                        centroids[members],
                        metric,
                        kcfg,
                        local,
                        rss_rows[act] if rss_rows is not None else None,
                        crss[members] if crss is not None else None,
                    )
                    col = np.argmin(tile, axis=1)
                    mn = tile[np.arange(act.size), col]
                    cid = members[col]
                    ids_act = ids[act]
                    cur_d = best_d[ids_act]
                    cur_i = best_id[ids_act]
                    better = (mn < cur_d) | ((mn == cur_d) & (cid < cur_i))
                    upd = ids_act[better]
                    best_d[upd] = mn[better]
                    best_id[upd] = cid[better]
                    g_act = group_of_ids[act]
                    for g in batch:
                        rows_g = np.flatnonzero(g_act == g)
                        if rows_g.size == 0:
                            continue
                        comp_min[g, bt] = min(comp_min[g, bt], float(tile[rows_g].min()))
                        if rows_g.size == src_gm.membership[g].size:
                            covered[g, bt] = True
                return local

            for local in _map_ordered(process_batch, batches, config.thread_count):
                counters.add(local)
            assert np.all(best_id >= 0), "nearest-target invariant violated"
            new_assign = best_id
            refreshed = np.where(comp_min < np.inf, np.minimum(state.lb, comp_min), state.lb)
            state.lb = np.where(covered, comp_min, refreshed)
            if it == 1:
                state.lb = comp_min  # full pass covers everything

        changed = (
            n if assignments is None else int(np.count_nonzero(new_assign != assignments))
        )
        assignments = new_assign
        state.prev_best_dist = best_d
        state.prev_best_target = assignments
        state.iteration = it

        if config.oracle_mode == "shadow":
            oracle_assign, _ = nearest_assign(
                points.values, oracle_centroids, metric, CounterSet()
            )
            diff = np.flatnonzero(oracle_assign != assignments)
            if diff.size:
                i = int(diff[0])
                raise OracleMismatchError(
                    f"iteration {it}: point {i} assigned {int(assignments[i])}, "
                    f"oracle says {int(oracle_assign[i])}",
                    detail={"iteration": it, "point": i},
                )
            oracle_centroids = group_means(points.values, oracle_assign, k, oracle_centroids)

        prev_centroids = centroids
        centroids = group_means(points.values, assignments, k, centroids)

        delta = counters.delta_since(base)
        per_iter.append(
            IterationStats(
                iteration=it,
                point_distances=delta.point_distances,
                bound_computations=delta.bound_computations,
                pruned_pairs=delta.pruned_pairs,
                all_inside_pairs=delta.all_inside_pairs,
                reused_pairs=delta.reused_pairs,
                measured_saving=measured_saving(delta.point_distances, n, k),
                source_batches=n_batches,
                source_groups=z_src,
                changed=changed,
            )
        )
        if changed == 0:
            break

    return RunResult(
        pipeline_kind="iterative_two_set",
        outputs={"assignments": assignments, "centroids": centroids},
        iterations=executed,
        per_iteration=per_iter,
        counters=counters,
        measured_saving_mean=_mean_saving(per_iter),
        wall_time_s=time.perf_counter() - t0,
        oracle_checked=config.oracle_mode == "shadow",
        layout=lplan,
    )


# -- one-shot two-set (top-K join) ----------------------------------------


def run_knn_join(
    plan: ExecutionPlan,
    src: Dataset,
    trg: Dataset,
    config: RunConfig,
    weights: np.ndarray | None = None,
) -> RunResult:
    """Exact top-K join: group both sets, filter group pairs through the
    two-landmark bounds, then refine per point with a running k-th-best
    threshold. Self-matches are kept (a point joined against its own set
    finds itself at distance zero)."""
    _check_kind(plan, "oneshot_two_set")
    t0 = time.perf_counter()
    metric = plan.metric_spec(weights)
    if src.d != trg.d:
        raise RangeError(f"source dim {src.d} != target dim {trg.d}")
    metric.check_dim(src.d)
    k = int(plan.select.value)
    if k < 1 or k > trg.n:
        raise InvalidQueryError(f"top-K count {k} out of range for {trg.n} targets")

    counters = CounterSet()
    kcfg = config.kernel_config()
    m, n = src.n, trg.n
    z_src = min(config.design.n_src_grp, m)
    z_trg = min(config.design.n_trg_grp, n)
    src_gm = build_groups(src, z_src, config.seed + 1, metric, counters)
    trg_gm = build_groups(trg, z_trg, config.seed + 2, metric, counters)
    state = init_oneshot_state(src_gm, trg_gm, counters)
    cm = filter_oneshot(src_gm, trg_gm, state, TopKQuery(k), counters)

    order = reorder_inter_group(cm) if config.layout_enabled else np.arange(z_src)
    src_lp = (
        pack_intra_group(src, src_gm, config.n_banks, order)
        if config.layout_enabled
        else None
    )
    trg_lp = (
        pack_intra_group(trg, trg_gm, config.n_banks) if config.layout_enabled else None
    )
    g_src = _Grouped.build(src, src_gm, src_lp, metric)
    g_trg = _Grouped.build(trg, trg_gm, trg_lp, metric)

    sentinel = n  # one past any real target id; always loses ties
    top_d = np.full((m, k), np.inf)
    top_i = np.full((m, k), sentinel, dtype=np.int64)
    batches = _source_batches(order, cm, config.layout_enabled)

    def process_batch(batch: list[int]) -> CounterSet:
        local = CounterSet()
        ids = g_src.batch_ids(batch)
        if ids.size == 0:
            return local
        rows, rss_rows = g_src.batch_rows(batch)
        cand = cm.targets[batch[0]]
        if cand.size == 0:
            return local
        key = np.min(state.lb[np.asarray(batch)][:, cand], axis=0)
        visit = cand[np.lexsort((cand, key))]
        group_of_ids = src_gm.group_of[ids]
        for bt in visit:
            bt = int(bt)
            col_ids = trg_gm.membership[bt]
            if col_ids.size == 0:
                continue
            lb_pt = state.lb[group_of_ids, bt]
            kth = top_d[ids, k - 1]
            act = np.flatnonzero(kth >= lb_pt)
            local.pruned_pairs += (ids.size - act.size) * col_ids.size
            if act.size == 0:
                continue
            cols, rss_cols = g_trg.group_rows(bt)
            tile = tile_distances(
                rows[act],
                cols,
                metric,
                kcfg,
                local,
                rss_rows[act] if rss_rows is not None else None,
                rss_cols,
            )
            ids_act = ids[act]
            cat_d = np.concatenate([top_d[ids_act], tile], axis=1)
            cat_i = np.concatenate(
                [top_i[ids_act], np.broadcast_to(col_ids, tile.shape)], axis=1
            )
            sel = rowwise_lexsort(cat_d, cat_i)[:, :k]
            top_d[ids_act] = np.take_along_axis(cat_d, sel, axis=1)
            top_i[ids_act] = np.take_along_axis(cat_i, sel, axis=1)
        return local

    for local in _map_ordered(process_batch, batches, config.thread_count):
        counters.add(local)

    result = TopKResult(ids=top_i, distances=top_d, scope="smallest", row_ids=src.ids.copy())

    oracle_checked = False
    if config.oracle_mode == "shadow":
        oracle_checked = True
        o_ids, _ = knn_topk(src.values, trg.values, metric, k, CounterSet())
        ours = np.sort(top_i, axis=1)
        theirs = np.sort(o_ids, axis=1)
        diff = np.flatnonzero(np.any(ours != theirs, axis=1))
        if diff.size:
            i = int(diff[0])
            raise OracleMismatchError(
                f"source point {i}: top-{k} set differs from oracle",
                detail={"point": i, "got": ours[i].tolist(), "want": theirs[i].tolist()},
            )

    stats = IterationStats(
        iteration=1,
        point_distances=counters.point_distances,
        bound_computations=counters.bound_computations,
        pruned_pairs=counters.pruned_pairs,
        all_inside_pairs=counters.all_inside_pairs,
        reused_pairs=counters.reused_pairs,
        measured_saving=measured_saving(counters.point_distances, m, n),
        source_batches=len(batches),
        source_groups=z_src,
    )
    return RunResult(
        pipeline_kind="oneshot_two_set",
        outputs={"topk": result},
        iterations=1,
        per_iteration=[stats],
        counters=counters,
        measured_saving_mean=stats.measured_saving,
        wall_time_s=time.perf_counter() - t0,
        oracle_checked=oracle_checked,
        layout=src_lp,
    )


# -- iterative self-set (radius neighbors with movement) -------------------


def default_force_rule(
    pos: np.ndarray, nbr_i: np.ndarray, nbr_j: np.ndarray, softening: float
) -> np.ndarray:
    """Softened inverse-square attraction over the neighbor pairs, unit
    mass. A demonstration update rule; neighbor search is the verified
    part, the physics is pluggable."""
    acc = np.zeros_like(pos)
    if nbr_i.size == 0:
        return acc
    diff = pos[nbr_j] - pos[nbr_i]
    r2 = np.add.reduce(diff * diff, axis=1) + softening * softening
    contrib = diff * (r2**-1.5)[:, None]
    np.add.at(acc, nbr_i, contrib)
    return acc


def run_nbody(
    plan: ExecutionPlan,
    particles: Dataset,
    config: RunConfig,
    force_rule=None,
    weights: np.ndarray | None = None,
) -> RunResult:
    """Fixed-radius neighbor search per step with trace-bound reuse.

    Step 1 computes all pair distances to seed group-pair bounds; later
    steps decay the bounds by group drift and only recompute surviving
    pairs. Group pairs whose upper bound stays inside the radius
    contribute every member pair with no distance work; pairs whose groups
    have not moved since last computed reuse their cached neighbor lists.
    """
    _check_kind(plan, "iterative_self_set")
    t0 = time.perf_counter()
    metric = plan.metric_spec(weights)
    radius = float(plan.select.value)
    if radius <= 0:
        raise RangeError("radius must be positive")
    n, d = particles.n, particles.d
    metric.check_dim(d)
    steps = plan.max_iter if plan.max_iter is not None else config.status_iter_cap
    force = force_rule if force_rule is not None else default_force_rule

    counters = CounterSet()
    kcfg = config.kernel_config()
    z = min(config.design.n_src_grp, n)
    gm = build_groups(particles, z, config.seed + 1, metric, counters)
    lplan = (
        pack_intra_group(particles, gm, config.n_banks) if config.layout_enabled else None
    )
    order = np.arange(z)
    sizes = gm.sizes

    pos = particles.values.copy()
    vel = np.zeros_like(pos)
    state = BoundState(lb=np.zeros((z, z)), ub=np.zeros((z, z)), iteration=0)
    versions = np.zeros(z, dtype=np.int64)
    pair_cache: dict[tuple[int, int], tuple[int, int, np.ndarray, np.ndarray]] = {}

    neighbors_per_step: list[list[np.ndarray]] = []
    trajectories: list[np.ndarray] = [pos.copy()]
    per_iter: list[IterationStats] = []
    prev_drift: np.ndarray | None = None

    for step in range(1, steps + 1):
        base = counters.snapshot()
        grouped = _Grouped.build(Dataset.from_values(pos), gm, lplan, metric)
        if step == 1:
            cm = CandidateMatrix.full(z, z)
        else:
            counters.bound_computations += n  # drift distances recorded at integration
            cm = filter_iterative(state, prev_drift, RadiusQuery(radius), gm, counters)

        batches = _source_batches(order, cm, config.layout_enabled)
        pair_i: list[np.ndarray] = []
        pair_j: list[np.ndarray] = []

        def process_batch(batch: list[int]):
            local = CounterSet()
            out_i: list[np.ndarray] = []
            out_j: list[np.ndarray] = []
            lb_updates = []
            for a in batch:
                rows_a = gm.membership[a]
                if rows_a.size == 0:
                    continue
                vals_a, rss_a = grouped.group_rows(a)
                cand = cm.targets[a]
                inside = cm.all_inside[a] if cm.all_inside is not None else None
                for pos_b, b in enumerate(cand):
                    b = int(b)
                    rows_b = gm.membership[b]
                    if rows_b.size == 0:
                        continue
                    if inside is not None and inside[pos_b]:
                        local.all_inside_pairs += rows_a.size * rows_b.size
                        out_i.append(np.repeat(rows_a, rows_b.size))
                        out_j.append(np.tile(rows_b, rows_a.size))
                        continue
                    cached = pair_cache.get((a, b))
                    if cached is not None and cached[0] == versions[a] and cached[1] == versions[b]:
                        local.reused_pairs += rows_a.size * rows_b.size
                        out_i.append(cached[2])
                        out_j.append(cached[3])
                        continue
                    vals_b, rss_b = grouped.group_rows(b)
                    tile = tile_distances(vals_a, vals_b, metric, kcfg, local, rss_a, rss_b)
                    hit_r, hit_c = np.nonzero(tile <= radius)
                    pi = rows_a[hit_r]
                    pj = rows_b[hit_c]
                    out_i.append(pi)
                    out_j.append(pj)
                    pair_cache[(a, b)] = (int(versions[a]), int(versions[b]), pi, pj)
                    lb_updates.append((a, b, float(tile.min()), float(tile.max())))
            return local, out_i, out_j, lb_updates

        for local, out_i, out_j, lb_updates in _map_ordered(
            process_batch, batches, config.thread_count
        ):
            counters.add(local)
            pair_i.extend(out_i)
            pair_j.extend(out_j)
            for a, b, lo, hi in lb_updates:
                state.lb[a, b] = lo
                state.ub[a, b] = hi

        if pair_i:
            all_i = np.concatenate(pair_i)
            all_j = np.concatenate(pair_j)
        else:
            all_i = np.empty(0, dtype=np.int64)
            all_j = np.empty(0, dtype=np.int64)
        keep = all_i != all_j
        all_i, all_j = all_i[keep], all_j[keep]
        sort = np.lexsort((all_j, all_i))
        all_i, all_j = all_i[sort], all_j[sort]
        offsets = np.searchsorted(all_i, np.arange(n + 1))
        lists = [all_j[offsets[i] : offsets[i + 1]] for i in range(n)]
        neighbors_per_step.append(lists)
        state.iteration = step

        if config.oracle_mode == "shadow":
            want = radius_neighbors(pos, metric, radius, CounterSet())
            for i in range(n):
                if not np.array_equal(lists[i], want[i]):
                    raise OracleMismatchError(
                        f"step {step}: neighbor list of point {i} differs from oracle",
                        detail={
                            "step": step,
                            "point": i,
                            "got": lists[i].tolist(),
                            "want": want[i].tolist(),
                        },
                    )

        # Integrate in original point order; movement feeds the next
        # step's bound decay.
        acc = force(pos, all_i, all_j, config.softening)
        vel = vel + acc * config.dt
        new_pos = pos + vel * config.dt
        prev_drift = rowwise_distance(pos, new_pos, metric)
        moved = np.zeros(z, dtype=bool)
        np.logical_or.at(moved, gm.group_of, prev_drift > 0)
        versions[moved] += 1
        pos = new_pos
        trajectories.append(pos.copy())

        delta = counters.delta_since(base)
        per_iter.append(
            IterationStats(
                iteration=step,
                point_distances=delta.point_distances,
                bound_computations=delta.bound_computations,
                pruned_pairs=delta.pruned_pairs,
                all_inside_pairs=delta.all_inside_pairs,
                reused_pairs=delta.reused_pairs,
                measured_saving=measured_saving(delta.point_distances, n, n),
                source_batches=len(batches),
                source_groups=z,
            )
        )

    return RunResult(
        pipeline_kind="iterative_self_set",
        outputs={"neighbors": neighbors_per_step, "trajectories": trajectories},
        iterations=steps,
        per_iteration=per_iter,
        counters=counters,
        measured_saving_mean=_mean_saving(per_iter),
        wall_time_s=time.perf_counter() - t0,
        oracle_checked=config.oracle_mode == "shadow",
        layout=lplan,
    )


def run_plan(
    plan: ExecutionPlan,
    src: Dataset,
    trg: Dataset | None = None,
    config: RunConfig | None = None,
    weights: np.ndarray | None = None,
    initial_clusters: np.ndarray | None = None,
) -> RunResult:
    """Dispatch a lowered plan to its pipeline runner."""
    config = config or RunConfig()
    if plan.pipeline_kind == "iterative_two_set":
        init = initial_clusters if initial_clusters is not None else (
            trg.values if trg is not None else None
        )
        return run_kmeans(plan, src, config, initial_clusters=init, weights=weights)
    if plan.pipeline_kind == "oneshot_two_set":
        if trg is None:
            trg = src
        return run_knn_join(plan, src, trg, config, weights=weights)
    if plan.pipeline_kind == "iterative_self_set":
        if trg is not None:
            raise UnsupportedProgramError("self-set pipelines take a single dataset")
        return run_nbody(plan, src, config, weights=weights)
    raise UnsupportedProgramError(f"unknown pipeline kind {plan.pipeline_kind}")
