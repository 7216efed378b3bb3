import numpy as np
import pytest

from accd.ddsl.lowering import ExecutionPlan, SelectSpec

KMEANS_LISTING = """DVar K int 10;
DVar D int 20;
DVar psize int 1400;
DVar csize int 200;
DSet pSet float psize D;
DSet cSet float csize D;
DSet distMat float psize csize;
DSet idMat int psize csize;
DSet pkMat int psize K;
AccD_Iter(S){
    S = false;
    /* Compute the inter-dataset distances */
    AccD_Comp_Dist(pSet, cSet, distMat, idMat, D, "Unweighted L1", 0);
    /* Select the distances of interests */
    AccD_Dist_Select(distMat, idMat, K, "smallest", pkMat);
    /* Update the cluster center */
    AccD_Update(cSet, pSet, pkMat, S)
}
"""


def make_plan(
    kind: str,
    n1: int,
    n2: int,
    d: int,
    select: SelectSpec,
    max_iter=None,
    metric="Unweighted L2",
    exit_on_status=False,
) -> ExecutionPlan:
    self_set = kind == "iterative_self_set"
    return ExecutionPlan(
        pipeline_kind=kind,
        source_set="src",
        target_set="src" if self_set else "trg",
        source_size=n1,
        target_size=n2,
        dim=d,
        metric_name=metric,
        weight_set=None,
        select=select,
        update_targets=("src",) if self_set else (("trg",) if kind != "oneshot_two_set" else ()),
        max_iter=max_iter,
        exit_on_status=exit_on_status,
        status_var="S" if exit_on_status else None,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
