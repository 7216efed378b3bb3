"""Lower a CheckedProgram into an executable pipeline description.

Classification rules:

* iteration + distinct source/target sets  -> iterative_two_set
* iteration + source set == target set     -> iterative_self_set
* no iteration                             -> oneshot_two_set

Two-set pipelines take an integer top-K range; self-set pipelines take a
positive float radius. Anything else is rejected as unsupported rather
than silently guessed at.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import UnsupportedProgramError
from ..metrics import METRIC_NAMES, MetricSpec
from .ast import ComputeDist, DistSelect, Iter, Program, Update, VarDecl
from .validator import CheckedProgram

PIPELINE_KINDS = ("iterative_two_set", "oneshot_two_set", "iterative_self_set")


@dataclass(frozen=True)
class SelectSpec:
    kind: str  # "count" | "radius"
    value: float
    scope: str


@dataclass(frozen=True)
class ExecutionPlan:
    pipeline_kind: str
    source_set: str
    target_set: str
    source_size: int
    target_size: int
    dim: int
    metric_name: str
    weight_set: str | None
    select: SelectSpec
    update_targets: tuple[str, ...]
    max_iter: int | None  # None when exit is status-driven
    exit_on_status: bool
    status_var: str | None = None
    declared_dtype: str = "float32"

    def metric_spec(self, weights=None) -> MetricSpec:
        spec = MetricSpec.from_name(self.metric_name, weights=weights)
        return spec

    def to_json_dict(self) -> dict:
        return {
            "pipeline_kind": self.pipeline_kind,
            "source_set": self.source_set,
            "target_set": self.target_set,
            "source_size": self.source_size,
            "target_size": self.target_size,
            "dim": self.dim,
            "metric": self.metric_name,
            "weight_set": self.weight_set,
            "select": {
                "kind": self.select.kind,
                "value": self.select.value,
                "scope": self.select.scope,
            },
            "update_targets": list(self.update_targets),
            "max_iter": self.max_iter,
            "exit_on_status": self.exit_on_status,
            "status_var": self.status_var,
            "declared_dtype": self.declared_dtype,
        }


@dataclass
class _Shape:
    compdists: list[ComputeDist] = field(default_factory=list)
    selects: list[DistSelect] = field(default_factory=list)
    updates: list[Update] = field(default_factory=list)
    iter_node: Iter | None = None


def _collect(program: Program) -> _Shape:
    shape = _Shape()
    for c in program.body:
        if isinstance(c, Iter):
            if shape.iter_node is not None:
                raise UnsupportedProgramError("multiple iteration blocks are not supported")
            shape.iter_node = c
            for sub in c.body:
                _bucket(shape, sub)
        else:
            _bucket(shape, c)
    return shape


def _bucket(shape: _Shape, c) -> None:
    if isinstance(c, ComputeDist):
        shape.compdists.append(c)
    elif isinstance(c, DistSelect):
        shape.selects.append(c)
    elif isinstance(c, Update):
        shape.updates.append(c)


def _select_value(cp: CheckedProgram, sel: DistSelect) -> float | int:
    if sel.rng.value is not None:
        return sel.rng.value
    decl = cp.symbols[sel.rng.name]
    assert isinstance(decl, VarDecl) and decl.init is not None
    return decl.init


def lower(cp: CheckedProgram) -> ExecutionPlan:
    shape = _collect(cp.program)
    if len(shape.compdists) != 1:
        raise UnsupportedProgramError(
            f"expected exactly one AccD_Comp_Dist, found {len(shape.compdists)}"
        )
    if len(shape.selects) != 1:
        raise UnsupportedProgramError(
            f"expected exactly one AccD_Dist_Select, found {len(shape.selects)}"
        )
    comp = shape.compdists[0]
    sel = shape.selects[0]
    iter_node = shape.iter_node

    self_set = comp.p1 == comp.p2
    if iter_node is None:
        kind = "oneshot_two_set"
        if shape.updates:
            raise UnsupportedProgramError("AccD_Update outside an iteration block")
    elif self_set:
        kind = "iterative_self_set"
    else:
        kind = "iterative_two_set"

    value = _select_value(cp, sel)
    range_kind = "radius" if isinstance(value, float) else "count"
    if kind == "iterative_self_set" and range_kind != "radius":
        raise UnsupportedProgramError(
            "self-set iteration requires a float radius range"
        )
    if kind != "iterative_self_set" and range_kind != "count":
        raise UnsupportedProgramError(f"{kind} requires an integer top-K range")
    if sel.scope != "smallest":
        raise UnsupportedProgramError(
            'only scope "smallest" is executable; "largest" is selection-only'
        )

    if iter_node is not None and not shape.updates:
        raise UnsupportedProgramError("iterative pipelines require an AccD_Update")
    update_targets = tuple(u.args[0] for u in shape.updates)
    if kind == "iterative_two_set" and any(t != comp.p2 for t in update_targets):
        raise UnsupportedProgramError(
            "two-set iteration must update the target set"
        )
    if kind == "iterative_self_set" and any(t != comp.p1 for t in update_targets):
        raise UnsupportedProgramError("self-set iteration must update its own set")

    max_iter = None
    exit_on_status = False
    status_var = None
    if iter_node is not None:
        if iter_node.is_status_mode:
            exit_on_status = True
            status_var = iter_node.condition.name
        else:
            max_iter = iter_node.condition.value

    n1, d1 = cp.set_shape(comp.p1)
    n2, _ = cp.set_shape(comp.p2)
    weighted = METRIC_NAMES[comp.metric][1]
    return ExecutionPlan(
        pipeline_kind=kind,
        source_set=comp.p1,
        target_set=comp.p2,
        source_size=n1,
        target_size=n2,
        dim=d1,
        metric_name=comp.metric,
        weight_set=comp.weights.name if weighted else None,
        select=SelectSpec(kind=range_kind, value=float(value), scope=sel.scope),
        update_targets=update_targets,
        max_iter=max_iter,
        exit_on_status=exit_on_status,
        status_var=status_var,
        declared_dtype=cp.symbols[comp.p1].dtype,
    )
