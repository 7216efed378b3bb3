"""Run-wide computation tallies.

Every code path that evaluates a true point-to-point distance bumps
``point_distances`` exactly once; distances evaluated only to feed bound
computations (landmark pairs, point-to-landmark offsets, drifts) go to
``bound_computations``; the throwaway work of building groups goes to
``grouping_distances``. Avoided point-pair work is split into three
mutually exclusive buckets so per-iteration conservation can be checked:
pruned by bounds, resolved as all-inside, or carried over because nothing
moved.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, fields


@dataclass
class CounterSet:
    point_distances: int = 0
    bound_computations: int = 0
    grouping_distances: int = 0
    pruned_pairs: int = 0
    all_inside_pairs: int = 0
    reused_pairs: int = 0
    mac_ops: int = 0
    tiles_executed: int = 0
    bytes_streamed: int = 0

    def add(self, other: "CounterSet") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def snapshot(self) -> "CounterSet":
        return CounterSet(**self.as_dict())

    def delta_since(self, base: "CounterSet") -> "CounterSet":
        return CounterSet(
            **{f.name: getattr(self, f.name) - getattr(base, f.name) for f in fields(self)}
        )

    def reset(self) -> None:
        for f in fields(self):
            setattr(self, f.name, 0)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Default tally for bare calls outside a pipeline run. Guarded so
# concurrent bare callers do not lose increments; pipelines use their own
# per-run CounterSet instances instead.
GLOBAL_COUNTERS = CounterSet()
_global_lock = threading.Lock()


def global_counters() -> CounterSet:
    return GLOBAL_COUNTERS


def reset_global_counters() -> None:
    with _global_lock:
        GLOBAL_COUNTERS.reset()
