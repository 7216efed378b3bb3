from .ast import (
    ComputeDist,
    DistSelect,
    Iter,
    Program,
    SetDecl,
    StatusAssign,
    Update,
    VarDecl,
)
from .lowering import ExecutionPlan, lower
from .parser import parse
from .printer import pretty_print
from .validator import CheckedProgram, validate

__all__ = [
    "ComputeDist",
    "DistSelect",
    "Iter",
    "Program",
    "SetDecl",
    "StatusAssign",
    "Update",
    "VarDecl",
    "ExecutionPlan",
    "lower",
    "parse",
    "pretty_print",
    "CheckedProgram",
    "validate",
]
