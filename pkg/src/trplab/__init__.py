"""Random Latin squares via the triangle removal process on K_{n,n,n}."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ParseError,
    Part,
    PartialLatinSquare,
    Triple,
    Vertex,
    Violation,
    cyclic_square,
    decode,
    encode,
    validate,
)
from .engine import Frozen, LeaveGraph, RunOutcome, TrpState, history_probability, leave_from, run  # noqa: E402

__all__ = [
    "Frozen",
    "LeaveGraph",
    "ParseError",
    "Part",
    "PartialLatinSquare",
    "RunOutcome",
    "Triple",
    "TrpState",
    "Vertex",
    "Violation",
    "cyclic_square",
    "decode",
    "encode",
    "history_probability",
    "leave_from",
    "run",
    "validate",
]
