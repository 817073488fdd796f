"""Deterministic simulator and analysis toolkit for path-based traceability
protocols in RFID supply chains."""

from pathtrace.trace import (
    AttackLabel,
    CheckResult,
    Event,
    IdKind,
    Identifier,
    Move,
    PathClaim,
    SystemVerdict,
    Trace,
    TraceParseError,
    ValidPath,
    Verdict,
    backend,
    check_authorized,
    check_complete,
    check_sorted,
    check_sound,
    classify,
    collapse,
    dump_trace,
    evaluate_system,
    format_event,
    parse_trace,
    physical_path,
    reader,
    tag,
    verdict_for,
)

__version__ = "0.1.0"

__all__ = [
    "AttackLabel",
    "CheckResult",
    "Event",
    "IdKind",
    "Identifier",
    "Move",
    "PathClaim",
    "SystemVerdict",
    "Trace",
    "TraceParseError",
    "ValidPath",
    "Verdict",
    "backend",
    "check_authorized",
    "check_complete",
    "check_sorted",
    "check_sound",
    "classify",
    "collapse",
    "dump_trace",
    "evaluate_system",
    "format_event",
    "parse_trace",
    "physical_path",
    "reader",
    "tag",
    "verdict_for",
    "__version__",
]
