"""Event traces for path-based traceability and the four path properties.

A system run is modelled as an ordered trace of three event kinds:

* ``Move(tag, reader)``    - the tag was physically present at a reader
* ``ValidPath(tag, path)`` - the supply chain registered an intended path
* ``PathClaim(tag, path, claimant)`` - a verifier asserted the tag took a path

The physical path of a tag is derived from its Move events by collapsing
consecutive repeats: a tag sitting at the same reader produces one step, but
revisiting a reader later yields a new step (cycles are kept, loops are not).

A claim is judged against the trace prefix strictly before it:

* sound      - every claimed reader was physically visited (set inclusion)
* complete   - claimed and physical reader sets coincide
* sorted     - the claimed path is a subsequence of the physical path
* authorized - some earlier ValidPath for the tag has the claim as a prefix

Mismatched claims are classified against a set of valid paths into the
attack labels of :class:`AttackLabel`.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence


class IdKind(enum.Enum):
    READER = "reader"
    TAG = "tag"
    PARTICIPANT = "participant"
    BACKEND = "backend"


@dataclass(frozen=True)
class Identifier:
    """A named entity.  Equality and hashing use (kind, value) only.

    ``participant`` records which supply-chain party operates a reader; it is
    descriptive metadata and never takes part in comparisons.
    """

    kind: IdKind
    value: str
    participant: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.value or any(c.isspace() for c in self.value):
            raise ValueError(f"identifier must be a non-empty token: {self.value!r}")

    def __str__(self) -> str:
        return self.value


def reader(value: str, participant: str | None = None) -> Identifier:
    return Identifier(IdKind.READER, value, participant)


def tag(value: str) -> Identifier:
    return Identifier(IdKind.TAG, value)


def backend(value: str) -> Identifier:
    return Identifier(IdKind.BACKEND, value)


@dataclass(frozen=True)
class Move:
    tag: Identifier
    reader: Identifier


@dataclass(frozen=True)
class ValidPath:
    tag: Identifier
    path: tuple[Identifier, ...]


@dataclass(frozen=True)
class PathClaim:
    tag: Identifier
    path: tuple[Identifier, ...]
    claimant: Identifier


Event = Move | ValidPath | PathClaim


class Trace:
    """Append-only ordered sequence of events with dense indices."""

    def __init__(self, events: Iterable[Event] = ()) -> None:
        self._events: list[Event] = []
        for e in events:
            self.append(e)

    def append(self, event: Event) -> int:
        """Append an event, returning its index."""
        if not isinstance(event, (Move, ValidPath, PathClaim)):
            raise TypeError(f"not a trace event: {event!r}")
        self._events.append(event)
        return len(self._events) - 1

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def __getitem__(self, index: int) -> Event:
        return self._events[index]

    @property
    def events(self) -> tuple[Event, ...]:
        return tuple(self._events)

    def claims(self) -> Iterator[tuple[int, PathClaim]]:
        """Yield (index, claim) for every PathClaim in order."""
        for i, e in enumerate(self._events):
            if isinstance(e, PathClaim):
                yield i, e

    def tags(self) -> list[Identifier]:
        """All tags mentioned, in first-appearance order."""
        seen: dict[Identifier, None] = {}
        for e in self._events:
            seen.setdefault(e.tag, None)
        return list(seen)


def collapse(readers: Sequence[Identifier]) -> tuple[Identifier, ...]:
    """Drop consecutive duplicates, keeping later revisits."""
    out: list[Identifier] = []
    for r in readers:
        if not out or out[-1] != r:
            out.append(r)
    return tuple(out)


def physical_path(trace: Trace, tag: Identifier, upto: int | None = None) -> tuple[Identifier, ...]:
    """The tag's physical path from Move events strictly before ``upto``.

    ``upto=None`` uses the whole trace.  Consecutive repeats collapse; an
    empty result means the tag never moved in the window.
    """
    end = len(trace) if upto is None else upto
    visits = [e.reader for e in trace.events[:end] if isinstance(e, Move) and e.tag == tag]
    return collapse(visits)


def is_subsequence(needle: Sequence[Identifier], hay: Sequence[Identifier]) -> bool:
    """True when ``needle`` appears in ``hay`` in order (gaps allowed)."""
    it = iter(hay)
    return all(any(x == y for y in it) for x in needle)


def is_prefix(prefix: Sequence[Identifier], whole: Sequence[Identifier]) -> bool:
    return len(prefix) <= len(whole) and tuple(whole[: len(prefix)]) == tuple(prefix)


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witness: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def _claim_at(trace: Trace, claim_index: int) -> PathClaim:
    event = trace[claim_index]
    if not isinstance(event, PathClaim):
        raise ValueError(f"event {claim_index} is not a PathClaim: {event!r}")
    return event


def check_sound(trace: Trace, claim_index: int) -> CheckResult:
    """Claimed readers are a subset of the physically visited readers."""
    claim = _claim_at(trace, claim_index)
    phys = set(physical_path(trace, claim.tag, upto=claim_index))
    for r in claim.path:
        if r not in phys:
            return CheckResult(False, f"claimed reader {r} never visited")
    return CheckResult(True)


def check_complete(trace: Trace, claim_index: int) -> CheckResult:
    """Claimed and physical reader sets are equal."""
    claim = _claim_at(trace, claim_index)
    phys = set(physical_path(trace, claim.tag, upto=claim_index))
    claimed = set(claim.path)
    missing = [r for r in physical_path(trace, claim.tag, upto=claim_index) if r not in claimed]
    extra = [r for r in claim.path if r not in phys]
    if extra:
        return CheckResult(False, f"claimed reader {extra[0]} never visited")
    if missing:
        return CheckResult(False, f"visited reader {missing[0]} absent from claim")
    return CheckResult(True)


def check_sorted(trace: Trace, claim_index: int) -> CheckResult:
    """The claimed path is a subsequence of the physical path."""
    claim = _claim_at(trace, claim_index)
    phys = physical_path(trace, claim.tag, upto=claim_index)
    if is_subsequence(claim.path, phys):
        return CheckResult(True)
    # find the first claimed reader that cannot be matched in order
    pos = 0
    for i, r in enumerate(claim.path):
        j = pos
        while j < len(phys) and phys[j] != r:
            j += 1
        if j == len(phys):
            return CheckResult(False, f"claimed step {i} ({r}) out of physical order")
        pos = j + 1
    return CheckResult(False, "claim not a subsequence of physical path")


def check_authorized(trace: Trace, claim_index: int) -> CheckResult:
    """Some strictly earlier ValidPath for the tag has the claim as a prefix."""
    claim = _claim_at(trace, claim_index)
    for e in trace.events[:claim_index]:
        if isinstance(e, ValidPath) and e.tag == claim.tag and is_prefix(claim.path, e.path):
            return CheckResult(True)
    return CheckResult(False, "no earlier ValidPath has the claim as a prefix")


@dataclass(frozen=True)
class Verdict:
    """Evaluation of one PathClaim against its trace prefix."""

    claim_index: int
    sound: bool
    complete: bool
    sorted: bool
    authorized: bool
    witness: str | None = None

    def properties(self) -> dict[str, bool]:
        return {
            "sound": self.sound,
            "complete": self.complete,
            "sorted": self.sorted,
            "authorized": self.authorized,
        }


def verdict_for(trace: Trace, claim_index: int) -> Verdict:
    """Run all four property checks on one claim.

    ``witness`` carries the explanation of the first failing check, in the
    order sound, complete, sorted, authorized.
    """
    checks = {
        "sound": check_sound(trace, claim_index),
        "complete": check_complete(trace, claim_index),
        "sorted": check_sorted(trace, claim_index),
        "authorized": check_authorized(trace, claim_index),
    }
    witness = None
    for name, res in checks.items():
        if not res.ok:
            witness = f"{name}: {res.witness}"
            break
    return Verdict(
        claim_index=claim_index,
        sound=checks["sound"].ok,
        complete=checks["complete"].ok,
        sorted=checks["sorted"].ok,
        authorized=checks["authorized"].ok,
        witness=witness,
    )


@dataclass(frozen=True)
class SystemVerdict:
    """Do the properties hold for every claim in every trace?

    ``counterexamples`` maps a property name to the (trace_index, claim_index)
    of the first violating claim, when one exists.
    """

    holds: dict[str, bool]
    counterexamples: dict[str, tuple[int, int]]


def evaluate_system(traces: Sequence[Trace]) -> SystemVerdict:
    """A property holds for the system iff it holds for all claims of all traces."""
    holds = {"sound": True, "complete": True, "sorted": True, "authorized": True}
    counterexamples: dict[str, tuple[int, int]] = {}
    for ti, trace in enumerate(traces):
        for ci, _claim in trace.claims():
            verdict = verdict_for(trace, ci)
            for prop, ok in verdict.properties().items():
                if not ok and holds[prop]:
                    holds[prop] = False
                    counterexamples[prop] = (ti, ci)
    return SystemVerdict(holds=holds, counterexamples=counterexamples)


class AttackLabel(enum.Enum):
    OUT_OF_ORDER = "OutOfOrder"
    SKIP_STEP = "SkipStep"
    REROUTE = "Reroute"
    GHOST_STEP = "GhostStep"
    UNAUTHORIZED_PATH = "UnauthorizedPath"


def classify(
    physical: Sequence[Identifier],
    claimed: Sequence[Identifier],
    valid: Iterable[Sequence[Identifier]],
) -> frozenset[AttackLabel]:
    """Label the discrepancy between a claim and the physical path.

    ``valid`` is the set of registered paths the verifier would accept.  An
    honest claim yields the empty set.  Several labels can apply at once,
    one per matching pattern:

    * GhostStep         - a claimed reader was never visited (unsound claim)
    * SkipStep          - sound but incomplete, and the claim sits inside a
                          valid path with at least one hole
    * Reroute           - the tag physically visited a reader that belongs to
                          no valid path and is absent from the claim
    * OutOfOrder        - the claim lists exactly the first visited readers
                          but in a different order
    * UnauthorizedPath  - no valid path has the claim as a prefix
    """
    phys = collapse(physical)
    claim = tuple(claimed)
    valid_paths = [tuple(p) for p in valid]
    labels: set[AttackLabel] = set()

    phys_set = set(phys)
    claim_set = set(claim)
    sound = claim_set <= phys_set
    complete = claim_set == phys_set
    ordered = is_subsequence(claim, phys)

    if not sound:
        labels.add(AttackLabel.GHOST_STEP)

    if sound and not complete:
        # claim fits strictly inside some valid path, i.e. steps were skipped
        if any(len(claim) < len(vp) and is_subsequence(claim, vp) for vp in valid_paths):
            labels.add(AttackLabel.SKIP_STEP)

    valid_readers = {r for vp in valid_paths for r in vp}
    for r in phys:
        if r not in valid_readers and r not in claim_set:
            labels.add(AttackLabel.REROUTE)
            break

    if sound and not ordered:
        head = phys[: len(claim)]
        if Counter(head) == Counter(claim):
            labels.add(AttackLabel.OUT_OF_ORDER)

    if not any(is_prefix(claim, vp) for vp in valid_paths):
        labels.add(AttackLabel.UNAUTHORIZED_PATH)

    return frozenset(labels)


def classify_claim(trace: Trace, claim_index: int) -> frozenset[AttackLabel]:
    """Classify one in-trace claim against the movement that preceded it."""
    claim = _claim_at(trace, claim_index)
    valid = [
        e.path
        for e in trace.events[:claim_index]
        if isinstance(e, ValidPath) and e.tag == claim.tag
    ]
    return classify(physical_path(trace, claim.tag, claim_index), claim.path, valid)


# --- line serialization ----------------------------------------------------

def format_event(event: Event) -> str:
    """One event per line: MOVE / VALIDPATH / CLAIM followed by tokens."""
    if isinstance(event, Move):
        return f"MOVE {event.tag} {event.reader}"
    if isinstance(event, ValidPath):
        return " ".join(["VALIDPATH", str(event.tag), *map(str, event.path)])
    if isinstance(event, PathClaim):
        return " ".join(["CLAIM", str(event.tag), str(event.claimant), *map(str, event.path)])
    raise TypeError(f"not a trace event: {event!r}")


def dump_trace(trace: Trace) -> str:
    return "".join(format_event(e) + "\n" for e in trace)


class TraceParseError(ValueError):
    pass


def parse_trace(text: str) -> Trace:
    """Parse a trace dump.  Claimant kind is inferred: a token that also
    occurs as a reader parses as a reader, otherwise as a backend."""
    rows: list[tuple[str, list[str]]] = []
    reader_tokens: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind, args = parts[0].upper(), parts[1:]
        if kind == "MOVE":
            if len(args) != 2:
                raise TraceParseError(f"line {lineno}: MOVE wants <tag> <reader>")
            reader_tokens.add(args[1])
        elif kind == "VALIDPATH":
            if len(args) < 2:
                raise TraceParseError(f"line {lineno}: VALIDPATH wants <tag> <r1> ...")
            reader_tokens.update(args[1:])
        elif kind == "CLAIM":
            if len(args) < 3:
                raise TraceParseError(f"line {lineno}: CLAIM wants <tag> <claimant> <r1> ...")
            reader_tokens.update(args[2:])
        else:
            raise TraceParseError(f"line {lineno}: unknown event {kind}")
        rows.append((kind, args))

    trace = Trace()
    for kind, args in rows:
        if kind == "MOVE":
            trace.append(Move(tag(args[0]), reader(args[1])))
        elif kind == "VALIDPATH":
            trace.append(ValidPath(tag(args[0]), tuple(reader(r) for r in args[1:])))
        else:
            claimant = reader(args[1]) if args[1] in reader_tokens else backend(args[1])
            trace.append(PathClaim(tag(args[0]), tuple(reader(r) for r in args[2:]), claimant))
    return trace
