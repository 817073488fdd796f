"""Shared scaffolding for protocol models.

A protocol model binds entities (issuer, readers, tags, possibly a backend
or manager) to a Dolev-Yao network and an event trace.  Running a scenario
means: set up keys and registered paths, walk tags along a movement script
(each arrival at a protocol reader runs the scheme's step logic and always
records a Move), then let the scheme's verifier attempt path claims.

All verdicts are computed afterwards from the trace alone, so a protocol
cannot grade its own homework.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Any, Callable, Iterable

from pathtrace import trace as tr
from pathtrace.network import AdvModel, AdversaryContext, Network, TagMemory

DEFAULT_TAG_CAPACITY = 512


class VerifierPolicyError(Exception):
    """Raised when an entity that is not allowed to verify attempts a claim."""


@dataclass
class RunConfig:
    """Declarative description of one simulated run."""

    protocol: str
    seed: int = 0
    mode: str = "default"
    adversary: AdvModel = AdvModel.ADV_T
    strategy: str = "null"
    readers: list[tuple[str, str | None]] = field(default_factory=list)
    transits: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    valid_paths: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)
    script: list[tuple[str, ...]] = field(default_factory=list)
    capacities: dict[str, int] = field(default_factory=dict)
    compromise: list[str] = field(default_factory=list)
    params: dict[str, str] = field(default_factory=dict)

    def capacity_for(self, tag_token: str) -> int:
        return self.capacities.get(tag_token, DEFAULT_TAG_CAPACITY)


class Run:
    """Mutable state of one simulation: trace, network, entity directory."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.rng = Random(config.seed)
        self.trace = tr.Trace()
        self.net = Network(self.rng, config.adversary)
        self.adv = AdversaryContext(self.net)
        self.readers: dict[str, tr.Identifier] = {}
        self.transits: dict[str, tr.Identifier] = {}
        self.tags: dict[str, tr.Identifier] = {}
        self.memories: dict[str, TagMemory] = {}
        self.step_log: list[str] = []
        self.stalled = False
        for token, participant in config.readers:
            self.readers[token] = tr.reader(token, participant)
        for token in config.transits:
            self.transits[token] = tr.reader(token)
        for token in config.tags:
            self.tags[token] = tr.tag(token)
            memory = TagMemory(config.capacity_for(token))
            self.memories[token] = memory
            self.net.attach_tag(token, memory)

    def reader_id(self, token: str) -> tr.Identifier:
        if token in self.readers:
            return self.readers[token]
        return self.transits[token]

    def tag_id(self, token: str) -> tr.Identifier:
        return self.tags[token]

    def memory(self, token: str) -> TagMemory:
        return self.memories[token]

    def record_step(self, text: str) -> None:
        self.step_log.append(text)


class ProtocolModel:
    """Base class; concrete schemes override the underscored hooks."""

    name = "abstract"
    architecture = "offline"  # or "online"
    verifier_policy = "backend"

    def __init__(self, run: Run) -> None:
        self.run = run
        self.config = run.config
        self.rng = run.rng
        self.net = run.net
        self.trace = run.trace

    # --- lifecycle ------------------------------------------------------

    def setup(self) -> None:
        """Key material, registered paths, handler wiring."""
        raise NotImplementedError

    def visit(self, tag_token: str, reader_token: str) -> None:
        """Tag arrives at a reader.  Always records the Move; protocol step
        logic runs only for protocol readers, not bare transit readers."""
        tag_id = self.run.tag_id(tag_token)
        reader_id = self.run.reader_id(reader_token)
        self.trace.append(tr.Move(tag_id, reader_id))
        if reader_token in self.run.transits:
            self.run.record_step(f"transit {tag_token} {reader_token}")
            return
        ok = self._process_arrival(tag_token, reader_token)
        if not ok:
            self.run.stalled = True
        self.run.record_step(f"visit {tag_token} {reader_token} {'ok' if ok else 'failed'}")

    def claim(self, tag_token: str, verifier: str | None = None) -> None:
        """Scheme's verifier attempts a PathClaim for the tag.

        `verifier` overrides the scheme's default claiming entity; models
        whose verifier policy forbids that entity raise VerifierPolicyError.
        """
        ok = self._process_claim(tag_token, verifier)
        self.run.record_step(f"claim {tag_token} {'ok' if ok else 'rejected'}")

    # --- hooks ----------------------------------------------------------

    def _process_arrival(self, tag_token: str, reader_token: str) -> bool:
        raise NotImplementedError

    def _process_claim(self, tag_token: str, verifier: str | None) -> bool:
        raise NotImplementedError

    def reader_secrets(self, reader_token: str) -> dict[str, bytes]:
        """Secrets surrendered when this reader is compromised."""
        raise NotImplementedError

    def artifacts(self) -> dict[str, Any]:
        """Protocol-specific outputs for attacks and reports."""
        return {}

    # --- helpers --------------------------------------------------------

    def emit_valid_path(self, tag_token: str, path_tokens: Iterable[str]) -> None:
        path = tuple(self.run.reader_id(t) for t in path_tokens)
        self.trace.append(tr.ValidPath(self.run.tag_id(tag_token), path))

    def declared_paths(self, tag_token: str) -> list[tuple[str, ...]]:
        return [p for t, p in self.config.valid_paths if t == tag_token]


@dataclass
class RunResult:
    config: RunConfig
    trace: tr.Trace
    verdicts: list[tr.Verdict]
    transcript: list[str]
    anomalies: list[str]
    step_log: list[str]
    stalled: bool
    compromised: list[str]
    artifacts: dict[str, Any]

    def claims(self) -> list[tr.PathClaim]:
        return [claim for _, claim in self.trace.claims()]

    def verdict_map(self) -> dict[int, tr.Verdict]:
        return {v.claim_index: v for v in self.verdicts}

    def all_claims_satisfy(self, prop: str) -> bool:
        return all(v.properties()[prop] for v in self.verdicts)

    def report_lines(self) -> list[str]:
        """Deterministic, line-oriented run report."""
        lines = [
            f"protocol={self.config.protocol}",
            f"mode={self.config.mode}",
            f"seed={self.config.seed}",
            f"adversary={self.config.adversary}",
            f"strategy={self.config.strategy}",
            f"stalled={str(self.stalled).lower()}",
            f"claims={len(self.verdicts)}",
        ]
        if self.compromised:
            lines.append("compromised=" + ",".join(self.compromised))
        for v in self.verdicts:
            lines.append(
                f"verdict claim_index={v.claim_index}"
                f" sound={str(v.sound).lower()}"
                f" complete={str(v.complete).lower()}"
                f" sorted={str(v.sorted).lower()}"
                f" authorized={str(v.authorized).lower()}"
            )
        for a in self.anomalies:
            lines.append(f"anomaly {a}")
        lines.append("trace-begin")
        lines.extend(tr.dump_trace(self.trace).splitlines())
        lines.append("trace-end")
        lines.append("transcript-begin")
        lines.extend(self.transcript)
        lines.append("transcript-end")
        return lines


PROTOCOLS: dict[str, type[ProtocolModel]] = {}

StrategyFactory = Callable[[Run], Callable]
STRATEGIES: dict[str, StrategyFactory] = {}


def register_protocol(cls: type[ProtocolModel]) -> type[ProtocolModel]:
    PROTOCOLS[cls.name] = cls
    return cls


def register_strategy(name: str):
    def add(factory: StrategyFactory) -> StrategyFactory:
        STRATEGIES[name] = factory
        return factory

    return add


@register_strategy("null")
def _null_factory(run: Run):
    from pathtrace.network import null_strategy

    return null_strategy


@register_strategy("drop_all")
def _drop_all_factory(run: Run):
    return lambda env, net: None


def build_run(config: RunConfig) -> tuple[ProtocolModel, Run]:
    """Construct the world and run protocol setup (no movement yet)."""
    if config.protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol: {config.protocol}")
    run = Run(config)
    protocol = PROTOCOLS[config.protocol](run)
    if config.strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy: {config.strategy}")
    run.net.strategy = STRATEGIES[config.strategy](run)
    protocol.setup()
    for reader_token in config.compromise:
        run.adv.compromise(reader_token)
    return protocol, run


def finalize(protocol: ProtocolModel, run: Run) -> RunResult:
    """Judge every emitted claim against the trace."""
    verdicts = [tr.verdict_for(run.trace, idx) for idx, _ in run.trace.claims()]
    return RunResult(
        config=run.config,
        trace=run.trace,
        verdicts=verdicts,
        transcript=list(run.net.transcript),
        anomalies=list(run.net.anomalies),
        step_log=list(run.step_log),
        stalled=run.stalled,
        compromised=list(run.net.compromised),
        artifacts=protocol.artifacts(),
    )


def run_protocol(config: RunConfig) -> RunResult:
    """Execute a full scripted scenario."""
    protocol, run = build_run(config)
    for step in config.script:
        kind = step[0]
        if kind == "move":
            protocol.visit(step[1], step[2])
        elif kind == "claim":
            protocol.claim(step[1], step[2] if len(step) > 2 else None)
        else:
            raise ValueError(f"unknown script step: {step!r}")
    return finalize(protocol, run)
