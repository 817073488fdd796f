"""Line-oriented scenario files: one reproducible experiment per file.

A scenario describes either a scripted protocol run, a named attack
replay, or a privacy game, plus `expect` assertions over the outcome and
optional `matrix` evidence directives.  Example::

    protocol tracker
    kind run
    seed 11
    reader r1 acme
    reader r2 bolt
    reader m
    param manager m
    transit w
    tag t1
    validpath t1 r1 r2
    move t1 r1
    move t1 w
    move t1 r2
    claim t1
    expect sound true
    expect complete false
    matrix ss hold AdvT

Matrix directives feed the solution table: `matrix <prop> hold <model>`
claims the property held in this scenario's adversary model, while
`break`/`weakness`/`caveat` attach a numbered footnote.  A directive
counts as evidence only when every `expect` line of its scenario holds.

Exit codes: 0 all expectations hold, 1 some expectation failed, 2 the
file does not parse, 3 the scenario demands a capability the configured
model or verifier policy refuses.
"""

from __future__ import annotations

import inspect
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from pathtrace import trace as tr
from pathtrace.attacks import ATTACKS, AttackOutcome, BoundedSearchError
from pathtrace.network import AdvModel, CapabilityError
from pathtrace.privacy import (
    GameKind,
    PrivacyGame,
    UnsupportedGameError,
    run_game,
)
from pathtrace.protocols import PROTOCOLS, RunConfig, run_protocol
from pathtrace.protocols.base import RunResult, VerifierPolicyError

EXIT_OK = 0
EXIT_EXPECT = 1
EXIT_PARSE = 2
EXIT_CAPABILITY = 3

MATRIX_PROPERTIES = {
    "ss": "sound_sorted",
    "ssc": "complete",
    "auth": "authorized",
    "priv": "privacy",
}
MATRIX_ACTIONS = ("hold", "break", "weakness", "caveat")
KNOWN_FOOTNOTES = (1, 2, 4)
_MODELS = {"AdvT": AdvModel.ADV_T, "AdvR": AdvModel.ADV_R}


class ScenarioError(Exception):
    """Malformed scenario file; message carries file:line diagnostics."""


@dataclass(frozen=True)
class MatrixDirective:
    prop: str  # MatrixRow field name
    action: str
    model: str | None = None  # hold
    footnote: int | None = None  # break / weakness / caveat


@dataclass
class Scenario:
    path: Path
    protocol: str = ""
    kind: str = "run"
    seed: int = 0
    mode: str = "default"
    adversary: AdvModel = AdvModel.ADV_T
    strategy: str = "null"
    compromise: list[str] = field(default_factory=list)
    readers: list[tuple[str, str | None]] = field(default_factory=list)
    transits: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    valid_paths: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)
    capacities: dict[str, int] = field(default_factory=dict)
    params: dict[str, str] = field(default_factory=dict)
    script: list[tuple[str, ...]] = field(default_factory=list)
    attack: str | None = None
    attack_args: dict[str, object] = field(default_factory=dict)
    game: GameKind | None = None
    distinguisher: str = "random"
    trials: int = 500
    worlds: int = 32
    expects: list[tuple[str, str]] = field(default_factory=list)
    directives: list[MatrixDirective] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.path.stem


@dataclass
class ScenarioResult:
    scenario: Scenario
    exit_code: int
    failures: list[str] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)

    @property
    def validated_directives(self) -> list[MatrixDirective]:
        return list(self.scenario.directives) if self.exit_code == EXIT_OK else []

    def report_lines(self) -> list[str]:
        head = [
            f"scenario {self.scenario.name}",
            f"protocol={self.scenario.protocol}",
            f"kind={self.scenario.kind}",
            f"exit={self.exit_code}",
        ]
        body = list(self.lines)
        tail = [f"expect-failed {f}" for f in self.failures]
        return head + body + tail


# --- parsing ---------------------------------------------------------------

def _attack_value(token: str) -> object:
    if token in ("true", "false"):
        return token == "true"
    if "," in token:
        return tuple(int(p) for p in token.split(","))
    try:
        return int(token)
    except ValueError:
        return token


def parse_scenario(path: Path) -> Scenario:
    scn = Scenario(path=Path(path))
    seen_protocol = False

    def err(lineno: int, message: str) -> ScenarioError:
        return ScenarioError(f"{scn.path.name}:{lineno}: {message}")

    try:
        text = scn.path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        key, args = words[0], words[1:]
        if key == "protocol":
            if len(args) != 1 or args[0] not in PROTOCOLS:
                raise err(lineno, f"unknown protocol {' '.join(args) or '?'}")
            scn.protocol = args[0]
            seen_protocol = True
        elif key == "kind":
            if len(args) != 1 or args[0] not in ("run", "attack", "privacy", "probe"):
                raise err(lineno, "kind must be run, attack, privacy or probe")
            scn.kind = "attack" if args[0] == "probe" else args[0]
        elif key == "seed":
            scn.seed = int(args[0])
        elif key == "mode":
            scn.mode = args[0]
        elif key == "adversary":
            if len(args) != 1 or args[0] not in _MODELS:
                raise err(lineno, "adversary must be AdvT or AdvR")
            scn.adversary = _MODELS[args[0]]
        elif key == "strategy":
            scn.strategy = args[0]
        elif key == "compromise":
            scn.compromise.extend(args)
        elif key == "reader":
            scn.readers.append((args[0], args[1] if len(args) > 1 else None))
        elif key == "transit":
            scn.transits.extend(args)
        elif key == "tag":
            scn.tags.extend(args)
        elif key == "validpath":
            if len(args) < 2:
                raise err(lineno, "validpath needs a tag and at least one reader")
            scn.valid_paths.append((args[0], tuple(args[1:])))
        elif key == "capacity":
            scn.capacities[args[0]] = int(args[1])
        elif key == "param":
            if len(args) < 2:
                raise err(lineno, "param needs a key and a value")
            scn.params[args[0]] = " ".join(args[1:])
        elif key == "move":
            if len(args) != 2:
                raise err(lineno, "move needs a tag and a reader")
            scn.script.append(("move", args[0], args[1]))
        elif key == "claim":
            if not args:
                raise err(lineno, "claim needs a tag")
            scn.script.append(("claim", *args))
        elif key == "attack":
            if not args or args[0] not in ATTACKS:
                raise err(lineno, f"unknown attack {' '.join(args[:1]) or '?'}")
            scn.attack = args[0]
            for pair in args[1:]:
                if "=" not in pair:
                    raise err(lineno, f"attack argument {pair!r} is not key=value")
                k, v = pair.split("=", 1)
                scn.attack_args[k] = _attack_value(v)
        elif key == "game":
            kinds = {k.value: k for k in GameKind}
            if len(args) != 1 or args[0] not in kinds:
                raise err(lineno, f"game must be one of {sorted(kinds)}")
            scn.game = kinds[args[0]]
        elif key == "distinguisher":
            scn.distinguisher = args[0]
        elif key == "trials":
            scn.trials = int(args[0])
        elif key == "worlds":
            scn.worlds = int(args[0])
        elif key == "expect":
            if len(args) != 2:
                raise err(lineno, "expect needs a key and a value")
            scn.expects.append((args[0], args[1]))
        elif key == "matrix":
            scn.directives.append(_parse_matrix(err, lineno, args))
        else:
            raise err(lineno, f"unknown directive {key!r}")

    if not seen_protocol:
        raise ScenarioError(f"{scn.path.name}: missing protocol directive")
    if scn.kind == "attack" and scn.attack is None:
        raise ScenarioError(f"{scn.path.name}: attack scenario without attack directive")
    if scn.kind == "privacy" and scn.game is None:
        raise ScenarioError(f"{scn.path.name}: privacy scenario without game directive")
    return scn


def _parse_matrix(err, lineno: int, args: list[str]) -> MatrixDirective:
    if len(args) < 2 or args[0] not in MATRIX_PROPERTIES or args[1] not in MATRIX_ACTIONS:
        raise err(lineno, "matrix directive is `matrix <ss|ssc|auth|priv> <action> [arg]`")
    prop = MATRIX_PROPERTIES[args[0]]
    action = args[1]
    if action == "hold":
        if len(args) != 3 or args[2] not in _MODELS:
            raise err(lineno, "matrix hold needs a model, AdvT or AdvR")
        return MatrixDirective(prop=prop, action=action, model=args[2])
    footnote = 1 if len(args) == 2 else None
    if footnote is None:
        try:
            footnote = int(args[2])
        except ValueError:
            raise err(lineno, f"footnote {args[2]!r} is not a number")
    if footnote not in KNOWN_FOOTNOTES:
        raise err(lineno, f"unknown footnote {footnote}; known: {KNOWN_FOOTNOTES}")
    return MatrixDirective(prop=prop, action=action, footnote=footnote)


# --- execution -------------------------------------------------------------

def _stringify(value: object) -> str:
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (list, tuple)):
        return ",".join(_stringify(v) for v in value)
    return str(value)


def _check_expects(
    expects: list[tuple[str, str]],
    facts: dict[str, str],
    membership: dict[str, list[str]],
) -> list[str]:
    failures = []
    for key, want in expects:
        if key in membership:
            if want not in membership[key]:
                failures.append(f"{key}: {want!r} not in {membership[key]}")
            continue
        got = facts.get(key)
        if got is None:
            failures.append(f"{key}: nothing to compare against")
        elif got != want:
            failures.append(f"{key}: expected {want!r}, got {got!r}")
    return failures


_THRESHOLD_KEYS = ("advantage_min", "advantage_max")


def _float_expects(expects: list[tuple[str, str]], advantage: float) -> list[str]:
    """Threshold expectations (advantage_min / advantage_max)."""
    failures = []
    for key, want in expects:
        if key == "advantage_min" and advantage < float(want):
            failures.append(f"advantage {advantage:.4f} below {want}")
        elif key == "advantage_max" and advantage > float(want):
            failures.append(f"advantage {advantage:.4f} above {want}")
    return failures


def _run_facts(result: RunResult) -> tuple[dict[str, str], dict[str, list[str]]]:
    claim_indices = [idx for idx, _ in result.trace.claims()]
    facts = {
        "stalled": _stringify(result.stalled),
        "claims": str(len(claim_indices)),
        "anomalies": str(len(result.anomalies)),
    }
    membership: dict[str, list[str]] = {}
    if result.verdicts:
        last = result.verdicts[-1]
        for prop, value in last.properties().items():
            facts[prop] = _stringify(value)
        labels = sorted(
            label.value for label in tr.classify_claim(result.trace, last.claim_index)
        )
        facts["labels"] = ",".join(labels)
        membership["label"] = labels
    return facts, membership


def _execute_run(scn: Scenario) -> ScenarioResult:
    config = RunConfig(
        protocol=scn.protocol,
        seed=scn.seed,
        mode=scn.mode,
        adversary=scn.adversary,
        strategy=scn.strategy,
        compromise=list(scn.compromise),
        readers=list(scn.readers),
        transits=list(scn.transits),
        tags=list(scn.tags),
        valid_paths=list(scn.valid_paths),
        script=list(scn.script),
        capacities=dict(scn.capacities),
        params=dict(scn.params),
    )
    result = run_protocol(config)
    facts, membership = _run_facts(result)
    failures = _check_expects(scn.expects, facts, membership)
    return ScenarioResult(
        scenario=scn,
        exit_code=EXIT_OK if not failures else EXIT_EXPECT,
        failures=failures,
        lines=result.report_lines(),
    )


def _attack_facts(outcome: AttackOutcome) -> tuple[dict[str, str], dict[str, list[str]]]:
    facts = {
        "succeeded": _stringify(outcome.succeeded),
        "violated": _stringify(outcome.violated_property),
    }
    membership: dict[str, list[str]] = {}
    for key, value in outcome.evidence.items():
        if key == "run":
            continue
        facts[f"evidence.{key}"] = _stringify(value)
        if isinstance(value, (list, tuple, dict)):
            facts[f"evidence.{key}_count"] = str(len(value))
    labels = outcome.evidence.get("labels")
    if isinstance(labels, (list, tuple)):
        membership["label"] = [str(l) for l in labels]
    return facts, membership


def _execute_attack(scn: Scenario) -> ScenarioResult:
    op = ATTACKS[scn.attack]
    kwargs = dict(scn.attack_args)
    accepted = inspect.signature(op).parameters
    for name, value in (
        ("seed", scn.seed),
        ("mode", scn.mode),
        ("adversary", scn.adversary),
    ):
        if name in accepted and name not in kwargs:
            kwargs[name] = value
    outcome = op(**kwargs)
    facts, membership = _attack_facts(outcome)
    failures = _check_expects(scn.expects, facts, membership)
    run = outcome.run_result()
    if run is not None and run.config.adversary is not scn.adversary:
        failures.append(
            f"adversary: scenario declares {scn.adversary}, run used {run.config.adversary}"
        )
    lines = outcome.summary_lines()
    if run is not None:
        lines += run.report_lines()
    return ScenarioResult(
        scenario=scn,
        exit_code=EXIT_OK if not failures else EXIT_EXPECT,
        failures=failures,
        lines=lines,
    )


def _execute_privacy(scn: Scenario) -> ScenarioResult:
    game = PrivacyGame(
        kind=scn.game,
        protocol=scn.protocol,
        distinguisher=scn.distinguisher,
        trials=scn.trials,
        seed=scn.seed,
        mode=scn.mode,
        adversary=scn.adversary,
        worlds=scn.worlds,
    )
    result = run_game(game)
    facts = {
        "wins": str(result.wins),
        "trials": str(result.trials),
    }
    plain = [e for e in scn.expects if e[0] not in _THRESHOLD_KEYS]
    failures = _check_expects(plain, facts, {})
    failures += _float_expects(scn.expects, result.advantage)
    return ScenarioResult(
        scenario=scn,
        exit_code=EXIT_OK if not failures else EXIT_EXPECT,
        failures=failures,
        lines=result.report_lines(),
    )


def execute_scenario(scn: Scenario) -> ScenarioResult:
    try:
        if scn.kind == "run":
            return _execute_run(scn)
        if scn.kind == "attack":
            return _execute_attack(scn)
        return _execute_privacy(scn)
    except (CapabilityError, VerifierPolicyError, BoundedSearchError, UnsupportedGameError) as exc:
        return ScenarioResult(
            scenario=scn,
            exit_code=EXIT_CAPABILITY,
            failures=[f"capability: {exc}"],
        )


def run_scenario(path: Path | str) -> ScenarioResult:
    """Parse + execute; parse problems come back as exit 2 results."""
    try:
        scn = parse_scenario(Path(path))
    except ScenarioError as exc:
        return ScenarioResult(
            scenario=Scenario(path=Path(path)),
            exit_code=EXIT_PARSE,
            failures=[str(exc)],
        )
    return execute_scenario(scn)


def run_corpus(directory: Path | str) -> list[ScenarioResult]:
    """Execute every .scn file; parallel execution, deterministic order."""
    files = sorted(Path(directory).glob("*.scn"))
    if not files:
        return []
    with ThreadPoolExecutor(max_workers=min(8, len(files))) as pool:
        results = list(pool.map(run_scenario, files))
    return sorted(results, key=lambda r: r.scenario.name)


def corpus_dir() -> Path:
    """The bundled scenario corpus shipped inside the package."""
    return Path(__file__).parent / "corpus"
