"""Scripted reproductions of each scheme's documented weakness.

Every attack drives a normal protocol run, performs the adversary's moves
through the Dolev-Yao surface (observing, injecting, reading tags,
compromising readers) and returns an AttackOutcome whose evidence is
strong enough to re-check the violation from the outside: the finalized
run with its trace goes along, so soundness/sortedness verdicts and
classifier labels can be recomputed, and linking attacks carry the
ground-truth record labels to count false positives against.

Attacks that the corresponding hardened configuration is supposed to
defeat return succeeded=False there; tests re-run those across many
seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Any

from pathtrace import crypto
from pathtrace import trace as tr
from pathtrace.network import AdvModel
from pathtrace.protocols import RunConfig, build_run, finalize, run_protocol
from pathtrace.protocols.base import Run, RunResult, register_strategy
from pathtrace.protocols.ray import Ray
from pathtrace.protocols.rfchain import step_input
from pathtrace.protocols.resc import storage_bits
from pathtrace.stats import wilson_interval


class BoundedSearchError(ValueError):
    """Search parameters exceed the supported exhaustive-search bounds."""


@dataclass
class AttackOutcome:
    """Machine-checkable result of one attack script.

    `violated_property` is one of sound/complete/sorted/authorized/privacy
    when the attack succeeded, else None.  `evidence` holds the finalized
    run (key "run") plus attack-specific material.
    """

    name: str
    succeeded: bool
    violated_property: str | None
    evidence: dict[str, Any] = field(default_factory=dict)

    def run_result(self) -> RunResult | None:
        return self.evidence.get("run")

    def summary_lines(self) -> list[str]:
        lines = [
            f"attack={self.name}",
            f"succeeded={str(self.succeeded).lower()}",
            f"violated={self.violated_property or 'none'}",
        ]
        for key in sorted(self.evidence):
            if key == "run":
                continue
            value = self.evidence[key]
            if isinstance(value, bytes):
                value = value.hex()
            lines.append(f"evidence {key}={value}")
        return lines


@register_strategy("drop_to_tags")
def _drop_to_tags_factory(run: Run):
    """Suppress every over-the-air message addressed to a tag.

    The payloads are still observed before the drop, so the adversary can
    re-deliver them later in an order of its own choosing.
    """
    tags = set(run.config.tags)

    def strategy(env, net):
        if env.receiver in tags:
            return None
        return env.payload

    return strategy


def _snapshot_fields(snapshot: bytes) -> dict[str, bytes]:
    parts = crypto.split_length_prefixed(snapshot)
    return {parts[i].decode(): parts[i + 1] for i in range(0, len(parts), 2)}


def _claim_verdict(result: RunResult) -> tr.Verdict | None:
    return result.verdicts[-1] if result.verdicts else None


def _labels(result: RunResult) -> list[str]:
    out: list[str] = []
    for idx, _ in result.trace.claims():
        for label in sorted(tr.classify_claim(result.trace, idx), key=lambda l: l.value):
            out.append(label.value)
    return out


# --- RF-Chain: ledger linking via the shared step key ----------------------

def attack_rfchain_linking(
    seed: int = 0, mode: str = "default", decoys: int = 10, insider: bool = False
) -> AttackOutcome:
    """Link every ledger record of one tag after a single tag read.

    The record payload is the previous chain value XORed with a keystream
    whose first block is the step key itself, and the pseudo-identity is
    the tag identity encrypted under the same key.  Reading the chain once
    yields every a_i level by stripping signatures; XORing a payload
    prefix against a level prefix then proposes a candidate key that the
    pseudo-identity confirms or refutes.  With `insider`, a compromised
    reader's system secrets recompute the keys directly instead, which
    links records even in the patched mode.
    """
    target = "t0"
    decoy_tokens = [f"d{i:02d}" for i in range(1, decoys + 1)]
    hops = ["r1", "r2", "r3"]
    script: list[tuple[str, ...]] = []
    for hop in hops:
        script.append(("move", target, hop))
        for decoy in decoy_tokens:
            script.append(("move", decoy, hop))
    script.append(("claim", target))
    cfg = RunConfig(
        protocol="rfchain",
        seed=seed,
        mode=mode,
        adversary=AdvModel.ADV_R if insider else AdvModel.ADV_T,
        readers=[(t, None) for t in hops],
        tags=[target] + decoy_tokens,
        capacities={t: 1024 for t in [target] + decoy_tokens},
        script=script,
    )
    protocol, run = build_run(cfg)
    for step in cfg.script:
        if step[0] == "move":
            protocol.visit(step[1], step[2])
        else:
            protocol.claim(step[1])

    fields = _snapshot_fields(run.adv.read_tag(target))
    identity = fields["id"]
    levels = [fields["chain"]]
    cursor = fields["chain"]
    while (sig := crypto.parse_signature(cursor)) is not None:
        cursor = sig.message
        levels.append(cursor)
    # levels now holds a_n .. a_0; record i embeds a_{i-1}
    prev_values = levels[1:]
    steps = len(prev_values)

    secrets: dict[str, bytes] | None = None
    if insider:
        secrets = run.adv.compromise(hops[0])

    records = protocol.ledger.records()
    linked: dict[int, int] = {}
    for j, (pseudo, payload) in enumerate(records):
        for i in range(1, steps + 1):
            prev = prev_values[steps - i]
            if secrets is not None:
                h = step_input(identity, secrets["f"], secrets["pwd"], secrets["r"], i)
                if mode == "patched":
                    try:
                        salt, body = crypto.split_length_prefixed(payload)
                    except (crypto.CryptoError, ValueError):
                        continue
                    pid_key = crypto.hash_bytes(crypto.concat_raw(h, salt, b"pid"))
                    matched = pseudo == crypto.sym_enc(pid_key, identity)
                else:
                    key = crypto.hash_bytes(h)
                    matched = pseudo == crypto.sym_enc(key, identity)
            else:
                if len(payload) < 32 or len(prev) < 32:
                    continue
                candidate = crypto.xor_bytes(payload[:32], prev[:32])
                matched = pseudo == crypto.sym_enc(candidate, identity) and payload == crypto.xor_stream(
                    prev, candidate
                )
            if matched:
                linked[j] = i
                break

    result = finalize(protocol, run)
    truth = result.artifacts["ledger_truth"]
    target_positions = {j for j, (token, _) in enumerate(truth) if token == target}
    false_positives = sorted(set(linked) - target_positions)
    succeeded = bool(target_positions) and set(linked) == target_positions
    return AttackOutcome(
        name="rfchain-linking",
        succeeded=succeeded,
        violated_property="privacy" if succeeded else None,
        evidence={
            "run": result,
            "mode": mode,
            "insider": insider,
            "records": len(records),
            "target_records": sorted(target_positions),
            "linked": dict(sorted(linked.items())),
            "false_positives": false_positives,
            "chain_levels": steps,
            "identity": identity,
        },
    )


def probe_rfchain_length_extension(seed: int = 0) -> AttackOutcome:
    """Show the step-key hash is length-extendable, and why that is not
    enough to forge a record.

    The chain base is a raw hash of concatenated secrets, so an adversary
    holding only that digest can compute the hash of the secrets plus
    padding-glue plus a chosen suffix.  But honest step keys hash the
    secrets with a bare index appended, never with the glue bytes, so the
    extended digest is the key of an input the scheme never uses and no
    ledger record accepts it.  A weakness in the construction, not a
    break of the deployed checks.
    """
    cfg = RunConfig(
        protocol="rfchain",
        seed=seed,
        readers=[("r1", None), ("r2", None), ("r3", None)],
        tags=["t1"],
        capacities={"t1": 1024},
        script=[("move", "t1", "r1")],
    )
    protocol, run = build_run(cfg)
    fields = _snapshot_fields(run.adv.read_tag("t1"))
    identity = fields["id"]
    base = fields["chain"]  # a_0 = H(ID || f || pwd || r), secrets unknown
    secret_len = len(identity) + 48  # ID plus three 16-byte system values
    suffix = b"1"
    extended, glue = crypto.extend_sha256(base, secret_len, suffix)

    # ground truth from the model's secrets: the extension really is the
    # hash of the glued input, and really differs from the honest step key
    secret_preimage = crypto.concat_raw(identity, protocol.f, protocol.pwd, protocol.nonce)
    extension_matches = extended == crypto.hash_bytes(secret_preimage + glue + suffix)
    honest_key = protocol.step_key(identity, 1)

    # attempt to use the extended digest as the step-1 key
    for step in cfg.script:
        protocol.visit(step[1], step[2])
    forged_pseudo = crypto.sym_enc(extended, identity)
    forged_payload = crypto.xor_stream(base, extended)
    accepted = protocol._record_matches(forged_pseudo, forged_payload, identity, 1, base)

    result = finalize(protocol, run)
    return AttackOutcome(
        name="rfchain-length-extension",
        succeeded=False,
        violated_property=None,
        evidence={
            "run": result,
            "extension_matches": extension_matches,
            "glue_bytes": len(glue),
            "forged_key_differs": extended != honest_key,
            "forged_record_accepted": accepted,
        },
    )


# --- Ray: order not enforced, challenges derivable -------------------------

def _ray_config(
    seed: int, mode: str, path_len: int, strategy: str = "null"
) -> RunConfig:
    readers = [f"r{i}" for i in range(1, path_len + 1)]
    return RunConfig(
        protocol="ray",
        seed=seed,
        mode=mode,
        strategy=strategy,
        readers=[(t, None) for t in readers],
        tags=["t1"],
        valid_paths=[("t1", tuple(readers))],
        capacities={"t1": Ray.CHALLENGE_BITS * path_len},
        script=[],
    )


def attack_ray_out_of_order(
    seed: int = 0,
    order: tuple[int, ...] | None = None,
    mode: str = "default",
    path_len: int = 3,
) -> AttackOutcome:
    """Reorder challenge consumption while the tag travels the true path.

    The network adversary suppresses every reader-to-tag message, keeps
    the observed challenge values and re-delivers them in a permuted
    order; the tag accepts any pending challenge, so every authentication
    succeeds and the owner's claim reports the permuted order.  Against
    the Move events — which follow the real journey — the claim fails the
    sorted check.
    """
    cfg = _ray_config(seed, mode, path_len, strategy="drop_to_tags")
    readers = [t for t, _ in cfg.readers]
    if path_len < 2:
        result = run_protocol(cfg)
        return AttackOutcome(
            name="ray-out-of-order",
            succeeded=False,
            violated_property=None,
            evidence={"run": result, "reason": "single-step path has no permutation"},
        )
    if order is None:
        order = (1, 0) + tuple(range(2, path_len))
    if sorted(order) != list(range(path_len)):
        raise ValueError(f"order must permute 0..{path_len - 1}: {order!r}")

    protocol, run = build_run(cfg)
    for token in readers:
        protocol.visit("t1", token)  # radio suppressed; Move still recorded

    observed: dict[str, bytes] = {}
    for direction, payload in run.net.observations:
        for token in readers:
            if direction == f"{token}->t1":
                observed[token] = payload
    accepted = []
    for idx in order:
        token = readers[idx]
        reply = run.adv.inject(token, "t1", observed[token])
        accepted.append(reply == b"ok")
    protocol.claim("t1")
    result = finalize(protocol, run)

    verdict = _claim_verdict(result)
    succeeded = all(accepted) and verdict is not None and not verdict.sorted
    return AttackOutcome(
        name="ray-out-of-order",
        succeeded=succeeded,
        violated_property="sorted" if succeeded else None,
        evidence={
            "run": result,
            "order": tuple(order),
            "accepted": accepted,
            "claimed": [readers[i] for i in order],
            "labels": _labels(result),
        },
    )


def attack_ray_impersonation(
    seed: int = 0,
    mode: str = "default",
    path_len: int = 4,
    observed_index: int = 1,
    observe: bool = True,
) -> AttackOutcome:
    """Derive every participant's challenge from one observed challenge.

    Challenges differ only by public participant identifiers: XORing the
    observed value with the observed reader's PID and the target reader's
    PID yields the target's challenge, with any path-level PRF term
    cancelling out.  The adversary then answers for all remaining readers
    without the tag moving anywhere.
    """
    cfg = _ray_config(seed, mode, path_len)
    readers = [t for t, _ in cfg.readers]
    protocol, run = build_run(cfg)

    if not observe:
        result = finalize(protocol, run)
        return AttackOutcome(
            name="ray-impersonation",
            succeeded=False,
            violated_property=None,
            evidence={"run": result, "reason": "no challenge observed, c unknown"},
        )

    obs_token = readers[observed_index]
    protocol.visit("t1", obs_token)  # the single over-the-air observation
    observed = next(
        payload
        for direction, payload in run.net.observations
        if direction == f"{obs_token}->t1"
    )
    # PID values are public; c xor term is path-level, so it cancels
    pid = lambda token: crypto.hash_bytes(b"pid-" + token.encode())
    shared = crypto.xor_bytes(observed, pid(obs_token))
    accepted = []
    derived = []
    for token in readers:
        if token == obs_token:
            continue
        value = crypto.xor_bytes(shared, pid(token))
        derived.append(token)
        reply = run.adv.inject(token, "t1", value)
        accepted.append(reply == b"ok")
    protocol.claim("t1")
    result = finalize(protocol, run)

    verdict = _claim_verdict(result)
    succeeded = bool(accepted) and all(accepted)
    return AttackOutcome(
        name="ray-impersonation",
        succeeded=succeeded,
        violated_property="sound" if succeeded else None,
        evidence={
            "run": result,
            "observed_reader": obs_token,
            "impersonated": derived,
            "accepted": accepted,
            "claim_unsound": verdict is not None and not verdict.sound,
            "labels": _labels(result),
        },
    )


# --- Burbridge: colluding readers re-sign across overlapping paths ---------

def attack_burbridge_bypass(
    seed: int = 3, mode: str = "default", adversary: AdvModel = AdvModel.ADV_R
) -> AttackOutcome:
    """Route a tag around a mandatory station using another tag's edges.

    Two compromised readers accept the tag on edges registered for a
    second tag's path; with a supply-chain-wide re-signature key the
    bypassed station never notices and the final claim names the full
    registered path — authorized, yet unsound.  Per-tag keys stop the
    re-signing and the journey stalls instead.
    """
    cfg = RunConfig(
        protocol="burbridge",
        seed=seed,
        mode=mode,
        adversary=adversary,
        readers=[("ra", None), ("rb", None), ("rc", None), ("rd", None), ("re", None)],
        tags=["t1", "t2"],
        valid_paths=[
            ("t1", ("ra", "rb", "rc", "rd", "re")),
            ("t2", ("ra", "rb", "rd", "re")),
        ],
        compromise=["rb", "rd"],
        script=[
            ("move", "t1", "ra"),
            ("move", "t1", "rb"),
            ("move", "t1", "rd"),
            ("move", "t1", "re"),
            ("claim", "t1"),
        ],
    )
    result = run_protocol(cfg)
    verdict = _claim_verdict(result)
    succeeded = verdict is not None and verdict.authorized and not verdict.sound
    return AttackOutcome(
        name="burbridge-bypass",
        succeeded=succeeded,
        violated_property="sound" if succeeded else None,
        evidence={
            "run": result,
            "mode": mode,
            "bypassed": "rc",
            "claim_authorized": verdict.authorized if verdict else False,
            "labels": _labels(result),
        },
    )


# --- ReSC: session keys readable on the tag --------------------------------

def attack_resc_key_disclosure(
    seed: int = 0, honest_steps: int = 2, path_len: int = 4
) -> AttackOutcome:
    """Deposit signatures for readers the tag never met.

    Session keys for every step sit in readable tag memory from the day
    of registration.  Reading the tag mid-journey discloses the keys of
    all remaining steps; the adversary then speaks the deposit protocol
    itself — greeting, MAC over the fresh nonce, signature record — and
    the database later finds every slot correctly filled and claims the
    registered path, ghost steps included.
    """
    if not 0 <= honest_steps <= path_len:
        raise ValueError("honest_steps must lie within the path")
    readers = [f"r{i}" for i in range(1, path_len + 1)]
    cfg = RunConfig(
        protocol="resc",
        seed=seed,
        adversary=AdvModel.ADV_R,
        readers=[(t, None) for t in readers],
        tags=["t1"],
        valid_paths=[("t1", tuple(readers))],
        capacities={"t1": storage_bits(path_len)},
        script=[],
    )
    protocol, run = build_run(cfg)
    for token in readers[:honest_steps]:
        protocol.visit("t1", token)

    fields = _snapshot_fields(run.adv.read_tag("t1"))
    tid = fields["tid"]
    remaining = list(range(honest_steps + 1, path_len + 1))
    if not remaining:
        protocol.claim("t1")
        result = finalize(protocol, run)
        return AttackOutcome(
            name="resc-key-disclosure",
            succeeded=False,
            violated_property=None,
            evidence={"run": result, "reason": "journey complete, no unused keys"},
        )

    last_ts = crypto.bytes_to_int(fields[f"ts{honest_steps}"]) if honest_steps else 0
    deposited = []
    for slot in remaining:
        key = fields[f"k{slot}"]
        hello = run.adv.inject(readers[slot - 1], "t1", b"HELLO")
        _, nonce, _ = crypto.split_length_prefixed(hello)
        idx_bytes = crypto.int_to_bytes(slot, 3)
        last_ts += 1
        ts_bytes = crypto.int_to_bytes(last_ts, 3)
        sig = crypto.mac(key, crypto.concat_length_prefixed(tid, idx_bytes, ts_bytes))
        auth = crypto.mac(
            key, crypto.concat_length_prefixed(nonce, idx_bytes, ts_bytes, sig)
        )
        reply = run.adv.inject(
            readers[slot - 1],
            "t1",
            crypto.concat_length_prefixed(b"DEPOSIT", idx_bytes, ts_bytes, sig, auth),
        )
        deposited.append(reply == b"ok")
    protocol.claim("t1")
    result = finalize(protocol, run)

    verdict = _claim_verdict(result)
    succeeded = all(deposited) and verdict is not None and not verdict.sound
    return AttackOutcome(
        name="resc-key-disclosure",
        succeeded=succeeded,
        violated_property="sound" if succeeded else None,
        evidence={
            "run": result,
            "honest_steps": honest_steps,
            "ghost_slots": remaining,
            "deposited": deposited,
            "labels": _labels(result),
        },
    )


# --- Tracker: path evaluation forgets the order ----------------------------

def attack_tracker_order_search(
    seed: int = 0,
    q: int = 1009,
    n_readers: int = 4,
    length: int = 3,
    trials: int = 2000,
    equal: bool = False,
) -> AttackOutcome:
    """Search visit-order permutations for accepted out-of-order paths.

    Each trial draws a fresh evaluation point, blinding coefficient and
    per-reader step coefficients (distinct, unless `equal` forces the
    first two readers to share one), fixes the registered path and tests
    every non-identity permutation of it for an evaluation collision —
    exactly the check the path manager performs.  Shared coefficients
    make the adjacent swap collide always; distinct coefficients leave a
    residual acceptance rate on the order of 1/q.
    """
    if q > 1009:
        raise BoundedSearchError(f"field size {q} exceeds the search bound of 1009")
    if n_readers > 4:
        raise BoundedSearchError(f"{n_readers} readers exceed the search bound of 4")
    if length > 4 or length > n_readers:
        raise BoundedSearchError(f"path length {length} out of bounds")

    from itertools import permutations

    field_q = crypto.PrimeField(q)
    rng = Random(seed)
    perms = [p for p in permutations(range(length)) if p != tuple(range(length))]
    if not perms:
        return AttackOutcome(
            name="tracker-order-search",
            succeeded=False,
            violated_property=None,
            evidence={"reason": "single-step path has no permutation", "trials": 0},
        )

    checks = 0
    accepted = 0
    adjacent_checks = 0
    adjacent_accepted = 0
    witnesses: list[dict[str, Any]] = []
    adjacent = {
        tuple(range(i)) + (i + 1, i) + tuple(range(i + 2, length))
        for i in range(length - 1)
    }
    for trial in range(trials):
        x0 = field_q.rand_nonzero(rng)
        a0 = field_q.rand_nonzero(rng)
        coeffs = rng.sample(range(1, q), n_readers)
        if equal:
            coeffs[1] = coeffs[0]
        path = list(range(length))
        reference = crypto.path_poly_eval(field_q, a0, [coeffs[r] for r in path], x0)
        for perm in perms:
            value = crypto.path_poly_eval(field_q, a0, [coeffs[path[i]] for i in perm], x0)
            checks += 1
            hit = value == reference
            accepted += hit
            if perm in adjacent:
                adjacent_checks += 1
                adjacent_accepted += hit
            if hit and len(witnesses) < 20:
                witnesses.append({"trial": trial, "perm": perm, "x0": x0})

    rate = accepted / checks
    lo, hi = wilson_interval(accepted, checks)
    adj_rate = adjacent_accepted / adjacent_checks if adjacent_checks else 0.0
    return AttackOutcome(
        name="tracker-order-search",
        succeeded=accepted > 0,
        violated_property="sorted" if accepted > 0 else None,
        evidence={
            "q": q,
            "trials": trials,
            "equal_coefficients": equal,
            "checks": checks,
            "accepted": accepted,
            "rate": rate,
            "rate_ci": (lo, hi),
            "adjacent_checks": adjacent_checks,
            "adjacent_accepted": adjacent_accepted,
            "adjacent_rate": adj_rate,
            "witnesses": witnesses,
        },
    )


def tracker_collision_rate(
    q: int, pairs: int, seed: int = 0, n_readers: int = 8, length: int = 4
) -> tuple[int, int]:
    """Collision count for evaluations of random distinct path pairs.

    Each pair gets a fresh evaluation point, blinding coefficient and
    coefficient table; two distinct reader sequences of equal length are
    drawn and their polynomial evaluations compared.  Distinct paths
    collide with probability about 1/q.  The reader universe is kept
    comfortably larger than the path so that a random pair is rarely a
    rearrangement of the same readers (rearranged pairs share the
    coefficient sum and collide roughly twice as often).
    """
    field_q = crypto.PrimeField(q)
    rng = Random(seed)
    collisions = 0
    for _ in range(pairs):
        x0 = field_q.rand_nonzero(rng)
        a0 = field_q.rand_nonzero(rng)
        coeffs = [field_q.rand_nonzero(rng) for _ in range(n_readers)]
        first = [rng.randrange(n_readers) for _ in range(length)]
        second = [rng.randrange(n_readers) for _ in range(length)]
        while second == first:
            second = [rng.randrange(n_readers) for _ in range(length)]
        v1 = crypto.path_poly_eval(field_q, a0, [coeffs[r] for r in first], x0)
        v2 = crypto.path_poly_eval(field_q, a0, [coeffs[r] for r in second], x0)
        collisions += v1 == v2
    return collisions, pairs


ATTACKS: dict[str, Any] = {
    "rfchain-linking": attack_rfchain_linking,
    "rfchain-length-extension": probe_rfchain_length_extension,
    "ray-out-of-order": attack_ray_out_of_order,
    "ray-impersonation": attack_ray_impersonation,
    "burbridge-bypass": attack_burbridge_bypass,
    "resc-key-disclosure": attack_resc_key_disclosure,
    "tracker-order-search": attack_tracker_order_search,
}
