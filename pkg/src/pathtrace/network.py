"""Dolev-Yao network model with two adversary strengths.

Every untrusted transmission passes through an adversary strategy that may
deliver, modify, drop, store for later replay, or inject messages, and every
observed payload feeds a knowledge set closed under a bounded deduction
relation (decompose fields, strip signatures, XOR and hash known terms,
decrypt under known keys).

Two capability levels:

* AdvT - full network control plus reading and writing tag memory;
* AdvR - additionally compromises readers, obtaining their secrets.

Tag memory is modelled with nominal bit accounting so that protocol storage
formulas and capacity violations are observable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from random import Random
from typing import Callable, Iterable

from pathtrace import crypto


class AdvModel(enum.Enum):
    ADV_T = "AdvT"
    ADV_R = "AdvR"

    def __str__(self) -> str:
        return self.value


class CapabilityError(Exception):
    """An operation outside the configured adversary model was attempted."""


class TagCapacityError(Exception):
    """A write would exceed the tag's nominal storage capacity."""


class TagMemory:
    """Field store with nominal bit accounting against a capacity."""

    def __init__(self, capacity_bits: int = 512) -> None:
        self.capacity_bits = capacity_bits
        self._fields: dict[str, bytes] = {}
        self._nominal: dict[str, int] = {}

    def used_bits(self) -> int:
        return sum(self._nominal.values())

    def store(self, name: str, value: bytes, nominal_bits: int | None = None) -> None:
        bits = len(value) * 8 if nominal_bits is None else nominal_bits
        new_total = self.used_bits() - self._nominal.get(name, 0) + bits
        if new_total > self.capacity_bits:
            raise TagCapacityError(
                f"{new_total} bits exceed tag capacity of {self.capacity_bits}"
            )
        self._fields[name] = value
        self._nominal[name] = bits

    def load(self, name: str) -> bytes:
        return self._fields[name]

    def get(self, name: str, default: bytes | None = None) -> bytes | None:
        return self._fields.get(name, default)

    def delete(self, name: str) -> None:
        self._fields.pop(name, None)
        self._nominal.pop(name, None)

    def names(self) -> list[str]:
        return list(self._fields)

    def snapshot(self) -> bytes:
        parts: list[bytes] = []
        for name, value in self._fields.items():
            parts.append(name.encode())
            parts.append(value)
        return crypto.concat_length_prefixed(*parts)

    def overwrite(self, data: bytes) -> None:
        """Replace the whole contents with attacker-chosen bytes."""
        bits = len(data) * 8
        if bits > self.capacity_bits:
            raise TagCapacityError(f"{bits} bits exceed tag capacity of {self.capacity_bits}")
        try:
            parts = crypto.split_length_prefixed(data)
            if len(parts) % 2 != 0:
                raise crypto.CryptoError("odd field count")
            fields = {parts[i].decode(): parts[i + 1] for i in range(0, len(parts), 2)}
        except (crypto.CryptoError, UnicodeDecodeError):
            fields = {"__raw__": data}
        self._fields = dict(fields)
        self._nominal = {name: len(value) * 8 for name, value in fields.items()}


class Knowledge:
    """Ordered set of observed byte strings with bounded deduction.

    Observation decomposes structured payloads (length-prefixed fields and
    signature blobs) into atoms.  ``can_derive`` additionally closes over
    XOR of equal-length knowns, hashing, signature stripping and symmetric
    decryption under known 32-byte keys, up to a small depth.
    """

    def __init__(self) -> None:
        self._atoms: dict[bytes, None] = {}

    def observe(self, data: bytes) -> None:
        if data in self._atoms:
            return
        self._atoms[data] = None
        self._decompose(data)

    def _decompose(self, data: bytes) -> None:
        sig = crypto.parse_signature(data)
        if sig is not None:
            self.observe(sig.message)
            self.observe(sig.tag)
            return
        try:
            parts = crypto.split_length_prefixed(data)
        except crypto.CryptoError:
            return
        if len(parts) >= 2:
            for part in parts:
                if part:
                    self.observe(part)

    def observe_all(self, items: Iterable[bytes]) -> None:
        for item in items:
            self.observe(item)

    def atoms(self) -> list[bytes]:
        return list(self._atoms)

    def knows(self, data: bytes) -> bool:
        return data in self._atoms

    def __len__(self) -> int:
        return len(self._atoms)

    def can_derive(self, target: bytes, depth: int = 2) -> bool:
        """Bounded closure: is the target reachable from current atoms?"""
        known: dict[bytes, None] = dict.fromkeys(self._atoms)
        if target in known:
            return True
        for _ in range(depth):
            new: list[bytes] = []
            items = list(known)
            by_len: dict[int, list[bytes]] = {}
            for a in items:
                by_len.setdefault(len(a), []).append(a)
            for a in items:
                h = crypto.hash_bytes(a)
                if h not in known:
                    new.append(h)
                stripped = crypto.parse_signature(a)
                if stripped is not None and stripped.message not in known:
                    new.append(stripped.message)
            for length, group in by_len.items():
                for i, a in enumerate(group):
                    for b in group[i + 1 :]:
                        x = crypto.xor_bytes(a, b)
                        if x not in known:
                            new.append(x)
            keys = [a for a in items if len(a) == 32]
            cts = [a for a in items if len(a) > crypto._SIV_LEN]
            for key in keys:
                for ct in cts:
                    try:
                        pt = crypto.sym_dec(key, ct)
                    except crypto.AuthenticationError:
                        continue
                    if pt not in known:
                        new.append(pt)
            for item in new:
                known[item] = None
            if target in known:
                return True
            if not new:
                break
        return target in known


@dataclass(frozen=True)
class Envelope:
    seq: int
    sender: str
    receiver: str
    payload: bytes


# A strategy sees each untrusted envelope and returns the payload to deliver,
# or None to drop it.  Stateful strategies are objects with __call__.
Strategy = Callable[[Envelope, "Network"], "bytes | None"]


def null_strategy(env: Envelope, net: "Network") -> bytes | None:
    return env.payload


class Network:
    """Message fabric, transcript and adversary state for one run."""

    def __init__(
        self,
        rng: Random,
        model: AdvModel = AdvModel.ADV_T,
        strategy: Strategy | None = None,
    ) -> None:
        self.rng = rng
        self.model = model
        self.strategy: Strategy = strategy if strategy is not None else null_strategy
        self.knowledge = Knowledge()
        self.transcript: list[str] = []
        self.observations: list[tuple[str, bytes]] = []  # (direction, payload) seen by adversary
        self.anomalies: list[str] = []
        self._seq = 0
        self._tags: dict[str, TagMemory] = {}
        self._secrets: dict[str, Callable[[], dict[str, bytes]]] = {}
        self._handlers: dict[str, Callable[[bytes, str], "bytes | None"]] = {}
        self.compromised: list[str] = []

    # --- wiring ---------------------------------------------------------

    def attach_tag(self, token: str, memory: TagMemory) -> None:
        self._tags[token] = memory

    def tag_memory(self, token: str) -> TagMemory:
        return self._tags[token]

    def attach_secrets(self, token: str, provider: Callable[[], dict[str, bytes]]) -> None:
        self._secrets[token] = provider

    def register_handler(self, token: str, handler: Callable[[bytes, str], "bytes | None"]) -> None:
        self._handlers[token] = handler

    def log_anomaly(self, text: str) -> None:
        self.anomalies.append(text)

    # --- transmission ---------------------------------------------------

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _log(self, seq: int, sender: str, receiver: str, payload: bytes, action: str) -> None:
        self.transcript.append(f"{seq} {sender}->{receiver} {payload.hex()} {action}")

    def transmit(self, sender: str, receiver: str, payload: bytes, trusted: bool = False) -> bytes | None:
        """Send one message; returns what arrives, or None when dropped.

        Trusted channels bypass the adversary entirely (registration links
        between issuers and backends); everything else is observed and may
        be tampered with.
        """
        seq = self._next_seq()
        if trusted:
            self._log(seq, sender, receiver, payload, "trusted")
            return payload
        env = Envelope(seq, sender, receiver, payload)
        self.knowledge.observe(payload)
        self.observations.append((f"{sender}->{receiver}", payload))
        delivered = self.strategy(env, self)
        if delivered is None:
            self._log(seq, sender, receiver, payload, "dropped")
            return None
        action = "delivered" if delivered == payload else "modified"
        self._log(seq, sender, receiver, delivered, action)
        return delivered

    def request(self, sender: str, receiver: str, payload: bytes) -> bytes | None:
        """Transmit to a registered handler and relay its response back."""
        arrived = self.transmit(sender, receiver, payload)
        if arrived is None:
            return None
        handler = self._handlers.get(receiver)
        if handler is None:
            return None
        response = handler(arrived, sender)
        if response is None:
            return None
        return self.transmit(receiver, sender, response)


class AdversaryContext:
    """Capability surface handed to strategies and attack scripts."""

    def __init__(self, net: Network) -> None:
        self.net = net
        self.stored: list[Envelope] = []

    @property
    def model(self) -> AdvModel:
        return self.net.model

    @property
    def knowledge(self) -> Knowledge:
        return self.net.knowledge

    @property
    def rng(self) -> Random:
        return self.net.rng

    def read_tag(self, token: str) -> bytes:
        """Skim the tag's memory contents (both adversary models)."""
        snapshot = self.net.tag_memory(token).snapshot()
        seq = self.net._next_seq()
        self.net._log(seq, "adv", token, snapshot, "read_tag")
        self.net.knowledge.observe(snapshot)
        self.net.observations.append((f"adv<-{token}", snapshot))
        return snapshot

    def write_tag(self, token: str, data: bytes) -> None:
        """Overwrite tag memory (both adversary models, capacity checked)."""
        seq = self.net._next_seq()
        self.net._log(seq, "adv", token, data, "write_tag")
        self.net.tag_memory(token).overwrite(data)

    def compromise(self, token: str) -> dict[str, bytes]:
        """Obtain a reader's secrets; AdvR only."""
        if self.net.model is not AdvModel.ADV_R:
            raise CapabilityError(f"compromising {token} requires AdvR")
        provider = self.net._secrets.get(token)
        if provider is None:
            raise CapabilityError(f"no compromisable secrets registered for {token}")
        secrets = provider()
        seq = self.net._next_seq()
        blob = crypto.concat_length_prefixed(
            *(part for name, value in secrets.items() for part in (name.encode(), value))
        )
        self.net._log(seq, "adv", token, blob, "compromise")
        self.net.knowledge.observe(blob)
        if token not in self.net.compromised:
            self.net.compromised.append(token)
        return secrets

    def inject(self, sender: str, receiver: str, payload: bytes) -> bytes | None:
        """Deliver an adversary-made message to a registered handler."""
        seq = self.net._next_seq()
        self.net._log(seq, sender, receiver, payload, "injected")
        handler = self.net._handlers.get(receiver)
        if handler is None:
            return None
        response = handler(payload, sender)
        if response is not None:
            self.net.knowledge.observe(response)
            self.net.observations.append((f"{receiver}->{sender}", response))
            rseq = self.net._next_seq()
            self.net._log(rseq, receiver, sender, response, "delivered")
        return response

    def store(self, env: Envelope) -> None:
        self.stored.append(env)

    def replay(self, env: Envelope) -> bytes | None:
        """Re-deliver a stored envelope to its original receiver."""
        return self.inject(env.sender, env.receiver, env.payload)
