"""Challenge-set authentication against a current owner's path code.

The current owner folds the public participant identifiers of the
pre-defined path into a path code, derives one challenge value per
participant from it, and loads the whole challenge set onto the tag.
Each participant later presents its challenge over the air; the tag
accepts any challenge still pending, in any order — nothing binds a
challenge to a position.  When every challenge has been used, the owner
announces the path claim in the order the tag consumed them.

The challenge derivation is linear: c_i = c xor PID_i (optionally with a
path-level PRF term mixed in, the "prf" mode).  Since the PID values are
public, one observed challenge reveals c (or its PRF-masked variant) and
with it every other participant's challenge.
"""

from __future__ import annotations

from pathtrace import crypto
from pathtrace.protocols.base import ProtocolModel, VerifierPolicyError, register_protocol
from pathtrace.trace import PathClaim, backend


@register_protocol
class Ray(ProtocolModel):
    name = "ray"
    architecture = "offline"
    verifier_policy = "backend"

    CHALLENGE_BITS = 256

    def setup(self) -> None:
        self.co_token = self.config.params.get("co", "co")
        reader_tokens = [token for token, _ in self.config.readers]
        self.pids: dict[str, bytes] = {
            t: crypto.hash_bytes(b"pid-" + t.encode()) for t in reader_tokens
        }
        self.rid_co = crypto.hash_bytes(b"rid-" + self.co_token.encode())
        # participant identifiers are public knowledge
        for pid in self.pids.values():
            self.net.knowledge.observe(pid)
        self.net.knowledge.observe(self.rid_co)

        self.prf_key = self.rng.randbytes(32)
        self.path_of: dict[str, tuple[str, ...]] = {}
        self.code_of: dict[str, bytes] = {}
        self.term_of: dict[str, bytes] = {}
        self.challenges: dict[tuple[str, str], bytes] = {}
        self.owner_of: dict[str, dict[bytes, str]] = {}
        self._consumed: dict[str, list[bytes]] = {}

        for tag_token in self.config.tags:
            paths = self.declared_paths(tag_token)
            if len(paths) != 1:
                raise ValueError(f"ray needs exactly one pre-defined path for {tag_token}")
            path = paths[0]
            self.path_of[tag_token] = path
            self.emit_valid_path(tag_token, path)
            folded = bytes(32)
            for t in path:
                folded = crypto.xor_bytes(folded, self.pids[t])
            path_code = crypto.hash_bytes(folded)
            c = crypto.hash_bytes(crypto.xor_bytes(path_code, self.rid_co))
            self.code_of[tag_token] = c
            term = bytes(32)
            if self.config.mode == "prf":
                term = crypto.prf(self.prf_key, crypto.int_to_bytes(len(path), 4))
            self.term_of[tag_token] = term
            owner: dict[bytes, str] = {}
            values: list[bytes] = []
            for t in path:
                value = crypto.xor_bytes(crypto.xor_bytes(c, self.pids[t]), term)
                self.challenges[(tag_token, t)] = value
                owner[value] = t
                values.append(value)
                # out-of-band hand-off of each participant's challenge
                self.net.transmit(self.co_token, t, value, trusted=True)
            self.owner_of[tag_token] = owner
            self._consumed[tag_token] = []
            loaded = crypto.concat_length_prefixed(*values)
            self.net.transmit(self.co_token, tag_token, loaded, trusted=True)
            mem = self.run.memory(tag_token)
            mem.store("pending", loaded, nominal_bits=self.CHALLENGE_BITS * len(values))
            mem.store("consumed", b"", nominal_bits=0)
            self.net.register_handler(tag_token, self._tag_handler(tag_token))

        for token in reader_tokens:
            self.net.attach_secrets(token, self._secret_provider(token))

    def _secret_provider(self, token: str):
        def provide() -> dict[str, bytes]:
            secrets: dict[str, bytes] = {}
            for tag_token, path in self.path_of.items():
                if token not in path:
                    continue
                secrets[f"challenge.{tag_token}"] = self.challenges[(tag_token, token)]
                secrets[f"c.{tag_token}"] = self.code_of[tag_token]
                if self.config.mode == "prf":
                    secrets[f"prf.{tag_token}"] = self.term_of[tag_token]
            return secrets

        return provide

    def reader_secrets(self, reader_token: str) -> dict[str, bytes]:
        return self._secret_provider(reader_token)()

    def _tag_handler(self, tag_token: str):
        def handle(payload: bytes, sender: str) -> bytes | None:
            mem = self.run.memory(tag_token)
            pending = mem.load("pending")
            values = list(crypto.split_length_prefixed(pending)) if pending else []
            if payload not in values:
                return None
            values.remove(payload)
            mem.store(
                "pending",
                crypto.concat_length_prefixed(*values) if values else b"",
                nominal_bits=self.CHALLENGE_BITS * len(values),
            )
            used = self._consumed[tag_token]
            used.append(payload)
            mem.store(
                "consumed",
                crypto.concat_length_prefixed(*used),
                nominal_bits=self.CHALLENGE_BITS * len(used),
            )
            return b"ok"

        return handle

    def _process_arrival(self, tag_token: str, reader_token: str) -> bool:
        value = self.challenges.get((tag_token, reader_token))
        if value is None:
            self.net.log_anomaly(f"ray {reader_token} holds no challenge for {tag_token}")
            return False
        response = self.net.request(reader_token, tag_token, value)
        if response != b"ok":
            self.net.log_anomaly(f"ray {tag_token} refused the challenge of {reader_token}")
            return False
        return True

    def _process_claim(self, tag_token: str, verifier: str | None) -> bool:
        if verifier is not None and verifier != self.co_token:
            raise VerifierPolicyError(f"only the owner {self.co_token} verifies, not {verifier}")
        mem = self.run.memory(tag_token)
        reported = self.net.transmit(tag_token, self.co_token, mem.load("consumed"))
        if reported is None:
            return False
        values = list(crypto.split_length_prefixed(reported)) if reported else []
        owner = self.owner_of[tag_token]
        expected = {self.challenges[(tag_token, t)] for t in self.path_of[tag_token]}
        if set(values) != expected:
            self.net.log_anomaly(f"ray owner: {tag_token} has unconsumed or foreign challenges")
            return False
        order = tuple(owner[v] for v in values)
        self.trace.append(
            PathClaim(
                self.run.tag_id(tag_token),
                tuple(self.run.reader_id(t) for t in order),
                backend(self.co_token),
            )
        )
        return True

    def artifacts(self) -> dict:
        return {
            "mode": self.config.mode,
            "co": self.co_token,
            "pids": dict(self.pids),
            "rid_co": self.rid_co,
            "paths": dict(self.path_of),
            "challenges": dict(self.challenges),
            "terms": dict(self.term_of),
            "consumed": {t: list(v) for t, v in self._consumed.items()},
        }
