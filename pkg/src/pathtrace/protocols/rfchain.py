"""Signature chain on the tag plus masked mirror records on a shared ledger.

The tag carries an offline secret: a_0 is a hash over (ID, f, pwd, r) and
each reader v_i replaces it with its signature over the previous value.
Every step also publishes an online record to an append-only ledger under
a pseudo-identity: the record body is the previous chain value masked with
a step key H(h_i), h_i = ID||f||pwd||r||i, and the pseudo-identity is the
tag identity encrypted under that same step key.  A verifier with the
system secrets walks the signature chain from the tag, recomputes every
step key, and checks that each chain level has its ledger record before
announcing the path claim.

Reusing H(h_i) as both mask and pseudo-identity key is what the linking
attack exploits.  The "patched" mode stores a fresh per-step salt in the
record and derives separate keys for mask and pseudo-identity from it,
with the mask applied through authenticated encryption rather than a
keystream, so recovering a candidate key from record algebra is no longer
possible; holders of the system secrets can still link everything.

The scheme registers no valid paths, so its claims are never authorized.
"""

from __future__ import annotations

from pathtrace import crypto
from pathtrace.protocols.base import ProtocolModel, VerifierPolicyError, register_protocol
from pathtrace.trace import PathClaim, backend

# Nominal on-tag sizes: an EPC identifier and one fixed-width signature
# (the model blob embeds its message, so the byte length is larger).
ID_BITS = 96
CHAIN_BITS = 512


class SharedLedger:
    """Append-only (pseudo_id, payload) records; no deletion, no mutation."""

    def __init__(self) -> None:
        self._records: list[tuple[bytes, bytes]] = []

    def add(self, pseudo_id: bytes, payload: bytes) -> None:
        self._records.append((pseudo_id, payload))

    def records(self) -> list[tuple[bytes, bytes]]:
        return list(self._records)

    def __len__(self) -> int:
        return len(self._records)


def step_input(identity: bytes, f: bytes, pwd: bytes, nonce: bytes, index: int) -> bytes:
    """h_i = ID||f||pwd||r||i with the raw concatenation the scheme uses."""
    return crypto.concat_raw(identity, f, pwd, nonce, str(index).encode())


@register_protocol
class RfChain(ProtocolModel):
    name = "rfchain"
    architecture = "online"
    verifier_policy = "backend"

    def setup(self) -> None:
        self.f = self.rng.randbytes(16)
        self.pwd = self.rng.randbytes(16)
        self.nonce = self.rng.randbytes(16)
        self.verifier_token = self.config.params.get("verifier", "bc")
        self.ledger = SharedLedger()
        self.ledger_truth: list[tuple[str, int]] = []

        reader_tokens = [token for token, _ in self.config.readers]
        self.sign_sk: dict[str, crypto.SigningKey] = {}
        self.sign_vk: dict[str, crypto.VerifyKey] = {}
        for token in reader_tokens:
            sk, vk = crypto.new_signing_keypair(token, self.rng)
            self.sign_sk[token] = sk
            self.sign_vk[token] = vk
            self.net.attach_secrets(token, self._secret_provider(token))

        self.ids: dict[str, bytes] = {}
        self._steps: dict[str, list[str]] = {}
        for tag_token in self.config.tags:
            identity = b"epc-" + tag_token.encode()
            self.ids[tag_token] = identity
            self._steps[tag_token] = []
            self.net.transmit(tag_token, self.verifier_token, identity, trusted=True)
            mem = self.run.memory(tag_token)
            mem.store("id", identity, nominal_bits=ID_BITS)
            mem.store("chain", self._initial_secret(identity), nominal_bits=CHAIN_BITS)

    def _secret_provider(self, token: str):
        return lambda: {
            "f": self.f,
            "pwd": self.pwd,
            "r": self.nonce,
            "sign": self.sign_sk[token].secret,
        }

    def reader_secrets(self, reader_token: str) -> dict[str, bytes]:
        return self._secret_provider(reader_token)()

    def _initial_secret(self, identity: bytes) -> bytes:
        return crypto.hash_bytes(crypto.concat_raw(identity, self.f, self.pwd, self.nonce))

    def step_key(self, identity: bytes, index: int) -> bytes:
        return crypto.hash_bytes(step_input(identity, self.f, self.pwd, self.nonce, index))

    def _make_record(self, identity: bytes, index: int, prev_chain: bytes) -> tuple[bytes, bytes]:
        if self.config.mode == "patched":
            salt = self.rng.randbytes(8)
            h = step_input(identity, self.f, self.pwd, self.nonce, index)
            pid_key = crypto.hash_bytes(crypto.concat_raw(h, salt, b"pid"))
            mask_key = crypto.hash_bytes(crypto.concat_raw(h, salt, b"mask"))
            pseudo = crypto.sym_enc(pid_key, identity)
            payload = crypto.concat_length_prefixed(salt, crypto.sym_enc(mask_key, prev_chain))
            return pseudo, payload
        key = self.step_key(identity, index)
        return crypto.sym_enc(key, identity), crypto.xor_stream(prev_chain, key)

    def _record_matches(
        self, pseudo: bytes, payload: bytes, identity: bytes, index: int, prev_chain: bytes
    ) -> bool:
        if self.config.mode == "patched":
            try:
                salt, body = crypto.split_length_prefixed(payload)
            except (crypto.CryptoError, ValueError):
                return False
            h = step_input(identity, self.f, self.pwd, self.nonce, index)
            pid_key = crypto.hash_bytes(crypto.concat_raw(h, salt, b"pid"))
            mask_key = crypto.hash_bytes(crypto.concat_raw(h, salt, b"mask"))
            return pseudo == crypto.sym_enc(pid_key, identity) and body == crypto.sym_enc(
                mask_key, prev_chain
            )
        key = self.step_key(identity, index)
        return pseudo == crypto.sym_enc(key, identity) and payload == crypto.xor_stream(
            prev_chain, key
        )

    def _process_arrival(self, tag_token: str, reader_token: str) -> bool:
        mem = self.run.memory(tag_token)
        presented = self.net.transmit(
            tag_token, reader_token, crypto.concat_length_prefixed(mem.load("id"), mem.load("chain"))
        )
        if presented is None:
            return False
        try:
            identity, chain = crypto.split_length_prefixed(presented)
        except (crypto.CryptoError, ValueError):
            self.net.log_anomaly(f"rfchain {reader_token} got malformed tag data from {tag_token}")
            return False
        steps = self._steps[tag_token]
        if steps:
            sig = crypto.parse_signature(chain)
            if sig is None or sig.signer != steps[-1] or not crypto.verify(
                self.sign_vk[sig.signer], sig
            ):
                self.net.log_anomaly(
                    f"rfchain {reader_token} rejects {tag_token}: chain signature invalid"
                )
                return False
        elif chain != self._initial_secret(identity):
            self.net.log_anomaly(
                f"rfchain {reader_token} rejects {tag_token}: initial secret mismatch"
            )
            return False
        index = len(steps) + 1
        pseudo, payload = self._make_record(identity, index, chain)
        posted = self.net.transmit(
            reader_token, self.verifier_token, crypto.concat_length_prefixed(pseudo, payload)
        )
        if posted is None:
            return False
        try:
            arrived_pseudo, arrived_payload = crypto.split_length_prefixed(posted)
        except (crypto.CryptoError, ValueError):
            self.net.log_anomaly("rfchain ledger received a malformed record")
            return False
        self.ledger.add(arrived_pseudo, arrived_payload)
        self.ledger_truth.append((tag_token, index))
        new_chain = crypto.sign(self.sign_sk[reader_token], chain).to_bytes()
        written = self.net.transmit(reader_token, tag_token, new_chain)
        if written is None:
            return False
        mem.store("chain", written, nominal_bits=CHAIN_BITS)
        steps.append(reader_token)
        return True

    def _process_claim(self, tag_token: str, verifier: str | None) -> bool:
        if verifier is not None and verifier != self.verifier_token:
            raise VerifierPolicyError(f"only {self.verifier_token} verifies chains, not {verifier}")
        mem = self.run.memory(tag_token)
        presented = self.net.transmit(
            tag_token,
            self.verifier_token,
            crypto.concat_length_prefixed(mem.load("id"), mem.load("chain")),
        )
        if presented is None:
            return False
        try:
            identity, chain = crypto.split_length_prefixed(presented)
        except (crypto.CryptoError, ValueError):
            self.net.log_anomaly("rfchain verifier got malformed tag data")
            return False
        levels: list[bytes] = [chain]
        signers: list[str] = []
        cursor = chain
        while (sig := crypto.parse_signature(cursor)) is not None:
            if sig.signer not in self.sign_vk or not crypto.verify(self.sign_vk[sig.signer], sig):
                self.net.log_anomaly(f"rfchain verifier: broken chain for {tag_token}")
                return False
            signers.append(sig.signer)
            cursor = sig.message
            levels.append(cursor)
        if cursor != self._initial_secret(identity):
            self.net.log_anomaly(f"rfchain verifier: chain base mismatch for {tag_token}")
            return False
        path = tuple(reversed(signers))
        # levels holds a_n .. a_0; record i must mirror a_{i-1}
        records = self.ledger.records()
        for i in range(1, len(path) + 1):
            prev_chain = levels[len(path) - (i - 1)]
            if not any(
                self._record_matches(pseudo, payload, identity, i, prev_chain)
                for pseudo, payload in records
            ):
                self.net.log_anomaly(
                    f"rfchain verifier: missing ledger record for step {i} of {tag_token}"
                )
                return False
        self.trace.append(
            PathClaim(
                self.run.tag_id(tag_token),
                tuple(self.run.reader_id(t) for t in path),
                backend(self.verifier_token),
            )
        )
        return True

    def artifacts(self) -> dict:
        return {
            "mode": self.config.mode,
            "verifier": self.verifier_token,
            "ledger": self.ledger,
            "ledger_truth": list(self.ledger_truth),
            "ids": dict(self.ids),
            "chain_lengths": {t: len(s) for t, s in self._steps.items()},
        }
