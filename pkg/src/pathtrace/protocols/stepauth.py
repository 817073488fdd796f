"""Nested hybrid encryption of a single static path.

The issuer wraps the journey inside-out: the innermost plaintext names the
tag and its full path; each enclosing layer encrypts a fresh session key
to one reader's public key, encrypts (step index, next index, tag, inner
blob) under that session key, and signs the result.  A reader that can
open the outermost layer peels it and writes the inner blob back; only
the intended reader of each layer can make progress, so the order of the
path is forced by the encryption itself.  The final reader uncovers the
terminal record and announces the path claim.

Identity lives only inside the encrypted bodies: the over-the-air blobs
carry no tag identifier, and a blob replayed onto a different tag is
rejected when the peeled body names the wrong tag.

Storage grows with path length l: one signed layer costs 896 nominal bits
(512 key encapsulation + 256 body + 128 signature) and the terminal record
128, giving 1024 + 896*(l-1) total.
"""

from __future__ import annotations

from pathtrace import crypto
from pathtrace.protocols.base import ProtocolModel, VerifierPolicyError, register_protocol
from pathtrace.trace import PathClaim

KEM_BITS = 512
SYM_BITS = 256
SIG_BITS = 128
LAYER_BITS = KEM_BITS + SYM_BITS + SIG_BITS
TERMINAL_BITS = 128


def secret_size_bits(path_length: int) -> int:
    """Nominal storage for the nested secret of a length-l path."""
    if path_length < 1:
        raise ValueError("path length must be at least 1")
    return 1024 + 896 * (path_length - 1)


@register_protocol
class StepAuth(ProtocolModel):
    name = "stepauth"
    architecture = "offline"
    verifier_policy = "checkpoint"

    def setup(self) -> None:
        self.sign_sk, self.sign_vk = crypto.new_signing_keypair("mgr", self.rng)
        reader_tokens = [token for token, _ in self.config.readers]
        self.box_priv: dict[str, crypto.BoxPrivate] = {}
        self.box_pub: dict[str, crypto.BoxPublic] = {}
        for token in reader_tokens:
            priv, pub = crypto.new_box_keypair(token, self.rng)
            self.box_priv[token] = priv
            self.box_pub[token] = pub
            self.net.attach_secrets(token, self._secret_provider(token))

        self.path_of: dict[str, tuple[str, ...]] = {}
        for tag_token in self.config.tags:
            paths = self.declared_paths(tag_token)
            if len(paths) != 1:
                raise ValueError(f"stepauth needs exactly one static path for {tag_token}")
            self.path_of[tag_token] = paths[0]
            self.emit_valid_path(tag_token, paths[0])
            blob = self._build_secret(tag_token, paths[0])
            self.run.memory(tag_token).store(
                "secret", blob, nominal_bits=secret_size_bits(len(paths[0]))
            )

    def _secret_provider(self, token: str):
        return lambda: {"box_x": crypto.int_to_bytes(self.box_priv[token].priv.x, 16)}

    def reader_secrets(self, reader_token: str) -> dict[str, bytes]:
        return self._secret_provider(reader_token)()

    def _build_secret(self, tag_token: str, path: tuple[str, ...]) -> bytes:
        inner = crypto.concat_length_prefixed(
            b"END", tag_token.encode(), *(t.encode() for t in path)
        )
        for i in range(len(path), 0, -1):
            session = self.rng.randbytes(32)
            body = crypto.sym_enc(
                session,
                crypto.concat_length_prefixed(
                    crypto.int_to_bytes(i, 4),
                    crypto.int_to_bytes(i + 1, 4),
                    tag_token.encode(),
                    inner,
                ),
            )
            kem = crypto.pk_enc(self.box_pub[path[i - 1]], session, self.rng)
            message = crypto.concat_length_prefixed(kem, body)
            inner = crypto.sign(self.sign_sk, message).to_bytes()
        return inner

    @staticmethod
    def _parse_terminal(blob: bytes) -> tuple[str, tuple[str, ...]] | None:
        try:
            parts = crypto.split_length_prefixed(blob)
        except crypto.CryptoError:
            return None
        if len(parts) < 3 or parts[0] != b"END":
            return None
        return parts[1].decode(), tuple(p.decode() for p in parts[2:])

    def _process_arrival(self, tag_token: str, reader_token: str) -> bool:
        mem = self.run.memory(tag_token)
        presented = self.net.transmit(tag_token, reader_token, mem.load("secret"))
        if presented is None:
            return False
        sig = crypto.parse_signature(presented)
        if sig is None or not crypto.verify(self.sign_vk, sig):
            self.net.log_anomaly(
                f"stepauth {reader_token} rejects {tag_token}: bad issuer signature"
            )
            return False
        try:
            kem, body = crypto.split_length_prefixed(sig.message)
        except (crypto.CryptoError, ValueError):
            self.net.log_anomaly(f"stepauth {reader_token} rejects {tag_token}: malformed layer")
            return False
        try:
            session = crypto.pk_dec(self.box_priv[reader_token], kem)
            plain = crypto.sym_dec(session, body)
        except crypto.AuthenticationError:
            self.net.log_anomaly(
                f"stepauth {reader_token} cannot peel the layer presented by {tag_token}"
            )
            return False
        step_i, step_next, bound_tag, inner = crypto.split_length_prefixed(plain)
        if bound_tag.decode() != tag_token:
            self.net.log_anomaly(
                f"stepauth {reader_token} rejects {tag_token}: layer bound to another tag"
            )
            return False
        path = self.path_of[tag_token]
        index = crypto.bytes_to_int(step_i)
        terminal = self._parse_terminal(inner)
        if terminal is not None:
            if index != len(path):
                self.net.log_anomaly(
                    f"stepauth terminal layer at step {index} of {len(path)} for {tag_token}"
                )
                return False
            written = self.net.transmit(reader_token, tag_token, inner)
            if written is None:
                return False
            mem.store("secret", written, nominal_bits=TERMINAL_BITS)
            claimed_tag, claimed_path = terminal
            self.trace.append(
                PathClaim(
                    self.run.tag_id(claimed_tag),
                    tuple(self.run.reader_id(t) for t in claimed_path),
                    self.run.reader_id(reader_token),
                )
            )
            return True
        written = self.net.transmit(reader_token, tag_token, inner)
        if written is None:
            return False
        remaining = len(path) - index
        mem.store("secret", written, nominal_bits=secret_size_bits(remaining))
        return True

    def _process_claim(self, tag_token: str, verifier: str | None) -> bool:
        checkpoint = self.path_of[tag_token][-1]
        if verifier is not None and verifier != checkpoint:
            raise VerifierPolicyError(
                f"only the checkpoint {checkpoint} can verify, not {verifier}"
            )
        terminal = self._parse_terminal(self.run.memory(tag_token).load("secret"))
        if terminal is None:
            self.net.log_anomaly(f"stepauth checkpoint: {tag_token} has not finished its path")
            return False
        claimed_tag, claimed_path = terminal
        self.trace.append(
            PathClaim(
                self.run.tag_id(claimed_tag),
                tuple(self.run.reader_id(t) for t in claimed_path),
                self.run.reader_id(checkpoint),
            )
        )
        return True

    def artifacts(self) -> dict:
        return {
            "paths": dict(self.path_of),
            "storage_bits": {t: self.run.memory(t).used_bits() for t in self.config.tags},
            "secret_bits": {
                t: secret_size_bits(len(p)) for t, p in self.path_of.items()
            },
        }
