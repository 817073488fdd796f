"""Per-slot session keys on the tag, deposits verified by a central database.

At registration the tag is laid out as TID || P || (k_i, sig_i, index_i,
ts_i) for every step of its registered path: the session keys k_i =
E(k_{r_i}, TID) are preloaded (k_{r_i} being the key the reader shares
with the database) and the signature/index/timestamp fields sit empty
until the matching reader fills them.  A visit runs a challenge-response:
the tag announces TID, pointer and a nonce; the reader derives the slot
key from TID, authenticates with a MAC over the nonce and deposits its
signature record.  The database declares the trace valid when every slot
holds a correct record with increasing timestamps, and then claims the
registered path.

Slot sizes follow the scheme's stated figures — 128-bit keys, 20-bit
indices, 23-bit timestamps, 512-bit signatures — so a length-n path
needs n*(128+20+23+512) bits beyond the identifier and pointer.  The
deposit acceptance is keyed per slot: anyone presenting a MAC under that
slot's key can fill it, which is exactly what the key-disclosure attack
uses, since the keys sit in readable tag memory for the whole journey.
"""

from __future__ import annotations

from pathtrace import crypto
from pathtrace.protocols.base import ProtocolModel, VerifierPolicyError, register_protocol
from pathtrace.trace import PathClaim, backend

KEY_BITS = 128
INDEX_BITS = 20
TS_BITS = 23
SIG_BITS = 512
SLOT_BITS = KEY_BITS + INDEX_BITS + TS_BITS + SIG_BITS


def storage_bits(path_length: int) -> int:
    """Slot storage for a length-n path, identifier and pointer excluded."""
    if path_length < 0:
        raise ValueError("path length cannot be negative")
    return path_length * SLOT_BITS


@register_protocol
class Resc(ProtocolModel):
    name = "resc"
    architecture = "online"
    verifier_policy = "backend"

    def setup(self) -> None:
        self.db_token = self.config.params.get("db", "db")
        reader_tokens = [token for token, _ in self.config.readers]
        self.reader_keys: dict[str, bytes] = {}
        for token in reader_tokens:
            self.reader_keys[token] = self.rng.randbytes(32)
            self.net.attach_secrets(token, self._secret_provider(token))

        self._clock = 0
        self.tids: dict[str, bytes] = {}
        self.path_of: dict[str, tuple[str, ...]] = {}
        self.pufs: dict[str, crypto.PufDevice] = {}
        self._nonce: dict[str, bytes | None] = {}

        for tag_token in self.config.tags:
            paths = self.declared_paths(tag_token)
            if len(paths) != 1:
                raise ValueError(f"resc needs exactly one registered path for {tag_token}")
            path = paths[0]
            self.path_of[tag_token] = path
            self.emit_valid_path(tag_token, path)
            tid = b"tid-" + tag_token.encode()
            self.tids[tag_token] = tid
            puf = crypto.PufDevice(tag_token, self.rng)
            self.pufs[tag_token] = puf
            ccid = puf.respond(b"ccid")
            self.net.transmit(
                tag_token, self.db_token, crypto.concat_length_prefixed(ccid, tid), trusted=True
            )
            mem = self.run.memory(tag_token)
            mem.store("tid", tid, nominal_bits=0)
            mem.store("ptr", b"\x01", nominal_bits=0)
            for i, reader_token in enumerate(path, start=1):
                mem.store(f"k{i}", self.session_key(reader_token, tid), nominal_bits=KEY_BITS)
                mem.store(f"sig{i}", b"", nominal_bits=SIG_BITS)
                mem.store(f"idx{i}", b"", nominal_bits=INDEX_BITS)
                mem.store(f"ts{i}", b"", nominal_bits=TS_BITS)
            self._nonce[tag_token] = None
            self.net.register_handler(tag_token, self._tag_handler(tag_token))

    def session_key(self, reader_token: str, tid: bytes) -> bytes:
        return crypto.sym_enc(self.reader_keys[reader_token], tid)

    def _secret_provider(self, token: str):
        return lambda: {"k_r": self.reader_keys[token]}

    def reader_secrets(self, reader_token: str) -> dict[str, bytes]:
        return self._secret_provider(reader_token)()

    # --- tag side -------------------------------------------------------

    def _tag_handler(self, tag_token: str):
        def handle(payload: bytes, sender: str) -> bytes | None:
            mem = self.run.memory(tag_token)
            if payload == b"HELLO":
                nonce = self.rng.randbytes(8)
                self._nonce[tag_token] = nonce
                return crypto.concat_length_prefixed(
                    mem.load("tid"), nonce, mem.load("ptr")
                )
            try:
                parts = crypto.split_length_prefixed(payload)
            except crypto.CryptoError:
                return None
            if len(parts) != 5 or parts[0] != b"DEPOSIT":
                return None
            _, idx_bytes, ts_bytes, sig, auth = parts
            nonce = self._nonce[tag_token]
            if nonce is None:
                return None
            slot = crypto.bytes_to_int(idx_bytes)
            key = mem.get(f"k{slot}")
            if key is None or mem.load(f"sig{slot}") != b"":
                return None
            expect = crypto.mac(
                key, crypto.concat_length_prefixed(nonce, idx_bytes, ts_bytes, sig)
            )
            if auth != expect:
                return None
            mem.store(f"sig{slot}", sig, nominal_bits=SIG_BITS)
            mem.store(f"idx{slot}", idx_bytes, nominal_bits=INDEX_BITS)
            mem.store(f"ts{slot}", ts_bytes, nominal_bits=TS_BITS)
            self._nonce[tag_token] = None
            ptr = crypto.bytes_to_int(mem.load("ptr"))
            n = len(self.path_of[tag_token])
            while ptr <= n and mem.load(f"sig{ptr}") != b"":
                ptr += 1
            mem.store("ptr", crypto.int_to_bytes(ptr, 1), nominal_bits=0)
            return b"ok"

        return handle

    # --- reader side ----------------------------------------------------

    def deposit_record(self, tid: bytes, slot: int, ts: int, key: bytes) -> tuple[bytes, bytes, bytes]:
        idx_bytes = crypto.int_to_bytes(slot, 3)
        ts_bytes = crypto.int_to_bytes(ts, 3)
        sig = crypto.mac(key, crypto.concat_length_prefixed(tid, idx_bytes, ts_bytes))
        return idx_bytes, ts_bytes, sig

    def _process_arrival(self, tag_token: str, reader_token: str) -> bool:
        hello = self.net.request(reader_token, tag_token, b"HELLO")
        if hello is None:
            return False
        try:
            tid, nonce, ptr_bytes = crypto.split_length_prefixed(hello)
        except (crypto.CryptoError, ValueError):
            self.net.log_anomaly(f"resc {reader_token} got a malformed greeting from {tag_token}")
            return False
        slot = crypto.bytes_to_int(ptr_bytes)
        if slot > len(self.path_of[tag_token]):
            self.net.log_anomaly(f"resc {reader_token}: {tag_token} has no open slot")
            return False
        key = self.session_key(reader_token, tid)
        self._clock += 10
        idx_bytes, ts_bytes, sig = self.deposit_record(tid, slot, self._clock, key)
        auth = crypto.mac(key, crypto.concat_length_prefixed(nonce, idx_bytes, ts_bytes, sig))
        reply = self.net.request(
            reader_token,
            tag_token,
            crypto.concat_length_prefixed(b"DEPOSIT", idx_bytes, ts_bytes, sig, auth),
        )
        if reply != b"ok":
            self.net.log_anomaly(
                f"resc {tag_token} refused the deposit of {reader_token} for slot {slot}"
            )
            return False
        return True

    # --- database side --------------------------------------------------

    def _process_claim(self, tag_token: str, verifier: str | None) -> bool:
        if verifier is not None and verifier != self.db_token:
            raise VerifierPolicyError(f"only the database {self.db_token} verifies, not {verifier}")
        mem = self.run.memory(tag_token)
        presented = self.net.transmit(tag_token, self.db_token, mem.snapshot())
        if presented is None:
            return False
        try:
            parts = crypto.split_length_prefixed(presented)
            fields = {parts[i].decode(): parts[i + 1] for i in range(0, len(parts), 2)}
        except (crypto.CryptoError, ValueError, IndexError, UnicodeDecodeError):
            self.net.log_anomaly("resc database got a malformed tag image")
            return False
        path = self.path_of[tag_token]
        tid = fields.get("tid", b"")
        if tid != self.tids[tag_token]:
            self.net.log_anomaly(f"resc database: identifier mismatch for {tag_token}")
            return False
        last_ts = -1
        for i, reader_token in enumerate(path, start=1):
            sig = fields.get(f"sig{i}", b"")
            idx_bytes = fields.get(f"idx{i}", b"")
            ts_bytes = fields.get(f"ts{i}", b"")
            if sig == b"" or idx_bytes == b"" or ts_bytes == b"":
                self.net.log_anomaly(f"resc database: slot {i} of {tag_token} is not in place")
                return False
            key = self.session_key(reader_token, tid)
            expect = crypto.mac(key, crypto.concat_length_prefixed(tid, idx_bytes, ts_bytes))
            if sig != expect or crypto.bytes_to_int(idx_bytes) != i:
                self.net.log_anomaly(f"resc database: slot {i} of {tag_token} fails verification")
                return False
            ts = crypto.bytes_to_int(ts_bytes)
            if ts <= last_ts:
                self.net.log_anomaly(f"resc database: timestamps of {tag_token} out of order")
                return False
            last_ts = ts
        self.trace.append(
            PathClaim(
                self.run.tag_id(tag_token),
                tuple(self.run.reader_id(t) for t in path),
                backend(self.db_token),
            )
        )
        return True

    def artifacts(self) -> dict:
        return {
            "db": self.db_token,
            "paths": dict(self.path_of),
            "tids": dict(self.tids),
            "storage_bits": {
                t: self.run.memory(t).used_bits() for t in self.config.tags
            },
            "clock": self._clock,
        }
