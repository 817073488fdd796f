"""Crypto toolbox tests: reference oracles, algebraic laws, failure modes."""

from __future__ import annotations

import hashlib
import random

import pytest

from pathtrace import crypto as c


# --- hashing, encodings, length extension ----------------------------------

def test_hash_corpus_collision_free():
    rng = random.Random(1)
    seen = set()
    for i in range(10_000):
        data = rng.randbytes(rng.randrange(1, 40)) + i.to_bytes(4, "big")
        seen.add(c.hash_bytes(data))
    assert len(seen) == 10_000


def test_concat_length_prefixed_round_trip():
    parts = [b"", b"a", b"bb", b"\x00" * 5]
    blob = c.concat_length_prefixed(*parts)
    assert c.split_length_prefixed(blob) == parts


def test_concat_raw_is_ambiguous_but_prefixed_is_not():
    assert c.concat_raw(b"ab", b"c") == c.concat_raw(b"a", b"bc")
    assert c.concat_length_prefixed(b"ab", b"c") != c.concat_length_prefixed(b"a", b"bc")


def test_split_rejects_truncation():
    blob = c.concat_length_prefixed(b"abcdef")
    with pytest.raises(c.CryptoError):
        c.split_length_prefixed(blob[:-1])


def test_sha256_pure_matches_hashlib():
    cases = [b"", b"abc", b"a" * 55, b"a" * 56, b"a" * 64, b"a" * 200]
    rng = random.Random(2)
    cases += [rng.randbytes(rng.randrange(0, 300)) for _ in range(50)]
    for m in cases:
        assert c.sha256_pure(m) == hashlib.sha256(m).digest()


def test_extend_sha256_forges_suffix_digests():
    rng = random.Random(3)
    for _ in range(50):
        secret = rng.randbytes(rng.randrange(1, 80))
        suffix = rng.randbytes(rng.randrange(1, 80))
        digest = hashlib.sha256(secret).digest()
        forged, glue = c.extend_sha256(digest, len(secret), suffix)
        assert hashlib.sha256(secret + glue + suffix).digest() == forged


def test_extend_sha256_needs_full_digest():
    with pytest.raises(c.CryptoError):
        c.extend_sha256(b"\x00" * 16, 10, b"x")


# --- MACs and signatures ---------------------------------------------------

def test_mac_is_keyed():
    assert c.mac(b"k1", b"m") != c.mac(b"k2", b"m")
    assert c.mac(b"k1", b"m") == c.mac(b"k1", b"m")


def test_sign_verify_round_trip():
    rng = random.Random(4)
    sk, vk = c.new_signing_keypair("alice", rng)
    sig = c.sign(sk, b"hello")
    assert c.verify(vk, sig)
    assert sig.signer == "alice"


def test_verify_rejects_forgeries():
    rng = random.Random(5)
    sk, vk = c.new_signing_keypair("alice", rng)
    for _ in range(1000):
        m = rng.randbytes(rng.randrange(1, 30))
        sig = c.sign(sk, m)
        m2 = rng.randbytes(rng.randrange(1, 30))
        if m2 == m:
            continue
        assert not c.verify(vk, c.Signature(sig.signer, m2, sig.tag))


def test_verify_rejects_wrong_signer():
    rng = random.Random(6)
    sk, _ = c.new_signing_keypair("alice", rng)
    _, vk_bob = c.new_signing_keypair("bob", rng)
    assert not c.verify(vk_bob, c.sign(sk, b"m"))


def test_signature_blob_round_trip_and_strip():
    rng = random.Random(7)
    sk, _ = c.new_signing_keypair("alice", rng)
    sig = c.sign(sk, b"payload")
    blob = sig.to_bytes()
    assert c.parse_signature(blob) == sig
    assert c.strip_signature(blob) == b"payload"
    assert c.parse_signature(b"junk") is None
    with pytest.raises(c.CryptoError):
        c.strip_signature(b"junk")


# --- XOR and symmetric encryption ------------------------------------------

def test_xor_bytes_strict_length():
    assert c.xor_bytes(b"\x0f\xf0", b"\xff\xff") == b"\xf0\x0f"
    with pytest.raises(c.CryptoError):
        c.xor_bytes(b"a", b"ab")


def test_expand_key_prefix_is_the_key():
    key = bytes(range(32))
    assert c.expand_key(key, 80)[:32] == key
    assert c.expand_key(key, 16) == key[:16]


def test_xor_stream_involution():
    rng = random.Random(8)
    for _ in range(50):
        data = rng.randbytes(rng.randrange(1, 120))
        key = rng.randbytes(32)
        assert c.xor_stream(c.xor_stream(data, key), key) == data


def test_sym_enc_round_trip_and_determinism():
    key = c.hash_bytes(b"k")
    ct1 = c.sym_enc(key, b"secret value")
    ct2 = c.sym_enc(key, b"secret value")
    assert ct1 == ct2
    assert c.sym_dec(key, ct1) == b"secret value"


def test_sym_dec_rejects_tampering_and_wrong_key():
    key = c.hash_bytes(b"k")
    ct = bytearray(c.sym_enc(key, b"secret value"))
    ct[-1] ^= 1
    with pytest.raises(c.AuthenticationError):
        c.sym_dec(key, bytes(ct))
    with pytest.raises(c.AuthenticationError):
        c.sym_dec(c.hash_bytes(b"other"), c.sym_enc(key, b"m"))


# --- ElGamal ---------------------------------------------------------------

@pytest.mark.parametrize("params", [c.TEST_PARAMS, c.DEFAULT_PARAMS])
def test_group_parameters_consistent(params):
    assert params.p == 2 * params.q + 1
    assert pow(params.g, params.q, params.p) == 1
    assert params.g != 1


def test_elgamal_round_trip():
    rng = random.Random(9)
    priv = c.elg_keygen(rng)
    for _ in range(100):
        m = c.encode_exponent(c.DEFAULT_PARAMS, rng.randrange(c.DEFAULT_PARAMS.q))
        assert c.elg_decrypt(priv, c.elg_encrypt(priv.public, m, rng)) == m


def test_homomorphic_multiplication_law():
    rng = random.Random(10)
    priv = c.elg_keygen(rng)
    p = c.DEFAULT_PARAMS.p
    for _ in range(1000):
        a = c.encode_exponent(c.DEFAULT_PARAMS, rng.randrange(c.DEFAULT_PARAMS.q))
        b = c.encode_exponent(c.DEFAULT_PARAMS, rng.randrange(c.DEFAULT_PARAMS.q))
        ct = c.hom_mul(c.elg_encrypt(priv.public, a, rng), c.elg_encrypt(priv.public, b, rng))
        assert c.elg_decrypt(priv, ct) == a * b % p


def test_ciphertext_exponentiation_law():
    rng = random.Random(11)
    priv = c.elg_keygen(rng)
    params = c.DEFAULT_PARAMS
    for _ in range(200):
        k = rng.randrange(params.q)
        e = rng.randrange(1, params.q)
        ct = c.ct_pow(c.elg_encrypt(priv.public, c.encode_exponent(params, k), rng), e)
        assert c.elg_decrypt(priv, ct) == c.encode_exponent(params, k * e)


def test_exponent_encoding_is_additive_under_multiplication():
    params = c.TEST_PARAMS
    for a in range(params.q):
        for b in range(params.q):
            lhs = c.encode_exponent(params, a) * c.encode_exponent(params, b) % params.p
            assert lhs == c.encode_exponent(params, a + b)


def test_rerandomize_changes_bytes_not_plaintext():
    rng = random.Random(12)
    priv = c.elg_keygen(rng)
    m = c.encode_exponent(c.DEFAULT_PARAMS, 42)
    ct = c.elg_encrypt(priv.public, m, rng)
    ct2 = c.rerandomize(priv.public, ct, rng)
    assert (ct.c1, ct.c2) != (ct2.c1, ct2.c2)
    assert c.elg_decrypt(priv, ct2) == m


def test_hom_mul_rejects_mixed_groups():
    rng = random.Random(13)
    a = c.elg_encrypt(c.elg_keygen(rng, c.TEST_PARAMS).public, 2, rng)
    b = c.elg_encrypt(c.elg_keygen(rng).public, 2, rng)
    with pytest.raises(c.CryptoError):
        c.hom_mul(a, b)


def test_box_round_trip_and_wrong_key():
    rng = random.Random(14)
    priv_a, pub_a = c.new_box_keypair("a", rng)
    priv_b, _ = c.new_box_keypair("b", rng)
    blob = c.pk_enc(pub_a, b"layered secret", rng)
    assert c.pk_dec(priv_a, blob) == b"layered secret"
    with pytest.raises(c.AuthenticationError):
        c.pk_dec(priv_b, blob)


# --- prime field and path polynomial ---------------------------------------

def test_field_laws():
    f = c.PrimeField(97)
    rng = random.Random(15)
    for _ in range(200):
        a = f.rand_nonzero(rng)
        b = f.rand(rng)
        assert f.mul(a, f.inv(a)) == 1
        assert f.add(f.sub(b, a), a) == b
    with pytest.raises(ZeroDivisionError):
        f.inv(0)


def oracle_poly_eval(p: int, a0: int, steps: list[int], x: int) -> int:
    """Direct power-sum form: a0 x^l + sum a_i x^(l-i)."""
    l = len(steps)
    total = a0 * pow(x, l, p)
    for i, a in enumerate(steps, start=1):
        total += a * pow(x, l - i, p)
    return total % p


def test_path_poly_example():
    f = c.PrimeField(97)
    assert c.path_poly_eval(f, 3, [5, 7], 2) == 29  # 3*4 + 5*2 + 7


def test_path_poly_empty_path():
    f = c.PrimeField(97)
    assert c.path_poly_eval(f, 42, [], 5) == 42


def test_path_poly_matches_direct_form():
    rng = random.Random(16)
    for p in (251, 1009, 2**31 - 1):
        f = c.PrimeField(p)
        for _ in range(3400):
            steps = [f.rand(rng) for _ in range(rng.randrange(0, 6))]
            a0, x = f.rand(rng), f.rand(rng)
            assert c.path_poly_eval(f, a0, steps, x) == oracle_poly_eval(p, a0, steps, x)


# --- PUF -------------------------------------------------------------------

def test_puf_deterministic_per_device():
    d1 = c.PufDevice("t1", random.Random(17))
    d1b = c.PufDevice("t1", random.Random(17))
    d2 = c.PufDevice("t2", random.Random(18))
    ch = b"challenge"
    assert d1.respond(ch) == d1b.respond(ch)
    assert d1.respond(ch) != d2.respond(ch)
