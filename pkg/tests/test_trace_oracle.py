"""Checker-versus-oracle agreement on exhaustive small domains.

The full-size sweep (alphabet of 4, lengths up to 4) lives in the acceptance
suite; this file keeps a faster sweep plus targeted ordering cases so that
regressions surface close to the code.
"""

from __future__ import annotations

from oracles import (
    enumerate_sequences,
    oracle_authorized,
    oracle_classify,
    oracle_complete,
    oracle_physical,
    oracle_sorted,
    oracle_sound,
)

from pathtrace.trace import (
    Move,
    PathClaim,
    Trace,
    ValidPath,
    backend,
    check_authorized,
    check_complete,
    check_sorted,
    check_sound,
    classify_claim,
    physical_path,
    reader,
    tag,
)

T1 = tag("t")
B1 = backend("v")

VALID = [("a", "b", "c"), ("b", "a")]


def build_case(visits, claimed):
    t = Trace()
    for vp in VALID:
        t.append(ValidPath(T1, tuple(reader(r) for r in vp)))
    for r in visits:
        t.append(Move(T1, reader(r)))
    idx = t.append(PathClaim(T1, tuple(reader(r) for r in claimed), B1))
    return t, idx


def test_physical_path_matches_recursive_definition():
    for visits in enumerate_sequences("abc", 5):
        t = Trace(Move(T1, reader(r)) for r in visits)
        got = tuple(r.value for r in physical_path(t, T1))
        assert got == oracle_physical(visits), visits


def test_checkers_agree_with_oracles_small():
    count = 0
    for visits in enumerate_sequences("abc", 3):
        expected_phys = oracle_physical(visits)
        for claimed in enumerate_sequences("abc", 3):
            t, idx = build_case(visits, claimed)
            assert bool(check_sound(t, idx)) == oracle_sound(expected_phys, claimed)
            assert bool(check_complete(t, idx)) == oracle_complete(expected_phys, claimed)
            assert bool(check_sorted(t, idx)) == oracle_sorted(expected_phys, claimed)
            assert bool(check_authorized(t, idx)) == oracle_authorized(VALID, claimed)
            count += 1
    assert count == 40 * 40


def test_classifier_agrees_with_oracle_small():
    for visits in enumerate_sequences("abc", 3):
        for claimed in enumerate_sequences("abc", 3):
            t, idx = build_case(visits, claimed)
            got = frozenset(label.value for label in classify_claim(t, idx))
            assert got == oracle_classify(visits, claimed, VALID), (visits, claimed)


def test_oracle_sorted_self_check():
    # the two subsequence algorithms must differ in mechanism yet agree
    assert oracle_sorted("abcab", "aca")
    assert not oracle_sorted("abc", "acb")
    assert oracle_sorted("abc", "")
    assert not oracle_sorted("", "a")
