"""Schreier family laws, membership oracle agreement, convex combinations."""

import random
from fractions import Fraction
from itertools import combinations

import pytest

from normlab.core import FinVector, Interval
from normlab.params import toy_schedule
from normlab.schreier import (FamilySpec, admissible, bscc_check,
                              bscc_constraint_order, bscc_search, is_maximal,
                              iter_members, max_mass, member, parse_finset,
                              scc_check)


def brute_member_s(fs: tuple[int, ...], n: int) -> bool:
    """Direct recursive-definition oracle: try every split into successive blocks."""
    if not fs:
        return True
    if n == 0:
        return len(fs) <= 1
    if n == 1:
        return len(fs) <= fs[0]

    def splits(rest: tuple[int, ...], blocks_left: int) -> bool:
        if not rest:
            return True
        if blocks_left == 0:
            return False
        for cut in range(1, len(rest) + 1):
            if brute_member_s(rest[:cut], n - 1) and splits(rest[cut:], blocks_left - 1):
                return True
        return False

    return splits(fs, fs[0])


def test_member_examples():
    assert member((2, 3), FamilySpec("S", 1))
    assert not member((1, 2), FamilySpec("S", 1))
    assert member((2, 3, 4, 5, 6), FamilySpec("S", 2))
    assert brute_member_s((2, 3, 4, 5, 6), 2)


def test_member_matches_bruteforce_small():
    universe = list(range(1, 9))
    for n in (0, 1, 2):
        for size in range(0, 6):
            for combo in combinations(universe, size):
                assert member(combo, FamilySpec("S", n)) == brute_member_s(combo, n), (combo, n)


def test_admissible():
    assert admissible((2, 3), FamilySpec("S", 1))
    assert admissible((1,), FamilySpec("A", 3))
    assert not admissible((3, 5, 7, 9), FamilySpec("S", 1))


def test_maximal():
    s1 = FamilySpec("S", 1)
    assert is_maximal((1,), s1)
    assert is_maximal((2, 3), s1)
    assert not is_maximal((2,), s1)
    with pytest.raises(ValueError):
        is_maximal((1, 2), s1)


def test_hereditary_and_spreading_random():
    rng = random.Random(3)
    for n in (1, 2, 3):
        spec = FamilySpec("S", n)
        produced = 0
        while produced < 120:
            start = rng.randint(1, 6)
            length = rng.randint(1, min(start + 3, 7))
            base = []
            cur = start
            for _ in range(length):
                base.append(cur)
                cur += rng.randint(1, 3)
            base = tuple(base)
            if not member(base, spec):
                continue
            produced += 1
            subset = tuple(sorted(rng.sample(base, rng.randint(0, len(base)))))
            assert member(subset, spec)
            spread = tuple(b + rng.randint(0, 4) * (i + 1) for i, b in enumerate(base))
            spread = tuple(sorted(set(spread)))
            if len(spread) == len(base) and all(g >= f for f, g in zip(base, spread)):
                assert member(spread, spec)


def test_max_mass_agrees_with_enumeration():
    rng = random.Random(9)
    for _ in range(40):
        pts = tuple(sorted(rng.sample(range(1, 12), rng.randint(1, 6))))
        weights = tuple(Fraction(rng.randint(1, 9), rng.randint(1, 4)) for _ in pts)
        for n in (1, 2):
            best = Fraction(0)
            for combo in iter_members(pts, n):
                mass = sum((weights[pts.index(i)] for i in combo), Fraction(0))
                best = max(best, mass)
            assert max_mass(pts, weights, FamilySpec("S", n)) == best


def test_bscc_constraint_order_exact_ceiling():
    sched = toy_schedule([2, 4], [1, 4])
    # 2*log2(4)*(n_1+1) = 2*2*2 = 8
    assert bscc_constraint_order(2, sched) == 8
    sched3 = toy_schedule([2, 3], [1, 4])
    # 2*log2(3)*2 = 6.339..., ceiling 7
    assert bscc_constraint_order(2, sched3) == 7


def test_bscc_check_examples():
    sched = toy_schedule([2, 4], [1, 4])
    # uniform coefficients on F not in S_{n_2}: {1,2,3,4,5} has 5 > min 1... use n_j=4
    bad_support = [(1, Fraction(1, 5)), (2, Fraction(1, 5)), (3, Fraction(1, 5)),
                   (4, Fraction(1, 5)), (5, Fraction(1, 5))]
    rep = bscc_check(bad_support, Fraction(3, 4), 2, sched)
    assert not rep.ok and rep.label == "bscc.family-membership"

    increasing = [(4, Fraction(1, 4)), (5, Fraction(1, 4)), (6, Fraction(1, 8)),
                  (7, Fraction(3, 8))]
    rep = bscc_check(increasing, Fraction(3, 4), 2, sched)
    assert not rep.ok and rep.label == "bscc.monotone"

    # frozen verdict for the spec's toy instance: the whole support lies in
    # the S_8 constraint family, so the mass bound fails at eps = 3/4
    uniform = [(k, Fraction(1, 4)) for k in (4, 5, 6, 7)]
    rep = bscc_check(uniform, Fraction(3, 4), 2, sched)
    assert not rep.ok and rep.label == "bscc.mass-bound"


def test_bscc_search_roundtrip():
    # every desk-scale window is fully S_1-capturable once it starts past its
    # own length, so existence needs a generous eps > 1; the mass bound is
    # still verified exactly by the checker
    sched = toy_schedule([2, 3], [1, 30])
    window = Interval(40, 100)
    found = bscc_search(window, Fraction(3, 2), 2, sched)
    assert found is not None
    assert sum(a for _, a in found) == 1
    assert bscc_check(found, Fraction(3, 2), 2, sched).ok


def test_bscc_search_window_too_short():
    sched = toy_schedule([2, 3], [1, 30])
    assert bscc_search(Interval(40, 40), Fraction(1, 100), 2, sched) is None


def test_scc_check():
    sched = toy_schedule([2, 3], [1, 30])
    window = Interval(40, 100)
    pairs = bscc_search(window, Fraction(3, 2), 2, sched)
    blocks = [FinVector({k: Fraction(1)}) for k, _ in pairs]
    coeffs = [a for _, a in pairs]
    assert scc_check(blocks, coeffs, Fraction(3, 2), 2, sched).ok
    # halved coefficients no longer sum to 1
    rep = scc_check(blocks, [a / 2 for a in coeffs], Fraction(3, 2), 2, sched)
    assert not rep.ok and rep.label == "bscc.convexity"
    with pytest.raises(ValueError):
        scc_check(list(reversed(blocks)), coeffs, Fraction(3, 2), 2, sched)


def test_parse_finset():
    assert parse_finset("{2,3,4}") == (2, 3, 4)
    assert parse_finset("{}") == ()
    with pytest.raises(ValueError):
        parse_finset("{3,2}")
