"""Coding registry laws, Lambda partition, special/attractor builders."""

import random
from fractions import Fraction

import pytest

from normlab.core import FinVector, Interval
from normlab.coding import (CanonicalWeightedPool, CodingRegistry,
                            ExhaustedWindow, ForeignRegistry,
                            build_attractor_sequence, build_sigma_f_special,
                            disjoint, lambda_elements, lambda_member,
                            make_special, tree_interference,
                            validate_attractor_sequence, validate_special_chain)
from normlab.ground import F2Sec4Family
from normlab.params import toy_schedule

SCHED = toy_schedule([2**j for j in range(1, 61)], [2 * j + 2 for j in range(1, 61)],
                     label="geometric")
FAM = F2Sec4Family(SCHED)


def test_sigma_repeat_and_injectivity():
    reg = CodingRegistry(SCHED)
    a = [FinVector({1: Fraction(1, 3)})]
    b = [FinVector({2: Fraction(1, 2)})]
    ia, ib = reg.sigma(a), reg.sigma(b)
    assert ia != ib
    assert reg.sigma(a) == ia


def test_sigma_growth_bound():
    reg = CodingRegistry(SCHED)
    seq = [FinVector({1: Fraction(1, 3), 5: Fraction(1)})]
    idx = reg.sigma(seq)
    # min |coord| = 1/3, max supp = 5: m_idx must exceed 15
    assert SCHED.m_at(idx) > 15
    assert idx % 4 == 0


def test_sigma_rejects_malformed():
    reg = CodingRegistry(SCHED)
    with pytest.raises(ValueError):
        reg.sigma([FinVector({2: Fraction(1)}), FinVector({2: Fraction(1)})])
    with pytest.raises(ValueError):
        reg.sigma([FinVector()])


def test_sigma_f_assignment_and_replay(tmp_path):
    reg = CodingRegistry(SCHED)
    f = FinVector({1: Fraction(1, 4)})
    idx = reg.sigma_f([(f, 3)])
    assert idx == 4  # smallest unused even index above 3
    g = FinVector({2: Fraction(1, 4)})
    idx2 = reg.sigma_f([(g, 1)])
    assert idx2 == 2
    path = tmp_path / "registry.log"
    reg.save(str(path))
    again = CodingRegistry.load(str(path), SCHED)
    assert again.sigma_f([(f, 3)]) == idx
    assert again.sigma_f([(g, 1)]) == idx2
    assert again.log_entries() == reg.log_entries()


def test_lambda_partition():
    assert lambda_member(1, 6, SCHED)
    assert not lambda_member(1, 2, SCHED)  # filtered by > m_1
    # disjointness over [1, 100] via distinct dyadic valuations
    for l in range(1, 101):
        hits = [i for i in range(1, 7) if lambda_member(i, l, SCHED)]
        assert len(hits) <= 1
    for i in (1, 2, 3):
        for l in lambda_elements(i, SCHED, count=5):
            assert l > SCHED.m_at(i)


def test_build_special_roundtrip():
    reg = CodingRegistry(SCHED)
    seed_el = FinVector({1: Fraction(1, 4)})  # in F_1: coeff 1/m_1^2
    sf = build_sigma_f_special(reg, FAM, (1, seed_el), length=2, window=Interval(1, 50))
    assert len(sf.chain) == 2
    assert sf.chain_tags[0] == 1
    # the second element's family index equals sigma_f of the seed
    assert sf.chain_tags[1] == reg.sigma_f([(seed_el, 1)])
    assert validate_special_chain(reg, FAM, list(sf.chain)).ok


def test_build_special_length_one_and_window():
    reg = CodingRegistry(SCHED)
    seed_el = FinVector({1: Fraction(1, 4)})
    sf = build_sigma_f_special(reg, FAM, (1, seed_el), length=1, window=Interval(1, 3))
    assert len(sf.chain) == 1
    with pytest.raises(ExhaustedWindow):
        build_sigma_f_special(reg, FAM, (1, seed_el), length=2, window=Interval(1, 1))


def test_ind_and_disjoint():
    reg = CodingRegistry(SCHED)
    seed_el = FinVector({1: Fraction(1, 4)})
    sf = build_sigma_f_special(reg, FAM, (1, seed_el), length=2, window=Interval(1, 50))
    assert sf.ind() == frozenset(sf.chain_tags)
    cut = sf.restricted(Interval.empty())
    assert cut.ind() == frozenset()
    assert disjoint([cut, sf])


def test_prefix_of_special_is_special():
    reg = CodingRegistry(SCHED)
    seed_el = FinVector({3: Fraction(1, 4)})
    sf = build_sigma_f_special(reg, FAM, (1, seed_el), length=3, window=Interval(1, 80))
    for cut in range(1, len(sf.chain) + 1):
        assert validate_special_chain(reg, FAM, list(sf.chain[:cut])).ok


def test_tree_interference_cases():
    reg = CodingRegistry(SCHED)
    a = build_sigma_f_special(reg, FAM, (1, FinVector({1: Fraction(1, 4)})),
                              length=2, window=Interval(1, 60))
    i_aa, rep = tree_interference(a, a)
    assert i_aa == len(a.chain) and rep.ok
    # same head family: interference point is 1, laws still hold
    b = build_sigma_f_special(reg, FAM, (1, FinVector({2: Fraction(1, 4)})),
                              length=2, window=Interval(1, 60))
    i_ab, rep = tree_interference(a, b)
    assert i_ab == 1 and rep.ok
    # disjoint seed families: interference point 0
    seed3 = FinVector({1: Fraction(1, SCHED.m_at(9) ** 2)})  # F_3 since 4*3-3 = 9
    d = build_sigma_f_special(reg, FAM, (3, seed3), length=1, window=Interval(1, 60))
    i_ad, rep = tree_interference(a, d)
    assert i_ad == 0 and rep.ok
    # shared prefix of length 1, then branch
    shared = make_special(reg, FAM, list(a.chain[:1]))
    c_chain = list(a.chain[:1])
    nxt = reg.sigma_f(list(zip(c_chain, shared.chain_tags)))
    # a canonical element of F_nxt placed elsewhere in the window
    alt = FinVector({a.chain[1].min_supp() + 5: Fraction(1, SCHED.m_at(4 * nxt - 3) ** 2)})
    c = make_special(reg, FAM, c_chain + [alt])
    # equal prefixes force equal inds at the branch position itself, so the
    # interference point is 2; elements below it coincide and tails are disjoint
    i_ac, rep = tree_interference(a, c)
    assert i_ac == 2 and rep.ok
    assert a.chain[0] == c.chain[0] and a.chain[1] != c.chain[1]

    other = CodingRegistry(SCHED)
    foreign = build_sigma_f_special(other, FAM, (1, FinVector({1: Fraction(1, 4)})),
                                    length=1, window=Interval(1, 10))
    with pytest.raises(ForeignRegistry):
        tree_interference(a, foreign)


def test_attractor_roundtrip_and_rejections():
    reg = CodingRegistry(SCHED)
    pool = CanonicalWeightedPool(SCHED)
    window = Interval(1, 10**12)
    seq = build_attractor_sequence(reg, pool, 1, SCHED, window)
    assert len(seq.funcs) == SCHED.n_at(1) == 4
    assert validate_attractor_sequence(seq, reg, SCHED, 1).ok

    # even-position entry with l outside Lambda_{sigma(prefix)}: l - 1 keeps
    # the sequence successive but has the wrong dyadic valuation
    bad_funcs = list(seq.funcs)
    l = bad_funcs[1].min_supp()
    bad_funcs[1] = FinVector.unit(l - 1)
    bad = type(seq)(tuple(bad_funcs), seq.certs, seq.j)
    rep = validate_attractor_sequence(bad, reg, SCHED, 1)
    assert not rep.ok and rep.label == "attractor.lambda-membership"

    with pytest.raises(ExhaustedWindow):
        build_attractor_sequence(CodingRegistry(SCHED), pool, 1, SCHED, Interval(1, 100))


def test_registry_injectivity_bulk():
    reg = CodingRegistry(SCHED)
    seen = {}
    rng = random.Random(13)
    for q in range(2000):
        f = FinVector({rng.randint(1, 30): Fraction(rng.randint(1, 9), rng.randint(1, 9))})
        tag = rng.randint(1, 5)
        idx = reg.sigma_f([(f, tag)])
        key = f.canonical_key()
        if key in seen:
            assert seen[key] == idx
        else:
            assert idx not in set(seen.values())
            seen[key] = idx
        assert idx > tag and idx % 2 == 0
