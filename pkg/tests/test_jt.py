"""Classical JT and coded JT norms vs exhaustive oracles."""

import random
from fractions import Fraction
from itertools import combinations

from normlab.coding import CodingRegistry
from normlab.core import FinVector, NormValue, evaluate, sup_norm
from normlab.ground import F2Sec4Family
from normlab.jt import (F2, F2S, FS, JTModel, generate_candidates,
                        index_node, jt_classic_norm, jt_classic_witness_eval,
                        jt_norm, jt_witness_eval, node_index,
                        parse_dyadic_vector)
from normlab.params import toy_schedule

from helpers import oracle_jt_classic, oracle_jt_norm


# -- classical JT ---------------------------------------------------------------


def test_classic_examples():
    chain = {"": Fraction(1), "0": Fraction(1), "00": Fraction(1)}
    assert jt_classic_norm(chain).value == NormValue.of(3)
    pair = {"0": Fraction(1), "1": Fraction(1)}
    assert jt_classic_norm(pair).value == NormValue.sqrt_of(2)
    tri = {"": Fraction(1), "0": Fraction(1), "1": Fraction(1)}
    res = jt_classic_norm(tri)
    assert res.value == NormValue.sqrt_of(5)
    assert oracle_jt_classic(tri) == NormValue.sqrt_of(5)


def test_classic_matches_oracle():
    rng = random.Random(17)
    words_pool = ["", "0", "1", "00", "01", "10", "11", "000", "011", "101"]
    for _ in range(60):
        size = rng.randint(1, 6)
        x = {w: Fraction(rng.randint(-4, 4), rng.randint(1, 3))
             for w in rng.sample(words_pool, size)}
        got = jt_classic_norm(x)
        want = oracle_jt_classic(x)
        assert got.value == want, x
        assert got.value >= NormValue.of(max((abs(v) for v in x.values()), default=0))
        assert jt_classic_witness_eval(got.segments, x) == got.value


def test_classic_witness_tamper():
    x = {"0": Fraction(1), "1": Fraction(1)}
    res = jt_classic_norm(x)
    doubled = {w: 2 * v for w, v in x.items()}
    assert jt_classic_witness_eval(res.segments, doubled) == res.value.scale(2)
    import pytest

    overlapping = (("0", "1"),)
    with pytest.raises(ValueError):
        jt_classic_witness_eval(overlapping, x)


def test_node_index_bijection():
    words = ["", "0", "1", "00", "01", "10", "11", "010"]
    for w in words:
        assert index_node(node_index(w)) == w
    # length-then-lex: heap order
    assert [node_index(w) for w in ["", "0", "1", "00"]] == [1, 2, 3, 4]
    assert parse_dyadic_vector("e:1 0:1") == {"": Fraction(1), "0": Fraction(1)}


# -- coded JT norms ---------------------------------------------------------------


SCHED = toy_schedule([2**j for j in range(1, 41)], [j + 1 for j in range(1, 41)],
                     label="jt-toy")
FAM = F2Sec4Family(SCHED)


def fresh_model(kind, pool="", cutoff=4):
    return JTModel(kind, FAM, CodingRegistry(SCHED), pool=pool, index_cutoff=cutoff)


def rand_vec(rng, max_idx=3):
    # window <= 3 keeps the exhaustive oracle's family enumeration tiny;
    # the acceptance suite runs bigger windows with tuned universes
    while True:
        x = FinVector({rng.randint(1, max_idx): Fraction(rng.randint(-5, 5), rng.randint(1, 3))
                       for _ in range(rng.randint(1, 3))})
        if not x.is_zero():
            return x


def test_unit_vector():
    model = fresh_model(F2)
    res = jt_norm(FinVector.unit(2), model)
    assert res.value == NormValue.of(1)


def test_single_candidate_below_sup():
    # x = e_1 - e_2: specials reach at most 2/m^2 < 1 = sup norm
    model = fresh_model(F2, cutoff=2)
    x = FinVector({1: Fraction(1), 2: Fraction(-1)})
    res = jt_norm(x, model)
    assert res.value == NormValue.of(1)


def test_engine_matches_oracle_all_kinds():
    rng = random.Random(202)
    for kind in (F2, FS, F2S):
        model = fresh_model(kind)
        for _ in range(12):
            x = rand_vec(rng)
            got = jt_norm(x, model)
            want = oracle_jt_norm(x, model)
            assert got.value.square() == want.square(), (kind, x)


def test_pool_variants_differ_in_universe():
    m_specials = fresh_model(F2, pool="specials")
    m_family = fresh_model(F2, pool="with-family")
    x = FinVector({1: Fraction(1), 2: Fraction(1), 3: Fraction(1)})
    u1 = generate_candidates(m_specials, 3)
    u2 = generate_candidates(m_family, 3)
    # the appendix pool adds bare even-family elements
    assert {min(c.ind) for c in u2} >= {min(c.ind) for c in u1}
    assert len(u2) >= len(u1)


def test_homogeneity_and_triangle():
    rng = random.Random(303)
    model = fresh_model(F2)
    for _ in range(8):
        x = rand_vec(rng)
        lam = Fraction(rng.randint(1, 5), rng.randint(1, 3))
        vx = jt_norm(x, model)
        vlx = jt_norm(x.scale(lam), model)
        assert vlx.value == vx.value.scale(lam)
        y = rand_vec(rng)
        vy = jt_norm(y, model)
        vxy = jt_norm(x.add(y), model)
        # ||x+y|| <= ||x|| + ||y||: compare squares exactly:
        # (a+b)^2 = a^2 + b^2 + 2ab, and (2ab)^2 = 4 a^2 b^2
        a2, b2, c2 = vx.value.square(), vy.value.square(), vxy.value.square()
        gap = a2 + b2 - c2
        if gap < 0:
            assert 4 * a2 * b2 >= gap * gap
        # else: c2 <= a2 + b2 <= (a+b)^2 already


def test_fs_dominates_f2s():
    rng = random.Random(404)
    reg = CodingRegistry(SCHED)
    m_fs = JTModel(FS, FAM, reg, index_cutoff=4)
    m_f2s = JTModel(F2S, FAM, reg, index_cutoff=4)
    for _ in range(10):
        x = rand_vec(rng)
        v_fs = jt_norm(x, m_fs)
        v_f2s = jt_norm(x, m_f2s)
        assert v_fs.value >= v_f2s.value


def test_witness_roundtrip_and_tamper():
    rng = random.Random(505)
    model = fresh_model(F2)
    for _ in range(6):
        x = rand_vec(rng)
        res = jt_norm(x, model)
        if not res.witness:
            continue
        recomputed = jt_witness_eval(res, x, F2)
        assert recomputed == res.value or NormValue.of(sup_norm(x)) == res.value
        assert jt_witness_eval(res, x.scale(2), F2) == recomputed.scale(2)


def test_restriction_monotone():
    from normlab.core import Interval

    rng = random.Random(606)
    model = fresh_model(F2)
    for _ in range(8):
        x = rand_vec(rng)
        v = jt_norm(x, model)
        cut = x.restrict(Interval(2, 4))
        if cut.is_zero():
            continue
        assert jt_norm(cut, model).value <= v.value


def test_tail_bracket_reported():
    model = fresh_model(F2)
    x = FinVector({1: Fraction(1)})
    res = jt_norm(x, model)
    assert res.tail_bound > 0
    assert res.upper_square_bound() >= res.value.square()
