"""Ground families: closed-form suprema vs window enumeration, JTG checks."""

import random
from fractions import Fraction

from normlab.core import FinVector, Interval, NormValue, evaluate
from normlab.ground import (CustomFamily, F2Sec4Family, FsSec6Family, MRFamily,
                            ground_norm, jtg_validate, mr_double_sum_check)
from normlab.params import toy_schedule


TOY = toy_schedule([2, 4, 8, 16], [4, 6, 8, 10])


def rand_vec(rng, max_idx=6, size=4):
    return FinVector({rng.randint(1, max_idx): Fraction(rng.randint(-6, 6), rng.randint(1, 3))
                      for _ in range(size)})


def test_f2sec4_toy_example():
    # m_{4*1-3} = m_1 = 2, cap n_1/2 = 2: sup = (1/4) * (two largest coords)
    fam = F2Sec4Family(TOY)
    x = FinVector({1: Fraction(1), 2: Fraction(1), 3: Fraction(1)})
    assert fam.family_sup(1, x) == NormValue.of(Fraction(1, 2))


def test_family_sup_zero():
    fam = F2Sec4Family(TOY)
    assert fam.family_sup(1, FinVector()) == NormValue.of(0)


def test_fssec6_s1_example():
    # S_{n_1}=S_4 budget; on supp {1,2,3} the best S_4 set must skip index 1
    sched = toy_schedule([2, 4], [1, 4])
    fam = FsSec6Family(sched)
    x = FinVector({1: Fraction(1), 2: Fraction(1), 3: Fraction(1)})
    # order S_{n_1} = S_1: {2,3} attains mass 2, scaled by 1/m_1^2 = 1/4
    assert fam.family_sup(1, x) == NormValue.of(Fraction(1, 2))


def test_closed_forms_agree_with_enumeration():
    rng = random.Random(21)
    fams = [F2Sec4Family(TOY), FsSec6Family(toy_schedule([2, 4], [2, 4])),
            MRFamily([4, 16, 64])]
    for fam in fams:
        for j in fam.family_indices()[:2]:
            for _ in range(12):
                x = rand_vec(rng)
                if x.is_zero():
                    continue
                best = NormValue.of(0)
                for f in fam.enumerate_window(j, Interval(1, 6), max_size=6):
                    sq = evaluate(f, x) ** 2 if fam.id == "mr" else None
                    if fam.id == "mr":
                        # MR elements have irrational scale; square the pairing
                        k = fam.k[j - 1]
                        raw = sum(abs(x.coeff(i)) for i in f.support())
                        v = NormValue.sqrt_of(raw * raw / k)
                    else:
                        v = NormValue.of(abs(evaluate(f, x)))
                    if v > best:
                        best = v
                assert fam.family_sup(j, x) == best, (fam.id, j, x)


def test_ground_norm_basics():
    fam = F2Sec4Family(TOY)
    assert ground_norm(fam, FinVector.unit(5)).value == NormValue.of(1)
    assert ground_norm(fam, FinVector()).value == NormValue.of(0)
    x = FinVector({1: Fraction(1), 2: Fraction(1)})
    res = ground_norm(fam, x)
    assert res.value == NormValue.of(1)  # F_0 attains; family sups are 1/2
    assert res.family_index == 0


def test_ground_norm_witness_and_invariants():
    rng = random.Random(5)
    fam = F2Sec4Family(TOY)
    for _ in range(50):
        x = rand_vec(rng)
        res = ground_norm(fam, x)
        from normlab.core import sup_norm

        assert res.value >= sup_norm(x)
        assert res.witness.eval_on(x) == res.value
        assert ground_norm(fam, x.neg()).value == res.value
        e = Interval(rng.randint(1, 4), rng.randint(4, 6))
        assert ground_norm(fam, x.restrict(e)).value <= res.value


def test_mr_family_sqrt_values():
    fam = MRFamily([4, 16, 64])
    x = FinVector({1: Fraction(1), 2: Fraction(1), 3: Fraction(1)})
    # k_1 = 4: top 3 coords sum 3, value sqrt(9/4) = 3/2
    assert fam.family_sup(1, x) == NormValue.of(Fraction(3, 2))
    y = FinVector({1: Fraction(1), 2: Fraction(1)})
    assert fam.family_sup(2, y) == NormValue.sqrt_of(Fraction(4, 16))


def test_jtg_validate_builtins():
    rep = jtg_validate(F2Sec4Family(TOY))
    assert rep["ok"], rep
    rep = jtg_validate(MRFamily([16, 256, 65536], ratio_bound=Fraction(4)))
    assert rep["ok"], rep


def test_jtg_validate_custom_violation():
    fam = CustomFamily({
        1: [FinVector({1: Fraction(1, 4)}), FinVector({1: Fraction(-1, 4)})],
        2: [FinVector({2: Fraction(1, 2)}), FinVector({2: Fraction(-1, 2)})],
    })
    rep = jtg_validate(fam)
    assert not rep["ok"]
    assert any("decreasing" in v for v in rep["violations"])


def test_mr_double_sum_example():
    # k_j = 2^(4^j): prefix of three terms plus a caller-certified tail
    ks = (2**4, 2**16, 2**64)
    rep = mr_double_sum_check(ks, tail_bound=Fraction(1, 2**50))
    assert rep.ok, rep
