"""Shared oracles and toy-instance builders for the test suite.

The oracles are deliberately naive re-implementations of the definitions
(direct enumeration, no memo tricks beyond value caching) so they stay
independent of the engine code paths they check.
"""

from fractions import Fraction

from normlab.certify import AttractingSeqClaim, ExactPairClaim
from normlab.coding import WeightedFunctional, lambda_elements
from normlab.core import FinVector, NormValue, evaluate, sup_norm
from normlab.jt import F2, F2S, FS, generate_candidates
from normlab.schreier import member


def brute_mixed_norm(x, spec, depth):
    """Enumerate every functional tree of bounded depth, literally.

    A tree is: a ground element on the interval, or a scheme applied to an
    admissible tuple of disjoint successive subintervals (gaps allowed),
    each carrying a tree of smaller depth.
    """
    pts = x.support()

    def tuples_of_intervals(lo, hi):
        def rec(start):
            yield ()
            for a in range(start, hi + 1):
                for b in range(a, hi + 1):
                    for rest in rec(b + 1):
                        yield ((a, b),) + rest
        return rec(lo)

    memo = {}

    def best(lo, hi, depth):
        piece = FinVector({pts[i]: x.coeff(pts[i]) for i in range(lo, hi + 1)})
        if piece.is_zero():
            return Fraction(0)
        key = (lo, hi, depth)
        if key in memo:
            return memo[key]
        value = spec.ground.value(piece)
        if depth > 0:
            for scheme in spec.schemes:
                for tup in tuples_of_intervals(lo, hi):
                    if not 1 <= len(tup) <= (scheme.family.n if scheme.family.kind == "A"
                                             else len(pts)):
                        continue
                    mins = tuple(pts[a] for a, _ in tup)
                    if not member(mins, scheme.family):
                        continue
                    total = sum((best(a, b, depth - 1) for a, b in tup), Fraction(0))
                    value = max(value, scheme.weight * total)
        memo[key] = value
        return value

    if x.is_zero():
        return Fraction(0)
    return best(0, len(pts) - 1, depth)


def oracle_jt_classic(x: dict) -> NormValue:
    """All families of pairwise disjoint convex support-chains, literally."""
    words = sorted((w for w, v in x.items() if v != 0), key=lambda w: (len(w), w))
    chains = []
    for u in words:
        for v in words:
            if v.startswith(u):
                chains.append(frozenset(w for w in words
                                        if w.startswith(u) and v.startswith(w)))
    chains = sorted(set(chains), key=sorted)
    best = Fraction(0)

    def rec(i, used, total_sq):
        nonlocal best
        best = max(best, total_sq)
        for k in range(i, len(chains)):
            c = chains[k]
            if used & c:
                continue
            s = sum((Fraction(x[w]) for w in c), Fraction(0))
            rec(k + 1, used | c, total_sq + s * s)

    rec(0, frozenset(), Fraction(0))
    return NormValue.sqrt_of(best)


def oracle_jt_norm(x, model, universe=None) -> NormValue:
    """Exhaustive enumeration of all disjoint candidate families."""
    cands = universe if universe is not None else generate_candidates(model, x.max_supp())
    vals = [(c, evaluate(c.functional, x)) for c in cands]
    vals = [(c, v) for c, v in vals if v != 0]
    sq = model.kind in (F2, F2S)
    need_ms = model.kind in (FS, F2S)
    best = Fraction(0)

    def rec(i, used, count, min_ms, obj):
        nonlocal best
        best = max(best, obj)
        for k in range(i, len(vals)):
            c, v = vals[k]
            if used & c.ind:
                continue
            ms = c.functional.min_supp() if min_ms is None else min(
                min_ms, c.functional.min_supp())
            if need_ms and ms < count + 1:
                continue
            rec(k + 1, used | c.ind, count + 1, ms, obj + (v * v if sq else abs(v)))

    rec(0, frozenset(), 0, None, Fraction(0))
    s = sup_norm(x)
    if sq:
        return max(NormValue.of(s), NormValue.sqrt_of(best))
    return max(NormValue.of(s), NormValue.of(best))


def make_exact_pair(sched, weight_index, start, C) -> ExactPairClaim:
    """(m_w/n_w) sum of n_w units against (1/m_w) sum of biorthogonals."""
    n_w, m_w = sched.n_at(weight_index), sched.m_at(weight_index)
    pts = list(range(start, start + n_w))
    x = FinVector({p: Fraction(m_w, n_w) for p in pts})
    phi = FinVector({p: Fraction(1, m_w) for p in pts})
    cert = WeightedFunctional(phi, weight_index, tuple(FinVector.unit(p) for p in pts))
    return ExactPairClaim(x, phi, C, weight_index, Fraction(1), cert)


def head_weight_index(sched, length) -> int:
    k = 1
    while sched.m_at(2 * k) <= length * length or k % 2 == 0:
        k += 2
    return 2 * k


def build_toy_attracting(sched, registry, j=1, C=Fraction(10) ** 40,
                         start=1) -> AttractingSeqClaim:
    """A full toy attracting sequence with theta = 1 exact pairs."""
    length = sched.n_at(4 * j - 3)
    pairs, evens, phis = [], [], []
    cursor = start
    w = head_weight_index(sched, length)
    for pos in range(1, length + 1):
        if pos % 2 == 1:
            if pos > 1:
                w = registry.sigma(phis)
            pair = make_exact_pair(sched, w, cursor, C)
            pairs.append(pair)
            phis.append(pair.phi)
            cursor = pair.phi.max_supp() + 1
        else:
            lam = registry.sigma(phis)
            l = lambda_elements(lam, sched, start=cursor, count=1)[0]
            evens.append(l)
            phis.append(FinVector.unit(l))
            cursor = l + 1
    claims = tuple(Fraction(1, sched.n_at(4 * j - 3) ** 2) for _ in pairs)
    return AttractingSeqClaim(tuple(pairs), tuple(evens), j, registry, claims)
