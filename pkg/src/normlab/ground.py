"""JTG families and exact ground-norm computation.

A ground family is the graded family (F_j)_{j>=0} with F_0 = {±e_n*}.  The
built-ins expose closed-form suprema; element enumeration over a finite
window exists only so oracles can cross-check the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

from .core import (FinVector, Interval, NormValue, Report, evaluate, l1_norm,
                   sup_norm)
from .params import ParamSchedule
from .schreier import FamilySpec, iter_members, max_mass


def _top_abs_sum(x: FinVector, count: int) -> Fraction:
    vals = sorted((abs(v) for _, v in x.items()), reverse=True)
    return sum(vals[:count], Fraction(0))


@dataclass(frozen=True)
class GroundWitness:
    """Attaining element: family index, support, signs matching x, scale^2.

    `scale_sq` is the square of the common coefficient, so the witness stays
    exact for Maurey-Rosenthal families where the coefficient is 1/sqrt(k).
    """

    family_index: int
    indices: tuple[int, ...]
    scale_sq: Fraction

    def eval_on(self, x: FinVector) -> NormValue:
        total = sum((abs(x.coeff(i)) for i in self.indices), Fraction(0))
        return NormValue.sqrt_of(total * total * self.scale_sq)


@dataclass(frozen=True)
class GroundNormResult:
    value: NormValue
    family_index: int
    witness: GroundWitness


class GroundFamily:
    """Base interface: per-family suprema, tau envelopes, window enumeration."""

    id: str = "abstract"
    rational_valued = True

    def family_indices(self) -> list[int]:
        """Indices j >= 1 with F_j representable under this family's data."""
        raise NotImplementedError

    def tau_sq(self, j: int) -> Fraction:
        """Square of tau_j = sup of the sup-norms over F_j."""
        raise NotImplementedError

    def tau_tail_sum_bound(self, j: int) -> Fraction:
        """Certified upper bound for sum_{i > j} tau_i (0 beyond the window)."""
        raise NotImplementedError

    def family_sup(self, j: int, x: FinVector) -> NormValue:
        raise NotImplementedError

    def family_sup_witness(self, j: int, x: FinVector) -> GroundWitness:
        raise NotImplementedError

    def enumerate_window(self, j: int, window: Interval, max_size: int = 12):
        """Yield every element of F_j supported inside the window (oracle use)."""
        raise NotImplementedError

    def contains(self, j: int, f: FinVector) -> bool:
        raise NotImplementedError


def _signed_window_elements(indices: tuple[int, ...], sizes, coeff_of_size):
    for size in sizes:
        for combo in combinations(indices, size):
            coeff = coeff_of_size(size)
            for signs in product((1, -1), repeat=size):
                yield FinVector({i: s * coeff for i, s in zip(combo, signs)})


class F0Family(GroundFamily):
    """Just {±e_n*}; the ground set every other family extends."""

    id = "f0"

    def family_indices(self) -> list[int]:
        return []

    def tau_sq(self, j: int) -> Fraction:
        return Fraction(0)

    def tau_tail_sum_bound(self, j: int) -> Fraction:
        return Fraction(0)

    def family_sup(self, j: int, x: FinVector) -> NormValue:
        raise KeyError("F0-only family has no graded members")

    def enumerate_window(self, j: int, window: Interval, max_size: int = 12):
        return iter(())

    def contains(self, j: int, f: FinVector) -> bool:
        return False


class F2Sec4Family(GroundFamily):
    """F_j = {(1/m_{4j-3}^2) sum_{i in I} ±e_i* : #I <= n_{4j-3}/2}."""

    id = "f2sec4"

    def __init__(self, sched: ParamSchedule):
        self.sched = sched

    def family_indices(self) -> list[int]:
        return [j for j in range(1, len(self.sched.m) + 1) if 4 * j - 3 <= len(self.sched.m)]

    def _m(self, j: int) -> int:
        return self.sched.m_at(4 * j - 3)

    def _cap(self, j: int) -> int:
        return self.sched.n_at(4 * j - 3) // 2

    def tau_sq(self, j: int) -> Fraction:
        m = self._m(j)
        return Fraction(1, m**4)

    def tau_tail_sum_bound(self, j: int) -> Fraction:
        # tail beyond the schedule is vacuous: F_i exists only while m_{4i-3} does
        return sum((Fraction(1, self._m(i) ** 2) for i in self.family_indices() if i > j),
                   Fraction(0))

    def family_sup(self, j: int, x: FinVector) -> NormValue:
        m = self._m(j)
        return NormValue.of(_top_abs_sum(x, self._cap(j)) / m**2)

    def family_sup_witness(self, j: int, x: FinVector) -> GroundWitness:
        m = self._m(j)
        ranked = sorted(x.items(), key=lambda kv: (-abs(kv[1]), kv[0]))[: self._cap(j)]
        return GroundWitness(j, tuple(sorted(i for i, _ in ranked)), Fraction(1, m**4))

    def enumerate_window(self, j: int, window: Interval, max_size: int = 12):
        if window.is_empty() or window.hi is None:
            raise ValueError("need a finite window")
        indices = tuple(range(window.lo, window.hi + 1))
        cap = min(self._cap(j), len(indices), max_size)
        coeff = Fraction(1, self._m(j) ** 2)
        return _signed_window_elements(indices, range(1, cap + 1), lambda s: coeff)

    def contains(self, j: int, f: FinVector) -> bool:
        if f.is_zero():
            return True
        coeff = Fraction(1, self._m(j) ** 2)
        if any(abs(v) != coeff for _, v in f.items()):
            return False
        return len(f.support()) <= self._cap(j)


class FsSec6Family(GroundFamily):
    """F_j = {(1/m_{4j-3}^2) sum_{i in I} ±e_i* : I in S_{n_{4j-3}}}."""

    id = "fssec6"

    def __init__(self, sched: ParamSchedule):
        self.sched = sched

    def family_indices(self) -> list[int]:
        return [j for j in range(1, len(self.sched.m) + 1) if 4 * j - 3 <= len(self.sched.m)]

    def _m(self, j: int) -> int:
        return self.sched.m_at(4 * j - 3)

    def _order(self, j: int) -> int:
        return self.sched.n_at(4 * j - 3)

    def tau_sq(self, j: int) -> Fraction:
        return Fraction(1, self._m(j) ** 4)

    def tau_tail_sum_bound(self, j: int) -> Fraction:
        return sum((Fraction(1, self._m(i) ** 2) for i in self.family_indices() if i > j),
                   Fraction(0))

    def family_sup(self, j: int, x: FinVector) -> NormValue:
        pts = x.support()
        weights = tuple(abs(x.coeff(i)) for i in pts)
        best = max_mass(pts, weights, FamilySpec("S", self._order(j)))
        return NormValue.of(best / self._m(j) ** 2)

    def family_sup_witness(self, j: int, x: FinVector) -> GroundWitness:
        # recover an attaining S_n set by exhaustive walk over members
        target = self.family_sup(j, x)
        m = self._m(j)
        for combo in iter_members(x.support(), self._order(j)):
            mass = sum((abs(x.coeff(i)) for i in combo), Fraction(0))
            if NormValue.of(mass / m**2) == target:
                return GroundWitness(j, tuple(combo), Fraction(1, m**4))
        raise AssertionError("unreachable: supremum must be attained")

    def enumerate_window(self, j: int, window: Interval, max_size: int = 12):
        if window.is_empty() or window.hi is None:
            raise ValueError("need a finite window")
        indices = tuple(range(window.lo, window.hi + 1))
        coeff = Fraction(1, self._m(j) ** 2)

        def gen():
            for combo in iter_members(indices, self._order(j)):
                if not combo or len(combo) > max_size:
                    continue
                for signs in product((1, -1), repeat=len(combo)):
                    yield FinVector({i: s * coeff for i, s in zip(combo, signs)})

        return gen()

    def contains(self, j: int, f: FinVector) -> bool:
        if f.is_zero():
            return True
        coeff = Fraction(1, self._m(j) ** 2)
        if any(abs(v) != coeff for _, v in f.items()):
            return False
        from .schreier import member

        return member(f.support(), FamilySpec("S", self._order(j)))


class MRFamily(GroundFamily):
    """Maurey-Rosenthal family F_j = {(1/sqrt(k_j)) sum_{i in F} ±e_i* : #F <= k_j}.

    Values are sqrt-of-rational; `ratio_bound` r certifies k_{j+1} >= r^2 k_j
    beyond the stored prefix so tau tails can be summed geometrically.
    """

    id = "mr"
    rational_valued = False

    def __init__(self, k_seq: list[int] | tuple[int, ...], ratio_bound: Fraction = Fraction(2)):
        self.k = tuple(int(v) for v in k_seq)
        if any(b <= a for a, b in zip(self.k, self.k[1:])):
            raise ValueError("k sequence must be strictly increasing")
        if ratio_bound <= 1:
            raise ValueError("ratio bound must exceed 1")
        self.ratio_bound = Fraction(ratio_bound)

    def family_indices(self) -> list[int]:
        return list(range(1, len(self.k) + 1))

    def _k(self, j: int) -> int:
        if not 1 <= j <= len(self.k):
            raise KeyError(f"k_{j} not stored")
        return self.k[j - 1]

    def tau_sq(self, j: int) -> Fraction:
        return Fraction(1, self._k(j))

    def tau_tail_sum_bound(self, j: int) -> Fraction:
        """sum_{i>j} 1/sqrt(k_i), bounded by stored terms + geometric tail.

        Needs the stored 1/sqrt(k_i) to be rational (perfect squares); the
        toy families used at desk scale satisfy this.
        """
        total = Fraction(0)
        last_tau: Fraction | None = None
        for i in self.family_indices():
            if i > j:
                tau = _exact_sqrt_fraction(Fraction(1, self._k(i)))
                if tau is None:
                    raise ValueError("tau tail needs perfect-square k values")
                total += tau
                last_tau = tau
        if last_tau is None:
            tau_j = _exact_sqrt_fraction(Fraction(1, self._k(min(j, len(self.k)))))
            if tau_j is None:
                raise ValueError("tau tail needs perfect-square k values")
            last_tau = tau_j
        # beyond the stored prefix: tau_{i+1} <= tau_i / ratio_bound
        r = self.ratio_bound
        total += last_tau / (r - 1)
        return total

    def family_sup(self, j: int, x: FinVector) -> NormValue:
        k = self._k(j)
        s = _top_abs_sum(x, k)
        return NormValue.sqrt_of(s * s / k)

    def family_sup_witness(self, j: int, x: FinVector) -> GroundWitness:
        k = self._k(j)
        ranked = sorted(x.items(), key=lambda kv: (-abs(kv[1]), kv[0]))[:k]
        return GroundWitness(j, tuple(sorted(i for i, _ in ranked)), Fraction(1, k))

    def enumerate_window(self, j: int, window: Interval, max_size: int = 12):
        if window.is_empty() or window.hi is None:
            raise ValueError("need a finite window")
        k = self._k(j)
        root = _exact_sqrt_fraction(Fraction(1, k))
        if root is None:
            raise ValueError("windowed MR enumeration needs perfect-square k")
        indices = tuple(range(window.lo, window.hi + 1))
        cap = min(k, len(indices), max_size)
        return _signed_window_elements(indices, range(1, cap + 1), lambda s: root)

    def contains(self, j: int, f: FinVector) -> bool:
        if f.is_zero():
            return True
        k = self._k(j)
        root = _exact_sqrt_fraction(Fraction(1, k))
        if root is None:
            return False
        if any(abs(v) != root for _, v in f.items()):
            return False
        return len(f.support()) <= k


class CustomFamily(GroundFamily):
    """Explicit finite windowed families {j: [elements]}."""

    id = "custom"

    def __init__(self, families: dict[int, list[FinVector]]):
        if not families:
            raise ValueError("need at least one family")
        self.families = {j: list(els) for j, els in sorted(families.items())}
        for j, els in self.families.items():
            if j < 1:
                raise ValueError("family indices start at 1")
            for f in els:
                f.assert_ground_candidate()

    def family_indices(self) -> list[int]:
        return list(self.families)

    def _tau(self, j: int) -> Fraction:
        return max((sup_norm(f) for f in self.families[j]), default=Fraction(0))

    def tau_sq(self, j: int) -> Fraction:
        t = self._tau(j)
        return t * t

    def tau_tail_sum_bound(self, j: int) -> Fraction:
        return sum((self._tau(i) for i in self.families if i > j), Fraction(0))

    def family_sup(self, j: int, x: FinVector) -> NormValue:
        best = Fraction(0)
        for f in self.families[j]:
            v = abs(evaluate(f, x))
            if v > best:
                best = v
        return NormValue.of(best)

    def family_sup_witness(self, j: int, x: FinVector) -> GroundWitness:
        raise NotImplementedError("custom families report explicit elements")

    def best_element(self, j: int, x: FinVector) -> FinVector:
        return max(self.families[j], key=lambda f: abs(evaluate(f, x)),
                   default=FinVector())

    def enumerate_window(self, j: int, window: Interval, max_size: int = 12):
        return (f for f in self.families[j]
                if not f.is_zero() and window.contains(f.min_supp())
                and window.contains(f.max_supp()))

    def contains(self, j: int, f: FinVector) -> bool:
        return f.is_zero() or f in self.families[j] or f.neg() in self.families[j]


def ground_norm(fam: GroundFamily, x: FinVector) -> GroundNormResult:
    """Exact sup over F_0 and all graded families, with the tau cutoff.

    Families beyond index j cannot improve once tau_j * l1(x) falls strictly
    below the incumbent (tau is strictly decreasing), so the scan stops there.
    """
    if x.is_zero():
        return GroundNormResult(NormValue.of(0), 0, GroundWitness(0, (), Fraction(1)))
    best = NormValue.of(sup_norm(x))
    best_j = 0
    top = max(x.items(), key=lambda kv: (abs(kv[1]), -kv[0]))
    best_wit = GroundWitness(0, (top[0],), Fraction(1))
    l1 = l1_norm(x)
    for j in fam.family_indices():
        tau_sq = fam.tau_sq(j)
        if NormValue.sqrt_of(tau_sq * l1 * l1) < best:
            break
        v = fam.family_sup(j, x)
        if v > best:
            best = v
            best_j = j
            best_wit = fam.family_sup_witness(j, x)
    return GroundNormResult(best, best_j, best_wit)


def jtg_validate(fam: GroundFamily, window: Interval | None = None) -> dict:
    """Machine-check JTG conditions (A) and (B); (C) is reported analytic.

    (A) is checked structurally on windowed enumerations (symmetry and
    closure under interval restriction); (B) uses exact tau comparisons and
    the family's certified tail bound.
    """
    report: dict[str, object] = {"family": fam.id}
    indices = fam.family_indices()
    problems: list[str] = []
    # (B): tau strictly decreasing, sum <= 1
    taus_sq = [fam.tau_sq(j) for j in indices]
    for a, b in zip(taus_sq, taus_sq[1:]):
        if b >= a:
            problems.append("tau not strictly decreasing")
            break
    if indices:
        head: Fraction | None = Fraction(0)
        for j in indices:
            root = _exact_sqrt_fraction(fam.tau_sq(j))
            if root is None:
                head = None
                break
            head += root
        if head is not None:
            total = head + fam.tau_tail_sum_bound(indices[-1])
            if total > 1:
                problems.append("sum of tau (prefix + certified tail) exceeds 1")
            report["tau_sum_bound"] = str(total)
        else:
            report["tau_sum_bound"] = "irrational taus; per-term checks only"
    # (A): structural spot-check on a window
    win = window or Interval(1, 6)
    for j in indices[:2]:
        for f in list(fam.enumerate_window(j, win, max_size=3))[:40]:
            if not fam.contains(j, f.neg()):
                problems.append(f"F_{j} not symmetric")
                break
            cut = f.restrict(Interval(win.lo + 1, win.hi))
            if not fam.contains(j, cut):
                problems.append(f"F_{j} not closed under interval restriction")
                break
    report["violations"] = problems
    report["condition_C"] = ("analytic, not machine-checkable; the paper "
                             "proves it per built-in family")
    report["ok"] = not problems
    return report


def mr_double_sum_check(k_seq: tuple[int, ...], tail_bound: Fraction) -> Report:
    """Evaluate the MR admissibility double sum over the stored prefix.

    sum_j sum_{n != j} min(sqrt(k_n/k_j), sqrt(k_j/k_n)) <= 1, with the
    caller certifying `tail_bound` for all pairs involving unstored indices.
    Requires perfect-square ratios so the partial sums stay rational.
    """
    total = Fraction(0)
    J = len(k_seq)
    for j in range(J):
        for n in range(J):
            if n == j:
                continue
            lo, hi = sorted((k_seq[j], k_seq[n]))
            ratio = _exact_sqrt_fraction(Fraction(lo, hi))
            if ratio is None:
                return Report.failed("mr.irrational-ratio",
                                     f"k ratio {lo}/{hi} is not a perfect square")
            total += ratio
    if total + tail_bound > 1:
        return Report.failed("mr.double-sum", f"partial sum {total} + tail {tail_bound} > 1")
    return Report.passed(scopes=("tail bound caller-certified",))


def _exact_sqrt_fraction(q: Fraction) -> Fraction | None:
    from .core import _isqrt_exact

    rn = _isqrt_exact(q.numerator)
    rd = _isqrt_exact(q.denominator)
    if rn is None or rd is None:
        return None
    return Fraction(rn, rd)
