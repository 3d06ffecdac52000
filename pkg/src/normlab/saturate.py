"""Exact dynamic programming for mixed-Tsirelson saturated norms.

The engine evaluates the implicit formula

    ||x|| = max( ||x||_G ,  sup_j sup (1/m_j) sum_i ||E_i x|| )

over a ground oracle and a list of admissible-partition schemes, by
recursion on support intervals.  Only the even (unconditional) operations
are modeled; when a spec stands in for a norming set with special/attractor
closure the value is a certified lower bound of the full norm, to be
bracketed with certificate evaluations from below and basic-inequality
bounds from above.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import FinVector, Interval, sup_norm
from .ground import GroundFamily, ground_norm
from .params import ParamSchedule
from .schreier import FamilySpec


@dataclass(frozen=True)
class OperationScheme:
    """An (M, theta)-operation: family plus weight 0 < theta < 1.

    weight_index labels theta as 1/m_{weight_index} for certificates.
    """

    family: FamilySpec
    weight: Fraction
    weight_index: int | None = None

    def __post_init__(self):
        if not 0 < self.weight < 1:
            raise ValueError("scheme weight must lie in (0, 1)")


class MixedGround:
    """Minimal ground interface for the engine: exact rational suprema."""

    label = "ground"
    position_blind = False

    def value(self, x: FinVector) -> Fraction:
        raise NotImplementedError

    def witness(self, x: FinVector) -> FinVector:
        """An element of the ground set attaining value(x) on x."""
        raise NotImplementedError

    def contains(self, f: FinVector) -> bool:
        raise NotImplementedError


class F0Ground(MixedGround):
    """Just the biorthogonals: ground value is the sup norm."""

    label = "f0"
    position_blind = True

    def value(self, x: FinVector) -> Fraction:
        return sup_norm(x)

    def witness(self, x: FinVector) -> FinVector:
        if x.is_zero():
            return FinVector()
        n, v = max(x.items(), key=lambda kv: (abs(kv[1]), -kv[0]))
        return FinVector.unit(n, 1 if v > 0 else -1)

    def contains(self, f: FinVector) -> bool:
        if f.is_zero():
            return True
        items = list(f.items())
        return len(items) == 1 and abs(items[0][1]) == 1


class CjGround(MixedGround):
    """C = { sum_{i in F} ±e_i* : #F <= cap }, the auxiliary-space ground."""

    position_blind = True

    def __init__(self, cap: int):
        if cap < 1:
            raise ValueError("cap must be >= 1")
        self.cap = cap
        self.label = f"cj:{cap}"

    def value(self, x: FinVector) -> Fraction:
        vals = sorted((abs(v) for _, v in x.items()), reverse=True)
        return sum(vals[: self.cap], Fraction(0))

    def witness(self, x: FinVector) -> FinVector:
        ranked = sorted(x.items(), key=lambda kv: (-abs(kv[1]), kv[0]))[: self.cap]
        return FinVector({n: (1 if v > 0 else -1) for n, v in ranked})

    def contains(self, f: FinVector) -> bool:
        if f.is_zero():
            return True
        if any(abs(v) != 1 for _, v in f.items()):
            return False
        return len(f.support()) <= self.cap


class FamilyGround(MixedGround):
    """A JTG family as engine ground; must be rational-valued."""

    def __init__(self, fam: GroundFamily):
        if not fam.rational_valued:
            raise ValueError(
                f"{fam.id} has irrational suprema; the engine needs rational grounds")
        self.fam = fam
        self.label = fam.id
        self.position_blind = fam.id in ("f0", "f2sec4")

    def value(self, x: FinVector) -> Fraction:
        return ground_norm(self.fam, x).value.as_rational()

    def witness(self, x: FinVector) -> FinVector:
        res = ground_norm(self.fam, x)
        wit = res.witness
        if wit.family_index == 0:
            n = wit.indices[0] if wit.indices else None
            if n is None:
                return FinVector()
            return FinVector.unit(n, 1 if x.coeff(n) > 0 else -1)
        from .ground import _exact_sqrt_fraction

        coeff = _exact_sqrt_fraction(wit.scale_sq)
        if coeff is None:
            raise ValueError("irrational witness coefficient")
        return FinVector({n: coeff * (1 if x.coeff(n) >= 0 else -1) for n in wit.indices})

    def contains(self, f: FinVector) -> bool:
        if f.is_zero():
            return True
        items = list(f.items())
        if len(items) == 1 and abs(items[0][1]) == 1:
            return True
        return any(self.fam.contains(j, f) for j in self.fam.family_indices())


@dataclass(frozen=True)
class SaturatedSpaceSpec:
    ground: MixedGround
    schemes: tuple[OperationScheme, ...]
    label: str = ""

    def __post_init__(self):
        if not self.schemes:
            raise ValueError("need at least one operation scheme")


class _Engine:
    """Memoized interval recursion; see module docstring for the formula."""

    def __init__(self, x: FinVector, spec: SaturatedSpaceSpec):
        self.spec = spec
        self.pts = x.support()
        self.coef = tuple(x.coeff(p) for p in self.pts)
        self.position_blind = spec.ground.position_blind and all(
            s.family.kind == "A" for s in spec.schemes)
        self._norm: dict = {}
        self._split: dict = {}
        self._anch: dict = {}
        self._chain: dict = {}

    def piece(self, i: int, j: int) -> FinVector:
        return FinVector({self.pts[k]: self.coef[k] for k in range(i, j + 1)})

    def _key(self, i: int, j: int):
        if self.position_blind:
            return self.coef[i: j + 1]
        return tuple(zip(self.pts[i: j + 1], self.coef[i: j + 1]))

    def norm(self, i: int, j: int) -> Fraction:
        if i > j:
            return Fraction(0)
        key = self._key(i, j)
        got = self._norm.get(key)
        if got is not None:
            return got
        best = self.spec.ground.value(self.piece(i, j))
        if j > i:
            for s_id, scheme in enumerate(self.spec.schemes):
                if scheme.family.kind == "A":
                    cand = scheme.weight * self.split_a(s_id, i, j,
                                                        min(scheme.family.n, j - i + 1))
                else:
                    cand = scheme.weight * self.best_s(s_id, i, j)
                if cand > best:
                    best = cand
        self._norm[key] = best
        return best

    # A_n: tile [i..j] into contiguous nonempty parts (WLOG by bimonotonicity).
    # The top level demands >= 2 parts: a single full part gives only
    # weight * ||x||, never the max, and would recurse into itself.

    def split_a(self, s_id: int, i: int, j: int, d: int) -> Fraction:
        if d <= 1 or i == j:
            return Fraction(0)
        best = Fraction(0)
        for m in range(i, j):
            v = self.norm(i, m) + self.split_tail(s_id, m + 1, j, d - 1)
            if v > best:
                best = v
        return best

    def split_tail(self, s_id: int, i: int, j: int, d: int) -> Fraction:
        """<= d parts tiling [i..j]; every norm call here is on a strict
        subinterval of the enclosing norm computation."""
        key = (s_id, self._key(i, j), d)
        got = self._split.get(key)
        if got is not None:
            return got
        best = self.norm(i, j)
        if d > 1:
            for m in range(i, j):
                v = self.norm(i, m) + self.split_tail(s_id, m + 1, j, d - 1)
                if v > best:
                    best = v
        self._split[key] = best
        return best

    # S_n: anchors form a Schreier set; each part runs to just before the next
    # anchor, the last part runs to the right end of the interval.  The
    # degenerate single part covering everything is forbidden (allow_full).

    def best_s(self, s_id: int, i: int, j: int) -> Fraction:
        n = self.spec.schemes[s_id].family.n
        best = Fraction(0)
        for a in range(i, j + 1):
            v = self.s_anchored(s_id, n, a, j + 1, allow_full=(a > i))
            if v > best:
                best = v
        return best

    def s_anchored(self, s_id: int, h: int, a: int, stop: int,
                   allow_full: bool = True) -> Fraction:
        """Best anchored S_h chain: anchors in [a, stop), first exactly a."""
        if h == 0:
            if not allow_full:
                return Fraction(-1)
            return self.norm(a, stop - 1)
        key = (s_id, h, a, stop, allow_full)
        got = self._anch.get(key)
        if got is None:
            d = min(self.pts[a], stop - a)
            got = self.s_chain(s_id, h - 1, a, d, stop, allow_full)
            self._anch[key] = got
        return got

    def s_chain(self, s_id: int, g: int, a: int, d: int, stop: int,
                allow_full: bool = True) -> Fraction:
        if d <= 0 or a >= stop:
            return Fraction(0)
        if d >= stop - a:
            d = stop - a
        key = (s_id, g, a, d, stop, allow_full)
        got = self._chain.get(key)
        if got is not None:
            return got
        best = self.s_anchored(s_id, g, a, stop, allow_full)
        if d > 1:
            for b in range(a + 1, stop):
                v = self.s_anchored(s_id, g, a, b) + self.s_chain(s_id, g, b, d - 1, stop)
                if v > best:
                    best = v
        self._chain[key] = best
        return best

    # witness reconstruction replays the argmax decisions against the memo

    def witness(self, i: int, j: int):
        from .certify import TreeAnalysis

        target = self.norm(i, j)
        piece = self.piece(i, j)
        if target == self.spec.ground.value(piece):
            return TreeAnalysis.leaf(self.spec.ground.witness(piece),
                                     self.spec.ground.label)
        for s_id, scheme in enumerate(self.spec.schemes):
            if scheme.family.kind == "A":
                d = min(scheme.family.n, j - i + 1)
                if scheme.weight * self.split_a(s_id, i, j, d) == target:
                    parts = self._recover_a(s_id, i, j, d)
                    children = [self.witness(a, b) for a, b in parts]
                    return TreeAnalysis.op(scheme, children)
            else:
                if scheme.weight * self.best_s(s_id, i, j) == target:
                    n = scheme.family.n
                    for a in range(i, j + 1):
                        full_ok = a > i
                        if self.s_anchored(s_id, n, a, j + 1, full_ok) * scheme.weight == target:
                            parts = self._recover_s(s_id, n, a, j + 1, full_ok)
                            children = [self.witness(u, v) for u, v in parts]
                            return TreeAnalysis.op(scheme, children)
        raise AssertionError("unreachable: some branch attains the max")

    def _recover_a(self, s_id: int, i: int, j: int, d: int) -> list[tuple[int, int]]:
        target = self.split_a(s_id, i, j, d)
        for m in range(i, j):
            if self.norm(i, m) + self.split_tail(s_id, m + 1, j, d - 1) == target:
                return [(i, m)] + self._recover_a_tail(s_id, m + 1, j, d - 1)
        raise AssertionError("unreachable")

    def _recover_a_tail(self, s_id: int, i: int, j: int, d: int) -> list[tuple[int, int]]:
        target = self.split_tail(s_id, i, j, d)
        if target == self.norm(i, j):
            return [(i, j)]
        for m in range(i, j):
            if self.norm(i, m) + self.split_tail(s_id, m + 1, j, d - 1) == target:
                return [(i, m)] + self._recover_a_tail(s_id, m + 1, j, d - 1)
        raise AssertionError("unreachable")

    def _recover_s(self, s_id: int, h: int, a: int, stop: int,
                   allow_full: bool = True) -> list[tuple[int, int]]:
        if h == 0:
            return [(a, stop - 1)]
        d = min(self.pts[a], stop - a)
        return self._recover_s_chain(s_id, h - 1, a, d, stop, allow_full)

    def _recover_s_chain(self, s_id: int, g: int, a: int, d: int, stop: int,
                         allow_full: bool = True) -> list[tuple[int, int]]:
        if d >= stop - a:
            d = stop - a
        target = self.s_chain(s_id, g, a, d, stop, allow_full)
        if target == self.s_anchored(s_id, g, a, stop, allow_full):
            return self._recover_s(s_id, g, a, stop, allow_full)
        for b in range(a + 1, stop):
            if self.s_anchored(s_id, g, a, b) + self.s_chain(s_id, g, b, d - 1, stop) == target:
                return self._recover_s(s_id, g, a, b) + self._recover_s_chain(
                    s_id, g, b, d - 1, stop)
        raise AssertionError("unreachable")


def mixed_norm(x: FinVector, spec: SaturatedSpaceSpec, want_witness: bool = False):
    """Exact saturated norm of x; optionally with a functional-tree witness.

    Empty support gives 0.  The witness evaluates to exactly the value and
    passes certify.verify_tree against the same spec.
    """
    if x.is_zero():
        return (Fraction(0), None) if want_witness else Fraction(0)
    eng = _Engine(x, spec)
    value = eng.norm(0, len(eng.pts) - 1)
    if not want_witness:
        return value
    tree = eng.witness(0, len(eng.pts) - 1)
    return value, tree


def aux_space_spec(j0: int, sched: ParamSchedule) -> SaturatedSpaceSpec:
    """The auxiliary space: ground C_{j0} (top n_{j0-1} coordinates) and the
    operations (A_{5 n_j}, 1/m_j) for every scheduled j."""
    if j0 < 2:
        raise ValueError("j0 must be >= 2")
    if not sched.has_index(j0):
        raise ValueError("schedule too short for j0")
    ground = CjGround(sched.n_at(j0 - 1))
    schemes = tuple(
        OperationScheme(FamilySpec("A", 5 * sched.n_at(j)), Fraction(1, sched.m_at(j)), j)
        for j in range(1, sched.j_max() + 1))
    return SaturatedSpaceSpec(ground, schemes, label=f"aux:{j0}")


def aux_norm(x: FinVector, j0: int, sched: ParamSchedule) -> Fraction:
    return mixed_norm(x, aux_space_spec(j0, sched))


def lemma_a3_bound(i: int, j0: int, sched: ParamSchedule, case: str = "GENERAL") -> Fraction:
    """Closed-form auxiliary-space bounds for weight-m_i functionals acting on
    the normalized average of n_{j0} basis vectors."""
    m_i = sched.m_at(i)
    m_j0 = sched.m_at(j0)
    if case == "GENERAL":
        if i < j0:
            return Fraction(2, m_i * m_j0)
        return Fraction(1, m_i)
    if case == "NO_J0_WEIGHT":
        if i == j0:
            raise ValueError("the no-j0-weight case excludes i == j0")
        if i < j0:
            return Fraction(2, m_i * m_j0 * m_j0)
        return Fraction(1, m_i)
    raise ValueError(f"unknown case {case!r}")


def prop13_bound(C: Fraction, eps: Fraction, i: int, j0: int,
                 sched: ParamSchedule, part: str = "ONE") -> Fraction:
    """The R.I.S.-average bounds; `eps <= 2/m_{j0}^2` is the stated hypothesis
    and is reported by `prop13_hypothesis_ok`."""
    C = Fraction(C)
    m_j0 = sched.m_at(j0)
    if part == "ONE":
        m_i = sched.m_at(i)
        if i < j0:
            return 3 * C / (m_j0 * m_i)
        return C / sched.n_at(j0) + C / m_i + C * Fraction(eps)
    if part == "TWO":
        return 4 * C / (m_j0 * m_j0)
    if part == "OVERALL":
        return 2 * C / m_j0
    raise ValueError(f"unknown part {part!r}")


def prop13_hypothesis_ok(eps: Fraction, j0: int, sched: ParamSchedule) -> bool:
    m_j0 = sched.m_at(j0)
    return Fraction(eps) <= Fraction(2, m_j0 * m_j0)


def h2_custom_ground(segment_families: list[list[Interval]],
                     combos: list[list[Fraction]]) -> MixedGround:
    """A CUSTOM windowed ground for the segment-based set H_2.

    Callers supply segment families (s_i) and rational coefficient rows with
    sum of squares <= 1; elements are sums of lambda * s*_{i,j} over disjoint
    subintervals.  The resulting value is a certified lower bound of the full
    H_2 ground norm.
    """

    class _H2(MixedGround):
        label = "h2-window"
        position_blind = False

        def __init__(self):
            self.elements: list[FinVector] = []
            for row in combos:
                if sum((Fraction(c) ** 2 for c in row), Fraction(0)) > 1:
                    raise ValueError("coefficient row has sum of squares > 1")
            for family, row in zip(segment_families, combos):
                el = FinVector()
                for seg, lam in zip(family, row):
                    if seg.is_empty() or seg.hi is None:
                        raise ValueError("segments must be finite and nonempty")
                    el = el.add(FinVector({n: Fraction(lam)
                                           for n in range(seg.lo, seg.hi + 1)}))
                if not el.is_zero():
                    el.assert_ground_candidate()
                    self.elements.append(el)
                    self.elements.append(el.neg())
            for n in set(i for el in self.elements for i in el.support()):
                self.elements.append(FinVector.unit(n))
                self.elements.append(FinVector.unit(n, -1))

        def value(self, x: FinVector) -> Fraction:
            from .core import evaluate

            best = sup_norm(x)
            for el in self.elements:
                v = evaluate(el, x)
                if v > best:
                    best = v
            return best

        def witness(self, x: FinVector) -> FinVector:
            from .core import evaluate

            target = self.value(x)
            f0 = F0Ground()
            if target == sup_norm(x):
                return f0.witness(x)
            for el in self.elements:
                if evaluate(el, x) == target:
                    return el
            raise AssertionError("unreachable")

        def contains(self, f: FinVector) -> bool:
            return f.is_zero() or f in self.elements or F0Ground().contains(f)

    return _H2()
