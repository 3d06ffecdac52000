"""Schreier families S_n, the cardinality families A_n, and special convex
combinations.

S_1 = {F : #F <= min F} together with the empty set, and
S_{n+1} = unions of at most min(F_1) successive members of S_n.  All
families are hereditary and spreading; membership is decided by the greedy
longest-initial-segment decomposition (sound because each S_n is hereditary
and closed under initial segments).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .core import FinVector, Interval, Report
from .params import ParamSchedule


@dataclass(frozen=True)
class FamilySpec:
    kind: str  # 'S' or 'A'
    n: int

    def __post_init__(self):
        if self.kind not in ("S", "A"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind == "A" and self.n < 1:
            raise ValueError("A_n needs n >= 1")
        if self.kind == "S" and self.n < 0:
            raise ValueError("S_n needs n >= 0")

    @classmethod
    def parse(cls, text: str) -> "FamilySpec":
        kind, _, num = text.partition(":")
        return cls(kind.strip().upper(), int(num))

    def __str__(self) -> str:
        return f"{self.kind}:{self.n}"


def parse_finset(text: str) -> tuple[int, ...]:
    """Parse a set literal like '{2,3,4}' into a strictly increasing tuple."""
    body = text.strip()
    if body.startswith("{") and body.endswith("}"):
        body = body[1:-1]
    items = [int(t) for t in body.replace(",", " ").split()]
    out = tuple(items)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError("set literal must be strictly increasing")
    if out and out[0] < 1:
        raise ValueError("set elements must be positive")
    return out


@lru_cache(maxsize=200_000)
def _member_s(fs: tuple[int, ...], n: int) -> bool:
    if not fs:
        return True
    if n == 0:
        return len(fs) <= 1
    if n == 1:
        return len(fs) <= fs[0]
    # greedy: peel maximal initial segments lying in S_{n-1}
    budget = fs[0]
    rest = fs
    blocks = 0
    while rest:
        blocks += 1
        if blocks > budget:
            return False
        # longest prefix of rest in S_{n-1}; prefix membership is monotone
        lo, hi = 1, len(rest)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if _member_s(rest[:mid], n - 1):
                lo = mid
            else:
                hi = mid - 1
        rest = rest[lo:]
    return True


def member(fs: tuple[int, ...] | list[int], spec: FamilySpec) -> bool:
    fs = tuple(fs)
    if any(b <= a for a, b in zip(fs, fs[1:])):
        raise ValueError("set must be strictly increasing")
    if spec.kind == "A":
        return len(fs) <= spec.n
    return _member_s(fs, spec.n)


def admissible(mins: tuple[int, ...] | list[int], spec: FamilySpec) -> bool:
    """A successive sequence is admissible iff its minima form a family member."""
    return member(mins, spec)


def vectors_admissible(blocks: list[FinVector], spec: FamilySpec) -> bool:
    mins = tuple(b.min_supp() for b in blocks)
    return member(mins, spec)


def is_maximal(fs: tuple[int, ...] | list[int], spec: FamilySpec) -> bool:
    """No proper superset with the same minimum lies in S_n.

    By heredity it is enough to test single-element extensions, and the
    value of an element added beyond max F is irrelevant to membership,
    so max F + 1 stands in for every larger candidate.
    """
    if spec.kind != "S":
        raise ValueError("maximality is defined only for Schreier families")
    fs = tuple(fs)
    if not member(fs, spec):
        raise ValueError(f"{fs} is not in {spec}")
    if not fs:
        return False
    candidates = [x for x in range(fs[0] + 1, fs[-1]) if x not in set(fs)]
    candidates.append(fs[-1] + 1)
    for x in candidates:
        extended = tuple(sorted(fs + (x,)))
        if member(extended, spec):
            return False
    return True


def iter_members(points: tuple[int, ...], n: int):
    """Yield every S_n subset of the given strictly increasing point tuple.

    Exponential; intended for oracles and tiny windows only.
    """
    from itertools import combinations

    yield ()
    for size in range(1, len(points) + 1):
        for combo in combinations(points, size):
            if _member_s(combo, n):
                yield combo


class _MassDP:
    """Exact maximization of sum(weights[P]) over P in S_n, P subset of points.

    Recursion mirrors the family definition: an anchored S_h set within a
    prefix window is a chain of at most min-anchor successive S_{h-1}
    blocks.  Block budgets are capped at the number of remaining points.
    Weights arrive LCM-scaled to integers, keeping the DP in fast int ops.
    """

    def __init__(self, points: tuple[int, ...], weights: tuple[int, ...]):
        self.p = points
        self.w = weights
        self.L = len(points)
        self._anch: dict[tuple[int, int, int], int] = {}
        self._chain: dict[tuple[int, int, int, int], int] = {}

    def best(self, n: int) -> int:
        return max(self.anchored(n, i, self.L - 1) for i in range(self.L))

    def anchored(self, h: int, i: int, e: int) -> int:
        """Max mass of an S_h set with min = points[i] inside positions [i, e]."""
        if i > e:
            return 0
        if h == 0:
            return self.w[i]
        key = (h, i, e)
        got = self._anch.get(key)
        if got is None:
            d = min(self.p[i], e - i + 1)
            got = self.chain(h - 1, i, d, e)
            self._anch[key] = got
        return got

    def chain(self, g: int, i: int, d: int, e: int) -> int:
        """Max mass of <= d successive S_g blocks, first anchored at i, inside [i, e]."""
        if d <= 0 or i > e:
            return 0
        # a budget that cannot bind is equivalent to an unbounded one
        if d >= e - i + 1:
            d = e - i + 1
        key = (g, i, d, e)
        got = self._chain.get(key)
        if got is not None:
            return got
        best = self.anchored(g, i, e)
        if d > 1:
            # anchored mass is monotone in the window bound, so the head may
            # always be confined to [i, i2-1] when the next block starts at i2
            for i2 in range(i + 1, e + 1):
                v = self.anchored(g, i, i2 - 1) + self.chain(g, i2, d - 1, e)
                if v > best:
                    best = v
        self._chain[key] = best
        return best


def max_mass(points: tuple[int, ...], weights: tuple[Fraction, ...], spec: FamilySpec) -> Fraction:
    """Exact max of sum(weights over P) for P in the family, P subset of points."""
    if len(points) != len(weights):
        raise ValueError("points and weights must align")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be nonnegative")
    if not points:
        return Fraction(0)
    if spec.kind == "A":
        return sum(sorted(weights, reverse=True)[: spec.n], Fraction(0))
    if spec.n == 0:
        return max(weights)
    # when the window starts past its own length every subset is already in
    # S_1, so the whole mass is capturable
    if points[0] >= len(points):
        return sum(weights, Fraction(0))
    from math import lcm

    scale = lcm(*(w.denominator for w in weights)) if weights else 1
    scaled = tuple(int(w * scale) for w in weights)
    return Fraction(_MassDP(points, scaled).best(spec.n), scale)


def _ceil_log2_power(m: int, exponent: int) -> int:
    """Smallest integer h with 2^h >= m^exponent, computed exactly."""
    power = m**exponent
    h = power.bit_length() - 1
    if (1 << h) < power:
        h += 1
    return h


def bscc_constraint_order(j: int, sched: ParamSchedule) -> int:
    """The Schreier order 2*log2(m_j)*(n_{j-1}+1) of the smallness condition,
    rounded up to an integer (exact big-integer computation)."""
    if j < 2:
        raise ValueError("basic special convex combinations need j >= 2")
    m_j = sched.m_at(j)
    n_prev = sched.n_at(j - 1)
    return _ceil_log2_power(m_j, 2 * (n_prev + 1))


def bscc_check(pairs: list[tuple[int, Fraction]], eps: Fraction, j: int,
               sched: ParamSchedule) -> Report:
    """Check the basic special convex combination conditions.

    pairs: (index k, coefficient a_k) with strictly increasing indices.
    Conditions: F in S_{n_j}; every P in the constraint family has mass < eps;
    coefficients non-increasing; coefficients sum to 1.
    """
    if not pairs:
        return Report.failed("bscc.empty", "no coefficients")
    indices = tuple(k for k, _ in pairs)
    coeffs = tuple(Fraction(a) for _, a in pairs)
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError("indices must be strictly increasing")
    if any(a <= 0 for a in coeffs):
        raise ValueError("coefficients must be positive rationals")
    n_j = sched.n_at(j)
    if not _member_s(indices, n_j):
        return Report.failed("bscc.family-membership", f"support not in S_{n_j}")
    if any(coeffs[i] < coeffs[i + 1] for i in range(len(coeffs) - 1)):
        return Report.failed("bscc.monotone", "coefficients increase somewhere")
    if sum(coeffs) != 1:
        return Report.failed("bscc.convexity", f"coefficients sum to {sum(coeffs)}")
    order = bscc_constraint_order(j, sched)
    worst = max_mass(indices, coeffs, FamilySpec("S", order))
    if worst >= eps:
        return Report.failed("bscc.mass-bound",
                             f"an S_{order} set carries mass {worst} >= {eps}")
    return Report.passed()


def scc_check(blocks: list[FinVector], coeffs: list[Fraction], eps: Fraction,
              j: int, sched: ParamSchedule) -> Report:
    """Special convex combination: the minima of the blocks must form a BSCC."""
    if len(blocks) != len(coeffs):
        raise ValueError("blocks and coefficients must align")
    for a, b in zip(blocks, blocks[1:]):
        if not a.before(b):
            raise ValueError("blocks must be successive (overlap found)")
    pairs = [(b.min_supp(), Fraction(c)) for b, c in zip(blocks, coeffs)]
    return bscc_check(pairs, eps, j, sched)


NOT_FOUND = None


def bscc_search(window: Interval, eps: Fraction, j: int,
                sched: ParamSchedule) -> list[tuple[int, Fraction]] | None:
    """Search for a BSCC inside a finite window by repeated uniform averaging.

    Builds the order-n_j repeated average on the window and verifies it with
    bscc_check; returns NOT_FOUND when the window cannot host one.
    """
    if window.is_empty() or window.hi is None:
        raise ValueError("window must be finite and nonempty")
    positions = list(range(window.lo, window.hi + 1))
    if not positions:
        return NOT_FOUND
    n_j = sched.n_at(j)

    def repeated(order: int, start: int) -> tuple[list[tuple[int, Fraction]], int]:
        """Repeated average of the given order starting at positions[start];
        returns (pairs, next free position index).  Blocks are weighted by the
        planned count 1/anchor (not the truncated count) so coefficients stay
        non-increasing; the caller renormalizes the total to 1."""
        if order == 0:
            return [(positions[start], Fraction(1))], start + 1
        t = positions[start]
        parts: list[tuple[int, Fraction]] = []
        pos = start
        blocks = 0
        while blocks < t and pos < len(positions):
            sub, pos = repeated(order - 1, pos)
            parts.extend((k, a / t) for k, a in sub)
            blocks += 1
        return parts, pos

    pairs, _ = repeated(n_j, 0)
    total = sum(a for _, a in pairs)
    pairs = [(k, a / total) for k, a in pairs]
    report = bscc_check(pairs, eps, j, sched)
    if not report.ok:
        return NOT_FOUND
    return pairs
