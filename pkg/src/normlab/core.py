"""Exact rational vectors, functionals, intervals and elementary norms.

Everything downstream works with finitely supported sequences over the
positive naturals with Fraction coordinates.  No floating point is used
anywhere; all comparisons are exact.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping

Rational = Fraction


def parse_rational(text: str) -> Fraction:
    """Parse 'p/q' or 'p' into an exact Fraction."""
    return Fraction(text.strip())


def format_rational(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class Interval:
    """An interval of naturals, possibly empty or right-infinite.

    `hi is None` marks +inf.  The empty interval is Interval.empty().
    """

    __slots__ = ("lo", "hi", "_empty")

    def __init__(self, lo: int, hi: int | None):
        if hi is not None and lo > hi:
            raise ValueError("use Interval.empty() for the empty interval")
        self.lo = lo
        self.hi = hi
        self._empty = False

    @classmethod
    def empty(cls) -> "Interval":
        iv = cls.__new__(cls)
        iv.lo = 0
        iv.hi = 0
        iv._empty = True
        return iv

    @classmethod
    def all(cls) -> "Interval":
        return cls(1, None)

    def is_empty(self) -> bool:
        return self._empty

    def contains(self, n: int) -> bool:
        if self._empty:
            return False
        return self.lo <= n and (self.hi is None or n <= self.hi)

    def intersect(self, other: "Interval") -> "Interval":
        if self._empty or other._empty:
            return Interval.empty()
        lo = max(self.lo, other.lo)
        if self.hi is None:
            hi = other.hi
        elif other.hi is None:
            hi = self.hi
        else:
            hi = min(self.hi, other.hi)
        if hi is not None and lo > hi:
            return Interval.empty()
        return Interval(lo, hi)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        if self._empty or other._empty:
            return self._empty and other._empty
        return (self.lo, self.hi) == (other.lo, other.hi)

    def __hash__(self) -> int:
        return hash(("empty",)) if self._empty else hash((self.lo, self.hi))

    def __repr__(self) -> str:
        if self._empty:
            return "Interval.empty()"
        hi = "inf" if self.hi is None else str(self.hi)
        return f"Interval({self.lo},{hi})"


class FinVector:
    """Finitely supported exact-rational sequence over the positive naturals.

    Immutable after construction; zero coordinates are never stored.  The
    same representation serves vectors and functionals.
    """

    __slots__ = ("_coords",)

    def __init__(self, coords: Mapping[int, Fraction] | Iterable[tuple[int, Fraction]] = ()):
        items = coords.items() if isinstance(coords, Mapping) else coords
        clean: dict[int, Fraction] = {}
        for n, v in items:
            if n < 1:
                raise ValueError(f"coordinate index {n} < 1")
            fv = Fraction(v)
            if fv != 0:
                clean[n] = fv
        self._coords = clean

    @classmethod
    def unit(cls, n: int, value: Fraction | int = 1) -> "FinVector":
        return cls({n: Fraction(value)})

    @classmethod
    def zero(cls) -> "FinVector":
        return cls()

    def coeff(self, n: int) -> Fraction:
        return self._coords.get(n, Fraction(0))

    def items(self) -> Iterator[tuple[int, Fraction]]:
        return iter(sorted(self._coords.items()))

    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self._coords))

    def is_zero(self) -> bool:
        return not self._coords

    def range(self) -> Interval:
        if not self._coords:
            return Interval.empty()
        return Interval(min(self._coords), max(self._coords))

    def min_supp(self) -> int:
        if not self._coords:
            raise ValueError("zero vector has no support")
        return min(self._coords)

    def max_supp(self) -> int:
        if not self._coords:
            raise ValueError("zero vector has no support")
        return max(self._coords)

    def add(self, other: "FinVector") -> "FinVector":
        out = dict(self._coords)
        for n, v in other._coords.items():
            out[n] = out.get(n, Fraction(0)) + v
        return FinVector(out)

    def sub(self, other: "FinVector") -> "FinVector":
        return self.add(other.scale(Fraction(-1)))

    def scale(self, factor: Fraction) -> "FinVector":
        factor = Fraction(factor)
        if factor == 0:
            return FinVector()
        return FinVector({n: v * factor for n, v in self._coords.items()})

    def neg(self) -> "FinVector":
        return self.scale(Fraction(-1))

    def restrict(self, interval: Interval) -> "FinVector":
        return FinVector({n: v for n, v in self._coords.items() if interval.contains(n)})

    def before(self, other: "FinVector") -> bool:
        """Block order: every index of self precedes every index of other."""
        if self.is_zero() or other.is_zero():
            raise ValueError("block order undefined for the zero vector")
        return self.max_supp() < other.min_supp()

    def assert_ground_candidate(self) -> None:
        """Ground elements must have sup norm at most 1 (coords are rational by type)."""
        if sup_norm(self) > 1:
            raise ValueError("sup norm exceeds 1; not a ground candidate")

    def canonical_key(self) -> tuple[tuple[int, Fraction], ...]:
        return tuple(sorted(self._coords.items()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FinVector):
            return NotImplemented
        return self._coords == other._coords

    def __hash__(self) -> int:
        return hash(self.canonical_key())

    def __repr__(self) -> str:
        return f"FinVector({format_vector(self)!r})"


# A functional is represented exactly like a vector.
FinFunctional = FinVector


def evaluate(f: FinVector, x: FinVector) -> Fraction:
    """Exact pairing sum_n f(n) x(n)."""
    small, big = (f, x) if len(f._coords) <= len(x._coords) else (x, f)
    total = Fraction(0)
    for n, v in small._coords.items():
        w = big._coords.get(n)
        if w is not None:
            total += v * w
    return total


def restrict(f: FinVector, interval: Interval) -> FinVector:
    return f.restrict(interval)


def sup_norm(x: FinVector) -> Fraction:
    return max((abs(v) for v in x._coords.values()), default=Fraction(0))


def l1_norm(x: FinVector) -> Fraction:
    return sum((abs(v) for v in x._coords.values()), Fraction(0))


def parse_vector(text: str) -> FinVector:
    """Parse the textual vector format, e.g. '1:3/1 2:-4/1'."""
    coords: dict[int, Fraction] = {}
    for token in text.split():
        try:
            idx, val = token.split(":", 1)
            n = int(idx)
            v = Fraction(val)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed vector entry {token!r}") from exc
        if n < 1:
            raise ValueError(f"vector index {n} < 1")
        if n in coords:
            raise ValueError(f"duplicate vector index {n}")
        if v != 0:
            coords[n] = v
    return FinVector(coords)


def format_vector(x: FinVector) -> str:
    return " ".join(f"{n}:{format_rational(v)}" for n, v in x.items())


class NormValue:
    """Exact norm value: a rational, or the square root of a rational.

    Square roots are stored by their square so every comparison stays in Q.
    """

    __slots__ = ("is_sqrt", "payload")

    def __init__(self, is_sqrt: bool, payload: Fraction):
        payload = Fraction(payload)
        if payload < 0:
            raise ValueError("norm values are nonnegative")
        # normalize perfect squares of rationals down to exact rationals
        if is_sqrt:
            num, den = payload.numerator, payload.denominator
            rn, rd = _isqrt_exact(num), _isqrt_exact(den)
            if rn is not None and rd is not None:
                is_sqrt = False
                payload = Fraction(rn, rd)
        self.is_sqrt = is_sqrt
        self.payload = payload

    @classmethod
    def of(cls, value: Fraction | int) -> "NormValue":
        return cls(False, Fraction(value))

    @classmethod
    def sqrt_of(cls, square: Fraction | int) -> "NormValue":
        return cls(True, Fraction(square))

    def square(self) -> Fraction:
        return self.payload if self.is_sqrt else self.payload * self.payload

    def as_rational(self) -> Fraction:
        if self.is_sqrt:
            raise ValueError(f"{self} is not rational")
        return self.payload

    def scale(self, factor: Fraction) -> "NormValue":
        factor = abs(Fraction(factor))
        if self.is_sqrt:
            return NormValue(True, self.payload * factor * factor)
        return NormValue(False, self.payload * factor)

    def _cmp(self, other: "NormValue") -> int:
        a, b = self.square(), other.square()
        if a == b:
            return 0
        return -1 if a < b else 1

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = NormValue.of(other)
        if not isinstance(other, NormValue):
            return NotImplemented
        return self._cmp(other) == 0

    def __hash__(self) -> int:
        return hash(("normvalue", self.square()))

    def __lt__(self, other: "NormValue | int | Fraction") -> bool:
        if isinstance(other, (int, Fraction)):
            other = NormValue.of(other)
        return self._cmp(other) < 0

    def __le__(self, other: "NormValue | int | Fraction") -> bool:
        if isinstance(other, (int, Fraction)):
            other = NormValue.of(other)
        return self._cmp(other) <= 0

    def __gt__(self, other: "NormValue | int | Fraction") -> bool:
        return not self.__le__(other)

    def __ge__(self, other: "NormValue | int | Fraction") -> bool:
        return not self.__lt__(other)

    def __repr__(self) -> str:
        return f"NormValue({self})"

    def __str__(self) -> str:
        if self.is_sqrt:
            return f"sqrt({format_rational(self.payload)})"
        return format_rational(self.payload)


def _isqrt_exact(n: int) -> int | None:
    """Integer square root if n is a perfect square, else None."""
    if n < 0:
        return None
    from math import isqrt

    r = isqrt(n)
    return r if r * r == n else None


def max_norm_value(values: Iterable[NormValue]) -> NormValue:
    best = NormValue.of(0)
    for v in values:
        if v > best:
            best = v
    return best


class Report:
    """Outcome of a verifier: ok, or the first violated clause by label.

    Labels are stable strings (e.g. 'type1.sum-mismatch') so tests and the
    CLI can match on them; `scopes` records clauses that were only checked
    pool-relative rather than against the full (non-enumerable) norming set.
    """

    __slots__ = ("ok", "label", "detail", "scopes")

    def __init__(self, ok: bool, label: str | None = None, detail: str = "",
                 scopes: tuple[str, ...] = ()):
        self.ok = ok
        self.label = label
        self.detail = detail
        self.scopes = scopes

    @classmethod
    def passed(cls, scopes: tuple[str, ...] = ()) -> "Report":
        return cls(True, None, "", scopes)

    @classmethod
    def failed(cls, label: str, detail: str = "") -> "Report":
        return cls(False, label, detail)

    def __bool__(self) -> bool:
        return self.ok

    def __repr__(self) -> str:
        if self.ok:
            return f"Report(ok, scopes={list(self.scopes)})"
        return f"Report(fail {self.label}: {self.detail})"
