"""Deterministic injective codings and the sequences they certify.

The registry is the system's only mutable shared state: it materializes the
Gowers-Maurey coding sigma (on successive rational functional sequences) and
the family coding sigma_F (on sequences of graded family elements) lazily,
assigning the smallest unused admissible index at first query.  Every
assignment is appended to a replayable log, so reruns reproduce the realized
coding bit-exactly.

Canonical index choices: Omega_1 = Xi_1 = odd naturals, Omega_2 = Xi_2 =
even naturals; sigma's codomain {2j : j in Omega_2} is then the multiples
of four, sigma_F's codomain is the even naturals.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction

from .core import FinVector, Interval, Report, format_rational
from .ground import GroundFamily
from .params import ParamSchedule


class ExhaustedWindow(RuntimeError):
    pass


class ScheduleExhausted(RuntimeError):
    pass


class ForeignRegistry(ValueError):
    pass


def in_omega1(k: int) -> bool:
    return k % 2 == 1


def in_xi1(k: int) -> bool:
    return k % 2 == 1


def in_xi2(k: int) -> bool:
    return k % 2 == 0 and k >= 2


def fingerprint_element(el: FinVector | str) -> str:
    if isinstance(el, str):
        return "D:" + el
    return ",".join(f"{n}:{format_rational(v)}" for n, v in el.items())


def fingerprint_sequence(els) -> str:
    return "|".join(fingerprint_element(e) for e in els)


class CodingRegistry:
    """Injective sigma / sigma_F assignments with a replayable log.

    Single-writer contract: assigning queries are serialized by a lock;
    lookups of already-assigned fingerprints are safe concurrently.
    """

    def __init__(self, sched: ParamSchedule):
        self.sched = sched
        self._sigma: dict[str, int] = {}
        self._sigma_used: set[int] = set()
        self._sigma_f: dict[str, int] = {}
        self._sigma_f_used: set[int] = set()
        self._log: list[tuple[str, int, str]] = []
        self._lock = threading.Lock()

    # -- sigma: Q_s -> {2j : j in Omega_2} = multiples of 4 ------------------

    def sigma(self, seq: list[FinVector]) -> int:
        self._check_qs(seq)
        fp = fingerprint_sequence(seq)
        got = self._sigma.get(fp)
        if got is not None:
            return got
        bound = self._sigma_growth_bound(seq)
        with self._lock:
            got = self._sigma.get(fp)
            if got is not None:
                return got
            idx = 4
            while True:
                if not self.sched.has_index(idx):
                    raise ScheduleExhausted(
                        f"no unused index with m > {bound} inside the schedule")
                if idx not in self._sigma_used and self.sched.m_at(idx) > bound:
                    break
                idx += 4
            self._sigma[fp] = idx
            self._sigma_used.add(idx)
            self._log.append(("sigma", idx, fp))
            return idx

    @staticmethod
    def _check_qs(seq: list[FinVector]) -> None:
        if not seq:
            raise ValueError("empty sequence")
        for f in seq:
            if f.is_zero():
                raise ValueError("zero functional in sequence")
        for a, b in zip(seq, seq[1:]):
            if not a.before(b):
                raise ValueError("sequence not successive")

    def _sigma_growth_bound(self, seq: list[FinVector]) -> Fraction:
        inv = max(1 / abs(v) for f in seq for _, v in f.items())
        return inv * seq[-1].max_supp()

    def sigma_growth_ok(self, seq: list[FinVector], idx: int) -> bool:
        return self.sched.m_at(idx) > self._sigma_growth_bound(seq)

    # -- sigma_F: W -> Xi_2 = even naturals ----------------------------------

    def sigma_f(self, tagged: list[tuple[FinVector | str, int]]) -> int:
        if not tagged:
            raise ValueError("empty sequence")
        for el, tag in tagged:
            if tag is None:
                raise ValueError("untagged element")
        fp = fingerprint_sequence(el for el, _ in tagged)
        got = self._sigma_f.get(fp)
        if got is not None:
            return got
        bound = max(tag for _, tag in tagged)
        with self._lock:
            got = self._sigma_f.get(fp)
            if got is not None:
                return got
            idx = 2
            while idx <= bound or idx in self._sigma_f_used:
                idx += 2
            self._sigma_f[fp] = idx
            self._sigma_f_used.add(idx)
            self._log.append(("sigma_f", idx, fp))
            return idx

    # -- persistence ----------------------------------------------------------

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for mode, idx, fp in self._log:
                fh.write(f"{mode}\t{idx}\t{fp}\n")

    @classmethod
    def load(cls, path: str, sched: ParamSchedule) -> "CodingRegistry":
        reg = cls(sched)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                mode, idx_s, fp = line.split("\t", 2)
                idx = int(idx_s)
                if mode == "sigma":
                    reg._sigma[fp] = idx
                    reg._sigma_used.add(idx)
                elif mode == "sigma_f":
                    reg._sigma_f[fp] = idx
                    reg._sigma_f_used.add(idx)
                else:
                    raise ValueError(f"unknown log mode {mode!r}")
                reg._log.append((mode, idx, fp))
        return reg

    def log_entries(self) -> list[tuple[str, int, str]]:
        return list(self._log)


# -- Lambda partition ---------------------------------------------------------


def lambda_member(i: int, l: int, sched: ParamSchedule) -> bool:
    """Lambda_i = {2^i (2t-1) : t >= 1} intersected with (m_i, inf).

    Distinct dyadic valuations make the Lambda_i pairwise disjoint.
    """
    if i < 1:
        raise ValueError("i >= 1")
    if l <= sched.m_at(i):
        return False
    return l % (1 << i) == 0 and (l >> i) % 2 == 1


def lambda_elements(i: int, sched: ParamSchedule, start: int = 1, count: int = 1) -> list[int]:
    """The first `count` members of Lambda_i that are >= start."""
    out = []
    t = 1
    while len(out) < count:
        l = (1 << i) * (2 * t - 1)
        if l >= start and l > sched.m_at(i):
            out.append(l)
        t += 1
        if t > 10**9:
            raise RuntimeError("lambda enumeration ran away")
    return out


# -- sigma_F special sequences -----------------------------------------------


@dataclass(frozen=True)
class SpecialFunctional:
    """A chain (f_1,...,f_d) of graded family elements with a restriction E.

    chain_tags holds the per-element index: min family index for f_1, the
    sigma_F assignment of the prefix for each later element.
    """

    chain: tuple[FinVector, ...]
    chain_tags: tuple[int, ...]
    interval: Interval
    registry_id: int

    def functional(self) -> FinVector:
        total = FinVector()
        for f in self.chain:
            total = total.add(f.restrict(self.interval))
        return total

    def ind(self) -> frozenset[int]:
        out = set()
        for f, tag in zip(self.chain, self.chain_tags):
            if not f.restrict(self.interval).is_zero():
                out.add(tag)
        return frozenset(out)

    def restricted(self, interval: Interval) -> "SpecialFunctional":
        return SpecialFunctional(self.chain, self.chain_tags,
                                 self.interval.intersect(interval), self.registry_id)


def min_family_index(fam: GroundFamily, f: FinVector) -> int | None:
    for j in fam.family_indices():
        if fam.contains(j, f):
            return j
    return None


def chain_tags(registry: CodingRegistry, fam: GroundFamily,
               chain: list[FinVector]) -> tuple[int, ...]:
    """Per-element indices of a chain: min index, then sigma_F of prefixes."""
    if not chain:
        return ()
    first = min_family_index(fam, chain[0])
    if first is None:
        raise ValueError("chain head lies in no family")
    tags = [first]
    for i in range(1, len(chain)):
        tags.append(registry.sigma_f(list(zip(chain[:i], tags))))
    return tuple(tags)


def validate_special_chain(registry: CodingRegistry, fam: GroundFamily,
                           chain: list[FinVector]) -> Report:
    """Chain property: f_1 in a Xi_1 family, f_{i+1} in F_{sigma_F(prefix)}."""
    if not chain:
        return Report.failed("special.empty", "no elements")
    for a, b in zip(chain, chain[1:]):
        if not a.before(b):
            return Report.failed("special.successive", "elements not successive")
    first = min_family_index(fam, chain[0])
    if first is None or not in_xi1(first):
        return Report.failed("special.seed-family",
                             f"head index {first} not in Xi_1")
    tags = [first]
    for i in range(1, len(chain)):
        idx = registry.sigma_f(list(zip(chain[:i], tags)))
        if not fam.contains(idx, chain[i]):
            return Report.failed("special.chain-index",
                                 f"element {i + 1} not in F_{idx}")
        tags.append(idx)
    return Report.passed()


def make_special(registry: CodingRegistry, fam: GroundFamily,
                 chain: list[FinVector], interval: Interval | None = None) -> SpecialFunctional:
    rep = validate_special_chain(registry, fam, chain)
    if not rep.ok:
        raise ValueError(f"{rep.label}: {rep.detail}")
    tags = chain_tags(registry, fam, chain)
    iv = interval if interval is not None else Interval.all()
    return SpecialFunctional(tuple(chain), tags, iv, id(registry))


def disjoint(functionals: list[SpecialFunctional]) -> bool:
    inds = [sf.ind() for sf in functionals]
    for i in range(len(inds)):
        for j in range(i + 1, len(inds)):
            if inds[i] & inds[j]:
                return False
    return True


def canonical_family_element(fam: GroundFamily, j: int, start: int) -> FinVector | None:
    """The canonical nonzero element of F_j supported at a single position.

    All built-in families contain single-index elements; CUSTOM families are
    scanned for the first element starting at or after `start`.
    """
    window = Interval(start, start)
    for el in fam.enumerate_window(j, window, max_size=1):
        return el
    # custom families may have no singleton at this position: scan forward
    from .ground import CustomFamily

    if isinstance(fam, CustomFamily):
        for el in fam.families.get(j, []):
            if not el.is_zero() and el.min_supp() >= start:
                return el
    return None


def build_sigma_f_special(registry: CodingRegistry, fam: GroundFamily,
                          seed: tuple[int, FinVector], length: int,
                          window: Interval) -> SpecialFunctional:
    """Greedy sigma_F special sequence: extend with a canonical element of the
    coded family inside the window after the prefix."""
    seed_index, seed_el = seed
    if not in_xi1(seed_index):
        raise ValueError(f"seed family {seed_index} not in Xi_1")
    if not fam.contains(seed_index, seed_el):
        raise ValueError("seed element not in its declared family")
    if window.hi is None:
        raise ValueError("window must be finite")
    chain = [seed_el]
    tags = [seed_index]
    while len(chain) < length:
        nxt_index = registry.sigma_f(list(zip(chain, tags)))
        start = chain[-1].max_supp() + 1
        el = None
        pos = start
        while pos <= window.hi and el is None:
            el = canonical_family_element(fam, nxt_index, pos)
            if el is not None and el.max_supp() > window.hi:
                el = None
            pos += 1
        if el is None:
            raise ExhaustedWindow(
                f"no element of F_{nxt_index} fits in the window after {start - 1}")
        chain.append(el)
        tags.append(nxt_index)
    return SpecialFunctional(tuple(chain), tuple(tags), Interval.all(), id(registry))


def tree_interference(s: SpecialFunctional, t: SpecialFunctional) -> tuple[int, Report]:
    """i_{s,t} = max{i : ind(phi_i) = ind(psi_i)}, plus the two tree laws:
    (a) equal elements strictly below i_{s,t}, (b) disjoint index tails."""
    if s.registry_id != t.registry_id:
        raise ForeignRegistry("sequences come from different registries")
    common = min(len(s.chain), len(t.chain))
    i_st = 0
    for i in range(common):
        if s.chain_tags[i] == t.chain_tags[i]:
            i_st = i + 1
    for i in range(i_st - 1):
        if s.chain[i] != t.chain[i]:
            return i_st, Report.failed("interference.prefix",
                                       f"elements differ at position {i + 1} < i_st")
    tail_s = {s.chain_tags[i] for i in range(i_st, len(s.chain))}
    tail_t = {t.chain_tags[i] for i in range(i_st, len(t.chain))}
    if tail_s & tail_t:
        return i_st, Report.failed("interference.tails",
                                   f"tail indices intersect: {sorted(tail_s & tail_t)}")
    return i_st, Report.passed()


# -- attractor sequences (Def. of the sigma coding, clause B) ------------------


@dataclass(frozen=True)
class WeightedFunctional:
    """A type-I functional with declared weight m_{weight_index} and the
    children certifying it as a single (A_{n_w}, 1/m_w) operation result."""

    func: FinVector
    weight_index: int
    children: tuple[FinVector, ...]

    def check(self, sched: ParamSchedule) -> Report:
        w = self.weight_index
        if not sched.has_index(w):
            return Report.failed("weight.index", f"m_{w} not in schedule")
        m = sched.m_at(w)
        n = sched.n_at(w)
        if len(self.children) > n:
            return Report.failed("weight.count", f"{len(self.children)} children > n_{w}")
        for a, b in zip(self.children, self.children[1:]):
            if not a.before(b):
                return Report.failed("weight.successive", "children overlap")
        total = FinVector()
        for c in self.children:
            try:
                c.assert_ground_candidate()
            except ValueError:
                return Report.failed("weight.child-norm", "child sup norm > 1")
            total = total.add(c)
        if total.scale(Fraction(1, m)) != self.func:
            return Report.failed("weight.sum-mismatch", "functional != (1/m) * sum(children)")
        return Report.passed()


class CanonicalWeightedPool:
    """Supplies (1/m_w)(e_s* + ... + e_{s+c-1}*) functionals on demand."""

    def __init__(self, sched: ParamSchedule, span: int = 2):
        self.sched = sched
        self.span = span

    def supply(self, weight_index: int, start: int, window: Interval) -> WeightedFunctional:
        c = min(self.span, self.sched.n_at(weight_index))
        if window.hi is not None and start + c - 1 > window.hi:
            raise ExhaustedWindow(f"weight-{weight_index} functional does not fit at {start}")
        children = tuple(FinVector.unit(start + i) for i in range(c))
        func = FinVector({start + i: Fraction(1, self.sched.m_at(weight_index))
                          for i in range(c)})
        return WeightedFunctional(func, weight_index, children)

    def head_weight_index(self, length: int) -> int:
        """Smallest 2k with k in Omega_1 and m_{2k}^(1/2) > length."""
        k = 1
        while True:
            idx = 2 * k
            if not self.sched.has_index(idx):
                raise ScheduleExhausted(f"no head weight with m > {length}^2")
            if self.sched.m_at(idx) > length * length:
                return idx
            k += 2


@dataclass(frozen=True)
class AttractorSequence:
    funcs: tuple[FinVector, ...]
    certs: dict[int, WeightedFunctional] = field(compare=False)  # odd positions, 1-based
    j: int = 1


def build_attractor_sequence(registry: CodingRegistry, pool: CanonicalWeightedPool,
                             j: int, sched: ParamSchedule,
                             window: Interval) -> AttractorSequence:
    """A toy n_{4j-3} attractor sequence: weighted heads at odd positions,
    biorthogonals indexed by the Lambda partition at even positions."""
    length = sched.n_at(4 * j - 3)
    if length % 2:
        raise ValueError(f"attractor length n_{4 * j - 3} = {length} must be even")
    if window.hi is None:
        raise ValueError("window must be finite")
    head_w = pool.head_weight_index(length)
    cursor = window.lo
    funcs: list[FinVector] = []
    certs: dict[int, WeightedFunctional] = {}
    wf = pool.supply(head_w, cursor, window)
    funcs.append(wf.func)
    certs[1] = wf
    cursor = wf.func.max_supp() + 1
    for i in range(1, length):
        pos = i + 1
        if pos % 2 == 0:
            lam_index = registry.sigma(funcs)
            candidates = lambda_elements(lam_index, sched, start=cursor, count=1)
            l = candidates[0]
            if not window.contains(l):
                raise ExhaustedWindow(
                    f"Lambda_{lam_index} has no member in the window after {cursor}")
            funcs.append(FinVector.unit(l))
            cursor = l + 1
        else:
            w_index = registry.sigma(funcs)
            wf = pool.supply(w_index, cursor, window)
            funcs.append(wf.func)
            certs[pos] = wf
            cursor = wf.func.max_supp() + 1
    return AttractorSequence(tuple(funcs), certs, j)


def validate_attractor_sequence(seq: AttractorSequence, registry: CodingRegistry,
                                sched: ParamSchedule, j: int) -> Report:
    funcs = seq.funcs
    length = sched.n_at(4 * j - 3)
    if len(funcs) != length:
        return Report.failed("attractor.length",
                             f"{len(funcs)} entries, expected n_{4 * j - 3} = {length}")
    try:
        CodingRegistry._check_qs(list(funcs))
    except ValueError as exc:
        return Report.failed("attractor.successive", str(exc))
    head = seq.certs.get(1)
    if head is None:
        return Report.failed("attractor.weight-cert", "no certificate for f_1")
    rep = head.check(sched)
    if not rep.ok:
        return Report.failed("attractor.weight-cert", f"f_1: {rep.label}")
    k2 = head.weight_index
    if k2 % 2 or not in_omega1(k2 // 2):
        return Report.failed("attractor.head-weight",
                             f"w(f_1) = m_{k2} but {k2} is not 2k with k odd")
    if sched.m_at(k2) <= length * length:
        return Report.failed("attractor.head-weight",
                             f"m_{k2}^(1/2) <= n_{4 * j - 3}")
    for pos in range(2, length + 1):
        prefix = list(funcs[: pos - 1])
        assigned = registry.sigma(prefix)
        f = funcs[pos - 1]
        if pos % 2 == 0:
            if len(f.support()) != 1 or f.coeff(f.min_supp()) != 1:
                return Report.failed("attractor.even-not-basis",
                                     f"f_{pos} is not a biorthogonal e*_l")
            l = f.min_supp()
            if not lambda_member(assigned, l, sched):
                return Report.failed("attractor.lambda-membership",
                                     f"l = {l} not in Lambda_{assigned}")
        else:
            cert = seq.certs.get(pos)
            if cert is None:
                return Report.failed("attractor.weight-cert", f"no certificate for f_{pos}")
            rep = cert.check(sched)
            if not rep.ok:
                return Report.failed("attractor.weight-cert", f"f_{pos}: {rep.label}")
            if cert.func != f:
                return Report.failed("attractor.weight-cert",
                                     f"certificate functional mismatch at {pos}")
            if cert.weight_index != assigned:
                return Report.failed("attractor.sigma-weight",
                                     f"w(f_{pos}) = m_{cert.weight_index}, "
                                     f"sigma demands m_{assigned}")
    return Report.passed()
