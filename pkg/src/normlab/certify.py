"""Certificate verifiers and constructive transforms.

Every checker returns a Report whose label names the first violated clause;
clauses that quantify over a set nobody can enumerate (all of the norming
set, all weighted functionals) are checked against declared pools plus the
engine's closed forms, and the report's `scopes` records that limitation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .coding import (CodingRegistry, WeightedFunctional, lambda_member)
from .core import (FinVector, Interval, NormValue, Report, evaluate, l1_norm,
                   sup_norm)
from .ground import GroundFamily, MRFamily, _exact_sqrt_fraction
from .params import ParamSchedule
from .saturate import (MixedGround, OperationScheme, SaturatedSpaceSpec,
                       aux_space_spec, mixed_norm)
from .schreier import FamilySpec, iter_members, member


# -- tree analyses -------------------------------------------------------------


@dataclass(frozen=True)
class TreeAnalysis:
    """A typed derivation tree certifying membership in a saturated norming set.

    kind T0: a ground element (leaf).  T1: the result of one (M, 1/m)
    operation on its children.  T2: a rational convex combination.
    """

    kind: str
    functional: FinVector
    children: tuple["TreeAnalysis", ...] = ()
    ground_tag: str = ""
    scheme: OperationScheme | None = None
    coeffs: tuple[Fraction, ...] = ()

    @classmethod
    def leaf(cls, functional: FinVector, ground_tag: str = "") -> "TreeAnalysis":
        return cls("T0", functional, ground_tag=ground_tag)

    @classmethod
    def op(cls, scheme: OperationScheme, children) -> "TreeAnalysis":
        total = FinVector()
        for c in children:
            total = total.add(c.functional)
        return cls("T1", total.scale(scheme.weight), tuple(children), scheme=scheme)

    @classmethod
    def convex(cls, coeffs, children) -> "TreeAnalysis":
        total = FinVector()
        for r, c in zip(coeffs, children):
            total = total.add(c.functional.scale(r))
        return cls("T2", total, tuple(children), coeffs=tuple(coeffs))

    def depth(self) -> int:
        if not self.children:
            return 0
        return 1 + max(c.depth() for c in self.children)

    def restricted(self, interval: Interval) -> "TreeAnalysis":
        """Interval restriction: norming sets are closed under it, so the
        restricted tree remains a valid analysis (empty children dropped)."""
        if self.kind == "T0":
            return TreeAnalysis.leaf(self.functional.restrict(interval), self.ground_tag)
        kids, coeffs = [], []
        for i, c in enumerate(self.children):
            rc = c.restricted(interval)
            if rc.functional.is_zero() and self.kind == "T1":
                continue
            kids.append(rc)
            if self.kind == "T2":
                coeffs.append(self.coeffs[i])
        if self.kind == "T1":
            if not kids:
                kids = [TreeAnalysis.leaf(FinVector(), self.ground_tag or "empty")]
            return TreeAnalysis.op(self.scheme, kids)
        return TreeAnalysis.convex(coeffs or self.coeffs, kids or
                                   [c.restricted(interval) for c in self.children])

    def weights_used(self) -> set[int]:
        out = set()
        if self.kind == "T1" and self.scheme and self.scheme.weight_index is not None:
            out.add(self.scheme.weight_index)
        for c in self.children:
            out |= c.weights_used()
        return out


def verify_tree(t: TreeAnalysis, spec: SaturatedSpaceSpec) -> Report:
    """Check all structural clauses; ground membership for every leaf."""
    return _verify_node(t, spec, "root")


def _verify_node(t: TreeAnalysis, spec: SaturatedSpaceSpec, path: str) -> Report:
    if t.kind == "T0":
        if t.children:
            return Report.failed("type0.has-children", path)
        if not spec.ground.contains(t.functional):
            return Report.failed("type0.not-in-ground", f"{path}: leaf not in ground set")
        return Report.passed()
    if not t.children:
        return Report.failed(f"{t.kind.lower()}.no-children", path)
    if t.kind == "T1":
        sch = t.scheme
        if sch is None or not any(s.family == sch.family and s.weight == sch.weight
                                  for s in spec.schemes):
            return Report.failed("type1.unknown-scheme", f"{path}: {sch}")
        for a, b in zip(t.children, t.children[1:]):
            if a.functional.is_zero() or b.functional.is_zero():
                continue
            if not a.functional.before(b.functional):
                return Report.failed("type1.successive", path)
        mins = tuple(c.functional.min_supp() for c in t.children
                     if not c.functional.is_zero())
        if mins and not member(mins, sch.family):
            return Report.failed("type1.admissibility",
                                 f"{path}: {len(mins)} children not {sch.family}-admissible")
        total = FinVector()
        for c in t.children:
            total = total.add(c.functional)
        if total.scale(sch.weight) != t.functional:
            return Report.failed("type1.sum-mismatch", path)
    elif t.kind == "T2":
        if len(t.coeffs) != len(t.children):
            return Report.failed("type2.arity", path)
        if any(r <= 0 for r in t.coeffs) or sum(t.coeffs) != 1:
            return Report.failed("type2.coeff-sum", path)
        parent_range = t.functional.range()
        total = FinVector()
        for r, c in zip(t.coeffs, t.children):
            if not c.functional.is_zero():
                rng = c.functional.range()
                if not (parent_range.contains(rng.lo) and parent_range.contains(rng.hi)):
                    return Report.failed("type2.range", path)
            total = total.add(c.functional.scale(r))
        if total != t.functional:
            return Report.failed("type2.sum-mismatch", path)
    else:
        return Report.failed("tree.unknown-kind", f"{path}: {t.kind}")
    for i, c in enumerate(t.children):
        rep = _verify_node(c, spec, f"{path}.{i}")
        if not rep.ok:
            return rep
    return Report.passed()


def eval_certificate(t: TreeAnalysis, x: FinVector, spec: SaturatedSpaceSpec) -> Fraction:
    """Evaluate a verified tree's root functional on x (a norm lower bound)."""
    rep = verify_tree(t, spec)
    if not rep.ok:
        raise ValueError(f"unverified tree: {rep.label} ({rep.detail})")
    return evaluate(t.functional, x)


# -- designated norm evaluators -------------------------------------------------


class NormEvaluator:
    """Bracket-aware norm access: sound lower values and sound upper bounds.

    For a mixed spec both coincide (the engine is exact for its own norm).
    For a JT model the value is cutoff-exact and the upper bound adds the
    certified tail.
    """

    def __init__(self, mixed_spec: SaturatedSpaceSpec | None = None, jt_model=None):
        if (mixed_spec is None) == (jt_model is None):
            raise ValueError("designate exactly one evaluator")
        self.mixed_spec = mixed_spec
        self.jt_model = jt_model

    def lower(self, x: FinVector) -> NormValue:
        if self.mixed_spec is not None:
            return NormValue.of(mixed_norm(x, self.mixed_spec))
        from .jt import jt_norm

        return jt_norm(x, self.jt_model).value

    def upper_square(self, x: FinVector) -> Fraction:
        if self.mixed_spec is not None:
            v = mixed_norm(x, self.mixed_spec)
            return v * v
        from .jt import jt_norm

        return jt_norm(x, self.jt_model).upper_square_bound()

    def exact(self) -> bool:
        return self.mixed_spec is not None


# -- l1^k averages and c0^k vectors ---------------------------------------------


def check_l1_average(x: FinVector, C: Fraction, k: int, parts: list[FinVector],
                     evaluator: NormEvaluator) -> Report:
    if evaluator is None:
        raise ValueError("a norm evaluator must be designated")
    if len(parts) != k:
        return Report.failed("l1avg.count", f"{len(parts)} parts, expected {k}")
    for a, b in zip(parts, parts[1:]):
        if not a.before(b):
            return Report.failed("l1avg.successive", "parts overlap")
    total = FinVector()
    for p in parts:
        total = total.add(p)
    if total.scale(Fraction(1, k)) != x:
        return Report.failed("l1avg.average", "x != (1/k) sum of parts")
    if not evaluator.lower(x) > 1:
        return Report.failed("l1avg.norm", "designated norm of x not > 1")
    C = Fraction(C)
    for i, p in enumerate(parts):
        if evaluator.upper_square(p) > C * C:
            return Report.failed("l1avg.part-norm", f"part {i + 1} exceeds C")
    scopes = () if evaluator.exact() else ("norms checked through the bracket",)
    return Report.passed(scopes)


@dataclass(frozen=True)
class CZeroClaim:
    """x* = sum of parts with each part dual-large (witnessed) and the whole
    sum in the unit ball (membership tree in the designated spec)."""

    parts: tuple[FinVector, ...]
    C: Fraction
    witnesses: tuple[FinVector, ...]
    membership_tree: TreeAnalysis
    spec: SaturatedSpaceSpec


def check_c0_vector(claim: CZeroClaim, evaluator: NormEvaluator) -> Report:
    parts = claim.parts
    for a, b in zip(parts, parts[1:]):
        if not a.before(b):
            return Report.failed("c0.successive", "parts overlap")
    if len(claim.witnesses) != len(parts):
        return Report.failed("c0.witness-count", "one witness vector per part")
    C = Fraction(claim.C)
    for i, (p, y) in enumerate(zip(parts, claim.witnesses)):
        if evaluator.upper_square(y) > 1:
            return Report.failed("c0.witness-ball", f"witness {i + 1} outside unit ball")
        if not evaluate(p, y) > 1 / C:
            return Report.failed("c0.part-lower", f"part {i + 1} not > 1/C on witness")
    total = FinVector()
    for p in parts:
        total = total.add(p)
    if claim.membership_tree.functional != total:
        return Report.failed("c0.membership", "tree functional != sum of parts")
    rep = verify_tree(claim.membership_tree, claim.spec)
    if not rep.ok:
        return Report.failed("c0.membership", f"membership tree: {rep.label}")
    return Report.passed(("dual norms certified by witnesses and membership",))


# -- rapidly increasing sequences -------------------------------------------------


@dataclass(frozen=True)
class RISWitness:
    xs: tuple[FinVector, ...]
    C: Fraction
    eps: Fraction
    j_seq: tuple[int, ...]
    pool: tuple[WeightedFunctional, ...] = ()


def check_ris(w: RISWitness, sched: ParamSchedule,
              evaluator: NormEvaluator | None = None) -> Report:
    xs = w.xs
    if not xs:
        return Report.failed("ris.empty", "no blocks")
    for a, b in zip(xs, xs[1:]):
        if not a.before(b):
            return Report.failed("ris.blocks", "blocks not successive")
    if len(w.j_seq) != len(xs) or any(b <= a for a, b in zip(w.j_seq, w.j_seq[1:])):
        return Report.failed("ris.jseq", "j sequence must align and strictly increase")
    eps = Fraction(w.eps)
    for k in range(len(xs) - 1):
        gap = Fraction(xs[k].max_supp(), sched.m_at(w.j_seq[k + 1]))
        if not gap < eps:
            return Report.failed("ris.gap-condition",
                                 f"(max supp x_{k + 1}) / m_j_{k + 2} = {gap} >= eps")
    C = Fraction(w.C)
    scopes = ["weight-decay clause checked pool-relative"]
    if evaluator is not None:
        for k, x in enumerate(xs):
            if evaluator.lower(x) > C:
                return Report.failed("ris.norm-bound", f"||x_{k + 1}|| > C")
        if not evaluator.exact():
            scopes.append("norm bounds via evaluator bracket")
    for wf in w.pool:
        rep = wf.check(sched)
        if not rep.ok:
            return Report.failed("ris.pool-cert", f"pool functional: {rep.label}")
        m_i = sched.m_at(wf.weight_index)
        for k, x in enumerate(xs):
            if wf.weight_index < w.j_seq[k]:
                if abs(evaluate(wf.func, x)) > C / m_i:
                    return Report.failed("ris.weight-decay",
                                         f"|f(x_{k + 1})| > C/m_{wf.weight_index}")
    return Report.passed(tuple(scopes))


# -- exact pairs, dependent and attracting sequences ------------------------------


@dataclass(frozen=True)
class ExactPairClaim:
    x: FinVector
    phi: FinVector
    C: Fraction
    weight_index: int  # the even index 2j with w(phi) = m_{2j}
    theta: Fraction
    phi_cert: WeightedFunctional
    decay_pool: tuple[WeightedFunctional, ...] = ()


def check_exact_pair(claim: ExactPairClaim, sched: ParamSchedule,
                     evaluator: NormEvaluator | None = None) -> Report:
    rep = claim.phi_cert.check(sched)
    if not rep.ok:
        return Report.failed("pair.weight-cert", rep.label)
    if claim.phi_cert.func != claim.phi or claim.phi_cert.weight_index != claim.weight_index:
        return Report.failed("pair.weight-cert", "certificate does not match phi")
    if evaluate(claim.phi, claim.x) != Fraction(claim.theta):
        return Report.failed("pair.theta",
                             f"phi(x) = {evaluate(claim.phi, claim.x)} != {claim.theta}")
    if claim.x.range() != claim.phi.range():
        return Report.failed("pair.range-mismatch", "ran x != ran phi")
    C = Fraction(claim.C)
    m_j = sched.m_at(claim.weight_index)
    if sup_norm(claim.x) > C / (m_j * m_j):
        return Report.failed("pair.sup-bound", "||x||_inf > C/m_j^2")
    scopes = ["norm and decay clauses pool-relative over the declared pool"]
    # 1 <= ||x||: theta >= 1 certifies it through phi itself
    if Fraction(claim.theta) >= 1:
        pass
    elif evaluator is not None and evaluator.lower(claim.x) >= 1:
        pass
    else:
        return Report.failed("pair.norm-lower", "no certificate that ||x|| >= 1")
    if evaluator is not None and evaluator.lower(claim.x) > NormValue.of(C):
        # the lower bound already exceeds C, so the true norm certainly does
        return Report.failed("pair.norm-upper", "||x|| > C")
    for wf in claim.decay_pool:
        i = wf.weight_index
        if i == claim.weight_index:
            continue
        m_i = sched.m_at(i)
        bound = 2 * C / m_i if i < claim.weight_index else C / (m_j * m_j)
        if abs(evaluate(wf.func, claim.x)) > bound:
            return Report.failed("pair.decay", f"pool functional of weight m_{i}")
    return Report.passed(tuple(scopes))


@dataclass(frozen=True)
class DependentSeqClaim:
    pairs: tuple[ExactPairClaim, ...]
    j: int  # block index: the sequence has length n_{4j-1}
    registry: CodingRegistry = field(compare=False, default=None)


def check_dependent(claim: DependentSeqClaim, sched: ParamSchedule,
                    evaluator: NormEvaluator | None = None) -> Report:
    length = sched.n_at(4 * claim.j - 1)
    if len(claim.pairs) != length:
        return Report.failed("dependent.length",
                             f"{len(claim.pairs)} pairs, expected n_{4 * claim.j - 1}")
    phis = [p.phi for p in claim.pairs]
    for a, b in zip(phis, phis[1:]):
        if not a.before(b):
            return Report.failed("dependent.successive", "functionals not successive")
    head = claim.pairs[0].weight_index
    if head % 2 or (head // 2) % 2 == 0:
        return Report.failed("dependent.head-weight", "w(x*_1) must be m_2k, k odd")
    if sched.m_at(head) <= length * length:
        return Report.failed("dependent.head-weight", "m_2k^(1/2) <= n_{4j-1}")
    for i in range(1, len(phis)):
        assigned = claim.registry.sigma(phis[:i])
        if claim.pairs[i].weight_index != assigned:
            return Report.failed("dependent.sigma-weight",
                                 f"w(x*_{i + 1}) != m_sigma(prefix)")
    for i, p in enumerate(claim.pairs):
        rep = check_exact_pair(p, sched, evaluator)
        if not rep.ok:
            return Report.failed(rep.label, f"pair {i + 1}: {rep.detail}")
    return Report.passed(("pair clauses pool-relative as inherited",))


@dataclass(frozen=True)
class AttractingSeqClaim:
    """Alternating claim: odd entries are exact pairs, even entries the
    biorthogonal pairs (e_l, e*_l); f2_norm_claims carries the supplied
    ||x_{2k-1}||_{F2} side data (not recomputed here)."""

    odd_pairs: tuple[ExactPairClaim, ...]
    even_indices: tuple[int, ...]
    j: int
    registry: CodingRegistry = field(compare=False, default=None)
    f2_norm_claims: tuple[Fraction, ...] = ()

    def x_sequence(self) -> list[FinVector]:
        out = []
        for i in range(len(self.odd_pairs) + len(self.even_indices)):
            if i % 2 == 0:
                out.append(self.odd_pairs[i // 2].x)
            else:
                out.append(FinVector.unit(self.even_indices[i // 2]))
        return out

    def phi_sequence(self) -> list[FinVector]:
        out = []
        for i in range(len(self.odd_pairs) + len(self.even_indices)):
            if i % 2 == 0:
                out.append(self.odd_pairs[i // 2].phi)
            else:
                out.append(FinVector.unit(self.even_indices[i // 2]))
        return out


def check_attracting(claim: AttractingSeqClaim, sched: ParamSchedule,
                     evaluator: NormEvaluator | None = None) -> Report:
    length = sched.n_at(4 * claim.j - 3)
    total = len(claim.odd_pairs) + len(claim.even_indices)
    if total != length or len(claim.odd_pairs) != len(claim.even_indices):
        return Report.failed("attracting.length",
                             f"{total} entries, expected n_{4 * claim.j - 3}")
    phis = claim.phi_sequence()
    for a, b in zip(phis, phis[1:]):
        if not a.before(b):
            return Report.failed("attracting.successive", "x*_k not successive")
    head = claim.odd_pairs[0].weight_index
    if head % 2 or (head // 2) % 2 == 0:
        return Report.failed("attracting.head-weight", "w(x*_1) must be m_2k, k odd")
    if sched.m_at(head) <= length * length:
        return Report.failed("attracting.head-weight", "m_2k^(1/2) <= n_{4j-3}")
    for pos in range(2, total + 1):
        prefix = phis[: pos - 1]
        assigned = claim.registry.sigma(prefix)
        if pos % 2 == 0:
            l = claim.even_indices[pos // 2 - 1]
            if not lambda_member(assigned, l, sched):
                return Report.failed("attracting.lambda-membership",
                                     f"l_{pos} = {l} not in Lambda_{assigned}")
        else:
            if claim.odd_pairs[pos // 2].weight_index != assigned:
                return Report.failed("attracting.sigma-weight",
                                     f"w(x*_{pos}) != m_sigma(prefix)")
    for i, p in enumerate(claim.odd_pairs):
        rep = check_exact_pair(p, sched, evaluator)
        if not rep.ok:
            return Report.failed(rep.label, f"odd pair {i + 1}: {rep.detail}")
    scopes = ("pair clauses pool-relative as inherited",)
    if claim.f2_norm_claims:
        scopes += ("F2-norm smallness supplied as certified side data",)
    return Report.passed(scopes)


@dataclass(frozen=True)
class AttractorVectors:
    g: FinVector
    F: FinVector
    d: FinVector
    identity_report: Report


def attractor_vectors(claim: AttractingSeqClaim, sched: ParamSchedule,
                      evaluator: NormEvaluator | None = None) -> AttractorVectors:
    """g_chi, F_chi, d_chi plus the exact biorthogonality identities."""
    rep = check_attracting(claim, sched, evaluator)
    if not rep.ok:
        raise ValueError(f"unverified attracting claim: {rep.label}")
    if any(Fraction(p.theta) != 1 for p in claim.odd_pairs):
        raise ValueError("attractor vectors need theta = 1 pairs")
    m = sched.m_at(4 * claim.j - 3)
    n = sched.n_at(4 * claim.j - 3)
    xs = claim.x_sequence()
    phis = claim.phi_sequence()
    g = FinVector()
    for l in claim.even_indices:
        g = g.add(FinVector.unit(l))
    g = g.scale(Fraction(1, m * m))
    F = FinVector()
    for p in claim.odd_pairs:
        F = F.add(p.phi)
    F = F.scale(Fraction(-1, m * m))
    d = FinVector()
    for k, x in enumerate(xs, start=1):
        d = d.add(x.scale(Fraction((-1) ** k)))
    d = d.scale(Fraction(m * m, n))
    # exact postconditions
    half = evaluate(g, d)
    if half != Fraction(1, 2):
        report = Report.failed("attractor.gd-identity", f"g(d) = {half} != 1/2")
        return AttractorVectors(g, F, d, report)
    total_phi = FinVector()
    for p in phis:
        total_phi = total_phi.add(p)
    expected = total_phi.scale(Fraction(1, m)).scale(Fraction(1, m))
    if g.sub(F) != expected:
        report = Report.failed("attractor.gf-identity",
                               "g - F != (1/m)((1/m) sum x*_k) coordinatewise")
        return AttractorVectors(g, F, d, report)
    return AttractorVectors(g, F, d, Report.passed())


def lemma52_check(vectors: AttractorVectors, phi_parts: list[tuple[FinVector, frozenset, Fraction]],
                  j: int, sched: ParamSchedule) -> Report:
    """|phi(d_chi)| < 1/m_{4j-3} for F2-form phi with j outside all ind sets.

    phi_parts: (functional, ind set, coefficient a_i), sum a_i^2 <= 1 and
    pairwise disjoint ind sets.  The F2-norm smallness of the odd blocks is
    side data carried by the claim; this check evaluates exactly.
    """
    inds = [ind for _, ind, _ in phi_parts]
    for i in range(len(inds)):
        for k in range(i + 1, len(inds)):
            if inds[i] & inds[k]:
                raise ValueError("phi parts must have disjoint ind sets")
    if any(j in ind for ind in inds):
        raise ValueError(f"hypothesis violated: {j} appears in an ind set")
    if sum((a * a for _, _, a in phi_parts), Fraction(0)) > 1:
        raise ValueError("sum of squared coefficients exceeds 1")
    phi = FinVector()
    for f, _, a in phi_parts:
        phi = phi.add(f.scale(a))
    value = abs(evaluate(phi, vectors.d))
    bound = Fraction(1, sched.m_at(4 * j - 3))
    if value < bound:
        return Report.passed(("F2 smallness of odd blocks supplied as side data",))
    return Report.failed("lemma52.bound", f"|phi(d)| = {value} >= {bound}")


# -- the basic inequality transform ------------------------------------------------


@dataclass
class _SymbolicG1:
    """g1 at a node: optional biorthogonal term plus a rational convex
    combination of auxiliary-space certificates (each a TreeAnalysis)."""

    e_index: int | None
    combo: list[tuple[Fraction, TreeAnalysis]]

    def functional(self) -> FinVector:
        total = FinVector()
        if self.e_index is not None:
            total = total.add(FinVector.unit(self.e_index))
        for r, t in self.combo:
            total = total.add(t.functional.scale(r))
        return total

    def is_zero(self) -> bool:
        return self.e_index is None and not self.combo


@dataclass(frozen=True)
class TransformResult:
    g1_e_index: int | None
    g1_components: tuple[tuple[Fraction, TreeAnalysis], ...]
    g2: FinVector
    report: Report

    def g1_functional(self) -> FinVector:
        total = FinVector()
        if self.g1_e_index is not None:
            total = total.add(FinVector.unit(self.g1_e_index))
        for r, t in self.g1_components:
            total = total.add(t.functional.scale(r))
        return total


class _HypothesisViolated(RuntimeError):
    def __init__(self, label: str, detail: str):
        super().__init__(detail)
        self.label = label
        self.detail = detail


def basic_inequality_transform(f_tree: TreeAnalysis, ris: RISWitness,
                               lambdas: list[Fraction], j0: int,
                               sched: ParamSchedule,
                               strengthened: bool = False) -> TransformResult:
    """The constructive domination |f(sum lam_k x_k)| <= C (g1+g2)(sum |lam_k| e_k).

    Follows the proof's induction literally: the node sets A_k, the index
    sets D_a, and the three cases (convex, weight m_{j0}, other weights).
    In strengthened mode the eq12 hypothesis is verified exactly at every
    weight-m_{j0} node (failing with a report otherwise) and the resulting
    g1 components contain no m_{j0}-weight node; in general mode m_{j0} is
    treated like every other weight, per the proof's remark.
    """
    xs = ris.xs
    K = len(xs)
    if len(lambdas) != K:
        raise ValueError("coefficients must align with the R.I.S. blocks")
    lambdas = [Fraction(v) for v in lambdas]
    eps = Fraction(ris.eps)
    C = Fraction(ris.C)
    n_cap = sched.n_at(j0 - 1)
    aux = aux_space_spec(j0, sched)

    if strengthened and f_tree.kind == "T1" and f_tree.scheme.weight_index == j0:
        raise ValueError("strengthened mode requires w(f) != m_{j0}")

    # ranges of the blocks, payload for the A_k conditions
    ranges = [x.range() for x in xs]

    def rng_key(iv: Interval):
        return None if iv.is_empty() else (iv.lo, iv.hi)

    def is_j0_node(t: TreeAnalysis) -> bool:
        return (strengthened and t.kind == "T1"
                and t.scheme.weight_index is not None and t.scheme.weight_index == j0)

    # A_k membership per (node path); nodes addressed by identity in a walk
    in_A: dict[tuple[int, int], bool] = {}  # (node_id, k) -> bool
    node_children: dict[int, list[TreeAnalysis]] = {}

    def mark(t: TreeAnalysis, k: int, seen_j0_above: bool, path_ok: bool):
        tid = id(t)
        node_children[tid] = list(t.children)
        r = t.functional.range().intersect(ranges[k])
        ok = (t.kind != "T2") and not r.is_empty() and not seen_j0_above and path_ok
        if ok and t.kind == "T1" and not is_j0_node(t):
            for c in t.children:
                if rng_key(c.functional.range().intersect(ranges[k])) == rng_key(r):
                    ok = False  # condition (iv): children must cut x_k's range properly
                    break
        in_A[(tid, k)] = ok
        below_j0 = seen_j0_above or is_j0_node(t)
        for c in t.children:
            child_ok = path_ok
            if t.kind == "T1":
                child_r = c.functional.range().intersect(ranges[k])
                if rng_key(child_r) != rng_key(r):
                    child_ok = False  # condition (iii) broken below this child
            mark(c, k, below_j0, child_ok)

    for k in range(K):
        mark(f_tree, k, False, True)

    D: dict[int, tuple[int, ...]] = {}

    def fill_D(t: TreeAnalysis):
        own = {k for k in range(K) if in_A[(id(t), k)]}
        for c in t.children:
            fill_D(c)
            own |= set(D[id(c)])
        D[id(t)] = tuple(sorted(own))

    fill_D(f_tree)

    g2_total: dict[int, FinVector] = {}

    def build(t: TreeAnalysis) -> tuple[_SymbolicG1, FinVector]:
        tid = id(t)
        dk = D[tid]
        if not dk:
            return _SymbolicG1(None, []), FinVector()
        if t.kind == "T0":
            exceed = [k for k in dk if abs(evaluate(t.functional, xs[k])) > eps]
            rest = [k for k in dk if k not in exceed]
            if len(exceed) > n_cap:
                raise _HypothesisViolated(
                    "basicineq.leaf-exceedance",
                    f"leaf exceeds eps on {len(exceed)} > n_(j0-1) blocks")
            leaf = TreeAnalysis.leaf(
                FinVector({k + 1: Fraction(1) for k in exceed}), aux.ground.label)
            g1 = _SymbolicG1(None, [(Fraction(1), leaf)]) if exceed else _SymbolicG1(None, [])
            g2 = FinVector({k + 1: eps for k in rest})
            return g1, g2
        if t.kind == "T2":
            combo: list[tuple[Fraction, TreeAnalysis]] = []
            e_terms: list[tuple[Fraction, int]] = []
            g2 = FinVector()
            for r, c in zip(t.coeffs, t.children):
                sub_g1, sub_g2 = build(c)
                g2 = g2.add(sub_g2.scale(r))
                for rr, comp in sub_g1.combo:
                    combo.append((r * rr, comp))
                if sub_g1.e_index is not None:
                    e_terms.append((r, sub_g1.e_index))
            # fold convex e-terms into C_{j0} leaves so the shape stays convex
            for r, e_idx in e_terms:
                combo.append((r, TreeAnalysis.leaf(FinVector.unit(e_idx),
                                                   aux.ground.label)))
            return _SymbolicG1(None, combo), g2
        # type I
        if is_j0_node(t):
            k_a = max(dk, key=lambda k: (abs(lambdas[k]), -k))
            lhs = abs(evaluate(t.functional, _combine(xs, lambdas, dk)))
            rhs = C * (max(abs(lambdas[k]) for k in dk)
                       + eps * sum(abs(lambdas[k]) for k in dk))
            if lhs > rhs:
                raise _HypothesisViolated(
                    "basicineq.eq12", f"eq12 fails at a weight-m_{j0} node")
            g1 = _SymbolicG1(k_a + 1, [])
            g2 = FinVector({k + 1: eps for k in dk})
            return g1, g2
        # case 3: type I of another weight
        w_idx = t.scheme.weight_index
        if w_idx is None:
            raise ValueError("type-I nodes need weight indices for the transform")
        m_j = sched.m_at(w_idx)
        child_results = [build(c) for c in t.children]
        own = [k for k in dk if in_A[(id(t), k)]
               and any(ranges[k].contains(p) for p in t.functional.support())]
        e2 = [k for k in own if k + 1 < K and sched.m_at(ris.j_seq[k + 1]) <= m_j]
        e1 = sorted(k for k in own if k not in e2)
        g2 = FinVector({k + 1: eps for k in e2})
        for _, sub_g2 in child_results:
            g2 = g2.add(sub_g2)
        # assemble h_a = (1/m_j)(e-terms beyond the first + children g1 pieces)
        slots: list[list[list[TreeAnalysis]]] = []
        for k in e1[1:]:
            slots.append([[TreeAnalysis.leaf(FinVector.unit(k + 1), aux.ground.label)]])
        for sub_g1, _ in child_results:
            if sub_g1.is_zero():
                continue
            variants: list[tuple[Fraction, list[TreeAnalysis]]] = []
            for r, comp in _expand_convex(sub_g1):
                pieces: list[TreeAnalysis] = []
                if sub_g1.e_index is not None and comp is not None:
                    # split the component around the biorthogonal term so the
                    # assembled family stays successive
                    left = comp.restricted(Interval(1, sub_g1.e_index - 1)) \
                        if sub_g1.e_index > 1 else None
                    right = comp.restricted(Interval(sub_g1.e_index + 1, None))
                    if left is not None and not left.functional.is_zero():
                        pieces.append(left)
                    pieces.append(TreeAnalysis.leaf(FinVector.unit(sub_g1.e_index),
                                                    aux.ground.label))
                    if not right.functional.is_zero():
                        pieces.append(right)
                elif comp is not None:
                    pieces.append(comp)
                elif sub_g1.e_index is not None:
                    pieces.append(TreeAnalysis.leaf(FinVector.unit(sub_g1.e_index),
                                                    aux.ground.label))
                variants.append((r, pieces))
            slots.append(variants)
        combo = _expand_slots(slots, m_j, aux)
        g1 = _SymbolicG1(e1[0] + 1 if e1 else None, combo)
        return g1, g2

    try:
        g1, g2 = build(f_tree)
    except _HypothesisViolated as exc:
        return TransformResult(None, (), FinVector(),
                               Report.failed(exc.label, exc.detail))

    # final exact verification
    lhs = abs(evaluate(f_tree.functional, _combine(xs, lambdas, range(K))))
    lam_abs = FinVector({k + 1: abs(lambdas[k]) for k in range(K) if lambdas[k] != 0})
    rhs = C * (evaluate(g1.functional(), lam_abs) + evaluate(g2, lam_abs))
    if lhs > rhs:
        return TransformResult(g1.e_index, tuple(g1.combo), g2,
                               Report.failed("basicineq.domination",
                                             f"lhs {lhs} > rhs {rhs}"))
    if sup_norm(g2) > eps:
        return TransformResult(g1.e_index, tuple(g1.combo), g2,
                               Report.failed("basicineq.g2-bound", "||g2||_inf > eps"))
    if any(v < 0 for _, v in g2.items()) or any(v < 0 for _, v in g1.functional().items()):
        return TransformResult(g1.e_index, tuple(g1.combo), g2,
                               Report.failed("basicineq.nonneg", "negative coordinate"))
    for r, comp in g1.combo:
        rep = verify_tree(comp, aux)
        if not rep.ok:
            return TransformResult(g1.e_index, tuple(g1.combo), g2,
                                   Report.failed("basicineq.component",
                                                 f"component not in D'_j0: {rep.label}"))
        if strengthened and j0 in comp.weights_used():
            return TransformResult(g1.e_index, tuple(g1.combo), g2,
                                   Report.failed("basicineq.strengthened-weight",
                                                 "an m_j0 weight appears in g1"))
    total = sum((r for r, _ in g1.combo), Fraction(0))
    if g1.combo and total != 1:
        return TransformResult(g1.e_index, tuple(g1.combo), g2,
                               Report.failed("basicineq.convexity",
                                             f"component weights sum to {total}"))
    return TransformResult(g1.e_index, tuple(g1.combo), g2, Report.passed())


def _combine(xs, lambdas, ks) -> FinVector:
    total = FinVector()
    for k in ks:
        if lambdas[k] != 0:
            total = total.add(xs[k].scale(lambdas[k]))
    return total


def _expand_convex(sym: _SymbolicG1):
    if sym.combo:
        return list(sym.combo)
    return [(Fraction(1), None)]


def _expand_slots(slots, m_j: int, aux: SaturatedSpaceSpec):
    """Multilinear expansion of per-slot convex variants into a convex list of
    single (A_{5n_j}, 1/m_j) operation certificates."""
    if not slots:
        return []
    scheme = next(s for s in aux.schemes if s.weight == Fraction(1, m_j))
    combos: list[tuple[Fraction, list[TreeAnalysis]]] = [(Fraction(1), [])]
    for variants in slots:
        nxt = []
        for r0, acc in combos:
            for r, pieces in variants:
                nxt.append((r0 * r, acc + list(pieces)))
        combos = nxt
        if len(combos) > 4096:
            raise ValueError("convex expansion too large for a desk-scale instance")
    out = []
    for r, pieces in combos:
        pieces = [p for p in pieces if not p.functional.is_zero()]
        pieces.sort(key=lambda p: p.functional.min_supp())
        if not pieces:
            continue
        out.append((r, TreeAnalysis.op(scheme, pieces)))
    return out


# -- exceedance counts, separation, thresholds -------------------------------------


def count_exceedances(xs: list[FinVector], pool: list[FinVector], m: int,
                      C: Fraction) -> dict:
    """Per pool functional, #{n : |y*(x_n)| >= 1/m}, with the 66 m^2 C^2 bound."""
    threshold = Fraction(1, m)
    counts = []
    for y in pool:
        counts.append(sum(1 for x in xs if abs(evaluate(y, x)) >= threshold))
    bound = 66 * m * m * Fraction(C) * Fraction(C)
    return {"counts": counts, "max_count": max(counts, default=0), "bound": bound,
            "within_bound": (max(counts, default=0) <= bound)}


def _joint_hit_capped(xa: FinVector, xb: FinVector, cap: int, threshold: Fraction) -> bool:
    """Is there one +-signed selection of <= cap indices whose signed sums on
    both vectors reach the threshold?  2d Pareto DP when the cap cannot bind,
    exhaustive walk otherwise (desk-scale supports)."""
    positions = sorted(set(xa.support()) | set(xb.support()))
    if cap < len(positions):
        return _joint_hit_exhaustive(xa, xb, cap, threshold, positions)
    frontier: set[tuple[Fraction, Fraction]] = {(Fraction(0), Fraction(0))}
    for p in positions:
        a, b = xa.coeff(p), xb.coeff(p)
        nxt = set(frontier)
        for sa, sb in frontier:
            nxt.add((sa + a, sb + b))
            nxt.add((sa - a, sb - b))
        frontier = _prune_2d(nxt)
    return any(sa >= threshold and sb >= threshold for sa, sb in frontier)


def _joint_hit_exhaustive(xa, xb, cap, threshold, positions) -> bool:
    from itertools import combinations, product

    for size in range(1, min(cap, len(positions)) + 1):
        for combo in combinations(positions, size):
            for signs in product((1, -1), repeat=size):
                sa = sum(s * xa.coeff(p) for s, p in zip(signs, combo))
                sb = sum(s * xb.coeff(p) for s, p in zip(signs, combo))
                if sa >= threshold and sb >= threshold:
                    return True
    return False


def _prune_2d(pairs):
    out = set()
    for sa, sb in pairs:
        dominated = False
        for ta, tb in pairs:
            if (ta, tb) != (sa, sb) and ta >= sa and tb >= sb:
                dominated = True
                break
        if not dominated:
            out.add((sa, sb))
    return out


def check_separated(xs: list[FinVector], fam: GroundFamily, eps: Fraction) -> Report:
    """epsilon-separation against ALL of union F_j: per-family exact argmax
    structure below the tau cutoff, vacuous beyond it."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    l1max = max((l1_norm(x) for x in xs), default=Fraction(0))
    for j in fam.family_indices():
        tau_sq = fam.tau_sq(j)
        if NormValue.sqrt_of(tau_sq * l1max * l1max) < eps:
            break  # tau decreasing: no later family reaches eps on any block
        for a in range(len(xs)):
            if fam.family_sup(j, xs[a]) < eps:
                continue
            for b in range(a + 1, len(xs)):
                if fam.family_sup(j, xs[b]) < eps:
                    continue
                if _family_joint_hit(fam, j, xs[a], xs[b], eps):
                    return Report.failed(
                        "separated.pair",
                        f"family {j} reaches eps on blocks {a + 1} and {b + 1}")
    return Report.passed()


def _family_joint_hit(fam: GroundFamily, j: int, xa: FinVector, xb: FinVector,
                      eps: Fraction) -> bool:
    from .ground import CustomFamily, F2Sec4Family, FsSec6Family

    if isinstance(fam, CustomFamily):
        return any(abs(evaluate(f, xa)) >= eps and abs(evaluate(f, xb)) >= eps
                   for f in fam.families[j])
    if isinstance(fam, F2Sec4Family):
        coeff = Fraction(1, fam._m(j) ** 2)
        return _joint_hit_capped(xa, xb, fam._cap(j), eps / coeff)
    if isinstance(fam, FsSec6Family):
        coeff = Fraction(1, fam._m(j) ** 2)
        threshold = eps / coeff
        pts = tuple(sorted(set(xa.support()) | set(xb.support())))
        from itertools import product

        for combo in iter_members(pts, fam._order(j)):
            if not combo:
                continue
            for signs in product((1, -1), repeat=len(combo)):
                sa = sum(s * xa.coeff(p) for s, p in zip(signs, combo))
                sb = sum(s * xb.coeff(p) for s, p in zip(signs, combo))
                if sa >= threshold and sb >= threshold:
                    return True
        return False
    if isinstance(fam, MRFamily):
        k = fam._k(j)
        # value = selection / sqrt(k): threshold in selection units is eps*sqrt(k),
        # exact when k is a perfect square
        root = _exact_sqrt_fraction(Fraction(k))
        if root is None:
            raise ValueError("MR separation checks need perfect-square k")
        return _joint_hit_capped(xa, xb, k, eps * root)
    raise ValueError(f"no joint-hit structure for family {fam.id}")


def aa3_threshold(x: FinVector, eps: Fraction, fam: GroundFamily,
                  norm_upper: Fraction) -> int:
    """The constructive smallness threshold: n such that any norming-set
    combination with all |a_k| < 1/n acts below eps on x.

    Recipe: delta = eps / (2 l1(x)); j0 minimal with certified tau tail
    < delta; n minimal with 1/n < eps / (2 j0 ||x||), ||x|| any certified
    upper bound for the JT-model norm.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if x.is_zero():
        return 1
    delta = eps / (2 * l1_norm(x))
    j0 = None
    for j in fam.family_indices():
        if fam.tau_tail_sum_bound(j) < delta:
            j0 = j
            break
    if j0 is None:
        raise ValueError("tau tail never certified below delta; extend the family data")
    upper = Fraction(norm_upper)
    if upper <= 0:
        raise ValueError("norm upper bound must be positive")
    # smallest n with 1/n < eps / (2 j0 upper)
    ratio = 2 * j0 * upper / eps
    n = int(ratio) + 1
    return max(n, 1)


# -- the nonseparability witness tree ----------------------------------------------


@dataclass(frozen=True)
class ArithProgression:
    """An infinite-set rule M = {start + step * t : t >= 0}."""

    start: int
    step: int

    def nth(self, t: int) -> int:
        return self.start + self.step * t


@dataclass(frozen=True)
class WitnessNode:
    word: str
    j: int
    t0: int  # first ordinal of the block inside M
    k: int   # block size = k_j

    def descriptor(self) -> str:
        return f"MRBLOCK:j={self.j}:t0={self.t0}:k={self.k}"


@dataclass(frozen=True)
class WitnessTreeResult:
    nodes: dict[str, WitnessNode]
    norm_bound: dict[str, Fraction]  # certified 1 + S_a >= ||x_a||_{F2}
    separation: Fraction             # min over nodes of 1/(1 + S_a)
    report: Report


def _lex_words(depth: int) -> list[str]:
    words = [""]
    for d in range(1, depth + 1):
        words += ["".join(w) for w in _all_words(d)]
    return sorted(words, key=_lex_key)


def _all_words(d: int):
    from itertools import product

    return ["".join(p) for p in product("01", repeat=d)]


def _lex_key(w: str):
    # prefix-first lexicographic order consistent with the tree order
    return tuple(int(c) for c in w) + (-1,)


def witness_tree(m_rule: ArithProgression, depth: int, fam: MRFamily,
                 registry: CodingRegistry, j_root: int = 3) -> WitnessTreeResult:
    """The dyadic family (x_a, f_a, j_a) with blocks drawn from M in lex order.

    x_a and f_a are uniform blocks of size k_{j_a} with coefficient
    1/sqrt(k_{j_a}); they are kept as block descriptors because sigma_F
    assignments push k_{j_a} far beyond materializable sizes.  All verified
    quantities are exact rationals (perfect-square k required).
    """
    if depth > 4:
        raise ValueError("witness trees are desk-scale: depth <= 4")
    if j_root % 2 == 0 or j_root < 2:
        raise ValueError("j_root must be an odd index >= 3 (in Xi_1)")
    words = sorted(_lex_words(depth), key=_lex_key)
    nodes: dict[str, WitnessNode] = {}
    cursor = 0
    for w in words:
        if w == "":
            j = j_root
        else:
            ancestors = [w[:i] for i in range(len(w))]
            tagged = [(nodes[anc].descriptor(), nodes[anc].j) for anc in ancestors]
            j = registry.sigma_f(tagged)
        if j > len(fam.k):
            raise ValueError(f"MR family stores only {len(fam.k)} sizes; "
                             f"node {w!r} needs k_{j}")
        k = fam.k[j - 1]
        if _exact_sqrt_fraction(Fraction(k)) is None:
            raise ValueError("witness trees need perfect-square block sizes")
        nodes[w] = WitnessNode(w, j, cursor, k)
        cursor += k

    # lex order of blocks (iii): by construction cursor only advances
    # per-node estimate chain: S_a = sum_{j != j_a} min-ratio, with tail
    norm_bound: dict[str, Fraction] = {}
    worst = Fraction(0)
    for w, node in nodes.items():
        s_a = Fraction(0)
        stored = len(fam.k)
        for j in range(1, stored + 1):
            if j == node.j:
                continue
            lo, hi = sorted((fam.k[j - 1], node.k))
            ratio = _exact_sqrt_fraction(Fraction(lo, hi))
            if ratio is None:
                raise ValueError("k ratios must be perfect squares")
            s_a += ratio
        # geometric tail beyond the stored sizes
        tail_head = _exact_sqrt_fraction(Fraction(node.k, fam.k[stored - 1]))
        if tail_head is None:
            raise ValueError("k ratios must be perfect squares")
        r = fam.ratio_bound
        s_a += tail_head / (r - 1)
        if s_a > 1:
            return WitnessTreeResult(nodes, {}, Fraction(0),
                                     Report.failed("witness.estimate-chain",
                                                   f"node {w!r}: S_a = {s_a} > 1"))
        norm_bound[w] = 1 + s_a
        worst = max(worst, s_a)

    # biorthogonality and disjointness: f_c(x_a) = overlap / sqrt(k_c k_a)
    for w, node in nodes.items():
        for w2, other in nodes.items():
            lo = max(node.t0, other.t0)
            hi = min(node.t0 + node.k, other.t0 + other.k)
            overlap = max(0, hi - lo)
            expected = node.k if w == w2 else 0
            if overlap != expected:
                return WitnessTreeResult(nodes, norm_bound, Fraction(0),
                                         Report.failed("witness.block-overlap",
                                                       f"{w!r} vs {w2!r}"))
    # f_a(x_a) = k_a / sqrt(k_a)^2 = 1 exactly; branch differences follow:
    # for leaves b != b' and a in b \ b', (g_b - g_b')(x_a) = f_a(x_a) = 1
    leaves = [w for w in nodes if len(w) == depth]
    for b in leaves:
        for b2 in leaves:
            if b2 <= b:
                continue
            chain_b = {b[:i] for i in range(len(b) + 1)}
            chain_b2 = {b2[:i] for i in range(len(b2) + 1)}
            for a in chain_b ^ chain_b2:
                diff = sum(Fraction(1) if c == a else Fraction(0) for c in chain_b) \
                    - sum(Fraction(1) if c == a else Fraction(0) for c in chain_b2)
                if abs(diff) != 1:
                    return WitnessTreeResult(nodes, norm_bound, Fraction(0),
                                             Report.failed("witness.separation-numerator",
                                                           f"{a!r} between {b!r}, {b2!r}"))
    separation = Fraction(1) / (1 + worst)
    if separation < Fraction(1, 2):
        return WitnessTreeResult(nodes, norm_bound, separation,
                                 Report.failed("witness.separation", f"{separation} < 1/2"))
    return WitnessTreeResult(nodes, norm_bound, separation, Report.passed())


# -- (D, j) exactness given a witness ----------------------------------------------


def check_dj_exact(f: FinVector, j: int, x: FinVector, fam: GroundFamily,
                   sched: ParamSchedule, engine_spec: SaturatedSpaceSpec) -> Report:
    """Def.-style (D, j) exactness for a supplied witness x, with ||.||_D
    replaced by the engine's certified lower bound (scope-flagged)."""
    if not fam.contains(j, f):
        return Report.failed("djexact.family", f"f not in F_{j}")
    if evaluate(f, x) != 1:
        return Report.failed("djexact.evaluation", "f(x) != 1")
    xr, fr = x.range(), f.range()
    if not (fr.contains(xr.lo) and fr.contains(xr.hi)):
        return Report.failed("djexact.range", "ran x not inside ran f")
    if mixed_norm(x, engine_spec) > 1000:
        return Report.failed("djexact.engine-norm", "even-closure norm exceeds 1000")
    for i in fam.family_indices():
        if i == j:
            continue
        m_i = sched.m_at(4 * i - 3)
        m_j = sched.m_at(4 * j - 3)
        bound = Fraction(1000, m_i * m_i) if i < j \
            else Fraction(1000 * m_j * m_j, m_i * m_i)
        if fam.family_sup(i, x) > bound:
            return Report.failed("djexact.family-bound", f"||x||_F{i} too large")
    return Report.passed(("||.||_D checked via the engine lower bound only",))
