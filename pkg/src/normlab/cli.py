"""Batch command-line surface with reproducible file I/O.

Everything crossing this boundary is an exact-rational string; exit codes:
0 success, 1 verification failure, 2 malformed input.  A --manifest flag
records input digests and the output digest so reruns can be compared
bit-exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction

from . import certify, coding, ground, jt, params, saturate, schreier
from .core import (FinVector, Interval, format_rational, format_vector,
                   parse_rational, parse_vector)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_MALFORMED = 2


class CliError(Exception):
    pass


def _load_schedule(path: str) -> params.ParamSchedule:
    with open(path, encoding="utf-8") as fh:
        return params.schedule_from_json(fh.read())


def _load_registry(path: str | None, sched) -> coding.CodingRegistry:
    import os

    if path and os.path.exists(path):
        return coding.CodingRegistry.load(path, sched)
    return coding.CodingRegistry(sched)


def _save_registry(reg: coding.CodingRegistry, path: str | None):
    if path:
        reg.save(path)


def _parse_interval(text: str) -> Interval:
    lo, _, hi = text.partition(":")
    return Interval(int(lo), None if hi in ("inf", "") else int(hi))


def _ground_family(args, sched=None):
    name = args.family
    if name == "f2sec4":
        return ground.F2Sec4Family(sched or _load_schedule(args.schedule))
    if name == "fssec6":
        return ground.FsSec6Family(sched or _load_schedule(args.schedule))
    if name == "mr":
        ks = [int(v) for v in args.k_seq.split(",")]
        return ground.MRFamily(ks, ratio_bound=parse_rational(args.ratio_bound))
    raise CliError(f"unknown family {name!r}")


def _spec_from_json(data: dict) -> saturate.SaturatedSpaceSpec:
    g = data["ground"]
    if isinstance(g, str):
        g = {"kind": g}
    kind = g["kind"]
    if kind == "f0":
        gr = saturate.F0Ground()
    elif kind == "cj":
        gr = saturate.CjGround(int(g["cap"]))
    elif kind in ("f2sec4", "fssec6"):
        sched = params.ParamSchedule("TOY", tuple(int(v) for v in g["m"]),
                                     tuple(int(v) for v in g["n"]))
        fam = (ground.F2Sec4Family if kind == "f2sec4" else ground.FsSec6Family)(sched)
        gr = saturate.FamilyGround(fam)
    else:
        raise CliError(f"unknown ground kind {kind!r}")
    schemes = tuple(
        saturate.OperationScheme(schreier.FamilySpec.parse(s["family"]),
                                 parse_rational(s["weight"]),
                                 s.get("weight_index"))
        for s in data["schemes"])
    return saturate.SaturatedSpaceSpec(gr, schemes, label=data.get("label", ""))


def _tree_from_json(data: dict) -> certify.TreeAnalysis:
    kind = data["type"]
    if kind == "T0":
        return certify.TreeAnalysis.leaf(parse_vector(data["functional"]),
                                         data.get("tag", ""))
    children = [_tree_from_json(c) for c in data["children"]]
    if kind == "T1":
        scheme = saturate.OperationScheme(schreier.FamilySpec.parse(data["family"]),
                                          parse_rational(data["weight"]),
                                          data.get("weight_index"))
        return certify.TreeAnalysis.op(scheme, children)
    if kind == "T2":
        return certify.TreeAnalysis.convex([parse_rational(c) for c in data["coeffs"]],
                                           children)
    raise CliError(f"unknown tree node type {kind!r}")


def _weighted_from_json(data: dict) -> coding.WeightedFunctional:
    return coding.WeightedFunctional(parse_vector(data["functional"]),
                                     int(data["weight_index"]),
                                     tuple(parse_vector(c) for c in data["children"]))


def _pair_from_json(data: dict) -> certify.ExactPairClaim:
    return certify.ExactPairClaim(
        parse_vector(data["x"]), parse_vector(data["phi"]),
        parse_rational(data["C"]), int(data["weight_index"]),
        parse_rational(data["theta"]), _weighted_from_json(data["cert"]),
        tuple(_weighted_from_json(p) for p in data.get("decay_pool", ())))


def _ris_from_json(data: dict) -> certify.RISWitness:
    return certify.RISWitness(
        tuple(parse_vector(v) for v in data["xs"]),
        parse_rational(data["C"]), parse_rational(data["eps"]),
        tuple(int(j) for j in data["j_seq"]),
        tuple(_weighted_from_json(p) for p in data.get("pool", ())))


def _emit(args, lines: list[str], payload: dict) -> str:
    if getattr(args, "json", False):
        text = json.dumps(payload, sort_keys=True, default=str)
    else:
        text = "\n".join(lines)
    print(text)
    return text


def _report_exit(report) -> int:
    return EXIT_OK if report.ok else EXIT_VERIFICATION


# -- subcommand handlers ---------------------------------------------------------


def _cmd_params(args) -> tuple[int, str]:
    if args.action == "show":
        variant = {"A": params.PAPER_A, "S": params.PAPER_S}[args.variant]
        sched = params.paper_schedule(variant, args.jmax)
        lines = [f"variant {sched.variant}"]
        for j in range(1, sched.j_max() + 1):
            lines.append(f"m_{j} = {sched.m_at(j)}")
            lines.append(f"n_{j} = {sched.n_at(j)}")
        payload = json.loads(params.schedule_to_json(sched))
        return EXIT_OK, _emit(args, lines, payload)
    sched = _load_schedule(args.schedule)
    violations = params.validate_schedule(sched)
    text = _emit(args, violations or ["ok"], {"violations": violations})
    return (EXIT_OK if not violations else EXIT_VERIFICATION), text


def _cmd_schreier(args) -> tuple[int, str]:
    spec = schreier.FamilySpec.parse(args.family)
    fs = schreier.parse_finset(args.set)
    if args.action == "member":
        got = schreier.member(fs, spec)
    elif args.action == "admissible":
        got = schreier.admissible(fs, spec)
    else:
        got = schreier.is_maximal(fs, spec)
    text = _emit(args, [str(got).lower()], {"result": got})
    return EXIT_OK, text


def _cmd_ground(args) -> tuple[int, str]:
    fam = _ground_family(args)
    x = parse_vector(args.vector)
    res = ground.ground_norm(fam, x)
    lines = [f"norm = {res.value}",
             f"family_index = {res.family_index}",
             f"witness_indices = {list(res.witness.indices)}"]
    payload = {"norm": str(res.value), "family_index": res.family_index,
               "witness_indices": list(res.witness.indices)}
    return EXIT_OK, _emit(args, lines, payload)


def _cmd_code(args) -> tuple[int, str]:
    sched = _load_schedule(args.schedule)
    reg = _load_registry(args.registry, sched)
    if args.action == "sigma":
        seq = [parse_vector(v) for v in args.seq]
        idx = reg.sigma(seq)
        _save_registry(reg, args.registry)
        return EXIT_OK, _emit(args, [f"sigma = {idx}"], {"sigma": idx})
    if args.action == "sigmaf":
        seq = [parse_vector(v) for v in args.seq]
        fam = _ground_family(args, sched)
        tags = []
        for el in seq:
            tag = coding.min_family_index(fam, el)
            if tag is None:
                raise CliError("element lies in no family")
            tags.append(tag)
        idx = reg.sigma_f(list(zip(seq, tags)))
        _save_registry(reg, args.registry)
        return EXIT_OK, _emit(args, [f"sigma_f = {idx}"], {"sigma_f": idx})
    if args.action == "lambda":
        got = coding.lambda_member(args.i, args.l, sched)
        return EXIT_OK, _emit(args, [str(got).lower()], {"member": got})
    if args.action == "build-special":
        fam = _ground_family(args, sched)
        seed_el = parse_vector(args.seed)
        seed_idx = coding.min_family_index(fam, seed_el)
        if seed_idx is None:
            raise CliError("seed lies in no family")
        sf = coding.build_sigma_f_special(reg, fam, (seed_idx, seed_el),
                                          args.length, _parse_interval(args.window))
        _save_registry(reg, args.registry)
        lines = [format_vector(f) for f in sf.chain]
        payload = {"chain": lines, "tags": list(sf.chain_tags)}
        return EXIT_OK, _emit(args, lines, payload)
    # build-attractor
    pool = coding.CanonicalWeightedPool(sched)
    seq = coding.build_attractor_sequence(reg, pool, args.j, sched,
                                          _parse_interval(args.window))
    rep = coding.validate_attractor_sequence(seq, reg, sched, args.j)
    _save_registry(reg, args.registry)
    lines = [format_vector(f) for f in seq.funcs] + [f"valid = {rep.ok}"]
    payload = {"funcs": [format_vector(f) for f in seq.funcs], "valid": rep.ok}
    return _report_exit(rep), _emit(args, lines, payload)


def _cmd_jt(args) -> tuple[int, str]:
    if args.model == "classical":
        x = jt.parse_dyadic_vector(args.vector)
        res = jt.jt_classic_norm(x)
        lines = [f"norm = {res.value}",
                 "segments = " + "; ".join(",".join(s) or "e" for s in res.segments)]
        payload = {"norm": str(res.value), "segments": [list(s) for s in res.segments]}
        return EXIT_OK, _emit(args, lines, payload)
    sched = _load_schedule(args.schedule)
    reg = _load_registry(args.registry, sched)
    fam = _ground_family(args, sched)
    kind = {"f2": jt.F2, "fs": jt.FS, "f2s": jt.F2S}[args.model]
    model = jt.JTModel(kind, fam, reg, pool=args.pool, index_cutoff=args.cutoff)
    x = parse_vector(args.vector)
    res = jt.jt_norm(x, model)
    _save_registry(reg, args.registry)
    lines = [f"norm = {res.value}",
             f"cutoff = {res.cutoff}",
             f"tail_bound = {format_rational(res.tail_bound)}",
             f"witness_size = {len(res.witness)}"]
    payload = {"norm": str(res.value), "cutoff": res.cutoff,
               "tail_bound": format_rational(res.tail_bound),
               "witness": [format_vector(c.functional) for c, _ in res.witness]}
    return EXIT_OK, _emit(args, lines, payload)


def _cmd_norm(args) -> tuple[int, str]:
    with open(args.spec, encoding="utf-8") as fh:
        spec = _spec_from_json(json.load(fh))
    x = parse_vector(args.vector)
    value, tree = saturate.mixed_norm(x, spec, want_witness=True)
    lines = [f"norm = {format_rational(value)}"]
    payload = {"norm": format_rational(value)}
    if tree is not None:
        rep = certify.verify_tree(tree, spec)
        lines.append(f"witness_verified = {rep.ok}")
        payload["witness_verified"] = rep.ok
    return EXIT_OK, _emit(args, lines, payload)


def _cmd_certify(args) -> tuple[int, str]:
    with open(args.file, encoding="utf-8") as fh:
        data = json.load(fh)
    if args.action == "tree":
        with open(args.spec, encoding="utf-8") as fh:
            spec = _spec_from_json(json.load(fh))
        tree = _tree_from_json(data)
        rep = certify.verify_tree(tree, spec)
    elif args.action == "ris":
        sched = _load_schedule(args.schedule)
        rep = certify.check_ris(_ris_from_json(data), sched)
    elif args.action == "pair":
        sched = _load_schedule(args.schedule)
        rep = certify.check_exact_pair(_pair_from_json(data), sched)
    elif args.action == "attract":
        sched = _load_schedule(args.schedule)
        reg = _load_registry(args.registry, sched)
        claim = certify.AttractingSeqClaim(
            tuple(_pair_from_json(p) for p in data["pairs"]),
            tuple(int(l) for l in data["evens"]), int(data["j"]), reg,
            tuple(parse_rational(c) for c in data.get("f2_claims", ())))
        rep = certify.check_attracting(claim, sched)
    elif args.action == "basic-ineq":
        sched = _load_schedule(args.schedule)
        tree = _tree_from_json(data["tree"])
        ris = _ris_from_json(data["ris"])
        lambdas = [parse_rational(v) for v in data["lambdas"]]
        res = certify.basic_inequality_transform(tree, ris, lambdas,
                                                 int(data["j0"]), sched,
                                                 bool(data.get("strengthened", False)))
        rep = res.report
    elif args.action == "witness-tree":
        sched = _load_schedule(args.schedule)
        reg = _load_registry(args.registry, sched)
        fam = ground.MRFamily([int(v) for v in data["k_seq"]],
                              ratio_bound=parse_rational(data.get("ratio_bound", "2")))
        res = certify.witness_tree(
            certify.ArithProgression(int(data["m_start"]), int(data["m_step"])),
            int(data["depth"]), fam, reg, j_root=int(data.get("j_root", 3)))
        _save_registry(reg, args.registry)
        rep = res.report
        lines = [f"valid = {rep.ok}", f"separation = {format_rational(res.separation)}"]
        payload = {"valid": rep.ok, "separation": format_rational(res.separation)}
        return _report_exit(rep), _emit(args, lines, payload)
    else:
        raise CliError(f"unknown certify action {args.action!r}")
    lines = [f"valid = {rep.ok}"]
    if not rep.ok:
        lines.append(f"violation = {rep.label}: {rep.detail}")
    payload = {"valid": rep.ok, "violation": rep.label, "detail": rep.detail}
    return _report_exit(rep), _emit(args, lines, payload)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _write_manifest(args, argv: list[str], output_text: str):
    path = getattr(args, "manifest", None)
    if not path:
        return
    inputs = {}
    for attr in ("schedule", "spec", "file", "registry"):
        p = getattr(args, attr, None)
        if p:
            import os

            if os.path.exists(p):
                inputs[p] = _sha256(p)
    manifest = {
        "command": argv,
        "schedule_file": getattr(args, "schedule", None),
        "registry_log": getattr(args, "registry", None),
        "input_digests": inputs,
        "output_digest": hashlib.sha256(output_text.encode()).hexdigest(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="normlab",
                                  description="exact combinatorial Banach norm laboratory")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true")
        p.add_argument("--manifest")

    p = sub.add_parser("params")
    p.add_argument("action", choices=["show", "validate"])
    p.add_argument("--variant", choices=["A", "S"], default="A")
    p.add_argument("--jmax", type=int, default=2)
    p.add_argument("--schedule")
    common(p)

    p = sub.add_parser("schreier")
    p.add_argument("action", choices=["member", "admissible", "maximal"])
    p.add_argument("--set", required=True)
    p.add_argument("--family", required=True)
    common(p)

    p = sub.add_parser("ground")
    p.add_argument("action", choices=["norm"])
    p.add_argument("--family", required=True)
    p.add_argument("--schedule")
    p.add_argument("--k-seq", dest="k_seq")
    p.add_argument("--ratio-bound", dest="ratio_bound", default="2")
    p.add_argument("--vector", required=True)
    common(p)

    p = sub.add_parser("code")
    p.add_argument("action", choices=["sigma", "sigmaf", "lambda", "build-special",
                                      "build-attractor"])
    p.add_argument("--schedule", required=True)
    p.add_argument("--registry")
    p.add_argument("--seq", nargs="*", default=[])
    p.add_argument("--family", default="f2sec4")
    p.add_argument("--k-seq", dest="k_seq")
    p.add_argument("--ratio-bound", dest="ratio_bound", default="2")
    p.add_argument("--i", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--seed")
    p.add_argument("--length", type=int, default=2)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--window", default="1:100")
    common(p)

    p = sub.add_parser("jt")
    p.add_argument("action", choices=["norm"])
    p.add_argument("--model", choices=["classical", "f2", "fs", "f2s"], required=True)
    p.add_argument("--schedule")
    p.add_argument("--registry")
    p.add_argument("--family", default="f2sec4")
    p.add_argument("--k-seq", dest="k_seq")
    p.add_argument("--ratio-bound", dest="ratio_bound", default="2")
    p.add_argument("--pool", default="")
    p.add_argument("--cutoff", type=int, default=4)
    p.add_argument("--vector", required=True)
    common(p)

    p = sub.add_parser("norm")
    p.add_argument("action", choices=["mixed"])
    p.add_argument("--spec", required=True)
    p.add_argument("--vector", required=True)
    common(p)

    p = sub.add_parser("certify")
    p.add_argument("action", choices=["tree", "ris", "pair", "attract", "basic-ineq",
                                      "witness-tree"])
    p.add_argument("--file", required=True)
    p.add_argument("--spec")
    p.add_argument("--schedule")
    p.add_argument("--registry")
    common(p)
    return top


_HANDLERS = {
    "params": _cmd_params,
    "schreier": _cmd_schreier,
    "ground": _cmd_ground,
    "code": _cmd_code,
    "jt": _cmd_jt,
    "norm": _cmd_norm,
    "certify": _cmd_certify,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_MALFORMED if exc.code else EXIT_OK
    try:
        code, text = _HANDLERS[args.command](args)
        _write_manifest(args, argv, text)
        return code
    except (CliError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
