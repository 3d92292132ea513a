"""Command line front end.

    modred translate --from feas --to ref-mol -i p.txt
    modred eval -t term.sexp --model lattice:0:2 --assign w.json
    modred oracle -i inst.json --model two --mode exhaustive
    modred check --reduction bool-ref2 -i t.sexp [--mutate]
    modred selftest [--library lib.json] [--only omega,penrose]

Machine output is one JSON document on stdout; diagnostics go to stderr.
Exit codes: 0 success / agreement, 1 semantic disagreement or failed
selftest, 2 usage, input or budget errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Callable

from . import __version__
from .coord import TermLibrary, delta_term, standard_frame
from .linalg import QQ, FieldSpec, LinalgError, Matrix, Subspace
from .oracles import (BudgetExceeded, ModelError, ModelSpec, roundtrip_check, search, _value_json)
from .reductions import (Instance, ReductionError, boolean_to_lattice_ref, feas_to_ref_cml,
                         feas_to_ref_mol, feas_to_ref_starring, lift_ref_to_height_d, ref_to_sat_cml,
                         ring_to_ol_translate, ssat_to_feas, uref_to_feas, uref_to_sat_fixed)
from .terms import (LATTICE, ORTHO, RING, STAR, Signature, TermError, UnboundVariable, UnnestedTerm,
                    evaluate, parse_equations, parse_term, parse_terms, sat_to_ssat, substitute,
                    unnest, var, variables)


class UsageError(Exception):
    pass


def _budget(args) -> int | None:
    if args.budget is not None:
        return args.budget
    env = os.environ.get("MODRED_BUDGET")
    return int(env) if env else None


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _load_library(path: str | None) -> TermLibrary:
    return TermLibrary.load(path) if path else TermLibrary.default()


# --------------------------------------------------------------------------
# input loading
# --------------------------------------------------------------------------

def _text_terms(text: str, sig: Signature) -> list:
    return parse_terms(text, sig)


def zero_circuit(T: UnnestedTerm) -> UnnestedTerm:
    """The constant-zero circuit over the same inputs (the right side of T = 0)."""
    from .terms import Term
    zero = "r0" if T.sig.is_ring else "0"
    names = set(T.inputs) | {n for n, _ in T.equations}
    out = "_zero"
    while out in names:
        out += "_"
    return UnnestedTerm(T.inputs, ((out, Term(zero)),), out, T.sig)


def load_instance(text: str, kind: str) -> Instance:
    """An Instance from JSON, or from plain s-expressions interpreted as ``kind``."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        if "kind" in obj:
            inst = Instance.from_json(obj)
            return inst
        if "equations" in obj:
            T = UnnestedTerm.from_json(obj)
            return Instance("uREF", T.sig, [T, zero_circuit(T)], QQ)
        raise UsageError("JSON input is neither an instance nor an unnested term")
    if kind == "bool":
        terms = _text_terms(text, Signature("ortholattice", bounds=False))
        return Instance("REF", Signature("ortholattice", bounds=False), terms[:1])
    if kind == "feas":
        return Instance("FEAS", RING, _text_terms(text, RING), QQ)
    if kind in ("sat", "ssat"):
        return Instance(kind.upper() if kind == "sat" else "sSAT", LATTICE, parse_equations(text, LATTICE))
    if kind in ("ref", "ref-ol"):
        sig = ORTHO if kind == "ref-ol" else LATTICE
        terms = _text_terms(text, sig)
        if len(terms) != 2:
            raise UsageError("a REF input needs two terms t and s")
        return Instance("REF", sig, terms)
    if kind in ("uref-ol", "uref-star"):
        sig = ORTHO if kind == "uref-ol" else STAR
        (t,) = _text_terms(text, sig)
        T = unnest(t, variables(t), sig)
        return Instance("uREF", sig, [T, zero_circuit(T)])
    raise UsageError(f"cannot read plain text as {kind!r}")


def _field(args, default: FieldSpec) -> FieldSpec:
    return default if args.field is None else FieldSpec(args.field)


# --------------------------------------------------------------------------
# translate
# --------------------------------------------------------------------------

def _t_bool(inst, args, lib):
    return boolean_to_lattice_ref(inst.terms[0])


def _t_lift(inst, args, lib):
    t, s = inst.terms
    return lift_ref_to_height_d(t, s, args.d or 3, _field(args, FieldSpec(2)), inst.signature)


def _t_ref_sat(inst, args, lib):
    t, s = inst.terms
    return ref_to_sat_cml(t, s, args.d or 3, _field(args, FieldSpec(2)), inst.signature)


def _t_sat_ssat(inst, args, lib):
    eqs = sat_to_ssat(inst.terms, inst.signature)
    out = Instance("sSAT", inst.signature, eqs, inst.field, inst.dim, {"reduction": "sat_to_ssat"})
    from .reductions import WitnessMap
    return out, WitnessMap(None, lambda w: {x: w[x] for x in inst.variables()}, "restrict")


def _t_ssat_feas(inst, args, lib):
    d = args.d or inst.dim
    if d is None:
        raise UsageError("--d is required")
    return ssat_to_feas(inst, d, _field(args, inst.field))


def _unnested(inst):
    if inst.kind != "uREF":
        raise UsageError("expected a uREF instance")
    return inst.terms[0]


def _t_uref_sat(inst, args, lib):
    T = _unnested(inst)
    from .reductions import dimension_bound
    return uref_to_sat_fixed(T, args.d or dimension_bound(T), lib)


def _t_uref_feas(inst, args, lib):
    return uref_to_feas(_unnested(inst), lib, args.d)


def _t_feas_mol(inst, args, lib):
    return feas_to_ref_mol(inst.terms, lib)


def _t_feas_star(inst, args, lib):
    return feas_to_ref_starring(inst.terms)


def _t_star_ol(inst, args, lib):
    return ring_to_ol_translate(_unnested(inst), lib)


def _t_feas_cml(inst, args, lib):
    return feas_to_ref_cml(inst.terms, _field(args, FieldSpec(2)), lib)


TRANSLATIONS: dict[tuple[str, str], Callable] = {
    ("bool", "ref-2"): _t_bool,
    ("ref", "ref-lift"): _t_lift,
    ("ref", "sat"): _t_ref_sat,
    ("sat", "ssat"): _t_sat_ssat,
    ("ssat", "feas"): _t_ssat_feas,
    ("uref-ol", "sat"): _t_uref_sat,
    ("uref-ol", "feas"): _t_uref_feas,
    ("feas", "ref-mol"): _t_feas_mol,
    ("feas", "ref-star"): _t_feas_star,
    ("uref-star", "uref-ol"): _t_star_ol,
    ("feas", "ref-cml"): _t_feas_cml,
}


def cmd_translate(args) -> int:
    key = (args.src, args.dst)
    if key not in TRANSLATIONS:
        pairs = ", ".join(f"{a}->{b}" for a, b in sorted(TRANSLATIONS))
        raise UsageError(f"unsupported translation {args.src}->{args.dst}; supported: {pairs}")
    inst = load_instance(_read(args.input), args.src)
    out, wm = TRANSLATIONS[key](inst, args, _load_library(args.library))
    doc = {"format": 1, "instance": out.to_json(),
           "witness_map": {"translation": f"{args.src}->{args.dst}", "forward": wm.forward is not None,
                           "backward": wm.backward is not None, "note": wm.note}}
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        _emit({"format": 1, "written": args.output, "kind": out.kind, "size": out.size()})
    else:
        _emit(doc)
    return 0


# --------------------------------------------------------------------------
# eval
# --------------------------------------------------------------------------

def parse_value(v, model: ModelSpec):
    """JSON value -> model element: 0/1, MO_n labels, basis vector lists or row lists."""
    if model.kind == "two":
        return int(v)
    if model.kind == "mo":
        return str(v)
    if isinstance(v, dict):
        return Subspace.from_json(v) if model.kind == "lattice" else Matrix.from_json(v)
    if model.kind == "lattice":
        return Subspace.span(v, model.dim, model.field)
    return Matrix.of(v, model.field)


def _sig_for(model: ModelSpec, name: str | None) -> Signature:
    if name:
        return Signature.parse(name)
    if model.kind == "endo":
        return STAR if model.field.rational else RING
    return ORTHO if (model.kind != "lattice" or model.field.rational) else LATTICE


def cmd_eval(args) -> int:
    model = ModelSpec.parse(args.model)
    lib = _load_library(args.library)
    sig = _sig_for(model, args.sig)
    text = args.term if args.term is not None else _read(args.term_file)
    macros = dict(lib.defs)
    # discriminators δ_d(x, z̄) as (@deltaD x)
    macros.update({f"delta{d}": (("x",), delta_term(d)) for d in range(1, 7)})
    t = parse_term(text.strip(), sig, macros=macros)
    env = {}
    if args.frame:
        if model.kind != "lattice":
            raise UsageError("--frame needs a subspace lattice model")
        d = args.frame
        env.update(standard_frame(d, model.dim, model.field).env())
    if args.assign:
        raw = json.loads(_read(args.assign))
        raw = raw.get("assignment", raw)
        env.update({k: parse_value(v, model) for k, v in raw.items()})
    value = evaluate(t, model.algebra(), env)
    out = {"format": 1, "model": str(model), "value": _value_json(value)}
    if isinstance(value, Subspace):
        out["rank"] = value.rank
    _emit(out)
    return 0


# --------------------------------------------------------------------------
# oracle
# --------------------------------------------------------------------------

def _default_model(inst: Instance) -> ModelSpec | None:
    if inst.kind == "FEAS":
        return None
    if inst.signature.is_ring:
        return ModelSpec("endo", field=inst.field, dim=inst.dim or 1)
    if inst.dim:
        return ModelSpec("lattice", field=inst.field, dim=inst.dim)
    return ModelSpec("two")


def cmd_oracle(args) -> int:
    text = _read(args.input)
    obj = json.loads(text)
    obj = obj.get("instance", obj)
    inst = Instance.from_json(obj)
    model = ModelSpec.parse(args.model) if args.model else _default_model(inst)
    if inst.kind == "FEAS" and args.field is not None:
        inst.field = FieldSpec(args.field)
    v = search(inst, model, args.mode, _budget(args), args.seed)
    _emit(v.to_json())
    return 0


# --------------------------------------------------------------------------
# check
# --------------------------------------------------------------------------

def mutate_gadget(inst: Instance) -> Instance:
    """Corrupt a gadget instance: identify each y_i with x_i in the left term."""
    xs, ys = inst.meta.get("x", []), inst.meta.get("y", [])
    mapping = {y: var(x) for x, y in zip(xs, ys)}
    t, s = inst.terms
    return Instance(inst.kind, inst.signature, [substitute(t, mapping), s], inst.field, inst.dim,
                    dict(inst.origin, mutated=True), dict(inst.meta))


CHECKS = {
    # name: (source kind, translation key, source model, target model)
    "bool-ref2": ("bool", ("bool", "ref-2"), "two", "two"),
    "lift": ("ref", ("ref", "ref-lift"), "two", "lattice:2:3"),
    "ssat-feas": ("ssat", ("ssat", "feas"), "lattice:2:2", None),
    "feas-mol": ("feas", ("feas", "ref-mol"), None, "lattice:0:3"),
}


def cmd_check(args) -> int:
    if args.reduction not in CHECKS:
        raise UsageError(f"unknown reduction {args.reduction!r}; known: {', '.join(sorted(CHECKS))}")
    src_kind, key, sm, tm = CHECKS[args.reduction]
    src = load_instance(_read(args.input), src_kind)
    if args.reduction == "bool-ref2":
        # the source question "is t satisfiable in 2?" as a REF instance t != 0 (no bounds: t vs t ∩ t^⊥)
        from .terms import meet, oc
        t = src.terms[0]
        x0 = var(variables(t)[0])
        source = Instance("REF", Signature("ortholattice", bounds=False), [t, meet(x0, oc(x0))])
    elif args.reduction == "ssat-feas":
        if args.d:
            sm = f"lattice:{args.field or 2}:{args.d}"
        source = src
        source.dim = source.dim or ModelSpec.parse(sm).dim
        source.field = FieldSpec(args.field or 2)
    else:
        source = src
    if src.kind == "FEAS" and args.field is not None:
        source.field = FieldSpec(args.field)
    target, wm = TRANSLATIONS[key](source if args.reduction != "bool-ref2" else src, args,
                                   _load_library(args.library))
    if args.mutate:
        if args.reduction != "bool-ref2":
            raise UsageError("--mutate is implemented for bool-ref2")
        target = mutate_gadget(target)
    smodel = ModelSpec.parse(args.source_model or sm) if (args.source_model or sm) else None
    tmodel = ModelSpec.parse(args.target_model or tm) if (args.target_model or tm) else None
    mode = args.mode
    budget = _budget(args)
    if args.reduction == "feas-mol":
        # FEAS over R cannot be decided here; check the forward transport of a known root
        from .oracles import feas_search, verify
        sv = feas_search(source.terms, QQ, "grid", budget or 20000, args.seed)
        report = {"format": 1, "source": sv.to_json(), "target": None, "backward": None,
                  "agreement": None, "forward": None}
        if sv.answer == "yes":
            report["forward"] = verify(target, tmodel, wm.forward(sv.witness))
        report["ok"] = report["forward"] is not False
    else:
        report = roundtrip_check(source, smodel, target, wm, tmodel, mode, budget, args.seed)
    report["reduction"] = args.reduction
    _emit(report)
    return 0 if report["ok"] else 1


# --------------------------------------------------------------------------
# selftest
# --------------------------------------------------------------------------

def cmd_selftest(args) -> int:
    from .selftest import run_all
    lib = _load_library(args.library)
    only = set(args.only.split(",")) if args.only else None
    results = run_all(lib, args.seed, only)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name} ({r.seconds:.2f}s / {r.limit}s)", file=sys.stderr)
    _emit({"format": 1, "groups": [r.to_json() for r in results], "ok": all(r.ok for r in results)})
    return 0 if all(r.ok for r in results) else 1


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modred", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"modred {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, search=False):
        sp.add_argument("--library", help="term library JSON (default: built-in)")
        sp.add_argument("--field", type=int, help="field characteristic (0 = Q)")
        if search:
            sp.add_argument("--mode", choices=["exhaustive", "random", "grid"], default="exhaustive")
            sp.add_argument("--budget", type=int, help="assignment budget (default $MODRED_BUDGET)")
            sp.add_argument("--seed", type=int, default=0)

    pairs = ", ".join(f"{a}->{b}" for a, b in TRANSLATIONS)
    t = sub.add_parser("translate", help="apply a reduction", epilog=f"available: {pairs}")
    t.add_argument("--from", dest="src", required=True)
    t.add_argument("--to", dest="dst", required=True)
    t.add_argument("-i", "--input", required=True)
    t.add_argument("-o", "--output")
    t.add_argument("--d", type=int, help="dimension / frame order")
    common(t)
    t.set_defaults(fn=cmd_translate)

    e = sub.add_parser("eval", help="evaluate a term in a model")
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("-t", "--term-file")
    g.add_argument("--term", help="term text")
    e.add_argument("--model", required=True, help="two | mo:N | lattice:P:D | endo:P:N")
    e.add_argument("--assign", help="JSON assignment file")
    e.add_argument("--sig", help="signature (lattice, ortholattice, ring, star-ring)")
    e.add_argument("--frame", type=int, help="bind z1.. to the standard frame of this order")
    common(e)
    e.set_defaults(fn=cmd_eval)

    o = sub.add_parser("oracle", help="search an instance for a witness")
    o.add_argument("-i", "--input", required=True)
    o.add_argument("--model")
    common(o, search=True)
    o.set_defaults(fn=cmd_oracle)

    c = sub.add_parser("check", help="round-trip a reduction")
    c.add_argument("--reduction", required=True, help=", ".join(sorted(CHECKS)))
    c.add_argument("-i", "--input", required=True)
    c.add_argument("--source-model")
    c.add_argument("--target-model")
    c.add_argument("--d", type=int)
    c.add_argument("--mutate", action="store_true", help="corrupt the target (should exit 1)")
    common(c, search=True)
    c.set_defaults(fn=cmd_check)

    s = sub.add_parser("selftest", help="run the property suite")
    s.add_argument("--library")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--only", help="comma-separated group names")
    s.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        return args.fn(args)
    except (UsageError, TermError, ReductionError, ModelError, BudgetExceeded, LinalgError,
            UnboundVariable, OSError, ValueError, KeyError) as e:
        print(f"modred: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
