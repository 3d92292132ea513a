"""The property suite behind ``modred selftest`` and the acceptance tests.

Each group is a function ``(lib, seed) -> (passed, detail)``; :func:`run_group`
adds wall-clock timing and the time limit.  Groups take the term library as a
parameter so that a corrupted library can be shown to fail them.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field as dc_field
from typing import Callable

from .coord import (Coordinates, Frame, TermLibrary, delta_term, force_commuting_selfadjoint,
                    force_ring_element, frame_classify, is_on_frame, orthogonalize,
                    standard_frame)
from .linalg import QQ, FieldSpec, Matrix, Subspace, kernel, pseudoinverse
from .models import MatrixRing, SubspaceLattice, TwoElement
from .oracles import (ModelSpec, enumerate_subspaces, feas_search, model_search, random_matrix,
                      random_on_frame, random_orthogonal, random_subspace, random_symmetric,
                      verify)
from .reductions import (Instance, boolean_to_lattice_ref, feas_to_ref_mol, feas_to_ref_starring,
                         lift_ref_to_height_d, ring_to_ol_translate, ssat_to_feas)
from .terms import (LATTICE, ORTHO, RING, STAR, Signature, Term, evaluate, join, meet,
                    node_count, oc, occurrence_counts, parse_equation, parse_term, print_term,
                    unnest, var, variables)

F2, F3, F5 = FieldSpec(2), FieldSpec(3), FieldSpec(5)


@dataclass
class GroupResult:
    name: str
    passed: bool
    seconds: float
    limit: float
    detail: dict = dc_field(default_factory=dict)

    @property
    def in_time(self) -> bool:
        return self.seconds <= self.limit

    @property
    def ok(self) -> bool:
        return self.passed and self.in_time

    def to_json(self) -> dict:
        # wall-clock time is reported on stderr only, so seed-pinned output is reproducible
        return {"name": self.name, "passed": self.passed, "limit": self.limit,
                "in_time": self.in_time, "ok": self.ok, "detail": self.detail}


def _fail(detail: dict, msg: str) -> None:
    detail.setdefault("failures", [])
    if len(detail["failures"]) < 10:
        detail["failures"].append(msg)


def _done(detail: dict) -> tuple[bool, dict]:
    return not detail.get("failures"), detail


# --------------------------------------------------------------------------
# 1. subspace lattice laws
# --------------------------------------------------------------------------

def lattice_laws(lib=None, seed: int = 0, triples: int = 300):
    rng = random.Random(seed)
    detail: dict = {"checked": 0}
    for fld in (F2, F3, F5, QQ):
        for _ in range(triples):
            d = rng.randint(1, 5)
            a, b, c = (random_subspace(d, rng, fld, 3) for _ in range(3))
            laws = {
                "comm": a + b == b + a and a & b == b & a,
                "assoc": (a + b) + c == a + (b + c) and (a & b) & c == a & (b & c),
                "absorb": a + (a & b) == a and a & (a + b) == a,
                "idem": a + a == a and a & a == a,
                "bounds": a + Subspace.zero(d, fld) == a and a & Subspace.full(d, fld) == a,
                "order": (a <= b) == (a & b == a) == (a + b == b),
                "modular": (a + (b & (a + c))) == ((a + b) & (a + c)),
                "dims": (a + b).rank + (a & b).rank == a.rank + b.rank,
            }
            if fld.rational:
                laws["ortho"] = (a.perp().perp() == a and (a & a.perp()).is_zero()
                                 and (a + b).perp() == a.perp() & b.perp())
            for k, ok in laws.items():
                if not ok:
                    _fail(detail, f"{k} fails over {fld} at {a}, {b}, {c}")
            detail["checked"] += 1
    return _done(detail)


# --------------------------------------------------------------------------
# 2. meets through the block encoding
# --------------------------------------------------------------------------

def _direct_meet(z: Subspace, u: Subspace) -> Subspace:
    """z ∩ u from the kernel of [Bz | -Bu]."""
    d, f = z.dim, z.field
    if z.is_zero() or u.is_zero():
        return Subspace.zero(d, f)
    bz, bu = z.basis, u.basis
    ker = kernel(bz.hstack(-bu))
    vecs = [(bz @ Matrix.from_columns([v[:bz.cols]], bz.cols, f)).column(0) for v in ker.rows]
    return Subspace.span(vecs, d, f)


def zassenhaus(lib=None, seed: int = 0, pairs: int = 500):
    """Meet via the block encoding: the F^d-part of Span[[z, u], [z, 0]] ∩ (0 ⊕ F^d)."""
    rng = random.Random(seed)
    detail: dict = {"checked": 0, "encodings": 0}
    cache: dict = {}
    for k in range(pairs):
        fld = (F2, F3)[k % 2]
        d = rng.randint(1, 6)
        z, u = random_subspace(d, rng, fld), random_subspace(d, rng, fld)
        direct = _direct_meet(z, u)
        from .linalg import basis_matrix
        bz, bu = basis_matrix(z, d), basis_matrix(u, d)
        zero = Matrix.zeros(d, d, fld)
        m = bz.hstack(bu).vstack(bz.hstack(zero))
        span_m = Subspace.span(m.columns(), 2 * d, fld)
        low = Subspace.span([[0] * d + [1 if i == j else 0 for j in range(d)] for i in range(d)], 2 * d, fld)
        enc = Subspace.span([r[d:] for r in (span_m & low).rows], d, fld)
        if enc != direct or enc != (z & u):
            _fail(detail, f"meet mismatch over {fld}: {z} ∩ {u}")
        # the polynomial system of y = z ∩ u is satisfied by the transported witness
        if d <= 3:
            key = (fld.char, d)
            if key not in cache:
                eq = parse_equation("(= y (^ z u))", LATTICE)
                cache[key] = ssat_to_feas([eq], d, fld)
            inst, wm = cache[key]
            if not verify(inst, None, wm.forward({"y": direct, "z": z, "u": u})):
                _fail(detail, f"block encoding unsolvable for the true meet over {fld}, d={d}")
            detail["encodings"] += 1
        detail["checked"] += 1
    return _done(detail)


# --------------------------------------------------------------------------
# 3. the coordinate ring is the matrix ring
# --------------------------------------------------------------------------

def omega_suite(lib=None, seed: int = 0, pairs: int = 100):
    lib = lib or TermLibrary.default()
    rng = random.Random(seed)
    detail: dict = {"checked": 0}
    for block in (1, 2):
        f = standard_frame(3, 3 * block, QQ, block)
        c = Coordinates(f)
        for _ in range(pairs):
            a = random_matrix(block, block, rng, QQ, 4)
            b = random_matrix(block, block, rng, QQ, 4)
            ra, rb = c.omega(a), c.omega(b)
            want = {"add": (a + b, [ra, rb]), "sub": (a - b, [ra, rb]), "mul": (a @ b, [ra, rb]),
                    "dagger": (a.T, [ra]), "pinv": (pseudoinverse(a), [ra]), "neg": (-a, [ra])}
            if a.rank() == block:
                want["inverse"] = (a.inverse(), [ra])
            for name, (m, args) in want.items():
                got = lib.evaluate(name, args, f)
                if got != c.omega(m):
                    _fail(detail, f"{name} disagrees on dim a_1 = {block}: {a}, {b}")
            detail["checked"] += 1
    return _done(detail)


# --------------------------------------------------------------------------
# 4. Penrose equations
# --------------------------------------------------------------------------

def penrose(lib=None, seed: int = 0, count: int = 200):
    rng = random.Random(seed)
    detail: dict = {"checked": 0}
    for k in range(count):
        n, m = rng.randint(1, 6), rng.randint(1, 6)
        if k % 2:
            r = rng.randint(0, min(n, m))
            a = random_matrix(n, r, rng) @ random_matrix(r, m, rng) if r else Matrix.zeros(n, m, QQ)
        else:
            a = random_matrix(n, m, rng)
        p = pseudoinverse(a)
        ok = (a @ p @ a == a and p @ a @ p == p and (a @ p).T == a @ p and (p @ a).T == p @ a)
        if not ok:
            _fail(detail, f"Penrose equations fail for {a}")
        detail["checked"] += 1
    return _done(detail)


# --------------------------------------------------------------------------
# 5. retractions
# --------------------------------------------------------------------------

def _perturbed_frame(rng: random.Random, dim: int) -> tuple:
    """Inputs beyond the ON case: orthogonal non-isometric frames, noisy frames, random tuples."""
    kind = rng.randrange(4)
    if kind == 3 and dim >= 6:
        # orthogonal block-2 frame, ε isometric on one axis only: expect a 1-dimensional a_1
        c = random_orthogonal(dim, rng).columns()
        sp = lambda *vs: Subspace.span(vs, dim, QQ)
        diff = lambda u, v, t=1: [x - t * y for x, y in zip(u, v)]
        return (sp(), sp(*c[:6]), sp(c[0], c[1]), sp(c[2], c[3]), sp(c[4], c[5]),
                sp(diff(c[0], c[2]), diff(c[1], c[3], 2)), sp(diff(c[0], c[4]), diff(c[1], c[5])))
    if kind == 0:
        q = random_orthogonal(dim, rng)
        cols = q.columns()
        s = rng.choice([2, 3, QQ("1/2")])
        sp = lambda *vs: Subspace.span(vs, dim, QQ)
        return (sp(), sp(cols[0], cols[1], cols[2]), sp(cols[0]), sp(cols[1]), sp(cols[2]),
                sp([x - s * y for x, y in zip(cols[0], cols[1])]),
                sp([x - y for x, y in zip(cols[0], cols[2])]))
    if kind in (1, 3):
        f = random_on_frame(dim, rng)
        comps = list(f.components())
        i = rng.randrange(2, 7)
        comps[i] = comps[i] + random_subspace(dim, rng, QQ, 2)
        return tuple(comps)
    return tuple(random_subspace(dim, rng, QQ, 3) for _ in range(7))


def retractions(lib=None, seed: int = 0, conforming: int = 50, random_inputs: int = 100):
    lib = lib or TermLibrary.default()
    rng = random.Random(seed)
    detail: dict = {"orthogonalize": [0, 0], "force_ring_element": [0, 0],
                    "force_commuting_selfadjoint": [0, 0], "output_kinds": {}}
    blocks = [1, 2]
    for k in range(conforming):
        block = blocks[k % 2]
        f = random_on_frame(3 * block, rng, block)
        # orthogonalize fixes ON-frames
        g = orthogonalize(f, lib)
        if g != f:
            _fail(detail, f"orthogonalize moved an ON-frame (block {block})")
        # force_ring_element fixes ring elements
        c = Coordinates(f)
        a = random_matrix(block, block, rng, QQ, 4)
        r = c.omega(a)
        if force_ring_element(r, f, lib).r != r:
            _fail(detail, "force_ring_element moved a ring element")
        # commuting self-adjoint pairs are fixed
        # self-adjoint for the frame's inner product (not just symmetric in echelon coordinates)
        h = random_matrix(block, block, rng, QQ, 3)
        s = h + c.adjoint(h)
        t = s @ s + s.scale(2)
        out = force_commuting_selfadjoint([c.omega(s), c.omega(t)], f, lib)
        if [o.r for o in out] != [c.omega(s), c.omega(t)]:
            _fail(detail, "force_commuting_selfadjoint moved a commuting self-adjoint pair")
        for key in ("orthogonalize", "force_ring_element", "force_commuting_selfadjoint"):
            detail[key][0] += 1
    kinds = detail["output_kinds"]
    for k in range(random_inputs):
        dim = (3, 6)[k % 2]
        comps = _perturbed_frame(rng, dim)
        g = orthogonalize(comps, lib)
        kind = frame_classify(g)
        kinds[kind] = kinds.get(kind, 0) + 1
        if not (kind == "trivial" or is_on_frame(g)):
            _fail(detail, f"orthogonalize output is {kind} and not ON")
        detail["orthogonalize"][1] += 1
        block = 1 if dim == 3 else 2
        f = random_on_frame(dim, rng, block)
        x = random_subspace(dim, rng, QQ, 3)
        if not force_ring_element(x, f, lib).valid():
            _fail(detail, "force_ring_element output outside R(a)")
        detail["force_ring_element"][1] += 1
        c = Coordinates(f)
        r1 = force_ring_element(random_subspace(dim, rng, QQ, 3), f, lib)
        r2 = c.omega(random_matrix(block, block, rng, QQ, 3))
        s1, s2 = force_commuting_selfadjoint([r1, r2], f, lib)
        if not (s1.valid() and s2.valid()):
            _fail(detail, "force_commuting_selfadjoint output outside R(a)")
        else:
            m1, m2 = c.omega_inv(s1.r), c.omega_inv(s2.r)
            if c.adjoint(m1) != m1 or c.adjoint(m2) != m2 or m1 @ m2 != m2 @ m1:
                _fail(detail, "force_commuting_selfadjoint output not commuting self-adjoint")
        detail["force_commuting_selfadjoint"][1] += 1
    return _done(detail)


# --------------------------------------------------------------------------
# 6. discriminator
# --------------------------------------------------------------------------

def semantic_delta(b: Subspace, f: Frame) -> Subspace:
    """Σ_i spread_i(h_i(b)), spread by perspectivities along the frame."""
    d = f.d
    acc = f.bot
    for i in range(1, d + 1):
        others = f.bot
        for j in range(1, d + 1):
            if j != i:
                others = others + f.a(j)
        h = (b + others) & f.a(i)
        spread = h
        for j in range(1, d + 1):
            if j != i:
                spread = spread + ((h + f.aij(i, j)) & f.a(j))
        acc = acc + spread
    return acc


def discriminator_group(lib=None, seed: int = 0):
    f = standard_frame(3, 3, F2)
    alg = SubspaceLattice(3, F2)
    t = delta_term(3)
    detail: dict = {"checked": 0}
    for b in enumerate_subspaces(F2, 3):
        env = f.env()
        env["x"] = b
        syn = evaluate(t, alg, env)
        sem = semantic_delta(b, f)
        want = Subspace.zero(3, F2) if b.is_zero() else Subspace.full(3, F2)
        if syn != sem or syn != want:
            _fail(detail, f"δ_3({b}) = {syn} / {sem}, expected {want}")
        detail["checked"] += 1
    if detail["checked"] != 16:
        _fail(detail, "GF(2)^3 should have 16 subspaces")
    return _done(detail)


# --------------------------------------------------------------------------
# 7. boolean gadget over all small NNF terms
# --------------------------------------------------------------------------

def nnf_classes(nvars: int = 3, max_ops: int = 6) -> tuple[dict, int]:
    """One exemplar per class of NNF terms (negations count as operations).

    Two terms are in one class when they list their variables in the same
    first-occurrence order and their positive forms t# (negated literals
    replaced by fresh variables) are the same function.  The gadget instance
    and the satisfiability of t depend only on the class.  Returns the
    exemplars (keyed by class, smallest term first) and the number of raw
    terms represented.
    """
    names = [f"x{i}" for i in range(1, nvars + 1)]
    n_in = 2 * nvars
    full = 1 << n_in

    def table(bit):
        return sum(1 << a for a in range(full) if (a >> bit) & 1)

    by_size: list[dict] = [dict() for _ in range(max_ops + 1)]
    raw = [0] * (max_ops + 1)
    best: dict = {}
    for i, n in enumerate(names):
        by_size[0][((i,), table(i))] = var(n)
        raw[0] += 1
        if max_ops >= 1:
            by_size[1][((i,), table(nvars + i))] = oc(var(n))
            raw[1] += 1
    for key, t in by_size[0].items():
        best[key] = t
    for key, t in by_size[1].items():
        best.setdefault(key, t)
    for c in range(1, max_ops + 1):
        for a in range(c):
            b = c - 1 - a
            raw[c] += 2 * raw[a] * raw[b]
            for (oa, ta), s in list(by_size[a].items()):
                for (ob, tb), u in list(by_size[b].items()):
                    order = oa + tuple(x for x in ob if x not in oa)
                    for key, t in (((order, ta | tb), join(s, u)), ((order, ta & tb), meet(s, u))):
                        if key not in best:
                            best[key] = t
                            by_size[c][key] = t
    return best, sum(raw)


def gadget_equivalence(lib=None, seed: int = 0, nvars: int = 3, max_ops: int = 6):
    classes, raw = nnf_classes(nvars, max_ops)
    detail: dict = {"terms": raw, "classes": len(classes), "satisfiable": 0}
    two = TwoElement()
    model = ModelSpec("two")
    for t in classes.values():
        xs = variables(t)
        sat = any(evaluate(t, two, dict(zip(xs, a))) == 1
                  for a in itertools.product((0, 1), repeat=len(xs)))
        inst, wm = boolean_to_lattice_ref(t)
        v = model_search(inst, model)
        detail["satisfiable"] += sat
        if (v.answer == "yes") != sat:
            _fail(detail, f"{print_term(t)}: satisfiable={sat}, gadget refutable={v.answer}")
        elif sat and not verify(inst, model, v.witness):
            _fail(detail, f"{print_term(t)}: gadget witness does not re-verify")
    return _done(detail)


# --------------------------------------------------------------------------
# 8. the height-d lift
# --------------------------------------------------------------------------

LIFT_TERMS = [
    "x1", "(^ x1 (oc x1))", "(+ x1 (oc x1))", "(oc x1)", "(^ (oc x1) (+ x1 x1))",
    "(^ x1 (^ x1 (oc x1)))", "(+ (^ x1 (oc x1)) (oc x1))", "(^ (oc x1) (oc x1))",
    "(^ (+ x1 (oc x2)) (^ x2 (oc x1)))", "(^ (+ x1 (oc x2)) x2)", "(^ (^ x1 (oc x2)) (+ x2 (oc x1)))",
    "(^ (^ x1 x2) (oc x2))", "(+ (^ x1 (oc x1)) (^ x2 (oc x2)))", "(^ x1 x2)",
    "(^ (+ x1 x2) (^ (oc x1) (oc x2)))", "(^ (oc x1) (oc x2))",
    "(^ (^ x1 x2) x3)", "(^ (+ x1 x2) (^ (oc x1) (^ (oc x2) x3)))",
    "(^ (^ x1 (oc x2)) (^ x3 (oc x3)))", "(^ (+ x1 (oc x3)) (^ x2 (oc x1)))",
]


def height_lift(lib=None, seed: int = 0, random_budget: int = 1 << 18):
    sig = Signature("ortholattice", bounds=False)
    model = ModelSpec("lattice", field=F2, dim=3)
    two = ModelSpec("two")
    detail: dict = {"instances": 0, "exhaustive": 0, "random": 0, "yes": 0}
    for text in LIFT_TERMS:
        t = parse_term(text, sig)
        eps, _ = boolean_to_lattice_ref(t)
        v2 = model_search(eps, two)
        lifted, wm = lift_ref_to_height_d(*eps.terms, 3, F2, eps.signature)
        free = [v for v in lifted.variables() if not v.startswith("_z")]
        if len(free) <= 4:
            v3 = model_search(lifted, model)
            detail["exhaustive"] += 1
            agree = v3.answer == v2.answer
            if v3.answer == "yes":
                agree = agree and verify(lifted, model, v3.witness)
                agree = agree and verify(eps, two, wm.backward(v3.witness))
        else:
            v3 = model_search(lifted, model, mode="random", budget=random_budget, seed=seed)
            detail["random"] += 1
            if v2.answer == "yes":
                agree = verify(lifted, model, wm.forward(v2.witness)) and v3.answer != "no"
            else:
                agree = v3.answer != "yes"
        detail["yes"] += v2.answer == "yes"
        if not agree:
            _fail(detail, f"{text}: two-element {v2.answer}, L(GF(2)^3) {v3.answer}")
        detail["instances"] += 1
    return _done(detail)


# --------------------------------------------------------------------------
# 9. FEAS round trips through the matrix encoding
# --------------------------------------------------------------------------

SSAT_CRAFTED = [
    "(= x 1) (= y 0) (= x y)",
    "(= u (+ x y)) (= u 1) (= v (^ x y)) (= v 0)",
    "(= x 0) (= y 0) (= u (+ x y)) (= u 1)",
    "(= v (^ x y)) (= v 1) (= x 0)",
    "(= x y) (= y z) (= z 1)",
    "(= x 0)",
    "(= x 1) (= x 0)",
    "(= u (^ x y)) (= u 0) (= v (+ x y)) (= v x) (= y 1)",
    "(= u (^ x y)) (= u x) (= v (+ x y)) (= v 1) (= y 0)",
    "(= u (^ x y)) (= u 0) (= v (+ x y)) (= v 1) (= x y)",
]


def feas_roundtrips(lib=None, seed: int = 0, budget: int = 2_000_000):
    from .terms import parse_equations
    detail: dict = {"instances": 0, "yes": 0}
    p = parse_term("(r+ (r* x x) (r+ x r1))", RING)
    v2, v3 = feas_search([p], F2), feas_search([p], F3)
    detail["x2+x+1"] = {"GF(2)": v2.answer, "GF(3)": v3.answer, "GF(3) witness": v3.witness}
    if v2.answer != "no" or v3.answer != "yes" or v3.witness != {"x": 1}:
        _fail(detail, "x^2+x+1 verdicts wrong")
    model = ModelSpec("lattice", field=F2, dim=2)
    for text in SSAT_CRAFTED:
        eqs = parse_equations(text, LATTICE)
        src = Instance("sSAT", LATTICE, eqs, F2, 2)
        lv = model_search(src, model)
        feas, wm = ssat_to_feas(src)
        mv = feas_search(feas.terms, F2, budget=budget, hints=feas.meta["primary"])
        ok = lv.answer == mv.answer and mv.answer != "unknown"
        if mv.answer == "yes":
            ok = ok and verify(feas, None, mv.witness) and verify(src, model, wm.backward(mv.witness))
        if lv.answer == "yes":
            ok = ok and verify(feas, None, wm.forward(lv.witness))
        detail["yes"] += lv.answer == "yes"
        if not ok:
            _fail(detail, f"{text}: lattice {lv.answer}, matrix {mv.answer}")
        detail["instances"] += 1
    return _done(detail)


# --------------------------------------------------------------------------
# 10. the MOL pipeline
# --------------------------------------------------------------------------

def _mol_sample(inst, dim: int, rng: random.Random) -> dict:
    """Fully random tuples, ON-frames with random x, and ON-frames with ring elements x."""
    xs = inst.meta["x"]
    fvars = inst.meta["frame_vars"]
    kind = rng.randrange(3)
    if kind == 0:
        w = {n: random_subspace(dim, rng, QQ, 3) for n in fvars}
        w.update({x: random_subspace(dim, rng, QQ, 3) for x in xs})
        return w
    block = dim // 3
    f = random_on_frame(dim, rng, block)
    env = f.env()
    w = {"_" + n: env[n] for n in ("z1", "z2", "z3", "z12", "z13")}
    if kind == 1:
        w.update({x: random_subspace(dim, rng, QQ, 3) for x in xs})
    else:
        c = Coordinates(f)
        w.update({x: c.omega(random_matrix(block, block, rng, QQ, 4)) for x in xs})
    return w


def mol_pipeline(lib=None, seed: int = 0, samples: int = 500):
    lib = lib or TermLibrary.default()
    rng = random.Random(seed)
    detail: dict = {}
    p = parse_term("(r- (r* x x) r1)", RING)
    inst, wm = feas_to_ref_mol([p], lib)
    detail["x^2-1 dag"] = inst.dag_size()
    for root in (1, -1):
        w = wm.forward({"x": QQ(root)})
        if not verify(inst, ModelSpec("lattice", field=QQ, dim=3), w):
            _fail(detail, f"x^2-1: ω({root}) does not refute p# = 0")
    q = parse_term("(r+ (r* x x) r1)", RING)
    inst, _ = feas_to_ref_mol([q], lib)
    for dim in (3, 6):
        alg = SubspaceLattice(dim, QQ)
        nonzero = 0
        for _ in range(samples):
            w = _mol_sample(inst, dim, rng)
            if not evaluate(inst.terms[0], alg, w).is_zero():
                nonzero += 1
        detail[f"x^2+1 samples in Q^{dim}"] = samples
        if nonzero:
            _fail(detail, f"x^2+1: p# nonzero on {nonzero} samples in Q^{dim}")
    return _done(detail)


# --------------------------------------------------------------------------
# 11. the *-ring scalar checks
# --------------------------------------------------------------------------

def starring_checks(lib=None, seed: int = 0, samples: int = 200):
    rng = random.Random(seed)
    detail: dict = {}
    p = parse_term("(r- (r* x x) r1)", RING)
    inst, wm = feas_to_ref_starring(p)
    val = evaluate(inst.terms[0], MatrixRing(1, QQ), {"x": Matrix.of([[1]]), "_y1": Matrix.of([[1]])})
    detail["x^2-1 at (1,1)"] = str(val)
    if val != Matrix.identity(1, QQ):
        _fail(detail, "p°(1, 1) != 1 for x^2 - 1")
    q = parse_term("(r+ (r* x x) r1)", RING)
    inst, _ = feas_to_ref_starring(q)
    bad = 0
    for _ in range(samples):
        n = rng.randint(1, 4)
        ring = MatrixRing(n, QQ)
        w = {"x": random_symmetric(n, rng, 3), "_y1": random_symmetric(n, rng, 3)}
        if not evaluate(inst.terms[0], ring, w).is_zero():
            bad += 1
    detail["x^2+1 samples"] = samples
    if bad:
        _fail(detail, f"p° nonzero on {bad} symmetric samples for x^2 + 1")
    return _done(detail)


# --------------------------------------------------------------------------
# 12. τ round trips
# --------------------------------------------------------------------------

TAU_CASES = [
    ("(r- (r* x y) (r* y x))", {"x": [[1, 2], [0, 1]], "y": [[0, 1], [1, 0]]}),
    ("(r- (r* x (adj x)) (r* (adj x) x))", {"x": [[1, 1], [0, 1]]}),
    ("(r- (r* (pinv x) x) r1)", {"x": [[0]]}),
]


def tau_roundtrip(lib=None, seed: int = 0):
    lib = lib or TermLibrary.default()
    detail: dict = {"cases": 0, "sizes": []}
    for text, wit in TAU_CASES:
        t = parse_term(text, STAR)
        T = unnest(t, variables(t), STAR)
        k = len(next(iter(wit.values())))
        w = {n: Matrix.of(m) for n, m in wit.items()}
        ring = MatrixRing(k, QQ)
        if T.evaluate(ring, w).is_zero():
            _fail(detail, f"{text}: source witness does not refute")
            continue
        inst, wm = ring_to_ol_translate(T, lib)
        if not verify(inst, ModelSpec("lattice", field=QQ, dim=3 * k), wm.forward(w)):
            _fail(detail, f"{text}: transported witness does not refute τ(T) = a_1")
        detail["cases"] += 1
    # linear size: chains x1 x2 ... xn
    sizes = []
    for n in range(1, 9):
        t = var("x1")
        for i in range(2, n + 2):
            t = Term("r*", (t, var(f"x{i}")))
        T = unnest(t, variables(t), STAR)
        inst, _ = ring_to_ol_translate(T, lib)
        sizes.append((len(T.equations), len(inst.terms[0].equations)))
    detail["sizes"] = sizes
    steps = {b2 - b1 for (a1, b1), (a2, b2) in zip(sizes, sizes[1:])}
    if len(steps) != 1:
        _fail(detail, f"τ output size is not linear in the equation count: {sizes}")
    return _done(detail)


# --------------------------------------------------------------------------
# 13. unnesting
# --------------------------------------------------------------------------

def random_term(sig: Signature, names, depth: int, rng: random.Random) -> Term:
    ar = sig.arities
    ops = sorted(ar)
    consts = list(sig.constants) if sig.bounds else []
    if depth == 0 or rng.random() < 0.2:
        if consts and rng.random() < 0.15:
            return Term(rng.choice(consts))
        return var(rng.choice(names))
    o = rng.choice(ops)
    return Term(o, tuple(random_term(sig, names, depth - 1, rng) for _ in range(ar[o])))


def _unnest_models(rng):
    return [
        (LATTICE, SubspaceLattice(3, F3), lambda: random_subspace(3, rng, F3)),
        (ORTHO, SubspaceLattice(3, QQ), lambda: random_subspace(3, rng, QQ, 3)),
        (RING, MatrixRing(2, F5), lambda: random_matrix(2, 2, rng, F5)),
        (STAR, MatrixRing(2, QQ), lambda: random_matrix(2, 2, rng, QQ, 3)),
    ]


def unnesting(lib=None, seed: int = 0, pairs: int = 200):
    rng = random.Random(seed)
    detail: dict = {"checked": 0}
    for sig, alg, sample in _unnest_models(rng):
        for _ in range(pairs):
            t = random_term(sig, ["x", "y", "z"], rng.randint(1, 5), rng)
            xs = variables(t)
            env = {x: sample() for x in xs}
            u = unnest(t, xs, sig)
            shared = unnest(t, xs, sig, share=True)
            ops = node_count(t) - sum(occurrence_counts(t).values())
            if u.evaluate(alg, env) != evaluate(t, alg, env) or shared.evaluate(alg, env) != evaluate(t, alg, env):
                _fail(detail, f"{sig}: evaluation differs for {print_term(t)}")
            if len(u.equations) > ops:
                _fail(detail, f"{sig}: {len(u.equations)} equations for {ops} operation nodes")
            if u.occurrence_counts() != occurrence_counts(t):
                _fail(detail, f"{sig}: occurrence counts changed for {print_term(t)}")
            detail["checked"] += 1
    return _done(detail)


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

GROUPS: list[tuple[str, Callable, float]] = [
    ("lattice_laws", lattice_laws, 10),
    ("zassenhaus", zassenhaus, 30),
    ("omega", omega_suite, 60),
    ("penrose", penrose, 10),
    ("retractions", retractions, 60),
    ("discriminator", discriminator_group, 1),
    ("gadget", gadget_equivalence, 60),
    ("height_lift", height_lift, 300),
    ("feas_roundtrips", feas_roundtrips, 300),
    ("mol_pipeline", mol_pipeline, 300),
    ("starring", starring_checks, 60),
    ("tau", tau_roundtrip, 60),
    ("unnesting", unnesting, 10),
]


def run_group(name: str, lib: TermLibrary | None = None, seed: int = 0) -> GroupResult:
    for n, fn, limit in GROUPS:
        if n == name:
            start = time.perf_counter()
            try:
                passed, detail = fn(lib, seed)
            except Exception as e:  # a crashing group is a failing group
                passed, detail = False, {"error": f"{type(e).__name__}: {e}"}
            return GroupResult(name, passed, time.perf_counter() - start, limit, detail)
    raise KeyError(name)


def run_all(lib: TermLibrary | None = None, seed: int = 0, only=None) -> list[GroupResult]:
    names = [n for n, _, _ in GROUPS if not only or n in only]
    return [run_group(n, lib, seed) for n in names]
