"""The polynomial-time translations between REF, SAT, sSAT, uREF and FEAS.

Every reduction returns ``(Instance, WitnessMap)``.  The witness map turns a
witness for the source instance into one for the target (``forward``) and,
where the construction allows it, back again (``backward``).  Witnesses are
plain dicts from variable names to values: 0/1 for the two-element lattice,
:class:`Subspace` objects for L(F^d), :class:`Matrix` objects for End(F^n)
and field scalars for FEAS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping, Sequence

from .coord import (FRAME3, Coordinates, Frame, TermLibrary, commuting_selfadjoint_terms,
                    delta_term, force_ring_element_term, frame_axioms, frame_var_names,
                    is_ring_element, orthogonalize_terms, ring_term_to_lattice_term,
                    standard_frame)
from .linalg import (QQ, FieldSpec, Matrix, Subspace, basis_matrix, rref_rows)
from .models import MatrixRing, SubspaceLattice
from .poly import Poly, sum_of_squares
from .terms import (LATTICE, ONE, ORTHO, R0, R1, RING, STAR, ZERO, Equation, FreshNames,
                    Signature, Term, UnnestedTerm, adj, check_signature,
                    conj_to_single_ol, evaluate, fold, is_basic, join, meet, node_count, oc,
                    occurrences, parse_equation, parse_term, pinv, postorder, print_term,
                    radd, rmul, rsub, sat_to_ssat, substitute, unnest, var, variables)

KINDS = ("FEAS", "REF", "uREF", "SAT", "sSAT")
PRINT_LIMIT = 20000


class ReductionError(ValueError):
    pass


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------

@dataclass
class Instance:
    """A decision problem payload.

    REF: ``terms = [t, s]`` (is there an assignment with t != s?);
    uREF: ``terms = [T, S]`` as :class:`UnnestedTerm`;
    SAT / sSAT: ``terms`` is a list of :class:`Equation`;
    FEAS: ``terms`` is a list of ring terms (common zero over ``field``?).
    ``meta["frame"]`` (optional) restricts the named variables to range over frames.
    """

    kind: str
    signature: Signature
    terms: list
    field: FieldSpec = QQ
    dim: int | None = None
    origin: dict = dc_field(default_factory=dict)
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ReductionError(f"unknown instance kind {self.kind!r}")

    def variables(self) -> list[str]:
        names: dict = {}
        for t in self.terms:
            if isinstance(t, Equation):
                for side in (t.left, t.right):
                    names.update(dict.fromkeys(variables(side)))
            elif isinstance(t, UnnestedTerm):
                names.update(dict.fromkeys(t.inputs))
            else:
                names.update(dict.fromkeys(variables(t)))
        return sorted(names)

    def size(self) -> int:
        total = 0
        for t in self.terms:
            if isinstance(t, Equation):
                total += node_count(t.left) + node_count(t.right)
            elif isinstance(t, UnnestedTerm):
                total += t.size()
            else:
                total += node_count(t)
        return total

    def dag_size(self) -> int:
        """Distinct nodes; the honest size measure for shared generated terms."""
        seen = set()
        total = 0
        for t in self.terms:
            roots = [t.left, t.right] if isinstance(t, Equation) else (
                [r for _, r in t.equations] if isinstance(t, UnnestedTerm) else [t])
            for r in roots:
                for n in postorder(r):
                    if id(n) not in seen:
                        seen.add(id(n))
                        total += 1
        return total

    # JSON ------------------------------------------------------------
    def to_json(self) -> dict:
        out = {"format": 1, "kind": self.kind, "signature": str(self.signature),
               "field": self.field.to_json(), "dim": self.dim, "origin": self.origin}
        if self.kind == "uREF":
            out["terms"] = None
            out["circuits"] = [t.to_json() for t in self.terms]
        elif self.kind in ("SAT", "sSAT"):
            out["terms"] = [str(e) for e in self.terms]
        else:
            if all(node_count(t) <= PRINT_LIMIT for t in self.terms):
                out["terms"] = [print_term(t) for t in self.terms]
            else:
                out["terms"] = None
                out["circuits"] = [unnest(t, sorted(variables(t)), self.signature, share=True).to_json()
                                   for t in self.terms]
        if self.meta:
            out["meta"] = self.meta
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        kind = obj["kind"]
        sig = Signature.parse(obj.get("signature", "lattice"))
        fieldspec = FieldSpec.from_json(obj.get("field", {"char": 0}))
        if obj.get("terms") is None and "circuits" in obj:
            circuits = [UnnestedTerm.from_json(c) for c in obj["circuits"]]
            terms = circuits if kind == "uREF" else [c.to_term() for c in circuits]
        elif kind in ("SAT", "sSAT"):
            terms = [parse_equation(s, sig) for s in obj["terms"]]
        else:
            terms = [parse_term(s, sig) for s in obj["terms"]]
        return cls(kind, sig, terms, fieldspec, obj.get("dim"), obj.get("origin", {}), obj.get("meta", {}))

    @classmethod
    def loads(cls, text: str) -> "Instance":
        return cls.from_json(json.loads(text))


@dataclass
class WitnessMap:
    forward: Callable | None = None
    backward: Callable | None = None
    note: str = ""


def _frame_vars(d: int = 3, bounds: bool = True) -> dict[str, Term]:
    return {n: var("_" + n) for n in frame_var_names(d, bounds)}


def frame_witness(f: Frame, prefix: str = "_") -> dict:
    return {prefix + n: v for n, v in f.env().items()}


def frame_meta(d: int, names: Mapping[str, Term], field: FieldSpec | None = None) -> dict:
    return {"d": d, "vars": {n: t.name for n, t in names.items()}}


# --------------------------------------------------------------------------
# boolean gadget
# --------------------------------------------------------------------------

def to_nnf(t: Term) -> Term:
    """Push orthocomplements to the variables (De Morgan, double negation)."""
    def go(n: Term, neg: bool) -> Term:
        # explicit stack would obscure this; boolean inputs are tiny
        if n.op == "var":
            return oc(n) if neg else n
        if n.op == "oc":
            return go(n.args[0], not neg)
        if n.op in ("+", "^"):
            o = n.op if not neg else ("^" if n.op == "+" else "+")
            return Term(o, (go(n.args[0], neg), go(n.args[1], neg)))
        raise ReductionError(f"boolean terms may not contain {n.op!r}")
    return go(t, False)


def is_nnf(t: Term) -> bool:
    for n in postorder(t):
        if n.op == "oc" and n.args[0].op != "var":
            return False
        if n.op not in ("var", "oc", "+", "^"):
            return False
    return True


def lambda_term(xs: Sequence[Term], ys: Sequence[Term], z: Term) -> Term:
    """λ_0 = z, λ_{i+1} = λ_i ∩ (x_i + y_i) + x_i ∩ y_i."""
    acc = z
    for x, y in zip(xs, ys):
        acc = join(meet(acc, join(x, y)), meet(x, y))
    return acc


def boolean_to_lattice_ref(t: Term, strict: bool = False) -> tuple[Instance, WitnessMap]:
    """ε: λ_n(x̄, ȳ, t#) = λ_n(x̄, ȳ, x_1 ∩ y_1); refutable in 2 iff t is satisfiable."""
    check_signature(t, Signature("ortholattice", bounds=False))
    if strict and not is_nnf(t):
        raise ReductionError("term is not in negation normal form")
    nnf = to_nnf(t)
    xs = variables(nnf)
    ys = [f"_y{i}" for i in range(1, len(xs) + 1)]
    neg = dict(zip(xs, ys))

    def leaf(n):
        return n

    def node(n, cs):
        if n.op == "oc":
            return var(neg[n.args[0].name])
        return Term(n.op, tuple(cs))

    sharp = fold(nnf, leaf, node)
    xv, yv = [var(x) for x in xs], [var(y) for y in ys]
    left = lambda_term(xv, yv, sharp)
    right = lambda_term(xv, yv, meet(xv[0], yv[0]))
    inst = Instance("REF", Signature("lattice", bounds=False), [left, right], QQ, None,
                    {"reduction": "boolean_to_lattice_ref", "source": print_term(t)},
                    {"x": xs, "y": ys, "model": "two-element", "sharp": print_term(sharp)})

    def forward(w):
        out = {x: int(w[x]) for x in xs}
        out.update({y: 1 - int(w[x]) for x, y in neg.items()})
        return out

    def backward(w):
        return {x: int(w[x]) for x in xs}

    return inst, WitnessMap(forward, backward, "b_i = a_i^⊥; back: restrict to x̄")


# --------------------------------------------------------------------------
# height-d lift and REF -> SAT
# --------------------------------------------------------------------------

def lift_ref_to_height_d(t: Term, s: Term, d: int, field: FieldSpec = FieldSpec(2),
                         sig: Signature = LATTICE) -> tuple[Instance, WitnessMap]:
    """t'(x̄, z̄) = t(x̄') with x_i' = δ_d(z_bot + z_top ∩ x_i, z̄), likewise s'."""
    z = _frame_vars(d)
    xs = sorted(set(variables(t)) | set(variables(s)))
    prime = {x: delta_term(d, join(z["zb"], meet(z["zt"], var(x))), z) for x in xs}
    tp, sp = substitute(t, prime), substitute(s, prime)
    inst = Instance("REF", sig, [tp, sp], field, d,
                    {"reduction": "lift_ref_to_height_d", "source": [print_term(t), print_term(s)]},
                    {"x": xs, "frame": frame_meta(d, z)})

    def forward(w):
        out = {x: Subspace.full(d, field) if int(w[x]) else Subspace.zero(d, field) for x in xs}
        out.update(frame_witness(standard_frame(d, d, field)))
        return out

    def backward(w):
        alg = SubspaceLattice(d, field)
        out = {}
        for x in xs:
            v = evaluate(prime[x], alg, w)
            if v.is_zero():
                out[x] = 0
            elif v.is_full():
                out[x] = 1
            else:
                raise ReductionError("lifted variable is not a bound; frame not spanning")
        return out

    return inst, WitnessMap(forward, backward, "spanning standard frame; back: evaluate x_i'")


def frame_equations(d: int, z: Mapping[str, Term]) -> list[Equation]:
    """The d-frame axioms as lattice equations over the frame variables ``z``."""
    eqs = []
    zi = [z[f"z{i}"] for i in range(1, d + 1)]
    eqs.append(Equation(z["zt"], join(*zi)))
    for k in range(1, d):
        eqs.append(Equation(meet(join(*zi[:k]), zi[k]), z["zb"]))
    for c in zi:
        eqs.append(Equation(join(z["zb"], c), c))
    for j in range(2, d + 1):
        c = z[f"z1{j}"]
        aj = zi[j - 1]
        span = join(zi[0], aj)
        eqs.append(Equation(join(z["zb"], c), c))
        eqs.append(Equation(join(zi[0], c), span))
        eqs.append(Equation(meet(zi[0], c), z["zb"]))
        eqs.append(Equation(join(aj, c), span))
        eqs.append(Equation(meet(aj, c), z["zb"]))
    return eqs


def _le(a: Term, b: Term) -> Equation:
    return Equation(join(a, b), b)


def ref_to_sat_cml(t: Term, s: Term, d: int, field: FieldSpec = FieldSpec(2),
                   sig: Signature = LATTICE) -> tuple[Instance, WitnessMap]:
    """ψ = φ(z̄) ∧ z_1 ≤ s ∧ z_1 ∩ t = z_bot ∧ ⋀ z_bot ≤ x_i ≤ z_top (after t := t∩s, s := t+s)."""
    z = _frame_vars(d)
    t2, s2 = meet(t, s), join(t, s)
    xs = sorted(set(variables(t)) | set(variables(s)))
    eqs = frame_equations(d, z)
    eqs.append(_le(z["z1"], s2))
    eqs.append(Equation(meet(z["z1"], t2), z["zb"]))
    for x in xs:
        eqs.append(_le(z["zb"], var(x)))
        eqs.append(_le(var(x), z["zt"]))
    inst = Instance("SAT", sig, eqs, field, d,
                    {"reduction": "ref_to_sat_cml", "source": [print_term(t), print_term(s)]},
                    {"x": xs, "frame_vars": [v.name for v in z.values()]})

    def forward(w):
        alg = SubspaceLattice(d, field)
        env = {x: w[x] for x in xs}
        tv, sv = evaluate(t2, alg, env), evaluate(s2, alg, env)
        v = next((r for r in sv.rows if not tv.contains(r)), None)
        if v is None:
            raise ReductionError("source witness does not refute t = s")
        basis = [list(v)]
        for i in range(d):
            e = [0] * d
            e[i] = 1
            cand = Subspace.span(basis + [e], d, field)
            if cand.rank > len(basis):
                basis.append(e)
        mat = Matrix.from_columns(basis, d, field)
        from .coord import frame_from_basis
        out = dict(env)
        out.update(frame_witness(frame_from_basis(mat, d)))
        return out

    def backward(w):
        return {x: w[x] for x in xs}

    return inst, WitnessMap(forward, backward, "atom below s, outside t, extended to a frame")


# --------------------------------------------------------------------------
# sSAT -> FEAS by matrix encodings
# --------------------------------------------------------------------------

def decompose_atoms(eqs: Sequence[Equation]) -> list[tuple]:
    """Basic equations as atoms x≤y, x≤0, 1≤x, x≤y+z, y=z∩u, y=z^⊥."""
    atoms = []
    for e in eqs:
        if not is_basic(e):
            raise ReductionError(f"{e} is not a basic equation; apply sat_to_ssat first")
        x, r = e.left.name, e.right
        if r.op == "var":
            atoms += [("le", x, r.name), ("le", r.name, x)]
        elif r.op == "0":
            atoms.append(("le0", x))
        elif r.op == "1":
            atoms.append(("ge1", x))
        elif r.op == "+":
            y, z = r.args[0].name, r.args[1].name
            atoms += [("le", y, x), ("le", z, x), ("lejoin", x, y, z)]
        elif r.op == "^":
            atoms.append(("meet", x, r.args[0].name, r.args[1].name))
        elif r.op == "oc":
            atoms.append(("perp", x, r.args[0].name))
        else:
            raise ReductionError(f"no matrix encoding for {r.op!r}")
    return atoms


class _PM:
    """A matrix of polynomials."""

    def __init__(self, rows):
        self.rows = rows

    @classmethod
    def named(cls, prefix: str, n: int, m: int):
        return cls([[Poly.var(f"{prefix}r{i + 1}c{j + 1}") for j in range(m)] for i in range(n)])

    @classmethod
    def const(cls, mat):
        return cls([[Poly.const(int(v)) for v in row] for row in mat])

    @classmethod
    def zeros(cls, n, m):
        return cls([[Poly() for _ in range(m)] for _ in range(n)])

    @classmethod
    def eye(cls, n):
        return cls([[Poly.const(1 if i == j else 0) for j in range(n)] for i in range(n)])

    def __matmul__(self, o):
        n, k, m = len(self.rows), len(o.rows), len(o.rows[0])
        out = []
        for i in range(n):
            row = []
            for j in range(m):
                acc = Poly()
                for l in range(k):
                    acc = acc + self.rows[i][l] * o.rows[l][j]
                row.append(acc)
            out.append(row)
        return _PM(out)

    def __add__(self, o):
        return _PM([[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, o.rows)])

    def __sub__(self, o):
        return _PM([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, o.rows)])

    def T(self):
        return _PM([list(c) for c in zip(*self.rows)])

    @staticmethod
    def block(a, b, c, dd):
        top = [ra + rb for ra, rb in zip(a.rows, b.rows)]
        bot = [rc + rd for rc, rd in zip(c.rows, dd.rows)]
        return _PM(top + bot)

    def entries(self):
        return [p for r in self.rows for p in r]


def _mat_env(prefix: str, m: Matrix) -> dict:
    return {f"{prefix}r{i + 1}c{j + 1}": m.entries[i][j] for i in range(m.rows) for j in range(m.cols)}


def ssat_to_feas(eqs: Sequence[Equation] | Instance, d: int | None = None,
                 field: FieldSpec | None = None, ortho: bool = False) -> tuple[Instance, WitnessMap]:
    """Matrix encoding of a conjunction of basic equations over L(F^d) (bounds are constants)."""
    if isinstance(eqs, Instance):
        d = eqs.dim if d is None else d
        field = eqs.field if field is None else field
        eqs = eqs.terms
    field = field or QQ
    if d is None:
        raise ReductionError("ssat_to_feas needs the dimension d")
    atoms = decompose_atoms(eqs)
    if any(a[0] == "perp" for a in atoms):
        ortho = True
    if ortho and not field.rational:
        raise ReductionError("orthocomplement encoding needs characteristic 0")
    lvars = sorted({v for a in atoms for v in a[1:]} |
                   {v for e in eqs for s in (e.left, e.right) for v in variables(s)})
    index = {v: k for k, v in enumerate(lvars, 1)}
    hat = {v: _PM.named(f"m{index[v]}", d, d) for v in lvars}
    polys: list[Poly] = []
    plan = []  # per atom: aux matrix names
    counter = [0]

    def aux(n, m):
        counter[0] += 1
        name = f"a{counter[0]}"
        return name, _PM.named(name, n, m)

    I, O = _PM.eye(d), _PM.zeros(d, d)
    for atom in atoms:
        kind = atom[0]
        if kind == "le":
            x, y = atom[1:]
            nu, U = aux(d, d)
            polys += (hat[x] - hat[y] @ U).entries()
            plan.append((atom, [nu]))
        elif kind == "le0":
            polys += hat[atom[1]].entries()
            plan.append((atom, []))
        elif kind == "ge1":
            nu, U = aux(d, d)
            polys += (I - hat[atom[1]] @ U).entries()
            plan.append((atom, [nu]))
        elif kind == "lejoin":
            x, y, z = atom[1:]
            n1, U1 = aux(d, d)
            n2, U2 = aux(d, d)
            polys += (hat[x] - hat[y] @ U1 - hat[z] @ U2).entries()
            plan.append((atom, [n1, n2]))
        elif kind == "meet":
            y, z, u = atom[1:]
            nx, X = aux(2 * d, 2 * d)
            ny, Y = aux(2 * d, 2 * d)
            nz, Z = aux(d, d)
            nuu, U = aux(d, d)
            M = _PM.block(hat[z], hat[u], hat[z], O)
            N = _PM.block(Z, O, U, hat[y])
            polys += (M @ X - N).entries()
            polys += (N @ Y - M).entries()
            plan.append((atom, [nx, ny, nz, nuu]))
        elif kind == "perp":
            y, z = atom[1:]
            polys += (hat[z].T() @ hat[y]).entries()
            ny, Y = aux(d, d)
            nz, Z = aux(d, d)
            polys += (hat[y] @ Y + hat[z] @ Z - I).entries()
            plan.append((atom, [ny, nz]))
    polys = [p.reduce(field.char) for p in polys]
    polys = [p for p in polys if not p.is_zero()]
    primary = [f"m{index[v]}r{i}c{j}" for v in lvars for i in range(1, d + 1) for j in range(1, d + 1)]
    inst = Instance("FEAS", RING, [p.to_term() for p in polys], field, None,
                    {"reduction": "ssat_to_feas", "ortho": ortho},
                    {"lattice_dim": d, "var_map": {v: f"m{index[v]}" for v in lvars},
                     "primary": primary, "atoms": [list(a) + [b] for a, b in plan]})

    def forward(w):
        mats = {v: basis_matrix(w[v], d) for v in lvars}
        env = {}
        for v in lvars:
            env.update(_mat_env(f"m{index[v]}", mats[v]))
        Id = Matrix.identity(d, field)
        Zd = Matrix.zeros(d, d, field)
        for atom, names in plan:
            kind = atom[0]
            if kind == "le":
                U = mats[atom[2]].solve(mats[atom[1]])
                sols = [U]
            elif kind == "le0":
                sols = []
            elif kind == "ge1":
                sols = [mats[atom[1]].solve(Id)]
            elif kind == "lejoin":
                x, y, z = atom[1:]
                sol = mats[y].hstack(mats[z]).solve(mats[x])
                sols = None if sol is None else [sol.block(0, d, 0, d), sol.block(d, 2 * d, 0, d)]
            elif kind == "meet":
                y, z, u = atom[1:]
                M = mats[z].hstack(mats[u]).vstack(mats[z].hstack(Zd))
                red, piv = rref_rows([list(c) for c in M.columns()], field)
                tops = [r for r, c in zip(red, piv) if c < d]
                cols = tops + [[field(0)] * (2 * d)] * (d - len(tops))
                ZU = Matrix.from_columns(cols, 2 * d, field)
                N = ZU.block(0, d, 0, d).hstack(Zd).vstack(ZU.block(d, 2 * d, 0, d).hstack(mats[y]))
                X, Y = M.solve(N), N.solve(M)
                sols = None if X is None or Y is None else [X, Y, ZU.block(0, d, 0, d), ZU.block(d, 2 * d, 0, d)]
            else:  # perp
                y, z = atom[1:]
                sol = mats[y].hstack(mats[z]).solve(Id)
                sols = None if sol is None else [sol.block(0, d, 0, d), sol.block(d, 2 * d, 0, d)]
            if sols is None or any(s is None for s in sols):
                raise ReductionError(f"lattice witness violates atom {atom}")
            for name, m in zip(names, sols):
                env.update(_mat_env(name, m))
        return env

    def backward(w):
        out = {}
        for v in lvars:
            k = index[v]
            ent = [[w.get(f"m{k}r{i}c{j}", 0) for j in range(1, d + 1)] for i in range(1, d + 1)]
            out[v] = Subspace.span(Matrix.of(ent, field).columns(), d, field)
        return out

    return inst, WitnessMap(forward, backward, "x ↦ padded basis / Span(x̂)")


# --------------------------------------------------------------------------
# uREF over L(R^d) -> SAT -> FEAS
# --------------------------------------------------------------------------

def dimension_bound(T: UnnestedTerm | Term) -> int:
    return occurrences(T)


def uref_to_sat_fixed(T: UnnestedTerm, d: int, lib: TermLibrary | None = None) -> tuple[Instance, WitnessMap]:
    """σ_d(T) = φ_T(x̄, y, ū) ∧ δ_d(y, z̄) = 1 ∧ φ_d(z̄) with z_bot = 0, z_top = 1."""
    z = _frame_vars(d, bounds=False)
    zf = dict(z, zb=ZERO, zt=ONE)
    eqs = [Equation(var(n), r) for n, r in T.equations]
    eqs.append(Equation(delta_term(d, var(T.output), z), ONE))
    eqs += frame_equations(d, zf)
    inst = Instance("SAT", ORTHO, eqs, QQ, d,
                    {"reduction": "uref_to_sat_fixed", "source": T.to_json()},
                    {"x": list(T.inputs), "frame_vars": [v.name for v in z.values()]})

    def forward(w):
        alg = SubspaceLattice(d, QQ)
        vals = T.evaluate_all(alg, {x: w[x] for x in T.inputs})
        if vals[T.output].is_zero():
            raise ReductionError("witness does not refute T = 0")
        vals.update(frame_witness(standard_frame(d, d, QQ)))
        return vals

    def backward(w):
        return {x: w[x] for x in T.inputs}

    return inst, WitnessMap(forward, backward, "circuit values plus the standard frame")


def _complete_ssat_witness(eqs: Sequence[Equation], w: Mapping, alg) -> dict:
    """Extend ``w`` to the auxiliaries of a flattened system by forward evaluation."""
    out = dict(w)
    for e in eqs:
        n = e.left.name
        if n in out:
            continue
        r = e.right
        if r.op == "var":
            out[n] = out[r.name]
        elif not r.args:
            out[n] = alg.constant(r.op)
        else:
            out[n] = alg.apply(r.op, [out[a.name] for a in r.args])
    return out


def uref_to_feas(T: UnnestedTerm, lib: TermLibrary | None = None, d: int | None = None) -> tuple[Instance, WitnessMap]:
    """ρ_d with d = o(T): σ_d, flatten to basic equations, matrix-encode over R (searched over Q)."""
    d = dimension_bound(T) if d is None else d
    sat, w1 = uref_to_sat_fixed(T, d, lib)
    names = set(sat.variables())
    for n, _ in T.equations:
        names.add(n)
    flat = sat_to_ssat(sat.terms, ORTHO, FreshNames(names, prefix="_v"))
    feas, w2 = ssat_to_feas(flat, d, QQ, ortho=True)
    feas.origin = {"reduction": "uref_to_feas", "d": d, "source": T.to_json()}
    feas.meta["x"] = list(T.inputs)
    feas.meta["ssat_size"] = len(flat)
    alg = SubspaceLattice(d, QQ)

    def forward(w):
        return w2.forward(_complete_ssat_witness(flat, w1.forward(w), alg))

    def backward(w):
        return w1.backward(w2.backward(w))

    return feas, WitnessMap(forward, backward, "σ_d witness, flattened, matrix-encoded")


# --------------------------------------------------------------------------
# FEAS -> REF over modular ortholattices
# --------------------------------------------------------------------------

def _combine(polys: Sequence[Term]) -> Term:
    polys = list(polys)
    if not polys:
        return R0
    return polys[0] if len(polys) == 1 else sum_of_squares(polys)


def feas_to_ref_mol(polys: Sequence[Term], lib: TermLibrary | None = None) -> tuple[Instance, WitnessMap]:
    """p^# = 0: valid in all L(H) iff Σ p_i² has no real zero."""
    lib = lib or TermLibrary.default()
    p = _combine(polys)
    check_signature(p, RING)
    xs = variables(p)
    z = {n: var("_" + n) for n in FRAME3}
    a = orthogonalize_terms(z, lib)
    rs = [force_ring_element_term(var(x), a, lib) for x in xs]
    ss = commuting_selfadjoint_terms(rs, a, lib)
    frame3 = {n: a[n] for n in FRAME3}
    phat = ring_term_to_lattice_term(p, lib, frame3, dict(zip(xs, ss)))
    a1, a2 = a["z1"], a["z2"]
    psharp = conj_to_single_ol([Equation(meet(phat, a1), ZERO), Equation(join(phat, a1), join(a1, a2))])
    inst = Instance("REF", ORTHO, [psharp, ZERO], QQ, None,
                    {"reduction": "feas_to_ref_mol", "source": [print_term(q) for q in polys]},
                    {"x": xs, "frame_vars": [v.name for v in z.values()], "polynomial": print_term(p)})

    def forward(w):
        f = standard_frame(3, 3, QQ)
        c = Coordinates(f)
        out = {x: c.omega(Matrix.of([[w[x]]], QQ)) for x in xs}
        out.update({"_" + n: v for n, v in f.env().items() if n in FRAME3})
        return out

    return inst, WitnessMap(forward, None, "real root ρ ↦ ω(ρ) on the standard ON-frame of Q³")


# --------------------------------------------------------------------------
# FEAS -> REF over *-regular rings
# --------------------------------------------------------------------------

def k_term(x: Term) -> Term:
    """k(x) = 1 − x* x*⁺, the projection onto ker x."""
    xa = adj(x)
    return rsub(R1, rmul(xa, pinv(xa)))


def proj_join(e: Term, f: Term) -> Term:
    """e ∪ f = f + (e(1−f))⁺ e(1−f)."""
    g = rmul(e, rsub(R1, f))
    return radd(f, rmul(pinv(g), g))


def proj_meet(e: Term, f: Term) -> Term:
    return rsub(R1, proj_join(rsub(R1, e), rsub(R1, f)))


def feas_to_ref_starring(polys: Sequence[Term] | Term) -> tuple[Instance, WitnessMap]:
    """p°(x̄, ȳ) = k(p(x_1 q + (1−q), …)); valid as p° = 0 iff p has no real zero."""
    if isinstance(polys, Term):
        polys = [polys]
    p = _combine(polys)
    check_signature(p, RING)
    xs = variables(p)
    ys = [f"_y{i}" for i in range(1, len(xs) + 1)]
    xv, yv = [var(x) for x in xs], [var(y) for y in ys]
    parts = [k_term(p)]
    parts += [k_term(rsub(radd(x, x), radd(y, adj(y)))) for x, y in zip(xv, yv)]
    parts += [k_term(rsub(rmul(yi, adj(yj)), rmul(adj(yj), yi))) for yi in yv for yj in yv]
    q = parts[0]
    for e in parts[1:]:
        q = proj_meet(q, e)
    one_minus_q = rsub(R1, q)
    sub = {x: radd(rmul(xt, q), one_minus_q) for x, xt in zip(xs, xv)}
    pcirc = k_term(substitute(p, sub))
    inst = Instance("REF", STAR, [pcirc, R0], QQ, None,
                    {"reduction": "feas_to_ref_starring", "source": [print_term(t) for t in polys]},
                    {"x": xs, "y": ys, "q_nodes": len(postorder(q))})

    def forward(w):
        out = {}
        for x, y in zip(xs, ys):
            m = Matrix.of([[w[x]]], QQ)
            out[x] = m
            out[y] = m
        return out

    return inst, WitnessMap(forward, None, "real root ρ ↦ x_i = y_i = (ρ_i) in End(Q¹)")


# --------------------------------------------------------------------------
# τ: unnested *-ring terms to unnested ortholattice terms
# --------------------------------------------------------------------------

def _emit(t: Term, memo: dict, eqs: list, fresh: FreshNames) -> str:
    """Append basic equations computing the DAG ``t``; returns the name of its value."""
    for n in postorder(t):
        if id(n) in memo:
            continue
        if n.op == "var":
            memo[id(n)] = n.name
            continue
        y = fresh()
        eqs.append((y, Term(n.op, tuple(var(memo[id(a)]) for a in n.args))))
        memo[id(n)] = y
    return memo[id(t)]


_STAR_TO_LIB = {"r+": "add", "r-": "sub", "r*": "mul", "adj": "dagger", "pinv": "pinv"}


def ring_to_ol_translate(T: UnnestedTerm, lib: TermLibrary | None = None) -> tuple[Instance, WitnessMap]:
    """τ(T) and the ring zero a_1(z̄), both sharing the ON-frame circuit ā(z̄)."""
    lib = lib or TermLibrary.default()
    check_star = Signature("star-ring")
    for _, r in T.equations:
        check_signature(r, check_star)
    z = {n: var("_" + n) for n in FRAME3}
    names = set(T.inputs) | {n for n, _ in T.equations} | {v.name for v in z.values()}
    fresh = FreshNames(names, prefix="_t")
    eqs: list = []
    memo: dict = {}
    a = orthogonalize_terms(z, lib)
    fnames = {n: _emit(a[n], memo, eqs, fresh) for n in FRAME3}
    fvars = {n: var(v) for n, v in fnames.items()}
    frame_eqs = list(eqs)

    def forced(name: str) -> Term:
        return force_ring_element_term(var(name), fvars, lib)

    for y, r in T.equations:
        if r.op == "var":
            eqs.append((y, r))
            continue
        if r.op == "r0":
            t = lib.term("zero", frame=fvars)
        elif r.op == "r1":
            t = lib.term("unit", frame=fvars)
        else:
            t = lib.term(_STAR_TO_LIB[r.op], *[forced(a_.name) for a_ in r.args], frame=fvars)
        name = _emit(t, {}, eqs, fresh)
        if t.op == "var":
            eqs.append((y, var(name)))
        else:
            # rename the last emitted variable to y
            last, rhs = eqs.pop()
            eqs.append((y, rhs))
    out_name = fresh()
    final = forced(T.output)
    memo2: dict = {}
    _emit(final, memo2, eqs, fresh)
    last, rhs = eqs.pop()
    eqs.append((out_name, rhs))
    inputs = tuple(T.inputs) + tuple(v.name for v in z.values())
    tau = UnnestedTerm(inputs, tuple(eqs), out_name, ORTHO)
    zero = UnnestedTerm(inputs, tuple(frame_eqs), fnames["z1"], ORTHO)
    inst = Instance("uREF", ORTHO, [tau, zero], QQ, None,
                    {"reduction": "ring_to_ol_translate", "source": T.to_json()},
                    {"x": list(T.inputs), "frame_vars": [v.name for v in z.values()],
                     "source_equations": len(T.equations), "frame_equations": len(frame_eqs)})

    def forward(w):
        k = next(iter(w.values())).rows if w else 1
        f = standard_frame(3, 3 * k, QQ, block=k)
        c = Coordinates(f)
        out = {x: c.omega(w[x]) for x in T.inputs}
        out.update({"_" + n: v for n, v in f.env().items() if n in FRAME3})
        return out

    return inst, WitnessMap(forward, None, "f ↦ ω(f) on the standard ON-frame of Q^(3k)")


# --------------------------------------------------------------------------
# FEAS -> REF over L(F^3): the plain-lattice forcing chain (experimental)
# --------------------------------------------------------------------------

def _reduce_terms(a: Mapping[str, Term], b1: Term) -> dict[str, Term]:
    b2 = meet(join(b1, a["z12"]), a["z2"])
    b3 = meet(join(b1, a["z13"]), a["z3"])
    return {"zb": a["zb"], "zt": join(b1, b2, b3), "z1": b1, "z2": b2, "z3": b3,
            "z12": meet(join(b1, b2), a["z12"]), "z13": meet(join(b1, b3), a["z13"])}


def cml_chain_terms(polys: Sequence[Term], xs: Sequence[str], z: Mapping[str, Term],
                    lib: TermLibrary | None = None) -> dict:
    """Terms of every stage of the forcing chain (frame dicts and element lists)."""
    lib = lib or TermLibrary.default()
    a = dict(z)
    r1 = [meet(join(a["zb"], var(x)), join(a["z1"], a["z2"])) for x in xs]
    # stage 2: collapse the frame when some r¹_i meets a_2 above a_bot
    hit = join(*[meet(r, a["z2"]) for r in r1]) if r1 else a["zb"]
    bb = join(a["zb"], delta_term(3, hit, a))
    a2 = {n: join(t, bb) for n, t in a.items()}
    a2["zb"] = bb
    r2 = [join(r, bb) for r in r1]
    # stage 3: b_1 = a_1 ∩ ⋂ (r²_i + a_2)
    b1 = meet(a2["z1"], *[join(r, a2["z2"]) for r in r2]) if r2 else a2["z1"]
    a3 = _reduce_terms(a2, b1)
    r3 = [meet(r, join(a3["z1"], a3["z2"])) for r in r2]
    # stage 4: b_1 = a_1 ∩ ⋂ p̃_k(r̄³)
    fr3 = {n: a3[n] for n in FRAME3}
    leaves = dict(zip(xs, r3))
    ptil = [ring_term_to_lattice_term(p, lib, fr3, leaves) for p in polys]
    b1p = meet(a3["z1"], *ptil) if ptil else a3["z1"]
    a4 = _reduce_terms(a3, b1p)
    r4 = [meet(r, join(a4["z1"], a4["z2"])) for r in r3]
    return {"frames": [a, a2, a3, a4], "elements": [r1, r2, r3, r4]}


def feas_to_ref_cml(polys: Sequence[Term], field: FieldSpec = FieldSpec(2),
                    lib: TermLibrary | None = None) -> tuple[Instance, WitnessMap]:
    """REF instance a_bot(x̄, z̄) vs a_top(x̄, z̄) over L(F³); frame variables range over frames."""
    polys = list(polys)
    for p in polys:
        check_signature(p, RING)
    xs = sorted({v for p in polys for v in variables(p)})
    z = _frame_vars(3)
    chain = cml_chain_terms(polys, xs, z, lib)
    a4 = chain["frames"][-1]
    inst = Instance("REF", LATTICE, [a4["zb"], a4["zt"]], field, 3,
                    {"reduction": "feas_to_ref_cml", "experimental": True,
                     "source": [print_term(p) for p in polys]},
                    {"x": xs, "frame": frame_meta(3, z)})

    def forward(w):
        f = standard_frame(3, 3, field)
        c = Coordinates(f)
        out = {x: c.omega(Matrix.of([[w.get(x, 0)]], field)) for x in xs}
        out.update(frame_witness(f))
        return out

    return inst, WitnessMap(forward, None, "root ρ ↦ ω(ρ) on the standard frame of F³")


def forcing_chain(polys: Sequence[Term], env: Mapping[str, Subspace], field: FieldSpec = FieldSpec(2),
                  lib: TermLibrary | None = None) -> dict:
    """Evaluate the chain on an assignment and report every postcondition."""
    polys = list(polys)
    xs = sorted({v for p in polys for v in variables(p)})
    z = _frame_vars(3)
    chain = cml_chain_terms(polys, xs, z, lib)
    dim = next(iter(env.values())).dim
    alg = SubspaceLattice(dim, field)
    frames = []
    for fr in chain["frames"]:
        vals = {n: evaluate(t, alg, env) for n, t in fr.items()}
        frames.append(Frame(vals["zb"], vals["zt"], (vals["z1"], vals["z2"], vals["z3"]),
                            (vals["z12"], vals["z13"])))
    elements = [[evaluate(t, alg, env) for t in stage] for stage in chain["elements"]]
    final, r4 = frames[-1], elements[-1]
    report = {"frames": frames, "elements": elements, "failures": []}
    if frame_axioms(final):
        report["failures"].append("final tuple is not a frame")
    trivial = final.bot == final.top
    report["trivial"] = trivial
    if not trivial:
        for x, r in zip(xs, r4):
            if not is_ring_element(r, final):
                report["failures"].append(f"r4[{x}] not in R(b)")
        if not report["failures"] and final.bot.is_zero():
            c = Coordinates(final)
            vals = {x: c.omega_inv(r) for x, r in zip(xs, r4)}
            ring = MatrixRing(c.k, field)
            for p in polys:
                if not evaluate(p, ring, vals).is_zero():
                    report["failures"].append(f"p = {print_term(p)} nonzero at r4")
    else:
        if any(r != final.bot for r in r4):
            report["failures"].append("trivial frame but r4 != a_bot")
    return report
