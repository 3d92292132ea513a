"""Von Neumann frames in L(F^n), coordinate rings and the lattice terms that compute in them.

A frame is stored as a_bot, a_top, axes a_1..a_d and the axes of
perspectivity a_12..a_1d.  For frames with a_bot = 0 the map
omega: End(a_1) -> R(a) is computed in coordinates (see :class:`Coordinates`);
this is the semantic reference against which every library term is checked.

Library terms are s-expression templates over argument parameters and the
frame variables ``z1 z2 z3 z12 z13`` (``z1 .. zd``, ``z12 .. z1d`` for the
discriminator).  Builders below instantiate them, so every "semantic"
forcing operation is literally the evaluation of the corresponding term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .linalg import (QQ, FieldSpec, Matrix, Subspace, UnsupportedOperation,
                     pseudoinverse)
from .models import SubspaceLattice
from .terms import (ORTHO, Term, TermError, evaluate, join, meet, oc, occurrence_counts,
                    parse_term, substitute, var)


class FrameError(ValueError):
    pass


# --------------------------------------------------------------------------
# frames
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    bot: Subspace
    top: Subspace
    axes: tuple            # a_1 .. a_d
    axes1j: tuple          # a_12 .. a_1d

    def __post_init__(self):
        if len(self.axes) < 1 or len(self.axes1j) != len(self.axes) - 1:
            raise FrameError("a d-frame needs d axes and d-1 axes of perspectivity")

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def field(self) -> FieldSpec:
        return self.bot.field

    @property
    def dim(self) -> int:
        return self.bot.dim

    def a(self, i: int) -> Subspace:
        """Axis a_i (1-based)."""
        return self.axes[i - 1]

    def a1(self, j: int) -> Subspace:
        return self.axes1j[j - 2]

    def aij(self, i: int, j: int) -> Subspace:
        """a_ij for i != j; for i, j != 1 the derived (a_i+a_j) ∩ (a_1i+a_1j)."""
        if i == j:
            raise FrameError("a_ii is undefined")
        if i > j:
            i, j = j, i
        if i == 1:
            return self.a1(j)
        return (self.a(i) + self.a(j)) & (self.a1(i) + self.a1(j))

    @property
    def a23(self) -> Subspace:
        return self.aij(2, 3)

    def components(self) -> list[Subspace]:
        return [self.bot, self.top, *self.axes, *self.axes1j]

    def env(self) -> dict[str, Subspace]:
        """Assignment of the frame variables zb, zt, z1.., z12.. ."""
        out = {"zb": self.bot, "zt": self.top}
        for i, a in enumerate(self.axes, 1):
            out[f"z{i}"] = a
        for j, a in enumerate(self.axes1j, 2):
            out[f"z1{j}"] = a
        return out

    @classmethod
    def from_tuple(cls, comps: Sequence[Subspace], d: int | None = None) -> "Frame":
        comps = list(comps)
        if d is None:
            d = (len(comps) - 1) // 2
        if len(comps) != 2 * d + 1:
            raise FrameError(f"a {d}-frame has {2 * d + 1} components")
        return cls(comps[0], comps[1], tuple(comps[2:2 + d]), tuple(comps[2 + d:]))

    def to_json(self) -> dict:
        return {"format": 1, "a_bot": self.bot.to_json(), "a_top": self.top.to_json(),
                "a": [a.to_json() for a in self.axes], "a1j": [a.to_json() for a in self.axes1j]}

    @classmethod
    def from_json(cls, obj: dict) -> "Frame":
        return cls(Subspace.from_json(obj["a_bot"]), Subspace.from_json(obj["a_top"]),
                   tuple(Subspace.from_json(a) for a in obj["a"]),
                   tuple(Subspace.from_json(a) for a in obj["a1j"]))


def frame_var_names(d: int = 3, bounds: bool = False) -> list[str]:
    names = ["zb", "zt"] if bounds else []
    return names + [f"z{i}" for i in range(1, d + 1)] + [f"z1{j}" for j in range(2, d + 1)]


def standard_frame(d: int, dim: int | None = None, field: FieldSpec = QQ, block: int = 1) -> Frame:
    """a_i spanned by the i-th block of ``block`` unit vectors, a_1j = {(v, 0..,-v,..)}.

    With ``block = 1`` this is a_i = e_iF, a_1j = (e_1 - e_j)F inside F^dim,
    embedded into the first d coordinates when dim > d.
    """
    if d < 1:
        raise FrameError("frame order must be at least 1")
    dim = d * block if dim is None else dim
    if dim < d * block:
        raise FrameError(f"ambient dimension {dim} too small for a {d}-frame of block {block}")
    axes = [Subspace.coordinate(range((i - 1) * block, i * block), dim, field) for i in range(1, d + 1)]
    axes1j = []
    for j in range(2, d + 1):
        vecs = []
        for l in range(block):
            v = [0] * dim
            v[l] = 1
            v[(j - 1) * block + l] = -1
            vecs.append(v)
        axes1j.append(Subspace.span(vecs, dim, field))
    top = Subspace.coordinate(range(d * block), dim, field)
    return Frame(Subspace.zero(dim, field), top, tuple(axes), tuple(axes1j))


def frame_from_basis(basis: Matrix, d: int, block: int = 1) -> Frame:
    """Image of the standard frame of F^(d*block) under the columns of ``basis``."""
    n = basis.rows
    cols = basis.columns()
    if len(cols) != d * block:
        raise FrameError("basis must have d*block columns")
    f = basis.field

    def sp(vs):
        return Subspace.span(vs, n, f)

    axes = [sp(cols[(i - 1) * block:i * block]) for i in range(1, d + 1)]
    axes1j = [sp([[a - b for a, b in zip(cols[l], cols[(j - 1) * block + l])] for l in range(block)])
              for j in range(2, d + 1)]
    return Frame(Subspace.zero(n, f), sp(cols), tuple(axes), tuple(axes1j))


def frame_axioms(f: Frame) -> list[str]:
    """Violated frame axioms (empty list for a frame)."""
    bad = []
    bot, top = f.bot, f.top
    if not bot <= top:
        bad.append("a_bot <= a_top")
    for name, c in zip(frame_var_names(f.d), [*f.axes, *f.axes1j]):
        if not (bot <= c <= top):
            bad.append(f"{name} in [a_bot, a_top]")
    acc = f.axes[0]
    for k in range(1, f.d):
        if acc & f.axes[k] != bot:
            bad.append(f"independence at a_{k + 1}")
        acc = acc + f.axes[k]
    if acc != top:
        bad.append("a_top = sum of axes")
    a1 = f.axes[0]
    for j in range(2, f.d + 1):
        aj, c = f.a(j), f.a1(j)
        s = a1 + aj
        if a1 + c != s or a1 & c != bot:
            bad.append(f"a_1 (+) a_1{j} = a_1 + a_{j}")
        if aj + c != s or aj & c != bot:
            bad.append(f"a_{j} (+) a_1{j} = a_1 + a_{j}")
    return bad


def is_frame(f: Frame) -> bool:
    return not frame_axioms(f)


def frame_classify(f: Frame) -> str:
    """'spanning', 'trivial', 'partial' (a frame of a proper interval) or 'invalid'."""
    if frame_axioms(f):
        return "invalid"
    if f.bot == f.top:
        return "trivial"
    if f.bot.is_zero() and f.top.is_full():
        return "spanning"
    return "partial"


def frame_reduce(f: Frame, b1: Subspace) -> Frame:
    """The frame generated by a_bot <= b1 <= a_1 inside f."""
    if not (f.bot <= b1 <= f.axes[0]):
        raise FrameError("frame reduction needs a_bot <= b1 <= a_1")
    bs = [b1] + [(b1 + f.a1(j)) & f.a(j) for j in range(2, f.d + 1)]
    b1j = [(b1 + bs[j - 1]) & f.a1(j) for j in range(2, f.d + 1)]
    top = bs[0]
    for b in bs[1:]:
        top = top + b
    return Frame(f.bot, top, tuple(bs), tuple(b1j))


def is_orthogonal_frame(f: Frame) -> bool:
    if not f.field.rational or not f.bot.is_zero() or not is_frame(f):
        return False
    perps = [a.orthocomplement() for a in f.axes]
    return all(f.axes[i] <= perps[j] for i in range(f.d) for j in range(f.d) if i != j)


def isometry_criterion(f: Frame) -> bool:
    """(*): a_12^⊥ ∩ (a_1+a_2) = a_1 ⊖ a_12."""
    lhs = f.a1(2).orthocomplement() & (f.a(1) + f.a(2))
    if f.bot == f.top:
        return lhs == f.bot
    c = Coordinates(f)
    minus_one = Matrix.identity(c.k, f.field).scale(-1)
    return lhs == c.omega(minus_one)


def is_on_frame(f: Frame) -> bool:
    return f.d == 3 and is_orthogonal_frame(f) and isometry_criterion(f)


# --------------------------------------------------------------------------
# coordinates
# --------------------------------------------------------------------------

def _pair_decompose(bi: Matrix, bj: Matrix, g: Matrix):
    """P, Q with g = bi P + bj Q (requires span g <= span bi + span bj)."""
    sol = bi.hstack(bj).solve(g)
    if sol is None:
        raise FrameError("subspace not contained in a_i + a_j")
    k = bi.cols
    return sol.block(0, k, 0, g.cols), sol.block(k, sol.rows, 0, g.cols)


class Coordinates:
    """Bases of the axes of a frame with a_bot = 0 and the maps ε_ij between them.

    Endomorphisms of a_1 are k×k matrices in the echelon basis B1 of a_1.
    Γ_ij(g) = {v − g v} = Span(B_i − B_j G) and ε_ij is defined by Γ_ij(ε_ij) = a_ij.
    """

    def __init__(self, f: Frame):
        if not f.bot.is_zero():
            raise FrameError("coordinates need a_bot = 0")
        if f.bot == f.top:
            raise FrameError("trivial frame has the zero ring")
        self.frame = f
        self.field = f.field
        self.B = [a.basis for a in f.axes]
        self.k = self.B[0].cols
        if any(b.cols != self.k for b in self.B):
            raise FrameError("axes of a frame must have equal dimension")
        self._eps: dict = {}

    def eps(self, i: int, j: int) -> Matrix:
        if (i, j) not in self._eps:
            p, q = _pair_decompose(self.B[i - 1], self.B[j - 1], self.frame.aij(i, j).basis)
            self._eps[(i, j)] = (-q) @ p.inverse()
        return self._eps[(i, j)]

    @property
    def E(self) -> Matrix:
        return self.eps(1, 2)

    def graph(self, i: int, j: int, g: Matrix) -> Subspace:
        from .linalg import canonicalize
        return canonicalize(self.B[i - 1] - self.B[j - 1] @ g)

    def graph_inv(self, i: int, j: int, r: Subspace) -> Matrix:
        if r.rank != self.k:
            raise FrameError("not the graph of a map a_i -> a_j")
        x, y = _pair_decompose(self.B[i - 1], self.B[j - 1], r.basis)
        return (-y) @ x.inverse()

    def omega(self, fmat: Matrix) -> Subspace:
        if fmat.rows != self.k or fmat.cols != self.k:
            raise FrameError(f"endomorphism of a_1 must be {self.k}x{self.k}")
        return self.graph(1, 2, self.E @ fmat)

    def omega_inv(self, r: Subspace) -> Matrix:
        if not is_ring_element(r, self.frame):
            raise FrameError("not an element of the coordinate ring")
        return self.E.inverse() @ self.graph_inv(1, 2, r)

    # the inner product restricted to a_1, in B1 coordinates
    def _gram(self) -> Matrix:
        b = self.B[0]
        return b.T @ b

    def adjoint(self, fmat: Matrix) -> Matrix:
        g = self._gram()
        return g.inverse() @ fmat.T @ g

    def pinv(self, fmat: Matrix) -> Matrix:
        b = self.B[0]
        left = self._gram().inverse() @ b.T     # B1⁺
        ambient = b @ fmat @ left
        return left @ pseudoinverse(ambient) @ b


def is_ring_element(r: Subspace, f: Frame) -> bool:
    s = f.axes[0] + f.axes[1]
    return r + f.axes[1] == s and r & f.axes[1] == f.bot and f.bot <= r


@dataclass(frozen=True)
class RingElement:
    frame: Frame
    r: Subspace
    _ok: list = field(default_factory=list, compare=False, repr=False)

    def valid(self) -> bool:
        if not self._ok:
            self._ok.append(is_ring_element(self.r, self.frame))
        return self._ok[0]


def omega(fmat: Matrix, f: Frame) -> RingElement:
    if f.bot == f.top:
        raise FrameError("omega is undefined on the zero ring")
    return RingElement(f, Coordinates(f).omega(fmat))


def omega_inv(r: RingElement | Subspace, f: Frame | None = None) -> Matrix:
    if isinstance(r, RingElement):
        f, r = r.frame, r.r
    if f.bot == f.top:
        raise FrameError("omega_inv is undefined on the zero ring")
    return Coordinates(f).omega_inv(r)


CR_KINDS = ("add", "sub", "mul", "neg", "inverse", "dagger", "pinv")


def cr_op(kind: str, args: Sequence, f: Frame | None = None, mode: str = "semantic",
          lib: "TermLibrary | None" = None) -> Subspace:
    """Coordinate ring operation; ``mul(r, s)`` is ω(f_r ∘ f_s)."""
    rs = [a.r if isinstance(a, RingElement) else a for a in args]
    if f is None:
        f = args[0].frame
    if kind not in CR_KINDS:
        raise FrameError(f"unknown coordinate ring operation {kind!r}")
    if f.bot == f.top:
        return f.bot
    if kind in ("dagger", "pinv") and not is_on_frame(f):
        raise FrameError(f"{kind} needs an ON-3-frame")
    if mode == "syntactic":
        lib = lib or TermLibrary.default()
        return lib.evaluate(kind, rs, f)
    c = Coordinates(f)
    ms = [c.omega_inv(r) for r in rs]
    if kind == "add":
        out = ms[0] + ms[1]
    elif kind == "sub":
        out = ms[0] - ms[1]
    elif kind == "neg":
        out = -ms[0]
    elif kind == "mul":
        out = ms[0] @ ms[1]
    elif kind == "inverse":
        if not (rs[0] + f.axes[0] == f.axes[0] + f.axes[1] and rs[0] & f.axes[0] == f.bot):
            raise FrameError("element is not invertible")
        out = ms[0].inverse()
    elif kind == "dagger":
        out = c.adjoint(ms[0])
    else:
        out = c.pinv(ms[0])
    return c.omega(out)


# --------------------------------------------------------------------------
# the term library
# --------------------------------------------------------------------------

# name: (parameters, body).  Bodies may call earlier entries as (@name args).
DEFAULT_LIBRARY = [
    ("z23", (), "(^ (+ z2 z3) (+ z12 z13))"),
    ("pi123", ("x",), "(^ (+ x (@z23)) (+ z1 z3))"),
    ("pi312", ("x",), "(^ (+ x z12) (+ z3 z2))"),
    ("pi231", ("x",), "(^ (+ x z13) (+ z2 z1))"),
    ("zero", (), "z1"),
    ("unit", (), "z12"),
    ("sub", ("x", "y"), "(^ (+ (^ (+ (^ (+ y z13) (+ z2 z3)) x) (+ z2 z13)) z3) (+ z1 z2))"),
    ("neg", ("x",), "(@sub z1 x)"),
    ("add", ("x", "y"), "(@sub x (@neg y))"),
    ("mul", ("x", "y"), "(^ (+ (^ (+ y (@z23)) (+ z1 z3)) (^ (+ x z13) (+ z2 z3))) (+ z1 z2))"),
    ("inverse", ("x",), "(@pi231 (@pi312 (@pi123 x)))"),
    ("dagger", ("x",), "(@inverse (^ (oc (@sub z1 x)) (+ z1 z2)))"),
    ("ker", ("x",), "(^ x z1)"),
    ("im", ("x",), "(^ (+ (^ (+ x z1) z2) z12) z1)"),
    ("implus", ("x",), "(^ (+ (^ z1 (oc (@ker x))) z12) z2)"),
    ("pinv", ("x",), "(+ (^ (@inverse x) (+ (@im x) (@implus x))) (^ z1 (oc (@im x))))"),
    ("half", (), "(@inverse (@add z12 z12))"),
    ("halve", ("x",), "(@mul (@half) x)"),
    ("sharp", ("x", "y", "z"), "(+ x (^ y (oc z)))"),
    ("sharp2", ("x", "y", "z"), "(@sharp (^ z (oc (^ x z))) y (+ x z))"),
]

# ring operations whose argument variables must occur exactly once
SINGLE_OCCURRENCE = ("sub", "neg", "add", "mul", "inverse", "dagger")
FRAME3 = ("z1", "z2", "z3", "z12", "z13")


class TermLibrary:
    def __init__(self, entries: Sequence[tuple]):
        self.source = [(n, tuple(p), b) for n, p, b in entries]
        self.defs: dict[str, tuple] = {}
        for name, params, body in self.source:
            t = parse_term(body, ORTHO, macros=self.defs)
            self.defs[name] = (tuple(params), t)

    @classmethod
    def default(cls) -> "TermLibrary":
        global _DEFAULT
        if _DEFAULT is None:
            _DEFAULT = cls(DEFAULT_LIBRARY)
        return _DEFAULT

    def replace(self, name: str, body: str) -> "TermLibrary":
        """A copy with one entry's body swapped (later entries re-expanded)."""
        if name not in self.defs:
            raise KeyError(name)
        return TermLibrary([(n, p, body if n == name else b) for n, p, b in self.source])

    def to_json(self) -> dict:
        return {"format": 1, "terms": [{"name": n, "params": list(p), "body": b} for n, p, b in self.source]}

    @classmethod
    def from_json(cls, obj: dict) -> "TermLibrary":
        base = {n: (p, b) for n, p, b in DEFAULT_LIBRARY}
        order = [n for n, _, _ in DEFAULT_LIBRARY]
        for e in obj.get("terms", []):
            if e["name"] not in base:
                order.append(e["name"])
            base[e["name"]] = (tuple(e.get("params", ())), e["body"])
        return cls([(n, *base[n]) for n in order])

    @classmethod
    def load(cls, path) -> "TermLibrary":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def __contains__(self, name):
        return name in self.defs

    def template(self, name: str) -> tuple:
        return self.defs[name]

    def term(self, name: str, *args: Term, frame: Mapping[str, Term] | None = None) -> Term:
        """Instantiate ``name`` at argument terms and (optionally) frame terms."""
        params, body = self.defs[name]
        if len(args) != len(params):
            raise TermError(f"{name} takes {len(params)} argument(s)")
        mapping = dict(frame or {})
        mapping.update(zip(params, args))
        return substitute(body, mapping)

    def evaluate(self, name: str, args: Sequence[Subspace], f: Frame) -> Subspace:
        params, body = self.defs[name]
        env = f.env()
        env.update(zip(params, args))
        return evaluate(body, SubspaceLattice(f.dim, f.field), env)

    def occurrence_report(self) -> dict[str, bool]:
        out = {}
        for name in SINGLE_OCCURRENCE:
            params, body = self.defs[name]
            counts = occurrence_counts(body)
            out[name] = all(counts.get(p, 0) == 1 for p in params)
        return out


_DEFAULT: TermLibrary | None = None


# --------------------------------------------------------------------------
# relative complements, perspectivities, discriminator
# --------------------------------------------------------------------------

def relative_complement_sharp(x: Subspace, y: Subspace, z: Subspace) -> Subspace:
    return x + (y & z.orthocomplement())


def sharp2(a: Subspace, b: Subspace, c: Subspace) -> Subspace:
    """#″(a, b, c): a complement of a in [0, b] equal to c when b = c ⊕ a."""
    if not (a <= b and c <= b):
        raise FrameError("sharp2 needs a, c <= b")
    cp = c & (a & c).orthocomplement()
    return relative_complement_sharp(cp, b, a + c)


def perspectivity(x: Subspace, i: int, j: int, k: int, f: Frame) -> Subspace:
    """π_ijk(x) = (x + a_jk) ∩ (a_i + a_k)."""
    if len({i, j, k}) != 3:
        raise FrameError("perspectivity indices must be pairwise distinct")
    return (x + f.aij(j, k)) & (f.a(i) + f.a(k))


def delta_term(d: int, x: Term | None = None, frame: Mapping[str, Term] | None = None) -> Term:
    """δ_d(x, z̄) = Σ_i spread_i(h_i(x)); 1 on nonzero x for spanning frames of height d."""
    frame = frame or {}
    z = {n: frame.get(n, var(n)) for n in frame_var_names(d)}
    x = x if x is not None else var("x")

    def zi(i):
        return z[f"z{i}"]

    def zij(i, j):
        if i > j:
            i, j = j, i
        if i == 1:
            return z[f"z1{j}"]
        return meet(join(zi(i), zi(j)), join(z[f"z1{i}"], z[f"z1{j}"]))

    parts = []
    for i in range(1, d + 1):
        others = [zi(j) for j in range(1, d + 1) if j != i]
        h = meet(join(x, *others), zi(i)) if others else meet(x, zi(i))
        spread = join(h, *[meet(join(h, zij(i, j)), zi(j)) for j in range(1, d + 1) if j != i])
        parts.append(spread)
    return join(*parts)


def discriminator(b: Subspace, f: Frame) -> Subspace:
    """Evaluation of δ_d at b on the frame f."""
    t = delta_term(f.d)
    env = f.env()
    env["x"] = b
    return evaluate(t, SubspaceLattice(f.dim, f.field), env)


# --------------------------------------------------------------------------
# retractive term chains for ON-3-frames
# --------------------------------------------------------------------------

def _frame_terms(names=FRAME3, prefix: str = "") -> dict[str, Term]:
    return {n: var(prefix + n) for n in names}


def orthogonalize_terms(z: Mapping[str, Term] | None = None,
                        lib: TermLibrary | None = None) -> dict[str, Term]:
    """Terms a_bot, a_top, a_1.., a_13 in z1 z2 z3 z12 z13 forming an ON-3-frame.

    Steps: make the axes independent above u = ⋂(a_i + a_j), orthogonalise,
    repair the 1-2 and 1-3 perspectivities, re-reduce the 1-2 pair, and
    finally cut a_1 down to where ε is isometric.
    """
    lib = lib or TermLibrary.default()
    z = dict(z or _frame_terms())
    a1, a2, a3, a12, a13 = (z[n] for n in FRAME3)
    # step 1
    u = meet(join(a1, a2), join(a1, a3), join(a2, a3))
    b = [join(u, a) for a in (a1, a2, a3)]
    # step 2: a²_i = a¹_i ∩ (a¹_j + a¹_k)^⊥
    c = [meet(b[i], oc(join(*[b[j] for j in range(3) if j != i]))) for i in range(3)]

    def repair(p, q, axis):
        """Make `axis` a perspectivity between c[p] and c[q]."""
        ax = meet(axis, join(c[p], c[q]))
        cp = meet(c[p], join(c[q], ax))
        cq = meet(c[q], join(c[p], ax))
        dp, dq = meet(c[p], ax), meet(c[q], ax)
        np_, nq = meet(cp, oc(dp)), meet(cq, oc(dq))
        return np_, nq, meet(join(np_, nq), ax)

    # step 3: pair 1-2
    c[0], c[1], x12 = repair(0, 1, a12)
    # step 4: pair 1-3
    c[0], c[2], x13 = repair(0, 2, a13)
    # step 5: restore the 1-2 pair over the new a_1
    c[1] = meet(join(c[0], x12), c[1])
    x12 = meet(x12, join(c[0], c[1]))
    y = {"z1": c[0], "z2": c[1], "z3": c[2], "z12": x12, "z13": x13}
    # step 6: ON step, b_1 = (a_12^⊥ ∩ (a_1 ⊖ a_12) + a_2) ∩ a_1, then reduce
    m1 = lib.term("sub", y["z1"], y["z12"], frame=y)
    n1 = meet(join(meet(oc(x12), m1), c[1]), c[0])
    n2 = meet(join(n1, x12), c[1])
    n3 = meet(join(n1, x13), c[2])
    return {"zb": meet(n1, oc(n1)), "zt": join(n1, n2, n3), "z1": n1, "z2": n2, "z3": n3,
            "z12": meet(join(n1, n2), x12), "z13": meet(join(n1, n3), x13)}


def force_ring_element_term(x: Term, a: Mapping[str, Term], lib: TermLibrary | None = None) -> Term:
    """#″(a_2, a_1 + a_2, x ∩ (a_1 + a_2))."""
    lib = lib or TermLibrary.default()
    s = join(a["z1"], a["z2"])
    return lib.term("sharp2", a["z2"], s, meet(x, s))


def commuting_selfadjoint_terms(rs: Sequence[Term], a: Mapping[str, Term],
                                lib: TermLibrary | None = None) -> list[Term]:
    """s_i = 2⁻¹(g_i ⊞ g_i†), g_i = r_i ∩ (u + a_2) + a_1 ∩ u^⊥, u the common commutant kernel."""
    lib = lib or TermLibrary.default()
    fr = {n: a[n] for n in FRAME3}
    xs = []
    for r in rs:
        xs.append(r)
        xs.append(lib.term("dagger", r, frame=fr))
    kernels = []
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            comm = lib.term("sub", lib.term("mul", xs[i], xs[j], frame=fr),
                            lib.term("mul", xs[j], xs[i], frame=fr), frame=fr)
            kernels.append(comm)
    u = meet(a["z1"], *kernels)
    out = []
    for r in rs:
        g = join(meet(r, join(u, a["z2"])), meet(a["z1"], oc(u)))
        out.append(lib.term("halve", lib.term("add", g, lib.term("dagger", g, frame=fr), frame=fr), frame=fr))
    return out


def _eval_terms(terms: Mapping[str, Term], env: Mapping[str, Subspace], dim: int, field: FieldSpec):
    alg = SubspaceLattice(dim, field)
    return {n: evaluate(t, alg, env) for n, t in terms.items()}


def orthogonalize(z: Sequence[Subspace] | Frame, lib: TermLibrary | None = None) -> Frame:
    """Retract an arbitrary 7-tuple (a_bot, a_top, a_1, a_2, a_3, a_12, a_13) to an ON-3-frame."""
    comps = z.components() if isinstance(z, Frame) else list(z)
    if len(comps) == 5:
        comps = [None, None] + comps
    if len(comps) != 7:
        raise FrameError("orthogonalize takes 7 subspaces")
    sample = comps[2]
    if not sample.field.rational:
        raise UnsupportedOperation("orthogonalize needs characteristic 0")
    env = dict(zip(FRAME3, comps[2:]))
    vals = _eval_terms(orthogonalize_terms(lib=lib), env, sample.dim, sample.field)
    return Frame(vals["zb"], vals["zt"], (vals["z1"], vals["z2"], vals["z3"]), (vals["z12"], vals["z13"]))


def force_ring_element(x: Subspace, f: Frame, lib: TermLibrary | None = None) -> RingElement:
    if f.bot == f.top:
        return RingElement(f, f.bot)
    t = force_ring_element_term(var("x"), _frame_terms(), lib)
    env = f.env()
    env["x"] = x
    return RingElement(f, evaluate(t, SubspaceLattice(f.dim, f.field), env))


def force_commuting_selfadjoint(rs: Sequence[RingElement | Subspace], f: Frame,
                                lib: TermLibrary | None = None) -> list[RingElement]:
    if not f.field.rational:
        raise UnsupportedOperation("2⁻¹ and orthocomplements need characteristic 0")
    if f.bot == f.top:
        return [RingElement(f, f.bot) for _ in rs]
    names = [f"r{i}" for i in range(len(rs))]
    terms = commuting_selfadjoint_terms([var(n) for n in names], _frame_terms(), lib)
    env = f.env()
    env.update({n: (r.r if isinstance(r, RingElement) else r) for n, r in zip(names, rs)})
    alg = SubspaceLattice(f.dim, f.field)
    return [RingElement(f, evaluate(t, alg, env)) for t in terms]


def kernel_term(r: RingElement, lib: TermLibrary | None = None) -> Subspace:
    return (lib or TermLibrary.default()).evaluate("ker", [r.r], r.frame)


def image_term(r: RingElement, lib: TermLibrary | None = None) -> Subspace:
    return (lib or TermLibrary.default()).evaluate("im", [r.r], r.frame)


def pinv_term(r: RingElement, lib: TermLibrary | None = None) -> RingElement:
    return RingElement(r.frame, (lib or TermLibrary.default()).evaluate("pinv", [r.r], r.frame))


# --------------------------------------------------------------------------
# ring terms to lattice terms
# --------------------------------------------------------------------------

_RING_TO_LIB = {"r+": "add", "r-": "sub", "r*": "mul", "adj": "dagger", "pinv": "pinv"}


def ring_term_to_lattice_term(p: Term, lib: TermLibrary | None = None,
                              frame: Mapping[str, Term] | None = None,
                              leaves: Mapping[str, Term] | None = None) -> Term:
    """p̃(x̄, z̄): the coordinate-ring evaluation of the ring term p as a lattice term.

    ``leaves`` optionally maps ring variables to lattice terms (default: the
    variable itself); ``frame`` maps z1 .. z13 to terms.
    """
    lib = lib or TermLibrary.default()
    frame = dict(frame or _frame_terms())
    leaves = leaves or {}

    def leaf(n):
        if n.op == "var":
            return leaves.get(n.name, n)
        if n.op == "r0":
            return lib.term("zero", frame=frame)
        if n.op == "r1":
            return lib.term("unit", frame=frame)
        raise TermError(f"{n.op!r} is not a ring constant")

    def node(n, cs):
        try:
            name = _RING_TO_LIB[n.op]
        except KeyError:
            raise TermError(f"{n.op!r} is not a ring operation") from None
        return lib.term(name, *cs, frame=frame)

    from .terms import fold
    return fold(p, leaf, node)
