"""Brute-force ground truth: finite models, exhaustive/random search, FEAS solving.

The searchers enumerate; independent checking is done by :func:`verify`, which
re-evaluates a witness with the generic term evaluator in the model's algebra.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .coord import Frame
from .linalg import QQ, FieldSpec, LinalgError, Matrix, Subspace
from .models import MatrixRing, SubspaceLattice, TwoElement
from .poly import Poly, from_term
from .terms import (Algebra, TermError, evaluate)

DEFAULT_BUDGET = 50_000_000
CHUNK = 1 << 18


class BudgetExceeded(RuntimeError):
    pass


class ModelError(ValueError):
    pass


# --------------------------------------------------------------------------
# model specifications
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """``two``, ``mo`` (n atom pairs), ``lattice`` (L(F^dim)) or ``endo`` (End(F^dim))."""

    kind: str
    n: int = 0
    field: FieldSpec = QQ
    dim: int = 0

    def __post_init__(self):
        if self.kind not in ("two", "mo", "lattice", "endo"):
            raise ModelError(f"unknown model kind {self.kind!r}")
        if self.kind == "mo" and not 1 <= self.n < 20:
            raise ModelError("MO_n needs 1 <= n < 20")

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        """``two``, ``mo:N``, ``lattice:P:D``, ``endo:P:N`` (P = 0 for the rationals)."""
        parts = text.strip().lower().split(":")
        try:
            if parts[0] in ("two", "2"):
                return cls("two")
            if parts[0] == "mo":
                return cls("mo", n=int(parts[1]))
            if parts[0] in ("lattice", "endo"):
                return cls(parts[0], field=FieldSpec(int(parts[1])), dim=int(parts[2]))
        except (IndexError, ValueError, LinalgError) as e:
            raise ModelError(f"bad model spec {text!r}: {e}") from None
        raise ModelError(f"bad model spec {text!r}")

    def __str__(self):
        if self.kind == "two":
            return "two"
        if self.kind == "mo":
            return f"mo:{self.n}"
        return f"{self.kind}:{self.field.char}:{self.dim}"

    @property
    def finite(self) -> bool:
        return self.kind in ("two", "mo") or (not self.field.rational)

    def algebra(self) -> Algebra:
        if self.kind == "two":
            return TwoElement()
        if self.kind == "mo":
            return mo_n(self.n).algebra()
        if self.kind == "lattice":
            return SubspaceLattice(self.dim, self.field)
        return MatrixRing(self.dim, self.field)

    def tables(self) -> "FiniteLattice":
        if self.kind == "two":
            return two_element()
        if self.kind == "mo":
            return mo_n(self.n)
        if self.kind == "lattice" and not self.field.rational:
            return subspace_table(self.field, self.dim)
        raise ModelError(f"{self} has no finite operation tables")


# --------------------------------------------------------------------------
# subspace enumeration
# --------------------------------------------------------------------------

def gaussian_binomial(d: int, k: int, q: int) -> int:
    num = den = 1
    for i in range(k):
        num *= q ** (d - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def subspace_count(d: int, q: int) -> int:
    return sum(gaussian_binomial(d, k, q) for k in range(d + 1))


def enumerate_subspaces(field: FieldSpec, d: int, budget: int | None = None) -> Iterator[Subspace]:
    """Every subspace of GF(p)^d once, by rank, pivot set and free entries of its RREF."""
    if field.rational:
        raise ModelError("only finite fields are enumerable")
    p = field.char
    total = subspace_count(d, p)
    if budget is not None and total > budget:
        raise BudgetExceeded(f"L(GF({p})^{d}) has {total} elements > budget {budget}")
    for k in range(d + 1):
        for pivots in itertools.combinations(range(d), k):
            free = [(i, j) for i, c in enumerate(pivots) for j in range(c + 1, d)
                    if j not in pivots]
            for vals in itertools.product(range(p), repeat=len(free)):
                rows = [[0] * d for _ in range(k)]
                for i, c in enumerate(pivots):
                    rows[i][c] = 1
                for (i, j), v in zip(free, vals):
                    rows[i][j] = v
                yield Subspace(field, d, tuple(tuple(r) for r in rows))


# --------------------------------------------------------------------------
# finite lattices given by tables
# --------------------------------------------------------------------------

class TableAlgebra(Algebra):
    """Vectorised evaluation: values are numpy index arrays into ``elements``."""

    def __init__(self, lat: "FiniteLattice"):
        self.lat = lat
        m = len(lat)
        jf = lat.join.astype(np.int64).ravel()
        mf = lat.meet.astype(np.int64).ravel()
        # flat lookups are about twice as fast as 2-d fancy indexing
        self.ops = {"+": lambda a, b: jf[a * m + b], "^": lambda a, b: mf[a * m + b]}
        if lat.oc is not None:
            ocf = lat.oc.astype(np.int64)
            self.ops["oc"] = lambda a: ocf[a]
        self.consts = {"0": lat.zero, "1": lat.one}


class LabelAlgebra(Algebra):
    """Scalar evaluation on element labels (used to re-verify witnesses)."""

    def __init__(self, lat: "FiniteLattice"):
        ix = lat.index
        el = lat.elements
        self.ops = {"+": lambda a, b: el[lat.join[ix(a), ix(b)]],
                    "^": lambda a, b: el[lat.meet[ix(a), ix(b)]]}
        if lat.oc is not None:
            self.ops["oc"] = lambda a: el[lat.oc[ix(a)]]
        self.consts = {"0": el[lat.zero], "1": el[lat.one]}


@dataclass
class FiniteLattice:
    name: str
    elements: list
    join: np.ndarray
    meet: np.ndarray
    oc: np.ndarray | None
    zero: int
    one: int
    _index: dict = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {e: i for i, e in enumerate(self.elements)}

    def __len__(self):
        return len(self.elements)

    def index(self, e) -> int:
        return self._index[e]

    def algebra(self) -> Algebra:
        return LabelAlgebra(self)

    def vector_algebra(self) -> TableAlgebra:
        return TableAlgebra(self)

    def axiom_violations(self) -> list[str]:
        """Lattice, modular and (if present) ortholattice laws, checked on all triples."""
        J, M = self.join, self.meet
        m = len(self)
        a, b, c = np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij")
        bad = []
        checks = {
            "join commutative": J[a, b] == J[b, a],
            "meet commutative": M[a, b] == M[b, a],
            "join associative": J[J[a, b], c] == J[a, J[b, c]],
            "meet associative": M[M[a, b], c] == M[a, M[b, c]],
            "absorption": (J[a, M[a, b]] == a) & (M[a, J[a, b]] == a),
            "bounds": (J[a, self.zero] == a) & (M[a, self.one] == a),
            # modular: a <= c  =>  a + (b ^ c) = (a + b) ^ c
            "modular": (J[a, c] != c) | (J[a, M[b, c]] == M[J[a, b], c]),
        }
        if self.oc is not None:
            O = self.oc
            checks["involution"] = O[O[a]] == a
            checks["complement"] = (M[a, O[a]] == self.zero) & (J[a, O[a]] == self.one)
            checks["de morgan"] = O[J[a, b]] == M[O[a], O[b]]
        for name, ok in checks.items():
            if not np.all(ok):
                bad.append(name)
        return bad


def two_element() -> FiniteLattice:
    J = np.array([[0, 1], [1, 1]], dtype=np.int16)
    M = np.array([[0, 0], [0, 1]], dtype=np.int16)
    return FiniteLattice("two", [0, 1], J, M, np.array([1, 0], dtype=np.int16), 0, 1)


_MO_CACHE: dict = {}


def mo_n(n: int) -> FiniteLattice:
    """0, 1 and atom pairs a_i, a_i' (labels 'a1', "a1'" ...); axioms verified once."""
    if n in _MO_CACHE:
        return _MO_CACHE[n]
    labels = ["0", "1"] + [s for i in range(1, n + 1) for s in (f"a{i}", f"a{i}'")]
    m = len(labels)
    J = np.ones((m, m), dtype=np.int16)
    M = np.zeros((m, m), dtype=np.int16)
    for x in range(m):
        for y in range(m):
            if x == y:
                J[x, y] = M[x, y] = x
            elif x == 0 or y == 0:
                J[x, y], M[x, y] = (y if x == 0 else x), 0
            elif x == 1 or y == 1:
                J[x, y], M[x, y] = 1, (y if x == 1 else x)
    O = np.array([1, 0] + [k + 1 if k % 2 == 0 else k - 1 for k in range(2, m)], dtype=np.int16)
    lat = FiniteLattice(f"MO_{n}", labels, J, M, O, 0, 1)
    bad = lat.axiom_violations()
    if bad:
        raise ModelError(f"MO_{n} fails {bad}")
    _MO_CACHE[n] = lat
    return lat


_SUB_CACHE: dict = {}


def subspace_table(field: FieldSpec, d: int, budget: int = 1000) -> FiniteLattice:
    key = (field.char, d)
    if key in _SUB_CACHE:
        return _SUB_CACHE[key]
    els = list(enumerate_subspaces(field, d, budget))
    ix = {e: i for i, e in enumerate(els)}
    m = len(els)
    J = np.zeros((m, m), dtype=np.int16)
    M = np.zeros((m, m), dtype=np.int16)
    for i in range(m):
        for j in range(i, m):
            J[i, j] = J[j, i] = ix[els[i] + els[j]]
            M[i, j] = M[j, i] = ix[els[i] & els[j]]
    lat = FiniteLattice(f"L(GF({field.char})^{d})", els, J, M, None,
                        ix[Subspace.zero(d, field)], ix[Subspace.full(d, field)])
    _SUB_CACHE[key] = lat
    return lat


def enumerate_frames(lat: FiniteLattice, d: int = 3) -> list[tuple]:
    """All d-frames (zb, zt, z1..zd, z12..z1d) of a finite lattice, as index tuples, sorted."""
    J, M = lat.join, lat.meet
    m = len(lat)
    le = J == np.arange(m)[None, :]  # le[a, b]: a <= b
    out = []
    for zb in range(m):
        above = [a for a in range(m) if le[zb, a]]

        def axes(prefix, acc):
            if len(prefix) == d:
                yield prefix, acc
                return
            for a in above:
                if M[acc, a] == zb:
                    yield from axes(prefix + (a,), J[acc, a])

        for ax, top in ([((), zb)] if d == 0 else axes((), zb)):
            if d and M[zb, ax[0]] != zb:
                continue
            choices = []
            for j in range(1, d):
                a1, aj = ax[0], ax[j]
                span = J[a1, aj]
                cj = [c for c in above if J[a1, c] == span and M[a1, c] == zb
                      and J[aj, c] == span and M[aj, c] == zb]
                choices.append(cj)
            for c in itertools.product(*choices):
                out.append((zb, int(top)) + tuple(int(a) for a in ax) + tuple(int(x) for x in c))
    return sorted(set(out))


# --------------------------------------------------------------------------
# verdicts
# --------------------------------------------------------------------------

def _value_json(v):
    if isinstance(v, (Subspace, Matrix, Frame)):
        return v.to_json()
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    return QQ.fmt(v) if hasattr(v, "denominator") else str(v)


@dataclass
class Verdict:
    answer: str  # yes | no | unknown
    witness: dict | None = None
    tried: int = 0
    seed: int | None = None
    seconds: float = 0.0
    model: str = ""
    mode: str = "exhaustive"

    def to_json(self) -> dict:
        w = None if self.witness is None else {k: _value_json(v) for k, v in sorted(self.witness.items())}
        return {"format": 1, "answer": self.answer, "witness": w, "tried": self.tried,
                "seed": self.seed, "model": self.model, "mode": self.mode}


# --------------------------------------------------------------------------
# checking (independent of the searchers)
# --------------------------------------------------------------------------

def _terms_of(inst):
    return inst.terms


def holds(inst, alg: Algebra, w: Mapping) -> bool:
    """Does ``w`` witness the instance (refute / satisfy non-trivially / solve) in ``alg``?"""
    kind = inst.kind
    if kind == "REF":
        t, s = inst.terms
        return evaluate(t, alg, w) != evaluate(s, alg, w)
    if kind == "uREF":
        T, S = inst.terms
        return T.evaluate(alg, w) != S.evaluate(alg, w)
    if kind in ("SAT", "sSAT"):
        if not all(evaluate(e.left, alg, w) == evaluate(e.right, alg, w) for e in inst.terms):
            return False
        if inst.signature.bounds:
            return True  # 0 != 1 is in the generated subalgebra
        return len({_key(w[x]) for x in inst.variables()}) > 1
    raise TermError(f"holds() does not handle {kind}")


def _key(v):
    return v if not isinstance(v, np.ndarray) else v.tobytes()


def verify(inst, model: ModelSpec | None, w: Mapping) -> bool:
    """Re-check a witness with the generic evaluator."""
    if inst.kind == "FEAS":
        p = inst.field.char
        env = {k: inst.field(v) for k, v in w.items()}
        for t in inst.terms:
            poly = from_term(t)
            missing = poly.variables() - set(env)
            if missing:
                return False
            if poly.evaluate(env, p) != 0:
                return False
        return True
    alg = model.algebra()
    try:
        return holds(inst, alg, w)
    except (KeyError, TermError):
        return False


# --------------------------------------------------------------------------
# random sampling
# --------------------------------------------------------------------------

def random_matrix(n: int, m: int, rng: random.Random, field: FieldSpec = QQ, bound: int = 5) -> Matrix:
    if field.rational:
        return Matrix.of([[rng.randint(-bound, bound) for _ in range(m)] for _ in range(n)], field)
    return Matrix.of([[rng.randrange(field.char) for _ in range(m)] for _ in range(n)], field)


def random_subspace(dim: int, rng: random.Random, field: FieldSpec = QQ, bound: int = 5) -> Subspace:
    """Span of k random vectors, k uniform in 0..dim; entries uniform in [-bound, bound] (or GF(p))."""
    k = rng.randint(0, dim)
    return Subspace.span(random_matrix(k, dim, rng, field, bound).entries, dim, field)


def random_symmetric(n: int, rng: random.Random, bound: int = 5) -> Matrix:
    a = random_matrix(n, n, rng, QQ, bound)
    return a + a.T


def random_orthogonal(n: int, rng: random.Random, bound: int = 3) -> Matrix:
    """Cayley transform (I − A)(I + A)⁻¹ of a random integer skew-symmetric A."""
    a = random_matrix(n, n, rng, QQ, bound)
    s = a - a.T
    eye = Matrix.identity(n, QQ)
    return (eye - s) @ (eye + s).inverse()


def random_on_frame(dim: int, rng: random.Random, block: int = 1, bound: int = 3) -> Frame:
    """An orthonormal 3-frame: the standard frame moved by a random rational orthogonal map."""
    from .coord import frame_from_basis
    q = random_orthogonal(dim, rng, bound)
    return frame_from_basis(q.block(0, dim, 0, 3 * block), 3, block)


def random_frame(dim: int, d: int, rng: random.Random, field: FieldSpec = QQ, bound: int = 5) -> Frame:
    from .coord import frame_from_basis
    while True:
        b = random_matrix(dim, d, rng, field, bound)
        if b.rank() == d:
            return frame_from_basis(b, d)


# --------------------------------------------------------------------------
# model search
# --------------------------------------------------------------------------

def _frame_spec(inst):
    fr = inst.meta.get("frame") if inst.meta else None
    if not fr:
        return None, []
    from .coord import frame_var_names
    d = int(fr["d"])
    names = [fr["vars"][n] for n in frame_var_names(d, True)]
    return d, names


def _mask(inst, alg, env, size):
    kind = inst.kind
    if kind == "REF":
        t, s = inst.terms
        m = evaluate(t, alg, env) != evaluate(s, alg, env)
    elif kind == "uREF":
        T, S = inst.terms
        m = T.evaluate(alg, env) != S.evaluate(alg, env)
    elif kind in ("SAT", "sSAT"):
        m = np.ones(size, dtype=bool)
        for e in inst.terms:
            m = m & (np.asarray(evaluate(e.left, alg, env)) == np.asarray(evaluate(e.right, alg, env)))
        if not inst.signature.bounds:
            vs = inst.variables()
            if vs:
                first = np.asarray(env[vs[0]])
                nonconst = np.zeros(size, dtype=bool)
                for v in vs[1:]:
                    nonconst |= np.asarray(env[v]) != first
                m = m & nonconst
            else:
                m = np.zeros(size, dtype=bool)
    else:
        raise ModelError(f"model_search does not handle {kind}")
    return np.broadcast_to(np.asarray(m), (size,))


def model_search(inst, model: ModelSpec, mode: str = "exhaustive", budget: int | None = None,
                 seed: int = 0) -> Verdict:
    """Search for a refuting / satisfying assignment of a REF, uREF, SAT or sSAT instance.

    Exhaustive mode enumerates assignments in lexicographic order of the
    sorted free variables (frame-restricted variables, if any, vary fastest as
    one block over the sorted list of frames) and returns the least witness.
    """
    budget = DEFAULT_BUDGET if budget is None else budget
    start = time.perf_counter()
    if mode == "exhaustive":
        v = _exhaustive(inst, model, budget)
    elif mode == "random":
        v = _random_search(inst, model, budget, seed)
    else:
        raise ModelError(f"unknown mode {mode!r}")
    v.seconds = time.perf_counter() - start
    v.model, v.mode, v.seed = str(model), mode, (seed if mode == "random" else None)
    return v


def _assignment_space(inst, lat):
    d, fnames = _frame_spec(inst)
    free = [v for v in inst.variables() if v not in fnames]
    frames = np.array(enumerate_frames(lat, d), dtype=np.int64) if d else np.zeros((1, 0), dtype=np.int64)
    return free, fnames, frames


def _witness(lat, env, pos):
    return {n: lat.elements[int(np.asarray(a)[pos] if np.ndim(a) else a)] for n, a in env.items()}


def _exhaustive(inst, model: ModelSpec, budget: int) -> Verdict:
    """Broadcast evaluation: each free variable owns an array axis, the frames the last one.

    A subterm is then only computed over the variables it depends on.  Leading
    variables are fixed one tuple at a time to bound memory; the C-order scan
    of each block is the lexicographic order of assignments.
    """
    if not model.finite:
        raise ModelError(f"{model} is infinite; use random mode")
    lat = model.tables()
    alg = lat.vector_algebra()
    free, fnames, frames = _assignment_space(inst, lat)
    m, nf = len(lat), len(frames)
    total = m ** len(free) * nf
    if total > budget:
        raise BudgetExceeded(f"{total} assignments exceed budget {budget}")
    if nf == 0:
        return Verdict("no", tried=0)
    lead = 0
    while lead < len(free) and m ** (len(free) - lead) * nf > CHUNK * 4:
        lead += 1
    inner = free[lead:]
    ndim = len(inner) + 1
    shape = (m,) * len(inner) + (nf,)
    base = {}
    for k, v in enumerate(inner):
        sh = [1] * ndim
        sh[k] = m
        base[v] = np.arange(m, dtype=np.int64).reshape(sh)
    fsh = [1] * ndim
    fsh[-1] = nf
    for c, n in enumerate(fnames):
        base[n] = frames[:, c].reshape(fsh)
    block = int(np.prod(shape))
    done = 0
    for prefix in itertools.product(range(m), repeat=lead):
        env = dict(base)
        env.update(zip(free[:lead], prefix))
        mask = _bmask(inst, alg, env, shape)
        hits = np.flatnonzero(mask)
        if hits.size:
            pos = int(hits[0])
            coords = np.unravel_index(pos, shape)
            w = {v: lat.elements[int(x)] for v, x in zip(free[:lead], prefix)}
            w.update({v: lat.elements[int(coords[k])] for k, v in enumerate(inner)})
            fr = frames[int(coords[-1])]
            w.update({n: lat.elements[int(fr[c])] for c, n in enumerate(fnames)})
            return Verdict("yes", w, tried=done + pos + 1)
        done += block
    return Verdict("no", tried=total)


def _bmask(inst, alg, env, shape):
    kind = inst.kind
    if kind == "REF":
        t, s = inst.terms
        return np.broadcast_to(evaluate(t, alg, env) != evaluate(s, alg, env), shape)
    if kind == "uREF":
        T, S = inst.terms
        return np.broadcast_to(T.evaluate(alg, env) != S.evaluate(alg, env), shape)
    m = np.ones(shape, dtype=bool)
    for e in inst.terms:
        m = m & (evaluate(e.left, alg, env) == evaluate(e.right, alg, env))
    if not inst.signature.bounds:
        vs = inst.variables()
        nonconst = np.zeros(shape, dtype=bool)
        for v in vs[1:]:
            nonconst = nonconst | (env[vs[0]] != env[v])
        m = m & nonconst
    return m


def _random_search(inst, model: ModelSpec, budget: int, seed: int) -> Verdict:
    if model.finite:
        lat = model.tables()
        alg = lat.vector_algebra()
        free, fnames, frames = _assignment_space(inst, lat)
        gen = np.random.default_rng(seed)
        m = len(lat)
        done = 0
        while done < budget:
            n = min(CHUNK, budget - done)
            env = {v: gen.integers(0, m, n) for v in free}
            if fnames:
                if len(frames) == 0:
                    break
                pick = gen.integers(0, len(frames), n)
                env.update({name: frames[pick, c] for c, name in enumerate(fnames)})
            hits = np.flatnonzero(_mask(inst, alg, env, n))
            if hits.size:
                pos = int(hits[0])
                return Verdict("yes", _witness(lat, env, pos), tried=done + pos + 1)
            done += n
        return Verdict("unknown", tried=done)
    rng = random.Random(seed)
    alg = model.algebra()
    d, fnames = _frame_spec(inst)
    free = [v for v in inst.variables() if v not in fnames]
    for k in range(budget):
        if model.kind == "lattice":
            w = {v: random_subspace(model.dim, rng, model.field) for v in free}
            if d:
                f = random_frame(model.dim, d, rng, model.field)
                from .coord import frame_var_names
                env = f.env()
                w.update({n: env[k2] for n, k2 in zip(fnames, frame_var_names(d, True))})
        else:
            w = {v: random_matrix(model.dim, model.dim, rng, model.field) for v in free}
        if holds(inst, alg, w):
            return Verdict("yes", w, tried=k + 1)
    return Verdict("unknown", tried=budget)


# --------------------------------------------------------------------------
# FEAS
# --------------------------------------------------------------------------

def _as_polys(polys, field: FieldSpec) -> list[Poly]:
    out = []
    for p in polys:
        q = p if isinstance(p, Poly) else from_term(p)
        out.append(q.reduce(field.char))
    return out


def _enumeration_order(polys: Sequence[Poly], hints: Sequence[str]) -> list[str]:
    """Variables to branch on so that the rest enters every monomial at most linearly."""
    chosen = [h for h in hints if any(h in q.variables() for q in polys)]
    S = set(chosen)
    while True:
        score: dict = {}
        for q in polys:
            for mono in q.terms:
                rest = [x for x in mono if x not in S]
                if len(rest) >= 2:
                    for x in set(rest):
                        score[x] = score.get(x, 0) + 1
        if not score:
            return chosen
        best = max(sorted(score), key=lambda x: score[x])
        chosen.append(best)
        S.add(best)


class _Solver:
    def __init__(self, p: int, order: Sequence[str], budget: int):
        self.p = p
        self.order = list(order)
        self.rank = {v: i for i, v in enumerate(order)}
        self.budget = budget
        self.tried = 0
        self.memo: dict = {}

    def clean(self, polys):
        out = []
        for q in polys:
            if q.is_zero():
                continue
            if not q.variables():
                return None
            out.append(q)
        return out

    def solve(self, polys):
        polys = self.clean(polys)
        if polys is None:
            return None
        if not polys:
            return {}
        sol: dict = {}
        for comp in _components(polys):
            r = self.solve_component(comp)
            if r is None:
                return None
            sol.update(r)
        return sol

    def solve_component(self, polys):
        key = frozenset(polys)
        if key in self.memo:
            r = self.memo[key]
            return None if r is None else dict(r)
        vs = set().union(*(q.variables() for q in polys))
        branch = [v for v in vs if v in self.rank]
        if not branch:
            r = _affine_solve(polys, self.p)
        else:
            v = min(branch, key=self.rank.__getitem__)
            r = None
            for val in range(self.p):
                self.tried += 1
                if self.tried > self.budget:
                    raise BudgetExceeded(f"FEAS search exceeded {self.budget} branches")
                sub = self.solve([q.substitute(v, val, self.p) for q in polys])
                if sub is not None:
                    sub[v] = val
                    r = sub
                    break
        self.memo[key] = None if r is None else dict(r)
        return r


def _components(polys):
    parent: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for q in polys:
        vs = sorted(q.variables())
        for v in vs:
            parent.setdefault(v, v)
        for v in vs[1:]:
            a, b = find(vs[0]), find(v)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict = {}
    for q in polys:
        groups.setdefault(find(min(q.variables())), []).append(q)
    return [groups[k] for k in sorted(groups)]


def _affine_solve(polys, p: int):
    from .linalg import rref_rows
    field = FieldSpec(p)
    vs = sorted(set().union(*(q.variables() for q in polys)))
    col = {v: i for i, v in enumerate(vs)}
    rows = []
    for q in polys:
        row = [0] * (len(vs) + 1)
        for mono, c in q.terms.items():
            if not mono:
                row[-1] = (-c) % p
            elif len(mono) == 1:
                row[col[mono[0]]] = c % p
            else:
                raise ModelError("non-affine polynomial reached the linear stage")
        rows.append(row)
    red, piv = rref_rows(rows, field, ncols=len(vs) + 1)
    if any(c == len(vs) for c in piv):
        return None
    sol = {v: 0 for v in vs}
    for r, c in zip(red, piv):
        sol[vs[c]] = int(r[-1])
    return sol


def feas_search(polys, field: FieldSpec, mode: str = "exhaustive", budget: int | None = None,
                seed: int = 0, hints: Sequence[str] = (), bound: int = 5) -> Verdict:
    """Common zero of polynomials over ``field``.

    Exhaustive mode (GF(p) only) branches on a set of variables after which
    the system is affine, splitting into variable-disjoint components and
    memoising them; variables are tried in order with values 0..p-1.  Over Q
    there is random search (numerators and denominators up to ``bound``) and
    a ``grid`` mode walking small-height rationals; both answer yes or unknown.
    """
    budget = DEFAULT_BUDGET if budget is None else budget
    start = time.perf_counter()
    ps = _as_polys(polys, field)
    names = sorted(set().union(set(), *(q.variables() for q in ps)))
    v = Verdict("unknown", model=f"FEAS/{field}", mode=mode)
    if mode == "exhaustive":
        if field.rational:
            raise ModelError("exhaustive FEAS search needs a finite field")
        solver = _Solver(field.char, _enumeration_order(ps, hints), budget)
        try:
            sol = solver.solve(ps)
        except BudgetExceeded:
            sol = "budget"
        v.tried = solver.tried
        if sol == "budget":
            v.answer = "unknown"
        elif sol is None:
            v.answer = "no"
        else:
            v.answer = "yes"
            v.witness = {n: int(sol.get(n, 0)) for n in names}
    elif mode in ("random", "grid"):
        v.seed = seed
        if field.rational:
            values = sorted({QQ(f"{a}/{b}") for a in range(-bound, bound + 1) for b in range(1, bound + 1)},
                            key=lambda q: (abs(q.numerator) + q.denominator, q))
        else:
            values = list(range(field.char))
        if not names:
            it: Iterable = [()]
        elif mode == "grid":
            it = itertools.islice(itertools.product(values, repeat=len(names)), budget)
        else:
            rng = random.Random(seed)
            it = (tuple(rng.choice(values) for _ in names) for _ in range(budget))
        for vals in it:
            v.tried += 1
            env = dict(zip(names, vals))
            if all(q.evaluate(env, field.char) == 0 for q in ps):
                v.answer, v.witness = "yes", env
                break
    else:
        raise ModelError(f"unknown mode {mode!r}")
    v.seconds = time.perf_counter() - start
    if v.answer == "unknown" and not ps:
        v.answer, v.witness = "yes", {}
    return v


# --------------------------------------------------------------------------
# dispatch and round trips
# --------------------------------------------------------------------------

def search(inst, model: ModelSpec | None = None, mode: str = "exhaustive", budget: int | None = None,
           seed: int = 0) -> Verdict:
    if inst.kind == "FEAS":
        return feas_search(inst.terms, inst.field, mode, budget, seed)
    if model is None:
        raise ModelError(f"{inst.kind} search needs a model")
    return model_search(inst, model, mode, budget, seed)


def roundtrip_check(source, source_model, target, wmap, target_model, mode: str = "exhaustive",
                    budget: int | None = None, seed: int = 0, source_verdict: Verdict | None = None) -> dict:
    """Search both sides, transport witnesses both ways and compare verdicts."""
    sv = source_verdict or search(source, source_model, mode, budget, seed)
    tv = search(target, target_model, mode, budget, seed)
    forward = backward = None
    if sv.answer == "yes" and wmap.forward is not None:
        try:
            forward = verify(target, target_model, wmap.forward(sv.witness))
        except (ValueError, KeyError, ArithmeticError):
            forward = False
    if tv.answer == "yes" and wmap.backward is not None:
        try:
            backward = verify(source, source_model, wmap.backward(tv.witness))
        except (ValueError, KeyError, ArithmeticError):
            backward = False
    definite = sv.answer != "unknown" and tv.answer != "unknown"
    agreement = (sv.answer == tv.answer) if definite else None
    return {"format": 1, "source": sv.to_json(), "target": tv.to_json(), "forward": forward,
            "backward": backward, "agreement": agreement,
            "ok": agreement is not False and forward is not False and backward is not False}
