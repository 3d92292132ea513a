"""Multi-sorted terms, s-expression syntax, circuits (unnested terms) and normal forms.

Terms are immutable and hash-consed only by value: equal subterms compare equal,
and generated terms freely share subterm objects, so a term is really a DAG.
All traversals are iterative and memoised on object identity, which keeps
evaluation linear in the number of distinct nodes even when the printed tree
would be astronomically large.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

KINDS = ("lattice", "ortholattice", "ring", "star-ring")

_LATTICE_OPS = {"+": 2, "^": 2}
_RING_OPS = {"r+": 2, "r-": 2, "r*": 2}
ARITY = {
    "lattice": dict(_LATTICE_OPS),
    "ortholattice": dict(_LATTICE_OPS, oc=1),
    "ring": dict(_RING_OPS),
    "star-ring": dict(_RING_OPS, adj=1, pinv=1),
}
CONSTANTS = {
    "lattice": ("0", "1"),
    "ortholattice": ("0", "1"),
    "ring": ("r0", "r1"),
    "star-ring": ("r0", "r1"),
}

VAR_RE = re.compile(r"_?[a-z][a-z0-9]*\Z")
AUX_PREFIX = "_u"


class TermError(ValueError):
    pass


class ParseError(TermError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at offset {pos}")
        self.pos = pos


@dataclass(frozen=True)
class Signature:
    kind: str = "lattice"
    bounds: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TermError(f"unknown signature kind {self.kind!r}")

    @property
    def arities(self) -> dict:
        return ARITY[self.kind]

    @property
    def constants(self) -> tuple:
        if self.kind in ("lattice", "ortholattice") and not self.bounds:
            return ()
        return CONSTANTS[self.kind]

    @property
    def is_ring(self) -> bool:
        return self.kind in ("ring", "star-ring")

    def __str__(self):
        if self.kind in ("lattice", "ortholattice") and not self.bounds:
            return self.kind + "-nobounds"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Signature":
        if text.endswith("-nobounds"):
            return cls(text[: -len("-nobounds")], False)
        return cls(text)


LATTICE = Signature("lattice")
ORTHO = Signature("ortholattice")
RING = Signature("ring")
STAR = Signature("star-ring")


# --------------------------------------------------------------------------
# terms
# --------------------------------------------------------------------------

class Term:
    """A variable, a constant or an operation applied to subterms.

    ``op`` is ``"var"`` for variables (``name`` holds the name), the constant
    symbol for constants, and the operation symbol otherwise.
    """

    __slots__ = ("op", "args", "name", "_hash")

    def __init__(self, op: str, args: tuple = (), name: str | None = None):
        self.op = op
        self.args = tuple(args)
        self.name = name
        self._hash = hash((op, name, tuple(hash(a) for a in self.args)))

    # structural equality; identity short cut keeps shared DAGs cheap
    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        seen = set()
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b or (id(a), id(b)) in seen:
                continue
            if a._hash != b._hash or a.op != b.op or a.name != b.name or len(a.args) != len(b.args):
                return False
            seen.add((id(a), id(b)))
            stack.extend(zip(a.args, b.args))
        return True

    def __hash__(self):
        return self._hash

    @property
    def is_var(self) -> bool:
        return self.op == "var"

    @property
    def is_const(self) -> bool:
        return self.op != "var" and not self.args and self.op in ("0", "1", "r0", "r1")

    def __repr__(self):
        try:
            return f"Term({print_term(self, limit=200)})"
        except TermError:
            return f"Term(<{node_count(self)} nodes>)"

    def __str__(self):
        return print_term(self)


def var(name: str) -> Term:
    if not VAR_RE.match(name):
        raise TermError(f"bad variable name {name!r}")
    return Term("var", (), name)


def const(symbol: str) -> Term:
    return Term(symbol)


def op(symbol: str, *args: Term) -> Term:
    return Term(symbol, args)


# lattice/ring helpers used throughout the library code
def join(*ts: Term) -> Term:
    if not ts:
        return Term("0")
    acc = ts[0]
    for t in ts[1:]:
        acc = Term("+", (acc, t))
    return acc


def meet(*ts: Term) -> Term:
    if not ts:
        return Term("1")
    acc = ts[0]
    for t in ts[1:]:
        acc = Term("^", (acc, t))
    return acc


def oc(t: Term) -> Term:
    return Term("oc", (t,))


def radd(a: Term, b: Term) -> Term:
    return Term("r+", (a, b))


def rsub(a: Term, b: Term) -> Term:
    return Term("r-", (a, b))


def rmul(*ts: Term) -> Term:
    acc = ts[0]
    for t in ts[1:]:
        acc = Term("r*", (acc, t))
    return acc


def adj(t: Term) -> Term:
    return Term("adj", (t,))


def pinv(t: Term) -> Term:
    return Term("pinv", (t,))


ZERO, ONE, R0, R1 = Term("0"), Term("1"), Term("r0"), Term("r1")


def ring_int(n: int) -> Term:
    """The integer constant n as a ring term (repeated doubling)."""
    if n == 0:
        return R0
    if n < 0:
        return rsub(R0, ring_int(-n))
    acc = None
    power = R1
    while n:
        if n & 1:
            acc = power if acc is None else radd(acc, power)
        n >>= 1
        if n:
            power = radd(power, power)
    return acc


# --------------------------------------------------------------------------
# traversal utilities
# --------------------------------------------------------------------------

def postorder(t: Term) -> list[Term]:
    """Distinct nodes of the DAG, children before parents."""
    out, seen = [], set()
    stack = [(t, False)]
    while stack:
        node, done = stack.pop()
        if done:
            out.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for a in reversed(node.args):
            if id(a) not in seen:
                stack.append((a, False))
    return out


def fold(t: Term, leaf: Callable[[Term], object], node: Callable[[Term, list], object]):
    memo: dict[int, object] = {}
    for n in postorder(t):
        if n.args:
            memo[id(n)] = node(n, [memo[id(a)] for a in n.args])
        else:
            memo[id(n)] = leaf(n)
    return memo[id(t)]


def node_count(t: Term) -> int:
    """Length |t| of the term as a tree."""
    return fold(t, lambda n: 1, lambda n, cs: 1 + sum(cs))


def op_count(t: Term) -> int:
    """Number of operation nodes of the tree (constants excluded)."""
    return fold(t, lambda n: 0, lambda n, cs: 1 + sum(cs))


def dag_size(t: Term) -> int:
    return len(postorder(t))


def variables(t: Term) -> list[str]:
    """Variable names in order of first (leftmost) occurrence."""
    names, seen = [], set()
    stack = [t]
    visited = set()
    while stack:
        n = stack.pop()
        if id(n) in visited:
            continue
        visited.add(id(n))
        if n.op == "var":
            if n.name not in seen:
                seen.add(n.name)
                names.append(n.name)
        else:
            stack.extend(reversed(n.args))
    return names


def occurrence_counts(t: Term) -> dict[str, int]:
    """Occurrences of each variable in the tree form of ``t``."""
    def leaf(n):
        return {n.name: 1} if n.op == "var" else {}

    def node(n, cs):
        acc: dict[str, int] = {}
        for c in cs:
            for k, v in c.items():
                acc[k] = acc.get(k, 0) + v
        return acc

    return fold(t, leaf, node)


def occurrences(t, xs: Sequence[str] | None = None) -> int:
    """o(t(x̄)): occurrences of the listed variables; listed but absent ones count once."""
    if isinstance(t, UnnestedTerm):
        counts = t.occurrence_counts()
        if xs is None:
            xs = t.inputs
    else:
        counts = occurrence_counts(t)
        if xs is None:
            xs = variables(t)
    return sum(max(counts.get(x, 0), 1) for x in dict.fromkeys(xs))


def substitute(t: Term, mapping: Mapping[str, Term]) -> Term:
    """Simultaneous substitution of terms for variables, preserving sharing."""
    def leaf(n):
        if n.op == "var" and n.name in mapping:
            return mapping[n.name]
        return n

    def node(n, cs):
        if all(c is a for c, a in zip(cs, n.args)):
            return n
        return Term(n.op, tuple(cs), n.name)

    return fold(t, leaf, node)


def check_signature(t: Term, sig: Signature) -> None:
    ar = sig.arities
    consts = sig.constants
    for n in postorder(t):
        if n.op == "var":
            continue
        if not n.args:
            if n.op not in consts:
                raise TermError(f"constant {n.op!r} not in signature {sig}")
        elif ar.get(n.op) != len(n.args):
            raise TermError(f"operation {n.op!r}/{len(n.args)} not in signature {sig}")


# --------------------------------------------------------------------------
# s-expression syntax
# --------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def _tokens(text: str):
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                return
            raise ParseError("unexpected character", pos)
        start = m.start(m.lastindex)
        yield start, m.group(m.lastindex)
        pos = m.end()


def _parse_sexpr(text: str):
    """Nested lists of (pos, atom) pairs."""
    stack: list[list] = [[]]
    opens: list[int] = []
    for pos, tok in _tokens(text):
        if tok == "(":
            stack.append([])
            opens.append(pos)
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", pos)
            done = stack.pop()
            stack[-1].append((opens.pop(), done))
        else:
            stack[-1].append((pos, tok))
    if len(stack) != 1:
        raise ParseError("missing ')'", opens[-1])
    return stack[0]


def _build(node, sig: Signature, macros: Mapping | None) -> Term:
    # iterative construction over the nested list structure
    result: dict[int, Term] = {}
    work = [(node, False)]
    while work:
        item, done = work.pop()
        pos, body = item
        if isinstance(body, str):
            result[id(item)] = _atom(body, pos, sig)
            continue
        if not body:
            raise ParseError("empty list", pos)
        head_pos, head = body[0]
        if not isinstance(head, str):
            raise ParseError("operator expected", head_pos)
        if not done:
            work.append((item, True))
            for child in reversed(body[1:]):
                work.append((child, False))
            continue
        args = tuple(result[id(c)] for c in body[1:])
        if head.startswith("@"):
            if not macros or head[1:] not in macros:
                raise ParseError(f"unknown macro {head!r}", head_pos)
            params, template = macros[head[1:]]
            if len(params) != len(args):
                raise ParseError(f"macro {head} expects {len(params)} arguments", head_pos)
            result[id(item)] = substitute(template, dict(zip(params, args)))
            continue
        want = sig.arities.get(head)
        if want is None:
            raise ParseError(f"unknown symbol {head!r} for signature {sig}", head_pos)
        if want != len(args):
            raise ParseError(f"{head!r} takes {want} argument(s), got {len(args)}", head_pos)
        result[id(item)] = Term(head, args)
    return result[id(node)]


def _atom(tok: str, pos: int, sig: Signature) -> Term:
    if tok in CONSTANTS["lattice"] + CONSTANTS["ring"]:
        if tok not in sig.constants:
            raise ParseError(f"constant {tok!r} not allowed in signature {sig}", pos)
        return Term(tok)
    if VAR_RE.match(tok):
        return Term("var", (), tok)
    if tok in sig.arities:
        raise ParseError(f"operator {tok!r} used as an atom", pos)
    raise ParseError(f"unknown symbol {tok!r}", pos)


def parse_term(text: str, sig: Signature = LATTICE, macros: Mapping | None = None) -> Term:
    items = _parse_sexpr(text)
    if len(items) != 1:
        raise ParseError("expected exactly one term", items[1][0] if items else 0)
    return _build(items[0], sig, macros)


def parse_terms(text: str, sig: Signature = LATTICE, macros: Mapping | None = None) -> list[Term]:
    """Whitespace-separated terms; ';' starts a comment."""
    text = "\n".join(line.split(";", 1)[0] for line in text.splitlines())
    return [_build(item, sig, macros) for item in _parse_sexpr(text)]


def print_term(t: Term, limit: int | None = None) -> str:
    """Canonical s-expression text. ``limit`` bounds the tree size accepted."""
    if limit is not None and node_count(t) > limit:
        raise TermError(f"term has more than {limit} tree nodes")
    parts: list[str] = []
    stack: list = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, str):
            parts.append(n)
        elif n.op == "var":
            parts.append(n.name)
        elif not n.args:
            parts.append(n.op)
        else:
            parts.append("(" + n.op)
            stack.append(")")
            for a in reversed(n.args):
                stack.append(a)
                stack.append(" ")
    return "".join(parts)


@dataclass(frozen=True)
class Equation:
    left: Term
    right: Term

    def __str__(self):
        return f"(= {print_term(self.left)} {print_term(self.right)})"


def parse_equation(text: str, sig: Signature = LATTICE, macros: Mapping | None = None) -> Equation:
    items = _parse_sexpr(text)
    if len(items) != 1 or isinstance(items[0][1], str):
        raise ParseError("expected (= lhs rhs)", 0)
    pos, body = items[0]
    if len(body) != 3 or body[0][1] != "=":
        raise ParseError("expected (= lhs rhs)", pos)
    return Equation(_build(body[1], sig, macros), _build(body[2], sig, macros))


def parse_equations(text: str, sig: Signature = LATTICE) -> list[Equation]:
    """A sequence of (= lhs rhs) forms; ';' starts a comment."""
    text = "\n".join(line.split(";", 1)[0] for line in text.splitlines())
    out = []
    for pos, body in _parse_sexpr(text):
        if isinstance(body, str) or len(body) != 3 or body[0][1] != "=":
            raise ParseError("expected (= lhs rhs)", pos)
        out.append(Equation(_build(body[1], sig, None), _build(body[2], sig, None)))
    return out


def print_equations(eqs: Iterable[Equation]) -> str:
    return "".join(str(e) + "\n" for e in eqs)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

class Algebra:
    """Interpretation of the operation symbols; subclasses fill ``ops``/``consts``."""

    ops: dict
    consts: dict

    def apply(self, symbol: str, args: list):
        try:
            fn = self.ops[symbol]
        except KeyError:
            raise TermError(f"{type(self).__name__} does not interpret {symbol!r}") from None
        return fn(*args)

    def constant(self, symbol: str):
        try:
            return self.consts[symbol]
        except KeyError:
            raise TermError(f"{type(self).__name__} has no constant {symbol!r}") from None


class UnboundVariable(TermError):
    pass


def evaluate(t: Term, algebra: Algebra, env: Mapping[str, object]):
    def leaf(n):
        if n.op == "var":
            try:
                return env[n.name]
            except KeyError:
                raise UnboundVariable(f"unbound variable {n.name!r}") from None
        return algebra.constant(n.op)

    return fold(t, leaf, lambda n, cs: algebra.apply(n.op, cs))


# --------------------------------------------------------------------------
# unnested terms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UnnestedTerm:
    """Circuit (φ_T, y_T): basic equations ``y = x`` or ``y = f(x̄)`` in definition order."""

    inputs: tuple
    equations: tuple  # of (name, Term) with Term a variable, constant or f(vars)
    output: str
    sig: Signature = LATTICE

    def __post_init__(self):
        defined = set(self.inputs)
        if len(defined) != len(self.inputs):
            raise TermError("repeated input variable")
        for name, rhs in self.equations:
            if name in defined:
                raise TermError(f"variable {name!r} defined twice")
            if rhs.op != "var" and any(a.op != "var" for a in rhs.args):
                raise TermError(f"equation for {name!r} is not basic")
            for v in ([rhs] if rhs.op == "var" else rhs.args):
                if v.name not in defined:
                    raise TermError(f"equation for {name!r} uses undefined {v.name!r}")
            defined.add(name)
        if self.output not in defined:
            raise TermError("output variable not defined")

    @property
    def aux(self) -> tuple:
        return tuple(n for n, _ in self.equations if n != self.output)

    def __len__(self):
        return len(self.equations)

    def size(self) -> int:
        """|T|: total symbol count of the basic equations (at least 1)."""
        return max(1, sum(1 + node_count(rhs) for _, rhs in self.equations))

    def occurrence_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        inputs = set(self.inputs)
        for _, rhs in self.equations:
            for v in ([rhs] if rhs.op == "var" else rhs.args):
                if v.name in inputs:
                    counts[v.name] = counts.get(v.name, 0) + 1
        if not self.equations and self.output in inputs:
            counts[self.output] = counts.get(self.output, 0) + 1
        return counts

    def evaluate(self, algebra: Algebra, env: Mapping[str, object]):
        return self.evaluate_all(algebra, env)[self.output]

    def evaluate_all(self, algebra: Algebra, env: Mapping[str, object]) -> dict:
        vals = {}
        for x in self.inputs:
            try:
                vals[x] = env[x]
            except KeyError:
                raise UnboundVariable(f"unbound variable {x!r}") from None
        for name, rhs in self.equations:
            if rhs.op == "var":
                vals[name] = vals[rhs.name]
            elif not rhs.args:
                vals[name] = algebra.constant(rhs.op)
            else:
                vals[name] = algebra.apply(rhs.op, [vals[a.name] for a in rhs.args])
        return vals

    def to_term(self) -> Term:
        """A term t with θ(t) = T (expanding all definitions, with sharing)."""
        defs: dict[str, Term] = {x: var(x) for x in self.inputs}
        for name, rhs in self.equations:
            if rhs.op == "var":
                defs[name] = defs[rhs.name]
            else:
                defs[name] = Term(rhs.op, tuple(defs[a.name] for a in rhs.args))
        return defs[self.output]

    def to_json(self) -> dict:
        return {"inputs": list(self.inputs), "output": self.output, "signature": str(self.sig),
                "equations": [[n, print_term(r)] for n, r in self.equations]}

    @classmethod
    def from_json(cls, obj: dict) -> "UnnestedTerm":
        sig = Signature.parse(obj.get("signature", "lattice"))
        eqs = tuple((n, parse_term(r, sig)) for n, r in obj["equations"])
        return cls(tuple(obj["inputs"]), eqs, obj["output"], sig)

    def __str__(self):
        body = "; ".join(f"{n} = {print_term(r)}" for n, r in self.equations)
        return f"[{body}] -> {self.output}"


class FreshNames:
    """Supplier of auxiliary names ``_u1, _u2, ...`` avoiding a given set."""

    def __init__(self, avoid: Iterable[str] = (), prefix: str = AUX_PREFIX):
        self.avoid = set(avoid)
        self.prefix = prefix
        self.n = 0

    def __call__(self) -> str:
        while True:
            self.n += 1
            name = f"{self.prefix}{self.n}"
            if name not in self.avoid:
                return name


def unnest(t: Term, inputs: Sequence[str] | None = None, sig: Signature = LATTICE,
           share: bool = False, fresh: FreshNames | None = None) -> UnnestedTerm:
    """θ(t): one basic equation per operation or constant node of the tree.

    In tree mode every occurrence gets its own equation, so variable
    occurrences are preserved exactly.  ``share=True`` emits one equation per
    distinct DAG node instead; this is what generated terms need, at the price
    of the occurrence count.
    """
    if inputs is None:
        inputs = variables(t)
    inputs = tuple(dict.fromkeys(inputs))
    missing = set(variables(t)) - set(inputs)
    if missing:
        raise TermError(f"variables {sorted(missing)} not among the inputs")
    fresh = fresh or FreshNames(inputs)
    if t.op == "var":
        return UnnestedTerm(inputs, (), t.name, sig)
    eqs: list = []
    if share:
        names: dict[int, str] = {}
        for n in postorder(t):
            if n.op == "var":
                names[id(n)] = n.name
                continue
            y = fresh()
            eqs.append((y, Term(n.op, tuple(var(names[id(a)]) for a in n.args))))
            names[id(n)] = y
        return UnnestedTerm(inputs, tuple(eqs), names[id(t)], sig)
    # tree mode: explicit stack over occurrences
    stack: list = [(t, False)]
    results: list[str] = []
    while stack:
        n, done = stack.pop()
        if n.op == "var":
            results.append(n.name)
            continue
        if not done:
            stack.append((n, True))
            for a in reversed(n.args):
                stack.append((a, False))
            continue
        k = len(n.args)
        argnames = results[len(results) - k:] if k else []
        del results[len(results) - k:]
        y = fresh()
        eqs.append((y, Term(n.op, tuple(var(a) for a in argnames))))
        results.append(y)
    return UnnestedTerm(inputs, tuple(eqs), results[-1], sig)


# --------------------------------------------------------------------------
# normal forms
# --------------------------------------------------------------------------

def _require(eqs: Sequence[Equation], want: Signature):
    for e in eqs:
        for side in (e.left, e.right):
            check_signature(side, want)


def conj_to_single_ol(eqs: Sequence[Equation]) -> Term:
    """A term t with t = 0 iff all equations hold, in any modular ortholattice."""
    _require(eqs, ORTHO)
    parts = [meet(join(e.left, e.right), oc(meet(e.left, e.right))) for e in eqs]
    return join(*parts) if parts else ZERO


def conj_to_single_ring(eqs: Sequence[Equation]) -> Term:
    """A term t with t = 0 iff all t_i = 0, in any *-regular ring: 1 − ∏(1 − t_i t_i⁺)."""
    _require(eqs, STAR)
    prod = None
    for e in eqs:
        ti = e.left if e.right == R0 else rsub(e.left, e.right)
        factor = rsub(R1, rmul(ti, pinv(ti)))
        prod = factor if prod is None else rmul(prod, factor)
    if prod is None:
        return R0
    return rsub(R1, prod)


def sat_to_ssat(eqs: Sequence[Equation], sig: Signature = LATTICE,
                fresh: FreshNames | None = None) -> list[Equation]:
    """Flatten a conjunction of equations to basic equations (variables on the left)."""
    names = set()
    for e in eqs:
        names.update(variables(e.left))
        names.update(variables(e.right))
    fresh = fresh or FreshNames(names)
    out: list[Equation] = []
    for e in eqs:
        if is_basic(e):
            out.append(e)
            continue
        ends = []
        for side in (e.left, e.right):
            if side.op == "var":
                ends.append(side.name)
                continue
            u = unnest(side, variables(side) or (), sig, fresh=fresh)
            out.extend(Equation(var(n), r) for n, r in u.equations)
            ends.append(u.output)
        out.append(Equation(var(ends[0]), var(ends[1])))
    return out


def is_basic(e: Equation) -> bool:
    if e.left.op != "var":
        return False
    r = e.right
    return r.op == "var" or all(a.op == "var" for a in r.args)
