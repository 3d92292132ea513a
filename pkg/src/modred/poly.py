"""Sparse commutative polynomials with integer coefficients.

Used for FEAS instances: ring terms over scalar variables are expanded into
:class:`Poly` for evaluation and search, and polynomials built by the
encodings are printed back as ring terms.
"""

from __future__ import annotations

from typing import Iterable, Mapping

from .terms import R0, Term, TermError, fold, radd, ring_int, rmul, rsub, var


class Poly:
    """Map from monomials (sorted tuples of variable names) to nonzero ints."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[tuple, int] | None = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c}

    @classmethod
    def const(cls, c: int) -> "Poly":
        return cls({(): c})

    @classmethod
    def var(cls, name: str) -> "Poly":
        return cls({(name,): 1})

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(sorted(m1 + m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    def variables(self) -> set:
        return {v for m in self.terms for v in m}

    def evaluate(self, env: Mapping[str, object], mod: int = 0):
        total = 0
        for m, c in self.terms.items():
            v = c
            for x in m:
                v = v * env[x]
            total = total + v
        return total % mod if mod else total

    def substitute(self, name: str, value, mod: int = 0) -> "Poly":
        """Set one variable to a constant."""
        out: dict = {}
        for m, c in self.terms.items():
            e = m.count(name)
            if e:
                c = c * value ** e
                m = tuple(x for x in m if x != name)
            out[m] = out.get(m, 0) + c
        p = Poly(out)
        return p.reduce(mod) if mod else p

    def constant(self):
        return self.terms.get((), 0)

    def reduce(self, mod: int) -> "Poly":
        if not mod:
            return self
        return Poly({m: c % mod for m, c in self.terms.items()})

    def to_term(self) -> Term:
        parts = []
        for m in sorted(self.terms):
            c = self.terms[m]
            mono = rmul(*[var(x) for x in m]) if m else None
            coeff = ring_int(abs(c))
            t = coeff if mono is None else (mono if abs(c) == 1 else rmul(coeff, mono))
            parts.append((c < 0, t))
        if not parts:
            return R0
        neg, acc = parts[0]
        if neg:
            acc = rsub(R0, acc)
        for neg, t in parts[1:]:
            acc = rsub(acc, t) if neg else radd(acc, t)
        return acc

    def __repr__(self):
        if not self.terms:
            return "0"
        out = []
        for m in sorted(self.terms):
            c = self.terms[m]
            out.append(("" if c == 1 and m else str(c) + ("*" if m else "")) + "*".join(m))
        return " + ".join(out)


def from_term(t: Term) -> Poly:
    """Expand a ring term (r+, r-, r*, r0, r1) into a polynomial."""
    def leaf(n):
        if n.op == "var":
            return Poly.var(n.name)
        if n.op == "r0":
            return Poly()
        if n.op == "r1":
            return Poly.const(1)
        raise TermError(f"{n.op!r} is not a commutative ring constant")

    def node(n, cs):
        if n.op == "r+":
            return cs[0] + cs[1]
        if n.op == "r-":
            return cs[0] - cs[1]
        if n.op == "r*":
            return cs[0] * cs[1]
        raise TermError(f"{n.op!r} has no polynomial reading")

    return fold(t, leaf, node)


def sum_of_squares(polys: Iterable[Term]) -> Term:
    """Σ p_i² as a ring term (p_i kept as subterms)."""
    acc = None
    for p in polys:
        sq = rmul(p, p)
        acc = sq if acc is None else radd(acc, sq)
    return acc if acc is not None else R0
