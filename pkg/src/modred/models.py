"""Concrete algebras for term evaluation.

* :class:`SubspaceLattice` -- L(F^d), with orthocomplement when F = Q.
* :class:`MatrixRing` -- End(F^n) with transpose as involution and Moore-Penrose inverse.
* :class:`TwoElement` -- the two-element (ortho)lattice on {0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass

from .linalg import QQ, FieldSpec, Matrix, Subspace, pseudoinverse
from .terms import Algebra


class SubspaceLattice(Algebra):
    def __init__(self, dim: int, field: FieldSpec = QQ):
        self.dim = dim
        self.field = field
        self.bottom = Subspace.zero(dim, field)
        self.top = Subspace.full(dim, field)
        self.ops = {"+": Subspace.__add__, "^": Subspace.__and__}
        if field.rational:
            self.ops["oc"] = Subspace.orthocomplement
        self.consts = {"0": self.bottom, "1": self.top}

    def __repr__(self):
        return f"L({self.field}^{self.dim})"


class MatrixRing(Algebra):
    def __init__(self, n: int, field: FieldSpec = QQ):
        self.n = n
        self.field = field
        self.zero = Matrix.zeros(n, n, field)
        self.one = Matrix.identity(n, field)
        self.ops = {"r+": Matrix.__add__, "r-": Matrix.__sub__, "r*": Matrix.__matmul__}
        if field.rational:
            self.ops["adj"] = lambda a: a.T
            self.ops["pinv"] = pseudoinverse
        self.consts = {"r0": self.zero, "r1": self.one}

    def __repr__(self):
        return f"End({self.field}^{self.n})"


@dataclass
class TwoElement(Algebra):
    """{0, 1} as a Boolean (ortho)lattice; also the Boolean semiring reading of terms."""

    def __post_init__(self):
        self.ops = {"+": lambda a, b: a | b, "^": lambda a, b: a & b, "oc": lambda a: 1 - a}
        self.consts = {"0": 0, "1": 1}
