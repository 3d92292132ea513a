"""Exact matrices and canonical subspaces over GF(p) and the rationals.

Scalars are python ints reduced mod p, or ``gmpy2.mpq`` in characteristic 0.
A :class:`Subspace` stores the reduced row echelon form of its basis vectors
(equivalently the reduced column echelon form of the basis matrix), so two
subspaces are equal exactly when their representations are equal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from gmpy2 import mpq


class LinalgError(ValueError):
    pass


class UnsupportedOperation(LinalgError):
    """Raised for operations that need the positive definite form of Q^d."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class FieldSpec:
    char: int = 0

    def __post_init__(self):
        if self.char != 0 and not _is_prime(self.char):
            raise LinalgError(f"characteristic {self.char} is not prime")

    @property
    def rational(self) -> bool:
        return self.char == 0

    def __call__(self, x):
        """Coerce ``x`` (int, Fraction, mpq, or 'num/den' string) into the field."""
        if self.char == 0:
            if isinstance(x, str):
                return mpq(x)
            if isinstance(x, Fraction):
                return mpq(x.numerator, x.denominator)
            return mpq(x)
        if isinstance(x, str):
            x = Fraction(x)
        if isinstance(x, (Fraction, type(mpq(0)))):
            num, den = int(x.numerator), int(x.denominator)
            if den % self.char == 0:
                raise LinalgError(f"{x} has no image in GF({self.char})")
            return num * pow(den, -1, self.char) % self.char
        return int(x) % self.char

    def inv(self, x):
        if x == 0:
            raise ZeroDivisionError("inverse of 0")
        if self.char == 0:
            return 1 / x
        return pow(int(x), -1, self.char)

    def fmt(self, x) -> str:
        if self.char == 0:
            return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
        return str(int(x))

    def to_json(self) -> dict:
        return {"char": self.char}

    @classmethod
    def from_json(cls, obj: dict) -> "FieldSpec":
        return cls(int(obj["char"]))

    def __str__(self):
        return "Q" if self.char == 0 else f"GF({self.char})"


QQ = FieldSpec(0)


# --------------------------------------------------------------------------
# row reduction on lists of lists
# --------------------------------------------------------------------------

def rref_rows(rows: list[list], field: FieldSpec, ncols: int | None = None):
    """Reduced row echelon form in place; returns (nonzero rows, pivot columns).

    Only the first ``ncols`` columns are used for pivoting (all by default).
    """
    if not rows:
        return [], []
    width = len(rows[0])
    ncols = width if ncols is None else ncols
    p = field.char
    pivots = []
    r = 0
    nrows = len(rows)
    for c in range(ncols):
        piv = None
        for i in range(r, nrows):
            if rows[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        prow = rows[r]
        lead = prow[c]
        if lead != 1:
            if p:
                iv = pow(int(lead), -1, p)
                prow = [v * iv % p for v in prow]
            else:
                prow = [v / lead for v in prow]
            rows[r] = prow
        for i in range(nrows):
            if i != r:
                row = rows[i]
                f = row[c]
                if f != 0:
                    if p:
                        rows[i] = [(a - f * b) % p for a, b in zip(row, prow)]
                    else:
                        rows[i] = [a - f * b for a, b in zip(row, prow)]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return rows[:r], pivots


# --------------------------------------------------------------------------
# matrices
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Matrix:
    field: FieldSpec
    rows: int
    cols: int
    entries: tuple  # tuple of row tuples

    @classmethod
    def of(cls, data: Sequence[Sequence], field: FieldSpec = QQ, cols: int | None = None) -> "Matrix":
        data = [list(r) for r in data]
        n = len(data)
        m = len(data[0]) if n else (cols or 0)
        if any(len(r) != m for r in data):
            raise LinalgError("ragged matrix")
        return cls(field, n, m, tuple(tuple(field(x) for x in r) for r in data))

    @classmethod
    def zeros(cls, n: int, m: int, field: FieldSpec = QQ) -> "Matrix":
        z = field(0)
        return cls(field, n, m, tuple((z,) * m for _ in range(n)))

    @classmethod
    def identity(cls, n: int, field: FieldSpec = QQ) -> "Matrix":
        z, o = field(0), field(1)
        return cls(field, n, n, tuple(tuple(o if i == j else z for j in range(n)) for i in range(n)))

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence], nrows: int, field: FieldSpec = QQ) -> "Matrix":
        if not columns:
            return cls.zeros(nrows, 0, field)
        return cls(field, nrows, len(columns),
                   tuple(tuple(field(c[i]) for c in columns) for i in range(nrows)))

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def column(self, j: int) -> tuple:
        return tuple(r[j] for r in self.entries)

    def columns(self) -> list[tuple]:
        return [self.column(j) for j in range(self.cols)]

    @property
    def T(self) -> "Matrix":
        return Matrix(self.field, self.cols, self.rows,
                      tuple(tuple(self.entries[i][j] for i in range(self.rows)) for j in range(self.cols)))

    def _check(self, other: "Matrix"):
        if self.field != other.field:
            raise LinalgError("field mismatch")

    def _norm(self, v):
        return v % self.field.char if self.field.char else v

    def __add__(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise LinalgError("shape mismatch")
        return Matrix(self.field, self.rows, self.cols, tuple(
            tuple(self._norm(a + b) for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries)))

    def __neg__(self) -> "Matrix":
        return Matrix(self.field, self.rows, self.cols,
                      tuple(tuple(self._norm(-a) for a in r) for r in self.entries))

    def __sub__(self, other: "Matrix") -> "Matrix":
        return self + (-other)

    def scale(self, c) -> "Matrix":
        c = self.field(c)
        return Matrix(self.field, self.rows, self.cols,
                      tuple(tuple(self._norm(c * a) for a in r) for r in self.entries))

    def __matmul__(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if self.cols != other.rows:
            raise LinalgError(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        cols = other.columns()
        z = self.field(0)
        out = []
        for r in self.entries:
            row = []
            for c in cols:
                s = z
                for a, b in zip(r, c):
                    if a and b:
                        s = s + a * b
                row.append(self._norm(s))
            out.append(tuple(row))
        return Matrix(self.field, self.rows, other.cols, tuple(out))

    def hstack(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if self.rows != other.rows:
            raise LinalgError("row count mismatch")
        return Matrix(self.field, self.rows, self.cols + other.cols,
                      tuple(r + s for r, s in zip(self.entries, other.entries)))

    def vstack(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if self.cols != other.cols:
            raise LinalgError("column count mismatch")
        return Matrix(self.field, self.rows + other.rows, self.cols, self.entries + other.entries)

    def block(self, r0: int, r1: int, c0: int, c1: int) -> "Matrix":
        return Matrix(self.field, r1 - r0, c1 - c0, tuple(r[c0:c1] for r in self.entries[r0:r1]))

    def is_zero(self) -> bool:
        return all(a == 0 for r in self.entries for a in r)

    def rank(self) -> int:
        return len(rref_rows([list(r) for r in self.entries], self.field)[1])

    def inverse(self) -> "Matrix":
        n = self.rows
        if n != self.cols:
            raise LinalgError("inverse of a non-square matrix")
        aug = self.hstack(Matrix.identity(n, self.field))
        red, piv = rref_rows([list(r) for r in aug.entries], self.field, ncols=n)
        if len(piv) < n:
            raise LinalgError("matrix is singular")
        return Matrix(self.field, n, n, tuple(tuple(r[n:]) for r in red))

    def solve(self, rhs: "Matrix") -> "Matrix | None":
        """Some X with self @ X == rhs, free parameters set to zero; None if unsolvable."""
        self._check(rhs)
        n, m = self.cols, rhs.cols
        aug = [list(r) + list(s) for r, s in zip(self.entries, rhs.entries)]
        red, piv = rref_rows(aug, self.field, ncols=n)
        for r in red:
            if all(v == 0 for v in r[:n]):
                return None
        z = self.field(0)
        sol = [[z] * m for _ in range(n)]
        for r, c in zip(red, piv):
            sol[c] = list(r[n:])
        return Matrix(self.field, n, m, tuple(tuple(r) for r in sol))

    def to_json(self) -> dict:
        return {"format": 1, "field": self.field.to_json(), "rows": self.rows, "cols": self.cols,
                "entries": [[self.field.fmt(a) for a in r] for r in self.entries]}

    @classmethod
    def from_json(cls, obj: dict) -> "Matrix":
        field = FieldSpec.from_json(obj["field"])
        return cls.of(obj["entries"], field, cols=obj.get("cols"))

    def __str__(self):
        return "[" + "; ".join(" ".join(self.field.fmt(a) for a in r) for r in self.entries) + "]"


# --------------------------------------------------------------------------
# subspaces
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Subspace:
    field: FieldSpec
    dim: int
    rows: tuple  # reduced echelon basis vectors, one tuple per basis vector

    @classmethod
    def span(cls, vectors: Iterable[Sequence], dim: int, field: FieldSpec = QQ) -> "Subspace":
        vecs = [[field(x) for x in v] for v in vectors]
        if any(len(v) != dim for v in vecs):
            raise LinalgError("vector length does not match ambient dimension")
        red, _ = rref_rows(vecs, field)
        return cls(field, dim, tuple(tuple(r) for r in red))

    @classmethod
    def zero(cls, dim: int, field: FieldSpec = QQ) -> "Subspace":
        return cls(field, dim, ())

    @classmethod
    def full(cls, dim: int, field: FieldSpec = QQ) -> "Subspace":
        z, o = field(0), field(1)
        return cls(field, dim, tuple(tuple(o if i == j else z for j in range(dim)) for i in range(dim)))

    @classmethod
    def coordinate(cls, indices: Iterable[int], dim: int, field: FieldSpec = QQ) -> "Subspace":
        """Span of the standard basis vectors e_i, i in ``indices`` (0-based)."""
        vecs = []
        for i in indices:
            v = [0] * dim
            v[i] = 1
            vecs.append(v)
        return cls.span(vecs, dim, field)

    @property
    def rank(self) -> int:
        return len(self.rows)

    @property
    def basis(self) -> Matrix:
        """Basis as a dim x rank matrix in reduced column echelon form."""
        return Matrix(self.field, self.dim, self.rank,
                      tuple(tuple(r[i] for r in self.rows) for i in range(self.dim)))

    def is_zero(self) -> bool:
        return not self.rows

    def is_full(self) -> bool:
        return len(self.rows) == self.dim

    def _check(self, other: "Subspace"):
        if self.field != other.field or self.dim != other.dim:
            raise LinalgError(f"subspaces of {self.field}^{self.dim} and {other.field}^{other.dim}")

    def __add__(self, other: "Subspace") -> "Subspace":
        self._check(other)
        if not other.rows or self.is_full():
            return self
        if not self.rows or other.is_full():
            return other
        red, _ = rref_rows([list(r) for r in self.rows + other.rows], self.field)
        return Subspace(self.field, self.dim, tuple(tuple(r) for r in red))

    join = __add__

    def __and__(self, other: "Subspace") -> "Subspace":
        """Intersection by the Zassenhaus block method."""
        self._check(other)
        if not self.rows or other.is_full():
            return self
        if not other.rows or self.is_full():
            return other
        if self == other:
            return self
        d = self.dim
        z = [self.field(0)] * d
        block = [list(u) + list(u) for u in self.rows] + [list(w) + z for w in other.rows]
        red, piv = rref_rows(block, self.field)
        low = [r[d:] for r, c in zip(red, piv) if c >= d]
        red2, _ = rref_rows(low, self.field)
        return Subspace(self.field, d, tuple(tuple(r) for r in red2))

    meet = __and__

    def __le__(self, other: "Subspace") -> bool:
        self._check(other)
        if self.rank > other.rank:
            return False
        return (self + other).rank == other.rank

    def __lt__(self, other: "Subspace") -> bool:
        return self <= other and self != other

    def contains(self, v: Sequence) -> bool:
        return Subspace.span([v], self.dim, self.field) <= self

    def orthocomplement(self) -> "Subspace":
        if not self.field.rational:
            raise UnsupportedOperation("orthocomplement needs characteristic 0")
        return _nullspace_of_rows(self.rows, self.dim, self.field)

    perp = orthocomplement

    def vectors(self) -> list[tuple]:
        return list(self.rows)

    def to_json(self) -> dict:
        out = self.basis.to_json()
        out["kind"] = "subspace"
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Subspace":
        return image(Matrix.from_json(obj))

    def __str__(self):
        if not self.rows:
            return f"0<{self.dim}>"
        f = self.field.fmt
        return "<" + ", ".join("(" + ",".join(f(a) for a in r) + ")" for r in self.rows) + ">"

    __repr__ = __str__


def _nullspace_of_rows(rows, n: int, field: FieldSpec) -> Subspace:
    """{v : r . v = 0 for every r in rows}."""
    red, piv = rref_rows([list(r) for r in rows], field)
    pivset = set(piv)
    z, o = field(0), field(1)
    vecs = []
    for f in range(n):
        if f in pivset:
            continue
        v = [z] * n
        v[f] = o
        for r, c in zip(red, piv):
            v[c] = field(-r[f])
        vecs.append(v)
    return Subspace.span(vecs, n, field)


def canonicalize(a: Matrix) -> Subspace:
    """Span of the columns of ``a``."""
    return Subspace.span(a.columns(), a.rows, a.field)


image = canonicalize


def kernel(a: Matrix) -> Subspace:
    return _nullspace_of_rows(a.entries, a.cols, a.field)


def pseudoinverse(a: Matrix) -> Matrix:
    """Moore-Penrose inverse via a full-rank factorization a = B C."""
    if not a.field.rational:
        raise UnsupportedOperation("pseudoinverse needs characteristic 0")
    red, piv = rref_rows([list(r) for r in a.entries], a.field)
    if not piv:
        return Matrix.zeros(a.cols, a.rows, a.field)
    b = Matrix(a.field, a.rows, len(piv), tuple(tuple(r[c] for c in piv) for r in a.entries))
    c = Matrix(a.field, len(piv), a.cols, tuple(tuple(r) for r in red))
    return c.T @ (c @ c.T).inverse() @ (b.T @ b).inverse() @ b.T


def projection(u: Subspace) -> Matrix:
    """Orthogonal projection matrix onto ``u`` (characteristic 0)."""
    if not u.field.rational:
        raise UnsupportedOperation("orthogonal projection needs characteristic 0")
    if u.is_zero():
        return Matrix.zeros(u.dim, u.dim, u.field)
    b = u.basis
    return b @ (b.T @ b).inverse() @ b.T


def basis_matrix(u: Subspace, cols: int | None = None) -> Matrix:
    """Basis matrix of ``u`` padded with zero columns up to ``cols``."""
    b = u.basis
    cols = u.dim if cols is None else cols
    if b.cols > cols:
        raise LinalgError("rank exceeds requested column count")
    if b.cols < cols:
        b = b.hstack(Matrix.zeros(u.dim, cols - b.cols, u.field))
    return b
