from fractions import Fraction
from itertools import product

from hypothesis import given, settings, strategies as st

from modred.linalg import QQ, FieldSpec, Matrix, Subspace, canonicalize, kernel, pseudoinverse

GF2, GF3 = FieldSpec(2), FieldSpec(3)


def mat(rows, field=QQ):
    return Matrix.of(rows, field)


def cols(vectors, field=QQ):
    return Matrix.from_columns(vectors, len(vectors[0]), field)


small = st.integers(-3, 3)


@st.composite
def subspaces(draw, dim=4, field=QQ):
    k = draw(st.integers(0, dim))
    vecs = [tuple(draw(small) for _ in range(dim)) for _ in range(k)]
    return Subspace.span(vecs, dim, field)


class TestCanonicalize:
    def test_dependent_columns(self):
        u = canonicalize(cols([(1, 1), (2, 2)]))
        assert u.rank == 1
        assert u == Subspace.span([(1, 1)], 2)

    def test_zero_matrix(self):
        assert canonicalize(Matrix.zeros(3, 2)).rank == 0

    def test_gf2_rank(self):
        u = canonicalize(cols([(1, 0, 1), (0, 1, 1), (1, 1, 0)], GF2))
        assert u.rank == 2

    @given(subspaces())
    def test_canonical_form_is_basis_independent(self, u):
        shuffled = Subspace.span(list(reversed([tuple(2 * x for x in r) for r in u.rows])), u.dim)
        assert shuffled.rows == u.rows


class TestSumMeet:
    e = [tuple(int(i == j) for j in range(3)) for i in range(3)]

    def test_neutral(self):
        u = Subspace.span([(1, 2, 3)], 3)
        assert u + Subspace.zero(3) == u

    def test_atoms(self):
        a, b = (Subspace.span([v], 3) for v in self.e[:2])
        assert a + b == Subspace.coordinate([0, 1], 3)
        assert (a & b).is_zero()

    def test_idempotent(self):
        u = Subspace.span([(1, 2, 3), (0, 1, 1)], 3)
        assert u & u == u

    @settings(max_examples=200, deadline=None)
    @given(subspaces(), subspaces())
    def test_modular_dimension_law(self, u, w):
        assert (u + w).rank == u.rank + w.rank - (u & w).rank

    @settings(max_examples=50, deadline=None)
    @given(st.data())
    def test_meet_by_vector_membership_gf3(self, data):
        def draw():
            vecs = [tuple(data.draw(st.integers(0, 2)) for _ in range(4)) for _ in range(2)]
            return Subspace.span(vecs, 4, GF3)
        u, w = draw(), draw()
        both = [v for v in product(range(3), repeat=4) if u.contains(v) and w.contains(v)]
        assert len(both) == 3 ** (u & w).rank
        assert all((u & w).contains(v) for v in both)


class TestOrthocomplement:
    def test_bounds(self):
        assert Subspace.zero(3).orthocomplement().is_full()

    def test_coordinate(self):
        assert Subspace.span([(1, 0, 0)], 3).orthocomplement() == Subspace.coordinate([1, 2], 3)

    def test_kernel_of_row(self):
        want = Subspace.span([(1, -1, 0), (0, 0, 1)], 3)
        assert Subspace.span([(1, 1, 0)], 3).orthocomplement() == want

    @given(subspaces())
    def test_involution_and_complement(self, u):
        v = u.orthocomplement()
        assert v.orthocomplement() == u
        assert (u & v).is_zero() and (u + v).is_full()


def penrose_ok(a, p):
    return (a @ p @ a == a and p @ a @ p == p
            and (a @ p).T == a @ p and (p @ a).T == p @ a)


class TestPseudoinverse:
    def test_zero(self):
        assert pseudoinverse(Matrix.zeros(2, 3)) == Matrix.zeros(3, 2)

    def test_invertible(self):
        a = mat([[2, 1], [1, 1]])
        assert pseudoinverse(a) == a.inverse()

    def test_projection(self):
        a = mat([[1, 0], [0, 0]])
        assert pseudoinverse(a) == a
        assert penrose_ok(a, a)

    def test_rank_one(self):
        a = mat([[1, 1], [1, 1]])
        p = pseudoinverse(a)
        assert p == mat([[Fraction(1, 4)] * 2] * 2)
        assert penrose_ok(a, p)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.lists(small, min_size=3, max_size=3), min_size=2, max_size=4))
    def test_penrose_axioms(self, rows):
        a = mat(rows)
        assert penrose_ok(a, pseudoinverse(a))


class TestKernelImage:
    def test_identity(self):
        assert kernel(Matrix.identity(3)).is_zero()

    def test_image_zero(self):
        assert canonicalize(Matrix.zeros(2, 2)).is_zero()

    def test_rank_one(self):
        a = mat([[1, 1], [1, 1]])
        assert kernel(a) == Subspace.span([(1, -1)], 2)
        assert canonicalize(a) == Subspace.span([(1, 1)], 2)

    def test_gf2_arithmetic(self):
        a = mat([[1, 1], [1, 1]], GF2)
        assert (a @ a).is_zero()
        assert kernel(a) == Subspace.span([(1, 1)], 2, GF2)
