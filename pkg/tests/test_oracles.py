
import pytest
from hypothesis import given, settings, strategies as st

from modred.linalg import QQ, FieldSpec
from modred.oracles import (
    BudgetExceeded, ModelError, ModelSpec, enumerate_frames, enumerate_subspaces, feas_search,
    gaussian_binomial, holds, mo_n, model_search, roundtrip_check, subspace_count,
    subspace_table, two_element, verify,
)
from modred.reductions import Instance, boolean_to_lattice_ref, feas_to_ref_mol
from modred.terms import LATTICE, ORTHO, RING, Signature, parse_equations, parse_term

GF2, GF3 = FieldSpec(2), FieldSpec(3)


def ref(t, s, sig=LATTICE):
    return Instance("REF", sig, [parse_term(t, sig), parse_term(s, sig)])


class TestEnumeration:
    @pytest.mark.parametrize("p,d,count", [(2, 3, 16), (3, 2, 6), (2, 0, 1), (2, 4, 67), (3, 3, 28)])
    def test_counts(self, p, d, count):
        subs = list(enumerate_subspaces(FieldSpec(p), d))
        assert len(subs) == count == subspace_count(d, p)
        assert len(set(subs)) == count

    def test_gaussian_binomials(self):
        assert [gaussian_binomial(3, k, 2) for k in range(4)] == [1, 7, 7, 1]
        assert gaussian_binomial(2, 1, 3) == 4

    def test_zero_dim(self):
        (only,) = enumerate_subspaces(GF2, 0)
        assert only.is_zero()

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            list(enumerate_subspaces(GF3, 4, budget=10))


class TestFiniteLattices:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_mo_axioms(self, n):
        lat = mo_n(n)
        assert len(lat) == 2 * n + 2
        assert not lat.axiom_violations()

    def test_two(self):
        assert len(two_element()) == 2

    def test_subspace_table_is_modular_ortho_free(self):
        lat = subspace_table(GF2, 3)
        assert len(lat) == 16

    def test_frames_gf2(self):
        frames = enumerate_frames(subspace_table(GF2, 3), 3)
        assert len(frames) == 184

    @pytest.mark.parametrize("text", ["mo:0", "lattice:4:2", "ring", "lattice:2"])
    def test_bad_specs(self, text):
        with pytest.raises(ModelError):
            ModelSpec.parse(text)

    def test_spec_roundtrip(self):
        for text in ("two", "mo:4", "lattice:2:3", "endo:0:2"):
            assert str(ModelSpec.parse(text)) == text


class TestModelSearch:
    def test_refutable_in_two(self):
        v = model_search(ref("x", "y"), ModelSpec("two"))
        assert v.answer == "yes" and v.witness == {"x": 0, "y": 1}

    def test_valid_in_mo4(self):
        v = model_search(ref("(^ x (oc x))", "0", ORTHO), ModelSpec("mo", 4))
        assert v.answer == "no"

    def test_modular_law_in_subspaces(self):
        inst = ref("(^ x (+ y z))", "(+ (^ x y) (^ x z))")
        assert model_search(inst, ModelSpec("lattice", field=GF2, dim=2)).answer == "yes"
        assert model_search(ref("(+ x (^ y (+ x z)))", "(^ (+ x y) (+ x z))"),
                            ModelSpec("lattice", field=GF2, dim=3)).answer == "no"

    def test_gadget_witness(self):
        inst, wmap = boolean_to_lattice_ref(parse_term("(^ x1 (+ x2 (oc x1)))", ORTHO))
        v = model_search(inst, ModelSpec("two"))
        assert v.answer == "yes" and verify(inst, ModelSpec("two"), v.witness)
        w = wmap.forward({"x1": 1, "x2": 1})
        assert holds(inst, ModelSpec("two").algebra(), w)

    def test_sat_with_bounds(self):
        inst = Instance("SAT", LATTICE, parse_equations("(= x (+ x y)) (= x y)"))
        assert model_search(inst, ModelSpec("mo", 3)).answer == "yes"

    def test_sat_without_bounds_needs_nonconstant(self):
        sig = Signature("lattice", False)
        inst = Instance("SAT", sig, parse_equations("(= x (+ x y)) (= x y)", sig))
        assert model_search(inst, ModelSpec("mo", 3)).answer == "no"
        inst = Instance("SAT", sig, parse_equations("(= x (+ x y))", sig))
        v = model_search(inst, ModelSpec("two"))
        assert v.answer == "yes" and v.witness == {"x": 1, "y": 0}

    def test_random_mode_seed(self):
        v = model_search(ref("x", "y"), ModelSpec("lattice", field=QQ, dim=2), mode="random", budget=50, seed=9)
        assert v.answer == "yes" and v.seed == 9

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            model_search(ref("(+ x (+ y z))", "x"), ModelSpec("lattice", field=GF3, dim=3), budget=100)

    def test_deterministic(self):
        inst = ref("(^ x (+ y z))", "(+ (^ x y) (^ x z))")
        m = ModelSpec("mo", 3)
        assert model_search(inst, m).to_json() == model_search(inst, m).to_json()


class TestFeas:
    def test_gf2_no_root(self):
        assert feas_search([parse_term("(r+ (r* x x) (r+ x r1))", RING)], GF2).answer == "no"

    def test_gf3_root(self):
        v = feas_search([parse_term("(r+ (r* x x) (r+ x r1))", RING)], GF3)
        assert v.answer == "yes" and v.witness == {"x": 1}

    def test_empty(self):
        assert feas_search([], GF2).answer == "yes"

    def test_rational_grid(self):
        v = feas_search([parse_term("(r- (r* x x) r1)", RING)], QQ, mode="grid", budget=100)
        assert v.answer == "yes" and v.witness["x"] ** 2 == 1

    def test_rational_exhaustive_rejected(self):
        with pytest.raises(ModelError):
            feas_search([parse_term("x", RING)], QQ)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=3))
    def test_against_brute_force(self, coeffs):
        # a*x*y + b*y + c over GF(3), one polynomial per triple, shared x, y
        polys = []
        for a, b, c in coeffs:
            polys.append(parse_term(f"(r+ (r* {_int(a)} (r* x y)) (r+ (r* {_int(b)} y) {_int(c)}))", RING))
        v = feas_search(polys, GF3)
        brute = [(x, y) for x in range(3) for y in range(3)
                 if all((a * x * y + b * y + c) % 3 == 0 for a, b, c in coeffs)]
        assert (v.answer == "yes") == bool(brute)
        if brute:
            # variables with zero coefficients drop out and are unconstrained
            assert (v.witness.get("x", 0), v.witness.get("y", 0)) in brute


def _int(n):
    return {0: "r0", 1: "r1", 2: "(r+ r1 r1)"}[n]


class TestRoundtrip:
    def test_gadget_double_exhaustive(self):
        t = parse_term("(+ (^ x1 x2) (^ (oc x1) (oc x2)))", ORTHO)
        src = Instance("REF", ORTHO, [t, parse_term("0", ORTHO)])
        inst, wmap = boolean_to_lattice_ref(t)
        rep = roundtrip_check(src, ModelSpec("two"), inst, wmap, ModelSpec("two"))
        assert rep["ok"] and rep["agreement"] and rep["forward"] and rep["backward"]

    def test_mol_forward(self):
        inst, wmap = feas_to_ref_mol([parse_term("(r- (r* x x) r1)", RING)])
        w = wmap.forward({"x": 1})
        assert verify(inst, ModelSpec("lattice", field=QQ, dim=3), w)

    def test_identity_both_no(self):
        a = ref("(+ x y)", "(+ y x)")
        rep = roundtrip_check(a, ModelSpec("two"), a, _Identity(), ModelSpec("two"))
        assert rep["source"]["answer"] == rep["target"]["answer"] == "no" and rep["ok"]


class _Identity:
    forward = backward = staticmethod(lambda w: w)
