import random
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from modred.linalg import Matrix, Subspace
from modred.models import MatrixRing, SubspaceLattice, TwoElement
from modred.selftest import random_term
from modred.terms import (
    LATTICE, ORTHO, RING, STAR, Equation, TermError, UnboundVariable,
    conj_to_single_ol, conj_to_single_ring, evaluate, is_basic, join, meet, node_count,
    oc, occurrences, parse_equations, parse_term, pinv, adj, print_term, sat_to_ssat,
    unnest, var, variables,
)

x, y, z = var("x"), var("y"), var("z")


def op_nodes(t):
    return node_count(t) - sum(1 for n in _walk(t) if n.op == "var")


def sized_term(n, rng):
    """Random ortholattice term with exactly n operation nodes."""
    if n == 0:
        return var(rng.choice("xyz"))
    if n == 1 and rng.random() < 0.3:
        return parse_term(rng.choice("01"), ORTHO)
    if rng.random() < 0.25:
        return oc(sized_term(n - 1, rng))
    k = rng.randrange(n)
    f = join if rng.random() < 0.5 else meet
    return f(sized_term(k, rng), sized_term(n - 1 - k, rng))


def _walk(t):
    stack = [t]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(n.args)


class TestParse:
    def test_lattice(self):
        assert parse_term("(+ x (^ y z))", LATTICE) == join(x, meet(y, z))

    def test_ortho_constant(self):
        t = parse_term("(oc 0)", ORTHO)
        assert t.op == "oc" and t.args[0].op == "0"

    def test_star(self):
        assert parse_term("(pinv (adj x))", STAR) == pinv(adj(x))

    def test_roundtrip_print(self):
        text = "(+ x (^ y (oc z)))"
        assert print_term(parse_term(text, ORTHO)) == text

    @pytest.mark.parametrize("bad,sig", [("(oc x)", LATTICE), ("(+ x)", LATTICE),
                                         ("(r* x y", RING), ("(pinv x)", RING)])
    def test_rejects(self, bad, sig):
        with pytest.raises(TermError):
            parse_term(bad, sig)

    def test_equations_with_comments(self):
        eqs = parse_equations("; header\n(= x (+ y z)) (= (^ x y)\n 0)")
        assert len(eqs) == 2 and eqs[1].right.op == "0"


class TestUnnest:
    def test_variable(self):
        u = unnest(x)
        assert u.equations == () and u.output == "x"

    def test_two_steps(self):
        u = unnest(join(x, meet(y, z)))
        assert [r for _, r in u.equations] == [meet(y, z), join(x, var(u.equations[0][0]))]
        assert u.output == u.equations[1][0]

    def test_evaluation_agrees(self):
        t = join(x, meet(y, oc(z)))
        alg = SubspaceLattice(3)
        env = {"x": Subspace.span([(1, 0, 0)], 3), "y": Subspace.span([(0, 1, 1)], 3),
               "z": Subspace.span([(0, 1, 0)], 3)}
        assert unnest(t, sig=ORTHO).evaluate(alg, env) == evaluate(t, alg, env)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_size_and_occurrences(self, seed):
        t = sized_term(17, random.Random(seed))
        assert op_nodes(t) == 17
        u = unnest(t, sig=ORTHO)
        assert len(u.equations) <= 17
        assert occurrences(u) == occurrences(t)


class TestOccurrences:
    def test_repeated(self):
        assert occurrences(join(var("x1"), var("x1")), ["x1"]) == 2

    def test_absent_counts_once(self):
        assert occurrences(var("x1"), ["x1", "x2"]) == 2


class TestSingleIdentity:
    def test_reflexive_is_zero(self):
        t = conj_to_single_ol([Equation(x, x)])
        alg = SubspaceLattice(2)
        for v in [(1, 0), (1, 1), (2, -1)]:
            assert evaluate(t, alg, {"x": Subspace.span([v], 2)}).is_zero()

    def test_two_equations_shape(self):
        s, t, u, v = (var(n) for n in "stuv")
        want = join(meet(join(s, t), oc(meet(s, t))), meet(join(u, v), oc(meet(u, v))))
        assert conj_to_single_ol([Equation(s, t), Equation(u, v)]) == want

    def test_detects_inequality(self):
        t = conj_to_single_ol([Equation(x, y)])
        env = {"x": Subspace.span([(1, 0)], 2), "y": Subspace.span([(0, 1)], 2)}
        assert not evaluate(t, SubspaceLattice(2), env).is_zero()

    def test_two_element_exhaustive(self):
        t = conj_to_single_ol([Equation(x, y), Equation(meet(x, z), z)])
        for a, b, c in product((0, 1), repeat=3):
            holds = a == b and (a & c) == c
            assert (evaluate(t, TwoElement(), {"x": a, "y": b, "z": c}) == 0) == holds

    def test_ring_zero_case(self):
        r0 = parse_term("r0", STAR)
        t = conj_to_single_ring([Equation(r0, r0)])
        assert print_term(t) == "(r- r1 (r- r1 (r* r0 (pinv r0))))"
        assert evaluate(t, MatrixRing(2), {}).is_zero()

    def test_ring_identity(self):
        t = conj_to_single_ring([Equation(x, parse_term("r0", STAR))])
        assert evaluate(t, MatrixRing(2), {"x": Matrix.identity(2)}) == Matrix.identity(2)

    def test_ring_conjunction(self):
        r0 = parse_term("r0", STAR)
        t = conj_to_single_ring([Equation(x, r0), Equation(y, r0)])
        ring = MatrixRing(2)
        e11 = Matrix.of([[1, 0], [0, 0]])
        e22 = Matrix.of([[0, 0], [0, 1]])
        assert evaluate(t, ring, {"x": ring.zero, "y": ring.zero}).is_zero()
        assert not evaluate(t, ring, {"x": e11, "y": ring.zero}).is_zero()
        assert not evaluate(t, ring, {"x": e11, "y": e22}).is_zero()


class TestSatToSsat:
    def test_basic_unchanged(self):
        assert sat_to_ssat([Equation(x, y)]) == [Equation(x, y)]

    def test_flattened(self):
        out = sat_to_ssat(parse_equations("(= x (+ y (^ z x)))"))
        assert all(is_basic(e) for e in out)
        assert len(out) == 3

    def test_equisatisfiable_over_two(self):
        rng = random.Random(7)
        alg = TwoElement()
        for _ in range(20):
            eqs = [Equation(random_term(ORTHO, ["x", "y"], 3, rng), random_term(ORTHO, ["x", "y"], 3, rng))
                   for _ in range(2)]
            flat = sat_to_ssat(eqs, ORTHO)
            src = sorted({v for e in eqs for v in variables(e.left) + variables(e.right)})
            assert sat(eqs, src, alg) == sat_flat(flat, src, alg)


def holds_all(es, env, alg):
    return all(evaluate(e.left, alg, env) == evaluate(e.right, alg, env) for e in es)


def sat(es, names, alg):
    return any(holds_all(es, dict(zip(names, bits)), alg)
               for bits in product((0, 1), repeat=len(names)))


def sat_flat(flat, names, alg):
    # every auxiliary is the left side of exactly one defining equation, in order,
    # so each assignment of the source variables extends in exactly one way
    aux = {e.left.name for e in flat} - set(names)
    for bits in product((0, 1), repeat=len(names)):
        env = dict(zip(names, bits))
        for e in flat:
            if e.left.name in aux and e.left.name not in env:
                env[e.left.name] = evaluate(e.right, alg, env)
        if holds_all(flat, env, alg):
            return True
    return False


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        evaluate(join(x, y), TwoElement(), {"x": 1})
