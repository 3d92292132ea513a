import json
import subprocess
import sys

import pytest

from modred.cli import main
from modred.coord import DEFAULT_LIBRARY
from modred.linalg import FieldSpec
from modred.reductions import Instance
from modred.terms import RING, parse_term


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


class TestTranslate:
    def test_bool_to_ref2(self, capsys, files):
        code, out, _ = run(capsys, "translate", "--from", "bool", "--to", "ref-2",
                           "-i", files("t.sexp", "(^ x1 (+ x2 (oc x1)))"))
        inst = out["instance"]
        assert code == 0 and inst["kind"] == "REF"
        assert inst["meta"]["y"] == ["_y1", "_y2"]

    def test_feas_to_mol(self, capsys, files):
        code, out, _ = run(capsys, "translate", "--from", "feas", "--to", "ref-mol",
                           "-i", files("p.sexp", "(r- (r* x x) r1)"))
        assert code == 0 and out["instance"]["origin"]["reduction"] == "feas_to_ref_mol"

    def test_uref_to_feas_dimension(self, capsys, files):
        code, out, _ = run(capsys, "translate", "--from", "uref-ol", "--to", "feas",
                           "-i", files("T.sexp", "(^ (+ x y) z)"))
        assert code == 0 and out["instance"]["kind"] == "FEAS" and out["instance"]["origin"]["d"] == 3

    def test_output_file_feeds_oracle(self, capsys, files, tmp_path):
        dst = str(tmp_path / "eps.json")
        assert main(["translate", "--from", "bool", "--to", "ref-2", "-i", files("t.sexp", "x1"),
                     "-o", dst]) == 0
        capsys.readouterr()
        code, out, _ = run(capsys, "oracle", "-i", dst, "--model", "two")
        assert code == 0 and out["answer"] == "yes"

    def test_unknown_translation(self, capsys, files):
        code, _, err = run(capsys, "translate", "--from", "bool", "--to", "feas", "-i", files("t", "x"))
        assert code == 2 and "modred:" in err


class TestEval:
    def test_complement_law(self, capsys, files):
        code, out, _ = run(capsys, "eval", "--term", "(+ x (oc x))", "--model", "lattice:0:2",
                           "--assign", files("a.json", json.dumps({"x": [[1, 3]]})))
        assert code == 0 and out["rank"] == 2

    def test_discriminator(self, capsys):
        code, out, _ = run(capsys, "eval", "--term", "(@delta3 z2)", "--model", "lattice:2:3", "--frame", "3")
        assert code == 0 and out["rank"] == 3
        code, out, _ = run(capsys, "eval", "--term", "(@delta3 0)", "--model", "lattice:2:3", "--frame", "3")
        assert code == 0 and out["rank"] == 0

    def test_library_mul_matches_matrix(self, capsys, files):
        # ω(2) = span(e1 - 2 e2), ω(3) = span(e1 - 3 e2) on the standard frame of Q³
        assign = files("a.json", json.dumps({"x": [[1, -2, 0]], "y": [[1, -3, 0]]}))
        code, out, _ = run(capsys, "eval", "--term", "(@mul x y)", "--model", "lattice:0:3",
                           "--frame", "3", "--assign", assign)
        assert code == 0 and out["rank"] == 1
        assert out["value"]["entries"] == [["1"], ["-6"], ["0"]]

    def test_unbound(self, capsys):
        code, _, err = run(capsys, "eval", "--term", "(+ x y)", "--model", "two")
        assert code == 2 and "Unbound" in err


class TestOracle:
    def test_feas_gf3(self, capsys, files):
        inst = Instance("FEAS", RING, [parse_term("(r+ (r* x x) (r+ x r1))", RING)], FieldSpec(3))
        code, out, _ = run(capsys, "oracle", "-i", files("f.json", inst.dumps()))
        assert code == 0 and out["answer"] == "yes" and out["witness"] == {"x": 1}

    def test_random_echoes_seed(self, capsys, files, tmp_path):
        dst = str(tmp_path / "eps.json")
        main(["translate", "--from", "bool", "--to", "ref-2", "-i", files("t.sexp", "x1"), "-o", dst])
        capsys.readouterr()
        code, out, _ = run(capsys, "oracle", "-i", dst, "--model", "two", "--mode", "random",
                           "--seed", "17", "--budget", "100")
        assert code == 0 and out["seed"] == 17


class TestCheck:
    def test_gadget_roundtrip(self, capsys, files):
        code, out, err = run(capsys, "check", "--reduction", "bool-ref2",
                             "-i", files("t.sexp", "(^ x1 (+ x2 (oc x1)))"))
        assert code == 0 and out["ok"] and out["agreement"]

    def test_mutated_gadget(self, capsys, files):
        code, out, _ = run(capsys, "check", "--reduction", "bool-ref2", "--mutate",
                           "-i", files("t.sexp", "(^ x1 (oc x1))"))
        assert code == 1 and not out["ok"]

    def test_budget_error(self, capsys, files):
        code, _, err = run(capsys, "check", "--reduction", "lift", "--budget", "1",
                           "-i", files("r.sexp", "(^ x y) x"))
        assert code == 2 and "BudgetExceeded" in err

    def test_env_budget(self, capsys, files, monkeypatch):
        monkeypatch.setenv("MODRED_BUDGET", "1")
        code, _, _ = run(capsys, "check", "--reduction", "lift", "-i", files("r.sexp", "(^ x y) x"))
        assert code == 2

    def test_feas_mol_forward(self, capsys, files):
        code, out, _ = run(capsys, "check", "--reduction", "feas-mol", "-i", files("p", "(r- (r* x x) r1)"))
        assert code == 0 and out["forward"] is True

    def test_ssat_feas(self, capsys, files):
        text = "(= u (^ x y)) (= u 0) (= v (+ x y)) (= v 1)"
        code, out, _ = run(capsys, "check", "--reduction", "ssat-feas", "-i", files("s", text))
        assert code == 0 and out["agreement"]


class TestSelftest:
    def test_groups_pass(self, capsys):
        code, out, err = run(capsys, "selftest", "--only", "penrose,discriminator")
        assert code == 0 and out["ok"]
        assert err.count("PASS") == 2

    def test_corrupted_mul_fails(self, capsys, files):
        body = {n: b for n, _, b in DEFAULT_LIBRARY}["mul"]
        swapped = body.replace("(+ y (@z23))", "(+ X (@z23))").replace("(+ x z13)", "(+ y z13)").replace("X", "x")
        lib = files("lib.json", json.dumps({"terms": [{"name": "mul", "params": ["x", "y"], "body": swapped}]}))
        code, out, err = run(capsys, "selftest", "--only", "omega", "--library", lib)
        assert code == 1 and "FAIL omega" in err

    def test_seed_pinned_output_is_reproducible(self):
        cmd = [sys.executable, "-m", "modred", "selftest", "--only", "penrose,tau,unnesting", "--seed", "5"]
        a = subprocess.run(cmd, capture_output=True, check=True).stdout
        b = subprocess.run(cmd, capture_output=True, check=True).stdout
        assert a == b and a


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["eval", "--term", "x", "--model", "bogus"]) == 2
    assert main(["--version"]) == 0
