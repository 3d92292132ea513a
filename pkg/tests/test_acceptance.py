"""The thirteen acceptance criteria, one selftest group each.

Every test runs its group with a pinned seed, checks the result and the wall
clock limit, and prints one PASS/FAIL line (visible with ``pytest -v``).
"""

import json

import pytest

from modred.selftest import GROUPS, run_group

CRITERIA = [
    (1, "lattice_laws", "subspace lattice laws on 300 random triples per field"),
    (2, "zassenhaus", "block-encoded meet equals direct meet on 500 pairs"),
    (3, "omega", "coordinate ring operations agree with matrix operations"),
    (4, "penrose", "pseudoinverse satisfies the Penrose equations"),
    (5, "retractions", "retractions fix conforming inputs and conform random ones"),
    (6, "discriminator", "semantic and syntactic delta_3 classify GF(2)^3"),
    (7, "gadget", "boolean gadget equivalence on all small NNF terms"),
    (8, "height_lift", "height-3 lift agrees with the two-element verdict"),
    (9, "feas_roundtrips", "FEAS examples and sSAT-to-FEAS round trips"),
    (10, "mol_pipeline", "MOL pipeline witnesses and sampled validity"),
    (11, "starring", "star-ring scalar and symmetric-matrix checks"),
    (12, "tau", "ortholattice translation round trips and linear size"),
    (13, "unnesting", "unnesting preserves values, sizes and occurrences"),
]

SEED = 0


def test_every_group_is_a_criterion():
    assert sorted(n for _, n, _ in CRITERIA) == sorted(n for n, _, _ in GROUPS)


@pytest.mark.slow
@pytest.mark.parametrize("number,name,title", CRITERIA, ids=[n for _, n, _ in CRITERIA])
def test_criterion(number, name, title, capsys):
    r = run_group(name, seed=SEED)
    line = (f"{'PASS' if r.ok else 'FAIL'} criterion {number:2d} {name}: {title} "
            f"({r.seconds:.2f}s / {r.limit}s)")
    with capsys.disabled():
        print("\n" + line)
    assert r.passed, json.dumps(r.detail, default=str)[:2000]
    assert r.in_time, f"{name} took {r.seconds:.1f}s, limit {r.limit}s"
