from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cedensity import builders
from cedensity.builders import (Delta2Approx, StableMonotoneG,
                                blockwise_limit_build, density_transfer_build,
                                extend_to_ratio, infsup_build,
                                interleave_targets, limsup_density_build,
                                sparse_hitting_build, verify_blockwise,
                                verify_infsup)
from cedensity.core import CEStream, SetOracle
from cedensity.errors import CapExceeded, ContractViolated


# -- target-visiting construction -------------------------------------------

INFSUP_SEQS = {
    "constant": ["1/2"] * 8,
    "alternating": ["1/3", "2/3"] * 4,
    "convergent": [Fraction(1, 2) + Fraction(1, n + 2) for n in range(8)],
    "clamped-endpoint": ["0", "1", "0", "1"],
    "interleaved": interleave_targets(["1/4", "1/5"], ["5/6", "4/5"],
                                      "1/2", 3),
}


@pytest.mark.parametrize("name", sorted(INFSUP_SEQS))
def test_infsup_approach_and_betweenness(name):
    art = infsup_build(INFSUP_SEQS[name], len(INFSUP_SEQS[name]), 10**6)
    assert not art.diagnostics
    rep = verify_infsup(art)
    assert rep == {"approach": True, "between": True}


def test_infsup_endpoint_targets_are_clamped():
    art = infsup_build(["0", "1"], 2, 10**6)
    for cp in art.checkpoints[1:]:
        assert 0 < Fraction(cp["q_num"], cp["q_den"]) < 1


def test_infsup_truncation_diagnostic():
    art = infsup_build(["1/2", "1/1000000"], 2, 50)
    assert art.diagnostics and art.diagnostics[0]["error"] == "Truncated"


def test_interleave_pins_to_pivot():
    out = interleave_targets(["1/4", "3/4"], ["1/4", "3/4"], "1/2", 2)
    assert out == [Fraction(1, 4), Fraction(1, 2),
                   Fraction(1, 2), Fraction(3, 4)]


# -- exact-ratio extension ---------------------------------------------------

def check_extension(F, a, d, r, ext):
    r = Fraction(r)
    G = ext.elements
    # exact ratio at the evaluation length
    cnt = sum(1 for x in G if x < ext.c)
    assert Fraction(cnt, ext.c) == r
    assert ext.c > d and ext.c >= ext.b
    # prefix preservation below a
    assert {x for x in G if x < a} == {x for x in F if x < a}
    # the extension is an initial segment [a, b)
    added = {x for x in G if x >= a} - set(F)
    assert added == set(range(a, ext.b)) - set(F)
    assert all(x < ext.b for x in G)


def test_extension_examples():
    ext = extend_to_ratio(set(), 0, 0, Fraction(1, 2))
    check_extension(set(), 0, 0, Fraction(1, 2), ext)
    ext = extend_to_ratio({0, 1}, 2, 5, Fraction(1, 3))
    check_extension({0, 1}, 2, 5, Fraction(1, 3), ext)


def brute_force_b(F, a, d, r):
    """Least b >= max(a+1, max(F)+1) for which some evaluation length c
    gives exactly ratio r with c > d, by direct scan."""
    r = Fraction(r)
    num, den = r.numerator, r.denominator
    b_start = max(a + 1, max(F) + 1 if F else 0)
    m0 = sum(1 for x in F if x < a) - a
    for b in range(b_start, b_start + 100 * num * den + den * (abs(d) + abs(m0) + 2)):
        size = m0 + b
        if size <= 0 or size % num:
            continue
        c = size // num * den
        if c > d and c >= b:
            return b
    raise AssertionError("brute force found no extension")


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_extension_randomized_with_bruteforce(data):
    a = data.draw(st.integers(0, 30))
    F = set(data.draw(st.lists(st.integers(0, a - 1), max_size=a))) if a else set()
    d = data.draw(st.integers(a, a + 60))
    den = data.draw(st.integers(2, 50))
    num = data.draw(st.integers(1, den - 1))
    r = Fraction(num, den)
    ext = extend_to_ratio(F, a, d, r)
    check_extension(F, a, d, r, ext)
    assert ext.b == brute_force_b(F, a, d, r)


# -- density transfer ---------------------------------------------------------

def transfer_fixture(fn, window=40):
    return Delta2Approx(fn, window)


def test_transfer_settles_on_constant_approximations():
    evens = SetOracle.residue_union(2, [0]).membership_array(40)
    for B in (Delta2Approx.constant(evens),
              Delta2Approx.constant(np.zeros(40, dtype=bool)),
              Delta2Approx.constant(np.ones(40, dtype=bool))):
        stream, t, trace, report = density_transfer_build(B, 5, 80, 5000)
        assert all(report["settled_identity"][n] for n in range(1, 6))
        assert all(report["initial_segment"].values())


def test_transfer_with_midrun_flip():
    before = SetOracle.residue_union(2, [0]).membership_array(40)
    after = SetOracle.residue_union(2, [1]).membership_array(40)
    B = transfer_fixture(lambda s: after if s >= 20 else before)
    stream, t, trace, report = density_transfer_build(B, 5, 120, 20000)
    assert all(report["settled_identity"][n] for n in range(1, 6))
    assert all(report["initial_segment"].values())
    # the flip must actually have fired a repair after stage 20
    assert any(r["fired"] is not None for r in trace if r["stage"] > 20)


def test_transfer_rejects_checkpoints_beyond_window():
    B = Delta2Approx.constant(np.zeros(10, dtype=bool))
    with pytest.raises(ValueError):
        density_transfer_build(B, 10, 50, 1000)


# -- factorial-block builder ---------------------------------------------------

def test_blockwise_constant_half():
    g = StableMonotoneG(lambda n, s: Fraction(1, 2))
    stream, levels = blockwise_limit_build(g, 3, 50)
    assert levels == {1: 0, 2: 1, 3: 1}  # nearest multiple of 1/n, ties down
    rep = verify_blockwise(stream, levels)
    assert rep["block_density"] is True
    assert rep["sandwich"] is True


def test_blockwise_block_cap():
    g = StableMonotoneG(lambda n, s: Fraction(1, 2))
    with pytest.raises(CapExceeded):
        blockwise_limit_build(g, builders.FACTORIAL_BLOCK_CAP + 1, 10)


def test_blockwise_monotone_contract_enforced():
    vals = {1: Fraction(1, 2), 2: Fraction(1, 4)}

    def g(n, s):  # drops between stages for block 2
        return Fraction(1, 2) if s < 2 else vals.get(n, Fraction(0))

    with pytest.raises(ContractViolated):
        blockwise_limit_build(StableMonotoneG(g), 2, 10)


def test_limsup_blockwise_levels_bounded():
    stream, levels, g_final = limsup_density_build(
        ["1/2", "3/4", "1/2", "7/8"], 4, 100)
    rep = verify_blockwise(stream, levels)
    assert rep["block_density"] is True
    assert rep["sandwich"] is True
    for n, L in levels.items():
        assert 0 <= L <= n


def test_sparse_hitting():
    streams = [CEStream.from_oracle(SetOracle.naturals(), n_max=2000,
                                    stage_max=2000) for _ in range(4)]
    stream, report = sparse_hitting_build(streams, 2000, 2000)
    hits = [r["hit"] for r in report]
    assert hits == [2, 3, 5, 9]  # first element above 2^e per stream
    counts = np.cumsum(stream.final_members())
    for n in range(1, 2000):
        assert counts[n - 1] <= n.bit_length()
