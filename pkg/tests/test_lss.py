from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from transverse.gf_linalg import FieldSpec, canonicalize, full_space, span, zero_space
from transverse.gridset import Ambient2, BilinearMapSpec, enumerate_transverse_small, from_lss, gen_from_bilinear
from transverse.lss import (
    LinearSubspaceSystem,
    all_zero_system,
    check_scaling,
    check_zero_sum,
    from_transverse,
    lines_system,
    quasirandomness_profile,
    tuple_bound,
    tuple_intersection_fraction,
    validate,
)


def brute_profile(S, d):
    p, N = S.p, S.group.size
    sets = [set(V.elements()) for V in S.table]
    bad1 = sum(V.dim != d for V in S.table)
    bad2 = sum(len(a & b) > 1 for a in sets for b in sets)
    return Fraction(bad1, N), Fraction(bad2, N * N)


def brute_tuple_fraction(S, r):
    import itertools

    N, amb = S.group.size, S.ambient
    bad = 0
    for t in itertools.product(range(N), repeat=r + 1):
        rest = set().union(*(S[x].basis for x in t[1:]))
        closed = oracles.closure(amb.p, amb.n, rest)
        bad += len(closed & set(S[t[0]].elements())) > 1
    return Fraction(bad, N ** (r + 1))


def test_lines_profiles_pinned():
    # exhaustive counts: only x = 0 has the wrong dimension; a pair meets iff x1 = x2 != 0
    assert brute_profile(lines_system(FieldSpec(2, 3)), 1) == (Fraction(1, 8), Fraction(7, 64))
    prof = quasirandomness_profile(lines_system(FieldSpec(2, 3)), 1)
    assert (prof.eps1, prof.eps2) == (Fraction(1, 8), Fraction(7, 64))
    prof = quasirandomness_profile(lines_system(FieldSpec(2, 4)), 1)
    assert (prof.eps1, prof.eps2) == (Fraction(1, 16), Fraction(15, 256))


@pytest.mark.parametrize(
    "r, expected",
    [(1, Fraction(15, 256)), (2, Fraction(675, 4096)), (3, Fraction(22155, 65536)), (4, Fraction(589275, 1048576))],
)
def test_tuple_fractions_lines_pinned(r, expected):
    S = lines_system(FieldSpec(2, 4))
    assert tuple_intersection_fraction(S, r) == expected


@pytest.mark.parametrize("r", [1, 2])
def test_tuple_fraction_matches_brute_force(r):
    S = lines_system(FieldSpec(2, 3))
    assert tuple_intersection_fraction(S, r) == brute_tuple_fraction(S, r)


def test_tuple_bound_holds_on_lines():
    S = lines_system(FieldSpec(2, 4))
    eps = float(quasirandomness_profile(S, 1).eps2)
    for r in (1, 2):
        assert float(tuple_intersection_fraction(S, r)) <= tuple_bound(S, 1, r, eps)


def test_validate_and_witness():
    f = FieldSpec(2, 2)
    assert validate(lines_system(f)) == (True, None)
    assert validate(all_zero_system(f, f)) == (True, None)
    bad = LinearSubspaceSystem(f, f, (zero_space(f), span(f, 1), span(f, 1), span(f, 2)))
    ok, witness = validate(bad)
    assert not ok
    x1, x2 = witness
    V = lambda x: set(bad[x].elements())
    assert not V(x1 ^ x2) <= oracles.closure(2, 2, bad[x1].basis + bad[x2].basis)
    nonzero = LinearSubspaceSystem(f, f, (span(f, 1),) + (zero_space(f),) * 3)
    assert validate(nonzero) == (False, (0, 0))


def test_rejects_wrong_table_size():
    f = FieldSpec(2, 2)
    with pytest.raises(ValueError):
        LinearSubspaceSystem(f, f, (zero_space(f),) * 3)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2), st.integers(0, 10**6))
def test_transverse_sets_give_valid_systems(p, nG, nH, r, seed):
    T = gen_from_bilinear(BilinearMapSpec(p, nG, nH, r), seed)
    S = from_transverse(T)
    assert validate(S) == (True, None)
    assert check_scaling(S)
    assert check_zero_sum(S, 3)
    # orthogonal complement of the column, and back
    assert from_lss(S) == T


def test_every_small_transverse_set_gives_a_valid_system():
    for T in enumerate_transverse_small(Ambient2(2, 2, 2)):
        assert validate(from_transverse(T))[0]


def test_restriction_uses_coordinates_of_V():
    T = gen_from_bilinear(BilinearMapSpec(2, 3, 3, 1), 2)
    V = span(T.ambient.H, 1, 2)
    U = span(T.ambient.G, 3, 4)
    S = from_transverse(T, V=V, U=U)
    assert (S.group.n, S.ambient.n) == (2, 2)
    for c in range(4):
        x = U.from_coords(S.group.decode(c))
        inside = [V.from_coords(S.ambient.decode(w)) for w in S[c].perp().elements()]
        assert sorted(inside) == sorted(set(T.columns[x].elements()) & set(V.elements()))


def test_json_roundtrip():
    S = lines_system(FieldSpec(3, 2), np.array([[1, 2], [0, 1], [1, 1]]))
    S2 = LinearSubspaceSystem.from_json(S.to_json())
    assert S2.table == S.table
    assert S.ambient.n == 3


def test_zero_sum_detects_violation():
    f = FieldSpec(2, 2)
    bad = LinearSubspaceSystem(f, f, (zero_space(f), span(f, 1), span(f, 1), span(f, 2)))
    assert not check_zero_sum(bad, 3)
    assert check_zero_sum(lines_system(f), 2)
    with pytest.raises(ValueError):
        check_zero_sum(bad, 5)


def test_scaling_detects_violation():
    f = FieldSpec(3, 1)
    good = LinearSubspaceSystem(f, f, (zero_space(f), full_space(f), full_space(f)))
    bad = LinearSubspaceSystem(f, f, (zero_space(f), full_space(f), zero_space(f)))
    assert check_scaling(good)
    assert not check_scaling(bad)
    assert canonicalize([2], f) == full_space(f)
