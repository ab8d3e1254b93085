import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from transverse.extraction import (
    AnchorTooWeak,
    ExtractionConfig,
    bilinear_system_structure,
    ceil_log,
    choose_anchor,
    d0_bound,
    drc_rounds,
    extract_variety,
    regularize,
)
from transverse.gf_linalg import FieldSpec, canonicalize, zero_space
from transverse.gridset import Ambient2, BilinearMapSpec, TransverseSet, from_lss, gen_from_bilinear
from transverse.lss import LinearSubspaceSystem, all_zero_system, lines_system
from transverse.variety import enumerate_variety


def dot_zero_set(n=4):
    """``{(x, y) : x . y = 0}`` on F_2^n x F_2^n."""
    return from_lss(lines_system(FieldSpec(2, n)))


def brute_exceptions(A, U, V, d):
    """Exception fractions for both regularity properties, by explicit sets."""
    p = A.ambient.p
    Ue = U.elements()
    Ve = set(V.elements())
    cols = {x: set(A.columns[x].elements()) & Ve for x in Ue}
    target1 = len(Ve) // p**d
    target2 = len(Ve) // p ** (2 * d)
    bad1 = sum(len(cols[x]) != target1 for x in Ue)
    bad2 = sum(len(cols[a] & cols[b]) != target2 for a in Ue for b in Ue)
    return Fraction(bad1, len(Ue)), Fraction(bad2, len(Ue) ** 2)


def test_bound_helpers():
    assert ceil_log(2, Fraction(1)) == 0
    assert ceil_log(2, Fraction(9)) == 4
    assert d0_bound(2, Fraction(17, 32)) == 17
    assert drc_rounds(2, Fraction(1, 10)) == 11


def test_regularize_dot_product_set():
    A = dot_zero_set()
    reg = regularize(A, eps=0.1)
    G, H = A.ambient.G, A.ambient.H
    assert (reg.U.dim, reg.V.dim, reg.d) == (G.n, H.n, 1)
    assert (reg.exceptions_i, reg.exceptions_ii) == (Fraction(1, 16), Fraction(23, 128))
    assert brute_exceptions(A, reg.U, reg.V, reg.d) == (Fraction(1, 16), Fraction(23, 128))
    assert reg.d0_formula == 17
    assert reg.certified


def test_regularize_full_set_is_trivial():
    A = TransverseSet.full(Ambient2(3, 2, 2))
    reg = regularize(A)
    assert reg.d == 0 and reg.exceptions_i == 0 and reg.exceptions_ii == 0


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(2, 4), st.integers(1, 2), st.integers(0, 10**6))
def test_regularize_counts_match_brute_force(p, n, r, seed):
    if p == 3:
        n = min(n, 3)
    A = gen_from_bilinear(BilinearMapSpec(p, n, n, r), seed)
    reg = regularize(A, eps=0.1, seed=seed)
    assert reg.certified
    assert brute_exceptions(A, reg.U, reg.V, reg.d) == (reg.exceptions_i, reg.exceptions_ii)
    assert reg.d <= reg.d0_used


def test_regularize_rejects_bad_eps():
    with pytest.raises(ValueError):
        regularize(dot_zero_set(2), eps=0)


# --------------------------------------------------------------------------


def test_choose_anchor_lines():
    S = lines_system(FieldSpec(2, 4))
    score = choose_anchor(S, 1)
    assert (score.a, score.good_triple_fraction, score.exact) == (1, Fraction(231, 512), True)
    weak = choose_anchor(S, 1, budget=1)
    assert (weak.a, weak.good_triple_fraction) == (0, 0)


def brute_anchor_score(S, d, a):
    f, amb = S.group, S.ambient
    p, n = f.p, f.n
    el = [set(V.elements()) for V in S.table]
    good = 0
    N = f.size
    for x in range(N):
        for y in range(N):
            w = oracles.add(p, n, oracles.add(p, n, x, y), f.neg(a))
            for z in range(N):
                if any(S[q].dim != d for q in (a, x, y, w, z)):
                    continue
                if len(oracles.closure(p, amb.n, S[a].basis + S[x].basis + S[y].basis)) != p ** (3 * d):
                    continue
                span3 = oracles.closure(p, amb.n, S[x].basis + S[y].basis + S[z].basis)
                good += len(el[w] & span3) == 1
    return Fraction(good, N**3)


def test_anchor_score_matches_brute_force():
    S = lines_system(FieldSpec(2, 3))
    for a in (1, 5):
        score = choose_anchor(S, 1, budget=1 + a)
        assert brute_anchor_score(S, 1, score.a) == score.good_triple_fraction


def test_structure_recovers_lines():
    S = lines_system(FieldSpec(2, 4))
    st_ = bilinear_system_structure(S, 1)
    for x in range(16):
        assert st_.image(x) == S[x]
    # at x = 0 the affine map vanishes, matching V_0 = {0}
    assert st_.good_fraction == 1


def test_structure_at_zero_dimension():
    f = FieldSpec(2, 3)
    st_ = bilinear_system_structure(all_zero_system(f, f), 0)
    assert st_.good.all()
    assert st_.linear.shape == (0, 3, 3)


def test_structure_rejects_degenerate_systems():
    f = FieldSpec(2, 3)
    line = canonicalize([1], f)
    S = LinearSubspaceSystem(f, f, (zero_space(f),) + (line,) * 7)
    with pytest.raises(AnchorTooWeak):
        bilinear_system_structure(S, 1)


# --------------------------------------------------------------------------


def test_extract_dot_product_set():
    A = dot_zero_set()
    rep = extract_variety(A, ExtractionConfig(eps=0.1))
    W = rep.variety
    assert rep.route == "direct"
    assert (W.U.codim, W.V.codim, rep.r) == (0, 0, 1)
    assert rep.certificate.passed and rep.certificate.cells_checked == 136
    assert (rep.shift_cells, rep.shift_witnessed) == (136, 136)
    # the recovered form is the dot product itself
    assert np.array_equal(W.beta.forms[0], np.eye(4, dtype=np.int64))


def test_extract_full_set():
    rep = extract_variety(TransverseSet.full(Ambient2(2, 3, 3)))
    assert rep.r == 0 and rep.variety.U.codim == 0 and rep.variety.V.codim == 0


@settings(max_examples=10, deadline=None)
@given(st.integers(3, 4), st.integers(1, 2), st.integers(0, 1), st.integers(0, 10**6))
def test_extracted_variety_lies_inside(n, r, codim_v, seed):
    A = gen_from_bilinear(BilinearMapSpec(2, n, n, r, dim_V=n - codim_v), seed)
    rep = extract_variety(A, ExtractionConfig(eps=0.1, seed=seed))
    assert rep.certificate.passed
    grid = enumerate_variety(rep.variety)
    # independent check: every cell of the variety, recomputed from the forms, is in A
    forms = rep.variety.beta.forms.tolist()
    zero = oracles.bilinear_zero_cells(2, n, n, forms)
    for x in rep.variety.U.elements():
        for y in rep.variety.V.elements():
            assert ((x, y) in grid) == bool(zero[x, y])
            if zero[x, y]:
                assert (x, y) in A


def test_reports_are_reproducible():
    A = gen_from_bilinear(BilinearMapSpec(2, 4, 4, 2), 9)
    cfg = ExtractionConfig(eps=0.1, seed=3)
    a = json.dumps(extract_variety(A, cfg).to_json(), sort_keys=True)
    b = json.dumps(extract_variety(A, cfg).to_json(), sort_keys=True)
    assert a == b


def test_subset_variety_respects_density():
    # the variety can never be denser than the set it sits inside
    for seed in range(3):
        A = gen_from_bilinear(BilinearMapSpec(2, 3, 3, 1), seed)
        rep = extract_variety(A, ExtractionConfig(eps=0.1, seed=seed))
        assert len(enumerate_variety(rep.variety)) <= len(A.to_gridset())
