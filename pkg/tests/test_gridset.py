import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from transverse.gf_linalg import CapExceeded, FieldSpec, full_space, member, span, zero_space
from transverse.gridset import (
    Ambient2,
    BilinearMapSpec,
    GridSet,
    NotTransverse,
    TransverseSet,
    col_slice,
    dhor,
    dver,
    enumerate_transverse_small,
    from_lss,
    gen_from_bilinear,
    is_transverse,
    random_bilinear_data,
    row_slice,
    to_transverse,
    transverse_violation,
)
from transverse.lss import lines_system


def test_hex_bit_order():
    amb = Ambient2(2, 1, 1)
    A = GridSet.from_cells(amb, [(0, 0), (1, 0), (1, 1)])
    # cells 0, 2, 3 -> bits 0, 2, 3 of byte 0
    assert A.to_hex() == "0d"
    assert GridSet.from_hex(amb, "0d") == A


def test_hex_rejects_bad_payload():
    amb = Ambient2(2, 1, 1)
    with pytest.raises(ValueError):
        GridSet.from_hex(amb, "0d00")
    with pytest.raises(ValueError):
        GridSet.from_hex(amb, "1d")


@settings(max_examples=30)
@given(st.integers(0, 2**16 - 1))
def test_hex_roundtrip(mask):
    amb = Ambient2(2, 2, 2)
    cells = np.array([(mask >> i) & 1 for i in range(16)], dtype=bool).reshape(4, 4)
    A = GridSet(amb, cells)
    assert GridSet.from_json(A.to_json()) == A
    assert len(A) == bin(mask).count("1")


def test_slices():
    amb = Ambient2(2, 2, 2)
    A = GridSet.from_cells(amb, [(0, 0), (1, 0), (1, 3)])
    assert row_slice(A, 0) == {0, 1}
    assert col_slice(A, 1) == {0, 3}


def test_full_and_empty():
    amb = Ambient2(3, 1, 2)
    assert is_transverse(GridSet.full(amb))
    assert transverse_violation(GridSet.empty(amb)) == ("row", 0)
    assert TransverseSet.full(amb).density == 1


def test_not_transverse_witness():
    amb = Ambient2(2, 2, 2)
    H = amb.H
    cols = [full_space(H), span(H, 1), span(H, 1), zero_space(H)]
    # row y = 1 holds x in {0, 1, 2}, which misses 1 + 2 = 3
    with pytest.raises(NotTransverse) as exc:
        TransverseSet.from_columns(amb, cols)
    assert (exc.value.kind, exc.value.index) == ("row", 1)
    cells = oracles.grid_of_columns(2, 2, 2, [set(c.elements()) for c in cols])
    assert transverse_violation(GridSet(amb, cells)) == ("row", 1)


def test_bit_flip_is_detected():
    amb = Ambient2(2, 2, 2)
    A = TransverseSet.full(amb).to_gridset()
    cells = A.cells.copy()
    cells[2, 1] = False
    with pytest.raises(NotTransverse) as exc:
        to_transverse(GridSet(amb, cells))
    assert (exc.value.kind, exc.value.index) == ("row", 1)


# --------------------------------------------------------------------------
# enumeration against the brute-force oracle


@pytest.mark.parametrize(
    "dims, expected",
    [((2, 1, 1), 2), ((3, 1, 1), 2), ((2, 1, 2), 5), ((2, 2, 2), 50), ((3, 1, 2), 6)],
)
def test_enumeration_counts(dims, expected):
    found = list(enumerate_transverse_small(Ambient2(*dims)))
    assert len(found) == expected == oracles.count_transverse(*dims)
    assert len({T.to_gridset() for T in found}) == expected
    assert all(is_transverse(T.to_gridset()) for T in found)


def test_enumeration_larger_counts_pinned():
    # pinned from the column-product oracle (2,2,3) and symmetry under transposition
    assert sum(1 for _ in enumerate_transverse_small(Ambient2(2, 2, 3))) == 1090
    assert sum(1 for _ in enumerate_transverse_small(Ambient2(2, 3, 2))) == 1090


def test_enumeration_cap():
    with pytest.raises(CapExceeded):
        next(enumerate_transverse_small(Ambient2(2, 5, 1)))


def test_enumeration_matches_oracle_sets():
    p, nG, nH = 2, 2, 2
    masks = oracles.subspace_masks(p, nH)
    ours = {T.to_gridset().to_hex() for T in enumerate_transverse_small(Ambient2(p, nG, nH))}
    import itertools

    theirs = set()
    for combo in itertools.product(masks, repeat=p**nG):
        cells = oracles.grid_of_columns(p, nG, nH, combo)
        if all(oracles.is_subgroup(p, nG, np.nonzero(cells[:, y])[0].tolist()) for y in range(p**nH)):
            theirs.add(GridSet(Ambient2(p, nG, nH), cells).to_hex())
    assert ours == theirs


# --------------------------------------------------------------------------
# generated sets


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2), st.integers(0, 10**6))
def test_difference_sets_fix_transverse_sets(p, nG, nH, r, seed):
    T = gen_from_bilinear(BilinearMapSpec(p, nG, nH, r), seed)
    A = T.to_gridset()
    assert dhor(A) == A
    assert dver(A) == A


def test_difference_sets_grow_non_transverse_sets():
    amb = Ambient2(2, 2, 2)
    A = GridSet.from_cells(amb, [(0, 0), (1, 0), (2, 0), (0, 1)])
    assert dhor(A) != A
    assert len(dhor(A)) > len(A)


def test_bilinear_columns_match_direct_evaluation():
    spec = BilinearMapSpec(2, 3, 3, 2)
    U, V, forms = random_bilinear_data(spec, 11)
    T = gen_from_bilinear(spec, 11)
    zero = oracles.bilinear_zero_cells(2, 3, 3, forms.tolist())
    for x in range(8):
        for y in range(8):
            if x == 0:
                assert (x, y) in T
            elif member(x, U):
                assert ((x, y) in T) == (bool(zero[x, y]) and member(y, V))


def test_generation_is_seeded():
    spec = BilinearMapSpec(3, 2, 2, 1)
    assert gen_from_bilinear(spec, 5).digest() == gen_from_bilinear(spec, 5).digest()
    U, V, forms = random_bilinear_data(BilinearMapSpec(2, 4, 4, 1, dim_U=3, dim_V=2), 0)
    assert (U.dim, V.dim, forms.shape) == (3, 2, (1, 4, 4))


def test_from_lss_lines():
    S = lines_system(FieldSpec(2, 3))
    T = from_lss(S)
    for x in range(8):
        assert T.column(x) == S[x].perp()
    assert is_transverse(T.to_gridset())


def test_json_roundtrip_and_digest():
    T = gen_from_bilinear(BilinearMapSpec(2, 2, 3, 1), 3)
    T2 = TransverseSet.from_json(T.to_json())
    assert T2 == T
    assert T2.digest() == T.digest()
    assert T.row(0) == full_space(FieldSpec(2, 2))


def test_dense_transverse_sets_are_full_small():
    for dims in [(2, 1, 1), (2, 1, 2), (2, 2, 2)]:
        for T in enumerate_transverse_small(Ambient2(*dims)):
            if T.density > 0.9375:
                assert T.density == 1
