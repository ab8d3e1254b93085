"""Brute-force reference implementations used to pin expected values.

Everything here works on explicit element sets of F_p^n (vectors as digit
tuples), sharing no code with the package beyond the encoding convention
``v = sum(d_i * p^i)``.
"""

from __future__ import annotations

import itertools

import numpy as np


def digits(p: int, n: int, v: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        v, r = divmod(v, p)
        out.append(r)
    return tuple(out)


def encode(p: int, ds) -> int:
    return sum((int(d) % p) * p**i for i, d in enumerate(ds))


def add(p: int, n: int, u: int, v: int) -> int:
    return encode(p, [a + b for a, b in zip(digits(p, n, u), digits(p, n, v))])


def dot(p: int, n: int, u: int, v: int) -> int:
    return sum(a * b for a, b in zip(digits(p, n, u), digits(p, n, v))) % p


def closure(p: int, n: int, vectors) -> frozenset[int]:
    """All F_p-combinations of ``vectors``."""
    vecs = list(vectors)
    out = set()
    for coeffs in itertools.product(range(p), repeat=len(vecs)):
        acc = [0] * n
        for c, v in zip(coeffs, vecs):
            acc = [a + c * b for a, b in zip(acc, digits(p, n, v))]
        out.add(encode(p, acc))
    return frozenset(out)


def perp(p: int, n: int, elems) -> frozenset[int]:
    return frozenset(v for v in range(p**n) if all(dot(p, n, v, u) == 0 for u in elems))


def is_subgroup(p: int, n: int, elems) -> bool:
    s = set(elems)
    return 0 in s and all(add(p, n, a, b) in s for a in s for b in s)


def subspace_masks(p: int, n: int) -> list[frozenset[int]]:
    """Every subspace of F_p^n as an element set, by closure over all subsets of generators."""
    found = set()
    N = p**n
    for k in range(n + 1):
        for gens in itertools.combinations(range(1, N), k):
            found.add(closure(p, n, gens))
    found.add(frozenset({0}))
    return sorted(found, key=lambda s: (len(s), sorted(s)))


def count_transverse(p: int, nG: int, nH: int) -> int:
    """Count subsets of G x H with all rows and columns subspaces.

    Columns range over subspaces of H; each combination is kept when every
    row ``{x : y in col[x]}`` is a subgroup of G.
    """
    NG, NH = p**nG, p**nH
    cols = subspace_masks(p, nH)
    count = 0
    for combo in itertools.product(cols, repeat=NG):
        ok = True
        for y in range(NH):
            row = [x for x in range(NG) if y in combo[x]]
            if not is_subgroup(p, nG, row):
                ok = False
                break
        count += ok
    return count


def grid_of_columns(p: int, nG: int, nH: int, cols) -> np.ndarray:
    cells = np.zeros((p**nG, p**nH), dtype=bool)
    for x, c in enumerate(cols):
        cells[x, sorted(c)] = True
    return cells


def bilinear_zero_cells(p: int, nG: int, nH: int, forms) -> np.ndarray:
    """Boolean grid of ``{(x, y) : x^T B_i y = 0 for all i}`` by direct evaluation."""
    cells = np.ones((p**nG, p**nH), dtype=bool)
    for x in range(p**nG):
        xd = digits(p, nG, x)
        for y in range(p**nH):
            yd = digits(p, nH, y)
            for B in forms:
                s = sum(xd[i] * int(B[i][j]) * yd[j] for i in range(nG) for j in range(nH)) % p
                if s:
                    cells[x, y] = False
                    break
    return cells
