"""Bilinear varieties ``{(x, y) in U x V : beta(x, y) = 0}``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gf_linalg import (
    CapExceeded,
    DimensionMismatch,
    FieldSpec,
    Subspace,
    canonicalize,
    full_space,
    member,
    rref_rows,
)
from .gridset import GRID_CAP, Ambient2, GridSet, TransverseSet, zero_set_column


@dataclass(frozen=True, eq=False)
class BilinearMapTuple:
    """``r`` bilinear forms ``x^T B_i y``, reduced to a canonical basis of their span."""

    p: int
    nG: int
    nH: int
    forms: np.ndarray  # shape (r, nG, nH)

    @classmethod
    def reduced(cls, p: int, nG: int, nH: int, forms) -> BilinearMapTuple:
        forms = np.asarray(forms, dtype=np.int64).reshape(-1, nG, nH) % p
        rows = rref_rows(forms.reshape(len(forms), nG * nH).tolist(), p) if len(forms) else []
        arr = np.array(rows, dtype=np.int64).reshape(len(rows), nG, nH)
        arr.setflags(write=False)
        return cls(p, nG, nH, arr)

    @property
    def r(self) -> int:
        return self.forms.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BilinearMapTuple)
            and (self.p, self.nG, self.nH) == (other.p, other.nG, other.nH)
            and np.array_equal(self.forms, other.forms)
        )

    def __hash__(self) -> int:
        return hash((self.p, self.nG, self.nH, self.forms.tobytes()))

    def evaluate(self, x: int, y: int) -> np.ndarray:
        G, H = FieldSpec(self.p, self.nG), FieldSpec(self.p, self.nH)
        xd = np.array(G.decode(x), dtype=np.int64)
        yd = np.array(H.decode(y), dtype=np.int64)
        return np.einsum("g,igh,h->i", xd, self.forms, yd) % self.p


@dataclass(frozen=True)
class BilinearVariety:
    U: Subspace
    V: Subspace
    beta: BilinearMapTuple

    def __post_init__(self) -> None:
        b = self.beta
        if (self.U.field, self.V.field) != (FieldSpec(b.p, b.nG), FieldSpec(b.p, b.nH)):
            raise DimensionMismatch("U, V and the forms disagree on the ambient")

    @property
    def ambient(self) -> Ambient2:
        return Ambient2(self.beta.p, self.beta.nG, self.beta.nH)

    @property
    def r(self) -> int:
        return self.beta.r

    def column(self, x: int) -> Subspace | None:
        """``{y in V : beta(x, y) = 0}`` for ``x`` in U, else None."""
        if not member(x, self.U):
            return None
        return zero_set_column(x, self.V, self.beta.forms, self.U.field)

    def to_json(self) -> dict:
        return {
            **self.ambient.header(),
            "U_basis": list(self.U.basis),
            "V_basis": list(self.V.basis),
            "forms": [f.ravel().tolist() for f in self.beta.forms],
        }

    @classmethod
    def from_json(cls, data: dict) -> BilinearVariety:
        amb = Ambient2(data["p"], data["nG"], data["nH"])
        forms = np.array(data["forms"], dtype=np.int64).reshape(-1, amb.nG, amb.nH)
        return cls(
            canonicalize(data["U_basis"], amb.G),
            canonicalize(data["V_basis"], amb.H),
            BilinearMapTuple.reduced(amb.p, amb.nG, amb.nH, forms),
        )


def member_of(W: BilinearVariety, x: int, y: int) -> bool:
    W.U.field.check(x)
    W.V.field.check(y)
    if not (member(x, W.U) and member(y, W.V)):
        return False
    return not np.any(W.beta.evaluate(x, y))


def enumerate_variety(W: BilinearVariety) -> GridSet:
    amb = W.ambient
    if amb.cells > GRID_CAP:
        raise CapExceeded("variety grid exceeds the cap")
    cells = np.zeros((amb.G.size, amb.H.size), dtype=bool)
    for x in W.U.elements():
        cells[x, W.column(x).elements()] = True
    return GridSet(amb, cells)


def codimension(W: BilinearVariety) -> int:
    return W.U.codim + W.V.codim + W.r


def density_bound(W: BilinearVariety) -> Fraction:
    """``p^-r |U|/|G| |V|/|H|``, the standard lower bound on the variety's density."""
    p = W.beta.p
    return Fraction(1, p ** codimension(W))


@dataclass
class ContainmentCertificate:
    passed: bool
    mode: str
    cells_checked: int
    violation: tuple[int, int] | None = None

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "mode": self.mode,
            "cells_checked": self.cells_checked,
            "violation": list(self.violation) if self.violation else None,
        }


def contained_in(
    W: BilinearVariety,
    A: TransverseSet,
    mode: str = "exhaustive",
    samples: int = 100_000,
    seed=0,
) -> ContainmentCertificate:
    """Check every member cell of ``W`` (or a uniform sample of them) against ``A``."""
    if A.ambient != W.ambient:
        raise DimensionMismatch("variety and set live in different ambients")
    if mode == "exhaustive":
        if W.U.size * W.V.size > GRID_CAP:
            raise CapExceeded("U x V too large for exhaustive certification")
        checked = 0
        for x in W.U.elements():
            ys = W.column(x).elements()
            checked += len(ys)
            col = A.columns[x]
            for y in ys:
                if not member(y, col):
                    return ContainmentCertificate(False, mode, checked, (x, y))
        return ContainmentCertificate(True, mode, checked)
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        G, H = W.U.field, W.V.field
        checked = 0
        tries = 0
        while checked < samples:
            tries += 1
            if tries > 1000 * samples:
                break
            x = W.U.from_coords(rng.integers(0, G.p, size=W.U.dim).tolist())
            y = W.V.from_coords(rng.integers(0, H.p, size=W.V.dim).tolist())
            if np.any(W.beta.evaluate(x, y)):
                continue
            checked += 1
            if (x, y) not in A:
                return ContainmentCertificate(False, mode, checked, (x, y))
        return ContainmentCertificate(True, mode, checked)
    raise ValueError(f"unknown certification mode {mode!r}")


# --------------------------------------------------------------------------
# Exact-variety oracle for tiny instances.


@dataclass
class ExactVarietyResult:
    is_variety: bool
    forms: BilinearMapTuple | None
    minimal: bool
    witness_cell: tuple[int, int] | None = None
    nodes: int = 0

    def to_json(self) -> dict:
        return {
            "is_variety": self.is_variety,
            "r": None if self.forms is None else self.forms.r,
            "forms": None if self.forms is None else [f.ravel().tolist() for f in self.forms.forms],
            "minimal": self.minimal,
            "witness_cell": list(self.witness_cell) if self.witness_cell else None,
        }


def _tensor(G: FieldSpec, H: FieldSpec, x: int, y: int) -> tuple[int, ...]:
    xd, yd = G.decode(x), H.decode(y)
    return tuple((a * b) % G.p for a in xd for b in yd)


def _reduce(vec, rows, pivots, p):
    vec = list(vec)
    for row, c in zip(rows, pivots):
        a = vec[c]
        if a:
            vec = [(u - a * w) % p for u, w in zip(vec, row)]
    return tuple(vec)


def is_exact_variety(A: TransverseSet, node_budget: int = 200_000) -> ExactVarietyResult:
    """Decide whether ``A`` is the common zero set of some bilinear forms on G x H.

    Any witness family lies inside the annihilator of ``A``; ``A`` is a
    variety exactly when the annihilator's zero set is ``A``. A minimal family
    is found by searching, in decreasing dimension, for a largest subspace
    of tensors that contains every ``x (x) y`` with ``(x, y)`` in ``A`` and no
    other rank-one tensor. When the search exceeds ``node_budget`` the
    annihilator itself is returned with ``minimal=False``.
    """
    amb = A.ambient
    p, nG, nH = amb.p, amb.nG, amb.nH
    if nG * nH > 9 or p not in (2, 3):
        raise CapExceeded("exact-variety oracle supports nG * nH <= 9 and p in {2, 3}")
    G, H = amb.G, amb.H
    N = nG * nH
    inside = [_tensor(G, H, x, y) for x in range(G.size) for y in A.columns[x].elements()]
    S_rows = rref_rows([list(t) for t in inside], p) if inside else []
    S_piv = [next(i for i, a in enumerate(r) if a) for r in S_rows]

    forbidden: set[tuple[int, ...]] = set()
    for x in range(G.size):
        col = A.columns[x]
        for y in range(H.size):
            if member(y, col):
                continue
            res = _reduce(_tensor(G, H, x, y), S_rows, S_piv, p)
            if not any(res):
                return ExactVarietyResult(False, None, True, witness_cell=(x, y))
            forbidden.add(res)

    # Quotient coordinates are the non-pivot positions.
    free = [i for i in range(N) if i not in set(S_piv)]
    a = len(free)
    q = FieldSpec(p, a) if a <= 16 else None
    forb_q = {q.encode([t[i] for i in free]) for t in forbidden} if q else set()

    def annihilator_of(T_rows_full: list[list[int]]) -> BilinearMapTuple:
        # forms B with <B, t> = 0 for every t in T
        if not T_rows_full:
            basis = np.eye(N, dtype=np.int64)
        else:
            M = np.array(T_rows_full, dtype=np.int64)
            basis = _nullspace(M, p)
        return BilinearMapTuple.reduced(p, nG, nH, basis.reshape(-1, nG, nH))

    def lift(vq: int) -> list[int]:
        d = q.decode(vq)
        full = [0] * N
        for i, c in zip(free, d):
            full[i] = c
        return full

    best, nodes, exhausted = _largest_avoiding(q, forb_q, node_budget) if a else ([], 0, True)
    T_rows = [list(r) for r in S_rows] + [lift(v) for v in best]
    forms = annihilator_of(T_rows)
    return ExactVarietyResult(True, forms, exhausted, nodes=nodes)


class _Budget(Exception):
    pass


def _largest_avoiding(q: FieldSpec, forbidden: set[int], budget: int) -> tuple[list[int], int, bool]:
    """Largest subspace of ``q`` containing no vector of ``forbidden``.

    Subspaces are generated once each through their RREF basis, adding rows
    in decreasing pivot order: a new row has its pivot below every current
    pivot and zeros at the current pivots. Returns ``(basis, nodes, complete)``.
    """
    p, a = q.p, q.n
    best: list[int] = []
    nodes = 0

    def candidates(pivots: list[int]):
        low = min(pivots, default=a)
        for c in range(low - 1, -1, -1):
            free = [i for i in range(c + 1, a) if i not in pivots]
            for vals in itertools.product(range(p), repeat=len(free)):
                digits = [0] * a
                digits[c] = 1
                for i, v in zip(free, vals):
                    digits[i] = v
                yield c, q.encode(digits)

    def dfs(rows: list[int], pivots: list[int], elems: list[int]) -> None:
        nonlocal best, nodes
        if len(rows) > len(best):
            best = list(rows)
        if len(best) == a:
            raise _Budget  # cannot do better; unwind
        for c, v in candidates(pivots):
            if len(rows) + 1 + c <= len(best):
                # at most c more pivots fit below c
                break
            new = [q.add(e, q.scale(lam, v)) for lam in range(1, p) for e in elems]
            if any(n in forbidden for n in new):
                continue
            nodes += 1
            if nodes > budget:
                raise _Budget
            dfs(rows + [v], pivots + [c], elems + new)

    try:
        dfs([], [], [0])
        complete = True
    except _Budget:
        complete = len(best) == a
    return best, nodes, complete


def _nullspace(M: np.ndarray, p: int) -> np.ndarray:
    """Rows spanning ``{v : M v = 0}``."""
    rows = rref_rows(M.tolist(), p)
    n = M.shape[1]
    piv = [next(i for i, a in enumerate(r) if a) for r in rows]
    out = []
    for j in range(n):
        if j in piv:
            continue
        v = [0] * n
        v[j] = 1
        for r, c in zip(rows, piv):
            v[c] = (-r[j]) % p
        out.append(v)
    return np.array(out, dtype=np.int64).reshape(len(out), n)


def full_variety(ambient: Ambient2) -> BilinearVariety:
    return BilinearVariety(
        full_space(ambient.G),
        full_space(ambient.H),
        BilinearMapTuple.reduced(ambient.p, ambient.nG, ambient.nH, np.zeros((0, ambient.nG, ambient.nH))),
    )
