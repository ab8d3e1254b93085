"""Linear systems of subspaces (V_x) indexed by a vector space."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from .gf_linalg import (
    FieldSpec,
    Subspace,
    SubspaceIndex,
    canonicalize,
    full_space,
    intersect,
    orth_complement,
    zero_space,
)
from .gridset import TransverseSet


@lru_cache(maxsize=32)
def _digits_table(p: int, n: int) -> np.ndarray:
    f = FieldSpec(p, n)
    return f.digits_array(list(range(f.size)))


def add_row(group: FieldSpec, x: int) -> np.ndarray:
    """Encodings of ``x + g`` for every ``g`` in encoding order."""
    if group.p == 2:
        return np.arange(group.size, dtype=np.int64) ^ x
    D = _digits_table(group.p, group.n)
    return group.encode_array(D + D[x])


def neg_table(group: FieldSpec) -> np.ndarray:
    if group.p == 2:
        return np.arange(group.size, dtype=np.int64)
    return group.encode_array(-_digits_table(group.p, group.n))


@dataclass(frozen=True)
class LinearSubspaceSystem:
    """A table ``x -> V_x`` over an index space, with ``V_0 = {0}`` expected.

    ``group`` and ``ambient`` are coordinate spaces. When the system comes
    from a transverse set restricted to ``U x V``, ``U`` and ``V`` record the
    embedding: index ``c`` stands for ``U.from_coords(c)`` and the subspaces
    are written in the RREF coordinates of ``V``, whose standard dot product
    is the inner product used for complements.
    """

    group: FieldSpec
    ambient: FieldSpec
    table: tuple[Subspace, ...]
    U: Subspace | None = None
    V: Subspace | None = None

    def __post_init__(self) -> None:
        if len(self.table) != self.group.size:
            raise ValueError(f"table has {len(self.table)} entries for |G| = {self.group.size}")
        if self.group.p != self.ambient.p:
            raise ValueError("index space and ambient use different primes")

    @property
    def p(self) -> int:
        return self.group.p

    def __getitem__(self, x: int) -> Subspace:
        return self.table[x]

    @cached_property
    def index(self) -> SubspaceIndex:
        return SubspaceIndex(self.ambient)

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array([self.index.intern(V) for V in self.table], dtype=np.int64)

    @cached_property
    def dims(self) -> np.ndarray:
        return np.array([V.dim for V in self.table], dtype=np.int64)

    def validate(self) -> tuple[bool, tuple[int, int] | None]:
        """Check ``V_0 = {0}`` and ``V_{x1+x2} <= V_{x1} + V_{x2}`` for all pairs.

        Returns ``(True, None)`` or ``(False, witness)``; the witness ``(0, 0)``
        flags a nonzero ``V_0``.
        """
        if self.table[0].dim:
            return False, (0, 0)
        idx, ids = self.index, self.ids
        for x1 in range(self.group.size):
            s = add_row(self.group, x1)
            sums = idx.add_many(ids[x1], ids)
            # V_s <= V_x1 + V_x2  iff  adding V_s does not grow the sum
            grown = idx.add_many(sums, ids[s])
            bad = np.nonzero(idx.dims()[grown] != idx.dims()[sums])[0]
            if bad.size:
                return False, (x1, int(bad[0]))
        return True, None

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "nG": self.group.n,
            "nH": self.ambient.n,
            "V_basis": list(self.V.basis) if self.V is not None else None,
            "U_basis": list(self.U.basis) if self.U is not None else None,
            "table": [list(V.basis) for V in self.table],
        }

    @classmethod
    def from_json(cls, data: dict) -> LinearSubspaceSystem:
        group = FieldSpec(data["p"], data["nG"])
        amb = FieldSpec(data["p"], data["nH"])
        table = tuple(canonicalize(b, amb) for b in data["table"])
        return cls(group, amb, table)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def validate(S: LinearSubspaceSystem) -> tuple[bool, tuple[int, int] | None]:
    return S.validate()


def from_transverse(
    T: TransverseSet, V: Subspace | None = None, U: Subspace | None = None
) -> LinearSubspaceSystem:
    """``V_x = (A_{x.} & V)^perp`` taken inside ``V``, for ``x`` in ``U``.

    Defaults are ``U = G`` and ``V = H``; then coordinates are the usual ones.
    """
    G, H = T.ambient.G, T.ambient.H
    V = full_space(H) if V is None else V
    U = full_space(G) if U is None else U
    if not V.field == H or not U.field == G:
        raise ValueError("U and V must be subspaces of G and H")
    group = FieldSpec(G.p, U.dim)
    amb = FieldSpec(H.p, V.dim)
    table = []
    for c in range(group.size):
        x = U.from_coords(group.decode(c))
        W = intersect(T.columns[x], V)
        W_coords = canonicalize([_coord_encode(V, w) for w in W.basis], amb)
        table.append(orth_complement(W_coords))
    return LinearSubspaceSystem(group, amb, tuple(table), U=U, V=V)


def _coord_encode(V: Subspace, v: int) -> int:
    return FieldSpec(V.field.p, V.dim).encode(V.coords(v))


def check_scaling(S: LinearSubspaceSystem) -> bool:
    """``V_{lambda x} = V_x`` for every nonzero scalar and every x."""
    f = S.group
    for lam in range(2, f.p):
        for x in range(f.size):
            if S.table[f.scale(lam, x)] != S.table[x]:
                return False
    return True


def check_zero_sum(S: LinearSubspaceSystem, r: int) -> bool:
    """For every r-tuple summing to 0, dropping the last summand keeps the sum."""
    if not 1 <= r <= 4:
        raise ValueError("exhaustive zero-sum checks support 1 <= r <= 4")
    f = S.group
    idx, ids = S.index, S.ids
    neg = neg_table(f)
    if r == 1:
        return S.table[0].dim == 0
    # partial sums over all (r-1)-tuples, carried as (element, subspace id)
    elems = np.arange(f.size, dtype=np.int64)
    sums = ids.copy()
    for _ in range(r - 2):
        new_e, new_s = [], []
        for x in range(f.size):
            new_e.append(add_row(f, x)[elems])
            new_s.append(idx.add_many(sums, ids[x]))
        elems = np.concatenate(new_e)
        sums = np.concatenate(new_s)
    last = ids[neg[elems]]
    grown = idx.add_many(sums, last)
    return bool(np.all(idx.dims()[grown] == idx.dims()[sums]))


@dataclass(frozen=True)
class QuasirandomnessProfile:
    d: int
    eps1: Fraction
    eps2: Fraction

    def to_json(self) -> dict:
        return {"d": self.d, "eps1": str(self.eps1), "eps2": str(self.eps2)}


def quasirandomness_profile(S: LinearSubspaceSystem, d: int) -> QuasirandomnessProfile:
    """Exact fractions of x with ``dim V_x != d`` and of pairs with ``V_x1 & V_x2 != 0``.

    Diagonal pairs count like any other pair.
    """
    N = S.group.size
    bad1 = int(np.count_nonzero(S.dims != d))
    idx, ids = S.index, S.ids
    trivial = idx.trivial_many(ids[:, None], ids[None, :])
    bad2 = int(N * N - np.count_nonzero(trivial))
    return QuasirandomnessProfile(d, Fraction(bad1, N), Fraction(bad2, N * N))


def tuple_intersection_fraction(S: LinearSubspaceSystem, r: int) -> Fraction:
    """Fraction of ``(x0, ..., xr)`` with ``V_x0 & (V_x1 + ... + V_xr) != {0}``."""
    N = S.group.size
    idx, ids = S.index, S.ids
    sums = np.zeros(1, dtype=np.int64) + idx.intern(zero_space(S.ambient))
    for _ in range(r):
        sums = idx.add_many(sums[:, None], ids[None, :]).ravel()
    uniq, counts = np.unique(sums, return_counts=True)
    trivial = idx.trivial_many(ids[:, None], uniq[None, :])
    good = int((trivial * counts[None, :]).sum())
    total = N ** (r + 1)
    return Fraction(total - good, total)


def tuple_bound(S: LinearSubspaceSystem, d: int, r: int, eps: float) -> float:
    """Upper bound ``p^{rd} sqrt(eps) + r eps`` on that fraction."""
    return S.p ** (r * d) * eps**0.5 + r * eps


def all_zero_system(group: FieldSpec, ambient: FieldSpec) -> LinearSubspaceSystem:
    return LinearSubspaceSystem(group, ambient, (zero_space(ambient),) * group.size)


def lines_system(group: FieldSpec, M: np.ndarray | None = None) -> LinearSubspaceSystem:
    """``V_x = span{M x}`` (``M`` defaults to the identity), inside F_p^n."""
    amb = FieldSpec(group.p, group.n if M is None else np.asarray(M).shape[0])
    table = []
    for x in range(group.size):
        v = x
        if M is not None:
            v = int(amb.encode_array(np.asarray(M) @ np.array(group.decode(x), dtype=np.int64)))
        table.append(canonicalize([v], amb))
    return LinearSubspaceSystem(group, amb, tuple(table))
