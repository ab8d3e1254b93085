"""Subsets of G x H, the difference operators, and transverse sets."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator

import numpy as np

from .gf_linalg import (
    CapExceeded,
    DimensionMismatch,
    FieldSpec,
    Subspace,
    all_subspaces,
    canonicalize,
    full_space,
    intersect,
    member,
    orth_complement,
    random_subspace,
    zero_space,
)

GRID_CAP = 1 << 24


class NotTransverse(ValueError):
    """Raised with the first slice that is empty or not a subspace."""

    def __init__(self, kind: str, index: int, message: str = ""):
        self.kind = kind
        self.index = index
        super().__init__(message or f"{kind} slice at {index} is not a non-empty subspace")


@dataclass(frozen=True)
class Ambient2:
    p: int
    nG: int
    nH: int

    def __post_init__(self) -> None:
        if self.p ** (self.nG + self.nH) > GRID_CAP:
            raise CapExceeded(f"grid {self.p}^{self.nG} x {self.p}^{self.nH} exceeds cap {GRID_CAP}")
        # validates p and the dimensions
        FieldSpec(self.p, self.nG), FieldSpec(self.p, self.nH)

    @property
    def G(self) -> FieldSpec:
        return FieldSpec(self.p, self.nG)

    @property
    def H(self) -> FieldSpec:
        return FieldSpec(self.p, self.nH)

    @property
    def cells(self) -> int:
        return self.p ** (self.nG + self.nH)

    def header(self) -> dict:
        return {"p": self.p, "nG": self.nG, "nH": self.nH}


@lru_cache(maxsize=64)
def _diff_table(p: int, n: int) -> np.ndarray:
    """``table[a, b] = a - b`` on encodings of F_p^n."""
    f = FieldSpec(p, n)
    idx = np.arange(f.size, dtype=np.int64)
    if p == 2:
        return idx[:, None] ^ idx[None, :]
    digits = f.digits_array(list(range(f.size)))
    return f.encode_array(digits[:, None, :] - digits[None, :, :])


class GridSet:
    """A subset of G x H as a boolean array indexed ``[encode(x), encode(y)]``.

    Flattened row-major this is the bitset with cell index
    ``encode(x) * p^nH + encode(y)``.
    """

    def __init__(self, ambient: Ambient2, cells: np.ndarray):
        cells = np.asarray(cells, dtype=bool)
        shape = (ambient.G.size, ambient.H.size)
        if cells.shape != shape:
            raise DimensionMismatch(f"cell array has shape {cells.shape}, expected {shape}")
        self.ambient = ambient
        self.cells = cells
        self.cells.setflags(write=False)

    @classmethod
    def empty(cls, ambient: Ambient2) -> GridSet:
        return cls(ambient, np.zeros((ambient.G.size, ambient.H.size), dtype=bool))

    @classmethod
    def full(cls, ambient: Ambient2) -> GridSet:
        return cls(ambient, np.ones((ambient.G.size, ambient.H.size), dtype=bool))

    @classmethod
    def from_cells(cls, ambient: Ambient2, pairs) -> GridSet:
        cells = np.zeros((ambient.G.size, ambient.H.size), dtype=bool)
        for x, y in pairs:
            cells[x, y] = True
        return cls(ambient, cells)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GridSet)
            and self.ambient == other.ambient
            and bool(np.array_equal(self.cells, other.cells))
        )

    def __hash__(self) -> int:
        return hash((self.ambient, self.cells.tobytes()))

    def __contains__(self, cell) -> bool:
        x, y = cell
        return bool(self.cells[x, y])

    def __len__(self) -> int:
        return int(self.cells.sum())

    def __repr__(self) -> str:
        return f"GridSet({self.ambient}, |A|={len(self)})"

    @property
    def density(self) -> Fraction:
        return Fraction(len(self), self.ambient.cells)

    def pairs(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.cells)
        return list(zip(xs.tolist(), ys.tolist()))

    # -- serialization ---------------------------------------------------

    def to_hex(self) -> str:
        """Bit ``i`` of the bitset is bit ``i % 8`` of byte ``i // 8``."""
        return np.packbits(self.cells.ravel(), bitorder="little").tobytes().hex()

    @classmethod
    def from_hex(cls, ambient: Ambient2, text: str) -> GridSet:
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        expected = (ambient.cells + 7) // 8
        if raw.size != expected:
            raise ValueError(f"hex payload has {raw.size} bytes, expected {expected}")
        bits = np.unpackbits(raw, bitorder="little")
        if bits[ambient.cells:].any():
            raise ValueError("padding bits beyond the last cell are set")
        return cls(ambient, bits[: ambient.cells].reshape(ambient.G.size, ambient.H.size))

    def to_json(self) -> dict:
        return {"type": "gridset", **self.ambient.header(), "bits": self.to_hex()}

    @classmethod
    def from_json(cls, data: dict) -> GridSet:
        return cls.from_hex(Ambient2(data["p"], data["nG"], data["nH"]), data["bits"])


def row_slice(A: GridSet, y: int) -> set[int]:
    """``A_{.y} = {x : (x, y) in A}``."""
    A.ambient.H.check(y)
    return set(np.nonzero(A.cells[:, y])[0].tolist())


def col_slice(A: GridSet, x: int) -> set[int]:
    """``A_{x.} = {y : (x, y) in A}``."""
    A.ambient.G.check(x)
    return set(np.nonzero(A.cells[x, :])[0].tolist())


def dhor(A: GridSet) -> GridSet:
    """Horizontal difference set ``{(x1 - x2, y) : (x1, y), (x2, y) in A}``."""
    amb = A.ambient
    table = _diff_table(amb.p, amb.nG)
    out = np.zeros_like(A.cells)
    for y in range(amb.H.size):
        xs = np.nonzero(A.cells[:, y])[0]
        if xs.size:
            out[np.unique(table[np.ix_(xs, xs)]), y] = True
    return GridSet(amb, out)


def dver(A: GridSet) -> GridSet:
    """Vertical difference set ``{(x, y1 - y2) : (x, y1), (x, y2) in A}``."""
    amb = A.ambient
    table = _diff_table(amb.p, amb.nH)
    out = np.zeros_like(A.cells)
    for x in range(amb.G.size):
        ys = np.nonzero(A.cells[x, :])[0]
        if ys.size:
            out[x, np.unique(table[np.ix_(ys, ys)])] = True
    return GridSet(amb, out)


def _as_subspace(elems, f: FieldSpec) -> Subspace | None:
    elems = [int(e) for e in elems]
    if not elems or 0 not in elems:
        return None
    S = canonicalize(elems, f)
    return S if S.size == len(elems) else None


def transverse_violation(A: GridSet) -> tuple[str, int] | None:
    """First failing slice as ``("row", y)`` or ``("column", x)``, else None."""
    amb = A.ambient
    for y in range(amb.H.size):
        if _as_subspace(np.nonzero(A.cells[:, y])[0], amb.G) is None:
            return ("row", y)
    for x in range(amb.G.size):
        if _as_subspace(np.nonzero(A.cells[x, :])[0], amb.H) is None:
            return ("column", x)
    return None


def is_transverse(A: GridSet) -> bool:
    return transverse_violation(A) is None


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TransverseSet:
    """A transverse subset of G x H stored column by column.

    ``columns[x]`` is the subspace ``A_{x.}`` of H. Use :meth:`from_columns`
    to build a checked instance.
    """

    ambient: Ambient2
    columns: tuple[Subspace, ...]

    @classmethod
    def from_columns(cls, ambient: Ambient2, columns, check: bool = True) -> TransverseSet:
        columns = tuple(columns)
        if len(columns) != ambient.G.size:
            raise DimensionMismatch(f"{len(columns)} columns for |G| = {ambient.G.size}")
        for c in columns:
            if c.field != ambient.H:
                raise DimensionMismatch(f"column lives in {c.field}, expected {ambient.H}")
        T = cls(ambient, columns)
        if check:
            bad = T.violation()
            if bad is not None:
                raise NotTransverse(*bad)
        return T

    @classmethod
    def full(cls, ambient: Ambient2) -> TransverseSet:
        return cls(ambient, (full_space(ambient.H),) * ambient.G.size)

    def violation(self) -> tuple[str, int] | None:
        H = self.ambient.H
        if self.columns[0] != full_space(H):
            # every row must contain x = 0
            missing = next(y for y in range(H.size) if not member(y, self.columns[0]))
            return ("row", missing)
        return transverse_violation(self.to_gridset())

    def column(self, x: int) -> Subspace:
        return self.columns[x]

    def row(self, y: int) -> Subspace:
        G = self.ambient.G
        return canonicalize([x for x in range(G.size) if member(y, self.columns[x])], G)

    def __contains__(self, cell) -> bool:
        x, y = cell
        return member(y, self.columns[x])

    @cached_property
    def size(self) -> int:
        return sum(c.size for c in self.columns)

    @property
    def density(self) -> Fraction:
        return Fraction(self.size, self.ambient.cells)

    def to_gridset(self) -> GridSet:
        return to_gridset(self)

    def to_json(self) -> dict:
        return {
            "type": "transverse",
            **self.ambient.header(),
            "columns": [list(c.basis) for c in self.columns],
        }

    @classmethod
    def from_json(cls, data: dict, check: bool = True) -> TransverseSet:
        amb = Ambient2(data["p"], data["nG"], data["nH"])
        cols = [canonicalize(b, amb.H) for b in data["columns"]]
        return cls.from_columns(amb, cols, check=check)

    def digest(self) -> str:
        import hashlib

        payload = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def to_gridset(T: TransverseSet) -> GridSet:
    amb = T.ambient
    cells = np.zeros((amb.G.size, amb.H.size), dtype=bool)
    for x, col in enumerate(T.columns):
        cells[x, col.elements()] = True
    return GridSet(amb, cells)


def to_transverse(A: GridSet) -> TransverseSet:
    bad = transverse_violation(A)
    if bad is not None:
        raise NotTransverse(*bad)
    amb = A.ambient
    cols = [canonicalize(np.nonzero(A.cells[x])[0].tolist(), amb.H) for x in range(amb.G.size)]
    return TransverseSet(amb, tuple(cols))


def from_lss(S) -> TransverseSet:
    """The transverse set ``union_x {x} x V_x^perp`` of a linear system."""
    if hasattr(S, "validate"):
        ok, witness = S.validate()
        if not ok:
            raise ValueError(f"invalid linear system of subspaces, witness {witness}")
    amb = Ambient2(S.group.p, S.group.n, S.ambient.n)
    return TransverseSet.from_columns(amb, [orth_complement(V) for V in S.table], check=False)


# --------------------------------------------------------------------------
# Test-data generation.


@dataclass(frozen=True)
class BilinearMapSpec:
    """Recipe for a random variety-generated transverse set.

    ``r`` random forms (nG x nH matrices) cut the variety out of random
    subspaces of dimensions ``dim_U`` and ``dim_V`` (full by default).
    """

    p: int
    nG: int
    nH: int
    r: int
    dim_U: int | None = None
    dim_V: int | None = None


def random_bilinear_data(spec: BilinearMapSpec, seed) -> tuple[Subspace, Subspace, np.ndarray]:
    """``(U, V, forms)`` drawn from ``seed``; ``forms`` has shape (r, nG, nH)."""
    amb = Ambient2(spec.p, spec.nG, spec.nH)
    rng = np.random.default_rng(seed)
    dim_U = spec.nG if spec.dim_U is None else spec.dim_U
    dim_V = spec.nH if spec.dim_V is None else spec.dim_V
    U = random_subspace(amb.G, dim_U, rng)
    V = random_subspace(amb.H, dim_V, rng)
    forms = rng.integers(0, spec.p, size=(spec.r, spec.nG, spec.nH)).astype(np.int64)
    return U, V, forms


def zero_set_column(x: int, V: Subspace, forms: np.ndarray, G: FieldSpec) -> Subspace:
    """``{y in V : x^T B_i y = 0 for all i}``."""
    H = V.field
    if forms.shape[0] == 0:
        return V
    xd = np.array(G.decode(x), dtype=np.int64)
    rows = (xd @ forms) % H.p  # shape (r, nH): the functionals y -> x^T B_i y
    ann = canonicalize([int(c) for c in H.encode_array(rows)], H)
    return intersect(V, orth_complement(ann))


def gen_from_bilinear(spec: BilinearMapSpec, seed) -> TransverseSet:
    """Zero set of random forms on ``U x V``, completed to a transverse set.

    Column 0 is H and columns outside U are {0}; the row condition is
    re-verified before returning.
    """
    amb = Ambient2(spec.p, spec.nG, spec.nH)
    U, V, forms = random_bilinear_data(spec, seed)
    cols = []
    for x in range(amb.G.size):
        if x == 0:
            cols.append(full_space(amb.H))
        elif not member(x, U):
            cols.append(zero_space(amb.H))
        else:
            cols.append(zero_set_column(x, V, forms, amb.G))
    return TransverseSet.from_columns(amb, cols, check=True)


def enumerate_transverse_small(ambient: Ambient2) -> Iterator[TransverseSet]:
    """Every transverse set on a tiny ambient, each exactly once.

    Columns are assigned in encoding order with column 0 fixed to H; a
    partial assignment is pruned as soon as some already-assigned triple
    ``x1, x2, x1 + x2`` breaks ``A_{x1.} & A_{x2.} <= A_{x1+x2.}`` (rows
    closed under addition, which over F_p also gives closure under scaling).
    """
    G, H = ambient.G, ambient.H
    if G.size > 16 or H.size > 16:
        raise CapExceeded("exhaustive enumeration needs p^nG, p^nH <= 16")
    subs = all_subspaces(H)
    k = len(subs)
    ids = {s: i for i, s in enumerate(subs)}
    meet = np.empty((k, k), dtype=np.int64)
    for i, a in enumerate(subs):
        for j, b in enumerate(subs):
            meet[i, j] = ids[intersect(a, b)]
    leq = np.array([[a <= b for b in subs] for a in subs], dtype=bool)
    add = _diff_table(G.p, G.n)  # reused for sums below
    neg = np.array([add[0, x] for x in range(G.size)])  # 0 - x
    plus = add[:, neg]  # plus[a, b] = a - (-b) = a + b

    checks: list[list[tuple[int, int, int]]] = [[] for _ in range(G.size)]
    for x1 in range(G.size):
        for x2 in range(G.size):
            s = int(plus[x1, x2])
            checks[max(x1, x2, s)].append((x1, x2, s))

    full_id = ids[full_space(H)]
    assign = [full_id] + [-1] * (G.size - 1)

    def consistent(x: int) -> bool:
        for x1, x2, s in checks[x]:
            if not leq[meet[assign[x1], assign[x2]], assign[s]]:
                return False
        return True

    def rec(x: int) -> Iterator[TransverseSet]:
        if x == G.size:
            yield TransverseSet(ambient, tuple(subs[i] for i in assign))
            return
        for i in range(k):
            assign[x] = i
            if consistent(x):
                yield from rec(x + 1)
        assign[x] = -1

    if consistent(0):
        yield from rec(1)
