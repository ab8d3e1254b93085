"""Exact linear algebra over F_p.

Vectors of F_p^n are plain Python integers: coordinate ``i`` is base-p digit
``i`` of the encoding. For ``p = 2`` an encoding is a bit pattern and all row
operations are XORs on machine words.

Subspaces are stored by their reduced row-echelon basis, ordered by pivot
(the lowest nonzero coordinate of a row). That form is canonical, so two
``Subspace`` values compare equal exactly when they span the same space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_P = 17
MAX_N = 16
ENUM_CAP = 1 << 20


class DimensionMismatch(ValueError):
    """Vectors or subspaces from different ambient spaces were combined."""


class CapExceeded(ValueError):
    """An exhaustive operation would exceed its configured size cap."""


def is_prime(p: int) -> bool:
    return p >= 2 and all(p % q for q in range(2, int(p**0.5) + 1))


@lru_cache(maxsize=1 << 16)
def _digits(p: int, n: int, v: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        v, d = divmod(v, p)
        out.append(d)
    return tuple(out)


def _encode(p: int, digits: Iterable[int]) -> int:
    v = 0
    for d in reversed(list(digits)):
        v = v * p + (d % p)
    return v


@dataclass(frozen=True)
class FieldSpec:
    """The space F_p^n."""

    p: int
    n: int

    def __post_init__(self) -> None:
        if not is_prime(self.p) or self.p > MAX_P:
            raise ValueError(f"p must be a prime <= {MAX_P}, got {self.p}")
        if not 0 <= self.n <= MAX_N:
            raise ValueError(f"n must lie in [0, {MAX_N}], got {self.n}")

    @property
    def size(self) -> int:
        return self.p**self.n

    def encode(self, digits: Sequence[int]) -> int:
        if len(digits) != self.n:
            raise DimensionMismatch(f"expected {self.n} coordinates, got {len(digits)}")
        return _encode(self.p, digits)

    def decode(self, v: int) -> tuple[int, ...]:
        self.check(v)
        return _digits(self.p, self.n, v)

    def check(self, v: int) -> None:
        if not 0 <= v < self.size:
            raise DimensionMismatch(f"{v} is not a vector of F_{self.p}^{self.n}")

    def unit(self, i: int) -> int:
        return self.p**i

    def add(self, u: int, v: int) -> int:
        if self.p == 2:
            return u ^ v
        p, n = self.p, self.n
        return _encode(p, [a + b for a, b in zip(_digits(p, n, u), _digits(p, n, v))])

    def scale(self, c: int, v: int) -> int:
        c %= self.p
        if c == 0:
            return 0
        if self.p == 2 or c == 1:
            return v
        return _encode(self.p, [c * a for a in _digits(self.p, self.n, v)])

    def neg(self, v: int) -> int:
        return self.scale(-1, v)

    def sub(self, u: int, v: int) -> int:
        return self.add(u, self.neg(v))

    def dot(self, u: int, v: int) -> int:
        if self.p == 2:
            return (u & v).bit_count() & 1
        p, n = self.p, self.n
        return sum(a * b for a, b in zip(_digits(p, n, u), _digits(p, n, v))) % p

    def digits_array(self, vectors: Sequence[int]) -> np.ndarray:
        """Coordinates of ``vectors`` as an int64 array of shape (len, n)."""
        if not vectors:
            return np.zeros((0, self.n), dtype=np.int64)
        return np.array([_digits(self.p, self.n, v) for v in vectors], dtype=np.int64).reshape(
            len(vectors), self.n
        )

    def encode_array(self, arr: np.ndarray) -> np.ndarray:
        """Encode the last axis of a digit array (entries reduced mod p)."""
        arr = np.asarray(arr, dtype=np.int64) % self.p
        if self.size >= 1 << 62:
            flat = arr.reshape(-1, self.n)
            return np.array([_encode(self.p, row) for row in flat], dtype=object).reshape(arr.shape[:-1])
        weights = self.p ** np.arange(self.n, dtype=np.int64)
        return arr @ weights


# --------------------------------------------------------------------------
# Row reduction on encodings.


def _rref2(vectors: Iterable[int]) -> list[int]:
    rows: list[int] = []
    for v in vectors:
        for r in rows:
            if v & (r & -r):
                v ^= r
        if v:
            low = v & -v
            rows = [r ^ v if r & low else r for r in rows]
            rows.append(v)
    rows.sort(key=lambda r: r & -r)
    return rows


def _lead(row: list[int]) -> int:
    for i, a in enumerate(row):
        if a:
            return i
    return -1


def _rrefp(p: int, n: int, vectors: Iterable[int]) -> list[int]:
    rows: list[list[int]] = []
    pivots: list[int] = []
    for v in vectors:
        row = list(_digits(p, n, v))
        for r, c in zip(rows, pivots):
            a = row[c]
            if a:
                row = [(x - a * y) % p for x, y in zip(row, r)]
        c = _lead(row)
        if c < 0:
            continue
        inv = pow(row[c], -1, p)
        row = [(x * inv) % p for x in row]
        for i, r in enumerate(rows):
            a = r[c]
            if a:
                rows[i] = [(x - a * y) % p for x, y in zip(r, row)]
        rows.append(row)
        pivots.append(c)
    order = sorted(range(len(rows)), key=pivots.__getitem__)
    return [_encode(p, rows[i]) for i in order]


def rref(field_: FieldSpec, vectors: Iterable[int]) -> list[int]:
    """Reduced row-echelon basis of the span of ``vectors``."""
    if field_.p == 2:
        return _rref2(vectors)
    return _rrefp(field_.p, field_.n, vectors)


def _pivot(field_: FieldSpec, row: int) -> int:
    if field_.p == 2:
        return (row & -row).bit_length() - 1
    return _lead(list(field_.decode(row)))


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Subspace:
    """A subspace of F_p^n held by its canonical RREF basis.

    Build instances through :func:`canonicalize` (or the helpers below); the
    constructor trusts that ``basis`` is already canonical.
    """

    field: FieldSpec
    basis: tuple[int, ...] = ()

    @cached_property
    def pivots(self) -> tuple[int, ...]:
        return tuple(_pivot(self.field, r) for r in self.basis)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def codim(self) -> int:
        return self.field.n - len(self.basis)

    @property
    def size(self) -> int:
        return self.field.p ** len(self.basis)

    def __contains__(self, v: int) -> bool:
        return member(v, self)

    def __add__(self, other: Subspace) -> Subspace:
        return subspace_sum(self, other)

    def __and__(self, other: Subspace) -> Subspace:
        return intersect(self, other)

    def __le__(self, other: Subspace) -> bool:
        return all(member(b, other) for b in self.basis)

    def perp(self) -> Subspace:
        return orth_complement(self)

    def coords(self, v: int) -> tuple[int, ...]:
        """Coordinates of ``v`` in the RREF basis (its digits at the pivots)."""
        d = self.field.decode(v)
        return tuple(d[c] for c in self.pivots)

    def from_coords(self, coeffs: Sequence[int]) -> int:
        f = self.field
        v = 0
        for c, b in zip(coeffs, self.basis):
            if c % f.p:
                v = f.add(v, f.scale(c, b))
        return v

    def elements(self, cap: int = ENUM_CAP) -> list[int]:
        return enumerate_subspace(self, cap)

    def to_json(self) -> dict:
        return {"p": self.field.p, "n": self.field.n, "basis": list(self.basis)}

    @classmethod
    def from_json(cls, data: dict) -> Subspace:
        return canonicalize(data["basis"], FieldSpec(data["p"], data["n"]))


def canonicalize(vectors: Iterable[int], field_: FieldSpec) -> Subspace:
    vectors = list(vectors)
    for v in vectors:
        field_.check(v)
    return Subspace(field_, tuple(rref(field_, vectors)))


def zero_space(field_: FieldSpec) -> Subspace:
    return Subspace(field_, ())


def full_space(field_: FieldSpec) -> Subspace:
    return Subspace(field_, tuple(field_.unit(i) for i in range(field_.n)))


def span(field_: FieldSpec, *vectors: int) -> Subspace:
    return canonicalize(vectors, field_)


def _same_ambient(U: Subspace, W: Subspace) -> None:
    if U.field != W.field:
        raise DimensionMismatch(f"ambient mismatch: {U.field} vs {W.field}")


def subspace_sum(U: Subspace, W: Subspace) -> Subspace:
    _same_ambient(U, W)
    if not W.basis:
        return U
    if not U.basis:
        return W
    return Subspace(U.field, tuple(rref(U.field, U.basis + W.basis)))


def orth_complement(U: Subspace) -> Subspace:
    """Complement under the standard dot product ``sum x_i y_i mod p``."""
    f = U.field
    pivots = U.pivots
    pset = set(pivots)
    rows = [f.decode(b) for b in U.basis]
    out = []
    for j in range(f.n):
        if j in pset:
            continue
        digits = [0] * f.n
        digits[j] = 1
        for row, c in zip(rows, pivots):
            digits[c] = (-row[j]) % f.p
        out.append(_encode(f.p, digits))
    return Subspace(f, tuple(rref(f, out)))


def intersect(U: Subspace, W: Subspace) -> Subspace:
    """Intersection computed as ``(U^perp + W^perp)^perp``."""
    _same_ambient(U, W)
    if not U.basis or not W.basis:
        return zero_space(U.field)
    if U == W:
        return U
    return orth_complement(subspace_sum(orth_complement(U), orth_complement(W)))


def intersect_zassenhaus(U: Subspace, W: Subspace) -> Subspace:
    """Direct intersection by the Zassenhaus block reduction.

    Kept as an independent route to cross-check :func:`intersect`.
    """
    _same_ambient(U, W)
    f = U.field
    big = FieldSpec(f.p, 2 * f.n) if 2 * f.n <= MAX_N else None
    n = f.n
    if big is not None:
        shift = f.p**n
        rows = [b + b * shift for b in U.basis] + [w for w in W.basis]
        reduced = rref(big, rows)
        # rows whose low half vanishes carry the intersection in the high half
        return canonicalize([r // shift for r in reduced if r % shift == 0], f)
    # wide ambient: same reduction on explicit digit lists
    p = f.p
    rows2 = [list(f.decode(b)) * 2 for b in U.basis] + [list(f.decode(w)) + [0] * n for w in W.basis]
    mat = rref_rows(rows2, p)
    out = [_encode(p, r[n:]) for r in mat if not any(r[:n])]
    return canonicalize(out, f)


def rref_rows(rows: list[list[int]], p: int) -> list[list[int]]:
    rows = [[int(x) % p for x in r] for r in rows]
    width = len(rows[0]) if rows else 0
    r0 = 0
    for c in range(width):
        piv = next((i for i in range(r0, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r0], rows[piv] = rows[piv], rows[r0]
        inv = pow(rows[r0][c], -1, p)
        rows[r0] = [(x * inv) % p for x in rows[r0]]
        for i in range(len(rows)):
            if i != r0 and rows[i][c]:
                a = rows[i][c]
                rows[i] = [(x - a * y) % p for x, y in zip(rows[i], rows[r0])]
        r0 += 1
    return rows[:r0]


def member(v: int, U: Subspace) -> bool:
    f = U.field
    f.check(v)
    if f.p == 2:
        for r in U.basis:
            if v & (r & -r):
                v ^= r
        return v == 0
    d = list(f.decode(v))
    for r, c in zip(U.basis, U.pivots):
        a = d[c]
        if a:
            d = [(x - a * y) % f.p for x, y in zip(d, f.decode(r))]
    return not any(d)


def enumerate_subspace(U: Subspace, cap: int = ENUM_CAP) -> list[int]:
    """All ``p^dim`` vectors of ``U``; 0 comes first."""
    f = U.field
    if U.size > cap:
        raise CapExceeded(f"subspace of size {U.size} exceeds enumeration cap {cap}")
    elems = [0]
    if f.p == 2:
        for b in U.basis:
            elems += [e ^ b for e in elems]
        return elems
    for b in U.basis:
        multiples = [f.scale(c, b) for c in range(1, f.p)]
        elems = elems + [f.add(e, m) for m in multiples for e in elems]
    return elems


def random_subspace(field_: FieldSpec, dim: int, seed) -> Subspace:
    """A subspace of exactly ``dim`` dimensions, deterministic in ``seed``."""
    if not 0 <= dim <= field_.n:
        raise ValueError(f"dim {dim} outside [0, {field_.n}]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rows: list[int] = []
    while len(rows) < dim:
        v = _encode(field_.p, rng.integers(0, field_.p, size=field_.n).tolist())
        cand = rref(field_, rows + [v])
        if len(cand) > len(rows):
            rows = cand
    return Subspace(field_, tuple(rows))


def random_vector(field_: FieldSpec, rng: np.random.Generator) -> int:
    return _encode(field_.p, rng.integers(0, field_.p, size=field_.n).tolist())


# --------------------------------------------------------------------------
# Matrices. A linear map F_p^k -> F_p^m is an int64 array of shape (m, k).


def mat_mod(M, p: int) -> np.ndarray:
    return np.asarray(M, dtype=np.int64) % p


def rank_mod_p(M: np.ndarray, p: int) -> int:
    rows = [list(r) for r in np.asarray(M, dtype=np.int64).tolist()]
    if not rows or not rows[0]:
        return 0
    return len(rref_rows(rows, p))


def solve_mod_p(A: np.ndarray, b: np.ndarray, p: int) -> np.ndarray | None:
    """One solution ``x`` of ``A x = b`` over F_p, or None if inconsistent."""
    A = np.asarray(A, dtype=np.int64) % p
    b = np.asarray(b, dtype=np.int64).reshape(-1) % p
    m, k = A.shape
    aug = [list(A[i]) + [int(b[i])] for i in range(m)]
    red = rref_rows(aug, p) if aug else []
    x = np.zeros(k, dtype=np.int64)
    for row in red:
        c = _lead(row)
        if c == k:
            return None
        x[c] = row[k]
    return x


def column_space(M: np.ndarray, field_: FieldSpec) -> Subspace:
    """Image of the map with matrix ``M`` (shape (n, k)) inside ``field_``."""
    M = np.asarray(M, dtype=np.int64) % field_.p
    if M.size == 0:
        return zero_space(field_)
    cols = field_.encode_array(M.T)
    return canonicalize([int(c) for c in cols], field_)


def basis_matrix(U: Subspace) -> np.ndarray:
    """Matrix of shape (n, dim) whose columns are the RREF basis of ``U``."""
    return U.field.digits_array(list(U.basis)).T.copy()


# --------------------------------------------------------------------------


@dataclass
class SubspaceIndex:
    """Interns subspaces as small integers and memoizes sums and meets.

    Hot counting loops (anchor scoring, validation) touch the same handful of
    subspaces millions of times; ids make those lookups array-friendly.
    """

    field: FieldSpec
    spaces: list[Subspace] = field(default_factory=list)
    _ids: dict[Subspace, int] = field(default_factory=dict)
    _sum: dict[tuple[int, int], int] = field(default_factory=dict)
    _trivial: dict[tuple[int, int], bool] = field(default_factory=dict)
    _masks: list[int] = field(default_factory=list)

    @property
    def small(self) -> bool:
        """Ambients of at most 64 vectors carry a bitmask of elements per subspace."""
        return self.field.size <= 64

    def intern(self, U: Subspace) -> int:
        i = self._ids.get(U)
        if i is None:
            _same_ambient(U, Subspace(self.field))
            i = len(self.spaces)
            self.spaces.append(U)
            self._ids[U] = i
            if self.small:
                self._masks.append(sum(1 << e for e in U.elements()))
        return i

    def dim(self, i: int) -> int:
        return self.spaces[i].dim

    def dims(self) -> np.ndarray:
        return np.array([s.dim for s in self.spaces], dtype=np.int64)

    def add(self, i: int, j: int) -> int:
        key = (i, j) if i <= j else (j, i)
        out = self._sum.get(key)
        if out is None:
            out = self.intern(subspace_sum(self.spaces[i], self.spaces[j]))
            self._sum[key] = out
        return out

    def meets_trivially(self, i: int, j: int) -> bool:
        key = (i, j) if i <= j else (j, i)
        out = self._trivial.get(key)
        if out is None:
            out = self.dim(self.add(i, j)) == self.dim(i) + self.dim(j)
            self._trivial[key] = out
        return out

    def add_many(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """Elementwise ``add`` over id arrays, computing each distinct pair once."""
        left = np.asarray(left, dtype=np.int64)
        right = np.asarray(right, dtype=np.int64)
        left, right = np.broadcast_arrays(left, right)
        lo, hi = np.minimum(left, right), np.maximum(left, right)
        key = lo * (1 << 31) + hi
        uniq, inverse = np.unique(key.ravel(), return_inverse=True)
        vals = np.array([self.add(int(k >> 31), int(k & ((1 << 31) - 1))) for k in uniq], dtype=np.int64)
        return vals[inverse].reshape(left.shape)

    def trivial_many(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        left = np.asarray(left, dtype=np.int64)
        right = np.asarray(right, dtype=np.int64)
        left, right = np.broadcast_arrays(left, right)
        if self.small:
            masks = np.array(self._masks, dtype=np.uint64)
            return (masks[left] & masks[right]) == 1
        lo, hi = np.minimum(left, right), np.maximum(left, right)
        key = lo * (1 << 31) + hi
        uniq, inverse = np.unique(key.ravel(), return_inverse=True)
        vals = np.array(
            [self.meets_trivially(int(k >> 31), int(k & ((1 << 31) - 1))) for k in uniq], dtype=bool
        )
        return vals[inverse].reshape(left.shape)


def all_subspaces(field_: FieldSpec, cap: int = 1 << 16, max_dim: int | None = None) -> list[Subspace]:
    """Every subspace of a small ambient space (up to ``max_dim``), smallest dimension first."""
    found: set[Subspace] = {zero_space(field_)}
    frontier = [zero_space(field_)]
    vectors = range(1, field_.size)
    while frontier and (max_dim is None or frontier[0].dim < max_dim):
        nxt = []
        for U in frontier:
            for v in vectors:
                if member(v, U):
                    continue
                W = Subspace(field_, tuple(rref(field_, U.basis + (v,))))
                if W not in found:
                    found.add(W)
                    nxt.append(W)
                    if len(found) > cap:
                        raise CapExceeded(f"more than {cap} subspaces")
        frontier = nxt
    return sorted(found, key=lambda s: (s.dim, s.basis))


def iter_products(p: int, k: int) -> Iterator[tuple[int, ...]]:
    return itertools.product(range(p), repeat=k)
