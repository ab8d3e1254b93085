"""Regularization, bilinear structure recovery and certified variety extraction.

The pipeline has three stages:

1. :func:`regularize` finds ``U <= G``, ``V <= H`` and ``d`` such that almost
   every column of ``A`` meets ``V`` in codimension ``d`` and almost every
   pair of columns meets ``V`` in codimension ``2d``.
2. :func:`bilinear_system_structure` turns the resulting linear system
   ``V_x = (A_x & V)^perp`` into an affine family of matrices
   ``x -> Phi(x, .) + Psi`` whose images equal ``V_x`` on a certified good set.
3. :func:`extract_variety` reads bilinear forms off ``Phi`` and certifies
   that their zero set inside ``U x V'`` lies in ``A``.

Every stage checks its own output by exact counting; the randomized choices
only decide where to look.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .gf_linalg import (
    CapExceeded,
    FieldSpec,
    Subspace,
    SubspaceIndex,
    all_subspaces,
    basis_matrix,
    canonicalize,
    column_space,
    intersect,
    orth_complement,
)
from .gridset import GRID_CAP, TransverseSet
from .lemma_engines import (
    EpsilonTooLarge,
    NoConsensus,
    PartialMap,
    _neg,
    _sum_table,
    canonical_isomorphism,
    extend_near_homomorphism,
    quad_isomorphisms_batch,
)
from .lss import LinearSubspaceSystem, from_transverse
from .variety import BilinearMapTuple, BilinearVariety, ContainmentCertificate, contained_in

TUPLE_CAP = 1 << 20
EXACT_ANCHOR_TRIPLES = 1 << 18
SAMPLED_ANCHOR_TRIPLES = 1 << 14
STRUCTURE_CAP = 1 << 12


class ExtractionError(RuntimeError):
    """Base class for pipeline failures; ``diagnostics`` is JSON-ready."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class BudgetExceeded(ExtractionError):
    pass


class AnchorTooWeak(ExtractionError):
    pass


class ConsensusFailed(ExtractionError):
    pass


class ExtensionFailed(ExtractionError):
    pass


class CertificationFailed(ExtractionError):
    pass


def _frac(x) -> str:
    return str(Fraction(x))


def ceil_log(p: int, value: Fraction) -> int:
    """Smallest integer ``k >= 0`` with ``p^k >= value``, in exact arithmetic."""
    k = 0
    while p**k < value:
        k += 1
    return k


def d0_bound(p: int, delta: Fraction) -> int:
    """``ceil(log_p(10^4 / delta^4))``."""
    return ceil_log(p, Fraction(10**4) / Fraction(delta) ** 4)


def drc_rounds(p: int, eps: Fraction) -> int:
    """``ceil(2 log_p(4 / eps))``, the number of random row elements per step."""
    return ceil_log(p, (4 / Fraction(eps)) ** 2)


# --------------------------------------------------------------------------
# Regularity lemma.


@dataclass
class RegularityOutput:
    U: Subspace
    V: Subspace
    d: int
    eps_target: Fraction
    exceptions_i: Fraction
    exceptions_ii: Fraction
    d0_formula: int
    d0_used: int
    y0: int
    x0: int
    history: list[dict] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.exceptions_i <= self.eps_target and self.exceptions_ii <= 3 * self.eps_target

    def to_json(self) -> dict:
        return {
            "U_basis": list(self.U.basis),
            "V_basis": list(self.V.basis),
            "d": self.d,
            "codim_U": self.U.codim,
            "codim_V": self.V.codim,
            "eps": _frac(self.eps_target),
            "exceptions_i": _frac(self.exceptions_i),
            "exceptions_ii": _frac(self.exceptions_ii),
            "d0_formula": self.d0_formula,
            "d0_used": self.d0_used,
            "y0": self.y0,
            "x0": self.x0,
            "history": self.history,
        }


@dataclass
class _Counts:
    xs: np.ndarray
    codim: np.ndarray  # codim_V(A_x & V) for each x in xs
    irregular: np.ndarray  # bool matrix over xs x xs

    def fractions(self, D: int) -> tuple[Fraction, Fraction]:
        n = len(self.xs)
        return (
            Fraction(int(np.count_nonzero(self.codim != D)), n),
            Fraction(int(np.count_nonzero(self.irregular)), n * n),
        )


def _slice_counts(A: TransverseSet, U: Subspace, V: Subspace, D: int) -> _Counts:
    xs = np.array(U.elements(), dtype=np.int64)
    idx = SubspaceIndex(A.ambient.H)
    ids = np.array([idx.intern(intersect(A.columns[int(x)], V)) for x in xs], dtype=np.int64)
    dims = idx.dims()[ids]
    sums = idx.add_many(ids[:, None], ids[None, :])
    meet = dims[:, None] + dims[None, :] - idx.dims()[sums]
    return _Counts(xs, V.dim - dims, (V.dim - meet) != 2 * D)


def _codims(A: TransverseSet, xs: np.ndarray, V: Subspace) -> np.ndarray:
    return np.array([V.dim - intersect(A.columns[int(x)], V).dim for x in xs], dtype=np.int64)


def _start_pair(A: TransverseSet, delta: Fraction) -> tuple[int, int]:
    """Row ``y0`` and column ``x0`` meeting the size conditions of the initial step.

    Among valid candidates the largest slice wins, ties by smallest encoding.
    """
    cells = A.to_gridset().cells
    nG, nH = cells.shape
    col_size = cells.sum(axis=1).astype(object)
    row_size = cells.sum(axis=0).astype(object)
    sq = Fraction(delta) ** 2
    big_col = np.array([c * 100 >= sq * nH for c in col_size], dtype=bool)
    big_row = np.array([c * 100 >= sq * nG for c in row_size], dtype=bool)

    def pick(sizes, total, other_big, slice_of):
        best = None
        for i in range(len(sizes)):
            if sizes[i] * 2 < delta * total:
                continue
            members = slice_of(i)
            if 10 * np.count_nonzero(other_big[members]) < 9 * len(members):
                continue
            if best is None or sizes[i] > sizes[best]:
                best = i
        return best

    y0 = pick(row_size, nG, big_col, lambda y: np.nonzero(cells[:, y])[0])
    x0 = pick(col_size, nH, big_row, lambda x: np.nonzero(cells[x])[0])
    if y0 is None or x0 is None:  # excluded by the averaging argument
        raise BudgetExceeded("no admissible starting row or column", y0=y0, x0=x0)
    return int(y0), int(x0)


def _densify(
    A: TransverseSet,
    cells: np.ndarray,
    U: Subspace,
    Vn: Subspace,
    D: int,
    eps: Fraction,
    r: int,
    rng: np.random.Generator,
    mode: str,
    retries: int,
) -> tuple[Subspace, dict]:
    """Dependent random choice: ``U' = U & A_{.y1} & ... & A_{.yr}`` with few bad x.

    ``x`` is bad when ``codim_{Vn}(A_x & Vn) >= D``; success means
    ``|U'| - (2/eps)|bad| > 0``. Rows of a transverse set only depend on the
    span of the chosen y's, so the exhaustive fallback walks subspaces of
    ``Vn`` of dimension at most r instead of r-tuples.
    """
    xs = np.array(U.elements(), dtype=np.int64)
    bad_x = _codims(A, xs, Vn) >= D

    def score(ys: list[int]) -> tuple[Fraction, int, int]:
        keep = cells[np.ix_(xs, ys)].all(axis=1) if ys else np.ones(len(xs), dtype=bool)
        size = int(np.count_nonzero(keep))
        bad = int(np.count_nonzero(keep & bad_x))
        return size - 2 * bad / eps, size, bad

    def build(ys: list[int]) -> Subspace:
        keep = cells[np.ix_(xs, ys)].all(axis=1) if ys else np.ones(len(xs), dtype=bool)
        return canonicalize(xs[keep].tolist(), U.field)

    best: tuple | None = None
    if mode == "sampled":
        for attempt in range(retries):
            ys = [Vn.from_coords(rng.integers(0, Vn.field.p, size=Vn.dim).tolist()) for _ in range(r)]
            obj, size, bad = score(ys)
            if best is None or obj > best[0]:
                best = (obj, size, bad)
            if obj > 0:
                return build(ys), {"route": "sampled", "attempt": attempt, "size": size, "bad": bad}
    elif mode != "exhaustive":
        raise ValueError(f"unknown regularization mode {mode!r}")

    k = min(r, Vn.dim)
    if Vn.size**k > TUPLE_CAP:
        raise BudgetExceeded(
            "random choices failed and the exhaustive fallback is too large",
            best_objective=None if best is None else float(best[0]),
            dim_V=Vn.dim,
            r=r,
        )
    coord = FieldSpec(Vn.field.p, Vn.dim)
    chosen = None
    for Y in all_subspaces(coord, cap=TUPLE_CAP, max_dim=k):
        ys = [Vn.from_coords(coord.decode(v)) for v in Y.basis]
        obj, size, bad = score(ys)
        if obj > 0 and (chosen is None or obj > chosen[0]):
            chosen = (obj, size, bad, ys)
    if chosen is None:
        raise BudgetExceeded("no choice of row elements keeps the bad set small", dim_V=Vn.dim, r=r)
    return build(chosen[3]), {"route": "exhaustive", "size": chosen[1], "bad": chosen[2]}


def regularize(
    A: TransverseSet,
    eps: float | Fraction = Fraction(1, 20),
    seed: int = 0,
    mode: str = "sampled",
    retries: int = 64,
) -> RegularityOutput:
    """Find ``(U, V, d)`` satisfying both slice-regularity properties, certified.

    (i) all but an ``eps`` fraction of ``x in U`` have ``|A_x & V| = p^-d |V|``;
    (ii) all but a ``3 eps`` fraction of pairs have ``|A_x1 & A_x2 & V| = p^-2d |V|``.
    """
    eps = Fraction(eps).limit_denominator(10**9)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    delta = A.density
    p = A.ambient.p
    rng = np.random.default_rng(seed)
    cells = A.to_gridset().cells

    y0, x0 = _start_pair(A, delta)
    U, V = A.row(y0), A.columns[x0]
    formula = d0_bound(p, delta)
    D = int(_codims(A, np.array(U.elements()), V).max())
    d0_used = D
    r = drc_rounds(p, eps)
    history: list[dict] = []

    while True:
        counts = _slice_counts(A, U, V, D)
        exc_i, exc_ii = counts.fractions(D)
        step = {"d": D, "dim_U": U.dim, "dim_V": V.dim, "exceptions_i": _frac(exc_i), "exceptions_ii": _frac(exc_ii)}
        history.append(step)
        if exc_i <= eps and exc_ii <= 3 * eps:
            return RegularityOutput(U, V, D, eps, exc_i, exc_ii, formula, d0_used, y0, x0, history)
        if D == 0:  # at d = 0 the invariant forces both properties
            raise BudgetExceeded("regularity invariant broken at d = 0", **step)
        if exc_i > eps:
            step["branch"] = "i"
            Vn = V
        else:
            # anchor column a with codim D and the most irregular partners
            per_row = counts.irregular.sum(axis=1)
            per_row[counts.codim != D] = -1
            a = int(counts.xs[int(np.argmax(per_row))])
            step["branch"] = "ii"
            step["a"] = a
            Vn = intersect(V, A.columns[a])
        U, info = _densify(A, cells, U, Vn, D, eps, r, rng, mode, retries)
        step.update(info)
        V = Vn
        D -= 1


# --------------------------------------------------------------------------
# Anchor choice.


@dataclass(frozen=True)
class AnchorScore:
    a: int
    good_triple_fraction: Fraction
    exact: bool = True
    scanned: int = 1

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "good_triple_fraction": _frac(self.good_triple_fraction),
            "exact": self.exact,
            "scanned": self.scanned,
        }


def _triples(group: FieldSpec, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    N = group.size
    if N**3 <= EXACT_ANCHOR_TRIPLES:
        x, y, z = (g.ravel() for g in np.meshgrid(*(np.arange(N),) * 3, indexing="ij"))
        return x, y, z, True
    rng = np.random.default_rng(seed)
    x, y, z = (rng.integers(0, N, size=SAMPLED_ANCHOR_TRIPLES) for _ in range(3))
    return x, y, z, False


class _Shifter:
    """Encodings of ``x + y - a`` for index arrays, via a sum table when it is small."""

    def __init__(self, group: FieldSpec):
        self.group = group
        N = group.size
        if N <= 1 << 10:
            self.table = _sum_table(group)
            self.neg = _neg(self.table)
        else:
            self.table = None
            self.D = group.digits_array(list(range(N)))

    def pair(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.table is not None:
            return self.table[x, y]
        return self.group.encode_array(self.D[x] + self.D[y])

    def minus(self, s: np.ndarray, a: int) -> np.ndarray:
        if self.table is not None:
            return self.table[s, self.neg[a]]
        return self.group.encode_array(self.D[s] - self.D[a])


def choose_anchor(S: LinearSubspaceSystem, d: int, budget: int = 64, seed: int = 0) -> AnchorScore:
    """The anchor ``a`` with the largest fraction of good triples ``(x, y, z)``.

    A triple is good when ``V_a, V_x, V_y, V_{x+y-a}, V_z`` all have size
    ``p^d``, ``|V_a + V_x + V_y| = p^3d`` and
    ``V_{x+y-a} & (V_x + V_y + V_z) = {0}``. The fraction is exact when
    ``|G|^3`` is small and estimated from a fixed sample otherwise. Anchors
    are scanned in encoding order (``budget`` of them) for ``|G| <= 2^12``
    and drawn at random beyond that; ties go to the smallest encoding.
    """
    group = S.group
    N = group.size
    idx, ids, dims = S.index, S.ids, S.dims
    good_dim = dims == d
    shift = _Shifter(group)
    x, y, z, exact = _triples(group, seed)
    xy = shift.pair(x, y)
    s2 = idx.add_many(ids[x], ids[y])
    s3 = idx.add_many(s2, ids[z])
    base = good_dim[x] & good_dim[y] & good_dim[z]
    total = len(x)

    if N <= 1 << 12:
        candidates = range(min(budget, N))
    else:
        rng = np.random.default_rng(seed + 1)
        candidates = sorted(set(rng.integers(0, N, size=budget).tolist()))
    best: tuple[Fraction, int] | None = None
    scanned = 0
    for a in candidates:
        scanned += 1
        score = Fraction(0)
        if good_dim[a]:
            w = shift.minus(xy, a)
            ok = base & good_dim[w]
            if ok.any():
                sel = np.nonzero(ok)[0]
                c2 = idx.dims()[idx.add_many(s2[sel], ids[a])] == 3 * d
                sel = sel[c2]
                c3 = idx.trivial_many(ids[w[sel]], s3[sel])
                score = Fraction(int(np.count_nonzero(c3)), total)
        if best is None or score > best[0]:
            best = (score, a)
        if score == 1:
            break
    return AnchorScore(best[1], best[0], exact, scanned)


# --------------------------------------------------------------------------
# Bilinear structure of a linear system of subspaces.


@dataclass
class BilinearStructure:
    """``x -> M(x) = Phi(x, .) + Psi`` as an affine family of (m x d) matrices.

    ``linear[j]`` (shape (m, k)) and ``constant[:, j]`` give the image of the
    j-th unit vector: ``M(x) e_j = linear[j] @ x + constant[:, j]``.
    ``good[x]`` records whether the column space of ``M(x)`` equals ``V_x``.
    """

    group: FieldSpec
    ambient: FieldSpec
    d: int
    linear: np.ndarray  # (d, m, k)
    constant: np.ndarray  # (m, d)
    good: np.ndarray  # bool, indexed by group encodings
    anchor: AnchorScore | None = None
    pairs: int = 0
    consensus_points: int = 0
    extension_eps: tuple[float, ...] = ()

    @property
    def good_fraction(self) -> Fraction:
        return Fraction(int(np.count_nonzero(self.good)), self.group.size)

    def matrix(self, x: int) -> np.ndarray:
        xd = np.array(self.group.decode(x), dtype=np.int64)
        cols = [self.linear[j] @ xd + self.constant[:, j] for j in range(self.d)]
        return np.stack(cols, axis=1) % self.group.p if cols else np.zeros((self.ambient.n, 0), dtype=np.int64)

    def image(self, x: int) -> Subspace:
        """``{Phi(x, lam) + Psi(lam)}`` as a subspace."""
        return column_space(self.matrix(x), self.ambient)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "anchor": None if self.anchor is None else self.anchor.to_json(),
            "pairs": self.pairs,
            "consensus_points": self.consensus_points,
            "extension_eps": [round(e, 12) for e in self.extension_eps],
            "good_fraction": _frac(self.good_fraction),
            "linear": self.linear.tolist(),
            "constant": self.constant.tolist(),
        }


def _flat_code(M: np.ndarray, p: int) -> int:
    """Encoding of an (m x d) matrix with column j occupying digits j*m .. j*m+m-1."""
    code = 0
    for v in reversed(M.T.ravel().tolist()):
        code = code * p + int(v)
    return code


def _certify_images(S: LinearSubspaceSystem, st: BilinearStructure) -> np.ndarray:
    return np.array([st.image(x) == S.table[x] for x in range(S.group.size)], dtype=bool)


def bilinear_system_structure(
    S: LinearSubspaceSystem,
    d: int,
    seed: int = 0,
    anchor: int | None = None,
    anchor_budget: int = 64,
) -> BilinearStructure:
    """Recover ``Phi`` and ``Psi`` with ``{Phi(x, lam) + Psi(lam)} = V_x`` on a certified set.

    Steps: pick an anchor ``a``; for every pair ``(x, y)`` whose spaces are
    in general position solve ``th1 + th2 = theta + th3`` with ``theta`` the
    canonical isomorphism onto ``V_a`` and ``th3`` landing in ``V_{x+y-a}``;
    vote per point for ``th3``; extend the votes to an affine map column by
    column; keep the points where the image matches ``V_x``.
    """
    group, amb, p = S.group, S.ambient, S.p
    N, m, k = group.size, amb.n, group.n
    if N > STRUCTURE_CAP:
        raise CapExceeded(f"index space of size {N} exceeds the structure cap {STRUCTURE_CAP}")
    if d < 0 or d > m:
        raise ValueError(f"d = {d} out of range for an ambient of dimension {m}")
    if d == 0:
        st = BilinearStructure(
            group, amb, 0, np.zeros((0, m, k), dtype=np.int64), np.zeros((m, 0), dtype=np.int64),
            np.zeros(N, dtype=bool),
        )
        st.good = _certify_images(S, st)
        return st

    if anchor is None:
        score = choose_anchor(S, d, anchor_budget, seed)
    else:
        score = AnchorScore(anchor, Fraction(-1), exact=False, scanned=0)
    a = score.a
    if S.dims[a] != d or score.good_triple_fraction == 0:
        raise AnchorTooWeak(
            f"anchor {a} has dim {int(S.dims[a])} and score {score.good_triple_fraction}",
            anchor=score.to_json(),
        )
    Va = S.table[a]
    theta = canonical_isomorphism(Va)

    idx, ids, dims = S.index, S.ids, S.dims
    good_dim = dims == d
    shift = _Shifter(group)
    x, y = (g.ravel() for g in np.meshgrid(np.arange(N), np.arange(N), indexing="ij"))
    w = shift.minus(shift.pair(x, y), a)
    ok = good_dim[x] & good_dim[y] & good_dim[w]
    sel = np.nonzero(ok)[0]
    wide = idx.dims()[idx.add_many(idx.add_many(ids[x[sel]], ids[y[sel]]), ids[a])] == 3 * d
    sel = sel[wide]
    if sel.size == 0:
        raise AnchorTooWeak(f"no pair is in general position with anchor {a}", anchor=score.to_json())

    # theta^1 + theta^2 = theta + theta^3 with (U1, U2, U3, U4) = (V_x, V_y, V_{x+y-a}, V_a)
    bases = np.zeros((N, m, d), dtype=np.int64)
    for i in np.nonzero(good_dim)[0]:
        bases[i] = basis_matrix(S.table[i])
    xs, ys, ws = x[sel], y[sel], w[sel]
    _, _, th3, solved = quad_isomorphisms_batch(bases[xs], bases[ys], bases[ws], theta, p)
    skipped = int(np.count_nonzero(~solved))
    th3, ws = th3[solved], ws[solved]
    if ws.size == 0:
        raise ConsensusFailed("no pair produced a quadruple of isomorphisms", pairs=int(sel.size), skipped=skipped)

    # vote per point; ties go to the smallest flattened encoding
    flat = th3.transpose(0, 2, 1).reshape(len(ws), d * m)
    uniq, which = np.unique(flat, axis=0, return_inverse=True)
    which = which.ravel()
    codes = [_flat_code(row.reshape(d, m).T, p) for row in uniq]
    key, counts = np.unique(ws * len(uniq) + which, return_counts=True)
    best: dict[int, tuple[int, int]] = {}
    for kk, cnt in zip(key.tolist(), counts.tolist()):
        z, u = divmod(kk, len(uniq))
        rank = (-cnt, codes[u])
        if z not in best or rank < best[z][0]:
            best[z] = (rank, u)
    consensus = {z: uniq[u].reshape(d, m).T for z, (_, u) in best.items()}

    linear = np.zeros((d, m, k), dtype=np.int64)
    constant = np.zeros((m, d), dtype=np.int64)
    col_field = FieldSpec(p, m)
    eps_list = []
    for j in range(d):
        values = {z: col_field.encode(M[:, j].tolist()) for z, M in consensus.items()}
        try:
            rep = extend_near_homomorphism(PartialMap(group, col_field, values), epsilon_cap=1.0)
        except (NoConsensus, EpsilonTooLarge) as exc:
            raise ExtensionFailed(f"column {j}: {exc}", column=j, consensus_points=len(consensus)) from exc
        linear[j] = rep.phi.linear
        constant[:, j] = rep.phi.constant
        eps_list.append(rep.epsilon)

    st = BilinearStructure(
        group, amb, d, linear, constant, np.zeros(N, dtype=bool), score,
        pairs=int(sel.size) - skipped, consensus_points=len(consensus), extension_eps=tuple(eps_list),
    )
    st.good = _certify_images(S, st)
    return st


# --------------------------------------------------------------------------
# End-to-end extraction.


@dataclass(frozen=True)
class ExtractionConfig:
    eps: float = 0.05
    seed: int = 0
    mode: str = "sampled"
    retries: int = 64
    anchor_budget: int = 64
    samples: int = 100_000


@dataclass
class ExtractionReport:
    input_digest: str
    delta: Fraction
    config: ExtractionConfig
    regularity: RegularityOutput
    structure: BilinearStructure
    variety: BilinearVariety
    certificate: ContainmentCertificate
    route: str
    shift_cells: int | None
    shift_witnessed: int | None
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.variety.r

    def bound_shapes(self) -> dict:
        """``log_p(1/delta)`` to the powers 3, 2, 1, for side-by-side comparison."""
        L = math.log(1 / float(self.delta), self.variety.beta.p) if self.delta < 1 else 0.0
        return {"codim_U": round(L**3, 6), "codim_V": round(L**2, 6), "r": round(L, 6)}

    def to_json(self) -> dict:
        W = self.variety
        return {
            "input_digest": self.input_digest,
            "delta": _frac(self.delta),
            "eps": self.config.eps,
            "seed": self.config.seed,
            "mode": self.config.mode,
            "regularity": self.regularity.to_json(),
            "structure": self.structure.to_json(),
            "variety": W.to_json(),
            "codim_U": W.U.codim,
            "codim_V": W.V.codim,
            "r": W.r,
            "bound_shapes": self.bound_shapes(),
            "route": self.route,
            "certificate": self.certificate.to_json(),
            "shift_cells": self.shift_cells,
            "shift_witnessed": self.shift_witnessed,
        }


def _selector(W: Subspace) -> np.ndarray:
    """(dim x n) matrix reading a vector's coordinates in the RREF basis of W."""
    P = np.zeros((W.dim, W.field.n), dtype=np.int64)
    for i, c in enumerate(W.pivots):
        P[i, c] = 1
    return P


def _good_subspace(group: FieldSpec, good: np.ndarray) -> Subspace:
    """Greedy maximal subspace whose nonzero vectors all lie in ``good``."""
    elems = [0]
    basis: list[int] = []
    seen = {0}
    for v in range(1, group.size):
        if not good[v] or v in seen:
            continue
        new = [group.add(e, group.scale(c, v)) for c in range(1, group.p) for e in elems]
        if all(good[n] for n in new):
            basis.append(v)
            elems += new
            seen.update(new)
    return canonicalize(basis, group)


def _shift_witnesses(st: BilinearStructure, Vc: Subspace) -> tuple[int, int]:
    """Zero cells ``(x, y)`` of beta in coordinates, and how many have a shift witness.

    A witness is ``u`` with ``u, u - x`` in the good set and
    ``beta(u, y) = beta(u - x, y) = 0``.
    """
    group, p = st.group, st.group.p
    N = group.size
    ys = Vc.field.digits_array(Vc.elements())
    X = group.digits_array(list(range(N)))
    vals = np.einsum("jmk,xk->xjm", st.linear, X) % p  # Phi(x, e_j) without Psi
    zero = np.all(np.einsum("xjm,ym->xyj", vals, ys) % p == 0, axis=2)
    diff = group.encode_array(X[:, None, :] - X[None, :, :])
    cells = witnessed = 0
    for j in range(len(ys)):
        zx = zero[:, j]
        g = np.nonzero(zx & st.good)[0]
        reach = np.zeros(N, dtype=bool)
        reach[np.unique(diff[np.ix_(g, g)])] = True
        cells += int(np.count_nonzero(zx))
        witnessed += int(np.count_nonzero(zx & reach))
    return cells, witnessed


def _certify(W: BilinearVariety, A: TransverseSet, cfg: ExtractionConfig) -> ContainmentCertificate:
    if W.U.size * W.V.size <= GRID_CAP:
        return contained_in(W, A, "exhaustive")
    return contained_in(W, A, "sampled", samples=max(cfg.samples, 100_000), seed=cfg.seed)


def extract_variety(A: TransverseSet, config: ExtractionConfig | None = None) -> ExtractionReport:
    """A bilinear variety inside ``A``, with its containment certified cell by cell.

    The variety is ``{(x, y) in U x V' : beta(x, y) = 0}`` where ``U, V, d``
    come from :func:`regularize`, ``V' = V & (Im Psi)^perp`` and
    ``beta_j(x, y) = Phi(x, e_j) . y`` in the coordinates of ``U`` and ``V``.
    If the direct variety is not contained in ``A`` (possible when eps is
    far from the regime where the good set is guaranteed to be large), ``U``
    is cut down to a subspace of the good set, where containment always holds.
    """
    cfg = config or ExtractionConfig()
    amb = A.ambient
    p = amb.p
    timings: dict[str, float] = {}

    t = time.perf_counter()
    reg = regularize(A, cfg.eps, cfg.seed, cfg.mode, cfg.retries)
    timings["regularize"] = time.perf_counter() - t

    t = time.perf_counter()
    S = from_transverse(A, reg.V, reg.U)
    st = bilinear_system_structure(S, reg.d, cfg.seed, anchor_budget=cfg.anchor_budget)
    timings["structure"] = time.perf_counter() - t

    t = time.perf_counter()
    U, V = reg.U, reg.V
    PU, PV = _selector(U), _selector(V)
    forms = np.array(
        [(PU.T @ st.linear[j].T @ PV) % p for j in range(st.d)], dtype=np.int64
    ).reshape(st.d, amb.nG, amb.nH)
    Vc = orth_complement(column_space(st.constant, S.ambient))
    V_prime = canonicalize([V.from_coords(S.ambient.decode(v)) for v in Vc.basis], amb.H)
    beta = BilinearMapTuple.reduced(p, amb.nG, amb.nH, forms)
    W = BilinearVariety(U, V_prime, beta)
    route = "direct"
    cert = _certify(W, A, cfg)
    shift_cells = shift_witnessed = None
    if S.group.size**2 * Vc.size <= GRID_CAP:
        shift_cells, shift_witnessed = _shift_witnesses(st, Vc)
        if st.good_fraction >= 1 - Fraction(1, 3 * p**st.d) and shift_witnessed != shift_cells:
            raise CertificationFailed(
                "good set is large but some zero cell has no shift witness",
                shift_cells=shift_cells,
                shift_witnessed=shift_witnessed,
            )
    if not cert.passed:
        Ug = _good_subspace(S.group, st.good)
        U = canonicalize([reg.U.from_coords(S.group.decode(c)) for c in Ug.basis], amb.G)
        W = BilinearVariety(U, V_prime, beta)
        route = "restricted"
        cert = _certify(W, A, cfg)
        if not cert.passed:
            raise CertificationFailed("variety is not contained in A", certificate=cert.to_json())
    timings["certify"] = time.perf_counter() - t

    return ExtractionReport(
        A.digest(), A.density, cfg, reg, st, W, cert, route, shift_cells, shift_witnessed, timings
    )
