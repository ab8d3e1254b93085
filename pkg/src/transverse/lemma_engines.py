"""Exact engines for three linear-algebra lemmas used by the extraction.

* :func:`quad_isomorphisms` splits a map into a direct sum of three subspaces.
* :func:`check_independence_forces_zero` is the uniqueness predicate.
* :func:`extend_near_homomorphism` recovers an affine map from a map that
  respects most additive quadruples, by pointwise majority vote.

Linear maps ``F_p^d -> F_p^n`` are int64 arrays of shape ``(n, d)``; column
``j`` is the image of the j-th standard basis vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .gf_linalg import FieldSpec, Subspace, basis_matrix, column_space, solve_mod_p


class HypothesisViolated(ValueError):
    def __init__(self, condition: str):
        self.condition = condition
        super().__init__(f"hypothesis violated: {condition}")


class PreconditionViolated(ValueError):
    pass


class EpsilonTooLarge(ValueError):
    def __init__(self, measured: float, cap: float):
        self.measured = measured
        self.cap = cap
        super().__init__(f"measured triple-failure fraction {measured:.3g} exceeds cap {cap:.3g}")


class NoConsensus(ValueError):
    pass


# --------------------------------------------------------------------------


def _image_ok(M: np.ndarray, U: Subspace) -> bool:
    return column_space(M, U.field) == U


def quad_isomorphisms(
    U1: Subspace, U2: Subspace, U3: Subspace, U4: Subspace, phi4: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Isomorphisms ``phi_i : F_p^d -> U_i`` with ``phi1 + phi2 = phi3 + phi4``.

    The four subspaces must have a common dimension d, every three of them
    must be independent (sum of dimension 3d), and all four must also sum to
    dimension 3d. Then U4 sits inside the direct sum U1 + U2 + U3, each
    ``phi4(e_j)`` splits uniquely as ``u1 + u2 + u3``, and the answer is
    ``phi1 = u1, phi2 = u2, phi3 = -u3``. The returned triple is the only one.
    """
    spaces = (U1, U2, U3, U4)
    f = U1.field
    d = U1.dim
    if any(U.field != f for U in spaces):
        raise HypothesisViolated("subspaces live in different ambients")
    if any(U.dim != d for U in spaces):
        raise HypothesisViolated(f"dimensions {[U.dim for U in spaces]} are not all equal")
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        if (spaces[i] + spaces[j] + spaces[k]).dim != 3 * d:
            raise HypothesisViolated(f"|U{i + 1} + U{j + 1} + U{k + 1}| != p^{3 * d}")
    if (U1 + U2 + U3 + U4).dim != 3 * d:
        raise HypothesisViolated(f"|U1 + U2 + U3 + U4| != p^{3 * d}")
    phi4 = np.asarray(phi4, dtype=np.int64).reshape(f.n, d) % f.p
    if not _image_ok(phi4, U4):
        raise HypothesisViolated("phi4 is not an isomorphism onto U4")

    B = [basis_matrix(U) for U in (U1, U2, U3)]
    stacked = np.concatenate(B, axis=1)
    coeffs = np.zeros((3 * d, d), dtype=np.int64)
    for j in range(d):
        c = solve_mod_p(stacked, phi4[:, j], f.p)
        if c is None:  # cannot happen once the sum conditions hold
            raise HypothesisViolated("U4 is not contained in U1 + U2 + U3")
        coeffs[:, j] = c
    parts = [(B[i] @ coeffs[i * d : (i + 1) * d]) % f.p for i in range(3)]
    phi1, phi2, phi3 = parts[0], parts[1], (-parts[2]) % f.p

    # self-certification
    if np.any((phi1 + phi2 - phi3 - phi4) % f.p):
        raise AssertionError("phi1 + phi2 - phi3 - phi4 is not the zero map")
    for M, U in ((phi1, U1), (phi2, U2), (phi3, U3)):
        if not _image_ok(M, U):
            raise AssertionError("constructed map is not onto its subspace")
    return phi1, phi2, phi3


def quad_isomorphisms_batch(
    B1: np.ndarray, B2: np.ndarray, B3: np.ndarray, phi4: np.ndarray, p: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`quad_isomorphisms` over a stack of instances.

    ``B1, B2, B3`` have shape (P, n, d) and hold bases of U1, U2, U3;
    ``phi4`` is a single (n, d) map shared by all instances. The solve is a
    batched Gauss-Jordan elimination of ``[B1 B2 B3 | phi4]``. Returns
    ``(phi1, phi2, phi3, ok)`` where ``ok[i]`` says the stacked bases have
    rank 3d and ``phi4`` lies in their span. Hypotheses beyond that are not
    re-checked here; callers certify what they keep.
    """
    B1, B2, B3 = (np.asarray(B, dtype=np.int64) % p for B in (B1, B2, B3))
    P, n, d = B1.shape
    rhs = np.broadcast_to(np.asarray(phi4, dtype=np.int64) % p, (P, n, d))
    M = np.concatenate([B1, B2, B3, rhs], axis=2)
    inv = np.array([0] + [pow(a, -1, p) for a in range(1, p)], dtype=np.int64)
    ok = np.ones(P, dtype=bool)
    rows = np.arange(P)
    for c in range(3 * d):
        if c >= n:
            ok[:] = False
            break
        nz = M[:, c:, c] != 0
        ok &= nz.any(axis=1)
        piv = np.argmax(nz, axis=1) + c
        top, other = M[rows, c].copy(), M[rows, piv].copy()
        M[rows, c], M[rows, piv] = other, top
        M[:, c] = (M[:, c] * inv[M[:, c, c]][:, None]) % p
        factor = M[:, :, c].copy()
        factor[:, c] = 0
        M = (M - factor[:, :, None] * M[:, c][:, None, :]) % p
    if 3 * d < n:
        ok &= ~np.any(M[:, 3 * d :, 3 * d :], axis=(1, 2))
    coeffs = M[:, : 3 * d, 3 * d :]
    parts = [np.einsum("pnd,pde->pne", B, coeffs[:, i * d : (i + 1) * d]) % p for i, B in enumerate((B1, B2, B3))]
    return parts[0], parts[1], (-parts[2]) % p, ok


def check_independence_forces_zero(
    U1: Subspace,
    U2: Subspace,
    V1: Subspace,
    V2: Subspace,
    W: Subspace,
    phi1: np.ndarray,
    phi2: np.ndarray,
    psi1: np.ndarray,
    psi2: np.ndarray,
    theta: np.ndarray,
) -> bool:
    """Return whether ``theta == 0``.

    Raises :class:`PreconditionViolated` unless every map lands in its
    subspace, ``W & (U1 + U2 + V1 + V2) = {0}`` and the five maps sum to 0;
    under those conditions the answer is always True.
    """
    f = U1.field
    p = f.p
    maps = [np.asarray(M, dtype=np.int64) % p for M in (phi1, phi2, psi1, psi2, theta)]
    for M, S, name in zip(maps, (U1, U2, V1, V2, W), ("phi1", "phi2", "psi1", "psi2", "theta")):
        if not column_space(M, f) <= S:
            raise PreconditionViolated(f"{name} does not map into its subspace")
    rest = U1 + U2 + V1 + V2
    if (W & rest).dim:
        raise PreconditionViolated("W meets U1 + U2 + V1 + V2 nontrivially")
    if np.any(sum(maps) % p):
        raise PreconditionViolated("the five maps do not sum to zero")
    return not np.any(maps[4])


# --------------------------------------------------------------------------
# Near-homomorphisms.


@dataclass
class PartialMap:
    """A map from a subset of ``domain`` into ``codomain``, by encodings."""

    domain: FieldSpec
    codomain: FieldSpec
    values: dict[int, int]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        N = self.domain.size
        mask = np.zeros(N, dtype=bool)
        F = np.zeros((N, self.codomain.n), dtype=np.int64)
        for x, v in self.values.items():
            mask[x] = True
            F[x] = self.codomain.decode(v)
        return mask, F


@dataclass
class AffineMap:
    """``x -> linear @ x + constant`` with ``linear`` of shape (m, k)."""

    domain: FieldSpec
    codomain: FieldSpec
    linear: np.ndarray
    constant: np.ndarray

    def digits(self, x: int) -> np.ndarray:
        xd = np.array(self.domain.decode(x), dtype=np.int64)
        return (self.linear @ xd + self.constant) % self.codomain.p

    def __call__(self, x: int) -> int:
        return int(self.codomain.encode_array(self.digits(x)))

    def table(self) -> np.ndarray:
        """Values at every domain point, as a digit array of shape (N, m)."""
        D = self.domain.digits_array(list(range(self.domain.size)))
        return (D @ self.linear.T + self.constant) % self.codomain.p


@dataclass
class ExtensionReport:
    phi: AffineMap
    epsilon: float
    epsilon_exact: bool
    agreement: Fraction
    affinity: Fraction
    bound: float
    consensus_defined: int
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "epsilon_exact": self.epsilon_exact,
            "agreement": str(self.agreement),
            "affinity": str(self.affinity),
            "bound": self.bound,
            "consensus_defined": self.consensus_defined,
        }


def _sum_table(f: FieldSpec) -> np.ndarray:
    """``S[a, b] = a + b`` on encodings."""
    idx = np.arange(f.size, dtype=np.int64)
    if f.p == 2:
        return idx[:, None] ^ idx[None, :]
    D = f.digits_array(list(range(f.size)))
    return f.encode_array(D[:, None, :] + D[None, :, :])


def _neg(S: np.ndarray) -> np.ndarray:
    return np.argmax(S == 0, axis=1)


def _majority(codes: np.ndarray) -> int | None:
    """Most frequent code; ties go to the smallest code."""
    if codes.size == 0:
        return None
    uniq, counts = np.unique(codes, return_counts=True)
    return int(uniq[np.argmax(counts)])  # unique sorts ascending; argmax takes the first max


EXACT_TRIPLE_CAP = 1 << 27


def triple_failure_fraction(
    mask: np.ndarray, F: np.ndarray, f: FieldSpec, p: int, rng: np.random.Generator | None = None
) -> tuple[float, bool]:
    """Fraction of ``(x, y, z)`` in ``G1^3`` that are not good triples.

    A good triple has ``x, y, z, x + y - z`` in the domain and
    ``F(x) + F(y) = F(z) + F(x + y - z)``. Exact below ``EXACT_TRIPLE_CAP``
    triples, otherwise estimated from 2^20 uniform samples.
    """
    N = f.size
    S = _sum_table(f)
    neg = _neg(S)
    if N**3 <= EXACT_TRIPLE_CAP:
        good = 0
        dom = np.nonzero(mask)[0]
        xy = S[np.ix_(dom, dom)]
        lhs = F[dom][:, None, :] + F[dom][None, :, :]
        for z in dom:
            w = S[xy, neg[z]]
            ok = mask[w]
            rhs = F[z][None, None, :] + F[w]
            eq = np.all((lhs - rhs) % p == 0, axis=2)
            good += int(np.count_nonzero(ok & eq))
        return 1.0 - good / N**3, True
    rng = rng or np.random.default_rng(0)
    m = 1 << 20
    x, y, z = (rng.integers(0, N, size=m) for _ in range(3))
    w = S[S[x, y], neg[z]]
    ok = mask[x] & mask[y] & mask[z] & mask[w]
    eq = np.all((F[x] + F[y] - F[z] - F[w]) % p == 0, axis=1)
    return 1.0 - np.count_nonzero(ok & eq) / m, False


def extend_near_homomorphism(f: PartialMap, epsilon_cap: float = 1e-5) -> ExtensionReport:
    """Affine map agreeing with ``f`` wherever the majority vote is clear.

    Steps: measure the triple-failure fraction eps (reject above
    ``epsilon_cap``); set ``raw(x)`` to the most frequent value of
    ``f(a) + f(b) - f(a + b - x)`` over admissible pairs; fit the linear part
    by majority over differences ``raw(x + e_i) - raw(x)`` and the constant by
    majority over ``raw(x) - L x``; finally require the fit to match ``raw``
    and ``f`` on at least ``(1 - 5 eps^(1/4)) |G1|`` points.
    """
    G1, G2 = f.domain, f.codomain
    p = G1.p
    N = G1.size
    mask, F = f.arrays()
    if not mask.any():
        raise NoConsensus("empty domain")
    eps, exact = triple_failure_fraction(mask, F, G1, p)
    if eps > epsilon_cap:
        raise EpsilonTooLarge(eps, epsilon_cap)

    S = _sum_table(G1)
    neg = _neg(S)
    codes = G2.encode_array(F)
    dom = np.nonzero(mask)[0]
    pair_sum = S[np.ix_(dom, dom)]
    pair_val = (F[dom][:, None, :] + F[dom][None, :, :]) % p

    raw = np.full(N, -1, dtype=np.int64)
    raw_digits = np.zeros((N, G2.n), dtype=np.int64)
    for x in range(N):
        third = S[pair_sum, neg[x]]  # a + b - x
        ok = mask[third]
        if not ok.any():
            continue
        vals = (pair_val[ok] - F[third[ok]]) % p
        best = _majority(G2.encode_array(vals))
        raw[x] = best
        raw_digits[x] = G2.decode(best)
    defined = raw >= 0
    if not defined.any():
        raise NoConsensus("no admissible pairs at any point")

    k = G1.n
    linear = np.zeros((G2.n, k), dtype=np.int64)
    for i in range(k):
        e = G1.unit(i)
        shifted = S[np.arange(N), e]
        both = defined & defined[shifted]
        diffs = (raw_digits[shifted[both]] - raw_digits[both]) % p
        best = _majority(G2.encode_array(diffs))
        if best is None:
            raise NoConsensus(f"no consensus on the direction e_{i}")
        linear[:, i] = G2.decode(best)
    D = G1.digits_array(list(range(N)))
    lin_vals = (D @ linear.T) % p
    offs = (raw_digits[defined] - lin_vals[defined]) % p
    constant = np.array(G2.decode(_majority(G2.encode_array(offs))), dtype=np.int64)
    phi = AffineMap(G1, G2, linear, constant)

    fitted = G2.encode_array((lin_vals + constant) % p)
    affinity = Fraction(int(np.count_nonzero(defined & (fitted == raw))), N)
    agreement = Fraction(int(np.count_nonzero(mask & (fitted == codes))), N)
    bound = 1.0 - 5.0 * eps**0.25
    if float(affinity) < bound:
        raise NoConsensus(f"majority values fit an affine map on only {affinity} of points")
    if float(agreement) < bound:
        raise NoConsensus(f"affine fit agrees with f on only {agreement} of points")
    return ExtensionReport(
        phi=phi,
        epsilon=eps,
        epsilon_exact=exact,
        agreement=agreement,
        affinity=affinity,
        bound=bound,
        consensus_defined=int(defined.sum()),
    )


def zero_map(n: int, d: int) -> np.ndarray:
    return np.zeros((n, d), dtype=np.int64)


def canonical_isomorphism(U: Subspace) -> np.ndarray:
    """``lambda -> sum lambda_j b_j`` onto the RREF basis of ``U``."""
    return basis_matrix(U) if U.dim else zero_map(U.field.n, 0)

