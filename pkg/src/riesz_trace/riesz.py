"""The boundary bases ``g_n``, ``y_n`` and their verification.

``g_n = K* phi_n / kappa_n`` and ``y_n = Gamma0 phi_n / kappa_n``. Analysis
operators map a boundary vector to its coefficients against a family,
synthesis operators recombine coefficients; as matrices

    A_X = X^T Mb,    S_X = X,

where the columns of ``X`` are the family members.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import hilbert as hb
from .hilbert import HilbertSpaceRep, OperatorRep
from .operators import OperatorSuite
from .spectral import EigenSystem

KAPPA_FLOOR = 1e-12


class RankCollapseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RieszBasisPair:
    g_cols: np.ndarray
    y_cols: np.ndarray
    kappa: np.ndarray
    boundary_space: HilbertSpaceRep

    @property
    def N(self) -> int:
        return len(self.kappa)

    def analysis(self, which: str) -> np.ndarray:
        cols = self.g_cols if which == "g" else self.y_cols
        return cols.T @ self.boundary_space.gram

    def cross_gram(self) -> np.ndarray:
        """``<g_n, y_m>_Mb``."""
        return self.g_cols.T @ self.boundary_space.gram @ self.y_cols


class RieszBounds(NamedTuple):
    lower: float
    upper: float
    full_rank: bool


def build_bases(suite: OperatorSuite, eig: EigenSystem) -> RieszBasisPair:
    """Both boundary families from the eigenpairs of the core."""
    kappa = eig.kappa
    if eig.N == 0 or kappa.min() < KAPPA_FLOOR:
        raise RankCollapseError(f"kappa_min = {kappa.min() if eig.N else 0:.3e} below {KAPPA_FLOOR}")
    g = suite.k_star.matrix @ eig.modes / kappa
    y = suite.gamma0.matrix @ eig.modes / kappa
    return RieszBasisPair(g, y, kappa.copy(), suite.l2_boundary)


def basis_residuals(suite: OperatorSuite, eig: EigenSystem, pair: RieszBasisPair) -> dict:
    """``Gamma0* g_n = kappa_n phi_n = K y_n``, worst M-norm defect per family."""
    target = eig.modes * pair.kappa
    M = suite.l2_omega
    a = suite.gamma0_star.matrix @ pair.g_cols - target
    b = suite.k.matrix @ pair.y_cols - target
    return {
        "gamma0_star_g": max(M.norm(a[:, j]) for j in range(pair.N)),
        "k_y": max(M.norm(b[:, j]) for j in range(pair.N)),
    }


def biorthogonality_residual(pair: RieszBasisPair, clusters=None) -> float:
    """Deviation of ``<g_n, y_m>`` from the identity.

    Within each cluster of equal ``kappa`` the block is compared to the
    identity in spectral norm; outside the blocks entries must vanish.
    """
    X = pair.cross_gram()
    N = pair.N
    if clusters is None:
        clusters = [np.array([i]) for i in range(N)]
    mask = np.ones((N, N), dtype=bool)
    worst = 0.0
    for grp in clusters:
        blk = X[np.ix_(grp, grp)]
        worst = max(worst, float(np.linalg.norm(blk - np.eye(len(grp)), 2)))
        mask[np.ix_(grp, grp)] = False
    if mask.any():
        worst = max(worst, float(np.abs(X[mask]).max()))
    return worst


def family_gram(cols, space: HilbertSpaceRep) -> np.ndarray:
    G = np.asarray(cols).T @ space.gram @ np.asarray(cols)
    return 0.5 * (G + G.T)


def riesz_bounds(cols, space: HilbertSpaceRep, rank_tol: float = hb.DEFAULT_RANK_TOL) -> RieszBounds:
    """Optimal Riesz bounds: extreme eigenvalues of the family Gram.

    A family that does not span the space (wrong count or numerically
    dependent) reports ``lower = 0`` and ``full_rank = False``.
    """
    cols = np.asarray(cols, dtype=float)
    if cols.ndim == 1:
        cols = cols[:, None]
    lam = np.linalg.eigvalsh(family_gram(cols, space))
    upper = float(lam[-1])
    full = cols.shape[1] == space.dim and upper > 0 and lam[0] > rank_tol * upper
    return RieszBounds(float(lam[0]) if full else 0.0, upper, bool(full))


def bessel_check(cols, space: HilbertSpaceRep, sample_count: int = 100, seed: int = 0) -> float:
    """Largest ``sum_n <x, x_n>^2`` over seeded random unit vectors ``x``."""
    rng = np.random.default_rng(seed)
    cols = np.asarray(cols, dtype=float)
    if cols.ndim == 1:
        cols = cols[:, None]
    X = rng.standard_normal((space.dim, sample_count))
    norms = np.sqrt(np.einsum("ik,ij,jk->k", X, space.gram, X))
    X = X / norms
    coeff = cols.T @ space.gram @ X
    return float(np.max(np.sum(coeff**2, axis=0)))


def reconstruction_check(pair: RieszBasisPair, suite: OperatorSuite, eig: EigenSystem,
                         sample_count: int = 20, seed: int = 0) -> dict:
    """Residuals of the expansion and factorization identities.

    Operator identities are measured in operator norm between the weighted
    spaces (coefficient sequences carry the Euclidean norm); the two
    expansions of random boundary vectors as the largest relative defect.
    """
    L2b, L2 = suite.l2_boundary, suite.l2_omega
    seq = HilbertSpaceRep.euclidean(pair.N, "l2")
    Ag = OperatorRep(pair.analysis("g"), L2b, seq)
    Ay = OperatorRep(pair.analysis("y"), L2b, seq)
    Sg = OperatorRep(pair.g_cols, seq, L2b)
    Sy = OperatorRep(pair.y_cols, seq, L2b)
    Aphi = OperatorRep(eig.coefficients(np.eye(L2.dim)), L2, seq)
    Mk = OperatorRep(np.diag(pair.kappa), seq, seq)
    kstar, g0 = suite.k_star, suite.gamma0
    Ib = hb.identity(L2b)

    res = {
        "sy_ag_identity": hb.op_norm(Sy @ Ag - Ib),
        "sg_ay_identity": hb.op_norm(Sg @ Ay - Ib),
        "ay_kstar_vs_mk_aphi": hb.op_norm(Ay @ kstar - Mk @ Aphi),
        "ag_gamma0_vs_mk_aphi": hb.op_norm(Ag @ g0 - Mk @ Aphi),
        "gamma0_sy_ay_kstar": hb.op_norm(g0 - Sy @ Ay @ kstar),
        "gamma0_sy_ag_gamma0": hb.op_norm(g0 - Sy @ Ag @ g0),
        "kstar_sg_ag_gamma0": hb.op_norm(kstar - Sg @ Ag @ g0),
        "kstar_sg_ay_kstar": hb.op_norm(kstar - Sg @ Ay @ kstar),
    }
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((L2b.dim, sample_count))
    G[:, 0] = 1.0
    via_g = Sy(Ag(G))
    via_y = Sg(Ay(G))
    worst_g = worst_y = 0.0
    for j in range(sample_count):
        ng = L2b.norm(G[:, j])
        worst_g = max(worst_g, L2b.norm(via_g[:, j] - G[:, j]) / ng)
        worst_y = max(worst_y, L2b.norm(via_y[:, j] - G[:, j]) / ng)
    res["expansion_in_y"] = worst_g
    res["expansion_in_g"] = worst_y
    return res


def minimality_check(pair: RieszBasisPair, which: str = "g") -> dict:
    """Each member lies outside the span of the others.

    The distance from ``x_j`` to the span of the remaining members is
    computed by least squares and compared to ``1 / ||z_j||`` predicted by
    the biorthogonal partner ``z_j``.
    """
    X, Z = (pair.g_cols, pair.y_cols) if which == "g" else (pair.y_cols, pair.g_cols)
    space = pair.boundary_space
    W = space.whiten(X)
    dists, mismatch = [], 0.0
    for j in range(pair.N):
        others = np.delete(W, j, axis=1)
        if others.shape[1]:
            coef, *_ = np.linalg.lstsq(others, W[:, j], rcond=None)
            d = float(np.linalg.norm(W[:, j] - others @ coef))
        else:
            d = float(np.linalg.norm(W[:, j]))
        dists.append(d)
        predicted = 1.0 / space.norm(Z[:, j])
        mismatch = max(mismatch, abs(d - predicted) / predicted)
    return {"min_distance": min(dists), "distance_mismatch": mismatch}


def riesz_criteria(pair: RieszBasisPair, sample_count: int = 100, seed: int = 0) -> dict:
    """Hypotheses and conclusion of the complete-Bessel-biorthogonal criterion.

    Each hypothesis is checked separately so a failure identifies which one
    broke: completeness of both families, Bessel property of both (sampled
    frame sums within the Gram bound), biorthogonality, and finally a
    positive lower Riesz bound for both.
    """
    space = pair.boundary_space
    bg = riesz_bounds(pair.g_cols, space)
    by = riesz_bounds(pair.y_cols, space)
    sg = bessel_check(pair.g_cols, space, sample_count, seed)
    sy = bessel_check(pair.y_cols, space, sample_count, seed + 1)
    bio = biorthogonality_residual(pair)
    return {
        "g_complete": bg.full_rank,
        "y_complete": by.full_rank,
        "g_bessel": sg <= bg.upper + 1e-9,
        "y_bessel": sy <= by.upper + 1e-9,
        "biorthogonal": bio <= 1e-8,
        "g_riesz": bg.lower > 0,
        "y_riesz": by.lower > 0,
    }


def scaled_family_check(pair: RieszBasisPair, which: str = "g") -> float:
    """Bounds of ``(kappa_n x_n)`` against the kappa-scaled Gram of ``(x_n)``.

    Both sides are the extreme eigenvalues of the same matrix formed in two
    orders; the return value is the larger relative discrepancy.
    """
    cols = pair.g_cols if which == "g" else pair.y_cols
    space = pair.boundary_space
    direct = riesz_bounds(cols * pair.kappa, space)
    G = family_gram(cols, space) * np.outer(pair.kappa, pair.kappa)
    lam = np.linalg.eigvalsh(0.5 * (G + G.T))
    return max(abs(direct.lower - lam[0]) / lam[-1], abs(direct.upper - lam[-1]) / lam[-1])
