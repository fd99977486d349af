"""Eigenpairs of the core operator and the eigen-expansion norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .hilbert import HilbertSpaceRep
from .operators import STRUCTURAL_TOL, ConsistencyError, OperatorSuite, harmonic_lift, smooth_random_field

CLUSTER_GAP = 1e-8
# vectors are only reordered among eigenvalues equal to roundoff, so the
# reordering never pairs a vector with a visibly different eigenvalue
TIE_GAP = 1e-12
SPAN_TOL = 1e-8


class OutsideHarmonicSpanError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """``core phi_n = kappa_n**2 phi_n`` with M-orthonormal ``phi_n``.

    ``kappa`` is non-increasing; ``modes[:, n]`` holds the nodal values of
    ``phi_n``.
    """

    kappa: np.ndarray
    modes: np.ndarray
    space: HilbertSpaceRep

    @property
    def N(self) -> int:
        return len(self.kappa)

    def coefficients(self, v) -> np.ndarray:
        """``<v, phi_n>_M`` for a vector or matrix of columns."""
        return self.modes.T @ (self.space.gram @ v)

    def clusters(self, gap: float = CLUSTER_GAP) -> list[np.ndarray]:
        """Index groups of numerically equal ``kappa**2``."""
        return eigen_clusters(self.kappa**2, gap)


def eigen_clusters(values: np.ndarray, gap: float = CLUSTER_GAP) -> list[np.ndarray]:
    """Split sorted ``values`` wherever the relative gap exceeds ``gap``."""
    values = np.asarray(values)
    if len(values) == 0:
        return []
    groups, start = [], 0
    for i in range(1, len(values)):
        scale = max(abs(values[i]), abs(values[i - 1]))
        if abs(values[i] - values[i - 1]) > gap * scale:
            groups.append(np.arange(start, i))
            start = i
    groups.append(np.arange(start, len(values)))
    return groups


def _canonical_order(mu: np.ndarray, vecs: np.ndarray):
    order = np.argsort(-mu, kind="stable")
    mu, vecs = mu[order], vecs[:, order]
    # sign: largest-magnitude entry positive (first one on ties)
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    for group in eigen_clusters(mu, TIE_GAP):
        if len(group) > 1:
            keys = [tuple(np.round(vecs[:, j], 12)) for j in group]
            perm = sorted(range(len(group)), key=lambda t: keys[t], reverse=True)
            vecs[:, group] = vecs[:, group[perm]]
    return mu, vecs


def eigendecompose_core(suite: OperatorSuite) -> EigenSystem:
    """Rayleigh-Ritz on the harmonic subspace with Cholesky whitening.

    With harmonic basis ``H`` the reduced pencil is ``(H^T M C H, H^T M H)``;
    whitening by the Cholesky factor of ``H^T M H`` turns it into a
    symmetric dense eigenproblem.
    """
    if suite.structural_residual > STRUCTURAL_TOL:
        raise ConsistencyError(f"structural residual {suite.structural_residual:.2e} too large")
    H = suite.harmonic_basis
    M = suite.l2_omega.gram
    MH = M @ H
    mass = H.T @ MH
    stiff = MH.T @ (suite.core.matrix @ H)
    mass = 0.5 * (mass + mass.T)
    stiff = 0.5 * (stiff + stiff.T)
    L = np.linalg.cholesky(mass)
    W = sla.solve_triangular(L, sla.solve_triangular(L, stiff, lower=True).T, lower=True)
    mu, Z = np.linalg.eigh(0.5 * (W + W.T))
    if mu.min() < -1e-10:
        raise ConsistencyError(f"core has a negative eigenvalue {mu.min():.3e}")
    C = sla.solve_triangular(L, Z, lower=True, trans="T")
    modes = H @ C
    mu, modes = _canonical_order(mu, modes)
    kappa = np.sqrt(np.clip(mu, 0.0, None))
    return EigenSystem(kappa, modes, suite.l2_omega)


def span_residual(v, eig: EigenSystem) -> float:
    """Relative M-distance of ``v`` from the span of the modes."""
    c = eig.coefficients(v)
    r = v - eig.modes @ c
    nv = eig.space.norm(v)
    return 0.0 if nv == 0 else eig.space.norm(r) / nv


def hs_norm(v, s: float, eig: EigenSystem) -> float:
    """``(sum_n kappa_n^{-4 s} <v, phi_n>_M^2)^{1/2}`` for harmonic ``v``, ``0 <= s <= 1``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    v = np.asarray(v, dtype=float)
    resid = span_residual(v, eig)
    if resid > SPAN_TOL:
        raise OutsideHarmonicSpanError(f"v is not discretely harmonic (relative residual {resid:.2e})")
    c = eig.coefficients(v)
    return float(np.sqrt(np.sum(eig.kappa ** (-4.0 * s) * c**2)))


def h1_equivalence_check(suite: OperatorSuite, eig: EigenSystem, sample_count: int = 50, seed: int = 0):
    """Range of ``hs_norm(v, 1) / ||v||_{H_partial}`` over random harmonic ``v``.

    The samples are harmonic lifts of mesh-independent smooth boundary data
    (the first is the constant function).
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    forms = suite.forms
    pts = suite.mesh.nodes[forms.boundary]
    ratios = []
    for k in range(sample_count):
        g = np.ones(forms.n_boundary) if k == 0 else smooth_random_field(pts, rng)
        v = harmonic_lift(forms, g)
        ratios.append(hs_norm(v, 1.0, eig) / suite.h_partial.norm(v))
    return min(ratios), max(ratios)


def spectrum_table(eig: EigenSystem) -> list[tuple[int, float, float]]:
    return [(n + 1, float(k), float(k * k)) for n, k in enumerate(eig.kappa)]
