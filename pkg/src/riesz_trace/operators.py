"""Discrete trace, embedding and solution operators and the core operator.

Three spaces live on one mesh:

* ``H_partial``: nodal vectors with Gram ``S = A + R^T Mb R`` (gradient plus
  trace inner product),
* ``L2_omega``: nodal vectors with Gram ``M``,
* ``L2_boundary``: boundary-node vectors with Gram ``Mb``.

The solve functions accept a single vector or a matrix of column vectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import hilbert as hb
from .assembly import FormSet, assemble_forms, interpolate
from .geometry import Mesh
from .hilbert import HilbertSpaceRep, OperatorRep

logger = logging.getLogger(__name__)

STRUCTURAL_TOL = 1e-6
HARMONIC_TOL = 1e-10


class InconsistentDataError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    pass


def build_spaces(forms: FormSet):
    """``(H_partial, L2_omega, L2_boundary)`` with Grams ``S``, ``M``, ``Mb``."""
    return (
        HilbertSpaceRep(forms.S, "H_partial"),
        HilbertSpaceRep(forms.M, "L2_omega"),
        HilbertSpaceRep(forms.Mb, "L2_boundary"),
    )


def gamma_star_solve(forms: FormSet, g):
    """Robin solve ``S z = R^T Mb g``: harmonic ``z`` with ``d_nu z + z = g``."""
    return sla.cho_solve(forms.S_factor, forms.R.T @ (forms.Mb @ g))


def e_star_solve(forms: FormSet, f):
    """Robin solve ``S u = M f``: ``-Lap u = f``, ``d_nu u + u = 0``."""
    return sla.cho_solve(forms.S_factor, forms.M @ f)


def dirichlet_poisson_solve(forms: FormSet, f):
    """``-Lap u = f`` with zero trace; boundary entries are exactly zero."""
    f = np.asarray(f, dtype=float)
    u = np.zeros((forms.n_nodes,) + f.shape[1:])
    if forms.interior_factor is not None:
        I = forms.interior
        u[I] = sla.cho_solve(forms.interior_factor, (forms.M @ f)[I])
    return u


def harmonic_part(forms: FormSet, f):
    """``E* f - E0* f``: discretely harmonic with the trace of ``E* f``."""
    return e_star_solve(forms, f) - dirichlet_poisson_solve(forms, f)


def harmonic_lift(forms: FormSet, g):
    """Discrete harmonic extension of boundary values ``g``."""
    g = np.asarray(g, dtype=float)
    v = np.zeros((forms.n_nodes,) + g.shape[1:])
    B, I = forms.boundary, forms.interior
    v[B] = g
    if forms.interior_factor is not None:
        v[I] = -sla.cho_solve(forms.interior_factor, forms.A[np.ix_(I, B)] @ g)
    return v


def interior_residual(forms: FormSet, u, f=None) -> float:
    """Largest interior row of ``A u - M f`` relative to ``||A|| ||u||`` (max norms)."""
    r = forms.A @ u
    if f is not None:
        r = r - forms.M @ f
    I = forms.interior
    if len(I) == 0:
        return 0.0
    scale = np.linalg.norm(forms.A, np.inf) * max(np.abs(u).max(), np.finfo(float).tiny)
    return float(np.abs(r[I]).max() / scale)


def conormal_derivative(forms: FormSet, u, f, tol: float = 1e-8):
    """Variational normal derivative of ``u`` where ``-Lap u = f``.

    Solves ``Mb d = R (A u - M f)``. Green's formula then holds exactly for
    every nodal ``v``: ``v^T A u = v^T M f + d^T Mb R v``.
    """
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    resid = forms.A @ u - forms.M @ f
    I = forms.interior
    if len(I):
        scale = (np.linalg.norm(forms.A, np.inf) * np.abs(u).max(initial=0.0)
                 + np.linalg.norm(forms.M, np.inf) * np.abs(f).max(initial=0.0))
        bad = np.abs(resid[I]).max() if scale == 0 else np.abs(resid[I]).max() / scale
        if bad > tol:
            raise InconsistentDataError(f"u does not solve the interior equations for f (residual {bad:.2e})")
    return sla.cho_solve(forms.Mb_factor, forms.R @ resid)


def k_star_apply(forms: FormSet, f):
    """``-d_nu u0`` for the zero-trace Poisson solution ``u0`` of ``f``."""
    return -conormal_derivative(forms, dirichlet_poisson_solve(forms, f), f)


@dataclass(frozen=True, eq=False)
class OperatorSuite:
    """Every discrete operator of one mesh, plus consistency residuals."""

    forms: FormSet
    h_partial: HilbertSpaceRep
    l2_omega: HilbertSpaceRep
    l2_boundary: HilbertSpaceRep
    gamma: OperatorRep
    gamma_star: OperatorRep
    e_star: OperatorRep
    e0_star: OperatorRep
    e1_star: OperatorRep
    k: OperatorRep
    k_star: OperatorRep
    f1: OperatorRep
    gamma0_star: OperatorRep
    core: OperatorRep
    core_alt: OperatorRep
    harmonic_projector: OperatorRep
    harmonic_basis: np.ndarray
    structural_residual: float
    rank_tol: float

    @property
    def mesh(self) -> Mesh:
        return self.forms.mesh

    @property
    def gamma0(self) -> OperatorRep:
        return hb.adjoint(self.gamma0_star)

    def self_adjoint_residual(self) -> float:
        return hb.self_adjoint_residual(self.core)

    def thm_residual(self) -> float:
        """``||E1* - Gamma* K*||`` between the two assembly paths."""
        return hb.op_norm(self.e1_star - self.gamma_star @ self.k_star)


def build_core(forms: FormSet, rank_tol: float = hb.DEFAULT_RANK_TOL) -> OperatorSuite:
    """Assemble every operator and the core ``Gamma0* K*``.

    The core is formed twice: as the composition ``Gamma0* K*`` and as
    ``(I + F1* F1)^{-1/2} P_H``. Their distance is kept as
    ``structural_residual``; above ``STRUCTURAL_TOL`` this raises.
    """
    Hp, L2, L2b = build_spaces(forms)
    n, nb = forms.n_nodes, forms.n_boundary
    In, Ib = np.eye(n), np.eye(nb)

    gamma = OperatorRep(forms.R, Hp, L2b)
    gamma_star = OperatorRep(gamma_star_solve(forms, Ib), L2b, Hp)
    e_star = OperatorRep(e_star_solve(forms, In), L2, Hp)
    e0_star = OperatorRep(dirichlet_poisson_solve(forms, In), L2, Hp)
    e1_star = OperatorRep(harmonic_part(forms, In), L2, Hp)
    harmonic = harmonic_lift(forms, Ib)
    k = OperatorRep(harmonic, L2b, L2)
    k_star = OperatorRep(k_star_apply(forms, In), L2, L2b)

    f1 = hb.pseudo_inverse(hb.adjoint(e1_star), rank_tol)
    f1s = hb.adjoint(f1)
    root_h = hb.fractional_power(hb.identity(Hp) + f1 @ f1s, -0.5)
    gamma0_star = f1s @ root_h @ gamma_star
    core = gamma0_star @ k_star

    p_h = hb.orthogonal_projector(harmonic, L2, rank_tol)
    root_l2 = hb.fractional_power(hb.identity(L2) + f1s @ f1, -0.5)
    core_alt = root_l2 @ p_h
    resid = hb.op_norm(core - core_alt)
    if resid > STRUCTURAL_TOL:
        raise ConsistencyError(f"core operator formulas disagree by {resid:.2e}")
    return OperatorSuite(
        forms=forms, h_partial=Hp, l2_omega=L2, l2_boundary=L2b,
        gamma=gamma, gamma_star=gamma_star, e_star=e_star, e0_star=e0_star,
        e1_star=e1_star, k=k, k_star=k_star, f1=f1, gamma0_star=gamma0_star,
        core=core, core_alt=core_alt, harmonic_projector=p_h,
        harmonic_basis=harmonic, structural_residual=resid, rank_tol=rank_tol,
    )


def smooth_random_field(points: np.ndarray, rng, degree: int = 4) -> np.ndarray:
    """Random cosine series ``sum c_jk cos(j pi x) cos(k pi y)``, ``j, k < degree``.

    The coefficients decay like ``1 / (1 + j + k)``; the same generator state
    gives the same function on every mesh.
    """
    j, k = np.meshgrid(np.arange(degree), np.arange(degree), indexing="ij")
    c = rng.standard_normal((degree, degree)) / (1.0 + j + k)
    x, y = points[:, 0], points[:, 1]
    cx = np.cos(np.pi * np.outer(x, np.arange(degree)))
    cy = np.cos(np.pi * np.outer(y, np.arange(degree)))
    return np.einsum("pj,pk,jk->p", cx, cy, c)


def rellich_ratio(mesh_or_forms, sample_count: int = 20, seed: int = 0) -> float:
    """Largest ``||d_nu u0||_{L2(bdry)} / ||f||_{L2}`` over random smooth ``f``.

    ``u0`` is the zero-trace Poisson solution. The sample functions are
    mesh-independent cosine series, so the estimate is comparable across
    refinements.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    forms = mesh_or_forms if isinstance(mesh_or_forms, FormSet) else assemble_forms(mesh_or_forms)
    rng = np.random.default_rng(seed)
    Mb = forms.Mb
    best = 0.0
    for _ in range(sample_count):
        f = smooth_random_field(forms.mesh.nodes, rng)
        nf = np.sqrt(f @ forms.M @ f)
        if nf == 0.0:
            continue
        d = k_star_apply(forms, f)
        best = max(best, float(np.sqrt(d @ Mb @ d) / nf))
    return best


def trace_of(mesh: Mesh, fn) -> np.ndarray:
    """Boundary-node values of ``fn(x, y)``."""
    p = mesh.nodes[mesh.boundary_nodes]
    return np.asarray(fn(p[:, 0], p[:, 1]), dtype=float)


def nodal(mesh: Mesh, fn) -> np.ndarray:
    return interpolate(mesh, fn)
