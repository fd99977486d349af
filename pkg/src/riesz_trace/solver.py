"""Very weak Dirichlet solves by expansion in the boundary bases.

With ``c_n = <g, g_n>_Mb`` the boundary datum expands as ``g = sum c_n y_n``
and, since ``K y_n = kappa_n phi_n``, its harmonic extension is
``v = sum c_n kappa_n phi_n``. The coefficients ``c_n`` are exactly the
eigen-expansion coefficients of ``v`` at smoothness one half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import FormSet
from .geometry import Mesh
from .operators import OperatorSuite, conormal_derivative, dirichlet_poisson_solve, smooth_random_field
from .riesz import RieszBasisPair, riesz_bounds
from .spectral import EigenSystem

SANDWICH_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class VeryWeakSolution:
    coefficients: np.ndarray
    n_used: int
    field: np.ndarray
    h_half_norm: float


def very_weak_solve(g, pair: RieszBasisPair, eig: EigenSystem, truncation: int | None = None) -> VeryWeakSolution:
    """Partial sum ``sum_{n <= N} <g, g_n> kappa_n phi_n`` (all modes by default)."""
    N = pair.N if truncation is None else int(truncation)
    if not 1 <= N <= pair.N:
        raise ValueError(f"truncation must lie in [1, {pair.N}], got {truncation}")
    g = np.asarray(g, dtype=float)
    if g.shape != (pair.boundary_space.dim,):
        raise ValueError(f"g has shape {g.shape}, expected ({pair.boundary_space.dim},)")
    c = pair.analysis("g")[:N] @ g
    v = eig.modes[:, :N] @ (c * pair.kappa[:N])
    return VeryWeakSolution(c, N, v, float(np.sqrt(np.sum(c**2))))


def weak_form_residual(solution: VeryWeakSolution, g, forms: FormSet, test_count: int = 20, seed: int = 0) -> float:
    """Largest ``|<v, f>_M + <g, d_nu u>_Mb|`` over zero-trace test solutions.

    Each test ``u`` solves ``-Lap u = f`` with zero trace for a random smooth
    ``f`` of unit L2 norm; ``d_nu u`` is the variational conormal derivative.
    This is the transposition identity written with ``-Lap u = f``.
    """
    rng = np.random.default_rng(seed)
    g = np.asarray(g, dtype=float)
    worst = 0.0
    for _ in range(test_count):
        f = smooth_random_field(forms.mesh.nodes, rng)
        f = f / np.sqrt(f @ forms.M @ f)
        u = dirichlet_poisson_solve(forms, f)
        d = conormal_derivative(forms, u, f)
        worst = max(worst, abs(solution.field @ forms.M @ f + g @ forms.Mb @ d))
    return float(worst)


def regularity_report(g, pair: RieszBasisPair, eig: EigenSystem, bounds=None) -> dict:
    """Norm sandwich ``sqrt(a_G) ||g|| <= ||Kg||_{1/2} <= sqrt(b_G) ||g||``.

    Also records the squared eigen-expansion sums of ``Kg`` at smoothness
    one half and one; the latter blows up under refinement for data that
    are not half-differentiable on the boundary.
    """
    g = np.asarray(g, dtype=float)
    if bounds is None:
        bounds = riesz_bounds(pair.g_cols, pair.boundary_space)
    sol = very_weak_solve(g, pair, eig)
    norm_g = pair.boundary_space.norm(g)
    sqrt_a, sqrt_b = float(np.sqrt(bounds.lower)), float(np.sqrt(bounds.upper))
    low = sol.h_half_norm - sqrt_a * norm_g
    high = sqrt_b * norm_g - sol.h_half_norm
    return {
        "norm_g": norm_g,
        "norm_v_half": sol.h_half_norm,
        "sqrt_a": sqrt_a,
        "sqrt_b": sqrt_b,
        "slack_low": float(low),
        "slack_high": float(high),
        "N_used": sol.n_used,
        "s_half_sum": float(np.sum(sol.coefficients**2)),
        "s_one_sum": float(np.sum(sol.coefficients**2 / pair.kappa**2)),
        "sandwich_holds": bool(low >= -SANDWICH_TOL and high >= -SANDWICH_TOL),
    }


def step_datum(mesh: Mesh) -> np.ndarray:
    """``sign(x - 1/2)`` on the bottom edge ``y = 0``, zero on the rest of the boundary."""
    p = mesh.nodes[mesh.boundary_nodes]
    on_bottom = np.isclose(p[:, 1], 0.0)
    return np.where(on_bottom, np.sign(p[:, 0] - 0.5), 0.0)


def k_singular_values(suite: OperatorSuite) -> np.ndarray:
    """Singular values of ``K: L2(boundary) -> L2(Omega)``, non-increasing."""
    return np.linalg.svd(suite.k.whitened(), compute_uv=False)


def expansion_tail(g, pair: RieszBasisPair, eig: EigenSystem) -> np.ndarray:
    """``||v_N - v_full||_M`` for ``N = 1..N_full``.

    The modes are M-orthonormal, so the tail norm is the root of the
    remaining squared coefficients.
    """
    c = pair.analysis("g") @ np.asarray(g, dtype=float)
    sq = (c * pair.kappa) ** 2
    tail = np.concatenate([np.cumsum(sq[::-1])[::-1][1:], [0.0]])
    return np.sqrt(tail)

