"""P1 finite element forms on a triangulation.

All matrices are returned dense; the meshes this package targets have at
most a few thousand nodes and every downstream spectral computation is dense.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .geometry import Mesh


class AssemblyError(ValueError):
    pass


# degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
QUAD7_POINTS = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
        [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
    ]
)
QUAD7_WEIGHTS = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


@dataclass(frozen=True, eq=False)
class FormSet:
    """Assembled bilinear forms of one mesh.

    Attributes
    ----------
    A : stiffness, ``int grad u . grad v``
    M : volume mass, ``int u v``
    Mb : boundary mass on boundary nodes, ``int_{boundary} u v``
    R : 0/1 trace matrix, rows indexed by ``mesh.boundary_nodes``
    """

    mesh: Mesh
    A: np.ndarray
    M: np.ndarray
    Mb: np.ndarray
    R: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.A.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.R.shape[0]

    @property
    def boundary(self) -> np.ndarray:
        return self.mesh.boundary_nodes

    @property
    def interior(self) -> np.ndarray:
        return self.mesh.interior_nodes

    @cached_property
    def S(self) -> np.ndarray:
        return partial_gram(self)

    @cached_property
    def S_factor(self):
        return sla.cho_factor(self.S, lower=True)

    @cached_property
    def interior_factor(self):
        I = self.interior
        if len(I) == 0:
            return None
        return sla.cho_factor(self.A[np.ix_(I, I)], lower=True)

    @cached_property
    def Mb_factor(self):
        return sla.cho_factor(self.Mb, lower=True)


def element_geometry(mesh: Mesh):
    """Signed areas and P1 shape-function gradients, shape (n_tri, 3, 2)."""
    p = mesh.nodes[mesh.triangles]
    area = mesh.signed_areas()
    bad = np.flatnonzero(area <= 0)
    if len(bad):
        raise AssemblyError(f"triangle {int(bad[0])} is degenerate or inverted (area {area[bad[0]]:.3e})")
    # grad phi_k = rot90(opposite edge) / (2 area)
    grads = np.empty((len(p), 3, 2))
    for k in range(3):
        e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
        grads[:, k, 0] = -e[:, 1]
        grads[:, k, 1] = e[:, 0]
    grads /= (2.0 * area)[:, None, None]
    return area, grads


def assemble_forms(mesh: Mesh) -> FormSet:
    """Exact P1 stiffness, mass and boundary mass matrices."""
    n = mesh.n_nodes
    area, grads = element_geometry(mesh)
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()

    Ke = np.einsum("tid,tjd->tij", grads, grads) * area[:, None, None]
    local_mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Me = area[:, None, None] * local_mass[None]
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).toarray()
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).toarray()

    bnodes = mesh.boundary_nodes
    local = -np.ones(n, dtype=np.int64)
    local[bnodes] = np.arange(len(bnodes))
    edges = local[mesh.boundary_edges]
    L = mesh.edge_lengths()
    edge_mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    Ee = L[:, None, None] * edge_mass[None]
    er = np.repeat(edges, 2, axis=1).ravel()
    ec = np.tile(edges, (1, 2)).ravel()
    nb = len(bnodes)
    Mb = sp.coo_matrix((Ee.ravel(), (er, ec)), shape=(nb, nb)).toarray()

    R = np.zeros((nb, n))
    R[np.arange(nb), bnodes] = 1.0

    # exact symmetry; summation order can leave 1-ulp asymmetry
    A = 0.5 * (A + A.T)
    M = 0.5 * (M + M.T)
    Mb = 0.5 * (Mb + Mb.T)
    return FormSet(mesh, A, M, Mb, R)


def partial_gram(forms: FormSet) -> np.ndarray:
    """Gram matrix ``A + R^T Mb R`` of the gradient-plus-trace inner product."""
    return forms.A + forms.R.T @ forms.Mb @ forms.R


def interpolate(mesh: Mesh, fn) -> np.ndarray:
    """Nodal values of ``fn(x, y)``."""
    return np.asarray(fn(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)


def l2_error(mesh: Mesh, nodal: np.ndarray, exact) -> float:
    """``||u_h - u||_{L2}`` with the seven-point rule on every triangle."""
    p = mesh.nodes[mesh.triangles]
    area = np.abs(mesh.signed_areas())
    xq = np.einsum("qk,tkd->tqd", QUAD7_POINTS, p)
    uh = np.einsum("qk,tk->tq", QUAD7_POINTS, np.asarray(nodal)[mesh.triangles])
    ue = exact(xq[..., 0], xq[..., 1])
    return float(np.sqrt(np.sum(area[:, None] * QUAD7_WEIGHTS[None] * (uh - ue) ** 2)))
