"""scikit-learn style facade over the pipeline.

Rows of ``X`` are boundary data sampled at ``mesh.boundary_nodes``.
``transform`` returns the expansion coefficients ``<g, g_n>``,
``inverse_transform`` resynthesizes the boundary data from them, and
``predict`` returns the nodal values of the very weak solution.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .assembly import assemble_forms
from .geometry import generate_structured_mesh, load_mesh
from .hilbert import DEFAULT_RANK_TOL
from .operators import build_core
from .riesz import build_bases
from .spectral import eigendecompose_core


class RieszTraceTransformer(TransformerMixin, BaseEstimator):
    """Boundary data to basis coefficients on a fixed mesh.

    Parameters
    ----------
    domain : {"unit_square", "l_shape"}
        Structured domain, ignored when ``mesh_path`` is given.
    n : int
        Cells per side of the structured mesh.
    mesh_path : str or None
        Mesh file to load instead of generating one.
    rank_tol : float
        Relative singular-value cutoff for pseudo-inverses.
    truncation : int or None
        Number of leading modes kept; all of them when None.
    """

    def __init__(self, domain="unit_square", n=8, mesh_path=None, rank_tol=DEFAULT_RANK_TOL, truncation=None):
        self.domain = domain
        self.n = n
        self.mesh_path = mesh_path
        self.rank_tol = rank_tol
        self.truncation = truncation

    def fit(self, X=None, y=None):
        """Assemble the operators and both bases; ``X`` only fixes its width."""
        mesh = load_mesh(self.mesh_path) if self.mesh_path else generate_structured_mesh(self.domain, self.n)
        forms = assemble_forms(mesh)
        suite = build_core(forms, self.rank_tol)
        eig = eigendecompose_core(suite)
        pair = build_bases(suite, eig)
        N = pair.N if self.truncation is None else int(self.truncation)
        if not 1 <= N <= pair.N:
            raise ValueError(f"truncation must lie in [1, {pair.N}], got {self.truncation}")
        if X is not None:
            X = check_array(X)
            if X.shape[1] != forms.n_boundary:
                raise ValueError(f"X has {X.shape[1]} columns, the mesh has {forms.n_boundary} boundary nodes")
        self.mesh_, self.suite_, self.eig_, self.pair_ = mesh, suite, eig, pair
        self.n_components_ = N
        self.n_features_in_ = forms.n_boundary
        self.kappa_ = pair.kappa[:N].copy()
        return self

    def _check_X(self, X):
        check_is_fitted(self, "pair_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X

    def transform(self, X):
        X = self._check_X(X)
        return X @ self.pair_.analysis("g")[: self.n_components_].T

    def inverse_transform(self, C):
        check_is_fitted(self, "pair_")
        C = check_array(C)
        if C.shape[1] != self.n_components_:
            raise ValueError(f"expected {self.n_components_} coefficients per row, got {C.shape[1]}")
        return C @ self.pair_.y_cols[:, : self.n_components_].T

    def predict(self, X):
        """Nodal values of ``sum c_n kappa_n phi_n`` for every row."""
        C = self.transform(X)
        N = self.n_components_
        return (C * self.kappa_) @ self.eig_.modes[:, :N].T
