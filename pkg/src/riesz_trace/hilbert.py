"""Operators between finite-dimensional spaces with SPD Gram matrices.

A vector ``x`` of a space with Gram ``G`` has norm ``sqrt(x^T G x)``. With
the Cholesky factor ``G = L L^T`` the map ``x -> L^T x`` is an isometry onto
Euclidean space, and every computation below (adjoints, Moore-Penrose
inverses, spectral calculus, norms) is carried out in those whitened
coordinates and mapped back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

DEFAULT_RANK_TOL = 1e-10
SELF_ADJOINT_TOL = 1e-8


class NotSPDError(ValueError):
    pass


class NotSelfAdjointError(ValueError):
    pass


class SpaceMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HilbertSpaceRep:
    """``R^dim`` with the inner product ``<x, y> = x^T gram y``."""

    gram: np.ndarray
    name: str = ""
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.array(self.gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
            raise NotSPDError(f"gram of {self.name or 'space'} must be a non-empty square matrix, got {g.shape}")
        scale = max(np.abs(g).max(), np.finfo(float).tiny)
        if np.abs(g - g.T).max() > 1e-12 * scale:
            raise NotSPDError(f"gram of {self.name or 'space'} is not symmetric")
        g = 0.5 * (g + g.T)
        try:
            L = np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise NotSPDError(f"gram of {self.name or 'space'} is not positive definite") from None
        g.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "chol", L)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def inner(self, x, y):
        return np.asarray(x).T @ self.gram @ np.asarray(y)

    def norm(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sqrt(max(x @ self.gram @ x, 0.0)))

    def whiten(self, x):
        """``L^T x``: Euclidean coordinates of ``x``."""
        return self.chol.T @ x

    def unwhiten(self, z):
        return sla.solve_triangular(self.chol, z, lower=True, trans="T")

    @classmethod
    def euclidean(cls, dim: int, name: str = "") -> "HilbertSpaceRep":
        return cls(np.eye(dim), name)


def same_space(a: HilbertSpaceRep, b: HilbertSpaceRep) -> bool:
    return a is b or (a.dim == b.dim and np.array_equal(a.gram, b.gram))


@dataclass(frozen=True, eq=False)
class OperatorRep:
    """Matrix of a linear map ``dom -> cod`` in the nodal coordinates."""

    matrix: np.ndarray
    dom: HilbertSpaceRep
    cod: HilbertSpaceRep

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (self.cod.dim, self.dom.dim):
            raise SpaceMismatchError(
                f"matrix shape {m.shape} does not match cod x dom = {(self.cod.dim, self.dom.dim)}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, x):
        return self.matrix @ x

    def __matmul__(self, other: "OperatorRep") -> "OperatorRep":
        if not same_space(self.dom, other.cod):
            raise SpaceMismatchError(f"cannot compose: {self.dom.name!r} vs {other.cod.name!r}")
        return OperatorRep(self.matrix @ other.matrix, other.dom, self.cod)

    def _check_same(self, other):
        if not (same_space(self.dom, other.dom) and same_space(self.cod, other.cod)):
            raise SpaceMismatchError("operators act between different spaces")

    def __add__(self, other: "OperatorRep") -> "OperatorRep":
        self._check_same(other)
        return OperatorRep(self.matrix + other.matrix, self.dom, self.cod)

    def __sub__(self, other: "OperatorRep") -> "OperatorRep":
        self._check_same(other)
        return OperatorRep(self.matrix - other.matrix, self.dom, self.cod)

    def __neg__(self):
        return OperatorRep(-self.matrix, self.dom, self.cod)

    def __mul__(self, c: float) -> "OperatorRep":
        return OperatorRep(c * self.matrix, self.dom, self.cod)

    __rmul__ = __mul__

    @property
    def H(self) -> "OperatorRep":
        return adjoint(self)

    def whitened(self) -> np.ndarray:
        """Matrix of the map in orthonormal coordinates: ``Lc^T A Ld^{-T}``."""
        left = self.cod.chol.T @ self.matrix
        return sla.solve_triangular(self.dom.chol, left.T, lower=True).T


def identity(space: HilbertSpaceRep) -> OperatorRep:
    return OperatorRep(np.eye(space.dim), space, space)


def zero(dom: HilbertSpaceRep, cod: HilbertSpaceRep) -> OperatorRep:
    return OperatorRep(np.zeros((cod.dim, dom.dim)), dom, cod)


def from_whitened(mat: np.ndarray, dom: HilbertSpaceRep, cod: HilbertSpaceRep) -> OperatorRep:
    """Inverse of :meth:`OperatorRep.whitened`."""
    right = sla.solve_triangular(cod.chol, mat, lower=True, trans="T")
    return OperatorRep(right @ dom.chol.T, dom, cod)


def op_norm(op: OperatorRep) -> float:
    """Operator norm between the weighted spaces."""
    w = op.whitened()
    if w.size == 0:
        return 0.0
    return float(np.linalg.norm(w, 2))


def adjoint(op: OperatorRep) -> OperatorRep:
    """``A*`` with ``<A x, y>_cod = <x, A* y>_dom``: ``G_dom^{-1} A^T G_cod``."""
    rhs = op.matrix.T @ op.cod.gram
    return OperatorRep(sla.cho_solve((op.dom.chol, True), rhs), op.cod, op.dom)


def self_adjoint_residual(op: OperatorRep) -> float:
    """Relative asymmetry ``||W - W^T|| / ||W||`` of the whitened matrix."""
    if not same_space(op.dom, op.cod):
        raise SpaceMismatchError("self-adjointness needs dom == cod")
    w = op.whitened()
    scale = np.linalg.norm(w, 2)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(w - w.T, 2) / scale)


def _svd_whitened(op: OperatorRep, rank_tol: float):
    w = op.whitened()
    U, s, Vt = np.linalg.svd(w, full_matrices=True)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > rank_tol * smax)) if smax > 0 else 0
    return U, s, Vt, rank


def pseudo_inverse(op: OperatorRep, rank_tol: float = DEFAULT_RANK_TOL) -> OperatorRep:
    """Moore-Penrose inverse with respect to the Gram inner products.

    Singular values at or below ``rank_tol * sigma_max`` of the whitened
    matrix are treated as zero.
    """
    if rank_tol < 0:
        raise ValueError("rank_tol must be non-negative")
    U, s, Vt, r = _svd_whitened(op, rank_tol)
    pinv = (Vt[:r].T / s[:r]) @ U[:, :r].T
    return from_whitened(pinv, op.cod, op.dom)


def rank(op: OperatorRep, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    return _svd_whitened(op, rank_tol)[3]


def null_projector(op: OperatorRep, rank_tol: float = DEFAULT_RANK_TOL) -> OperatorRep:
    """Orthogonal projector (in ``dom``) onto the null space of ``op``."""
    _, _, Vt, r = _svd_whitened(op, rank_tol)
    V0 = Vt[r:].T
    return from_whitened(V0 @ V0.T, op.dom, op.dom)


def range_projector(op: OperatorRep, rank_tol: float = DEFAULT_RANK_TOL) -> OperatorRep:
    """Orthogonal projector (in ``cod``) onto the range of ``op``."""
    U, _, _, r = _svd_whitened(op, rank_tol)
    U1 = U[:, :r]
    return from_whitened(U1 @ U1.T, op.cod, op.cod)


def orthogonal_projector(basis_columns, space: HilbertSpaceRep, rank_tol: float = DEFAULT_RANK_TOL) -> OperatorRep:
    """Gram-orthogonal projector onto the span of ``basis_columns``."""
    Q = np.asarray(basis_columns, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    if Q.shape[0] != space.dim:
        raise SpaceMismatchError(f"basis has {Q.shape[0]} rows, space has dim {space.dim}")
    W = space.whiten(Q)
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    if len(s) == 0 or s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
        raise np.linalg.LinAlgError("basis columns are linearly dependent")
    return from_whitened(U @ U.T, space, space)


def fractional_power(op: OperatorRep, s: float, tol: float = SELF_ADJOINT_TOL) -> OperatorRep:
    """``op**s`` by the spectral theorem in the Gram inner product.

    Eigenvalues within ``tol * max|lambda|`` of zero are treated as zero.
    """
    if not same_space(op.dom, op.cod):
        raise SpaceMismatchError("fractional powers need dom == cod")
    resid = self_adjoint_residual(op)
    if resid > tol:
        raise NotSelfAdjointError(f"operator is not self-adjoint (residual {resid:.2e})")
    w = op.whitened()
    lam, V = np.linalg.eigh(0.5 * (w + w.T))
    scale = np.abs(lam).max() if len(lam) else 0.0
    small = np.abs(lam) <= tol * scale
    integer = float(s).is_integer()
    if np.any(lam[~small] < 0) and not integer:
        raise ValueError(f"negative eigenvalue {lam.min():.3e} with non-integer power {s}")
    if s < 0 and (np.any(small) or scale == 0.0):
        raise ValueError(f"zero eigenvalue with negative power {s}")
    lam = np.where(small & (s > 0), 0.0, lam)
    if s == 0:
        powered = np.ones_like(lam)
    elif integer:
        powered = lam ** int(s)
    else:
        powered = np.abs(lam) ** s
    return from_whitened((V * powered) @ V.T, op.dom, op.dom)


def gram_function(b: OperatorRep, fn) -> OperatorRep:
    """``fn(b* b)`` on ``b.dom``, from the singular values of ``b``.

    Working from the SVD of ``b`` avoids forming ``b* b``, whose condition
    number is the square of that of ``b``.
    """
    w = b.whitened()
    _, s, Vt = np.linalg.svd(w, full_matrices=True)
    sig2 = np.zeros(b.dom.dim)
    sig2[: len(s)] = s**2
    return from_whitened((Vt.T * fn(sig2)) @ Vt, b.dom, b.dom)


def shifted_inverse_root(b: OperatorRep) -> OperatorRep:
    """``(I + b* b)^{-1/2}``."""
    return gram_function(b, lambda lam: 1.0 / np.sqrt(1.0 + lam))


def shifted_inverse(b: OperatorRep) -> OperatorRep:
    """``(I + b* b)^{-1}``."""
    return gram_function(b, lambda lam: 1.0 / (1.0 + lam))


def t_operator(a: OperatorRep, b: OperatorRep) -> OperatorRep:
    """``T_B = B (I + B*B)^{-1/2} + A* (I + B*B)^{-1/2}`` for ``b = pinv(a)``.

    This is the Moore-Penrose inverse of ``B* (I + B B*)^{-1/2}``.
    """
    root = shifted_inverse_root(b)
    return b @ root + adjoint(a) @ root


@dataclass
class MPReport:
    """Residuals of the Moore-Penrose identities for one operator."""

    residuals: dict
    rank: int
    adjoint_injective: bool

    def max(self) -> float:
        vals = [v for v in self.residuals.values() if v is not None]
        return max(vals) if vals else 0.0

    def failures(self, tol: float) -> list[str]:
        return [k for k, v in self.residuals.items() if v is not None and not v <= tol]


def verify_mp_identities(a: OperatorRep, rank_tol: float = DEFAULT_RANK_TOL, n_samples: int = 16, seed: int = 0) -> MPReport:
    """Evaluate the Labrousse identities and their consequences for ``a``.

    Operator identities are measured in the operator norm of the weighted
    spaces. The two Penrose products ``ABA = A`` and ``BAB = B`` are divided
    by ``max(1, ||A||)`` and ``max(1, ||B||)`` respectively, since ``||B||``
    is unbounded over ill-conditioned inputs. Norm identities are reported as
    the largest relative defect over
    ``n_samples`` seeded random vectors. The identity that drops the null
    projector is only evaluated when ``a*`` is injective (it is ``None``
    otherwise).
    """
    rng = np.random.default_rng(seed)
    H1, H2 = a.dom, a.cod
    I1, I2 = identity(H1), identity(H2)
    b = pseudo_inverse(a, rank_tol)
    As, Bs = adjoint(a), adjoint(b)
    r = rank(a, rank_tol)
    injective_adj = r == H2.dim

    inv_AsA = shifted_inverse(a)
    inv_AAs = shifted_inverse(As)
    inv_BBs = shifted_inverse(Bs)
    inv_BsB = shifted_inverse(b)
    P_nullBs = null_projector(Bs, rank_tol)
    P_nullAs = null_projector(As, rank_tol)

    res = {}
    na, nb = max(op_norm(a), 1.0), max(op_norm(b), 1.0)
    res["penrose_aba"] = op_norm(a @ b @ a - a) / na
    res["penrose_bab"] = op_norm(b @ a @ b - b) / nb
    res["penrose_ab_selfadjoint"] = self_adjoint_residual(a @ b) if op_norm(a @ b) else 0.0
    res["penrose_ba_selfadjoint"] = self_adjoint_residual(b @ a) if op_norm(b @ a) else 0.0

    res["labrousse_1"] = op_norm(a @ inv_AsA - Bs @ inv_BBs)
    res["labrousse_2"] = op_norm(inv_AsA + inv_BBs - I1 - P_nullBs)
    res["labrousse_3"] = op_norm(As @ inv_AAs - b @ inv_BsB)
    res["labrousse_4"] = op_norm(inv_AAs + inv_BsB - I2 - P_nullAs)
    res["labrousse_5"] = op_norm(inv_AAs + inv_BsB - I2) if injective_adj else None
    half = As @ shifted_inverse_root(As)
    p_half = null_projector(half, rank_tol)
    p_b = null_projector(b, rank_tol)
    res["labrousse_6"] = max(op_norm(p_half - P_nullAs), op_norm(P_nullAs - p_b))

    root_BBs = shifted_inverse_root(Bs)
    root_AsA = shifted_inverse_root(a)
    q = Bs @ root_BBs
    X = rng.standard_normal((H1.dim, n_samples))
    Pb = range_projector(b, rank_tol)
    XR = Pb(X)
    pyth_all, pyth_range = 0.0, 0.0
    for k in range(n_samples):
        x, xr = X[:, k], XR[:, k]
        nx = H1.norm(x) ** 2
        lhs = H2.norm(q(x)) ** 2 + H1.norm(root_BBs(x)) ** 2
        pyth_all = max(pyth_all, abs(lhs - nx) / nx)
        nxr = H1.norm(xr) ** 2
        if nxr > 0:
            lhs = H1.norm(root_BBs(xr)) ** 2 + H1.norm(root_AsA(xr)) ** 2
            pyth_range = max(pyth_range, abs(lhs - nxr) / nxr)
    res["pythagoras_all"] = pyth_all
    res["pythagoras_range_b"] = pyth_range

    tb = t_operator(a, b)
    tbs = t_operator(As, Bs)  # T_{B*}: (A, B) replaced by (A*, B*)
    res["t_b_qtq"] = op_norm(q @ tb @ q - q)
    res["t_b_tqt"] = op_norm(tb @ q @ tb - tb)
    res["t_b_range_b"] = op_norm(tb @ q - Pb)
    res["t_b_range_bs"] = op_norm(q @ tb - range_projector(Bs, rank_tol))
    res["t_b_adjoint"] = op_norm(adjoint(tb) - tbs)
    res["decomposition"] = op_norm(a - shifted_inverse_root(b) @ tbs)
    return MPReport(res, r, injective_adj)


def random_spd(dim: int, rng, condition: float = 10.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues spread over ``[1, condition]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lam = np.exp(rng.uniform(0.0, np.log(condition), dim))
    g = (Q * lam) @ Q.T
    return 0.5 * (g + g.T)


def random_operator(rng, max_dim: int = 8, deficient: bool | None = None, euclidean: bool = False) -> OperatorRep:
    """Seeded random operator between random-Gram spaces, possibly rank deficient."""
    m, n = rng.integers(1, max_dim + 1, size=2)
    if deficient is None:
        deficient = bool(rng.integers(0, 2))
    full = min(m, n)
    r = int(rng.integers(0, full)) if deficient else full
    mat = rng.standard_normal((m, r)) @ rng.standard_normal((r, n)) if r else np.zeros((m, n))
    if euclidean:
        dom, cod = HilbertSpaceRep.euclidean(n, "H1"), HilbertSpaceRep.euclidean(m, "H2")
    else:
        dom, cod = HilbertSpaceRep(random_spd(n, rng), "H1"), HilbertSpaceRep(random_spd(m, rng), "H2")
    return OperatorRep(mat, dom, cod)
