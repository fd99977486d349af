import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import loop_assembly
from riesz_trace.assembly import (
    QUAD7_POINTS,
    QUAD7_WEIGHTS,
    AssemblyError,
    assemble_forms,
    element_geometry,
    interpolate,
    l2_error,
    partial_gram,
)
from riesz_trace.geometry import Mesh, generate_structured_mesh


@pytest.fixture(scope="module", params=[("unit_square", 2), ("unit_square", 5), ("l_shape", 4)])
def mesh(request):
    return generate_structured_mesh(*request.param)


def test_matches_loop_assembly(mesh):
    forms = assemble_forms(mesh)
    A, M, Mb, bnodes = loop_assembly(mesh.nodes, mesh.triangles, mesh.boundary_edges)
    assert np.array_equal(bnodes, mesh.boundary_nodes)
    assert np.abs(forms.A - A).max() <= 1e-13
    assert np.abs(forms.M - M).max() <= 1e-15
    assert np.abs(forms.Mb - Mb).max() <= 1e-15


def test_form_invariants(mesh):
    forms = assemble_forms(mesh)
    for mat in (forms.A, forms.M, forms.Mb):
        assert np.array_equal(mat, mat.T)
    lam = np.linalg.eigvalsh(forms.A)
    # semidefinite with a one-dimensional null space spanned by constants
    assert abs(lam[0]) <= 1e-12 and lam[1] > 1e-8
    assert np.abs(forms.A @ np.ones(mesh.n_nodes)).max() <= 1e-13
    assert np.linalg.eigvalsh(forms.M)[0] > 0
    assert np.linalg.eigvalsh(forms.Mb)[0] > 0
    assert np.array_equal(forms.R.sum(axis=1), np.ones(forms.n_boundary))
    assert np.array_equal(np.argmax(forms.R, axis=1), mesh.boundary_nodes)


def test_unit_square_constants():
    forms = assemble_forms(generate_structured_mesh("unit_square", 2))
    one = np.ones(forms.n_nodes)
    assert one @ forms.M @ one == pytest.approx(1.0, abs=1e-14)
    assert np.ones(forms.n_boundary) @ forms.Mb @ np.ones(forms.n_boundary) == pytest.approx(4.0, abs=1e-14)
    assert np.abs(assemble_forms(generate_structured_mesh("unit_square", 1)).A @ np.ones(4)).max() == 0.0


def test_partial_gram_definition(mesh):
    forms = assemble_forms(mesh)
    S = partial_gram(forms)
    rng = np.random.default_rng(3)
    u, v = rng.standard_normal((2, forms.n_nodes))
    assert u @ S @ v == pytest.approx(u @ forms.A @ v + (forms.R @ u) @ forms.Mb @ (forms.R @ v), rel=1e-13)
    assert np.linalg.eigvalsh(S)[0] > 0
    one = np.ones(forms.n_nodes)
    assert one @ S @ one == pytest.approx(mesh.perimeter(), abs=1e-12)


def test_partial_norm_of_x():
    # |grad x|^2 over the square is 1; the trace x^2 integrates to 1/3 + 1/3 + 1 + 0
    mesh = generate_structured_mesh("unit_square", 2)
    forms = assemble_forms(mesh)
    v = interpolate(mesh, lambda x, y: x)
    grad = v @ forms.A @ v
    trace = (forms.R @ v) @ forms.Mb @ (forms.R @ v)
    assert grad == pytest.approx(1.0, abs=1e-14)
    # bottom and top edges: int_0^1 x^2 = 1/3 each; right edge x = 1: 1; left edge x = 0: 0
    assert trace == pytest.approx(2.0 / 3.0 + 1.0, abs=1e-14)
    assert v @ forms.S @ v == pytest.approx(1.0 + 5.0 / 3.0, abs=1e-14)


@pytest.mark.parametrize("domain, area", [("unit_square", 1.0), ("l_shape", 0.75)])
def test_refinement_conserves_area_and_perimeter(domain, area):
    for n in (2, 4, 8, 16):
        forms = assemble_forms(generate_structured_mesh(domain, n))
        assert np.ones(forms.n_nodes) @ forms.M @ np.ones(forms.n_nodes) == pytest.approx(area, abs=1e-12)
        assert np.ones(forms.n_boundary) @ forms.Mb @ np.ones(forms.n_boundary) == pytest.approx(4.0, abs=1e-12)


def test_s_norm_of_interpolant_is_cauchy():
    fn = lambda x, y: np.sin(np.pi * x) * np.exp(y)  # noqa: E731
    vals = []
    for n in (4, 8, 16, 32):
        mesh = generate_structured_mesh("unit_square", n)
        v = interpolate(mesh, fn)
        vals.append(np.sqrt(v @ assemble_forms(mesh).S @ v))
    gaps = np.abs(np.diff(vals))
    assert np.all(gaps[1:] < gaps[:-1])
    assert gaps[-1] < 0.3 * gaps[0]


def test_gradients_of_linear_function(mesh):
    _, grads = element_geometry(mesh)
    u = interpolate(mesh, lambda x, y: 3.0 * x - 2.0 * y + 1.0)
    g = np.einsum("tkd,tk->td", grads, u[mesh.triangles])
    assert np.abs(g - [3.0, -2.0]).max() <= 1e-12


def test_degenerate_triangle_named():
    nodes = [(0, 0), (1, 0), (2, 0), (0, 1)]
    mesh = Mesh(nodes, [(0, 3, 1), (0, 1, 2)], [(0, 1)])
    with pytest.raises(AssemblyError, match="triangle 0"):
        assemble_forms(mesh)


def test_quadrature_rule_degree_five():
    assert QUAD7_WEIGHTS.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(QUAD7_POINTS.sum(axis=1), 1.0)
    # reference-triangle moments int x^a y^b = a! b! / (a + b + 2)!, times 2 for unit weight
    from math import factorial

    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    xy = QUAD7_POINTS @ ref
    for a in range(6):
        for b in range(6 - a):
            exact = 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)
            approx = np.sum(QUAD7_WEIGHTS * xy[:, 0] ** a * xy[:, 1] ** b)
            assert approx == pytest.approx(exact, abs=1e-13)


def test_l2_error_exact_for_linears():
    mesh = generate_structured_mesh("unit_square", 3)
    fn = lambda x, y: 2 * x - y  # noqa: E731
    assert l2_error(mesh, interpolate(mesh, fn), fn) <= 1e-14
    assert l2_error(mesh, np.zeros(mesh.n_nodes), lambda x, y: np.ones_like(x)) == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.floats(0.2, 3.0), st.floats(0.2, 3.0))
def test_affine_scaling_of_forms(n, sx, sy):
    base = generate_structured_mesh("unit_square", n)
    scaled = Mesh(base.nodes * [sx, sy], base.triangles, base.boundary_edges)
    f0, f1 = assemble_forms(base), assemble_forms(scaled)
    assert np.allclose(f1.M, f0.M * sx * sy, rtol=1e-12, atol=1e-15)
    one = np.ones(f1.n_boundary)
    assert one @ f1.Mb @ one == pytest.approx(2 * (sx + sy), rel=1e-12)
