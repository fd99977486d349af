import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import polygon_area
from riesz_trace.geometry import (
    Mesh,
    MeshParseError,
    MeshValidationError,
    boundary_edges_from_triangles,
    boundary_loops,
    generate_structured_mesh,
    load_mesh,
    validate_mesh,
    write_mesh,
)


@pytest.mark.parametrize(
    "domain, n, counts",
    [("unit_square", 1, (4, 2, 4)), ("unit_square", 2, (9, 8, 8)), ("l_shape", 2, (8, 6, 8))],
)
def test_structured_counts(domain, n, counts):
    mesh = generate_structured_mesh(domain, n)
    assert (mesh.n_nodes, mesh.n_triangles, len(mesh.boundary_edges)) == counts


@pytest.mark.parametrize("n", [1, 3, 8])
def test_unit_square_node_count(n):
    mesh = generate_structured_mesh("unit_square", n)
    assert mesh.n_nodes == (n + 1) ** 2
    assert mesh.n_triangles == 2 * n * n


def test_domain_name_accepts_dash():
    assert generate_structured_mesh("l-shape", 4) == generate_structured_mesh("l_shape", 4)


@pytest.mark.parametrize("domain, n", [("l_shape", 3), ("unit_square", 0), ("disk", 4)])
def test_generator_rejects_bad_arguments(domain, n):
    with pytest.raises(ValueError):
        generate_structured_mesh(domain, n)


@pytest.mark.parametrize("domain, area, perimeter", [("unit_square", 1.0, 4.0), ("l_shape", 0.75, 4.0)])
@pytest.mark.parametrize("n", [2, 4, 16])
def test_area_and_perimeter(domain, area, perimeter, n):
    mesh = generate_structured_mesh(domain, n)
    assert mesh.area() == pytest.approx(area, abs=1e-12)
    assert mesh.perimeter() == pytest.approx(perimeter, abs=1e-12)


@pytest.mark.parametrize("domain", ["unit_square", "l_shape"])
def test_mesh_invariants(domain):
    mesh = generate_structured_mesh(domain, 6)
    assert np.all(mesh.signed_areas() > 0)
    # every boundary node in exactly two boundary edges
    counts = np.bincount(mesh.boundary_edges.ravel(), minlength=mesh.n_nodes)
    assert set(counts[mesh.boundary_nodes]) == {2}
    assert np.array_equal(mesh.boundary_nodes, np.unique(mesh.boundary_edges))
    loops = boundary_loops(mesh.boundary_edges)
    assert len(loops) == 1
    # counterclockwise outer loop: shoelace area positive and equal to the domain area
    pts = mesh.nodes[loops[0]]
    x, y = pts[:, 0], pts[:, 1]
    assert 0.5 * (x @ np.roll(y, -1) - y @ np.roll(x, -1)) == pytest.approx(polygon_area(pts))
    assert polygon_area(pts) == pytest.approx(mesh.area())


def test_validate_unit_square():
    diag = validate_mesh(generate_structured_mesh("unit_square", 2))
    assert diag["conforming"] and diag["boundary_loops"] == 1
    assert diag["min_angle_deg"] == pytest.approx(45.0)
    assert diag["min_area"] == pytest.approx(0.125)


def test_validate_l_shape_one_loop():
    assert validate_mesh(generate_structured_mesh("l_shape", 4))["boundary_loops"] == 1


def test_validate_inverted_triangle():
    mesh = generate_structured_mesh("unit_square", 2)
    tris = mesh.triangles.copy()
    tris[0] = tris[0][[0, 2, 1]]
    diag = validate_mesh(Mesh(mesh.nodes, tris, mesh.boundary_edges))
    assert not diag["conforming"]
    assert any("triangle 0" in note for note in diag["notes"])


def test_validate_hanging_node():
    nodes = [(0, 0), (1, 0), (1, 1), (0, 1), (1, 0.5)]
    tris = np.array([(0, 1, 3), (1, 4, 3), (4, 2, 3)])
    assert validate_mesh(Mesh(nodes, tris, boundary_edges_from_triangles(tris)))["conforming"]
    # node 4 sits in the middle of the diagonal of triangle (0, 2, 3)
    nodes = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]
    tris = np.array([(0, 1, 4), (1, 2, 4), (0, 2, 3)])
    assert not validate_mesh(Mesh(nodes, tris, boundary_edges_from_triangles(tris)))["conforming"]


def test_open_boundary_detected():
    with pytest.raises(MeshValidationError, match="open"):
        boundary_loops(np.array([[0, 1], [1, 2]]))


def test_edge_shared_by_three_triangles():
    with pytest.raises(MeshValidationError, match="shared by 3"):
        boundary_edges_from_triangles(np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]]))


def test_mesh_is_immutable():
    mesh = generate_structured_mesh("unit_square", 2)
    with pytest.raises(ValueError):
        mesh.nodes[0, 0] = 5.0


# ------------------------------------------------------------------- I/O


@pytest.mark.parametrize("domain, n", [("unit_square", 2), ("l_shape", 4)])
def test_round_trip(tmp_path, domain, n):
    mesh = generate_structured_mesh(domain, n)
    path = tmp_path / "m.msh"
    write_mesh(mesh, path)
    assert load_mesh(path) == mesh


def test_boundary_section_optional(tmp_path):
    text = "# unit square\nnodes 4\n0 0\n1 0\n0 1\n1 1  # top right\ntriangles 2\n0 1 3\n0 3 2\n"
    path = tmp_path / "m.msh"
    path.write_text(text)
    mesh = load_mesh(path)
    assert len(mesh.boundary_edges) == 4
    assert mesh == generate_structured_mesh("unit_square", 1)


def test_clockwise_triangle_repaired(tmp_path, caplog):
    path = tmp_path / "m.msh"
    path.write_text("nodes 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 2 1\n0 2 3\n")
    with caplog.at_level(logging.WARNING):
        mesh = load_mesh(path)
    assert np.all(mesh.signed_areas() > 0)
    assert "clockwise" in caplog.text


def test_duplicate_index_names_triangle(tmp_path):
    path = tmp_path / "m.msh"
    path.write_text("nodes 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 3 3\n")
    with pytest.raises(MeshValidationError, match="triangle 1"):
        load_mesh(path)


@pytest.mark.parametrize(
    "text, match",
    [
        ("nodes 2\n0 0\n", "ends after"),
        ("nodes 1\n0 zero\ntriangles 0\n", "not numeric"),
        ("vertices 1\n0 0\n", "expected 'nodes"),
        ("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1\n", "needs 3 values"),
        ("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 3\n0 1\n1 2\n2 0\nextra\n", "unexpected"),
    ],
)
def test_parse_errors(tmp_path, text, match):
    path = tmp_path / "m.msh"
    path.write_text(text)
    with pytest.raises(MeshParseError, match=match):
        load_mesh(path)


def test_boundary_section_must_match(tmp_path):
    path = tmp_path / "m.msh"
    path.write_text("nodes 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\nboundary 4\n0 1\n1 2\n2 3\n0 2\n")
    with pytest.raises(MeshValidationError, match="disagrees"):
        load_mesh(path)


def test_out_of_range_index(tmp_path):
    path = tmp_path / "m.msh"
    path.write_text("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 7\n")
    with pytest.raises(MeshValidationError, match="triangle 0"):
        load_mesh(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.sampled_from(["unit_square", "l_shape"]))
def test_generated_meshes_validate(n, domain):
    if domain == "l_shape":
        n = 2 * n
    mesh = generate_structured_mesh(domain, n)
    diag = validate_mesh(mesh)
    assert diag["conforming"] and diag["boundary_loops"] == 1 and not diag["notes"]
