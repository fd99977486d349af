"""Planar triangulations of polygonal domains.

Meshes are immutable bundles of node coordinates, counterclockwise triangles
and outward-oriented boundary edges. Two structured generators are provided
(the unit square and the L-shaped domain) together with a small text reader
and writer and a diagnostics routine.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DOMAINS = ("unit_square", "l_shape")


class MeshParseError(ValueError):
    """Raised when a mesh file does not follow the text format."""


class MeshValidationError(ValueError):
    """Raised when a mesh violates a structural invariant."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with a marked boundary.

    Parameters
    ----------
    nodes : ndarray, shape (n_nodes, 2)
    triangles : ndarray of int, shape (n_triangles, 3)
    boundary_edges : ndarray of int, shape (n_edges, 2)
        Each edge ``(i, j)`` is traversed with the domain on its left.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1, 2)
        tris = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        edges = np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        for arr in (nodes, tris, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_edges", edges)
        bnodes = np.unique(edges)
        bnodes.setflags(write=False)
        object.__setattr__(self, "boundary_nodes", bnodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def perimeter(self) -> float:
        return float(self.edge_lengths().sum())

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
        )

    __hash__ = None


def _grid_mesh(n: int, keep_cell) -> Mesh:
    h = 1.0 / n
    index = -np.ones((n + 1, n + 1), dtype=np.int64)
    cells = [(i, j) for j in range(n) for i in range(n) if keep_cell(i, j)]
    used = set()
    for i, j in cells:
        used.update({(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)})
    nodes = []
    # row-major in y then x, so node ids are reproducible
    for j in range(n + 1):
        for i in range(n + 1):
            if (i, j) in used:
                index[i, j] = len(nodes)
                nodes.append((i * h, j * h))
    tris = []
    for i, j in cells:
        a, b = index[i, j], index[i + 1, j]
        c, d = index[i + 1, j + 1], index[i, j + 1]
        # diagonal from lower-left to upper-right
        tris.append((a, b, c))
        tris.append((a, c, d))
    tris = np.array(tris, dtype=np.int64)
    return Mesh(np.array(nodes), tris, boundary_edges_from_triangles(tris))


def generate_structured_mesh(domain: str, n: int) -> Mesh:
    """Structured triangulation of ``unit_square`` or ``l_shape``.

    Every grid cell of width ``1/n`` is split along its lower-left to
    upper-right diagonal. The L-shape is the unit square minus the closed
    quadrant ``[1/2, 1] x [1/2, 1]`` and therefore needs an even ``n``.
    """
    domain = domain.replace("-", "_")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if domain == "unit_square":
        return _grid_mesh(n, lambda i, j: True)
    if domain == "l_shape":
        if n % 2:
            raise ValueError(f"l_shape needs an even n so the re-entrant corner is a node, got {n}")
        half = n // 2
        return _grid_mesh(n, lambda i, j: not (i >= half and j >= half))
    raise ValueError(f"unknown domain {domain!r}; expected one of {DOMAINS}")


def boundary_edges_from_triangles(triangles: np.ndarray) -> np.ndarray:
    """Edges owned by exactly one triangle, oriented as in that triangle.

    With counterclockwise triangles this gives the outward orientation
    (domain on the left). Edges shared by more than two triangles raise.
    """
    tris = np.asarray(triangles, dtype=np.int64)
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    owner = np.tile(np.arange(len(tris)), 3)
    local = np.repeat(np.arange(3), len(tris))
    keys = np.sort(directed, axis=1)
    counts = Counter(map(tuple, keys.tolist()))
    over = [k for k, c in counts.items() if c > 2]
    if over:
        i, j = over[0]
        bad = owner[np.flatnonzero((keys[:, 0] == i) & (keys[:, 1] == j))]
        raise MeshValidationError(
            f"edge ({i}, {j}) is shared by {counts[over[0]]} triangles {sorted(bad.tolist())}"
        )
    mask = np.array([counts[tuple(k)] == 1 for k in keys.tolist()], dtype=bool)
    edges = directed[mask]
    # order by owning triangle then local edge for determinism
    order = np.lexsort((local[mask], owner[mask]))
    return edges[order]


def boundary_loops(edges: np.ndarray) -> list[list[int]]:
    """Split directed boundary edges into closed loops of node indices.

    Raises
    ------
    MeshValidationError
        If a node does not have exactly one outgoing and one incoming edge
        or a chain fails to close.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    succ: dict[int, int] = {}
    indeg: Counter = Counter()
    for k, (i, j) in enumerate(edges.tolist()):
        if i in succ:
            raise MeshValidationError(f"boundary node {i} has two outgoing edges (edge {k})")
        succ[i] = j
        indeg[j] += 1
    for node in set(succ) | set(indeg):
        if indeg[node] != 1 or node not in succ:
            raise MeshValidationError(f"boundary is open at node {node}")
    loops, seen = [], set()
    for start in sorted(succ):
        if start in seen:
            continue
        loop, node = [], start
        while node not in seen:
            seen.add(node)
            loop.append(node)
            node = succ[node]
        if node != start:
            raise MeshValidationError(f"boundary chain from node {start} does not close")
        loops.append(loop)
    return loops


def _hanging_nodes(mesh: Mesh) -> list[tuple[int, int]]:
    """(node, boundary edge index) pairs where a node sits inside an edge."""
    hits = []
    pts = mesh.nodes
    for k, (i, j) in enumerate(mesh.boundary_edges.tolist()):
        a, b = pts[i], pts[j]
        d = b - a
        L2 = float(d @ d)
        if L2 == 0.0:
            continue
        rel = pts - a
        t = rel @ d / L2
        cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
        on = (np.abs(cross) <= 1e-12 * L2) & (t > 1e-12) & (t < 1 - 1e-12)
        on[[i, j]] = False
        hits.extend((int(p), k) for p in np.flatnonzero(on))
    return hits


def validate_mesh(mesh: Mesh) -> dict:
    """Geometric and topological diagnostics; never raises, never mutates."""
    areas = mesh.signed_areas()
    p = mesh.nodes[mesh.triangles]
    angles = []
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.einsum("ij,ij->i", u, v) / (nu * nv)
        angles.append(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
    min_angle = float(np.nanmin(angles)) if len(areas) else math.nan

    notes = []
    try:
        loops = boundary_loops(mesh.boundary_edges)
        closed = True
    except MeshValidationError as exc:
        loops, closed = [], False
        notes.append(str(exc))
    try:
        shared_ok = True
        recomputed = boundary_edges_from_triangles(mesh.triangles)
    except MeshValidationError as exc:
        shared_ok = False
        recomputed = None
        notes.append(str(exc))
    hanging = _hanging_nodes(mesh) if closed else []
    if hanging:
        notes.append(f"hanging node {hanging[0][0]} on boundary edge {hanging[0][1]}")
    matches = (
        recomputed is not None
        and {tuple(e) for e in recomputed.tolist()} == {tuple(e) for e in mesh.boundary_edges.tolist()}
    )
    if recomputed is not None and not matches:
        notes.append("boundary edges do not match triangle adjacency")
    inverted = np.flatnonzero(areas <= 0)
    if len(inverted):
        notes.append(f"triangle {int(inverted[0])} has non-positive signed area")
    conforming = bool(closed and shared_ok and matches and not hanging and not len(inverted))
    return {
        "n_nodes": mesh.n_nodes,
        "n_triangles": mesh.n_triangles,
        "n_boundary_edges": len(mesh.boundary_edges),
        "min_area": float(areas.min()) if len(areas) else math.nan,
        "max_area": float(areas.max()) if len(areas) else math.nan,
        "min_angle_deg": min_angle,
        "boundary_loops": len(loops),
        "conforming": conforming,
        "notes": notes,
    }


def _check(mesh: Mesh) -> Mesh:
    n = mesh.n_nodes
    for t, tri in enumerate(mesh.triangles.tolist()):
        if len(set(tri)) < 3:
            raise MeshValidationError(f"triangle {t} repeats a node index: {tri}")
        if min(tri) < 0 or max(tri) >= n:
            raise MeshValidationError(f"triangle {t} references a node outside 0..{n - 1}: {tri}")
    areas = mesh.signed_areas()
    degenerate = np.flatnonzero(np.abs(areas) <= 1e-14 * max(1.0, np.abs(areas).max(initial=0.0)))
    if len(degenerate):
        raise MeshValidationError(f"triangle {int(degenerate[0])} has zero area")
    diag = validate_mesh(mesh)
    if not diag["conforming"]:
        raise MeshValidationError("; ".join(diag["notes"]))
    return mesh


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def load_mesh(path) -> Mesh:
    """Read a mesh in the text format and validate it.

    Clockwise triangles are flipped (a warning is logged). The boundary
    section is optional; when absent it is recomputed from adjacency, when
    present it must agree with adjacency up to orientation, which is taken
    from the triangles.
    """
    text = Path(path).read_text()
    lines = list(_tokens(text))
    pos = 0

    def section(name, width, cast):
        nonlocal pos
        if pos >= len(lines):
            raise MeshParseError(f"missing '{name}' section")
        lineno, toks = lines[pos]
        if len(toks) != 2 or toks[0] != name:
            raise MeshParseError(f"line {lineno}: expected '{name} <count>', got {' '.join(toks)!r}")
        try:
            count = int(toks[1])
        except ValueError:
            raise MeshParseError(f"line {lineno}: bad count {toks[1]!r}") from None
        if count < 0:
            raise MeshParseError(f"line {lineno}: negative count")
        rows = []
        for k in range(count):
            pos += 1
            if pos >= len(lines):
                raise MeshParseError(f"'{name}' section ends after {k} of {count} entries")
            lineno, toks = lines[pos]
            if len(toks) != width:
                raise MeshParseError(f"line {lineno}: {name} entry {k} needs {width} values")
            try:
                rows.append([cast(t) for t in toks])
            except ValueError:
                raise MeshParseError(f"line {lineno}: {name} entry {k} is not numeric") from None
        pos += 1
        return rows

    nodes = section("nodes", 2, float)
    tris = section("triangles", 3, int)
    edges = None
    if pos < len(lines):
        edges = section("boundary", 2, int)
    if pos < len(lines):
        raise MeshParseError(f"line {lines[pos][0]}: unexpected content")

    nodes = np.array(nodes, dtype=float).reshape(-1, 2)
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    for t, tri in enumerate(tris.tolist()):
        if len(set(tri)) < 3:
            raise MeshValidationError(f"triangle {t} repeats a node index: {tri}")
        if min(tri) < 0 or max(tri) >= len(nodes):
            raise MeshValidationError(f"triangle {t} references a node outside 0..{len(nodes) - 1}: {tri}")
    probe = Mesh(nodes, tris, np.zeros((0, 2), dtype=np.int64))
    areas = probe.signed_areas()
    flipped = np.flatnonzero(areas < 0)
    if len(flipped):
        logger.warning("repaired orientation of %d clockwise triangle(s), first is %d", len(flipped), flipped[0])
        tris = tris.copy()
        tris[flipped] = tris[flipped][:, [0, 2, 1]]
    computed = boundary_edges_from_triangles(tris)
    if edges is not None:
        given = {tuple(sorted(e)) for e in edges}
        have = {tuple(sorted(e)) for e in computed.tolist()}
        if given != have:
            extra = sorted(given - have) or sorted(have - given)
            raise MeshValidationError(f"boundary section disagrees with adjacency at edge {extra[0]}")
    return _check(Mesh(nodes, tris, computed))


def write_mesh(mesh: Mesh, path) -> None:
    out = [f"nodes {mesh.n_nodes}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    out.append(f"triangles {mesh.n_triangles}")
    out += [" ".join(map(str, t)) for t in mesh.triangles.tolist()]
    out.append(f"boundary {len(mesh.boundary_edges)}")
    out += [" ".join(map(str, e)) for e in mesh.boundary_edges.tolist()]
    Path(path).write_text("\n".join(out) + "\n")
