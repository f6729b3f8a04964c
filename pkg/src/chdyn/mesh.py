"""Triangle meshes of polygonal domains with an induced boundary partition.

Vertices are always numbered boundary-first: indices ``0 .. n_boundary_vertices - 1``
lie on the boundary, all remaining vertices are interior.  The block
algebra in :mod:`chdyn.assembly` and :mod:`chdyn.schur` relies on this.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# Angles are compared in radians; right angles of structured meshes must pass.
ANGLE_TOL = 1e-9


class MeshError(ValueError):
    """Raised when a mesh violates one of the structural requirements."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable 2D simplicial mesh with boundary-first vertex numbering.

    Attributes
    ----------
    vertices : ndarray, shape (N, 2)
    cells : ndarray of int, shape (M, 3)
        Counter-clockwise oriented triangles.
    boundary_faces : ndarray of int, shape (B, 2)
        Boundary edges; every one is an edge of exactly one cell.
    n_boundary_vertices : int
    original_index : ndarray of int, shape (N,)
        ``original_index[new] = old`` maps the stored numbering back to the
        numbering of the input that produced this mesh.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_faces: np.ndarray
    n_boundary_vertices: int
    original_index: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, vertices, cells, boundary_faces=None) -> "Mesh":
        """Validate raw connectivity and renumber boundary-first.

        If ``boundary_faces`` is omitted it is derived from the edges that
        belong to exactly one cell.
        """
        vertices = np.asarray(vertices, dtype=float)
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (N, 2)")
        n = len(vertices)
        if len(cells) == 0:
            raise MeshError("mesh has no cells")
        if cells.min() < 0 or cells.max() >= n:
            raise MeshError("cell refers to a vertex index out of range")
        if np.any(cells[:, 0] == cells[:, 1]) or np.any(cells[:, 1] == cells[:, 2]) \
                or np.any(cells[:, 0] == cells[:, 2]):
            raise MeshError("cell with repeated vertex")

        cells = _orient(vertices, cells)
        _check_angles(vertices, cells)

        edge_owner = _edge_counts(cells)
        if any(c > 2 for c in edge_owner.values()):
            raise MeshError("edge shared by more than two cells")
        topo_boundary = {e for e, c in edge_owner.items() if c == 1}

        if boundary_faces is None:
            faces = np.array(sorted(topo_boundary), dtype=np.int64).reshape(-1, 2)
        else:
            faces = np.asarray(boundary_faces, dtype=np.int64).reshape(-1, 2)
            given = set()
            for i, (a, b) in enumerate(faces):
                key = (min(a, b), max(a, b))
                if key not in edge_owner:
                    raise MeshError(f"dangling boundary face {i}: ({a}, {b}) is not a cell edge")
                if edge_owner[key] != 1:
                    raise MeshError(f"boundary face {i}: ({a}, {b}) is an interior edge")
                if key in given:
                    raise MeshError(f"boundary face {i}: ({a}, {b}) listed twice")
                given.add(key)
            if given != topo_boundary:
                raise MeshError(
                    f"boundary faces do not cover the boundary "
                    f"({len(topo_boundary - given)} boundary edges missing)")

        used = np.zeros(n, dtype=bool)
        used[cells.ravel()] = True
        if not used.all():
            raise MeshError(f"{int((~used).sum())} vertices belong to no cell")

        on_boundary = np.zeros(n, dtype=bool)
        on_boundary[faces.ravel()] = True
        order = np.concatenate([np.flatnonzero(on_boundary), np.flatnonzero(~on_boundary)])
        new_of_old = np.empty(n, dtype=np.int64)
        new_of_old[order] = np.arange(n)

        faces = new_of_old[faces]
        # orient each boundary face like the cell it belongs to
        cells_new = new_of_old[cells]
        oriented = {}
        for c in cells_new:
            for a, b in ((c[0], c[1]), (c[1], c[2]), (c[2], c[0])):
                oriented[(min(a, b), max(a, b))] = (a, b)
        faces = np.array([oriented[(min(a, b), max(a, b))] for a, b in faces],
                         dtype=np.int64).reshape(-1, 2)

        if not np.array_equal(order, np.arange(n)):
            logger.debug("renumbered %d vertices boundary-first", n)

        return cls(
            vertices=vertices[order].copy(),
            cells=cells_new,
            boundary_faces=faces,
            n_boundary_vertices=int(on_boundary.sum()),
            original_index=order,
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_interior_vertices(self) -> int:
        return self.n_vertices - self.n_boundary_vertices

    @property
    def cell_areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.cells)

    @property
    def face_lengths(self) -> np.ndarray:
        p = self.vertices[self.boundary_faces]
        return np.hypot(*(p[:, 1] - p[:, 0]).T)

    @property
    def h_max(self) -> float:
        """Largest cell diameter (longest edge of any triangle)."""
        p = self.vertices[self.cells]
        edges = p[:, [1, 2, 0]] - p
        return float(np.sqrt((edges ** 2).sum(axis=2)).max())

    def shape_regularity(self) -> float:
        """Largest ratio of cell diameter to inscribed-circle diameter."""
        p = self.vertices[self.cells]
        lengths = np.sqrt(((p[:, [1, 2, 0]] - p) ** 2).sum(axis=2))
        inradius = 2.0 * self.cell_areas / lengths.sum(axis=1)
        return float((lengths.max(axis=1) / (2.0 * inradius)).max())

    def boundary_components(self) -> list[np.ndarray]:
        """Vertex index sets of the connected components of the boundary."""
        parent = list(range(self.n_boundary_vertices))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in self.boundary_faces:
            parent[find(a)] = find(b)
        roots = np.array([find(i) for i in range(self.n_boundary_vertices)])
        return [np.flatnonzero(roots == r) for r in np.unique(roots)]


def cell_area(mesh: Mesh, index: int) -> float:
    if not 0 <= index < mesh.n_cells:
        raise IndexError(f"cell index {index} out of range [0, {mesh.n_cells})")
    return float(mesh.cell_areas[index])


def boundary_face_length(mesh: Mesh, index: int) -> float:
    if not 0 <= index < len(mesh.boundary_faces):
        raise IndexError(
            f"boundary face index {index} out of range [0, {len(mesh.boundary_faces)})")
    return float(mesh.face_lengths[index])


def structured_unit_square(n: int) -> Mesh:
    """Unit square split into ``n x n`` squares, each cut along the same diagonal.

    Meshes for ``n`` and ``2n`` are nested.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    x = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(x, x)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = lower
    cells[1::2] = upper
    return Mesh.from_arrays(vertices, cells)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four similar ones through its edge midpoints.

    Similar children keep all angles, so nonobtuse meshes stay nonobtuse.
    """
    verts = [tuple(v) for v in mesh.vertices]
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            midpoint[key] = len(verts)
            verts.append(tuple(0.5 * (mesh.vertices[a] + mesh.vertices[b])))
        return midpoint[key]

    cells = []
    for a, b, c in mesh.cells:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        cells += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    faces = []
    for a, b in mesh.boundary_faces:
        m = midpoint[(min(a, b), max(a, b))]
        faces += [(a, m), (m, b)]
    return Mesh.from_arrays(np.array(verts), np.array(cells), np.array(faces))


def load_mesh(path) -> Mesh:
    """Read a mesh in the ``chmesh 2d`` text format.

    The format is line-oriented; ``#`` starts a comment::

        chmesh 2d
        vertices N
        x y            (N lines)
        cells M
        i j k          (M lines, 0-based)
        boundary B
        i j            (B lines)
    """
    path = Path(path)
    lines = []
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines or lines[0].split() != ["chmesh", "2d"]:
        raise MeshError(f"{path}: missing 'chmesh 2d' header")

    pos = 1
    sections = {}
    for name, width, dtype in (("vertices", 2, float), ("cells", 3, int), ("boundary", 2, int)):
        if pos >= len(lines):
            raise MeshError(f"{path}: missing '{name}' section")
        head = lines[pos].split()
        if len(head) != 2 or head[0] != name:
            raise MeshError(f"{path}: expected '{name} <count>', got {lines[pos]!r}")
        try:
            count = int(head[1])
        except ValueError:
            raise MeshError(f"{path}: bad count in {lines[pos]!r}") from None
        body = lines[pos + 1:pos + 1 + count]
        if len(body) != count:
            raise MeshError(f"{path}: section '{name}' truncated")
        try:
            rows = [[dtype(tok) for tok in row.split()] for row in body]
        except ValueError as exc:
            raise MeshError(f"{path}: parse failure in section '{name}': {exc}") from None
        if any(len(r) != width for r in rows):
            raise MeshError(f"{path}: section '{name}' needs {width} entries per line")
        sections[name] = rows
        pos += 1 + count
    if pos != len(lines):
        raise MeshError(f"{path}: trailing content after boundary section")

    return Mesh.from_arrays(
        np.array(sections["vertices"], dtype=float).reshape(-1, 2),
        np.array(sections["cells"], dtype=np.int64).reshape(-1, 3),
        np.array(sections["boundary"], dtype=np.int64).reshape(-1, 2),
    )


def save_mesh(mesh: Mesh, path) -> None:
    """Write ``mesh`` in the ``chmesh 2d`` format (round-trips exactly)."""
    out = ["chmesh 2d", f"vertices {mesh.n_vertices}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    out.append(f"cells {mesh.n_cells}")
    out += [f"{i} {j} {k}" for i, j, k in mesh.cells.tolist()]
    out.append(f"boundary {len(mesh.boundary_faces)}")
    out += [f"{i} {j}" for i, j in mesh.boundary_faces.tolist()]
    Path(path).write_text("\n".join(out) + "\n")


def locate_points(mesh: Mesh, points: np.ndarray, tol: float = 1e-12):
    """Return containing cell and barycentric coordinates for each point."""
    points = np.atleast_2d(points)
    p = mesh.vertices[mesh.cells]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    det = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
           - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))
    cell_of = np.empty(len(points), dtype=np.int64)
    bary = np.empty((len(points), 3))
    for i, x in enumerate(points):
        l1 = ((x[0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (x[1] - a[:, 1])) / det
        l2 = ((b[:, 0] - a[:, 0]) * (x[1] - a[:, 1]) - (x[0] - a[:, 0]) * (b[:, 1] - a[:, 1])) / det
        l0 = 1.0 - l1 - l2
        lam = np.column_stack([l0, l1, l2])
        k = int(np.argmax(lam.min(axis=1)))
        if lam[k].min() < -tol:
            raise ValueError(f"point {x.tolist()} lies outside the mesh")
        cell_of[i] = k
        bary[i] = lam[k]
    return cell_of, bary


def interpolate(mesh: Mesh, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the P1 function with nodal ``values`` at ``points``."""
    cell_of, bary = locate_points(mesh, points)
    return (values[mesh.cells[cell_of]] * bary).sum(axis=1)


def _signed_areas(vertices, cells):
    p = vertices[cells]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _orient(vertices, cells):
    area = _signed_areas(vertices, cells)
    scale = max(np.ptp(vertices, axis=0).max(), 1e-300) ** 2
    degenerate = np.flatnonzero(np.abs(area) <= 1e-14 * scale)
    if len(degenerate):
        raise MeshError(f"degenerate (zero-area) cell {int(degenerate[0])}")
    flipped = area < 0
    if flipped.any():
        logger.warning("repaired orientation of %d clockwise cells", int(flipped.sum()))
        cells = cells.copy()
        cells[flipped] = cells[flipped][:, [0, 2, 1]]
    return cells


def _check_angles(vertices, cells):
    p = vertices[cells]
    worst, worst_cell = 0.0, -1
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        w = p[:, (k + 2) % 3] - p[:, k]
        cos = (u * w).sum(axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
        ang = np.arccos(np.clip(cos, -1.0, 1.0))
        i = int(np.argmax(ang))
        if ang[i] > worst:
            worst, worst_cell = float(ang[i]), i
    if worst > 0.5 * np.pi + ANGLE_TOL:
        raise MeshError(
            f"obtuse cell {worst_cell}: angle {np.degrees(worst):.6f} degrees exceeds 90")


def _edge_counts(cells):
    counts = {}
    for c in cells.tolist():
        for a, b in ((c[0], c[1]), (c[1], c[2]), (c[2], c[0])):
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    return counts
