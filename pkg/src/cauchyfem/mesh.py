"""Triangulations of the unit square: construction, face topology, boundary tags.

Meshes are criss-cross families (each grid square split along one diagonal)
with an optional seeded jitter of the interior vertices, which emulates the
quasi-uniform unstructured meshes used in practice.  All objects in this
module are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Mesh",
    "FaceSet",
    "TaggedMesh",
    "MeshError",
    "build_unit_square_mesh",
    "extract_face_topology",
    "tag_boundary",
    "save_mesh",
    "load_mesh",
    "save_field",
    "load_field",
]

# circumradius/inradius of the structured right triangle, sqrt(2)+1
_STRUCTURED_REGULARITY = np.sqrt(2.0) + 1.0
_SIDE_TOL = 1e-12


class MeshError(Exception):
    """Raised for malformed meshes or invalid construction parameters."""


class Mesh:
    """Triangulation of (a subset of) the unit square.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array, counter-clockwise vertex triples
    level : int, refinement index (subdivisions per side for built meshes)
    h_cell : (nc,) float array, longest edge per cell
    h_max : float, max of h_cell
    """

    def __init__(self, vertices, cells, level=0):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.level = int(level)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise MeshError("cells must be an (nc, 3) array")
        areas = self.signed_areas()
        if np.any(areas <= 0.0):
            raise MeshError("mesh contains a cell with non-positive area")
        p = self.vertices[self.cells]
        edge = np.stack(
            [
                np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
                np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            ],
            axis=1,
        )
        self.h_cell = edge.max(axis=1)
        self.h_max = float(self.h_cell.max())

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    def signed_areas(self):
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def regularity_ratios(self):
        """Circumradius/inradius per cell."""
        p = self.vertices[self.cells]
        a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        area = self.signed_areas()
        s = 0.5 * (a + b + c)
        return (a * b * c / (4.0 * area)) / (area / s)


def build_unit_square_mesh(n, jitter=0.0, seed=0):
    """Criss-cross mesh of the unit square with 2*n^2 cells.

    Interior vertices are displaced by a seeded uniform random offset of
    magnitude at most jitter/n; boundary vertices never move.  jitter=0
    gives the exact structured mesh.  If the jitter inverts a cell or
    degrades shape regularity beyond 3x the structured value the offsets
    are redrawn at half magnitude (a bounded number of times).
    """
    if n < 1:
        raise MeshError(f"need at least one subdivision per side, got n={n}")
    if not 0.0 <= jitter <= 0.3:
        raise MeshError(f"jitter must lie in [0, 0.3], got {jitter}")

    coords = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    cells = []
    for iy in range(n):
        for ix in range(n):
            v00 = vid(ix, iy)
            v10 = vid(ix + 1, iy)
            v01 = vid(ix, iy + 1)
            v11 = vid(ix + 1, iy + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    cells = np.array(cells, dtype=np.int64)

    if jitter == 0.0:
        return Mesh(vertices, cells, level=n)

    interior = (
        (vertices[:, 0] > _SIDE_TOL)
        & (vertices[:, 0] < 1.0 - _SIDE_TOL)
        & (vertices[:, 1] > _SIDE_TOL)
        & (vertices[:, 1] < 1.0 - _SIDE_TOL)
    )
    rng = np.random.default_rng(seed)
    amplitude = jitter / n
    for attempt in range(8):
        offsets = rng.uniform(-1.0, 1.0, size=(interior.sum(), 2))
        offsets *= amplitude / np.sqrt(2.0)
        jittered = vertices.copy()
        jittered[interior] += offsets
        trial = jittered[cells]
        d1 = trial[:, 1] - trial[:, 0]
        d2 = trial[:, 2] - trial[:, 0]
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.all(areas > 0.0):
            mesh = Mesh(jittered, cells, level=n)
            if mesh.regularity_ratios().max() <= 3.0 * _STRUCTURED_REGULARITY:
                return mesh
        amplitude *= 0.5
    raise MeshError(
        f"could not build a valid jittered mesh (n={n}, jitter={jitter}, seed={seed})"
    )


class FaceSet:
    """Edges of a triangulation with adjacency, normals and lengths.

    Interior-face normals point from the lower-indexed to the higher-indexed
    adjacent cell; boundary-face normals point out of the domain.  The
    orientation is arbitrary but fixed, so jump signs are reproducible.

    Attributes
    ----------
    faces : (nf, 2) int array of vertex pairs
    cells_adj : (nf, 2) int array; second entry is -1 on boundary faces
    normals : (nf, 2) unit normals
    lengths : (nf,) face lengths
    interior : (nf,) bool mask
    cell_faces : (nc, 3) face index of the edge opposite each local vertex
    """

    def __init__(self, mesh):
        nc = mesh.num_cells
        # local edge i is opposite local vertex i, matching the P2 node layout
        local = [(1, 2), (2, 0), (0, 1)]
        edge_map = {}
        faces = []
        adj = []
        oriented = []
        cell_faces = np.full((nc, 3), -1, dtype=np.int64)
        for c in range(nc):
            tri = mesh.cells[c]
            for le, (a, b) in enumerate(local):
                va, vb = int(tri[a]), int(tri[b])
                key = (va, vb) if va < vb else (vb, va)
                fid = edge_map.get(key)
                if fid is None:
                    fid = len(faces)
                    edge_map[key] = fid
                    faces.append(key)
                    adj.append([c, -1])
                    oriented.append((va, vb))
                else:
                    if adj[fid][1] != -1:
                        raise MeshError(
                            f"non-manifold edge {key}: more than two adjacent cells"
                        )
                    adj[fid][1] = c
                    if c < adj[fid][0]:
                        adj[fid] = [c, adj[fid][0]]
                        oriented[fid] = (va, vb)
                cell_faces[c, le] = fid

        self.faces = np.array(faces, dtype=np.int64)
        self.cells_adj = np.array(adj, dtype=np.int64)
        self.cell_faces = cell_faces
        self.interior = self.cells_adj[:, 1] >= 0

        # normal = CCW edge of the first adjacent cell rotated clockwise,
        # i.e. outward from that cell
        ori = np.array(oriented, dtype=np.int64)
        tang = mesh.vertices[ori[:, 1]] - mesh.vertices[ori[:, 0]]
        self.lengths = np.linalg.norm(tang, axis=1)
        self.normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / self.lengths[:, None]

    @property
    def num_faces(self):
        return self.faces.shape[0]

    @property
    def interior_ids(self):
        return np.flatnonzero(self.interior)

    @property
    def boundary_ids(self):
        return np.flatnonzero(~self.interior)


def extract_face_topology(mesh):
    """Complete edge list with adjacency, normals, lengths and classification."""
    return FaceSet(mesh)


_LAYOUTS = {
    "full-neumann",
    "cauchy-topright",
    "cauchy-inflow",
    "cauchy-mixed",
    "custom",
}


def _side_mask(mesh, faces, axis, value):
    pts = mesh.vertices[faces.faces]
    return np.all(np.abs(pts[:, :, axis] - value) <= _SIDE_TOL, axis=1)


class TaggedMesh:
    """Mesh + faces + boundary tags defining the data layout.

    is_dirichlet / is_neumann are per-face masks (False on interior faces).
    The derived sets follow the complement conventions: gamma_Dp and
    gamma_Np are the boundary minus the Dirichlet / Neumann parts, and
    gamma_Bp is the boundary carrying no data at all.
    """

    def __init__(self, mesh, faces, is_dirichlet, is_neumann, layout="custom"):
        self.mesh = mesh
        self.faces = faces
        self.layout = layout
        self.is_dirichlet = np.asarray(is_dirichlet, dtype=bool)
        self.is_neumann = np.asarray(is_neumann, dtype=bool)
        if self.is_dirichlet[faces.interior].any() or self.is_neumann[faces.interior].any():
            raise MeshError("interior faces cannot carry boundary tags")
        boundary = ~faces.interior
        self.gamma_D = np.flatnonzero(self.is_dirichlet)
        self.gamma_N = np.flatnonzero(self.is_neumann)
        self.gamma_Dp = np.flatnonzero(boundary & ~self.is_dirichlet)
        self.gamma_Np = np.flatnonzero(boundary & ~self.is_neumann)
        self.gamma_S = np.flatnonzero(self.is_dirichlet & self.is_neumann)
        self.gamma_Bp = np.flatnonzero(boundary & ~self.is_dirichlet & ~self.is_neumann)

    @property
    def h_max(self):
        return self.mesh.h_max


def tag_boundary(mesh, layout, predicate=None, faces=None):
    """Tag boundary faces according to a named layout.

    Layouts: 'full-neumann' (Neumann everywhere), 'cauchy-topright'
    (Cauchy data on x=1 and y=1), 'cauchy-inflow' (Cauchy data on the two
    inflow sides y=0 and x=1), 'cauchy-mixed' (Cauchy data on x=0 and y=1),
    or 'custom' with predicate(midpoints) -> (is_dirichlet, is_neumann).
    """
    if layout not in _LAYOUTS:
        raise MeshError(f"unknown boundary layout '{layout}'")
    if faces is None:
        faces = extract_face_topology(mesh)
    nf = faces.num_faces
    boundary = ~faces.interior
    is_d = np.zeros(nf, dtype=bool)
    is_n = np.zeros(nf, dtype=bool)

    if layout == "full-neumann":
        is_n[boundary] = True
    elif layout == "custom":
        if predicate is None:
            raise MeshError("custom layout requires a predicate")
        bids = np.flatnonzero(boundary)
        mids = 0.5 * (
            mesh.vertices[faces.faces[bids, 0]] + mesh.vertices[faces.faces[bids, 1]]
        )
        d, nmask = predicate(mids)
        is_d[bids] = np.asarray(d, dtype=bool)
        is_n[bids] = np.asarray(nmask, dtype=bool)
    else:
        sides = {
            "cauchy-topright": [(0, 1.0), (1, 1.0)],
            "cauchy-inflow": [(1, 0.0), (0, 1.0)],
            "cauchy-mixed": [(0, 0.0), (1, 1.0)],
        }[layout]
        cauchy = np.zeros(nf, dtype=bool)
        for axis, value in sides:
            cauchy |= _side_mask(mesh, faces, axis, value)
        cauchy &= boundary
        is_d[cauchy] = True
        is_n[cauchy] = True

    if not (is_d | is_n).any():
        raise MeshError("layout tags no boundary data at all")
    return TaggedMesh(mesh, faces, is_d, is_n, layout=layout)


def save_mesh(mesh, path):
    """Write the plain-text mesh format: 'nv nc', vertex lines, cell lines."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.num_vertices} {mesh.num_cells}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.cells:
            fh.write(f"{i} {j} {k}\n")


def load_mesh(path):
    with open(path) as fh:
        nv, nc = (int(t) for t in fh.readline().split())
        vertices = np.array(
            [[float(t) for t in fh.readline().split()] for _ in range(nv)]
        )
        cells = np.array(
            [[int(t) for t in fh.readline().split()] for _ in range(nc)],
            dtype=np.int64,
        )
    return Mesh(vertices, cells)


def save_field(values, path):
    """Write nodal values, one per line (pairs with the mesh text format)."""
    values = np.asarray(values, dtype=float)
    with open(path, "w") as fh:
        for v in values:
            fh.write(f"{float(v)!r}\n")


def load_field(path):
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()])
