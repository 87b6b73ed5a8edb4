"""Global P1/P2 Lagrange spaces: DOF numbering and evaluation caches.

Both the primal and the adjoint variable live in the full continuous space
(boundary conditions are imposed weakly), so a single FeSpace serves both.
Evaluation caches are immutable and shared by assembly and analysis.
"""

from __future__ import annotations

import numpy as np

from .basis import CellGeometry, eval_basis, node_barycentric, quadrature

__all__ = ["FeSpace", "VolumeData", "FaceData"]


class VolumeData:
    """Per-cell quadrature data: points, weights and basis tables.

    Arrays: xy (nc, nq, 2); w (nq,); det (nc,); values (nb, nq);
    grads (nc, nb, nq, 2); hess (nc, nb, nq, 2, 2).
    """

    def __init__(self, space, exactness):
        rule = quadrature("triangle", exactness)
        ref = rule.points[:, 1:]
        table = eval_basis(space.degree, rule.points, order=2)
        geom = space.geometry
        self.rule = rule
        self.xy = geom.map_points(ref)
        self.w = rule.weights
        self.det = geom.det
        self.values = table.values
        self.grads = geom.push_gradients(table.gradients)
        self.hess = geom.push_hessians(table.hessians)
        self.cell_dofs = space.cell_dofs

    def field_values(self, coeffs):
        """FE function values at the quadrature points, (nc, nq)."""
        return np.einsum("cb,bq->cq", coeffs[self.cell_dofs], self.values)

    def cell_integrals(self, integrand):
        """Integral per cell of integrand (nc, nq)."""
        return np.einsum("cq,q->c", integrand, self.w) * self.det

    def integrate(self, integrand):
        return float(np.einsum("cq,q,c->", integrand, self.w, self.det))


class FaceData:
    """Trace data of one cell side on a set of faces.

    Arrays: xy (nf, nq, 2); values (nf, nb, nq); grads (nf, nb, nq, 2);
    hess (nf, nb, nq, 2, 2); normals (nf, 2); lengths (nf,); dofs (nf, nb).
    """

    def __init__(self, space, face_ids, side, exactness):
        rule = quadrature("segment", exactness)
        mesh = space.tmesh.mesh
        faces = space.tmesh.faces
        geom = space.geometry
        fids = np.asarray(face_ids, dtype=np.int64)
        cells = faces.cells_adj[fids, side]
        if np.any(cells < 0):
            raise ValueError("requested cell side does not exist on a boundary face")
        p0 = mesh.vertices[faces.faces[fids, 0]]
        p1 = mesh.vertices[faces.faces[fids, 1]]
        t = rule.points
        xy = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
        ref = geom.pull_points(cells[:, None], xy)
        bary = np.concatenate([1.0 - ref.sum(axis=-1, keepdims=True), ref], axis=-1)
        table = eval_basis(space.degree, bary, order=2)
        inv_t = geom.inv_jac_t[cells]
        inv = geom.inv_jac[cells]

        self.rule = rule
        self.face_ids = fids
        self.cells = cells
        self.t = t
        self.xy = xy
        self.values = table.values.transpose(1, 0, 2)
        self.grads = np.einsum("fij,bfqj->fbqi", inv_t, table.gradients)
        self.hess = np.einsum("fim,bfqij,fjn->fbqmn", inv, table.hessians, inv)
        self.normals = faces.normals[fids]
        self.lengths = faces.lengths[fids]
        self.w = rule.weights
        self.dofs = space.cell_dofs[cells]

    def normal_flux(self, sigma):
        """n . (sigma grad phi) per basis function, (nf, nb, nq)."""
        sg = np.einsum("ij,fbqj->fbqi", sigma, self.grads)
        return np.einsum("fbqi,fi->fbq", sg, self.normals)

    def laplacians(self):
        return np.einsum("fbqii->fbq", self.hess)

    def integrate(self, integrand):
        """Sum over faces of the line integrals of integrand (nf, nq)."""
        return float(np.einsum("fq,q,f->", integrand, self.w, self.lengths))


class FeSpace:
    """Continuous P_k Lagrange space over a tagged mesh.

    DOFs are vertex values, followed for k=2 by one value per face
    (edge midpoint), numbered by face index.
    """

    def __init__(self, tmesh, degree):
        if degree not in (1, 2):
            raise ValueError(f"unsupported degree {degree}")
        self.tmesh = tmesh
        self.degree = degree
        mesh, faces = tmesh.mesh, tmesh.faces
        if degree == 1:
            self.cell_dofs = mesh.cells.copy()
            self.ndofs = mesh.num_vertices
            self.dof_coords = mesh.vertices.copy()
        else:
            self.cell_dofs = np.hstack(
                [mesh.cells, mesh.num_vertices + faces.cell_faces]
            )
            self.ndofs = mesh.num_vertices + faces.num_faces
            mids = 0.5 * (
                mesh.vertices[faces.faces[:, 0]] + mesh.vertices[faces.faces[:, 1]]
            )
            self.dof_coords = np.vstack([mesh.vertices, mids])
        self.n_local = self.cell_dofs.shape[1]
        self.geometry = CellGeometry(mesh)
        self._volume_cache = {}
        self._face_cache = {}

    def interpolate(self, field):
        """Nodal interpolation of a callable field(xy) onto the space."""
        return np.asarray(field(self.dof_coords), dtype=float)

    def volume_data(self, exactness=None):
        if exactness is None:
            exactness = 2 * self.degree
        if exactness not in self._volume_cache:
            self._volume_cache[exactness] = VolumeData(self, exactness)
        return self._volume_cache[exactness]

    def face_data(self, face_ids, side=0, exactness=None):
        if exactness is None:
            exactness = 2 * self.degree
        key = (tuple(np.asarray(face_ids, dtype=np.int64).tolist()), side, exactness)
        if key not in self._face_cache:
            self._face_cache[key] = FaceData(self, face_ids, side, exactness)
        return self._face_cache[key]

    def node_coordinates_per_cell(self):
        """Physical coordinates of each cell's nodes, (nc, n_local, 2)."""
        bary = node_barycentric(self.degree)
        ref = bary[:, 1:]
        return self.geometry.v0[:, None, :] + np.einsum(
            "cij,nj->cni", self.geometry.jac, ref
        )

    def eval_cellwise(self, coeffs, values_table):
        """Values of a FE function from a basis table indexed (.., nb, nq, ..)."""
        return np.einsum("cb,bq->cq", coeffs[self.cell_dofs], values_table)
