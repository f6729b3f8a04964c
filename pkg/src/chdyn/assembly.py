"""Lumped mass and stiffness matrices on the domain and on its boundary.

Mass matrices are diagonal and stored as 1D arrays; stiffness matrices are
``scipy.sparse`` CSR matrices.  Index blocks follow the boundary-first
numbering of :class:`chdyn.mesh.Mesh`: ``G = slice(0, nb)`` is the boundary,
``I = slice(nb, n)`` the interior.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import Mesh
from .model import ModelParams
from .potentials import PotentialSplit


def assemble_bulk(mesh: Mesh):
    """Return ``(M_omega, L_omega)``: lumped P1 mass diagonal and P1 stiffness."""
    n = mesh.n_vertices
    cells = mesh.cells
    p = mesh.vertices[cells]
    area = mesh.cell_areas

    # gradient of the hat function at vertex k is rot(opposite edge) / (2|K|)
    opp = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    grad = np.stack([-opp[..., 1], opp[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    local = np.einsum("eid,ejd->eij", grad, grad) * area[:, None, None]

    rows = np.repeat(cells, 3, axis=1).ravel()
    cols = np.tile(cells, (1, 3)).ravel()
    L = _coo_sorted(rows, cols, local.ravel(), n)

    mass = np.zeros(n)
    np.add.at(mass, cells.ravel(), np.repeat(area / 3.0, 3))
    return mass, L


def assemble_boundary(mesh: Mesh):
    """Return ``(M_gamma, L_gamma)`` on the boundary polygon (size ``nb``)."""
    nb = mesh.n_boundary_vertices
    faces = mesh.boundary_faces
    length = mesh.face_lengths
    local = np.array([[1.0, -1.0], [-1.0, 1.0]])[None] / length[:, None, None]
    rows = np.repeat(faces, 2, axis=1).ravel()
    cols = np.tile(faces, (1, 2)).ravel()
    L = _coo_sorted(rows, cols, local.ravel(), nb)

    mass = np.zeros(nb)
    np.add.at(mass, faces.ravel(), np.repeat(length / 2.0, 2))
    return mass, L


def _coo_sorted(rows, cols, vals, n):
    # fixed accumulation order keeps repeated assemblies bit-identical
    order = np.lexsort((cols, rows))
    A = sp.coo_matrix((vals[order], (rows[order], cols[order])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class Discretization:
    """All mesh-dependent matrices of the scheme plus their index blocks."""

    mesh: Mesh
    m_omega: np.ndarray
    l_omega: sp.csr_matrix
    m_gamma: np.ndarray
    l_gamma: sp.csr_matrix

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "Discretization":
        m_omega, l_omega = assemble_bulk(mesh)
        m_gamma, l_gamma = assemble_boundary(mesh)
        return cls(mesh, m_omega, l_omega, m_gamma, l_gamma)

    @property
    def n(self) -> int:
        return self.mesh.n_vertices

    @property
    def nb(self) -> int:
        return self.mesh.n_boundary_vertices

    @property
    def G(self) -> slice:
        return slice(0, self.nb)

    @property
    def I(self) -> slice:  # noqa: E743
        return slice(self.nb, self.n)

    def block(self, name: str) -> sp.csr_matrix:
        """Sub-block of ``L_omega``: ``"GG"``, ``"GI"``, ``"IG"``, ``"II"``, ``"GO"``, ``"IO"``."""
        return self._blocks[name]

    @cached_property
    def _blocks(self):
        G, I = self.G, self.I
        L = self.l_omega
        full = slice(0, self.n)
        sl = {"G": G, "I": I, "O": full}
        return {a + b: L[sl[a], sl[b]].tocsr() for a in "GIO" for b in "GIO"}

    def extend(self, boundary_values: np.ndarray) -> np.ndarray:
        """Pad a boundary vector with zeros on the interior."""
        out = np.zeros(self.n)
        out[:self.nb] = boundary_values
        return out

    def dump(self, directory) -> None:
        """Write the four matrices in MatrixMarket format for cross-checking."""
        from pathlib import Path
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        scipy.io.mmwrite(d / "M_omega.mtx", sp.diags(self.m_omega))
        scipy.io.mmwrite(d / "L_omega.mtx", self.l_omega)
        scipy.io.mmwrite(d / "M_gamma.mtx", sp.diags(self.m_gamma))
        scipy.io.mmwrite(d / "L_gamma.mtx", self.l_gamma)


def _check_lengths(disc, *vectors):
    for v in vectors:
        if np.shape(v) != (disc.n,):
            raise ValueError(f"expected vector of length {disc.n}, got shape {np.shape(v)}")


def residual_interior(disc: Discretization, phi, phi_old, params: ModelParams,
                      bulk: PotentialSplit) -> np.ndarray:
    """Interior rows of the chemical-potential right-hand side."""
    _check_lengths(disc, phi, phi_old)
    I = disc.I
    return (params.delta * params.sigma * (disc.block("IO") @ phi)
            + params.sigma / params.delta * disc.m_omega[I] * bulk.mixed_d1(phi[I], phi_old[I]))


def residual_boundary(disc: Discretization, phi, phi_old, params: ModelParams,
                      bulk: PotentialSplit, surface: PotentialSplit) -> np.ndarray:
    """Boundary rows: bulk trace terms plus surface Dirichlet and potential terms."""
    _check_lengths(disc, phi, phi_old)
    G = disc.G
    out = (params.delta * params.sigma * (disc.block("GO") @ phi)
           + params.sigma / params.delta * disc.m_omega[G] * bulk.mixed_d1(phi[G], phi_old[G])
           + disc.m_gamma / params.delta_gamma * surface.mixed_d1(phi[G], phi_old[G]))
    if params.kappa != 0:
        out = out + params.kappa * params.delta_gamma * (disc.l_gamma @ phi[G])
    return out


def linearized_residual_matrix(disc: Discretization, phi, params: ModelParams,
                               bulk: PotentialSplit, surface: PotentialSplit) -> sp.csr_matrix:
    """Derivative of the stacked residual ``(R_gamma, R_interior)`` with respect to ``phi``.

    Concave parts are evaluated at the old time level and do not contribute.
    """
    G = disc.G
    diag = params.sigma / params.delta * disc.m_omega * bulk.convex_d2(phi)
    diag[G] += disc.m_gamma / params.delta_gamma * surface.convex_d2(phi[G])
    A = params.delta * params.sigma * disc.l_omega + sp.diags(diag)
    if params.kappa != 0:
        lg = params.kappa * params.delta_gamma * disc.l_gamma
        E = sp.eye(disc.n, disc.nb, format="csr")
        A = A + E @ lg @ E.T
    return A.tocsr()
