"""Brute-force dense reference for tests and the ``verify`` command.

Everything here is rebuilt from the mesh with explicit element loops and
numerical quadrature, independent of :mod:`chdyn.assembly`, and the
chemical potentials come from the unreduced ``(n + nb)``-square coupled
system solved by dense LU.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .model import CH, ModelParams
from .potentials import PotentialSplit
from .schur import Potentials

DENSE_GUARD = 2000

# 3-point rule, exact for quadratics on the reference triangle
_TRI_POINTS = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
_TRI_WEIGHTS = np.array([1 / 6, 1 / 6, 1 / 6])
_REF_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_GAUSS_1D = np.array([0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)])


class DenseOracle:
    def __init__(self, mesh: Mesh, params: ModelParams, bulk: PotentialSplit,
                 surface: PotentialSplit):
        n, nb = mesh.n_vertices, mesh.n_boundary_vertices
        if n + nb > DENSE_GUARD:
            raise ValueError(f"dense oracle limited to n + nb <= {DENSE_GUARD}, got {n + nb}")
        self.mesh, self.params, self.bulk, self.surface = mesh, params, bulk, surface
        self.n, self.nb = n, nb
        self.M_omega, self.L_omega = self._bulk_matrices()
        self.M_gamma, self.L_gamma = self._boundary_matrices()

    def _bulk_matrices(self):
        M = np.zeros((self.n, self.n))
        L = np.zeros((self.n, self.n))
        for cell in self.mesh.cells:
            x = self.mesh.vertices[cell]
            J = np.column_stack([x[1] - x[0], x[2] - x[0]])
            detJ = abs(np.linalg.det(J))
            grads = _REF_GRADS @ np.linalg.inv(J)
            for w in _TRI_WEIGHTS:
                L[np.ix_(cell, cell)] += w * detJ * grads @ grads.T
            # nodal (vertex) quadrature of I_h(chi_i chi_j): only i == j survives
            for k in range(3):
                M[cell[k], cell[k]] += detJ / 6.0
        return M, L

    def _boundary_matrices(self):
        M = np.zeros((self.nb, self.nb))
        L = np.zeros((self.nb, self.nb))
        for face in self.mesh.boundary_faces:
            a, b = self.mesh.vertices[face]
            length = np.sqrt(((b - a) ** 2).sum())
            dchi = np.array([-1.0, 1.0]) / length
            for _ in _GAUSS_1D:
                L[np.ix_(face, face)] += 0.5 * length * np.outer(dchi, dchi)
            for k in range(2):
                M[face[k], face[k]] += 0.5 * length
        return M, L

    def residuals(self, phi, phi_old):
        """``(R_gamma, R_interior)`` from the dense matrices."""
        p, nb = self.params, self.nb
        rhs = (p.delta * p.sigma * self.L_omega @ phi
               + p.sigma / p.delta * self.M_omega @ self.bulk.mixed_d1(phi, phi_old))
        surf = (p.kappa * p.delta_gamma * self.L_gamma @ phi[:nb]
                + self.M_gamma @ self.surface.mixed_d1(phi[:nb], phi_old[:nb]) / p.delta_gamma)
        return rhs[:nb] + surf, rhs[nb:]

    def coupled_matrix(self) -> np.ndarray:
        p, n, nb = self.params, self.n, self.nb
        Minv = np.diag(1.0 / np.diag(self.M_omega))
        A = np.zeros((n + nb, n + nb))
        A[:nb, :nb] = self.M_omega[:nb, :nb]
        A[:nb, n:] = self.M_gamma
        A[nb:n, nb:n] = self.M_omega[nb:, nb:]
        A[n:, :n] = p.m * Minv[:nb, :] @ self.L_omega
        if p.bc_mode == CH:
            A[n:, n:] = -p.m_gamma * np.linalg.inv(self.M_gamma) @ self.L_gamma
        else:
            A[n:, n:] = -p.m_gamma * np.eye(nb)
        return A

    def coupled_solve(self, phi, phi_old) -> Potentials:
        r_bnd, r_int = self.residuals(phi, phi_old)
        rhs = np.concatenate([r_bnd, r_int, np.zeros(self.nb)])
        x = np.linalg.solve(self.coupled_matrix(), rhs)
        return Potentials(x[:self.n], x[self.n:])

    def schur_dense(self) -> np.ndarray:
        """Boundary Schur complement obtained by eliminating the dense coupled system."""
        p, nb = self.params, self.nb
        Mg = np.diag(self.M_omega)[:nb]
        D = np.diag(Mg / np.diag(self.M_gamma))
        if p.bc_mode == CH:
            surf = D @ self.L_gamma @ D
        else:
            surf = D @ np.diag(Mg)
        return p.m * self.L_omega[:nb, :nb] + p.m_gamma * surf

    def scheme_residual(self, phi, phi_old) -> np.ndarray:
        pots = self.coupled_solve(phi, phi_old)
        Minv = 1.0 / np.diag(self.M_omega)
        return phi - phi_old + self.params.tau * self.params.m * Minv * (self.L_omega @ pots.P)

    def matrixform_residuals(self, phi, phi_old, pots: Potentials) -> dict:
        """Max-norm residuals of the three unreduced matrix equations, absolute and scaled."""
        p, nb = self.params, self.nb
        d = phi - phi_old
        omega_terms = [self.M_omega @ d, p.tau * p.m * self.L_omega @ pots.P]
        if p.bc_mode == CH:
            flux = p.tau * p.m_gamma * self.L_gamma @ pots.P_gamma
        else:
            flux = p.tau * p.m_gamma * self.M_gamma @ pots.P_gamma
        gamma_terms = [self.M_gamma @ d[:nb], flux]
        lhs = self.M_omega @ pots.P
        lhs[:nb] += self.M_gamma @ pots.P_gamma
        r_bnd, r_int = self.residuals(phi, phi_old)
        mu_terms = [lhs, -np.concatenate([r_bnd, r_int])]

        out = {}
        for name, terms in (("omega_phi", omega_terms), ("gamma_phi", gamma_terms),
                            ("mu", mu_terms)):
            res = float(np.abs(sum(terms)).max())
            scale = max(max(float(np.abs(t).max()) for t in terms), 1e-300)
            out[name] = res
            out[name + "_scaled"] = res / max(scale, 1.0)
        return out

    def energy(self, phi) -> float:
        p, nb = self.params, self.nb
        g = phi[:nb]
        return (0.5 * p.sigma * p.delta * phi @ self.L_omega @ phi
                + p.sigma / p.delta * np.diag(self.M_omega) @ self.bulk.value(phi)
                + 0.5 * p.kappa * p.delta_gamma * g @ self.L_gamma @ g
                + np.diag(self.M_gamma) @ self.surface.value(g) / p.delta_gamma)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


def dense_coupled_solve(oracle: DenseOracle, phi, phi_old) -> Potentials:
    return oracle.coupled_solve(phi, phi_old)


def verify_matrixform(oracle: DenseOracle, phi, phi_old, pots: Potentials,
                      tol: float) -> list[Check]:
    """Check a converged step against the unreduced equations at ``10 * tol`` (scaled)."""
    res = oracle.matrixform_residuals(phi, phi_old, pots)
    return [Check(f"matrixform {k}", res[k + "_scaled"] <= 10 * tol, res[k + "_scaled"], 10 * tol)
            for k in ("omega_phi", "gamma_phi", "mu")]
