"""Recovery of the chemical potentials from the phase field.

Given the residual vectors ``R_gamma`` (boundary rows) and ``R_int``
(interior rows) of the chemical-potential equation, the potentials follow
from three steps:

1. interior values by diagonal elimination, ``P_int = R_int / M_int``;
2. boundary trace of ``P`` from the boundary-sized SPD system
   ``S P_G = C_int R_int + C_gamma R_gamma``;
3. surface potential by back-substitution,
   ``P_gamma = (R_gamma - M_omega|G P_G) / M_gamma``.

``S`` only depends on the mesh and the mobilities, so it is factored once
per run.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import Discretization, residual_boundary, residual_interior
from .model import AC, CH, ModelParams

logger = logging.getLogger(__name__)

CHOLESKY_MAX = 2000


class SchurSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Potentials:
    P: np.ndarray
    P_gamma: np.ndarray


class SchurOperator:
    """Boundary Schur complement with its right-hand-side maps and a cached solver.

    Parameters
    ----------
    disc : Discretization
    params : ModelParams
        Only ``m``, ``m_gamma`` and ``bc_mode`` are used.
    method : {"auto", "cholesky", "cg"}
    cg_tol, cg_maxit : CG relative tolerance and iteration cap
        (``cg_maxit=None`` means ``10 * nb``).
    """

    def __init__(self, disc: Discretization, params: ModelParams, method: str = "auto",
                 cg_tol: float = 1e-10, cg_maxit: int | None = None):
        if params.m <= 0 or params.m_gamma <= 0:
            raise ValueError("mobilities must be positive")
        self.disc = disc
        self.mode = params.bc_mode
        self.m = params.m
        self.m_gamma = params.m_gamma
        self.tol = cg_tol
        self.maxit = cg_maxit if cg_maxit is not None else 10 * disc.nb

        G, I = disc.G, disc.I
        ratio = sp.diags(disc.m_omega[G] / disc.m_gamma)
        if self.mode == CH:
            inv_mg = sp.diags(1.0 / disc.m_gamma)
            surface = params.m_gamma * (ratio @ disc.l_gamma @ ratio)
            self.rhs_boundary = (params.m_gamma * (ratio @ disc.l_gamma @ inv_mg)).tocsr()
        elif self.mode == AC:
            surface = params.m_gamma * sp.diags(disc.m_omega[G] ** 2 / disc.m_gamma)
            self.rhs_boundary = (params.m_gamma * ratio).tocsr()
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.rhs_interior = (-params.m * (disc.block("GI") @ sp.diags(1.0 / disc.m_omega[I]))).tocsr()
        # kept unsymmetrized so the symmetry of the assembly itself can be checked
        self.S_assembled = (params.m * disc.block("GG") + surface).tocsr()
        # exact symmetry; the triple product can differ from its transpose in the last bit
        self.S = ((self.S_assembled + self.S_assembled.T) * 0.5).tocsr()

        if method == "auto":
            method = "cholesky" if disc.nb <= CHOLESKY_MAX else "cg"
        if method not in ("cholesky", "cg"):
            raise ValueError(f"unknown Schur solver {method!r}")
        self.method = method
        self._factor = None
        if method == "cholesky":
            try:
                self._factor = scipy.linalg.cho_factor(self.S.toarray(), lower=True)
            except np.linalg.LinAlgError as exc:
                raise SchurSolveError(
                    "Cholesky factorization of the Schur complement failed; "
                    "the matrix is not positive definite (mesh or assembly bug)") from exc
        else:
            self._jacobi = 1.0 / self.S.diagonal()
        logger.debug("Schur complement %s, nb=%d, nnz=%d, solver=%s",
                     self.mode, disc.nb, self.S.nnz, method)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``S x = b`` for a vector or for every column of a matrix."""
        b = np.asarray(b, dtype=float)
        if self._factor is not None:
            return scipy.linalg.cho_solve(self._factor, b)
        if b.ndim == 2:
            return np.column_stack([self.solve(col) for col in b.T])
        if not np.any(b):
            return np.zeros_like(b)
        M = spla.LinearOperator(self.S.shape, matvec=lambda x: self._jacobi * x)
        x, info = spla.cg(self.S, b, rtol=self.tol, atol=0.0, maxiter=self.maxit, M=M)
        if info != 0:
            raise SchurSolveError(
                f"CG on the Schur complement did not reach rtol={self.tol} in {self.maxit} "
                "iterations; the matrix may be indefinite")
        return x

    def recover(self, r_boundary: np.ndarray, r_interior: np.ndarray) -> Potentials:
        """Map residual vectors to ``(P, P_gamma)``; linear in the residuals."""
        disc = self.disc
        p_int = r_interior / disc.m_omega[disc.I]
        rhs = self.rhs_boundary @ r_boundary
        if r_interior.size:
            rhs = rhs + self.rhs_interior @ r_interior
        p_bnd = self.solve(rhs)
        p_gamma = (r_boundary - disc.m_omega[disc.G] * p_bnd) / disc.m_gamma
        return Potentials(np.concatenate([p_bnd, p_int]), p_gamma)


def build_schur(disc: Discretization, params: ModelParams, mode: str | None = None,
                method: str = "auto", cg_tol: float = 1e-10,
                cg_maxit: int | None = None) -> SchurOperator:
    if mode is not None and mode != params.bc_mode:
        from dataclasses import replace
        params = replace(params, bc_mode=mode)
    return SchurOperator(disc, params, method=method, cg_tol=cg_tol, cg_maxit=cg_maxit)


def recover_potentials(schur: SchurOperator, phi, phi_old, params: ModelParams,
                       bulk, surface) -> Potentials:
    disc = schur.disc
    r_int = residual_interior(disc, phi, phi_old, params, bulk)
    r_bnd = residual_boundary(disc, phi, phi_old, params, bulk, surface)
    return schur.recover(r_bnd, r_int)


def compatibility_defect(disc: Discretization, params: ModelParams, pots: Potentials):
    """Mismatch between the bulk and surface boundary updates.

    Returns ``(absolute, relative)`` max-norm defects of
    ``m M_omega|G^-1 L_omega|G,O P - m_gamma M_gamma^-1 L_gamma P_gamma``
    (``... - m_gamma P_gamma`` for the Allen-Cahn variant).  The relative
    value is scaled by the larger of the two terms and 1.
    """
    G = disc.G
    bulk = params.m * (disc.block("GO") @ pots.P) / disc.m_omega[G]
    if params.bc_mode == CH:
        surf = params.m_gamma * (disc.l_gamma @ pots.P_gamma) / disc.m_gamma
    else:
        surf = params.m_gamma * pots.P_gamma
    absolute = float(np.abs(bulk - surf).max())
    scale = max(float(np.abs(bulk).max()), float(np.abs(surf).max()), 1.0)
    return absolute, absolute / scale
