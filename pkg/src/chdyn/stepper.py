"""Time stepping by damped Newton-Krylov iteration on the reduced equation.

The unknown of each step is the nodal phase field alone.  Its residual is

    H(phi) = phi - phi_old + tau * m * M_omega^-1 L_omega P(phi),

where ``P(phi)`` is the chemical potential recovered through the boundary
Schur complement (:mod:`chdyn.schur`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import Discretization, linearized_residual_matrix
from .diagnostics import (EnergyCheck, EnergyLedger, EnergyReport, energy,
                          increment_terms)
from .model import ModelParams
from .potentials import PotentialSplit
from .schur import Potentials, SchurOperator, compatibility_defect, recover_potentials

logger = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    """Newton iteration failed; carries the best iterate and residual history."""

    def __init__(self, message, best=None, history=()):
        super().__init__(message)
        self.best = best
        self.history = list(history)


class MaxItersExceeded(NewtonError):
    pass


class KrylovStagnation(NewtonError):
    pass


class EnergyIncreaseError(RuntimeError):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_iters: int = 50
    damping: float = 0.5
    max_backtracks: int = 30
    krylov_tol: float = 1e-8
    krylov_restart: int = 50
    krylov_maxit: int = 20
    preconditioner: str = "woodbury"

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "krylov_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if self.preconditioner not in ("woodbury", "bulk", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass(frozen=True)
class StepState:
    step: int
    time: float
    phi: np.ndarray = field(repr=False)
    potentials: Potentials | None = field(repr=False)
    newton_iters: int
    diagnostics: EnergyReport
    energy_check: EnergyCheck | None = None
    residual_history: tuple = ()


class Scheme:
    """One time level of the coupled bulk/surface scheme.

    Parameters
    ----------
    disc : Discretization
    params : ModelParams
    bulk, surface : PotentialSplit
    newton : NewtonConfig, optional
    schur : SchurOperator, optional
        Built from ``disc`` and ``params`` when omitted.
    """

    def __init__(self, disc: Discretization, params: ModelParams, bulk: PotentialSplit,
                 surface: PotentialSplit, newton: NewtonConfig | None = None,
                 schur: SchurOperator | None = None, energy_rel_slack: float = 1e-12):
        self.disc = disc
        self.params = params.validate(surface)
        self.bulk = bulk
        self.surface = surface
        self.newton = newton or NewtonConfig()
        self.schur = schur or SchurOperator(disc, params)
        if self.schur.mode != params.bc_mode:
            raise ValueError("Schur operator built for a different boundary mode")
        self.energy_rel_slack = energy_rel_slack
        self._scale = params.tau * params.m / disc.m_omega

    def potentials(self, phi, phi_old) -> Potentials:
        return recover_potentials(self.schur, phi, phi_old, self.params, self.bulk, self.surface)

    def residual(self, phi, phi_old) -> np.ndarray:
        pots = self.potentials(phi, phi_old)
        return phi - phi_old + self._scale * (self.disc.l_omega @ pots.P)

    def _linear_part(self, A):
        disc, schur = self.disc, self.schur
        G, I = disc.G, disc.I

        def apply(v):
            dr = A @ v
            dp = schur.recover(dr[G], dr[I])
            return v + self._scale * (disc.l_omega @ dp.P)

        return apply

    def jacobian_apply(self, phi, v) -> np.ndarray:
        """Directional derivative of the residual at ``phi`` along ``v``."""
        A = linearized_residual_matrix(self.disc, phi, self.params, self.bulk, self.surface)
        return self._linear_part(A)(np.asarray(v, dtype=float))

    def jacobian_operator(self, phi) -> spla.LinearOperator:
        A = linearized_residual_matrix(self.disc, phi, self.params, self.bulk, self.surface)
        n = self.disc.n
        return spla.LinearOperator((n, n), matvec=self._linear_part(A), dtype=float)

    def preconditioner(self, phi) -> spla.LinearOperator | None:
        """Inverse Jacobian via its sparse bulk part and a rank-``nb`` boundary correction.

        The Jacobian splits as ``J0 + U W`` where ``J0`` ignores the boundary
        Schur solve, ``U = tau m M^-1 L[:, G]`` and ``W = S^-1 C A``.  With
        ``"woodbury"`` the inverse is exact up to roundoff; ``"bulk"`` uses
        ``J0^-1`` alone.
        """
        kind = self.newton.preconditioner
        if kind == "none":
            return None
        disc, schur = self.disc, self.schur
        G, I = disc.G, disc.I
        n = disc.n
        A = linearized_residual_matrix(disc, phi, self.params, self.bulk, self.surface)
        scale = sp.diags(self._scale)
        J0 = sp.identity(n, format="csr")
        if disc.n > disc.nb:
            J0 = J0 + scale @ disc.block("OI") @ sp.diags(1.0 / disc.m_omega[I]) @ A[I, :]
        try:
            lu = spla.splu(J0.tocsc())
        except RuntimeError:
            logger.warning("bulk Jacobian block is singular; running GMRES unpreconditioned")
            return None
        if kind == "bulk":
            return spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)

        U = (scale @ disc.block("OG")).toarray()
        CA = schur.rhs_boundary @ A[G, :]
        if disc.n > disc.nb:
            CA = CA + schur.rhs_interior @ A[I, :]
        W = schur.solve(CA.toarray())
        Z = lu.solve(U)
        try:
            cap = scipy.linalg.lu_factor(np.eye(disc.nb) + W @ Z)
        except (ValueError, np.linalg.LinAlgError):
            return spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)

        def apply(x):
            y = lu.solve(x)
            return y - Z @ scipy.linalg.lu_solve(cap, W @ y)

        return spla.LinearOperator((n, n), matvec=apply, dtype=float)

    def solve_step(self, phi_old) -> tuple[np.ndarray, Potentials, int, list]:
        """Solve for the next phase field starting from ``phi_old``.

        Returns ``(phi, potentials, newton_iterations, residual_history)``.
        """
        cfg = self.newton
        phi_old = np.asarray(phi_old, dtype=float)
        if not np.all(np.isfinite(phi_old)):
            raise ValueError("phi_old contains non-finite values")
        phi = phi_old.copy()
        H = self.residual(phi, phi_old)
        norm = float(np.linalg.norm(H))
        target = cfg.abs_tol + cfg.rel_tol * norm
        history = [norm]
        iters = 0
        while norm > target:
            if iters == cfg.max_iters:
                raise MaxItersExceeded(
                    f"Newton did not converge in {cfg.max_iters} iterations "
                    f"(residual {norm:.3e}, target {target:.3e})", phi, history)
            J = self.jacobian_operator(phi)
            M = self.preconditioner(phi)
            delta, info = spla.gmres(J, -H, rtol=cfg.krylov_tol, atol=0.0,
                                     restart=cfg.krylov_restart, maxiter=cfg.krylov_maxit, M=M)
            lin_res = float(np.linalg.norm(J.matvec(delta) + H))
            if info != 0 and lin_res >= norm:
                raise KrylovStagnation(
                    f"GMRES stagnated (linear residual {lin_res:.3e})", phi, history)

            step = 1.0
            for _ in range(cfg.max_backtracks + 1):
                trial = phi + step * delta
                H_trial = self.residual(trial, phi_old)
                trial_norm = float(np.linalg.norm(H_trial))
                if trial_norm <= target or trial_norm < (1.0 - 1e-4 * step) * norm:
                    break
                step *= cfg.damping
            else:
                raise NewtonError(
                    f"line search failed at residual {norm:.3e} (target {target:.3e})",
                    phi, history)
            phi, H, norm = trial, H_trial, trial_norm
            history.append(norm)
            iters += 1
            logger.debug("newton %d: |H| = %.3e (step %.3g)", iters, norm, step)
        return phi, self.potentials(phi, phi_old), iters, history

    def report(self, phi, pots: Potentials | None = None) -> EnergyReport:
        compat = compatibility_defect(self.disc, self.params, pots)[1] if pots is not None else 0.0
        return energy(self.disc, self.params, self.bulk, self.surface, phi, pots, compat)

    def initial_state(self, phi0) -> StepState:
        phi0 = np.asarray(phi0, dtype=float)
        if phi0.shape != (self.disc.n,):
            raise ValueError(f"initial field must have length {self.disc.n}")
        return StepState(0, 0.0, phi0.copy(), None, 0, self.report(phi0))

    def run(self, phi0, n_steps: int, callback=None, check_energy: bool = True) -> list[StepState]:
        """Advance ``n_steps`` steps from ``phi0``.

        ``callback`` is called with every :class:`StepState`, including the
        initial one.  An energy increase beyond the slack raises
        :class:`EnergyIncreaseError`.
        """
        if n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        state = self.initial_state(phi0)
        states = [state]
        if callback:
            callback(state)
        ledger = EnergyLedger(state.diagnostics)
        for k in range(1, n_steps + 1):
            phi, pots, iters, history = self.solve_step(state.phi)
            rep = self.report(phi, pots)
            check = ledger.add(rep, increment_terms(self.disc, self.params, self.surface,
                                                    phi, state.phi))
            slack = self.energy_rel_slack * max(1.0, abs(state.diagnostics.total))
            if check_energy and rep.total > state.diagnostics.total + slack:
                raise EnergyIncreaseError(
                    f"energy increased at step {k}: {state.diagnostics.total!r} -> {rep.total!r}")
            state = StepState(k, k * self.params.tau, phi, pots, iters, rep, check,
                              tuple(history))
            states.append(state)
            if callback:
                callback(state)
        logger.info("summed energy law: %.12g <= initial %.12g",
                    ledger.accumulated, ledger.initial.total)
        return states
