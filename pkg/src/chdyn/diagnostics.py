"""Discrete energy, mass functionals and dissipation bookkeeping."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from .assembly import Discretization
from .model import CH, ModelParams
from .potentials import PotentialSplit, linear_growth_gap
from .schur import Potentials

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyReport:
    bulk_dirichlet: float
    bulk_potential: float
    surf_dirichlet: float
    surf_potential: float
    total: float
    bulk_mass: float
    surf_mass: float
    dissipation_bulk: float = 0.0
    dissipation_surf: float = 0.0
    compat_residual: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


# CSV column order; documented in the README
CSV_COLUMNS = ("step", "time", "newton_iters") + tuple(f.name for f in fields(EnergyReport))


def energy(disc: Discretization, params: ModelParams, bulk: PotentialSplit,
           surface: PotentialSplit, phi: np.ndarray, pots: Potentials | None = None,
           compat_residual: float = 0.0) -> EnergyReport:
    """Energy components and masses of ``phi``; dissipation terms need ``pots``."""
    if np.shape(phi) != (disc.n,):
        raise ValueError(f"expected vector of length {disc.n}")
    g = phi[disc.G]
    bulk_dirichlet = 0.5 * params.sigma * params.delta * float(phi @ (disc.l_omega @ phi))
    bulk_potential = params.sigma / params.delta * float(disc.m_omega @ bulk.value(phi))
    surf_dirichlet = 0.5 * params.kappa * params.delta_gamma * float(g @ (disc.l_gamma @ g))
    surf_potential = float(disc.m_gamma @ surface.value(g)) / params.delta_gamma
    diss_bulk = diss_surf = 0.0
    if pots is not None:
        diss_bulk = params.tau * params.m * float(pots.P @ (disc.l_omega @ pots.P))
        if params.bc_mode == CH:
            diss_surf = params.tau * params.m_gamma * float(pots.P_gamma @ (disc.l_gamma @ pots.P_gamma))
        else:
            diss_surf = params.tau * params.m_gamma * float(disc.m_gamma @ pots.P_gamma ** 2)
    return EnergyReport(
        bulk_dirichlet=bulk_dirichlet,
        bulk_potential=bulk_potential,
        surf_dirichlet=surf_dirichlet,
        surf_potential=surf_potential,
        total=bulk_dirichlet + bulk_potential + surf_dirichlet + surf_potential,
        bulk_mass=float(disc.m_omega @ phi),
        surf_mass=float(disc.m_gamma @ g),
        dissipation_bulk=diss_bulk,
        dissipation_surf=diss_surf,
        compat_residual=compat_residual,
    )


def increment_terms(disc: Discretization, params: ModelParams, surface: PotentialSplit,
                    phi: np.ndarray, phi_old: np.ndarray) -> float:
    """Nonnegative increment terms of the discrete energy law.

    Gradient energy of the increment in the bulk and on the boundary plus
    the ``beta``-weighted boundary L2 norm of the increment.
    """
    d = phi - phi_old
    dg = d[disc.G]
    return (0.5 * params.sigma * params.delta * float(d @ (disc.l_omega @ d))
            + 0.5 * params.kappa * params.delta_gamma * float(dg @ (disc.l_gamma @ dg))
            + surface.beta / params.delta_gamma * float(disc.m_gamma @ dg ** 2))


@dataclass(frozen=True)
class EnergyCheck:
    passed: bool
    margin: float
    slack: float


def energy_inequality_check(prev: EnergyReport, curr: EnergyReport,
                            extras: float = 0.0, rel_slack: float = 1e-12) -> EnergyCheck:
    """Test ``E(curr) + dissipation(curr) + extras <= E(prev) + slack``.

    ``margin`` is ``E(prev) - (E(curr) + dissipation + extras)``; negative
    margins within ``slack`` still pass.
    """
    slack = rel_slack * max(1.0, abs(prev.total))
    lhs = curr.total + curr.dissipation_bulk + curr.dissipation_surf + extras
    margin = prev.total - lhs
    return EnergyCheck(margin >= -slack, margin, slack)


def coupling_ratio(h: float, tau: float, kappa: float) -> float:
    """Coupling ratio ``h^4 / tau`` (``kappa > 0``) or ``h^2 / tau`` (``kappa = 0``).

    Advisory only; convergence theory wants it to tend to zero under refinement.
    """
    ratio = h ** 4 / tau if kappa > 0 else h ** 2 / tau
    logger.info("coupling ratio %s = %.6g (h=%.4g, tau=%.4g)",
                "h^4/tau" if kappa > 0 else "h^2/tau", ratio, h, tau)
    return ratio


def surface_mass_bound(initial: EnergyReport, disc: Discretization, params: ModelParams,
                       bulk: PotentialSplit, surface: PotentialSplit) -> float | None:
    """Energy-derived bound on ``|sum M_gamma phi|`` for the Allen-Cahn variant.

    Dirichlet terms are nonnegative and the bulk potential is bounded below,
    so ``sum M_gamma G(phi) <= delta_gamma (E0 - sigma/delta * lb_F * |Omega|)``.
    With ``|s| <= G(s) + c`` this bounds the lumped L1 norm on the boundary.
    Returns ``None`` when the surface potential does not dominate ``|s|``.
    """
    gap = linear_growth_gap(surface)
    if gap is None:
        return None
    area = float(disc.m_omega.sum())
    perimeter = float(disc.m_gamma.sum())
    surf_energy = params.delta_gamma * (initial.total - params.sigma / params.delta
                                        * bulk.lower_bound * area)
    return surf_energy + gap * perimeter


class EnergyLedger:
    """Running sum of the discrete energy law over accepted steps.

    ``accumulated`` is the left side of the summed law: current energy plus
    all dissipation and increment terms so far.  It never exceeds the
    initial energy for exact solves.
    """

    def __init__(self, initial: EnergyReport):
        self.initial = initial
        self.previous = initial
        self.dissipated = 0.0

    def add(self, report: EnergyReport, extras: float) -> EnergyCheck:
        check = energy_inequality_check(self.previous, report, extras)
        self.dissipated += report.dissipation_bulk + report.dissipation_surf + extras
        self.previous = report
        return check

    @property
    def accumulated(self) -> float:
        return self.previous.total + self.dissipated
