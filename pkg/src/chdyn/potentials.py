"""Bulk and surface potentials with a convex/concave splitting.

The time discretization evaluates the derivative of the convex part at the
new time level and the derivative of the concave part at the old one, which
is what makes the scheme unconditionally energy stable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

ScalarFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PotentialSplit:
    """A potential ``W = W_plus + W_minus`` with ``W_plus`` convex and ``W_minus`` concave.

    All six callables act elementwise on arrays.  ``beta`` is the constant
    in the strengthened concavity inequality

        W_minus'(s2) (s1 - s2) >= W_minus(s1) - W_minus(s2) + beta |s1 - s2|^2

    and ``lower_bound`` is a value with ``W >= lower_bound`` everywhere.
    """

    name: str
    convex_value: ScalarFn
    convex_d1: ScalarFn
    convex_d2: ScalarFn
    concave_value: ScalarFn
    concave_d1: ScalarFn
    concave_d2: ScalarFn
    beta: float = 0.0
    lower_bound: float = 0.0

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return self.convex_value(s) + self.concave_value(s)

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        return self.convex_d1(s) + self.concave_d1(s)

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        return self.convex_d2(s) + self.concave_d2(s)

    def mixed_d1(self, phi_new, phi_old):
        """Convex derivative at ``phi_new`` plus concave derivative at ``phi_old``."""
        return (self.convex_d1(np.asarray(phi_new, dtype=float))
                + self.concave_d1(np.asarray(phi_old, dtype=float)))


def evaluate_mixed_d1(split: PotentialSplit, phi_new, phi_old):
    return split.mixed_d1(phi_new, phi_old)


def double_well_penalized(c_pen: float = 0.0) -> PotentialSplit:
    """``1/4 (1 - s^2)^2 + c_pen max(|s| - 1, 0)^2``, split as ``1/4 (s^4 + 1) + penalty`` and ``-s^2/2``."""
    if c_pen < 0:
        raise ValueError("c_pen must be nonnegative")
    c = float(c_pen)

    def excess(s):
        return np.maximum(np.abs(s) - 1.0, 0.0)

    def convex_value(s):
        return 0.25 * (s ** 4 + 1.0) + c * excess(s) ** 2

    def convex_d1(s):
        return s ** 3 + 2.0 * c * excess(s) * np.sign(s)

    def convex_d2(s):
        # one-sided value 2 c at the kinks |s| = 1
        return 3.0 * s ** 2 + 2.0 * c * (np.abs(s) >= 1.0)

    return PotentialSplit(
        name=f"doublewell({c_pen:g})",
        convex_value=convex_value,
        convex_d1=convex_d1,
        convex_d2=convex_d2,
        concave_value=lambda s: -0.5 * s ** 2,
        concave_d1=lambda s: -s,
        concave_d2=lambda s: -np.ones_like(s),
        beta=0.5,
        lower_bound=0.0,
    )


def wetting_energy() -> PotentialSplit:
    """Fluid-solid interfacial energy ``sin(pi/2 clamp(s, -1, 1))`` with the ``pi^2 s^2 / 8`` shift."""
    k = np.pi ** 2 / 8.0

    def convex_value(s):
        return np.sin(0.5 * np.pi * np.clip(s, -1.0, 1.0)) + k * s ** 2

    def convex_d1(s):
        inside = np.abs(s) < 1.0
        return 0.5 * np.pi * np.cos(0.5 * np.pi * np.clip(s, -1.0, 1.0)) * inside + 2.0 * k * s

    def convex_d2(s):
        inside = np.abs(s) < 1.0
        return -(0.5 * np.pi) ** 2 * np.sin(0.5 * np.pi * np.clip(s, -1.0, 1.0)) * inside + 2.0 * k

    return PotentialSplit(
        name="wetting",
        convex_value=convex_value,
        convex_d1=convex_d1,
        convex_d2=convex_d2,
        concave_value=lambda s: -k * s ** 2,
        concave_d1=lambda s: -2.0 * k * s,
        concave_d2=lambda s: -2.0 * k * np.ones_like(s),
        beta=k,
        lower_bound=-1.0,
    )


def parse_potential(text: str) -> PotentialSplit:
    """Build a potential from ``doublewell(c)``, ``doublewell`` or ``wetting``."""
    spec = text.strip().replace(" ", "")
    if spec == "wetting" or spec == "wetting()":
        return wetting_energy()
    if spec == "doublewell":
        return double_well_penalized(0.0)
    if spec.startswith("doublewell(") and spec.endswith(")"):
        arg = spec[len("doublewell("):-1]
        return double_well_penalized(float(arg) if arg else 0.0)
    raise ValueError(f"unknown potential {text!r}")


@dataclass
class SplitCheck:
    convex_ok: bool
    concave_ok: bool
    lower_bound_ok: bool
    convex_inequality_ok: bool
    concave_inequality_ok: bool
    beta_inequality_ok: bool

    @property
    def ok(self) -> bool:
        return all(vars(self).values())


def check_split(split: PotentialSplit, lo: float = -3.0, hi: float = 3.0,
                n: int = 1000, tol: float = 1e-10) -> SplitCheck:
    """Sample the structural assumptions of a splitting on ``[lo, hi]``.

    Pairwise inequalities use a thinned subgrid so the cost stays quadratic
    in at most 200 points.
    """
    s = np.linspace(lo, hi, n)
    scale = 1.0 + np.abs(split.value(s)).max()
    convex_ok = bool((split.convex_d2(s) >= -tol).all())
    concave_ok = bool((split.concave_d2(s) <= tol).all())
    lower_ok = bool((split.value(s) >= split.lower_bound - tol).all())

    t = s[:: max(1, n // 200)]
    s1, s2 = np.meshgrid(t, t, indexing="ij")
    atol = tol * scale
    convex_ineq = (split.convex_d1(s1) * (s1 - s2)
                   - (split.convex_value(s1) - split.convex_value(s2)))
    concave_ineq = (split.concave_d1(s2) * (s1 - s2)
                    - (split.concave_value(s1) - split.concave_value(s2)))
    return SplitCheck(
        convex_ok=convex_ok,
        concave_ok=concave_ok,
        lower_bound_ok=lower_ok,
        convex_inequality_ok=bool((convex_ineq >= -atol).all()),
        concave_inequality_ok=bool((concave_ineq >= -atol).all()),
        beta_inequality_ok=bool((concave_ineq - split.beta * (s1 - s2) ** 2 >= -atol).all()),
    )


def linear_growth_gap(split: PotentialSplit, lo: float = -50.0, hi: float = 50.0,
                      n: int = 20001) -> float | None:
    """Sampled ``max_s (|s| - W(s))``, or ``None`` if ``W`` does not dominate ``|s|``.

    Used to turn an energy bound into a bound on the L1 norm of a field.
    """
    s = np.linspace(lo, hi, n)
    gap = np.abs(s) - split.value(s)
    # the maximum must be attained away from the sampling edges
    if gap[0] >= gap[1] or gap[-1] >= gap[-2]:
        return None
    return float(gap.max())
