"""Physical and numerical constants of the bulk/surface Cahn-Hilliard model."""
from __future__ import annotations

from dataclasses import dataclass, fields

CH = "CH"
AC = "AC"


class ConfigError(ValueError):
    """An invalid configuration value; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ModelParams:
    """Mobilities ``m`` (bulk) and ``m_gamma`` (surface), energy coefficients and step size.

    ``bc_mode`` selects the Cahn-Hilliard (``"CH"``) or Allen-Cahn (``"AC"``)
    type dynamic boundary condition.
    """

    m: float = 1.0
    m_gamma: float = 1.0
    sigma: float = 1.0
    delta: float = 1.0
    delta_gamma: float = 1.0
    kappa: float = 1.0
    tau: float = 1e-3
    bc_mode: str = CH

    def validate(self, surface_potential=None) -> "ModelParams":
        for f in fields(self):
            if f.name == "bc_mode":
                continue
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or value != value:
                raise ConfigError(f"model.{f.name}", f"not a number: {value!r}")
            if f.name == "kappa":
                if value < 0:
                    raise ConfigError("model.kappa", "must be >= 0")
            elif value <= 0:
                raise ConfigError(f"model.{f.name}" if f.name != "tau" else "time.tau",
                                  "must be > 0")
        if self.bc_mode not in (CH, AC):
            raise ConfigError("model.bc_mode", f"must be CH or AC, got {self.bc_mode!r}")
        if surface_potential is not None and self.kappa == 0 and surface_potential.beta <= 0:
            raise ConfigError("potential.surface",
                              "kappa = 0 requires a surface potential with beta > 0")
        return self
