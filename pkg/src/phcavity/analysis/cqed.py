"""Cavity-QED figures of merit for a single atom in a cavity mode.

All inputs in SI units except the mode volume, which is given in units of
(lambda/2)^3.  The atomic dipole decay rate is taken as an angular rate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

C_LIGHT = 299_792_458.0

#: Cs D2 dipole decay rate used as-is in rad/s (see README, "Units").
GAMMA_PERP_CS = 2.6e6
LAMBDA_CS_D2 = 852e-9


@dataclass(frozen=True)
class CqedFigures:
    kappa: float          # cavity field decay rate, rad/s
    V_mode: float         # (lambda/2)^3
    V_mode_m3: float
    V0: float             # m^3
    g0: float             # rad/s
    g_atom: float         # rad/s
    g_ratio: float
    N0: float
    m0: float
    gamma_perp: float
    wavelength: float
    Q: float
    unbounded: bool = False

    @property
    def strong_coupling(self) -> bool:
        return (not self.unbounded) and self.N0 < 1.0 and self.m0 < 1.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["strong_coupling"] = self.strong_coupling
        return d


def cavity_decay_rate(wavelength: float, Q: float) -> float:
    """kappa = omega0 / (4 pi Q)."""
    omega0 = 2.0 * math.pi * C_LIGHT / wavelength
    return omega0 / (4.0 * math.pi * Q)


def reference_volume(wavelength: float, gamma_perp: float) -> float:
    """V0 = c lambda^2 / (8 pi gamma_perp)."""
    return C_LIGHT * wavelength ** 2 / (8.0 * math.pi * gamma_perp)


def vacuum_rabi(gamma_perp: float, V0: float, V_mode_m3: float) -> float:
    """g0 = gamma_perp sqrt(V0 / V_mode)."""
    return gamma_perp * math.sqrt(V0 / V_mode_m3)


def critical_atom_number(kappa: float, gamma_perp: float, g: float) -> float:
    return 2.0 * kappa * gamma_perp / (g * g)


def critical_photon_number(gamma_perp: float, g: float) -> float:
    return (gamma_perp / (2.0 * g)) ** 2


def cqed_figures(Q: float, V_mode: float, g_ratio: float, gamma_perp: float = GAMMA_PERP_CS,
                 wavelength: float = LAMBDA_CS_D2) -> CqedFigures:
    """Figures of merit for a mode with quality factor ``Q`` and volume ``V_mode``
    (in (lambda/2)^3); ``g_ratio`` is g(r_atom)/g0 from the field pattern."""
    if Q <= 0 or V_mode <= 0:
        raise ValueError("Q and V_mode must be positive")
    if not 0.0 <= g_ratio <= 1.0 + 1e-12:
        raise ValueError(f"g/g0 must lie in [0, 1], got {g_ratio}")
    kappa = cavity_decay_rate(wavelength, Q)
    V_m3 = V_mode * (wavelength / 2.0) ** 3
    V0 = reference_volume(wavelength, gamma_perp)
    g0 = vacuum_rabi(gamma_perp, V0, V_m3)
    g = g0 * g_ratio
    if g == 0.0:
        return CqedFigures(kappa, V_mode, V_m3, V0, g0, 0.0, 0.0, math.inf, math.inf, gamma_perp,
                           wavelength, Q, unbounded=True)
    return CqedFigures(kappa, V_mode, V_m3, V0, g0, g, g_ratio,
                       critical_atom_number(kappa, gamma_perp, g), critical_photon_number(gamma_perp, g),
                       gamma_perp, wavelength, Q)
