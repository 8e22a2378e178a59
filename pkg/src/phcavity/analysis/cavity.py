"""Mode-level quantities: Q splitting, mode volume and field ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .cqed import GAMMA_PERP_CS, LAMBDA_CS_D2, CqedFigures, cqed_figures


@dataclass
class ModeSnapshot:
    """Complex E phasors on the Yee grid of a (possibly mirrored) domain.

    ``e`` holds three arrays with the real-sample extents of Ex, Ey, Ez over
    the same node box; ``eps`` is the node permittivity over that box and
    ``eps_comp`` the permittivity at the three component positions.
    ``origin`` is the physical coordinate of node (0, 0, 0) of the box;
    ``mirrors`` flags axes whose node 0 lies on a symmetry plane.
    """

    e: tuple
    eps: np.ndarray
    eps_comp: tuple
    origin: tuple
    mirrors: tuple = (False, False, False)

    def scaled(self, factor: float) -> "ModeSnapshot":
        return ModeSnapshot(tuple(factor * c for c in self.e), self.eps, self.eps_comp, self.origin, self.mirrors)

    def node_intensity(self) -> np.ndarray:
        """|E|^2 at nodes, each component averaged over its two neighbours."""
        out = np.zeros(self.eps.shape)
        for c, comp in enumerate(self.e):
            sq = np.abs(comp) ** 2
            shifted = np.zeros_like(sq)
            sl_dst = [slice(None)] * 3
            sl_src = [slice(None)] * 3
            sl_dst[c] = slice(1, None)
            sl_src[c] = slice(0, -1)
            shifted[tuple(sl_dst)] = sq[tuple(sl_src)]
            if self.mirrors[c]:
                # sample at -1/2 mirrors the one at +1/2 (same magnitude)
                idx0 = [slice(None)] * 3
                idx0[c] = 0
                shifted[tuple(idx0)] = sq[tuple(idx0)]
            out += 0.5 * (sq + shifted)
        return out

    def weighted_energy(self) -> float:
        """Integral of eps |E|^2 over the full (unfolded) structure."""
        total = 0.0
        for c, comp in enumerate(self.e):
            w = np.abs(comp) ** 2 * self.eps_comp[c]
            for axis in range(3):
                if self.mirrors[axis]:
                    if axis == c:
                        w = 2.0 * w  # half-position samples: plain doubling
                    else:
                        idx = [slice(None)] * 3
                        idx[axis] = slice(1, None)
                        w = w.copy()
                        w[tuple(idx)] *= 2.0
            total += float(w.sum())
        return total


def mode_volume(snapshot: ModeSnapshot) -> float:
    """V = integral eps |E|^2 dV / max(eps |E|^2), in cells^3 (full structure)."""
    peak = float(np.max(snapshot.eps * snapshot.node_intensity()))
    if peak == 0.0:
        raise ValueError("snapshot field is identically zero")
    return snapshot.weighted_energy() / peak


def mode_volume_half_wavelengths(snapshot: ModeSnapshot, a: float, a_over_lambda: float) -> float:
    """Mode volume in units of (lambda/2)^3 with lambda = a / (a/lambda) cells."""
    lam = a / a_over_lambda
    return mode_volume(snapshot) / (lam / 2.0) ** 3


def field_ratio(snapshot: ModeSnapshot, location, sqrt_eps: bool = False) -> float:
    """eps(r)|E(r)| / max(eps |E|) at a physical location (trilinear interpolation).

    With ``sqrt_eps`` the weighting is sqrt(eps) instead of eps.
    """
    inten = snapshot.node_intensity()
    weight = np.sqrt(snapshot.eps) if sqrt_eps else snapshot.eps
    amp = weight * np.sqrt(inten)
    peak = float(amp.max())
    if peak == 0.0:
        return 0.0
    axes = [snapshot.origin[a] + np.arange(n, dtype=float) for a, n in enumerate(amp.shape)]
    loc = [float(v) for v in location]
    for a in range(3):
        if snapshot.mirrors[a]:
            loc[a] = abs(loc[a])
    interp = RegularGridInterpolator(axes, amp, bounds_error=True)
    return float(interp([loc])[0]) / peak


def split_q(omega: float, energy: np.ndarray, p_vertical: np.ndarray, p_lateral: np.ndarray) -> dict:
    """Q_perp, Q_par and their combination from time series over whole cycles.

    Returns a dict with the three Q values and a ``negative_face`` flag if a
    cycle-averaged flux is negative.
    """
    W = float(np.mean(energy))
    pv = float(np.mean(p_vertical))
    pl = float(np.mean(p_lateral))
    out = {"W": W, "P_vertical": pv, "P_lateral": pl, "negative_face": pv < 0 or pl < 0}
    out["Q_perp"] = omega * W / pv if pv > 0 else math.inf
    out["Q_par"] = omega * W / pl if pl > 0 else math.inf
    out["Q_flux"] = omega * W / (pv + pl) if (pv + pl) > 0 else math.inf
    return out


@dataclass
class ResonantMode:
    """Result of a cavity run."""

    a: float
    a_over_lambda: float
    Q_total: float
    Q_perp: float
    Q_par: float
    Q_decay: float = math.nan
    Q_flux: float = math.nan
    W: float = math.nan
    V_mode: float = math.nan
    snapshot: Optional[ModeSnapshot] = None
    extras: dict = field(default_factory=dict)

    @property
    def frequency(self) -> float:
        return self.a_over_lambda / self.a

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.frequency

    def additivity_error(self) -> float:
        """Relative mismatch of 1/Q_total against 1/Q_perp + 1/Q_par."""
        lhs = 1.0 / self.Q_total
        rhs = 1.0 / self.Q_perp + 1.0 / self.Q_par
        return abs(lhs - rhs) / rhs


def mode_cqed(mode: ResonantMode, atom_location=(0.0, 0.0, 0.0), gamma_perp: float = GAMMA_PERP_CS,
              wavelength: float = LAMBDA_CS_D2, q_choice: str = "perp", sqrt_eps: bool = False) -> CqedFigures:
    """Figures of merit for ``mode`` with an atom at a physical grid location."""
    if mode.snapshot is None:
        raise ValueError("mode has no field snapshot")
    Q = {"perp": mode.Q_perp, "total": mode.Q_total}[q_choice]
    ratio = field_ratio(mode.snapshot, atom_location, sqrt_eps=sqrt_eps)
    return cqed_figures(Q, mode.V_mode, ratio, gamma_perp, wavelength)
