"""Per-face boundary models and graded absorbing-layer coefficients."""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

AXES = "xyz"


@dataclass(frozen=True)
class Absorbing:
    """Convolutional PML backed by a conducting wall.

    Conductivity grows as sigma_max * depth**order; ``sigma_max`` defaults to
    the usual optimum 0.8 (order + 1) (cell = 1, eta = 1).
    """

    thickness: int = 10
    order: int = 4
    sigma_max: Optional[float] = None
    alpha: float = 0.0


@dataclass(frozen=True)
class EvenMirror:
    """Symmetry plane with tangential E even (magnetic wall).  Low faces only."""


@dataclass(frozen=True)
class OddMirror:
    """Symmetry plane with tangential E odd, i.e. zero (electric wall)."""


@dataclass(frozen=True)
class Conductor:
    """Perfect electric wall (same discretization as :class:`OddMirror`)."""


@dataclass(frozen=True)
class BlochPeriodic:
    """Periodic face pair with fields at the far side = phase * near side."""

    phase: complex = 1.0 + 0.0j


Face = Union[Absorbing, EvenMirror, OddMirror, Conductor, BlochPeriodic]


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary model for each of the six faces, as (low, high) per axis."""

    x: tuple = (Absorbing(), Absorbing())
    y: tuple = (Absorbing(), Absorbing())
    z: tuple = (Absorbing(), Absorbing())

    def __post_init__(self):
        for ax in AXES:
            lo, hi = getattr(self, ax)
            if isinstance(hi, EvenMirror):
                raise BoundaryError(f"even mirror is supported on the low {ax} face only")
            if isinstance(lo, BlochPeriodic) or isinstance(hi, BlochPeriodic):
                if not (isinstance(lo, BlochPeriodic) and isinstance(hi, BlochPeriodic)):
                    raise BoundaryError(f"Bloch boundary on {ax} must be set on both faces")
                if ax == "z":
                    raise BoundaryError("Bloch boundaries are allowed on x/y face pairs only")
                if abs(lo.phase - hi.phase) > 1e-12:
                    raise BoundaryError(f"Bloch phases on the {ax} faces do not match")
                if abs(abs(lo.phase) - 1.0) > 1e-9:
                    raise BoundaryError("Bloch phase must have unit modulus")

    def faces(self, axis: int) -> tuple:
        return getattr(self, AXES[axis])

    @property
    def is_complex(self) -> bool:
        return any(isinstance(self.faces(a)[0], BlochPeriodic) and self.faces(a)[0].phase.imag != 0.0
                   for a in range(3))

    def pml_thickness(self, axis: int) -> tuple:
        return tuple(f.thickness if isinstance(f, Absorbing) else 0 for f in self.faces(axis))

    @classmethod
    def cavity(cls, thickness: int = 10, mirrors=(False, False, True), parity=(None, None, "even")):
        """Absorbing layers on every open face, symmetry planes on the low faces of mirrored axes.

        ``parity`` entries are the vector-mirror eigenvalues (``"even"`` keeps
        tangential E on the plane, ``"odd"`` forces it to zero).
        """
        faces = []
        for m, par in zip(mirrors, parity):
            hi = Absorbing(thickness)
            if m:
                lo = EvenMirror() if par == "even" else OddMirror()
            else:
                lo = Absorbing(thickness)
            faces.append((lo, hi))
        return cls(*faces)

    @classmethod
    def bloch(cls, k, period, thickness: int = 10, z_mirror: bool = True):
        """Bloch-periodic x/y with wavevector ``k`` (rad per cell) over ``period`` cells."""
        px = BlochPeriodic(cmath.exp(1j * k[0] * period[0]))
        py = BlochPeriodic(cmath.exp(1j * k[1] * period[1]))
        z = (EvenMirror() if z_mirror else Absorbing(thickness), Absorbing(thickness))
        return cls((px, px), (py, py), z)


def bloch_phase(face) -> complex:
    return face.phase if isinstance(face, BlochPeriodic) else 0.0


@dataclass
class PmlAxis:
    """CPML data along one axis: layer indices and recursive coefficients.

    ``idx_e``/``b_e``/``c_e`` correspond to integer positions (used when
    correcting E updates, whose derivatives of H sit at integer nodes);
    ``idx_h``/``b_h``/``c_h`` to half-integer positions.
    """

    idx_e: np.ndarray
    b_e: np.ndarray
    c_e: np.ndarray
    idx_h: np.ndarray
    b_h: np.ndarray
    c_h: np.ndarray
    extras: dict = field(default_factory=dict)


def _profile(pos: np.ndarray, n: int, lo: int, hi: int, face_lo: Face, face_hi: Face):
    sigma = np.zeros_like(pos)
    alpha = np.zeros_like(pos)
    for face, L, is_low in ((face_lo, lo, True), (face_hi, hi, False)):
        if L <= 0:
            continue
        smax = face.sigma_max if face.sigma_max is not None else 0.8 * (face.order + 1)
        depth = (L - pos) / L if is_low else (pos - (n - L)) / L
        inside = depth > 0
        d = np.clip(depth, 0.0, 1.0)
        sigma = np.where(inside, smax * d ** face.order, sigma)
        alpha = np.where(inside, face.alpha * (1.0 - d), alpha)
    return sigma, alpha


def pml_axis(n: int, faces: tuple, dt: float) -> Optional[PmlAxis]:
    """Coefficients for an axis of ``n`` cells, or None if no absorbing face."""
    lo = faces[0].thickness if isinstance(faces[0], Absorbing) else 0
    hi = faces[1].thickness if isinstance(faces[1], Absorbing) else 0
    if lo == 0 and hi == 0:
        return None
    if lo + hi >= n:
        raise BoundaryError(f"absorbing layers ({lo}+{hi}) do not fit in {n} cells")
    out = {}
    for kind, offset in (("e", 0.0), ("h", 0.5)):
        pos = np.arange(n + 1, dtype=float) + offset
        sigma, alpha = _profile(pos, n, lo, hi, faces[0], faces[1])
        b = np.exp(-(sigma + alpha) * dt)
        denom = sigma + alpha
        c = np.where(denom > 0, sigma / np.where(denom > 0, denom, 1.0) * (b - 1.0), 0.0)
        idx = np.nonzero(sigma > 0)[0]
        idx = idx[idx < n].astype(np.int64)
        out[kind] = (idx, b, c)
    return PmlAxis(out["e"][0], out["e"][1], out["e"][2], out["h"][0], out["h"][1], out["h"][2])
