"""Excitations: symmetry-adapted initial fields and Gaussian-pulse point dipoles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels

PARITIES = ("even", "odd")
_COMP = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


class SourceError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianPulse:
    """exp(-(t - t0)^2 / 2 sigma_t^2) * sin(2 pi f0 (t - t0)) with sigma_t = 1 / (2 pi fwidth).

    ``frequency`` and ``fwidth`` are in cycles per time unit (a/lambda divided
    by a for a lattice constant of a cells).
    """

    frequency: float
    fwidth: float
    delay: Optional[float] = None
    cutoff: float = 5.0

    @property
    def sigma_t(self) -> float:
        return 1.0 / (2.0 * math.pi * self.fwidth)

    @property
    def t0(self) -> float:
        return self.delay if self.delay is not None else self.cutoff * self.sigma_t

    @property
    def end_time(self) -> float:
        return self.t0 + self.cutoff * self.sigma_t

    def __call__(self, t):
        s = (t - self.t0) / self.sigma_t
        return np.exp(-0.5 * s * s) * np.sin(2.0 * math.pi * self.frequency * (t - self.t0))


@dataclass
class PointDipole:
    """Current source on a single E sample.

    ``location`` is the grid index (i, j, k) of the E sample of ``component``;
    ``amplitude`` may be complex (for phased arrays on complex Bloch grids).
    """

    location: tuple
    component: object
    waveform: GaussianPulse
    amplitude: complex = 1.0

    def attach(self, solver):
        c = _COMP.get(self.component)
        if c is None:
            raise SourceError(f"unknown polarization {self.component!r}")
        self._c = c
        for axis, (i, n) in enumerate(zip(self.location, solver.shape)):
            lo, hi = solver.bounds.pml_thickness(axis)
            if not (lo <= i < n - hi):
                raise SourceError(f"dipole location {self.location} is outside the non-absorbing region")
        if solver.dtype.kind != "c" and complex(self.amplitude).imag != 0.0:
            raise SourceError("complex dipole amplitude requires a complex (Bloch) grid")
        self._coef = float(solver.coef[c][tuple(self.location)])
        amp = complex(self.amplitude)
        self._amp = amp if solver.dtype.kind == "c" else amp.real

    def peak_field(self, solver) -> float:
        return abs(complex(self.amplitude)) * float(solver.coef[_COMP[self.component]][tuple(self.location)])

    def inject(self, solver, t):
        if t > self.waveform.end_time:
            return
        arr = solver.state.e[self._c]
        arr[tuple(self.location)] -= self._coef * self._amp * self.waveform(t)

    def active(self, t) -> bool:
        return t <= self.waveform.end_time


def component_positions(solver, c: int, magnetic: bool = False):
    """Physical coordinates (x, y, z) of the real samples of a component.

    Returns three broadcastable 1D-shaped arrays.
    """
    center = solver.grid.center
    out = []
    for axis, n in enumerate(solver.shape):
        half = (axis == c) != magnetic
        pos = np.arange(n, dtype=float) - center[axis] + (0.5 if half else 0.0)
        shp = [1, 1, 1]
        shp[axis] = n
        out.append(pos.reshape(shp))
    return out


@dataclass(frozen=True)
class InitialField:
    """Divergence-free magnetic seed H = -curl A around a point.

    ``parity`` gives the vector-mirror eigenvalue of the excited modes under
    x -> -x and y -> -y ("even" or "odd"); ``None`` for either entry breaks
    that symmetry (the seed is then displaced by ``offset``).  The seed is
    even in z.  ``width`` and ``z_width`` are Gaussian standard deviations in
    cells; a small ``z_width`` confines the seed to the z = 0 plane.
    """

    parity: tuple = ("odd", "even")
    width: float = 4.0
    z_width: float = 4.0
    center: tuple = (0.0, 0.0)
    offset: tuple = (0.0, 0.0)
    amplitude: float = 1.0

    def vector_potential(self, solver):
        px, py = self.parity
        for p in (px, py):
            if p not in PARITIES + (None,):
                raise SourceError(f"parity must be 'even', 'odd' or None, got {p!r}")
        cx = self.center[0] + (self.offset[0] if px is None else 0.0)
        cy = self.center[1] + (self.offset[1] if py is None else 0.0)

        def gauss(c):
            x, y, z = component_positions(solver, c)
            x = x - cx
            y = y - cy
            g = self.amplitude * np.exp(-(x * x + y * y) / (2 * self.width ** 2)) * np.exp(-z * z / (2 * self.z_width ** 2))
            return x, y, g

        zero = np.zeros(solver.shape)
        if (px, py) == ("odd", "even"):
            return (gauss(0)[2] + zero, zero, zero)
        if (px, py) == ("even", "odd"):
            return (zero, gauss(1)[2] + zero, zero)
        if (px, py) == ("odd", "odd"):
            _, y, g = gauss(0)
            return (y * g + zero, zero, zero)
        if (px, py) == ("even", "even"):
            x, _, g = gauss(0)
            return (x * g + zero, zero, zero)
        # at least one symmetry broken: mix both dipole orientations
        return (gauss(0)[2] + zero, 0.7 * gauss(1)[2] + zero, zero)

    def attach(self, solver):
        st = solver.state
        nx, ny, nz = solver.shape
        a = self.vector_potential(solver)
        saved = tuple(e.copy() for e in st.e)
        for c in range(3):
            st.e[c][...] = 0
            st.e[c][:nx, :ny, :nz] = a[c]
        solver.apply_walls()
        tmp = [np.zeros_like(h) for h in st.h]
        kernels.update_h(st.ex, st.ey, st.ez, tmp[0], tmp[1], tmp[2], 1.0, nx, ny, nz)
        for c in range(3):
            st.e[c][...] = saved[c]
            st.h[c][...] += tmp[c]

    def peak_field(self, solver) -> float:
        return 0.0

    def inject(self, solver, t):
        return None


def excite_dipole_mode(parity_x: str, parity_y: str, width: float = 4.0, z_width: float = 4.0,
                       offset=(0.0, 0.0)) -> InitialField:
    """Initial field exciting only modes with the given mirror parities.

    ``("odd", "even")`` selects x-dipole modes (E_x even in x and y at the
    centre), ``("even", "odd")`` y-dipole modes.
    """
    return InitialField(parity=(parity_x, parity_y), width=width, z_width=z_width, offset=offset)


def dipole_parity(kind: str) -> tuple:
    """Mirror parities (x, y) of the x- or y-dipole mode family."""
    return {"x": ("odd", "even"), "y": ("even", "odd")}[kind]


def mirror_pair(solver, component: int, waveform: GaussianPulse, amplitude: float = 1.0,
                at=(0.0, 0.0), parity=("odd", "even")):
    """Point dipoles that respect the requested mirror parities around ``at``.

    On mirrored (half) grids the image sources are implied by the boundary;
    on full grids the partners are placed explicitly with the parity sign.
    Returns a list of :class:`PointDipole`.
    """
    center = solver.grid.center
    half = [axis == component for axis in range(2)]
    mirrored = [solver.bounds.faces(a)[0].__class__.__name__ in ("EvenMirror", "OddMirror") for a in range(2)]
    i0 = []
    for axis in range(2):
        pos = at[axis] + center[axis] - (0.5 if half[axis] else 0.0)
        i0.append(max(int(math.floor(pos + 1e-9)), 0) if mirrored[axis] else int(math.floor(pos + 1e-9)))
    sites = [((i0[0], i0[1]), 1.0)]
    for axis in range(2):
        if mirrored[axis] or parity[axis] is None or abs(at[axis]) > 1e-9:
            continue
        # reflected index: integer samples i <-> 2c - i, half samples i <-> 2c - 1 - i
        sign = _scalar_sign(component, axis, parity[axis])
        new = []
        for (ij, s) in sites:
            ref = list(ij)
            c = center[axis]
            ref[axis] = (2 * c - 1 - ij[axis]) if half[axis] else (2 * c - ij[axis])
            if tuple(ref) != tuple(ij):
                new.append((tuple(ref), s * sign))
        sites += new
    k = solver.grid.center[2]
    return [PointDipole((ij[0], ij[1], k), component, waveform, amplitude * s) for ij, s in sites]


def _scalar_sign(component: int, axis: int, parity: str) -> float:
    """Parity of the scalar field component under reflection of ``axis``."""
    sigma = 1.0 if parity == "even" else -1.0
    return -sigma if component == axis else sigma
