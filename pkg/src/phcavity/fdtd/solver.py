"""Leapfrog time stepping on the staggered grid.

The state at step ``n`` holds E at time ``n*dt`` and H at ``(n - 1/2)*dt``.
One call to :meth:`Solver.step` produces H at ``(n + 1/2)*dt`` and E at
``(n + 1)*dt``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .boundaries import (Absorbing, BlochPeriodic, BoundarySpec, Conductor, EvenMirror, OddMirror,
                         pml_axis)

log = logging.getLogger(__name__)

E_NAMES = ("ex", "ey", "ez")
H_NAMES = ("hx", "hy", "hz")


class InstabilityError(RuntimeError):
    """Field growth or non-finite values detected during time stepping."""

    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


@dataclass
class FieldState:
    """E and H arrays with one ghost layer per axis (see :mod:`.kernels`)."""

    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    step: int
    dt: float

    @classmethod
    def zeros(cls, shape, dt, dtype=np.float64):
        full = tuple(n + 1 for n in shape)
        arrs = [np.zeros(full, dtype=dtype) for _ in range(6)]
        return cls(*arrs, step=0, dt=dt)

    @property
    def shape(self) -> tuple:
        return tuple(n - 1 for n in self.ex.shape)

    @property
    def e(self) -> tuple:
        return (self.ex, self.ey, self.ez)

    @property
    def h(self) -> tuple:
        return (self.hx, self.hy, self.hz)

    @property
    def time(self) -> float:
        return self.step * self.dt

    def e_view(self, c: int) -> np.ndarray:
        """Real (non-ghost) samples of E component ``c``."""
        nx, ny, nz = self.shape
        return self.e[c][:nx, :ny, :nz]

    def h_view(self, c: int) -> np.ndarray:
        """Real (non-ghost) samples of H component ``c`` in true-index order."""
        return self.h[c][1:, 1:, 1:]

    def copy(self) -> "FieldState":
        return FieldState(*(a.copy() for a in self.e + self.h), step=self.step, dt=self.dt)

    def max_abs(self) -> float:
        return kernels.max_abs(self.e + self.h)


class Solver:
    """Owns a field state, material coefficients, boundaries and sources.

    ``grid`` is a :class:`~phcavity.geometry.PermittivityGrid` (or any object
    with an ``eps`` node array); ``courant`` is dt for unit cells.
    """

    def __init__(self, grid, bounds: BoundarySpec, courant: float = 0.5, dtype=np.float64,
                 sources: Sequence = (), check_every: int = 100, growth_limit: float = 1e6):
        if not 0.0 < courant < 1.0 / math.sqrt(3.0):
            raise ValueError(f"Courant number must lie in (0, 1/sqrt(3)), got {courant}")
        self.grid = grid
        self.bounds = bounds
        self.dt = float(courant)
        self.shape = tuple(grid.eps.shape)
        if bounds.is_complex:
            dtype = np.complex64 if np.dtype(dtype) in (np.float32, np.complex64) else np.complex128
        self.dtype = np.dtype(dtype)
        periodic = tuple(isinstance(bounds.faces(a)[0], BlochPeriodic) for a in range(3))
        real = np.float32 if self.dtype in (np.float32, np.complex64) else np.float64
        self.real_dtype = np.dtype(real)
        self.state = FieldState.zeros(self.shape, self.dt, self.dtype)
        self.eps_comp = tuple(np.ascontiguousarray(e, dtype=real) for e in grid.component_eps(periodic))
        self.coef = tuple(np.ascontiguousarray(self.dt / e, dtype=real) for e in self.eps_comp)
        self._pml = [pml_axis(n, bounds.faces(a), self.dt) for a, n in enumerate(self.shape)]
        self._psi = [self._alloc_psi(a) for a in range(3)]
        self.sources = list(sources)
        for s in self.sources:
            s.attach(self)
        self.check_every = int(check_every)
        self.growth_limit = float(growth_limit)
        self.reference_amplitude = 0.0
        self._update_reference()

    # -- setup ---------------------------------------------------------------

    def _alloc_psi(self, axis):
        pa = self._pml[axis]
        if pa is None:
            return None
        out = {}
        for kind, idx in (("h", pa.idx_h), ("e", pa.idx_e)):
            shp = list(self.shape)
            shp[axis] = len(idx)
            out[kind] = (np.zeros(shp, dtype=self.dtype), np.zeros(shp, dtype=self.dtype))
        return out

    def _update_reference(self):
        amp = self.state.max_abs()
        for s in self.sources:
            amp = max(amp, s.peak_field(self))
        self.reference_amplitude = max(self.reference_amplitude, amp)

    def add_source(self, source):
        source.attach(self)
        self.sources.append(source)
        self._update_reference()

    def set_state(self, state: FieldState):
        if state.shape != self.shape:
            raise ValueError("state shape does not match the grid")
        self.state = state
        self._update_reference()

    def reset_pml(self):
        for a in range(3):
            if self._psi[a] is not None:
                for pair in self._psi[a].values():
                    for arr in pair:
                        arr[...] = 0

    # -- ghosts and walls ----------------------------------------------------

    def fill_e_ghosts(self):
        st = self.state
        for axis in range(3):
            lo, hi = self.bounds.faces(axis)
            if isinstance(hi, BlochPeriodic):
                n = self.shape[axis]
                ph = hi.phase if self.dtype.kind == "c" else hi.phase.real
                for arr in st.e:
                    src = _take(arr, axis, 0)
                    _put(arr, axis, n, src * ph if ph != 1.0 else src)

    def fill_h_ghosts(self):
        st = self.state
        for axis in range(3):
            lo, hi = self.bounds.faces(axis)
            if isinstance(lo, BlochPeriodic):
                n = self.shape[axis]
                ph = np.conj(lo.phase) if self.dtype.kind == "c" else lo.phase.real
                for arr in st.h:
                    src = _take(arr, axis, n)
                    _put(arr, axis, 0, src * ph if ph != 1.0 else src)
            elif isinstance(lo, EvenMirror):
                for c in range(3):
                    if c != axis:
                        arr = st.h[c]
                        _put(arr, axis, 0, -_take(arr, axis, 1))

    def apply_walls(self):
        """Zero tangential E on low faces that are electric walls or PML backings."""
        st = self.state
        for axis in range(3):
            lo, _ = self.bounds.faces(axis)
            if isinstance(lo, (OddMirror, Conductor, Absorbing)):
                for c in range(3):
                    if c != axis:
                        _put(st.e[c], axis, 0, 0.0)

    # -- stepping ------------------------------------------------------------

    def step(self):
        st = self.state
        nx, ny, nz = self.shape
        dt = self.dt
        self.fill_e_ghosts()
        kernels.update_h(st.ex, st.ey, st.ez, st.hx, st.hy, st.hz, dt, nx, ny, nz)
        self._pml_h()
        self.fill_h_ghosts()
        cx, cy, cz = self.coef
        kernels.update_e(st.ex, st.ey, st.ez, st.hx, st.hy, st.hz, cx, cy, cz, nx, ny, nz)
        self._pml_e()
        t_half = (st.step + 0.5) * dt
        for s in self.sources:
            s.inject(self, t_half)
        self.apply_walls()
        st.step += 1

    def _pml_h(self):
        st = self.state
        nx, ny, nz = self.shape
        dt = self.dt
        for axis in range(3):
            pa = self._pml[axis]
            if pa is None:
                continue
            p1, p2 = self._psi[axis]["h"]
            if axis == 0:
                kernels.pml_h_x(st.ey, st.ez, st.hy, st.hz, p1, p2, pa.idx_h, pa.b_h, pa.c_h, dt, ny, nz)
            elif axis == 1:
                kernels.pml_h_y(st.ex, st.ez, st.hx, st.hz, p1, p2, pa.idx_h, pa.b_h, pa.c_h, dt, nx, nz)
            else:
                kernels.pml_h_z(st.ex, st.ey, st.hx, st.hy, p1, p2, pa.idx_h, pa.b_h, pa.c_h, dt, nx, ny)

    def _pml_e(self):
        st = self.state
        nx, ny, nz = self.shape
        cx, cy, cz = self.coef
        for axis in range(3):
            pa = self._pml[axis]
            if pa is None:
                continue
            p1, p2 = self._psi[axis]["e"]
            if axis == 0:
                kernels.pml_e_x(st.ey, st.ez, st.hy, st.hz, p1, p2, pa.idx_e, pa.b_e, pa.c_e, cy, cz, ny, nz)
            elif axis == 1:
                kernels.pml_e_y(st.ex, st.ez, st.hx, st.hz, p1, p2, pa.idx_e, pa.b_e, pa.c_e, cx, cz, nx, nz)
            else:
                kernels.pml_e_z(st.ex, st.ey, st.hx, st.hy, p1, p2, pa.idx_e, pa.b_e, pa.c_e, cx, cy, nx, ny)

    def check(self):
        amp = self.state.max_abs()
        if not math.isfinite(amp):
            raise InstabilityError("non-finite field values", self.state.step)
        ref = self.reference_amplitude
        if ref > 0 and amp > self.growth_limit * ref:
            raise InstabilityError(f"field amplitude {amp:.3g} exceeds {self.growth_limit:g} x reference {ref:.3g}",
                                   self.state.step)
        return amp

    def run(self, steps: int, monitors: Sequence = ()):
        """Advance ``steps`` steps, calling ``monitor.record(solver)`` after each."""
        for m in monitors:
            m.start(self)
        for _ in range(int(steps)):
            self.step()
            for m in monitors:
                m.record(self)
            if self.check_every and self.state.step % self.check_every == 0:
                self.check()
        return monitors

    # -- energy ----------------------------------------------------------------

    def electric_energy(self, box=None) -> float:
        """0.5 * sum eps |E|^2 over ``box`` (trapezoid weights on node planes)."""
        wts = box_weights(self.shape, box)
        total = 0.0
        for c in range(3):
            wx, wy, wz = wts[c]
            total += kernels.weighted_square_sum(self.state.e[c], self.eps_comp[c], wx, wy, wz, 0, 0, 0)
        return 0.5 * total

    def magnetic_energy(self, box=None) -> float:
        """0.5 * sum |H|^2 at the stored half step."""
        wts = box_weights(self.shape, box, magnetic=True)
        empty = np.zeros((0, 0, 0), dtype=self.real_dtype)
        total = 0.0
        for c in range(3):
            wx, wy, wz = wts[c]
            total += kernels.weighted_square_sum(self.state.h[c], empty, wx, wy, wz, 1, 1, 1)
        return 0.5 * total

    def energy(self, box=None) -> float:
        return self.electric_energy(box) + self.magnetic_energy(box)

    def conserved_energy(self) -> float:
        """Exactly conserved discrete energy for lossless, non-absorbing runs:
        0.5 * sum (eps E^n . E^n + H^{n-1/2} . H^{n+1/2})."""
        st = self.state
        nx, ny, nz = self.shape
        fwd = st.copy()
        saved = self.state
        self.state = fwd
        try:
            self.fill_e_ghosts()
            kernels.update_h(fwd.ex, fwd.ey, fwd.ez, fwd.hx, fwd.hy, fwd.hz, self.dt, nx, ny, nz)
            self.fill_h_ghosts()
        finally:
            self.state = saved
        wts = box_weights(self.shape, None, magnetic=True)
        total = 2.0 * self.electric_energy()
        for c in range(3):
            wx, wy, wz = wts[c]
            sl = (slice(1, 1 + len(wx)), slice(1, 1 + len(wy)), slice(1, 1 + len(wz)))
            w = wx[:, None, None] * wy[None, :, None] * wz[None, None, :]
            total += float(np.real(np.sum(w * st.h[c][sl] * np.conj(fwd.h[c][sl]))))
        return 0.5 * total


def _take(arr, axis, i):
    idx = [slice(None)] * 3
    idx[axis] = i
    return arr[tuple(idx)]


def _put(arr, axis, i, value):
    idx = [slice(None)] * 3
    idx[axis] = i
    arr[tuple(idx)] = value


def axis_weights(n: int, lo: int, hi: int, half: bool) -> np.ndarray:
    """Quadrature weights along one axis for the region [lo, hi] in node units.

    Integer-position samples get trapezoid weights (1/2 at both ends); samples
    at i + 1/2 get weight 1 for lo <= i < hi.
    """
    w = np.zeros(n + 1 if not half else n)
    if half:
        w[lo:hi] = 1.0
    else:
        w[lo:hi + 1] = 1.0
        w[lo] = 0.5
        w[hi] = 0.5
    return w


def box_weights(shape, box=None, magnetic=False):
    """Per-component weight vectors (wx, wy, wz) for a box of node indices.

    ``box`` is ((x0, x1), (y0, y1), (z0, z1)); ``None`` means the full grid.
    Component c of E is at a half position along axis c; component c of H is
    at half positions along the two other axes.
    """
    if box is None:
        box = tuple((0, n) for n in shape)
    out = []
    for c in range(3):
        ws = []
        for axis in range(3):
            half = (axis == c) != magnetic
            n = shape[axis]
            lo, hi = box[axis]
            ws.append(axis_weights(n, lo, hi, half)[: n if half else n + 1])
        if magnetic:
            ws = [w[: shape[a]] for a, w in enumerate(ws)]
        out.append(tuple(np.ascontiguousarray(w) for w in ws))
    return out
