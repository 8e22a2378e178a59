"""Probes recorded during time stepping.

Every monitor implements ``start(solver)`` (called once before stepping) and
``record(solver)`` (called after each step).  Times follow the leapfrog
staggering: after step n, E is at n*dt and H at (n - 1/2)*dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .solver import box_weights, axis_weights

_COMP = {"ex": (0, False), "ey": (1, False), "ez": (2, False),
         "hx": (0, True), "hy": (1, True), "hz": (2, True)}


class PointProbe:
    """Time series of one field component at a grid index (true index for H)."""

    def __init__(self, component: str, index, every: int = 1):
        self.component = component
        self.index = tuple(int(i) for i in index)
        self.every = int(every)
        self.steps = []
        self.values = []

    def start(self, solver):
        c, mag = _COMP[self.component]
        self._c, self._mag = c, mag

    def record(self, solver):
        st = solver.state
        if st.step % self.every:
            return
        i, j, k = self.index
        if self._mag:
            v = st.h[self._c][i + 1, j + 1, k + 1]
        else:
            v = st.e[self._c][i, j, k]
        self.steps.append(st.step)
        self.values.append(v)

    @property
    def signal(self) -> np.ndarray:
        return np.asarray(self.values)

    def times(self, dt) -> np.ndarray:
        off = -0.5 if self._mag else 0.0
        return (np.asarray(self.steps) + off) * dt


def _sl(axis, i):
    idx = [slice(None)] * 3
    idx[axis] = i
    return tuple(idx)


class FluxPlane:
    """Poynting flux through a node plane, sign +1 along +axis.

    ``position`` is the node index of the plane; ``bounds`` gives the node
    ranges ((lo, hi), (lo, hi)) along the two other axes in cyclic order.
    The flux after each step uses E averaged over the two neighbouring time
    levels and H averaged over the two neighbouring half planes, so that the
    sum over a closed surface matches the discrete energy change.
    """

    def __init__(self, axis: int, position: int, bounds, sign: float = 1.0, every: int = 1):
        self.axis = int(axis)
        self.position = int(position)
        self.bounds = bounds
        self.sign = float(sign)
        self.every = int(every)
        self.steps = []
        self.values = []

    def start(self, solver):
        a = self.axis
        b, c = (a + 1) % 3, (a + 2) % 3
        self._b, self._c = b, c
        shape = solver.shape
        (b0, b1), (c0, c1) = self.bounds
        # weights: component b is half-positioned along b, integer along c
        wb_half = axis_weights(shape[b], b0, b1, True)
        wb_int = axis_weights(shape[b], b0, b1, False)
        wc_half = axis_weights(shape[c], c0, c1, True)
        wc_int = axis_weights(shape[c], c0, c1, False)
        self._w1 = self._orient(wb_half, wc_int)     # E_b H_c
        self._w2 = self._orient(wb_int, wc_half)     # E_c H_b
        self._slices = self._make_slices(solver)
        self._prev = self._efields(solver)

    def _orient(self, wb, wc):
        # returns a 2D weight array with axes ordered as the remaining array axes (ascending)
        b, c = self._b, self._c
        w = wb[:, None] * wc[None, :]
        return w if b < c else w.T

    def _make_slices(self, solver):
        a = self.axis
        b, c = self._b, self._c
        shape = solver.shape
        k = self.position
        # E planes: index k along axis a; restrict extents to weight lengths
        e_b = [slice(None)] * 3
        e_c = [slice(None)] * 3
        e_b[a] = k
        e_c[a] = k
        e_b[b] = slice(0, shape[b])
        e_b[c] = slice(0, shape[c] + 1)
        e_c[b] = slice(0, shape[b] + 1)
        e_c[c] = slice(0, shape[c])
        # H planes: true indices k-1 and k along a (storage k and k+1)
        h_c = [slice(None)] * 3
        h_b = [slice(None)] * 3
        # H_c is half along b, integer along c -> storage offset 1; H_b half along c, integer along b
        h_c[b] = slice(1, shape[b] + 1)
        h_c[c] = slice(1, shape[c] + 1)
        h_b[b] = slice(1, shape[b] + 1)
        h_b[c] = slice(1, shape[c] + 1)
        return tuple(e_b), tuple(e_c), h_c, h_b

    def _efields(self, solver):
        e_b, e_c, _, _ = self._slices
        st = solver.state
        return st.e[self._b][e_b].copy(), st.e[self._c][e_c].copy()

    def _hplanes(self, solver, comp, base):
        st = solver.state
        a = self.axis
        lo = list(base)
        hi = list(base)
        lo[a] = self.position
        hi[a] = self.position + 1
        arr = st.h[comp]
        return 0.5 * (arr[tuple(lo)] + arr[tuple(hi)])

    def flux_now(self, solver, prev=None) -> float:
        eb_new, ec_new = self._efields(solver)
        eb_old, ec_old = prev if prev is not None else self._prev
        eb = 0.5 * (eb_new + eb_old)
        ec = 0.5 * (ec_new + ec_old)
        _, _, h_c_base, h_b_base = self._slices
        hc = self._hplanes(solver, self._c, h_c_base)
        hb = self._hplanes(solver, self._b, h_b_base)
        # E arrays carry one extra (ghost) sample along integer axes; _mul trims it
        t1 = _mul(eb, hc, self._w1)
        t2 = _mul(ec, hb, self._w2)
        return self.sign * (t1 - t2)

    def record(self, solver):
        eb_new, ec_new = self._efields(solver)
        if solver.state.step % self.every == 0:
            self.steps.append(solver.state.step)
            self.values.append(self.flux_now(solver))
        self._prev = (eb_new, ec_new)

    @property
    def series(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _mul(e, h, w):
    n0 = min(e.shape[0], h.shape[0], w.shape[0])
    n1 = min(e.shape[1], h.shape[1], w.shape[1])
    prod = e[:n0, :n1] * np.conj(h[:n0, :n1])
    return float(np.sum(w[:n0, :n1] * prod.real))


@dataclass
class FluxBox:
    """Six flux planes bounding the node box ((x0, x1), (y0, y1), (z0, z1)).

    Faces on mirror planes can be dropped with ``skip`` (e.g. ``{"z-"}``).
    Fluxes are outward.
    """

    box: tuple
    skip: set = field(default_factory=set)
    every: int = 1

    def __post_init__(self):
        self.planes = {}
        for axis, name in enumerate("xyz"):
            b, c = (axis + 1) % 3, (axis + 2) % 3
            bounds = (self.box[b], self.box[c])
            for side, pos, sign in (("-", self.box[axis][0], -1.0), ("+", self.box[axis][1], 1.0)):
                key = name + side
                if key in self.skip:
                    continue
                self.planes[key] = FluxPlane(axis, pos, bounds, sign, every=self.every)

    def start(self, solver):
        for p in self.planes.values():
            p.start(solver)

    def record(self, solver):
        for p in self.planes.values():
            p.record(solver)

    def total(self) -> np.ndarray:
        return sum(p.series for p in self.planes.values())

    def group(self, keys) -> np.ndarray:
        return sum(self.planes[k].series for k in keys if k in self.planes)


class EnergyMonitor:
    """Stored energy inside a node box, recorded every ``every`` steps."""

    def __init__(self, box=None, every: int = 1):
        self.box = box
        self.every = int(every)
        self.steps = []
        self.values = []

    def start(self, solver):
        pass

    def record(self, solver):
        if solver.state.step % self.every == 0:
            self.steps.append(solver.state.step)
            self.values.append(solver.energy(self.box))

    @property
    def series(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class PlaneDFT:
    """Running DFT of the tangential fields on a z node plane at given frequencies.

    E_x, E_y are taken on the plane; H_x, H_y are averaged over the two
    half planes around it.  Phasors follow X = (2/T) sum f(t) e^{-i w t} dt,
    so a pure tone A cos(w t + p) yields A e^{ip} once normalized by
    :meth:`phasors`.
    """

    def __init__(self, k: int, frequencies: Sequence[float], start_step: int = 0, every: int = 1,
                 xy_slices=(slice(None), slice(None))):
        self.k = int(k)
        self.frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
        self.start_step = int(start_step)
        self.every = int(every)
        self.xy = xy_slices
        self.count = 0
        self.t_first = None
        self.t_last = None

    def start(self, solver):
        nx, ny, _ = solver.shape
        nf = self.frequencies.size
        sx, sy = self.xy
        shp = np.zeros((nx, ny))[sx, sy].shape
        self.acc = {name: np.zeros((nf,) + shp, dtype=complex) for name in ("ex", "ey", "hx", "hy")}
        self.dt = solver.dt

    def record(self, solver):
        st = solver.state
        if st.step < self.start_step or (st.step - self.start_step) % self.every:
            return
        nx, ny, _ = solver.shape
        sx, sy = self.xy
        k = self.k
        t_e = st.step * self.dt
        t_h = (st.step - 0.5) * self.dt
        ex = st.ex[:nx, :ny, k][sx, sy]
        ey = st.ey[:nx, :ny, k][sx, sy]
        hx = 0.5 * (st.hx[1:, 1:, k] + st.hx[1:, 1:, k + 1])[sx, sy]
        hy = 0.5 * (st.hy[1:, 1:, k] + st.hy[1:, 1:, k + 1])[sx, sy]
        w = 2 * math.pi * self.frequencies
        pe = np.exp(-1j * w * t_e) * self.every * self.dt
        ph = np.exp(-1j * w * t_h) * self.every * self.dt
        for n in range(w.size):
            self.acc["ex"][n] += ex * pe[n]
            self.acc["ey"][n] += ey * pe[n]
            self.acc["hx"][n] += hx * ph[n]
            self.acc["hy"][n] += hy * ph[n]
        self.count += 1
        if self.t_first is None:
            self.t_first = t_e
        self.t_last = t_e

    def duration(self) -> float:
        return self.count * self.every * self.dt

    def phasors(self, n: int = 0) -> dict:
        T = self.duration()
        return {name: 2.0 * acc[n] / T for name, acc in self.acc.items()}


class FieldDFT:
    """Running DFT of all three E components over the whole grid at one frequency."""

    def __init__(self, frequency: float, start_step: int = 0, every: int = 1, region=None):
        self.frequency = float(frequency)
        self.start_step = int(start_step)
        self.every = int(every)
        self.region = region
        self.count = 0

    def start(self, solver):
        nx, ny, nz = solver.shape
        if self.region is None:
            self.region = ((0, nx), (0, ny), (0, nz))
        shp = tuple(hi - lo for lo, hi in self.region)
        self.acc = [np.zeros(shp, dtype=np.complex128) for _ in range(3)]
        self.dt = solver.dt

    def record(self, solver):
        st = solver.state
        if st.step < self.start_step or (st.step - self.start_step) % self.every:
            return
        (x0, x1), (y0, y1), (z0, z1) = self.region
        ph = complex(np.exp(-2j * math.pi * self.frequency * st.step * self.dt)) * self.every * self.dt
        for c in range(3):
            kernels.accumulate_phasor(self.acc[c], st.e[c][x0:x1, y0:y1, z0:z1], ph)
        self.count += 1

    def duration(self) -> float:
        return self.count * self.every * self.dt

    def phasors(self) -> tuple:
        T = self.duration()
        return tuple(2.0 * a / T for a in self.acc)
