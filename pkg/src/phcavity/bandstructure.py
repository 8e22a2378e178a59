"""TE-like guided bands of the unperturbed perforated slab.

Each k point is an independent time-domain run on a rectangular a x a*sqrt(3)
supercell holding two holes, with Bloch-periodic x/y faces, an even mirror at
the slab mid-plane and an absorber above.  The supercell folds the hexagonal
Brillouin zone in two; sources and probes come in pairs related by the
primitive translation t = (a/2, a*sqrt(3)/2) with relative phase e^{ik.t},
which excites and detects only the unfolded bands.

Wave vectors are given in units of 2 pi / a; frequencies as a/lambda.
"""

from __future__ import annotations

import cmath
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .analysis.resonances import IllConditionedFit, NoPeakFound, extract_resonances
from .fdtd.boundaries import BoundarySpec
from .fdtd.monitors import PointProbe
from .fdtd.solver import Solver
from .fdtd.sources import GaussianPulse, PointDipole
from .geometry import SQRT3, Hole, HoleSet, PermittivityGrid, PhotonicCrystalSpec, slab_plane_eps, slab_profile

log = logging.getLogger(__name__)


#: High-symmetry points in units of 2 pi / a (rows of holes along x).
GAMMA = (0.0, 0.0)
X_POINT = (0.0, 1.0 / SQRT3)
J_POINT = (2.0 / 3.0, 0.0)


class BandError(ValueError):
    pass


@dataclass
class BandDiagram:
    """Guided frequencies along a k path.

    ``k`` is an (N, 2) array in units of 2 pi / a, ``s`` the path arclength in
    the same units, ``bands[i]`` the ascending a/lambda values found at k[i]
    below the light line, ``light_line[i]`` = |k| a / 2 pi and ``flagged[i]``
    marks points where adjacent peaks are closer than the run can resolve.
    """

    k: np.ndarray
    s: np.ndarray
    bands: List[List[float]]
    light_line: np.ndarray
    flagged: List[bool]
    vertices: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def band(self, index: int) -> np.ndarray:
        """a/lambda of band ``index`` at each k (nan where not found)."""
        return np.array([b[index] if len(b) > index else np.nan for b in self.bands])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k_arclength", "band_index", "a_over_lambda", "below_light_line"])
        for s, freqs, ll in zip(self.s, self.bands, self.light_line):
            for i, f in enumerate(freqs):
                w.writerow([f"{s:.6f}", i, f"{f:.6f}", int(f < ll or f == 0.0)])
        gap = gap_edges(self)
        if gap.empty:
            buf.write("# gap: none\n")
        else:
            buf.write(f"# gap: {gap.lower:.6f} {gap.upper:.6f}\n")
        buf.write("# reported modes are guided: below the light line, tail decaying across the air cladding\n")
        return buf.getvalue()


class GapEdges(NamedTuple):
    lower: float
    upper: float

    @property
    def empty(self) -> bool:
        return not (self.upper > self.lower)

    @property
    def width(self) -> float:
        return max(0.0, self.upper - self.lower)

    def contains(self, value: float) -> bool:
        return self.lower < value < self.upper


def gap_edges(diagram: BandDiagram) -> GapEdges:
    """Top of the first (dielectric) band and bottom of the second over the path."""
    b1 = diagram.band(0)
    b2 = diagram.band(1)
    if np.all(np.isnan(b1)) or np.all(np.isnan(b2)):
        return GapEdges(math.nan, math.nan)
    return GapEdges(float(np.nanmax(b1)), float(np.nanmin(b2)))


# --- k path ---------------------------------------------------------------------

def k_path(points_per_edge: int = 8, vertices=(("G", GAMMA), ("X", X_POINT), ("J", J_POINT), ("G", GAMMA))):
    """Points along straight edges between vertices, ends included once.

    Returns (k array, arclength, {label: arclength}).
    """
    if points_per_edge < 1:
        raise BandError("points_per_edge must be >= 1")
    ks = [np.asarray(vertices[0][1], float)]
    for (_, a), (_, b) in zip(vertices[:-1], vertices[1:]):
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        for t in np.arange(1, points_per_edge + 1) / points_per_edge:
            ks.append(a + t * (b - a))
    ks = np.array(ks)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(ks, axis=0), axis=1))])
    labels = {}
    for i, (name, _) in enumerate(vertices):
        labels.setdefault(name, []).append(float(s[i * points_per_edge]))
    return ks, s, labels


def in_brillouin_zone(k, tol: float = 1e-9) -> bool:
    """True if k (units of 2 pi / a) lies in the first hexagonal Brillouin zone."""
    k = np.asarray(k, float)
    half = 1.0 / SQRT3  # |G| / 2 in units of 2 pi / a
    for ang in range(30, 360, 60):
        g = np.array([math.cos(math.radians(ang)), math.sin(math.radians(ang))])
        if k @ g > half + tol:
            return False
    return True


def rotate(k, degrees: float) -> np.ndarray:
    c, s = math.cos(math.radians(degrees)), math.sin(math.radians(degrees))
    return np.array([[c, -s], [s, c]]) @ np.asarray(k, float)


# --- supercell --------------------------------------------------------------------

def supercell_size(a: int) -> tuple:
    """(a, H) with H the even integer closest to a sqrt(3); a must be even."""
    if a % 2:
        raise BandError(f"band runs need an even lattice constant, got a={a}")
    return a, 2 * int(round(a * SQRT3 / 2))


def supercell_grid(spec: PhotonicCrystalSpec, z_air: Optional[float] = None, pml: int = 10,
                   subsample: int = 2) -> PermittivityGrid:
    """Half-space (z >= 0) grid of one rectangular supercell, holes at (0, 0) and t."""
    a, H = supercell_size(spec.a)
    r = spec.radius
    holes = []
    if r > 0:
        for m in (-1, 0, 1):
            for n in (-1, 0, 1):
                for hx, hy in ((0.0, 0.0), (a / 2.0, H / 2.0)):
                    x, y = hx + m * a, hy + n * H
                    holes.append(Hole(x=x, y=y, r=r, site=(x, y)))
    hs = HoleSet(tuple(holes), a)
    if z_air is None:
        z_air = float(a)
    nz = int(math.ceil(spec.thickness / 2 + z_air)) + pml
    plane = slab_plane_eps(hs, spec, np.arange(a, dtype=float), np.arange(H, dtype=float), subsample)
    frac = slab_profile(np.arange(nz, dtype=float), spec.thickness, subsample)
    eps = frac[None, None, :] * plane[:, :, None] + (1.0 - frac[None, None, :])
    return PermittivityGrid(eps=eps, center=(0, 0, 0), mirrors=(False, False, True), n_slab=spec.n_slab,
                            pml=pml, meta={"supercell": (a, H), "z_air": float(z_air)})


def _phase(k, vec) -> complex:
    return cmath.exp(1j * (k[0] * vec[0] + k[1] * vec[1]))


def bloch_frequencies(grid: PermittivityGrid, k_cells, period: tuple, window: tuple, steps: int,
                      rng: np.random.Generator, n_sources: int = 4, n_probes: int = 6,
                      translation: Optional[tuple] = None, components=(0, 1), pml: int = 10,
                      courant: float = 0.5, precision: str = "float32", min_q: float = 200.0,
                      z_max: Optional[int] = None):
    """Mode frequencies (cycles per time unit) of a Bloch cell at wave vector ``k_cells`` (rad/cell).

    With ``translation`` set, sources and probes are paired across it with the
    Bloch phase, suppressing bands folded by the supercell.  Returns
    (ascending frequencies, run duration).
    """
    bounds = BoundarySpec.bloch(k_cells, period, thickness=pml, z_mirror=True)
    dtype = np.float32 if precision == "float32" else np.float64
    solver = Solver(grid, bounds, courant=courant, dtype=dtype)
    nx, ny, nz = solver.shape
    if z_max is None:
        z_max = max(1, int(math.ceil(grid.meta.get("half_thickness", 1))))
    fmin, fmax = window
    pulse = GaussianPulse(0.5 * (fmin + fmax), 0.5 * (fmax - fmin))
    complex_grid = solver.dtype.kind == "c"

    def partner(i, j):
        ti, tj = translation
        pi, pj = i + ti, j + tj
        wrap = (pi // nx * nx, pj // ny * ny)
        ph = _phase(k_cells, (ti - wrap[0], tj - wrap[1]))
        return (pi % nx, pj % ny), ph

    def sites(count):
        out = []
        for _ in range(count):
            i = int(rng.integers(0, nx))
            j = int(rng.integers(0, ny if translation is None else max(1, ny // 2)))
            kz = int(rng.integers(0, z_max + 1))
            c = int(components[int(rng.integers(0, len(components)))])
            out.append((i, j, kz, c))
        return out

    for i, j, kz, c in sites(n_sources):
        amp = complex(rng.normal(), 0.0)
        if complex_grid:
            amp *= cmath.exp(2j * math.pi * rng.random())
        solver.add_source(PointDipole((i, j, kz), c, pulse, amp if complex_grid else amp.real))
        if translation is not None:
            (pi, pj), ph = partner(i, j)
            a2 = amp * ph
            solver.add_source(PointDipole((pi, pj, kz), c, pulse, a2 if complex_grid else a2.real))
    probes = []
    for i, j, kz, c in sites(n_probes):
        p = [PointProbe(("ex", "ey", "ez")[c], (i, j, kz))]
        w = [1.0]
        if translation is not None:
            (pi, pj), ph = partner(i, j)
            p.append(PointProbe(("ex", "ey", "ez")[c], (pi, pj, kz)))
            w.append(ph.conjugate())
        probes.append((p, w))
    flat = [p for ps, _ in probes for p in ps]
    start = int(math.ceil(pulse.end_time / solver.dt))
    solver.run(start + steps, flat)
    sig = 0
    for ps, ws in probes:
        s = sum(wt * np.asarray(p.signal[start:], dtype=complex) for p, wt in zip(ps, ws))
        if not complex_grid:
            s = s.real
        scale = float(np.max(np.abs(s)))
        if scale > 0:
            sig = sig + s / scale
    duration = steps * solver.dt
    if np.isscalar(sig):
        return [], duration
    try:
        res = extract_resonances(sig, solver.dt, window, t0=(start + 1) * solver.dt,
                                 max_order=60, min_relative_amplitude=1e-4)
    except (NoPeakFound, IllConditionedFit) as exc:
        log.debug("no bands at k=%s: %s", k_cells, exc)
        return [], duration
    freqs = sorted(r.frequency for r in res if r.Q >= min_q)
    return freqs, duration


def cladding_decay(k, a_over_lambda: float, z_air_over_a: float) -> float:
    """Number of evanescent decay lengths of a guided mode across the air cladding.

    ``k`` in units of 2 pi / a; zero at or above the light line.
    """
    q = float(np.dot(k, k)) - a_over_lambda ** 2
    return 2.0 * math.pi * math.sqrt(q) * z_air_over_a if q > 0 else 0.0


def _merge(freqs: Sequence[float], rel: float) -> List[float]:
    """Collapse peaks closer than ``rel`` (relative) into one."""
    out: List[float] = []
    for f in sorted(freqs):
        if out and f - out[-1] < rel * f:
            continue
        out.append(f)
    return out


def compute_bands(spec: PhotonicCrystalSpec, k_points=None, bands_per_k: int = 4, seed: int = 0,
                  points_per_edge: int = 8, run_periods: float = 60.0, z_air: Optional[float] = None,
                  pml: int = 10, precision: str = "float32", window=(0.02, 0.6), min_q: float = 200.0,
                  n_sources: int = 4, n_probes: int = 6) -> BandDiagram:
    """TE-like guided bands along ``k_points`` (default the G-X-J-G path).

    ``k_points`` is a sequence of (kx, ky) in units of 2 pi / a.  The lowest
    ``bands_per_k`` frequencies below the light line are kept; the first band
    at G is the trivial a/lambda = 0.  ``run_periods`` is the ring-down length
    in periods at a/lambda = 0.3.  A mode is reported only when its evanescent
    tail decays by at least 1/e across the air cladding (see
    :func:`cladding_decay`); closer to the light line the absorber damps it and
    the frequency is not trustworthy.
    """
    if k_points is None:
        ks, s, labels = k_path(points_per_edge)
    else:
        ks = np.atleast_2d(np.asarray(k_points, float))
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(ks, axis=0), axis=1))])
        labels = {}
    for k in ks:
        if not in_brillouin_zone(k):
            raise BandError(f"k = {tuple(k)} lies outside the first Brillouin zone")
    grid = supercell_grid(spec, z_air=z_air, pml=pml)
    grid.meta["half_thickness"] = spec.thickness / 2.0
    a, H = grid.meta["supercell"]
    f_ref = 0.3 / a
    steps = int(round(run_periods / f_ref / 0.5))
    win = (window[0] / a, window[1] / a)
    z_clad = grid.meta["z_air"]
    bands, flagged, light = [], [], []
    for idx, kk in enumerate(ks):
        kc = 2 * math.pi / a * kk          # rad per cell
        ll = float(np.hypot(*kk))           # light line in a/lambda
        light.append(ll)
        if ll < 1e-12:
            bands.append([0.0])
            flagged.append(False)
            continue
        rng = np.random.default_rng([seed, idx])
        freqs, T = bloch_frequencies(grid, kc, (a, H), win, steps, rng, n_sources=n_sources,
                                     n_probes=n_probes, translation=(a // 2, H // 2), pml=pml,
                                     precision=precision, min_q=min_q)
        guided = [f * a for f in freqs if cladding_decay(kk, f * a, z_clad / a) >= 1.0]
        guided = _merge(guided, 1e-3)[:bands_per_k]
        gaps = np.diff(guided)
        # peaks closer than one Fourier bin of the run are not reliably separated
        flagged.append(bool(gaps.size and np.min(gaps) < a / T))
        bands.append(guided)
        log.info("k=(%.3f, %.3f): %s", kk[0], kk[1], ", ".join(f"{f:.4f}" for f in guided))
    meta = {"a": a, "supercell": (a, H), "seed": seed, "steps": steps, "bands_per_k": bands_per_k,
            "r_over_a": spec.r_over_a, "d_over_a": spec.d_over_a, "n_slab": spec.n_slab,
            "note": "modes above or within one cladding decay length of the light line are not reported"}
    return BandDiagram(k=ks, s=s, bands=bands, light_line=np.array(light), flagged=flagged,
                       vertices=labels, meta=meta)


# --- analytic slab oracle ---------------------------------------------------------------

def slab_te_frequency(k: float, thickness: float, n: float, order: int = 0) -> float:
    """Angular frequency of the ``order``-th even TE guided mode of a symmetric slab.

    Solves kappa tan(kappa d / 2) = gamma with kappa^2 = n^2 w^2 - k^2 and
    gamma^2 = k^2 - w^2 for k / n < w < k (c = 1).  Raises BandError if the
    mode is not guided at this k.
    """
    if k <= 0:
        raise BandError("k must be positive")
    half = thickness / 2.0

    def f(w):
        kap = math.sqrt(max(n * n * w * w - k * k, 0.0))
        gam = math.sqrt(max(k * k - w * w, 0.0))
        return kap * math.sin(kap * half) - gam * math.cos(kap * half)

    # branch of tan: kappa d/2 in [order*pi, order*pi + pi/2)
    kap_max = math.sqrt(n * n - 1.0) * k
    lo_kap = order * math.pi / half
    hi_kap = min((order * math.pi + math.pi / 2) / half, kap_max)
    if lo_kap >= kap_max:
        raise BandError(f"TE mode of order {order} is not guided at k={k}")
    to_w = lambda kap: math.sqrt((kap * kap + k * k)) / n
    eps = 1e-12
    return brentq(f, to_w(lo_kap) + eps, to_w(hi_kap) - eps, xtol=1e-14)


def slab_dispersion_fdtd(k: float, thickness: int, n: float, z_air: int = 40, pml: int = 10,
                         run_time: float = 4000.0, seed: int = 0, precision: str = "float64") -> float:
    """Lowest even TE frequency (angular) of a uniform slab at in-plane wave vector k (rad/cell),
    from a 1 x 1 Bloch cell with the wave vector along x and E along y."""
    nz = int(math.ceil(thickness / 2.0 + z_air)) + pml
    frac = slab_profile(np.arange(nz, dtype=float), float(thickness))
    eps = (1.0 + frac * (n * n - 1.0))[None, None, :].repeat(1, 0).repeat(1, 1)
    grid = PermittivityGrid(eps=eps, center=(0, 0, 0), mirrors=(False, False, True), n_slab=n, pml=pml,
                            meta={"half_thickness": thickness / 2.0})
    w_guess = slab_te_frequency(k, thickness, n)
    f0 = w_guess / (2 * math.pi)
    window = (0.5 * f0, 1.5 * f0)
    rng = np.random.default_rng(seed)
    steps = int(run_time / 0.5)
    freqs, _ = bloch_frequencies(grid, (k, 0.0), (1, 1), window, steps, rng, n_sources=2, n_probes=3,
                                 components=(1,), pml=pml, precision=precision, min_q=50.0,
                                 z_max=int(thickness // 2))
    if not freqs:
        raise BandError("no guided slab mode found")
    return 2 * math.pi * freqs[0]
