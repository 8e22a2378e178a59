"""Cavity runs: geometry -> two-pass FDTD -> Q split, mode volume, CQED, far field.

Pass 1 seeds a symmetry-adapted field at the cavity centre and extracts the
dominant resonance in the frequency window.  Pass 2 re-excites that mode with
a narrowband dipole pair, waits for the other components to leave, and then
measures stored energy, box fluxes, the field phasor on a plane above the
membrane and the 3D field phasor over the last periods.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import farfield as ff
from .analysis.cavity import ModeSnapshot, ResonantMode, field_ratio, mode_cqed, mode_volume, split_q
from .analysis.cqed import GAMMA_PERP_CS, LAMBDA_CS_D2
from .analysis.resonances import IllConditionedFit, NoPeakFound, dominant, extract_resonances, q_from_energy_decay
from .fdtd.boundaries import BoundarySpec
from .fdtd.monitors import EnergyMonitor, FieldDFT, FluxBox, PlaneDFT, PointProbe
from .fdtd.solver import Solver
from .fdtd.sources import GaussianPulse, InitialField, dipole_parity, mirror_pair
from .geometry import (CoupledDefects, PhotonicCrystalSpec, build_structure, plan_domain, rasterize)

log = logging.getLogger(__name__)

CACHE_ENV = "PHCAVITY_CACHE"


class AnalysisError(RuntimeError):
    """Resonance or mode analysis could not produce a result."""


@dataclass(frozen=True)
class CavityConfig:
    spec: PhotonicCrystalSpec
    defects: tuple = ()
    mode: str = "x"                      # dipole family: "x" or "y"
    window: tuple = (0.24, 0.34)         # a/lambda search window
    courant: float = 0.5
    precision: str = "float32"
    pml: int = 10
    padding: Optional[float] = None
    z_air: Optional[float] = None
    symmetry: bool = True                # use x/y mirror planes (quarter domain)
    pass1_periods: float = 80.0
    pass1_skip_periods: float = 12.0
    source_fwidth: float = 0.04          # relative spectral width of the pass-2 pulse
    settle_periods: float = 20.0
    measure_periods: Optional[float] = None
    min_measure_periods: float = 20.0
    max_measure_periods: float = 400.0
    energy_every: int = 8
    snapshot_periods: float = 2.0
    farfield: bool = True
    atom: Optional[tuple] = None         # physical (x, y, z) in cells; default per defect family
    gamma_perp: float = GAMMA_PERP_CS
    wavelength: float = LAMBDA_CS_D2
    sqrt_eps: bool = False
    min_q: float = 30.0

    def parity(self) -> tuple:
        return dipole_parity(self.mode)

    def default_atom(self) -> tuple:
        if self.atom is not None:
            return tuple(self.atom)
        for d in self.defects:
            if isinstance(d, CoupledDefects) and d.orientation == "y":
                return (0.5 * self.spec.a, 0.0, 0.0)
        return (0.0, 0.0, 0.0)

    def key(self) -> str:
        payload = repr(dataclasses.astuple(self)) + repr(self.defects) + __version__ + _source_digest()
        return hashlib.sha256(payload.encode()).hexdigest()[:20]


_DIGEST = None


def _source_digest() -> str:
    """Hash of the package sources, so cached results follow code changes."""
    global _DIGEST
    if _DIGEST is None:
        h = hashlib.sha256()
        root = Path(__file__).parent
        for p in sorted(root.rglob("*.py")):
            if p.name in ("cli.py", "config.py", "io.py", "bandstructure.py"):
                continue
            h.update(p.read_bytes())
        _DIGEST = h.hexdigest()[:16]
    return _DIGEST


@dataclass
class CavityResult:
    config: CavityConfig
    mode: ResonantMode
    pass1: list
    cqed_perp: object
    cqed_total: object
    farfield: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    probes: list = field(default_factory=list)      # pass-2 point probes (keep_fields only)
    solver: object = None                           # final pass-2 solver (keep_fields only)

    def summary(self) -> dict:
        m = self.mode
        out = {
            "a": m.a, "a_over_lambda": m.a_over_lambda, "Q_total": m.Q_total, "Q_perp": m.Q_perp,
            "Q_par": m.Q_par, "Q_decay": m.Q_decay, "Q_flux": m.Q_flux, "V_mode": m.V_mode,
            "g_ratio": self.cqed_perp.g_ratio, "g0": self.cqed_perp.g0, "N0": self.cqed_perp.N0,
            "m0": self.cqed_perp.m0, "N0_total": self.cqed_total.N0, "m0_total": self.cqed_total.m0,
            "strong_coupling": self.cqed_perp.strong_coupling,
        }
        out.update({f"ff_{k}": v for k, v in self.farfield.items() if np.isscalar(v)})
        out.update({f"diag_{k}": v for k, v in self.diagnostics.items() if np.isscalar(v)})
        return out


def _dtype(precision: str):
    return {"float32": np.float32, "float64": np.float64}[precision]


def build_solver(cfg: CavityConfig):
    """Rasterized grid and a field-free solver for a cavity configuration."""
    holes = build_structure(cfg.spec, cfg.defects)
    mirrors = (cfg.symmetry, cfg.symmetry, True)
    layout = plan_domain(holes, cfg.spec, padding=cfg.padding, z_air=cfg.z_air, pml=cfg.pml, mirrors=mirrors)
    grid = rasterize(holes, cfg.spec, layout=layout)
    par = cfg.parity()
    bounds = BoundarySpec.cavity(cfg.pml, mirrors=mirrors, parity=(par[0], par[1], "even"))
    solver = Solver(grid, bounds, courant=cfg.courant, dtype=_dtype(cfg.precision))
    return holes, grid, solver


def _probe_sites(cfg: CavityConfig, solver) -> list:
    """A few E probes near the cavity centre on the dominant dipole component."""
    a = cfg.spec.a
    c = 0 if cfg.mode == "x" else 1
    name = "ex" if c == 0 else "ey"
    cx, cy, cz = solver.grid.center
    pts = []
    for dx, dy in ((0, 0), (a // 4, 0), (0, a // 4), (a // 3, a // 5), (a // 2, a // 3)):
        i = cx + dx
        j = cy + dy
        if cfg.mode == "x":
            i = max(i, 0)
        pts.append(PointProbe(name, (i, j, cz)))
        pts.append(PointProbe(name, (i, j, cz + 2)))
    return pts


def pass1(cfg: CavityConfig, solver) -> list:
    """Seeded ring-down; returns resonances in the window (largest first)."""
    a = cfg.spec.a
    par = cfg.parity()
    f_mid = 0.5 * (cfg.window[0] + cfg.window[1]) / a
    period = 1.0 / f_mid
    seed = InitialField(parity=par, width=0.3 * a, z_width=0.3 * a * cfg.spec.d_over_a)
    solver.add_source(seed)
    probes = _probe_sites(cfg, solver)
    steps = int(cfg.pass1_periods * period / solver.dt)
    solver.run(steps, probes)
    skip = int(cfg.pass1_skip_periods * period / solver.dt)
    window = (cfg.window[0] / a, cfg.window[1] / a)
    sig = sum((p.signal[skip:].astype(float) / (np.max(np.abs(p.signal[skip:])) + 1e-300)) for p in probes)
    t0 = (skip + 1) * solver.dt
    return extract_resonances(sig, solver.dt, window, t0=t0)


def _box(solver, z_top: int, margin: int = 2):
    nx, ny, nz = solver.shape
    b = solver.bounds
    xs = (b.pml_thickness(0)[0] + (0 if solver.grid.mirrors[0] else margin), nx - b.pml_thickness(0)[1] - margin)
    ys = (b.pml_thickness(1)[0] + (0 if solver.grid.mirrors[1] else margin), ny - b.pml_thickness(1)[1] - margin)
    zs = (0, z_top)
    return (xs, ys, zs)


def pass2(cfg: CavityConfig, solver, f0: float, q_guess: float) -> dict:
    a = cfg.spec.a
    par = cfg.parity()
    grid = solver.grid
    period = 1.0 / f0
    comp = 0 if cfg.mode == "x" else 1
    pulse = GaussianPulse(f0, cfg.source_fwidth * f0)
    for src in mirror_pair(solver, comp, pulse, parity=par):
        solver.add_source(src)
    probes = _probe_sites(cfg, solver)
    lam = a / (f0 * a)  # wavelength in cells
    z_surface = cfg.spec.thickness / 2.0
    nz = solver.shape[2]
    z_top = int(round(z_surface + lam / 2.0))
    z_max = nz - solver.bounds.pml_thickness(2)[1] - 2
    if z_top > z_max:
        log.warning("flux plane at lambda/2 (%d) clipped to %d", z_top, z_max)
        z_top = z_max
    box = _box(solver, z_top)
    skip = set()
    if grid.mirrors[0]:
        skip.add("x-")
    if grid.mirrors[1]:
        skip.add("y-")
    skip.add("z-")
    k_s = int(math.ceil(z_surface)) + 1

    drive_steps = int(math.ceil(pulse.end_time / solver.dt))
    settle = int(cfg.settle_periods * period / solver.dt)
    if cfg.measure_periods is not None:
        mp = cfg.measure_periods
    else:
        mp = min(max(0.01 * q_guess, cfg.min_measure_periods), cfg.max_measure_periods)
    # whole number of periods for flux and DFT averaging
    measure = int(round(round(mp) * period / solver.dt))
    t0 = time.time()
    solver.run(drive_steps + settle, probes)
    fb = FluxBox(box, skip=skip)
    em = EnergyMonitor(box, every=cfg.energy_every)
    em_all = EnergyMonitor(((box[0][0], box[0][1]), (box[1][0], box[1][1]), (0, z_max)), every=cfg.energy_every)
    start = solver.state.step
    mons = [fb, em, em_all] + probes
    plane = None
    if cfg.farfield:
        plane = PlaneDFT(k_s, [f0], start_step=start + 1)
        mons.append(plane)
    snap_steps = int(round(cfg.snapshot_periods * period / solver.dt))
    fdft = FieldDFT(f0, start_step=start + measure - snap_steps + 1, every=2)
    mons.append(fdft)
    solver.run(measure, mons)
    elapsed = time.time() - t0
    return {"fb": fb, "em": em, "em_all": em_all, "plane": plane, "fdft": fdft, "probes": probes,
            "box": box, "z_top": z_top, "k_s": k_s, "measure": measure, "start": start, "elapsed": elapsed,
            "drive_steps": drive_steps}


def _snapshot(solver, fdft) -> ModeSnapshot:
    grid = solver.grid
    (x0, x1), (y0, y1), (z0, z1) = fdft.region
    e = fdft.phasors()
    eps = grid.eps[x0:x1, y0:y1, z0:z1]
    eps_comp = tuple(ec[x0:x1, y0:y1, z0:z1] for ec in solver.eps_comp)
    origin = (x0 - grid.center[0], y0 - grid.center[1], z0 - grid.center[2])
    return ModeSnapshot(e, eps, eps_comp, origin, tuple(bool(m) for m in grid.mirrors))


def run_cavity(cfg: CavityConfig, keep_fields: bool = True) -> CavityResult:
    """Full two-pass analysis of one cavity configuration."""
    a = cfg.spec.a
    t_start = time.time()
    holes, grid, solver = build_solver(cfg)
    try:
        res1 = pass1(cfg, solver)
        best = dominant(res1, min_q=cfg.min_q)
    except (NoPeakFound, IllConditionedFit) as exc:
        raise AnalysisError(f"pass 1 found no usable resonance: {exc}") from exc
    f0 = best.frequency
    log.info("pass 1: a/lambda=%.4f Q=%.0f", f0 * a, best.Q)

    _, _, solver = build_solver(cfg)
    # 3D phasor restricted to the non-absorbing region
    out = pass2(cfg, solver, f0, best.Q)
    fdft = out["fdft"]
    period = 1.0 / f0
    omega = 2 * math.pi * f0

    probes = out["probes"]
    sig = sum(p.signal.astype(float) / (np.max(np.abs(p.signal)) + 1e-300) for p in probes)
    start_idx = out["drive_steps"]
    t0 = (start_idx + 1) * solver.dt
    win = (f0 * (1 - 4 * cfg.source_fwidth), f0 * (1 + 4 * cfg.source_fwidth))
    try:
        res2 = extract_resonances(sig[start_idx:], solver.dt, win, t0=t0)
        r2 = min(res2[:3], key=lambda r: abs(r.frequency - f0))
    except (NoPeakFound, IllConditionedFit) as exc:
        raise AnalysisError(f"pass 2 ring-down fit failed: {exc}") from exc
    f0 = r2.frequency
    omega = 2 * math.pi * f0

    em = out["em"]
    times = np.asarray(em.steps) * solver.dt
    q_decay = q_from_energy_decay(times, em.series, f0)
    fb = out["fb"]
    p_top = fb.group(["z+"])
    p_lat = fb.group(["x+", "x-", "y+", "y-"])
    # fluxes every step, energies every few steps: average each over the same span
    sq = split_q(omega, em.series, p_top, p_lat)
    snap = _snapshot(solver, fdft)
    V_cells = mode_volume(snap)
    a_over_lambda = f0 * a
    lam = a / a_over_lambda
    V = V_cells / (lam / 2.0) ** 3
    mode = ResonantMode(a=a, a_over_lambda=a_over_lambda, Q_total=r2.Q, Q_perp=sq["Q_perp"], Q_par=sq["Q_par"],
                        Q_decay=q_decay, Q_flux=sq["Q_flux"], W=sq["W"], V_mode=V,
                        snapshot=snap if keep_fields else None)
    atom = cfg.default_atom()
    mode_for_cqed = dataclasses.replace(mode, snapshot=snap)
    c_perp = mode_cqed(mode_for_cqed, atom, cfg.gamma_perp, cfg.wavelength, "perp", cfg.sqrt_eps)
    c_tot = mode_cqed(mode_for_cqed, atom, cfg.gamma_perp, cfg.wavelength, "total", cfg.sqrt_eps)

    far = {}
    if cfg.farfield and out["plane"] is not None:
        plane = ff.phasor_on_plane(out["plane"], solver, lam, parity=cfg.parity())
        pat = ff.radiated_power(plane)
        # stored energy above the mid-plane, unfolded over the lateral mirrors
        W_half = float(np.mean(out["em_all"].series)) * 2.0 ** sum(bool(m) for m in solver.grid.mirrors[:2])
        far = {"P": pat.P, "Q": ff.q_from_radiated_power(W_half, pat.P, omega), "W": W_half,
               "lightcone_ex": ff.light_cone_fraction(plane.ex, lam),
               "lightcone_hy": ff.light_cone_fraction(plane.hy, lam),
               "lightcone_ey": ff.light_cone_fraction(plane.ey, lam),
               "lightcone_hx": ff.light_cone_fraction(plane.hx, lam),
               "z_plane": plane.z}
        if keep_fields:
            far["pattern"] = pat
            far["plane"] = plane
    diag = {"pass1_a_over_lambda": best.frequency * a, "pass1_Q": best.Q,
            "decay_agreement": abs(q_decay / r2.Q - 1.0), "flux_agreement": abs(sq["Q_flux"] / r2.Q - 1.0),
            "negative_face": sq["negative_face"], "z_top": out["z_top"], "k_plane": out["k_s"],
            "measure_periods": out["measure"] * solver.dt * f0, "grid": "x".join(map(str, solver.shape)),
            "runtime_s": time.time() - t_start, "steps_pass2": solver.state.step}
    if diag["decay_agreement"] > 0.10:
        log.warning("energy-decay Q (%.0f) and fitted Q (%.0f) differ by more than 10%%", q_decay, r2.Q)
    if keep_fields:
        return CavityResult(cfg, mode, list(res1), c_perp, c_tot, far, diag, list(probes), solver)
    return CavityResult(cfg, mode, list(res1), c_perp, c_tot, far, diag)


# --- result cache ---------------------------------------------------------------

def cache_dir() -> Optional[Path]:
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def cached_summary(cfg: CavityConfig, compute: bool = True) -> Optional[dict]:
    """Scalar summary of a run, read from / written to the cache directory if set."""
    d = cache_dir()
    path = d / f"{cfg.key()}.json" if d else None
    if path is not None and path.exists():
        return json.loads(path.read_text())
    if not compute:
        return None
    res = run_cavity(cfg, keep_fields=False)
    summ = res.summary()
    summ["pass1"] = [(r.frequency * cfg.spec.a, r.Q, r.amplitude) for r in res.pass1]
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(summ, indent=1, default=float))
    return summ
