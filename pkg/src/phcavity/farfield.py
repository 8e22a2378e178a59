"""Radiated power from tangential near fields on a plane above the membrane.

Equivalent surface currents on the plane z = z_S give the radiation vectors

    N_x = -F[H_y],  N_y = F[H_x],  L_x = F[E_y],  L_y = -F[E_x],
    F[f](k_par) = sum f(x, y) exp(i (k_x x + k_y y)) dx dy,

evaluated at k_par = k sin(theta) (cos(phi), sin(phi)).  With
K = |N_theta + L_phi/eta|^2 + |N_phi - L_theta/eta|^2 the cycle-averaged power
radiated into the upper half space is

    P = eta / (8 lambda^2) * integral_0^{pi/2} integral_0^{2 pi} K sin(theta) dphi dtheta.

Phasors follow the convention f(t) = Re[F e^{i w t}].  Grid units: c = 1,
eta = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ETA0 = 1.0


class FarFieldError(RuntimeError):
    pass


@dataclass
class PlaneComponent:
    """Phasor samples of one tangential component on a rectangular sub-grid."""

    values: np.ndarray   # shape (len(xs), len(ys))
    xs: np.ndarray
    ys: np.ndarray


@dataclass
class NearFieldPlane:
    z: float
    wavelength: float
    ex: PlaneComponent
    ey: PlaneComponent
    hx: PlaneComponent
    hy: PlaneComponent
    spacing: float = 1.0

    def components(self):
        return {"ex": self.ex, "ey": self.ey, "hx": self.hx, "hy": self.hy}

    def scaled(self, factor) -> "NearFieldPlane":
        def sc(c):
            return PlaneComponent(c.values * factor, c.xs, c.ys)
        return NearFieldPlane(self.z, self.wavelength, sc(self.ex), sc(self.ey), sc(self.hx), sc(self.hy),
                              self.spacing)

    def shifted(self, dx: float, dy: float) -> "NearFieldPlane":
        def sh(c):
            return PlaneComponent(c.values, c.xs + dx, c.ys + dy)
        return NearFieldPlane(self.z, self.wavelength, sh(self.ex), sh(self.ey), sh(self.hx), sh(self.hy),
                              self.spacing)


@dataclass
class RadiationPattern:
    theta: np.ndarray
    phi: np.ndarray
    K: np.ndarray            # shape (len(theta), len(phi))
    N_theta: np.ndarray
    N_phi: np.ndarray
    L_theta: np.ndarray
    L_phi: np.ndarray
    wavelength: float
    eta: float = ETA0
    P: float = math.nan
    meta: dict = field(default_factory=dict)


# --- plane construction -------------------------------------------------------

def unfold_component(values, xs, ys, sign_x: Optional[float], sign_y: Optional[float]) -> PlaneComponent:
    """Extend samples on x >= 0 (and/or y >= 0) to the full plane by mirror parity.

    ``sign_x`` is the scalar parity of the component under x -> -x (None: no
    mirror along x).  Samples lying on the mirror line are not duplicated.
    """
    values = np.asarray(values)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if sign_x is not None:
        keep = xs > 1e-9
        xs = np.concatenate([-xs[keep][::-1], xs])
        values = np.concatenate([sign_x * values[keep][::-1], values], axis=0)
    if sign_y is not None:
        keep = ys > 1e-9
        ys = np.concatenate([-ys[keep][::-1], ys])
        values = np.concatenate([sign_y * values[:, keep][:, ::-1], values], axis=1)
    return PlaneComponent(values, xs, ys)


def scalar_signs(parity_x: Optional[str], parity_y: Optional[str]) -> dict:
    """Scalar reflection signs of the tangential components for mode parities.

    Parities are vector-mirror eigenvalues of E; H picks up the opposite sign.
    """
    def sig(p):
        return None if p is None else (1.0 if p == "even" else -1.0)

    sx, sy = sig(parity_x), sig(parity_y)
    out = {}
    for name, comp, magnetic in (("ex", 0, False), ("ey", 1, False), ("hx", 0, True), ("hy", 1, True)):
        signs = []
        for axis, s in ((0, sx), (1, sy)):
            if s is None:
                signs.append(None)
                continue
            e_sign = -s if comp == axis else s
            signs.append(-e_sign if magnetic else e_sign)
        out[name] = tuple(signs)
    return out


def phasor_on_plane(dft, solver, wavelength: float, freq_index: int = 0, window=None,
                    parity=(None, None)) -> NearFieldPlane:
    """Build a :class:`NearFieldPlane` from a :class:`~phcavity.fdtd.monitors.PlaneDFT`.

    ``window`` = ((i0, i1), (j0, j1)) restricts the node range (default: the
    region inside the absorbing layers).  On mirrored grids the samples are
    unfolded with the mode ``parity``.
    """
    grid = solver.grid
    nx, ny, _ = solver.shape
    if window is None:
        (lx, hx), (ly, hy) = solver.bounds.pml_thickness(0), solver.bounds.pml_thickness(1)
        window = ((lx, nx - hx), (ly, ny - hy))
    (i0, i1), (j0, j1) = window
    ph = dft.phasors(freq_index)
    sx, sy = dft.xy
    if not (sx == slice(None) and sy == slice(None)):
        raise FarFieldError("plane DFT must cover the full plane to build a near-field plane")
    cx, cy = grid.center[0], grid.center[1]
    mirrored = [bool(grid.mirrors[0]), bool(grid.mirrors[1])]
    signs = scalar_signs(parity[0] if mirrored[0] else None, parity[1] if mirrored[1] else None)
    comps = {}
    for name, half in (("ex", (True, False)), ("ey", (False, True)), ("hx", (False, True)), ("hy", (True, False))):
        xs = np.arange(i0, i1) - cx + (0.5 if half[0] else 0.0)
        ys = np.arange(j0, j1) - cy + (0.5 if half[1] else 0.0)
        vals = ph[name][i0:i1, j0:j1]
        s = signs[name]
        comps[name] = unfold_component(vals, xs, ys, s[0] if mirrored[0] else None, s[1] if mirrored[1] else None)
    z = dft.k - grid.center[2]
    return NearFieldPlane(float(z), wavelength, comps["ex"], comps["ey"], comps["hx"], comps["hy"])


# --- transforms -----------------------------------------------------------------

def _ft2(comp: PlaneComponent, kx: np.ndarray, ky: np.ndarray, dA: float) -> np.ndarray:
    """Direct evaluation of sum f exp(i(kx x + ky y)) dA at arbitrary (kx, ky) points."""
    ex = np.exp(1j * np.outer(kx, comp.xs))          # (Nk, Nx)
    ey = np.exp(1j * np.outer(ky, comp.ys))          # (Nk, Ny)
    tmp = ex @ comp.values                           # (Nk, Ny)
    return np.sum(tmp * ey, axis=1) * dA


def radiation_vectors(plane: NearFieldPlane, theta: np.ndarray, phi: np.ndarray, chunk: int = 2048) -> dict:
    """Spherical components of N and L on a (theta, phi) tensor grid."""
    k = 2.0 * math.pi / plane.wavelength
    T, P = np.meshgrid(theta, phi, indexing="ij")
    st = np.sin(T).ravel()
    ct = np.cos(T).ravel()
    cp = np.cos(P).ravel()
    sp = np.sin(P).ravel()
    kx = k * st * cp
    ky = k * st * sp
    dA = plane.spacing ** 2
    out = {name: np.zeros(kx.size, dtype=complex) for name in ("ex", "ey", "hx", "hy")}
    for s in range(0, kx.size, chunk):
        e = slice(s, s + chunk)
        for name, comp in plane.components().items():
            out[name][e] = _ft2(comp, kx[e], ky[e], dA)
    Nx, Ny = -out["hy"], out["hx"]
    Lx, Ly = out["ey"], -out["ex"]
    shape = T.shape
    res = {
        "N_theta": (Nx * ct * cp + Ny * ct * sp).reshape(shape),
        "N_phi": (-Nx * sp + Ny * cp).reshape(shape),
        "L_theta": (Lx * ct * cp + Ly * ct * sp).reshape(shape),
        "L_phi": (-Lx * sp + Ly * cp).reshape(shape),
        "Nx": Nx.reshape(shape), "Ny": Ny.reshape(shape), "Lx": Lx.reshape(shape), "Ly": Ly.reshape(shape),
    }
    return res


def _pattern(plane: NearFieldPlane, n_theta: int, n_phi: int, eta: float) -> RadiationPattern:
    theta = np.linspace(0.0, 0.5 * math.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    rv = radiation_vectors(plane, theta, phi)
    K = np.abs(rv["N_theta"] + rv["L_phi"] / eta) ** 2 + np.abs(rv["N_phi"] - rv["L_theta"] / eta) ** 2
    integrand = K * np.sin(theta)[:, None]
    # trapezoid in theta, periodic rectangle rule in phi
    inner = integrand.sum(axis=1) * (2.0 * math.pi / n_phi)
    P = eta / (8.0 * plane.wavelength ** 2) * np.trapezoid(inner, theta)
    return RadiationPattern(theta, phi, K, rv["N_theta"], rv["N_phi"], rv["L_theta"], rv["L_phi"],
                            plane.wavelength, eta, float(P))


def radiated_power(plane: NearFieldPlane, n_theta: int = 64, n_phi: int = 128, eta: float = ETA0,
                   rtol: float = 0.01, max_refine: int = 3) -> RadiationPattern:
    """Radiated power with the angular grid doubled until P changes by < ``rtol``."""
    pat = _pattern(plane, n_theta, n_phi, eta)
    history = [pat.P]
    for _ in range(max_refine):
        n_theta, n_phi = 2 * n_theta - 1, 2 * n_phi
        new = _pattern(plane, n_theta, n_phi, eta)
        history.append(new.P)
        converged = abs(new.P - pat.P) <= rtol * max(abs(new.P), 1e-300)
        pat = new
        if converged:
            break
    pat.meta["refinement"] = history
    pat.meta["grid"] = (n_theta, n_phi)
    return pat


def q_from_radiated_power(W: float, P: float, omega: float) -> float:
    """Q = omega W / P (W: stored energy in z >= 0); P = 0 gives inf."""
    if P <= 0.0:
        return math.inf
    return omega * W / P


def light_cone_fraction(comp: PlaneComponent, wavelength: float, n_k: int = 96) -> float:
    """Fraction of the 2D spectral weight of a component inside |k_par| <= 2 pi / lambda.

    The total weight follows from Parseval on the sample grid; the light-cone
    part integrates |F|^2 over the disk with a polar rule.
    """
    dx = 1.0
    total = float(np.sum(np.abs(comp.values) ** 2)) * dx * dx * (2 * math.pi) ** 2
    if total == 0.0:
        return 0.0
    k0 = 2 * math.pi / wavelength
    kr = (np.arange(n_k) + 0.5) / n_k * k0
    phi = np.linspace(0, 2 * math.pi, 2 * n_k, endpoint=False)
    R, PH = np.meshgrid(kr, phi, indexing="ij")
    F = _ft2(comp, (R * np.cos(PH)).ravel(), (R * np.sin(PH)).ravel(), dx * dx)
    inside = float(np.sum(np.abs(F) ** 2 * R.ravel())) * (k0 / n_k) * (2 * math.pi / phi.size)
    return inside / total


def hertzian_plane(z: float, wavelength: float, half_width: float, spacing: float = 1.0, Il: float = 1.0):
    """Exact fields of a vertical (z) Hertzian dipole at the origin on the plane z.

    Returns a :class:`NearFieldPlane` of phasors (e^{i w t} convention) and
    the closed-form half-space power eta k^2 |Il|^2 / (24 pi).
    """
    k = 2 * math.pi / wavelength
    eta = ETA0
    xs = np.arange(-half_width, half_width + spacing / 2, spacing)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    r = np.sqrt(X ** 2 + Y ** 2 + z ** 2)
    rho = np.sqrt(X ** 2 + Y ** 2)
    ct = z / r
    st = rho / r
    ikr = 1j * k * r
    ph = np.exp(-ikr)
    Er = eta * Il * ct / (2 * math.pi * r ** 2) * (1 + 1 / ikr) * ph
    Et = 1j * eta * k * Il * st / (4 * math.pi * r) * (1 + 1 / ikr - 1 / (k * r) ** 2) * ph
    Hp = 1j * k * Il * st / (4 * math.pi * r) * (1 + 1 / ikr) * ph
    with np.errstate(invalid="ignore", divide="ignore"):
        cphi = np.where(rho > 0, X / rho, 1.0)
        sphi = np.where(rho > 0, Y / rho, 0.0)
    # cylindrical radial component of E in the plane
    E_rho = Er * st + Et * ct
    Ex = E_rho * cphi
    Ey = E_rho * sphi
    Hx = -Hp * sphi
    Hy = Hp * cphi
    comp = lambda v: PlaneComponent(v, xs.copy(), xs.copy())
    plane = NearFieldPlane(z, wavelength, comp(Ex), comp(Ey), comp(Hx), comp(Hy), spacing)
    return plane, eta * k ** 2 * abs(Il) ** 2 / (24 * math.pi)


def pattern_csv(pattern: RadiationPattern) -> str:
    lines = ["theta,phi,K"]
    for i, th in enumerate(pattern.theta):
        for j, ph in enumerate(pattern.phi):
            lines.append(f"{th:.8g},{ph:.8g},{pattern.K[i, j]:.8e}")
    return "\n".join(lines) + "\n"
