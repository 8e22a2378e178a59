"""Hexagonal-lattice perforated slabs, defect families and rasterization.

Coordinates are in grid cells with the cavity center at the origin; rows of
holes run parallel to x (nearest neighbours along x, rows spaced a*sqrt(3)/2).
The slab mid-plane is z = 0.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

SQRT3 = math.sqrt(3.0)

#: Largest number of cells allowed along any axis of a rasterized domain.
MAX_AXIS_CELLS = 4096


class GeometryError(ValueError):
    """Raised for invalid structures (overlapping holes, bad parameters)."""


@dataclass(frozen=True)
class PhotonicCrystalSpec:
    """Host lattice and slab.

    ``a`` is the lattice constant in grid cells; the remaining lengths are
    given as ratios to ``a``.
    """

    a: int
    r_over_a: float
    d_over_a: float
    n_slab: float = 3.4
    num_layers: int = 5

    def __post_init__(self):
        if int(self.a) != self.a or self.a < 10:
            raise GeometryError(f"a must be an integer >= 10 grid cells, got {self.a}")
        if not 0.0 < self.r_over_a < 0.5:
            raise GeometryError(f"r_over_a must lie in (0, 0.5), got {self.r_over_a}")
        if self.d_over_a <= 0.0:
            raise GeometryError(f"d_over_a must be positive, got {self.d_over_a}")
        if not self.n_slab > 1.0:
            raise GeometryError(f"n_slab must exceed 1, got {self.n_slab}")
        if int(self.num_layers) != self.num_layers or self.num_layers < 1:
            raise GeometryError(f"num_layers must be an integer >= 1, got {self.num_layers}")

    @property
    def radius(self) -> float:
        return self.r_over_a * self.a

    @property
    def thickness(self) -> float:
        return self.d_over_a * self.a


# --- defect families ----------------------------------------------------------

@dataclass(frozen=True)
class IndexChange:
    """Fill the central hole with material of index ``n_defect`` (donor)."""

    n_defect: float


@dataclass(frozen=True)
class RadiusChange:
    """Shrink the central hole to ``r_def_over_a``."""

    r_def_over_a: float


@dataclass(frozen=True)
class FractionalEdgeDislocation:
    """Elongate the holes on the ``axis`` line by ``p`` cells.

    For axis ``"x"`` the holes with y = 0 grow by p/2 in both +y and -y and the
    half-planes y > 0, y < 0 are translated apart by p/2 each.
    """

    axis: str
    p: float


@dataclass(frozen=True)
class FourHoleTuning:
    """Central radius ``r2``; the four nearest neighbours off the x axis get
    radius ``r1`` and move radially outward by ``r - r1``."""

    r2_over_a: float
    r1_over_a: float


@dataclass(frozen=True)
class CoupledDefects:
    """Two reduced holes sharing unperturbed holes between them.

    ``orientation`` is the elongation direction of the accompanying dislocation:

    * ``"x"``: defects at (+-a, 0) around an unperturbed central hole, the two
      columns x = +-a elongated along x by ``p``;
    * ``"y"``: defects at (0, +-a*sqrt(3)/2) with two unperturbed holes at
      (+-a/2, 0) between them (requires a ``site="pair"`` lattice), the two
      rows containing the defects elongated along y by ``p``.
    """

    orientation: str
    r_def_over_a: float
    p: float = 0.0


DefectSpec = Union[IndexChange, RadiusChange, FractionalEdgeDislocation, FourHoleTuning, CoupledDefects]


def validate_defect(defect: DefectSpec, spec: PhotonicCrystalSpec) -> None:
    """Check the donor-regime and sign invariants of a defect against its host."""
    if isinstance(defect, IndexChange):
        if not 1.0 <= defect.n_defect <= spec.n_slab:
            raise GeometryError(
                f"n_defect must satisfy 1 <= n_defect <= n_slab ({spec.n_slab}), got {defect.n_defect}")
    elif isinstance(defect, RadiusChange):
        if not 0.0 <= defect.r_def_over_a < spec.r_over_a:
            raise GeometryError(
                f"r_def_over_a must satisfy 0 <= r_def_over_a < r_over_a ({spec.r_over_a}), "
                f"got {defect.r_def_over_a}")
    elif isinstance(defect, FractionalEdgeDislocation):
        if defect.axis not in ("x", "y"):
            raise GeometryError(f"dislocation axis must be 'x' or 'y', got {defect.axis!r}")
        if defect.p < 0:
            raise GeometryError(f"elongation p must be >= 0, got {defect.p}")
    elif isinstance(defect, FourHoleTuning):
        for name in ("r1_over_a", "r2_over_a"):
            value = getattr(defect, name)
            if not 0.0 <= value <= spec.r_over_a:
                raise GeometryError(f"{name} must lie in [0, r_over_a={spec.r_over_a}], got {value}")
    elif isinstance(defect, CoupledDefects):
        if defect.orientation not in ("x", "y"):
            raise GeometryError(f"orientation must be 'x' or 'y', got {defect.orientation!r}")
        if not 0.0 <= defect.r_def_over_a <= spec.r_over_a:
            raise GeometryError(
                f"r_def_over_a must satisfy 0 <= r_def_over_a <= r_over_a ({spec.r_over_a}), "
                f"got {defect.r_def_over_a}")
        if defect.p < 0:
            raise GeometryError(f"elongation p must be >= 0, got {defect.p}")
    else:
        raise GeometryError(f"unknown defect type {type(defect).__name__}")


def lattice_site(defects: Sequence[DefectSpec]) -> str:
    """Lattice centring required by a defect list: ``"hole"`` or ``"pair"``."""
    for d in defects:
        if isinstance(d, CoupledDefects) and d.orientation == "y":
            return "pair"
    return "hole"


# --- holes --------------------------------------------------------------------

@dataclass(frozen=True)
class Hole:
    """A circular or stadium-shaped hole.

    A stadium is the set of points within ``r`` of the segment centred on
    ``(x, y)`` with half-lengths ``ex`` along x and ``ey`` along y (one of
    them is zero).  ``site`` is the unperturbed lattice position used to
    classify holes against dislocation lines.
    """

    x: float
    y: float
    r: float
    ex: float = 0.0
    ey: float = 0.0
    index: Optional[float] = None
    site: tuple = (0.0, 0.0)
    is_center: bool = False

    @property
    def semi_axes(self) -> tuple:
        return (self.r + self.ex, self.r + self.ey)


@dataclass(frozen=True)
class HoleSet:
    holes: tuple
    a: int
    site: str = "hole"

    def __len__(self):
        return len(self.holes)

    def __iter__(self):
        return iter(self.holes)

    def centers(self) -> np.ndarray:
        return np.array([(h.x, h.y) for h in self.holes], dtype=float)

    @property
    def center_hole(self) -> Optional[Hole]:
        for h in self.holes:
            if h.is_center:
                return h
        return None

    def extent(self) -> tuple:
        """Half-widths (x, y) of the bounding box of all holes."""
        if not self.holes:
            return (0.0, 0.0)
        hx = max(abs(h.x) + h.r + h.ex for h in self.holes)
        hy = max(abs(h.y) + h.r + h.ey for h in self.holes)
        return (hx, hy)

    def replace(self, holes) -> "HoleSet":
        return HoleSet(tuple(holes), self.a, self.site)


def _hex_distance(m: int, n: int) -> int:
    return max(abs(m), abs(n), abs(m + n))


def build_lattice(spec: PhotonicCrystalSpec, site: str = "hole",
                  max_cells: int = MAX_AXIS_CELLS) -> HoleSet:
    """Holes of ``num_layers`` hexagonal rings around the cavity centre.

    With ``site="hole"`` the rings surround a central hole at the origin (marked
    ``is_center``).  With ``site="pair"`` the lattice is the union of the rings
    around two neighbouring holes at (+-a/2, 0) and the origin is their midpoint.
    """
    a = spec.a
    L = spec.num_layers
    span = 2 * (L + 1) * a
    if span > max_cells:
        raise GeometryError(f"lattice extent of ~{span} cells exceeds the maximum of {max_cells}")
    r = spec.radius
    if site == "hole":
        anchors = [(0, 0)]
        shift = 0.0
    elif site == "pair":
        anchors = [(0, 0), (1, 0)]
        shift = a / 2.0
    else:
        raise GeometryError(f"site must be 'hole' or 'pair', got {site!r}")
    holes = []
    for n in range(-L - 1, L + 2):
        for m in range(-2 * L - 2, 2 * L + 3):
            if not any(_hex_distance(m - am, n - an) <= L for am, an in anchors):
                continue
            x = m * a + n * a / 2.0 - shift
            y = n * a * SQRT3 / 2.0
            holes.append(Hole(x=x, y=y, r=r, site=(x, y), is_center=(site == "hole" and m == 0 and n == 0)))
    holes.sort(key=lambda h: (h.site[1], h.site[0]))
    return HoleSet(tuple(holes), a, site)


# --- defects ------------------------------------------------------------------

def _find(holes: HoleSet, x: float, y: float) -> int:
    for idx, h in enumerate(holes.holes):
        if abs(h.site[0] - x) < 1e-9 and abs(h.site[1] - y) < 1e-9:
            return idx
    raise GeometryError(f"no lattice hole at ({x:.3f}, {y:.3f})")


def _dislocate(holes: HoleSet, axis: str, p: float, lines: Sequence[float]) -> list:
    """Insert strips of width ``p`` along lines of constant y (axis "x") or x."""
    out = []
    comp = 1 if axis == "x" else 0
    for h in holes.holes:
        s = h.site[comp]
        shift = 0.0
        on_line = False
        for c in lines:
            if abs(s - c) < 1e-9:
                on_line = True
                shift += 0.5 * p * np.sign(c)
            elif c == 0.0:
                shift += 0.5 * p * np.sign(s - c)
            else:
                shift += 0.5 * p * (np.sign(s - c) + np.sign(c))
        if axis == "x":
            h = dataclasses.replace(h, y=h.y + shift, ey=h.ey + (0.5 * p if on_line else 0.0))
        else:
            h = dataclasses.replace(h, x=h.x + shift, ex=h.ex + (0.5 * p if on_line else 0.0))
        out.append(h)
    return out


def apply_defect(holes: HoleSet, defect: DefectSpec, spec: Optional[PhotonicCrystalSpec] = None) -> HoleSet:
    """Return a new hole set with one defect applied.

    Apply several defects by chaining calls; dislocations should come last so
    that tuned holes are classified by their lattice sites.
    """
    if spec is not None:
        validate_defect(defect, spec)
    a = holes.a
    hs = list(holes.holes)

    if isinstance(defect, (IndexChange, RadiusChange, FourHoleTuning)):
        if holes.site != "hole":
            raise GeometryError(f"{type(defect).__name__} needs a lattice centred on a hole")
        c = _find(holes, 0.0, 0.0)
        if isinstance(defect, IndexChange):
            hs[c] = dataclasses.replace(hs[c], index=float(defect.n_defect))
        elif isinstance(defect, RadiusChange):
            hs[c] = dataclasses.replace(hs[c], r=defect.r_def_over_a * a)
        else:
            hs[c] = dataclasses.replace(hs[c], r=defect.r2_over_a * a)
            r1 = defect.r1_over_a * a
            for sx in (-1, 1):
                for sy in (-1, 1):
                    x0, y0 = sx * a / 2.0, sy * a * SQRT3 / 2.0
                    idx = _find(holes, x0, y0)
                    move = hs[idx].r - r1
                    hs[idx] = dataclasses.replace(
                        hs[idx], r=r1, x=hs[idx].x + move * sx * 0.5, y=hs[idx].y + move * sy * SQRT3 / 2.0)
    elif isinstance(defect, FractionalEdgeDislocation):
        if defect.axis not in ("x", "y"):
            raise GeometryError(f"dislocation axis must be 'x' or 'y', got {defect.axis!r}")
        if defect.p < 0:
            raise GeometryError("elongation p must be >= 0")
        if defect.p == 0:
            return holes
        hs = _dislocate(holes.replace(hs), defect.axis, defect.p, [0.0])
    elif isinstance(defect, CoupledDefects):
        r_def = defect.r_def_over_a * a
        if defect.orientation == "x":
            if holes.site != "hole":
                raise GeometryError("x-oriented coupled defects need a lattice centred on a hole")
            sites = [(-a, 0.0), (float(a), 0.0)]
            lines, axis = [-float(a), float(a)], "y"
        elif defect.orientation == "y":
            if holes.site != "pair":
                raise GeometryError("y-oriented coupled defects need a site='pair' lattice")
            h = a * SQRT3 / 2.0
            sites = [(0.0, -h), (0.0, h)]
            lines, axis = [-h, h], "x"
        else:
            raise GeometryError(f"orientation must be 'x' or 'y', got {defect.orientation!r}")
        for x0, y0 in sites:
            idx = _find(holes, x0, y0)
            hs[idx] = dataclasses.replace(hs[idx], r=r_def)
        if defect.p > 0:
            hs = _dislocate(holes.replace(hs), axis, defect.p, lines)
    else:
        raise GeometryError(f"unknown defect type {type(defect).__name__}")

    out = holes.replace(hs)
    check_overlaps(out)
    return out


def build_structure(spec: PhotonicCrystalSpec, defects: Sequence[DefectSpec] = ()) -> HoleSet:
    """Lattice plus all defects, dislocations applied last."""
    holes = build_lattice(spec, site=lattice_site(defects))
    ordered = [d for d in defects if not isinstance(d, FractionalEdgeDislocation)]
    ordered += [d for d in defects if isinstance(d, FractionalEdgeDislocation)]
    for d in ordered:
        holes = apply_defect(holes, d, spec)
    return holes


def _segment(h: Hole):
    return (np.array([h.x - h.ex, h.y - h.ey]), np.array([h.x + h.ex, h.y + h.ey]))


def _segment_distance(p1, q1, p2, q2) -> float:
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    if a <= 1e-15 and e <= 1e-15:
        return float(np.linalg.norm(r))
    if a <= 1e-15:
        s, t = 0.0, np.clip(f / e, 0.0, 1.0)
    else:
        c = d1 @ r
        if e <= 1e-15:
            t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
        else:
            b = d1 @ d2
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-15 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p1 + d1 * s - (p2 + d2 * t)))


def check_overlaps(holes: HoleSet) -> None:
    """Raise :class:`GeometryError` if any two holes intersect."""
    hs = holes.holes
    if len(hs) < 2:
        return
    c = holes.centers()
    reach = np.array([h.r + max(h.ex, h.ey) for h in hs])
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    cand = np.argwhere(np.triu(d < reach[:, None] + reach[None, :], 1))
    for i, j in cand:
        gap = _segment_distance(*_segment(hs[i]), *_segment(hs[j])) - hs[i].r - hs[j].r
        if gap < -1e-9:
            raise GeometryError(
                f"holes at ({hs[i].x:.2f}, {hs[i].y:.2f}) and ({hs[j].x:.2f}, {hs[j].y:.2f}) overlap")


# --- rasterization ------------------------------------------------------------

@dataclass
class PermittivityGrid:
    """Relative permittivity sampled at the integer nodes of the grid.

    ``eps[i, j, k]`` is the volume average of eps over the unit cube centred on
    node (i, j, k), whose physical position is ``(i - cx, j - cy, k - cz)``.
    On an axis flagged in ``mirrors`` the array covers the non-negative half
    only and node 0 lies on the symmetry plane.
    """

    eps: np.ndarray
    center: tuple
    mirrors: tuple
    n_slab: float
    pml: int = 0
    cell: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return self.eps.shape

    @property
    def mirror_z(self) -> bool:
        return bool(self.mirrors[2])

    def coords(self, axis: int) -> np.ndarray:
        return np.arange(self.eps.shape[axis]) - self.center[axis]

    def node_index(self, x: float, y: float, z: float = 0.0) -> tuple:
        return (int(round(x + self.center[0])), int(round(y + self.center[1])), int(round(z + self.center[2])))

    def component_eps(self, periodic=(False, False, False)) -> tuple:
        """eps at the Ex, Ey, Ez sample positions (mean of adjacent nodes).

        The last sample along a non-periodic axis reuses the edge node.
        """
        e = self.eps
        out = []
        for axis in range(3):
            last = 0 if periodic[axis] else e.shape[axis] - 1
            nxt = np.concatenate([np.take(e, np.arange(1, e.shape[axis]), axis=axis),
                                  np.take(e, [last], axis=axis)], axis=axis)
            out.append(0.5 * (e + nxt))
        return tuple(out)


@dataclass(frozen=True)
class DomainLayout:
    """Grid extent around a hole set, in cells."""

    nx: int
    ny: int
    nz: int
    center: tuple
    pml: int
    mirrors: tuple
    z_air: int

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny, self.nz)


def plan_domain(holes: HoleSet, spec: PhotonicCrystalSpec, padding: Optional[float] = None,
                z_air: Optional[float] = None, pml: int = 10, mirrors=(False, False, True),
                max_cells: int = MAX_AXIS_CELLS) -> DomainLayout:
    """Size the grid: holes + padding + PML laterally, slab + air + PML vertically.

    ``padding`` defaults to a/2; ``z_air`` (air above the slab surface) defaults
    to half a wavelength at a/lambda = 0.28 plus four cells, so a flux plane at
    lambda/2 fits inside the non-absorbing region.  Mirrored axes keep only the
    non-negative half.
    """
    if padding is None:
        padding = 0.5 * spec.a
    if z_air is None:
        z_air = 0.5 * spec.a / 0.28 + 4
    hx, hy = holes.extent()
    halves = (int(math.ceil(hx + padding)) + pml,
              int(math.ceil(hy + padding)) + pml,
              int(math.ceil(spec.thickness / 2 + z_air)) + pml)
    dims = [h if m else 2 * h for h, m in zip(halves, mirrors)]
    if max(dims) > max_cells:
        raise GeometryError(f"domain {dims[0]}x{dims[1]}x{dims[2]} exceeds the maximum of {max_cells} cells per axis")
    center = tuple(0 if m else h for h, m in zip(halves, mirrors))
    return DomainLayout(dims[0], dims[1], dims[2], center, pml, tuple(bool(m) for m in mirrors),
                        int(math.ceil(z_air)))


def _in_hole_mask(X, Y, h: Hole) -> np.ndarray:
    dx = np.abs(X - h.x) - h.ex
    dy = np.abs(Y - h.y) - h.ey
    dx = np.maximum(dx, 0.0)
    dy = np.maximum(dy, 0.0)
    return dx * dx + dy * dy <= h.r * h.r


def slab_plane_eps(holes: HoleSet, spec: PhotonicCrystalSpec, xs: np.ndarray, ys: np.ndarray,
                   subsample: int = 2) -> np.ndarray:
    """In-slab permittivity map at nodes ``xs`` x ``ys`` (sub-cell averaged)."""
    offs = (np.arange(subsample) + 0.5) / subsample - 0.5
    eps_slab = spec.n_slab ** 2
    acc = np.zeros((xs.size, ys.size))
    for ox in offs:
        for oy in offs:
            X = (xs + ox)[:, None]
            Y = (ys + oy)[None, :]
            sample = np.full((xs.size, ys.size), eps_slab)
            for h in holes.holes:
                i0 = np.searchsorted(xs + ox, h.x - h.r - h.ex - 1)
                i1 = np.searchsorted(xs + ox, h.x + h.r + h.ex + 1)
                j0 = np.searchsorted(ys + oy, h.y - h.r - h.ey - 1)
                j1 = np.searchsorted(ys + oy, h.y + h.r + h.ey + 1)
                if i1 <= i0 or j1 <= j0:
                    continue
                m = _in_hole_mask(X[i0:i1], Y[:, j0:j1], h)
                fill = 1.0 if h.index is None else h.index ** 2
                sample[i0:i1, j0:j1][m] = fill
            acc += sample
    return acc / subsample ** 2


def slab_profile(zs: np.ndarray, thickness: float, subsample: int = 2) -> np.ndarray:
    """Fraction of each node's cell (along z) that lies inside the slab."""
    offs = (np.arange(subsample) + 0.5) / subsample - 0.5
    inside = np.zeros(zs.size)
    for oz in offs:
        inside += np.abs(zs + oz) <= thickness / 2.0 + 1e-12
    return inside / subsample


def rasterize(holes: HoleSet, spec: PhotonicCrystalSpec, padding: Optional[float] = None,
              layout: Optional[DomainLayout] = None, subsample: int = 2, **layout_kw) -> PermittivityGrid:
    """Sample eps(r) on the simulation grid.

    The unpatterned slab continues through the padding and absorbing layers;
    air fills |z| > d/2.  Each node value is the average of eps over a
    ``subsample``^3 set of points in its cell.
    """
    if layout is None:
        layout = plan_domain(holes, spec, padding=padding, **layout_kw)
    xs = np.arange(layout.nx) - layout.center[0]
    ys = np.arange(layout.ny) - layout.center[1]
    zs = np.arange(layout.nz) - layout.center[2]
    plane = slab_plane_eps(holes, spec, xs.astype(float), ys.astype(float), subsample)
    frac = slab_profile(zs.astype(float), spec.thickness, subsample)
    eps = frac[None, None, :] * plane[:, :, None] + (1.0 - frac[None, None, :])
    return PermittivityGrid(eps=eps, center=layout.center, mirrors=layout.mirrors,
                            n_slab=spec.n_slab, pml=layout.pml,
                            meta={"a": spec.a, "z_air": layout.z_air, "thickness": spec.thickness})


def uniform_grid(shape, eps=1.0, center=None, mirrors=(False, False, False), n_slab=None) -> PermittivityGrid:
    """Grid of constant (or given) permittivity, mainly for solver checks."""
    arr = np.broadcast_to(np.asarray(eps, dtype=float), tuple(shape)).copy()
    if center is None:
        center = tuple(0 if m else n // 2 for n, m in zip(shape, mirrors))
    n = n_slab if n_slab is not None else float(np.sqrt(arr.max()))
    return PermittivityGrid(eps=arr, center=tuple(center), mirrors=tuple(mirrors), n_slab=max(n, 1.0 + 1e-12))


def air_fill_fraction(grid: PermittivityGrid, half_x: float, half_y: float) -> float:
    """Fraction of the slab mid-plane that is air within |x|<half_x, |y|<half_y."""
    xs = grid.coords(0)
    ys = grid.coords(1)
    k0 = grid.center[2]
    m = (np.abs(xs) < half_x)[:, None] & (np.abs(ys) < half_y)[None, :]
    plane = grid.eps[:, :, k0]
    n2 = grid.n_slab ** 2
    return float(((n2 - plane[m]) / (n2 - 1.0)).mean())


# --- export -------------------------------------------------------------------

def format_hole_list(holes: HoleSet) -> str:
    """Plain-text hole list: ``center_x center_y rx ry index_override`` per line."""
    lines = ["# center_x center_y rx ry index_override"]
    for h in holes.holes:
        rx, ry = h.semi_axes
        idx = "-" if h.index is None else f"{h.index:.6g}"
        lines.append(f"{h.x:.6f} {h.y:.6f} {rx:.6f} {ry:.6f} {idx}")
    return "\n".join(lines) + "\n"


def parse_hole_list(text: str, a: int) -> HoleSet:
    holes = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        x, y, rx, ry, idx = line.split()
        x, y, rx, ry = map(float, (x, y, rx, ry))
        r = min(rx, ry)
        holes.append(Hole(x=x, y=y, r=r, ex=rx - r, ey=ry - r,
                          index=None if idx == "-" else float(idx), site=(x, y),
                          is_center=(abs(x) < 1e-9 and abs(y) < 1e-9)))
    return HoleSet(tuple(holes), a)
