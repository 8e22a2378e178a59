"""File formats: raw grids, hole lists, checkpoints, probe and report CSVs.

Raw grid format: one ASCII header line ``nx ny nz cell`` followed by the
values as little-endian float32 in row-major (C) order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import HoleSet, format_hole_list, parse_hole_list

MODE_REPORT_COLUMNS = ("structure_id", "p", "a_over_lambda", "Q_perp", "Q_par", "Q_total",
                       "V_mode_half_lambda3", "g0", "N0", "m0")
FARFIELD_COLUMNS = ("omega0", "W", "P", "Q_farfield")
PROBE_COLUMNS = ("step", "value")


class FormatError(ValueError):
    pass


# --- raw grids ------------------------------------------------------------------

def write_grid(path, values: np.ndarray, cell: float = 1.0) -> None:
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        raise FormatError("raw grids hold real values; split complex data first")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise FormatError(f"expected a 2D or 3D array, got {arr.ndim}D")
    nx, ny, nz = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"{nx} {ny} {nz} {cell:.9g}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_grid(path):
    """Returns (array, cell)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 4:
            raise FormatError(f"{path}: bad grid header {header!r}")
        nx, ny, nz = (int(v) for v in header[:3])
        cell = float(header[3])
        body = fh.read()
    if len(body) != 4 * nx * ny * nz:
        raise FormatError(f"{path}: expected {4 * nx * ny * nz} bytes of data, found {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(nx, ny, nz).copy(), cell


# --- hole lists -------------------------------------------------------------------

def write_holes(path, holes: HoleSet) -> None:
    Path(path).write_text(format_hole_list(holes))


def read_holes(path, a: int) -> HoleSet:
    return parse_hole_list(Path(path).read_text(), a)


# --- checkpoints --------------------------------------------------------------------

_FIELDS = ("ex", "ey", "ez", "hx", "hy", "hz")


def save_checkpoint(directory, solver) -> Path:
    """One raw grid per stored field array (ghost layers included) plus meta.json.

    Complex (Bloch) fields are split into ``<name>.re`` / ``<name>.im`` files.
    Values are stored as float32, so a float64 run restarts with rounded fields.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    st = solver.state
    cplx = solver.dtype.kind == "c"
    for name in _FIELDS:
        arr = getattr(st, name)
        if cplx:
            write_grid(d / f"{name}.re.raw", arr.real)
            write_grid(d / f"{name}.im.raw", arr.imag)
        else:
            write_grid(d / f"{name}.raw", arr)
    meta = {"step": st.step, "dt": st.dt, "shape": list(solver.shape), "complex": cplx}
    (d / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return d


def load_checkpoint(directory, solver) -> None:
    """Restore a checkpoint written by :func:`save_checkpoint` into ``solver``."""
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    if tuple(meta["shape"]) != tuple(solver.shape):
        raise FormatError(f"checkpoint grid {meta['shape']} does not match solver grid {list(solver.shape)}")
    if not math.isclose(meta["dt"], solver.dt):
        raise FormatError("checkpoint time step differs from the solver's")
    st = solver.state
    for name in _FIELDS:
        if meta["complex"]:
            re, _ = read_grid(d / f"{name}.re.raw")
            im, _ = read_grid(d / f"{name}.im.raw")
            arr = re + 1j * im
        else:
            arr, _ = read_grid(d / f"{name}.raw")
        getattr(st, name)[...] = arr
    st.step = int(meta["step"])


# --- CSV ----------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    Path(path).write_text(csv_text(columns, rows))


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def probe_csv(probe) -> str:
    return csv_text(PROBE_COLUMNS, ({"step": s, "value": float(np.real(v))}
                                    for s, v in zip(probe.steps, probe.values)))


def mode_report_row(structure_id: str, p: float, summary: dict) -> dict:
    """One mode-report row from a :meth:`CavityResult.summary` dict."""
    return {"structure_id": structure_id, "p": p, "a_over_lambda": summary["a_over_lambda"],
            "Q_perp": summary["Q_perp"], "Q_par": summary["Q_par"], "Q_total": summary["Q_total"],
            "V_mode_half_lambda3": summary["V_mode"], "g0": summary["g0"], "N0": summary["N0"],
            "m0": summary["m0"]}


# --- field slices -----------------------------------------------------------------------

def intensity_slice(snapshot, axis: int, index: int) -> np.ndarray:
    """eps |E|^2 on the node plane ``index`` normal to ``axis`` of a mode snapshot."""
    dens = snapshot.eps * snapshot.node_intensity()
    return np.take(dens, index, axis=axis)


def write_intensity_slice(path, snapshot, axis: int, index: int) -> None:
    sl = intensity_slice(snapshot, axis, index)
    write_grid(path, np.expand_dims(sl, axis))


# --- near-field planes ------------------------------------------------------------------

def save_nearfield(directory, plane, extra: dict = None) -> Path:
    """Tangential phasors of a near-field plane (re/im raw grids) plus nearfield.json."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {"z": plane.z, "wavelength": plane.wavelength, "spacing": plane.spacing, "components": {}}
    for name, comp in plane.components().items():
        write_grid(d / f"{name}.re.raw", comp.values.real, plane.spacing)
        write_grid(d / f"{name}.im.raw", comp.values.imag, plane.spacing)
        meta["components"][name] = {"x0": float(comp.xs[0]), "y0": float(comp.ys[0])}
    meta.update(extra or {})
    (d / "nearfield.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return d


def load_nearfield(directory):
    """Returns (NearFieldPlane, metadata dict)."""
    from .farfield import NearFieldPlane, PlaneComponent

    d = Path(directory)
    try:
        meta = json.loads((d / "nearfield.json").read_text())
    except OSError as exc:
        raise FormatError(f"{d}: no near-field data ({exc.strerror})") from exc
    comps = {}
    for name, c in meta["components"].items():
        re, _ = read_grid(d / f"{name}.re.raw")
        im, _ = read_grid(d / f"{name}.im.raw")
        vals = (re + 1j * im)[:, :, 0].astype(complex)
        xs = c["x0"] + meta["spacing"] * np.arange(vals.shape[0])
        ys = c["y0"] + meta["spacing"] * np.arange(vals.shape[1])
        comps[name] = PlaneComponent(vals, xs, ys)
    plane = NearFieldPlane(meta["z"], meta["wavelength"], comps["ex"], comps["ey"], comps["hx"], comps["hy"],
                           meta["spacing"])
    return plane, meta
