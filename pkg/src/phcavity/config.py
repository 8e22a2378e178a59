"""Run configurations: INI-style text format and the named experiment presets.

Lengths in [structure] are ratios to the lattice constant ``a`` (grid cells);
physical quantities carry their unit in the key name.  Example::

    [run]
    name = table1-row2
    seed = 0
    mode = x

    [structure]
    a = 20
    r_over_a = 0.275
    d_over_a = 0.75

    [defect.1]
    type = radius_change
    r_def_over_a = 0.2
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .analysis.cqed import GAMMA_PERP_CS, LAMBDA_CS_D2
from .geometry import (CoupledDefects, FourHoleTuning, FractionalEdgeDislocation, GeometryError, IndexChange,
                       PhotonicCrystalSpec, RadiusChange, validate_defect)
from .pipeline import CavityConfig

SWEEP_PARAMETERS = ("p", "r_def_over_a", "r_over_a", "d_over_a", "num_layers", "n_defect")


class ConfigError(ValueError):
    """Invalid configuration text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class SolverSettings:
    courant: float = 0.5
    precision: str = "float32"
    pml_cells: int = 10
    padding_cells: Optional[float] = None
    z_air_cells: Optional[float] = None
    symmetry: bool = True
    pass1_periods: float = 80.0
    settle_periods: float = 20.0
    measure_periods: Optional[float] = None
    source_fwidth: float = 0.04


@dataclass(frozen=True)
class AnalysisSettings:
    window_min_a_over_lambda: float = 0.24
    window_max_a_over_lambda: float = 0.34
    atom_x_cells: Optional[float] = None
    atom_y_cells: Optional[float] = None
    atom_z_cells: Optional[float] = None
    gamma_perp_rad_per_s: float = GAMMA_PERP_CS
    wavelength_m: float = LAMBDA_CS_D2
    farfield: bool = True
    sqrt_eps: bool = False


@dataclass(frozen=True)
class BandSettings:
    points_per_edge: int = 8
    bands_per_k: int = 4
    run_periods: float = 60.0
    z_air_cells: Optional[float] = None


@dataclass(frozen=True)
class OutputSettings:
    holes: bool = True
    eps_grid: bool = False
    field_slices: tuple = ()          # e.g. ("z:0", "y:0")
    pattern: bool = False
    probes: bool = False
    checkpoint: bool = False


@dataclass(frozen=True)
class SweepSettings:
    parameter: str = "p"
    values: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    spec: PhotonicCrystalSpec
    defects: tuple = ()
    name: str = "run"
    mode: str = "x"
    seed: int = 0
    solver: SolverSettings = field(default_factory=SolverSettings)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    bands: BandSettings = field(default_factory=BandSettings)
    outputs: OutputSettings = field(default_factory=OutputSettings)
    sweep: Optional[SweepSettings] = None
    description: str = ""

    def problems(self) -> list:
        """(section, key, message) for every violated setting invariant."""
        out = []
        for d in self.defects:
            try:
                validate_defect(d, self.spec)
            except GeometryError as exc:
                out.append(("defect", None, str(exc)))
        if self.mode not in ("x", "y"):
            out.append(("run", "mode", f"mode must be 'x' or 'y', got {self.mode!r}"))
        s = self.solver
        if not 0.0 < s.courant < 1.0 / math.sqrt(3.0):
            out.append(("solver", "courant", f"courant must lie in (0, 1/sqrt(3)), got {s.courant}"))
        if s.precision not in ("float32", "float64"):
            out.append(("solver", "precision", f"precision must be float32 or float64, got {s.precision!r}"))
        if s.pml_cells < 4:
            out.append(("solver", "pml_cells", f"pml_cells must be >= 4, got {s.pml_cells}"))
        an = self.analysis
        if not 0.0 < an.window_min_a_over_lambda < an.window_max_a_over_lambda:
            out.append(("analysis", "window_min_a_over_lambda", "frequency window must satisfy 0 < min < max"))
        if an.gamma_perp_rad_per_s <= 0 or an.wavelength_m <= 0:
            out.append(("analysis", "wavelength_m", "wavelength and decay rate must be positive"))
        if self.bands.points_per_edge < 1 or self.bands.bands_per_k < 1:
            out.append(("bands", "points_per_edge", "points_per_edge and bands_per_k must be >= 1"))
        if self.sweep is not None and self.sweep.parameter not in SWEEP_PARAMETERS:
            out.append(("sweep", "parameter", f"sweep parameter must be one of {', '.join(SWEEP_PARAMETERS)}, "
                                              f"got {self.sweep.parameter!r}"))
        return out

    def validate(self) -> "RunConfig":
        probs = self.problems()
        if probs:
            raise GeometryError(probs[0][2])
        return self

    def cavity_config(self) -> CavityConfig:
        s, an = self.solver, self.analysis
        atom = None
        if an.atom_x_cells is not None or an.atom_y_cells is not None or an.atom_z_cells is not None:
            atom = (an.atom_x_cells or 0.0, an.atom_y_cells or 0.0, an.atom_z_cells or 0.0)
        return CavityConfig(spec=self.spec, defects=tuple(self.defects), mode=self.mode,
                            window=(an.window_min_a_over_lambda, an.window_max_a_over_lambda),
                            courant=s.courant, precision=s.precision, pml=s.pml_cells, padding=s.padding_cells,
                            z_air=s.z_air_cells, symmetry=s.symmetry, pass1_periods=s.pass1_periods,
                            settle_periods=s.settle_periods, measure_periods=s.measure_periods,
                            source_fwidth=s.source_fwidth, farfield=an.farfield, atom=atom,
                            gamma_perp=an.gamma_perp_rad_per_s, wavelength=an.wavelength_m,
                            sqrt_eps=an.sqrt_eps)

    def structure_id(self) -> str:
        return self.name

    def elongation(self) -> float:
        for d in self.defects:
            if isinstance(d, (FractionalEdgeDislocation, CoupledDefects)):
                return float(d.p)
        return 0.0

    def with_parameter(self, name: str, value) -> "RunConfig":
        """Copy with one sweep parameter set (see SWEEP_PARAMETERS)."""
        if name in ("r_over_a", "d_over_a"):
            return dataclasses.replace(self, spec=dataclasses.replace(self.spec, **{name: float(value)}))
        if name == "num_layers":
            if float(value) != int(value):
                raise GeometryError(f"num_layers must be an integer, got {value}")
            return dataclasses.replace(self, spec=dataclasses.replace(self.spec, num_layers=int(value)))
        types = {"p": (FractionalEdgeDislocation, CoupledDefects), "r_def_over_a": (RadiusChange, CoupledDefects),
                 "n_defect": (IndexChange,)}.get(name)
        if types is None:
            raise GeometryError(f"unknown sweep parameter {name!r}")
        out, hit = [], False
        for d in self.defects:
            if isinstance(d, types):
                d = dataclasses.replace(d, **{name: float(value)})
                hit = True
            out.append(d)
        if not hit:
            if name == "p":
                out.append(FractionalEdgeDislocation("x" if self.mode == "x" else "y", float(value)))
            else:
                raise GeometryError(f"configuration has no defect carrying {name!r}")
        return dataclasses.replace(self, defects=tuple(out))


# --- text format -----------------------------------------------------------------

_DEFECT_TYPES = {
    "index_change": (IndexChange, {"n_defect": float}),
    "radius_change": (RadiusChange, {"r_def_over_a": float}),
    "dislocation": (FractionalEdgeDislocation, {"axis": str, "p": float}),
    "four_hole": (FourHoleTuning, {"r2_over_a": float, "r1_over_a": float}),
    "coupled": (CoupledDefects, {"orientation": str, "r_def_over_a": float, "p": float}),
}
_DEFECT_NAMES = {cls: name for name, (cls, _) in _DEFECT_TYPES.items()}

_SECTIONS = {"solver": SolverSettings, "analysis": AnalysisSettings, "bands": BandSettings,
             "outputs": OutputSettings}


def _key_lines(text: str) -> dict:
    """Map (section, key) and section names to 1-based line numbers."""
    out = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), no)
    return out


def _convert(kind, text: str):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int:
        v = float(text)
        if v != int(v):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(v)
    if kind is float:
        return float(text)
    if kind is tuple:
        return tuple(p.strip() for p in text.split(",") if p.strip())
    return text


def _field_kinds(cls) -> dict:
    hints = {}
    for f in dataclasses.fields(cls):
        t = str(f.type)
        if "bool" in t:
            hints[f.name] = bool
        elif "int" in t:
            hints[f.name] = int
        elif "float" in t:
            hints[f.name] = float
        elif "tuple" in t:
            hints[f.name] = tuple
        else:
            hints[f.name] = str
    return hints


def _optional(f) -> bool:
    return "Optional" in str(f.type)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse configuration text; errors carry the offending line number."""
    lines = _key_lines(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source) from exc

    def fail(msg, section, key=None):
        raise ConfigError(msg, lines.get((section, key)) or lines.get((section, None)), source)

    def read_section(name, cls, required=()):
        kinds = _field_kinds(cls)
        vals = {}
        if not cp.has_section(name):
            if required:
                fail(f"missing section [{name}]", name)
            return vals
        for key, raw in cp.items(name):
            if key not in kinds:
                fail(f"unknown key {key!r} in [{name}]", name, key)
            f = next(f for f in dataclasses.fields(cls) if f.name == key)
            if _optional(f) and raw.strip().lower() in ("", "none", "auto"):
                vals[key] = None
                continue
            try:
                vals[key] = _convert(kinds[key], raw)
            except ValueError as exc:
                fail(f"[{name}] {key}: {exc}", name, key)
        for key in required:
            if key not in vals:
                fail(f"missing key {key!r} in [{name}]", name)
        return vals

    known = {"run", "structure", "sweep"} | set(_SECTIONS)
    for sec in cp.sections():
        if sec not in known and not sec.startswith("defect."):
            fail(f"unknown section [{sec}]", sec)

    st = read_section("structure", _StructureFields, required=("a", "r_over_a", "d_over_a"))
    try:
        spec = PhotonicCrystalSpec(**st)
    except (GeometryError, TypeError) as exc:
        fail(str(exc), "structure")

    run = read_section("run", _RunFields)
    defects = []
    for sec in sorted((s for s in cp.sections() if s.startswith("defect.")), key=_defect_order):
        if not cp.has_option(sec, "type"):
            fail("defect section needs a 'type' key", sec)
        kind = cp.get(sec, "type").strip()
        if kind not in _DEFECT_TYPES:
            fail(f"unknown defect type {kind!r} (expected one of {', '.join(_DEFECT_TYPES)})", sec, "type")
        cls, kinds = _DEFECT_TYPES[kind]
        args = {}
        for key, raw in cp.items(sec):
            if key == "type":
                continue
            if key not in kinds:
                fail(f"unknown key {key!r} for defect type {kind}", sec, key)
            try:
                args[key] = _convert(kinds[key], raw)
            except ValueError as exc:
                fail(f"[{sec}] {key}: {exc}", sec, key)
        try:
            d = cls(**args)
        except TypeError as exc:
            fail(f"defect {kind}: {exc}", sec)
        try:
            validate_defect(d, spec)
        except GeometryError as exc:
            bad = next((k for k in args if k in str(exc)), None)
            fail(str(exc), sec, bad)
        defects.append(d)

    settings = {}
    for name, cls in _SECTIONS.items():
        vals = read_section(name, cls)
        try:
            settings[name] = cls(**vals)
        except TypeError as exc:
            fail(str(exc), name)
    sweep = None
    if cp.has_section("sweep"):
        sv = read_section("sweep", _SweepFields, required=("parameter",))
        vals = sv.get("values", ())
        try:
            values = tuple(float(v) for v in vals)
        except ValueError:
            fail(f"sweep values must be numbers, got {', '.join(vals)}", "sweep", "values")
        if sv["parameter"] not in SWEEP_PARAMETERS:
            fail(f"sweep parameter must be one of {', '.join(SWEEP_PARAMETERS)}", "sweep", "parameter")
        sweep = SweepSettings(sv["parameter"], values)
    cfg = RunConfig(spec=spec, defects=tuple(defects), sweep=sweep, **run, **settings)
    probs = cfg.problems()
    if probs:
        section, key, msg = probs[0]
        fail(msg, section, key)
    return cfg


def _defect_order(name: str):
    tail = name.split(".", 1)[1]
    return (0, int(tail), "") if tail.isdigit() else (1, 0, tail)


@dataclass(frozen=True)
class _StructureFields:
    a: int
    r_over_a: float
    d_over_a: float
    n_slab: float = 3.4
    num_layers: int = 5


@dataclass(frozen=True)
class _RunFields:
    name: str = "run"
    mode: str = "x"
    seed: int = 0
    description: str = ""


@dataclass(frozen=True)
class _SweepFields:
    parameter: str = "p"
    values: tuple = ()


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) if not isinstance(x, str) else x for x in v)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    """Text form of ``cfg``; ``parse_config(format_config(c)) == c``."""
    out = ["[run]", f"name = {cfg.name}", f"mode = {cfg.mode}", f"seed = {cfg.seed}"]
    if cfg.description:
        out.append(f"description = {cfg.description}")
    out += ["", "[structure]"]
    for f in dataclasses.fields(PhotonicCrystalSpec):
        out.append(f"{f.name} = {_fmt(getattr(cfg.spec, f.name))}")
    for i, d in enumerate(cfg.defects, 1):
        out += ["", f"[defect.{i}]", f"type = {_DEFECT_NAMES[type(d)]}"]
        for f in dataclasses.fields(d):
            out.append(f"{f.name} = {_fmt(getattr(d, f.name))}")
    for name in _SECTIONS:
        obj = getattr(cfg, name)
        out += ["", f"[{name}]"]
        for f in dataclasses.fields(obj):
            out.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
    if cfg.sweep is not None:
        out += ["", "[sweep]", f"parameter = {cfg.sweep.parameter}", f"values = {_fmt(cfg.sweep.values)}"]
    return "\n".join(out) + "\n"


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", None, str(p)) from exc
    return parse_config(text, source=str(p))


# --- presets ---------------------------------------------------------------------

def _table1(r, rdef, a=20):
    return RunConfig(PhotonicCrystalSpec(a, r, 0.75), (RadiusChange(rdef),), mode="x")


def _presets() -> dict:
    legacy = PhotonicCrystalSpec(15, 0.3, 0.6)
    host = PhotonicCrystalSpec(20, 0.275, 0.75)
    P = {}
    rows = [(0.275, 0.15, "a/lambda 0.286, Q_par 778, Q_perp 920"),
            (0.275, 0.2, "a/lambda 0.297, Q_par 470, Q_perp 2078"),
            (0.25, 0.15, "a/lambda 0.277, Q_par 230, Q_perp 1840"),
            (0.25, 0.2, "a/lambda 0.284, Q_par 116, Q_perp 3190")]
    for i, (r, rdef, ref) in enumerate(rows, 1):
        P[f"table1-row{i}"] = dataclasses.replace(
            _table1(r, rdef), name=f"table1-row{i}",
            description=f"reduced-radius single defect, x-dipole; reference {ref}")
    P["fig3-legacy"] = RunConfig(legacy, (IndexChange(2.4), FractionalEdgeDislocation("x", 1.0)), mode="x",
                                 name="fig3-legacy",
                                 description="index-2.4 defect with the one-point elongation left by mirror planes")
    P["fig4"] = RunConfig(legacy, (IndexChange(2.4), FractionalEdgeDislocation("x", 0.0)), mode="x", name="fig4",
                          sweep=SweepSettings("p", (0.0, 1.0, 2.0, 3.0)),
                          description="index-2.4 defect, Q and a/lambda versus elongation p")
    P["fig5"] = RunConfig(legacy, (IndexChange(2.4), FractionalEdgeDislocation("x", 3.0)), mode="x", name="fig5",
                          sweep=SweepSettings("num_layers", (2.0, 3.0, 4.0, 5.0, 6.0)),
                          description="index-2.4 defect with p = 3, Q versus number of layers")
    P["fig15"] = dataclasses.replace(P["fig4"], name="fig15",
                                     analysis=AnalysisSettings(farfield=True),
                                     outputs=OutputSettings(pattern=True),
                                     description="far-field Q against flux Q_perp across the p sweep")
    P["fig6"] = RunConfig(host, (), name="fig6", description="TE-like band diagram of the host lattice")
    P["unpatterned"] = RunConfig(PhotonicCrystalSpec(20, 0.001, 0.75), (), name="unpatterned",
                                 description="slab without holes (vanishing radius); no band gap")
    P["dislocated-defect"] = RunConfig(host, (RadiusChange(0.2), FractionalEdgeDislocation("x", 2.0)), mode="x",
                                       name="dislocated-defect",
                                       description="reduced-radius defect with x-axis elongation, x-dipole")
    P["dislocated-defect-sweep"] = dataclasses.replace(
        P["dislocated-defect"], name="dislocated-defect-sweep", sweep=SweepSettings("p", (0.0, 1.0, 2.0, 3.0, 4.0)),
        description="N0 and m0 versus elongation p for the reduced-radius defect")
    P["four-hole"] = RunConfig(host, (FourHoleTuning(0.2, 0.225),), mode="y", name="four-hole",
                               description="four tuned neighbours, y-dipole; reference a/lambda 0.289, Q_perp 4890")
    P["four-hole-p2"] = RunConfig(host, (FourHoleTuning(0.2, 0.225), FractionalEdgeDislocation("y", 2.0)), mode="y",
                                  name="four-hole-p2",
                                  description="four tuned neighbours plus y-axis elongation p = 2, y-dipole")
    P["fig11"] = dataclasses.replace(P["four-hole-p2"], name="fig11",
                                     sweep=SweepSettings("p", (0.0, 1.0, 2.0, 3.0, 4.0)),
                                     description="N0 versus elongation p for the four-hole design")
    P["coupled-x"] = RunConfig(host, (CoupledDefects("x", 0.2, 2.0),), mode="y", name="coupled-x",
                               description="two defects along x, columns elongated along x; "
                                           "reference a/lambda 0.29, Q_perp 6100, V 0.19")
    P["coupled-y"] = RunConfig(host, (CoupledDefects("y", 0.2, 2.0),), mode="x", name="coupled-y",
                               description="two defects along y, rows elongated along y; "
                                           "reference a/lambda 0.288, Q_perp 12120, V 0.14")
    return P


PRESETS = _presets()


def preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; see 'presets list'") from None
