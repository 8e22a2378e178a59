"""Command-line front-end: ``phcavity simulate|sweep|bands|farfield|presets``.

Exit codes: 0 success, 2 configuration error, 3 solver instability,
4 analysis failure.  The default output directory is taken from
``PHCAVITY_OUT`` (falling back to ``./phcavity-out``).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import farfield as ff
from . import io as pio
from .analysis.resonances import IllConditionedFit, NoPeakFound
from .bandstructure import BandError, compute_bands, gap_edges
from .config import (PRESETS, SWEEP_PARAMETERS, ConfigError, RunConfig, SweepSettings, format_config, load_config,
                     preset)
from .fdtd.solver import InstabilityError
from .geometry import GeometryError
from .pipeline import AnalysisError, build_solver, run_cavity

log = logging.getLogger("phcavity")

OUT_ENV = "PHCAVITY_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_ANALYSIS = 0, 2, 3, 4

SWEEP_COLUMNS = ("parameter", "value") + pio.MODE_REPORT_COLUMNS + ("Q_farfield", "status", "error")


def _default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "phcavity-out"))


def _resolve(args) -> RunConfig:
    if args.config and getattr(args, "preset", None):
        raise ConfigError("give either a preset name or --config, not both")
    if args.config:
        cfg = load_config(args.config)
    elif getattr(args, "preset", None):
        cfg = preset(args.preset)
    else:
        raise ConfigError("no configuration: pass a preset name or --config PATH")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(args.seed))
    return cfg


def _report_rows(cfg: RunConfig, summary: dict) -> list:
    return [pio.mode_report_row(cfg.structure_id(), cfg.elongation(), summary)]


def _stable_summary(summary: dict) -> dict:
    """Summary without wall-clock entries, so reports are reproducible."""
    return {k: v for k, v in summary.items() if not k.startswith("diag_runtime")}


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return str(v)


def simulate(cfg: RunConfig, out: Path) -> dict:
    """Run one configuration and write its artifacts to ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(format_config(cfg))
    ccfg = cfg.cavity_config()
    o = cfg.outputs
    if o.holes or o.eps_grid:
        holes, grid, _ = build_solver(ccfg)
        if o.holes:
            pio.write_holes(out / "holes.txt", holes)
        if o.eps_grid:
            pio.write_grid(out / "eps.raw", grid.eps, grid.cell)
    res = run_cavity(ccfg, keep_fields=True)
    summary = _stable_summary(res.summary())
    text = pio.csv_text(pio.MODE_REPORT_COLUMNS, _report_rows(cfg, summary))
    far = res.farfield
    if far:
        text += (f"# farfield omega0={2 * math.pi * res.mode.frequency:.10g} W={far['W']:.10g} "
                 f"P={far['P']:.10g} Q_farfield={far['Q']:.10g}\n")
    (out / "mode_report.csv").write_text(text)
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True, default=_json_default) + "\n")
    if o.pattern and far.get("pattern") is not None:
        (out / "pattern.csv").write_text(ff.pattern_csv(far["pattern"]))
    if o.probes:
        for p in res.probes:
            i, j, k = p.index
            (out / f"probe_{p.component}_{i}_{j}_{k}.csv").write_text(pio.probe_csv(p))
    if o.checkpoint:
        pio.save_checkpoint(out / "checkpoint", res.solver)
        if far.get("plane") is not None:
            pio.save_nearfield(out / "nearfield", far["plane"],
                               {"W": far["W"], "omega": 2 * math.pi * res.mode.frequency,
                                "structure_id": cfg.structure_id()})
    snap = res.mode.snapshot
    for item in o.field_slices:
        try:
            axis_name, idx = item.split(":")
            axis = "xyz".index(axis_name.strip())
            index = int(idx)
        except ValueError:
            raise ConfigError(f"bad field slice {item!r}; expected e.g. 'z:0'") from None
        if not 0 <= index < snap.eps.shape[axis]:
            raise ConfigError(f"field slice {item!r} lies outside the stored region")
        pio.write_intensity_slice(out / f"intensity_{axis_name.strip()}{index}.raw", snap, axis, index)
    return summary


def _sweep_point(cfg: RunConfig, name: str, value: float) -> dict:
    row = {"parameter": name, "value": value}
    try:
        c = cfg.with_parameter(name, value).validate()
        res = run_cavity(c.cavity_config(), keep_fields=False)
        s = res.summary()
        row.update(pio.mode_report_row(c.structure_id(), c.elongation(), s))
        row["Q_farfield"] = res.farfield.get("Q", "")
        row["status"] = "ok"
        row["error"] = ""
    except (GeometryError, AnalysisError, InstabilityError, NoPeakFound, IllConditionedFit,
            ff.FarFieldError) as exc:
        row.update({"structure_id": cfg.structure_id(), "status": "failed",
                    "error": f"{type(exc).__name__}: {exc}".replace("\n", " ")})
    return row


def sweep(cfg: RunConfig, name: str, values, out: Path, workers: int = 1) -> list:
    out.mkdir(parents=True, exist_ok=True)
    values = sorted(float(v) for v in values)
    (out / "config.ini").write_text(format_config(cfg))
    if workers > 1 and len(values) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, [cfg] * len(values), [name] * len(values), values))
    else:
        rows = [_sweep_point(cfg, name, v) for v in values]
    rows.sort(key=lambda r: r["value"])
    pio.write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return rows


def bands(cfg: RunConfig, out: Path) -> tuple:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(format_config(cfg))
    b = cfg.bands
    diagram = compute_bands(cfg.spec, bands_per_k=b.bands_per_k, seed=cfg.seed, points_per_edge=b.points_per_edge,
                            run_periods=b.run_periods, z_air=b.z_air_cells, pml=cfg.solver.pml_cells,
                            precision=cfg.solver.precision)
    (out / "bands.csv").write_text(diagram.to_csv())
    gap = gap_edges(diagram)
    line = "gap: none\n" if gap.empty else f"gap: {gap.lower:.6f} {gap.upper:.6f}\n"
    flagged = sum(diagram.flagged)
    if flagged:
        line += f"flagged k points (unresolved neighbouring bands): {flagged}\n"
    (out / "gap.txt").write_text(line)
    return diagram, gap


def reanalyze_farfield(directory: Path, out: Path) -> dict:
    plane, meta = pio.load_nearfield(directory)
    pat = ff.radiated_power(plane)
    out.mkdir(parents=True, exist_ok=True)
    (out / "pattern.csv").write_text(ff.pattern_csv(pat))
    W, omega = meta.get("W"), meta.get("omega")
    q = ff.q_from_radiated_power(W, pat.P, omega) if W and omega else math.nan
    row = {"omega0": omega, "W": W, "P": pat.P, "Q_farfield": q}
    pio.write_csv(out / "farfield.csv", pio.FARFIELD_COLUMNS, [row])
    return row


# --- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phcavity", description="Photonic-crystal slab microcavity toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, with_preset=True):
        if with_preset:
            sp.add_argument("preset", nargs="?", help="named preset (see 'presets list')")
        sp.add_argument("--config", metavar="PATH", help="configuration file")
        sp.add_argument("--out", metavar="DIR", type=Path, help=f"output directory (default ${OUT_ENV})")
        sp.add_argument("--seed", type=int, help="override the configuration seed")
        sp.add_argument("--workers", type=int, default=1, help="parallel runs for sweeps")

    common(sub.add_parser("simulate", help="run one cavity configuration"))
    sw = sub.add_parser("sweep", help="run a parameter sweep")
    common(sw)
    sw.add_argument("--parameter", help="parameter to sweep (default from the configuration)")
    sw.add_argument("--values", help="comma-separated values (default from the configuration)")
    common(sub.add_parser("bands", help="TE-like band diagram of the host lattice"))
    fa = sub.add_parser("farfield", help="re-analyze a saved near-field plane")
    fa.add_argument("directory", type=Path, help="near-field directory written by 'simulate'")
    fa.add_argument("--out", metavar="DIR", type=Path)
    pr = sub.add_parser("presets", help="list named experiments")
    pr.add_argument("action", choices=["list", "show"])
    pr.add_argument("name", nargs="?")
    return p


def _parse_values(text: str) -> list:
    if text is None:
        return None
    items = [v.strip() for v in text.split(",") if v.strip()]
    try:
        return [float(v) for v in items]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers, got {text!r}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "presets":
            if args.action == "list":
                for name, cfg in PRESETS.items():
                    print(f"{name:24s} {cfg.description}")
            else:
                if not args.name:
                    raise ConfigError("'presets show' needs a preset name")
                sys.stdout.write(format_config(preset(args.name)))
            return EXIT_OK
        if args.verb == "farfield":
            out = args.out or args.directory
            row = reanalyze_farfield(args.directory, out)
            print(f"P={row['P']:.6g} Q_farfield={row['Q_farfield']:.6g}")
            return EXIT_OK
        cfg = _resolve(args)
        out = args.out or (_default_out() / cfg.name)
        if args.verb == "simulate":
            s = simulate(cfg, out)
            print(f"a/lambda={s['a_over_lambda']:.4f} Q_total={s['Q_total']:.4g} Q_perp={s['Q_perp']:.4g} "
                  f"Q_par={s['Q_par']:.4g} V={s['V_mode']:.3g} N0={s['N0']:.3g} m0={s['m0']:.3g}")
        elif args.verb == "sweep":
            name = args.parameter or (cfg.sweep.parameter if cfg.sweep else None)
            values = _parse_values(args.values)
            if values is None:
                values = list(cfg.sweep.values) if cfg.sweep else None
            if name is None or values is None:
                raise ConfigError("sweep needs --parameter and --values or a [sweep] section")
            if name not in SWEEP_PARAMETERS:
                raise ConfigError(f"sweep parameter must be one of {', '.join(SWEEP_PARAMETERS)}, got {name!r}")
            cfg = dataclasses.replace(cfg, sweep=SweepSettings(name, tuple(values)))
            rows = sweep(cfg, name, values, out, workers=max(1, args.workers))
            failed = sum(r["status"] != "ok" for r in rows)
            print(f"{len(rows)} points, {failed} failed -> {out / 'sweep.csv'}")
        elif args.verb == "bands":
            _, gap = bands(cfg, out)
            print("gap: none" if gap.empty else f"gap: {gap.lower:.4f} - {gap.upper:.4f}")
        return EXIT_OK
    except (ConfigError, GeometryError, pio.FormatError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"solver instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (AnalysisError, NoPeakFound, IllConditionedFit, ff.FarFieldError, BandError) as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
