"""Command-line experiment runner.

Subcommands::

    d3sr simulate --config C          range-cell cube of the configured scene
    d3sr estimate --config C          sparse spectrum of one cell of a cube file
    d3sr filter   --config C          adaptive filter at the target cell + range profile
    d3sr sweep    --config C          MDV curves, one table for all methods
    d3sr run      --config C          every artifact for every configured method

Exit status: 0 ok, 1 usage, 2 config, 3 numerical failure. The thread
count comes from ``--threads``, else ``D3SR_THREADS``, else the config; it
never changes any output. ``--config`` also accepts a manifest written by
an earlier invocation, which replays that invocation's settings.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .dictionary import DictionaryGrid, build_dictionary, fourier_spectrum
from .errors import ConfigError, D3srError
from .io import (
    atomic_write_text,
    load_cube,
    save_cube,
    save_curves,
    save_filter,
    save_grid_map,
    save_range_profile,
    save_spectrum,
)
from .metrics import adapted_spectrum, mdv_sweep, method_range_profile, output_scr, power_db
from .pipeline import METHODS, SPARSE_METHODS, estimate_spectrum, filter_factory, make_soi, method_rng, run_method
from .scene import synthesize_cube

log = logging.getLogger("d3sr")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
THREADS_ENV = "D3SR_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _method_list(text: str) -> tuple:
    names = tuple(m.strip() for m in text.split(",") if m.strip())
    if not names:
        raise argparse.ArgumentTypeError("empty method list")
    bad = [m for m in names if m not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHODS)}")
    return names


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonnegative(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML experiment config, or a manifest.json to replay")
    common.add_argument("--seed", type=_nonnegative, help="master seed (overrides run.seed)")
    common.add_argument("--out", help="output directory (overrides run.output)")
    common.add_argument("--method", type=_method_list, help="comma-separated methods (overrides run.methods)")
    common.add_argument("--trials", type=_positive, help="Monte Carlo trials per Doppler point")
    common.add_argument("--threads", type=_positive, help=f"worker threads (overrides ${THREADS_ENV})")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="d3sr", description="Direct data domain STAP via sparse representation.")
    p.add_argument("--version", action="version", version=f"d3sr {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="write the range-cell cube")
    e = sub.add_parser("estimate", parents=[common], help="sparse spectrum of one cell of a cube file")
    e.add_argument("--input", help="cube or snapshot file (default: <out>/cube.txt)")
    e.add_argument("--cell", type=_nonnegative, help="range cell (default: the target cell)")
    f = sub.add_parser("filter", parents=[common], help="build and apply each method's filter")
    f.add_argument("--input", help="cube file (default: synthesize from the config)")
    sub.add_parser("sweep", parents=[common], help="MDV curves for all methods in one table")
    sub.add_parser("run", parents=[common], help="full experiment")
    return p


# --- settings resolution ---------------------------------------------------


def _read_manifest(path: Path) -> dict:
    if path.suffix != ".json":
        return {}
    try:
        return json.loads(path.read_text(encoding="utf-8")).get("overrides", {}) or {}
    except (OSError, ValueError, AttributeError):
        return {}  # load_config reports the problem


def resolve(args) -> tuple[ExperimentConfig, int]:
    """Config with manifest and flag overrides applied, plus the thread count."""
    path = Path(args.config)
    cfg = load_config(path)
    over = _read_manifest(path)
    if args.seed is not None:
        over["seed"] = args.seed
    if args.method is not None:
        over["methods"] = list(args.method)
    if args.trials is not None:
        over["trials"] = args.trials
    try:
        if "seed" in over:
            cfg = replace(cfg, seed=int(over["seed"]))
        if "methods" in over:
            methods = tuple(over["methods"])
            if not methods or any(m not in METHODS for m in methods):
                raise ConfigError(f"manifest: bad method list {methods}")
            cfg = replace(cfg, methods=methods)
        if "trials" in over:
            cfg = replace(cfg, metrics=replace(cfg.metrics, trials=int(over["trials"])))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"manifest overrides: {exc}") from exc
    if args.out is not None:
        cfg = replace(cfg, output=args.out)
    args._overrides = {k: over[k] for k in sorted(over)}

    threads = cfg.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV}={env!r} is not an integer") from None
        if threads < 1:
            raise UsageError(f"{THREADS_ENV} must be >= 1")
    if args.threads is not None:
        threads = args.threads
    return cfg, threads


def _versions() -> dict:
    out = {"d3sr": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "cvxpy"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, name: str, cfg: ExperimentConfig, command: str, overrides: dict, files, extra=None) -> Path:
    """Everything needed to replay ``command``: config text, overrides and output hashes (no timestamps)."""
    doc = {
        "command": command,
        "config_sha256": cfg.digest(),
        "config_text": cfg.source_text,
        "overrides": overrides,
        "seed": cfg.seed,
        "methods": list(cfg.methods),
        "trials": cfg.metrics.trials,
        "versions": _versions(),
        "files": {str(p.relative_to(out)): _sha256(p) for p in sorted(files)},
    }
    doc.update(extra or {})
    return atomic_write_text(out / name, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- shared pieces -------------------------------------------------------------


def _context(cfg: ExperimentConfig):
    grid = DictionaryGrid.for_radar(cfg.radar, *cfg.rho)
    return grid, build_dictionary(cfg.radar, grid)


def _header(cfg: ExperimentConfig, **kw) -> dict:
    h = {"seed": cfg.seed, "config_sha256": cfg.digest()}
    h.update(kw)
    return h


def _cube(cfg: ExperimentConfig):
    return synthesize_cube(cfg.radar, cfg.scene, cfg.scene.num_range_cells, cfg.seed)


def _load_cube(path) -> list:
    try:
        return load_cube(path)[1]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read cube {path}: {exc}") from exc


def _spectrum_map(grid, powers, noise_power) -> np.ndarray:
    """Flat Doppler-major powers -> (n_spatial, n_doppler) dB map."""
    return power_db(np.asarray(powers).reshape(grid.n_doppler, grid.n_spatial).T, noise_power)


def input_spectrum_map(cfg: ExperimentConfig, dictionary, x) -> np.ndarray:
    """Matched-filter (Fourier) power, 0 dB = the noise floor of a single atom."""
    f = fourier_spectrum(dictionary, x)
    return _spectrum_map(dictionary.grid, np.abs(f) ** 2 / cfg.radar.nm, cfg.scene.noise_power)


def _with_context(exc: D3srError, method: str, where: str) -> D3srError:
    exc.context = f"{method} at {where}"
    return exc


# --- subcommands -----------------------------------------------------------------


def cmd_simulate(cfg, threads, args) -> list:
    out = Path(cfg.output)
    path = save_cube(out / "cube.txt", _cube(cfg), _header(cfg, num_range_cells=cfg.scene.num_range_cells))
    print(f"wrote {path}")
    return [path]


def cmd_estimate(cfg, threads, args) -> list:
    out = Path(cfg.output)
    methods = [m for m in cfg.methods if m in SPARSE_METHODS]
    if not methods:
        raise UsageError("estimate needs a sparse method (d3sr-focuss or d3sr-l1)")
    if args.method is not None and len(methods) != len(cfg.methods):
        raise UsageError("estimate only runs sparse methods")
    cube = _load_cube(args.input or out / "cube.txt")
    cell = cfg.scene.target.range_cell if args.cell is None else args.cell
    snaps = {s.range_cell: s for s in cube}
    if cell not in snaps:
        raise UsageError(f"range cell {cell} is not in the input")
    grid, dictionary = _context(cfg)
    files = []
    for m in methods:
        spec, ok = estimate_spectrum(m, cfg.radar, snaps[cell].data, dictionary, cfg.settings, method_rng(cfg.seed, cell), cfg.scene.noise_power)
        h = _header(cfg, method=m, range_cell=cell, converged=ok)
        files.append(save_spectrum(out / m / "spectrum.txt", spec, grid, h))
        files.append(save_grid_map(out / m / "estimated_spectrum.txt", "estimated_spectrum", grid, _spectrum_map(grid, spec.power(), cfg.scene.noise_power), h))
        print(f"{m}: {spec.support.size} atoms, residual {spec.residual_norm:.4g}, converged={ok}")
    return files


def cmd_filter(cfg, threads, args) -> list:
    out = Path(cfg.output)
    cube = _load_cube(args.input) if args.input else _cube(cfg)
    tcell = cfg.scene.target.range_cell
    snaps = {s.range_cell: s for s in cube}
    if tcell not in snaps:
        raise UsageError(f"target cell {tcell} is not in the input")
    grid, dictionary = _context(cfg)
    soi = make_soi(cfg.radar, cfg.scene, cfg.settings)
    files = []
    for m in cfg.methods:
        try:
            res = run_method(m, cfg.radar, cfg.scene, snaps[tcell], soi, dictionary, cfg.settings, method_rng(cfg.seed, tcell))
            profile = method_range_profile(m, cfg.radar, cfg.scene, cube, soi, dictionary, cfg.settings, cfg.seed, threads)
        except D3srError as exc:
            raise _with_context(exc, m, f"range cell {tcell}")
        h = _header(cfg, method=m, range_cell=tcell, converged=res.converged)
        files.append(save_filter(out / m / "filter.txt", res.filter, h))
        files.append(save_range_profile(out / m / "range_profile.txt", profile, h))
        scr = output_scr(res.filter, snaps[tcell], cfg.radar)
        print(f"{m}: output SCR {scr.scr_out:.2f} dB at cell {tcell}")
    return files


def _sweep(cfg, method, dictionary, threads):
    return mdv_sweep(
        cfg.radar, cfg.scene, method, cfg.metrics.doppler_axis(), cfg.metrics.trials,
        cfg.seed, dictionary, cfg.settings, threads,
    )


def _report(curve):
    for f, scr, ok, bad in curve.rows():
        print(f"  {curve.method:12s} fd={f:+.4f}  SCR={scr:8.2f} dB  trials={ok}  failures={bad}")


def cmd_sweep(cfg, threads, args) -> list:
    out = Path(cfg.output)
    _, dictionary = _context(cfg)
    curves = [_sweep(cfg, m, dictionary, threads) for m in cfg.methods]
    for c in curves:
        _report(c)
    return [save_curves(out / "mdv.txt", curves, _header(cfg, trials=cfg.metrics.trials))]


def cmd_run(cfg, threads, args) -> list:
    out = Path(cfg.output)
    cube = _cube(cfg)
    tcell = cfg.scene.target.range_cell
    snap = cube[tcell]
    grid, dictionary = _context(cfg)
    soi = make_soi(cfg.radar, cfg.scene, cfg.settings)
    noise = cfg.scene.noise_power
    input_map = input_spectrum_map(cfg, dictionary, snap.data)
    files = []
    for m in cfg.methods:
        d = out / m
        h = _header(cfg, method=m, range_cell=tcell)
        files.append(save_grid_map(d / "input_spectrum.txt", "input_spectrum", grid, input_map, h))
        try:
            make, spec = filter_factory(m, cfg.radar, cfg.scene, snap, dictionary, cfg.settings, method_rng(cfg.seed, tcell))
            if spec is not None:
                files.append(save_grid_map(d / "estimated_spectrum.txt", "estimated_spectrum", grid, _spectrum_map(grid, spec.power(), noise), h))
                files.append(save_spectrum(d / "spectrum.txt", spec, grid, h))
            files.append(save_grid_map(d / "adapted_spectrum.txt", "adapted_spectrum", grid, adapted_spectrum(snap, grid, make, cfg.radar, noise), h))
            profile = method_range_profile(m, cfg.radar, cfg.scene, cube, soi, dictionary, cfg.settings, cfg.seed, threads)
        except D3srError as exc:
            raise _with_context(exc, m, f"range cell {tcell}")
        files.append(save_range_profile(d / "range_profile.txt", profile, h))
        curve = _sweep(cfg, m, dictionary, threads)
        files.append(save_curves(d / "mdv.txt", [curve], dict(h, trials=cfg.metrics.trials)))
        others = np.delete(profile, tcell)
        print(f"{m}: cell {tcell} at {profile[tcell]:.2f} dB, strongest other cell {others.max():.2f} dB")
        _report(curve)
    return files


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "filter": cmd_filter, "sweep": cmd_sweep, "run": cmd_run}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, threads = resolve(args)
        files = COMMANDS[args.command](cfg, threads, args)
        out = Path(cfg.output)
        extra = {}
        if getattr(args, "input", None):
            extra["input_sha256"] = _sha256(Path(args.input))
        if getattr(args, "cell", None) is not None:
            extra["cell"] = args.cell
        name = "manifest.json" if args.command == "run" else f"manifest-{args.command}.json"
        write_manifest(out, name, cfg, args.command, args._overrides, files, extra)
    except UsageError as exc:
        print(f"d3sr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"d3sr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except D3srError as exc:
        where = getattr(exc, "context", "")
        print(f"d3sr: numerical failure{' in ' + where if where else ''}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
