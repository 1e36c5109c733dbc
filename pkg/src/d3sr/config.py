"""Experiment configuration files.

Configs are TOML documents (see ``configs/sidelook.cfg`` for an annotated
example). Angles are written in degrees and converted to radians here;
every other quantity keeps the units of the dataclass it feeds. Unknown
keys are rejected so that typos fail loudly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli

from .errors import ConfigError
from .geometry import RadarConfig
from .pipeline import METHODS, MethodSettings
from .scene import ClutterScene, Interferer, Target
from .solvers import FocussOptions


@dataclass(frozen=True)
class MetricsConfig:
    """Sweep and profile settings.

    With ``dopplers`` empty, the sweep uses ``doppler_points`` cell-centred
    values ``-0.5 + (k + 0.5) / doppler_points``, which stay clear of the
    +-0.5 wrap where the SOI guard window is cut by the grid edge.
    """

    doppler_points: int = 15
    dopplers: tuple = ()
    trials: int = 20

    def doppler_axis(self) -> np.ndarray:
        if self.dopplers:
            return np.asarray(self.dopplers, dtype=float)
        k = np.arange(self.doppler_points)
        return -0.5 + (k + 0.5) / self.doppler_points


@dataclass(frozen=True)
class ExperimentConfig:
    radar: RadarConfig
    scene: ClutterScene
    rho: tuple = (6, 6)
    settings: MethodSettings = field(default_factory=MethodSettings)
    methods: tuple = ("d3sr-focuss", "d3ls", "lsmi", "none")
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    seed: int = 0
    output: str = "out"
    threads: int = 1
    source_text: str = field(default="", compare=False, repr=False)

    def digest(self) -> str:
        return hashlib.sha256(self.source_text.encode("utf-8")).hexdigest()


# --- parsing helpers ----------------------------------------------------------


def _take(table: dict, where: str, spec: dict) -> dict:
    """Pull typed keys out of ``table``; ``spec`` maps key -> (type, default). Rejects leftovers."""
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    unknown = sorted(set(table) - set(spec))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    out = {}
    for key, (kind, default) in spec.items():
        name = f"{where}.{key}" if where else key
        if key not in table:
            if default is _REQUIRED:
                raise ConfigError(f"{name}: required")
            out[key] = default
            continue
        out[key] = _coerce(table[key], kind, name)
    return out


_REQUIRED = object()


def _coerce(value, kind, name):
    try:
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(kind, tuple):  # ("list", element type, length or None)
            _, elem, length = kind
            if not isinstance(value, list):
                raise TypeError
            if length is not None and len(value) != length:
                raise ConfigError(f"{name}: expected {length} entries, got {len(value)}")
            return tuple(_coerce(v, elem, f"{name}[{k}]") for k, v in enumerate(value))
    except TypeError:
        raise ConfigError(f"{name}: expected {getattr(kind, '__name__', 'a list')}, got {value!r}") from None
    raise AssertionError(kind)


def _build(cls, where, kwargs):
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc


def _radar(table) -> RadarConfig:
    d = RadarConfig()
    spec = {f.name: (float, getattr(d, f.name)) for f in fields(RadarConfig)}
    spec["num_channels"] = (int, d.num_channels)
    spec["num_pulses"] = (int, d.num_pulses)
    del spec["crab_angle"]
    spec["crab_angle_deg"] = (float, 0.0)
    v = _take(table, "radar", spec)
    v["crab_angle"] = np.deg2rad(v.pop("crab_angle_deg"))
    return _build(RadarConfig, "radar", v)


def _scene(table) -> ClutterScene:
    table = dict(table)
    target_t = table.pop("target", None)
    interferers_t = table.pop("interferers", [])
    d = ClutterScene()
    v = _take(
        table,
        "scene",
        {
            "sector_deg": (("list", float, 2), tuple(np.rad2deg(d.sector))),
            "num_scatters": (int, d.num_scatters),
            "taper_floor_db": (float, d.taper_floor_db),
            "noise_power": (float, d.noise_power),
            "num_range_cells": (int, d.num_range_cells),
            "interference_cells": (("list", int, None), ()),
        },
    )
    v["sector"] = tuple(float(np.deg2rad(a)) for a in v.pop("sector_deg"))
    if not isinstance(interferers_t, list):
        raise ConfigError("scene.interferers: expected an array of tables")
    itfs = []
    for k, it in enumerate(interferers_t):
        w = _take(
            it,
            f"scene.interferers[{k}]",
            {"angle_deg": (float, _REQUIRED), "normalized_doppler": (float, _REQUIRED), "power_db": (float, 30.0)},
        )
        itfs.append(Interferer(float(np.deg2rad(w["angle_deg"])), w["normalized_doppler"], w["power_db"]))
    v["interferers"] = tuple(itfs)
    if target_t is not None:
        w = _take(
            target_t,
            "scene.target",
            {
                "azimuth_deg": (float, _REQUIRED),
                "normalized_doppler": (float, _REQUIRED),
                "range_cell": (int, 14),
                "snr_db": (float, 0.0),
            },
        )
        v["target"] = Target(float(np.deg2rad(w["azimuth_deg"])), w["normalized_doppler"], w["range_cell"], w["snr_db"])
    return _build(ClutterScene, "scene", v)


def _settings(solver, stap) -> MethodSettings:
    solver = dict(solver)
    f_t = solver.pop("focuss", {})
    l1_t = solver.pop("l1", {})
    if solver:
        raise ConfigError(f"solver: unknown key(s) {', '.join(sorted(solver))}")
    d = FocussOptions()
    ints = ("max_iterations", "max_restarts")
    fspec = {f.name: (int if f.name in ints else float, getattr(d, f.name)) for f in fields(FocussOptions)}
    focuss = _build(FocussOptions, "solver.focuss", _take(f_t, "solver.focuss", fspec))
    l1 = _take(l1_t, "solver.l1", {"eps": (float, None)})
    s = _take(
        stap,
        "stap",
        {
            "loading": (float, 1.0),
            "soi_extent": (("list", int, 2), (3, 3)),
            "d3ls_subaperture": (("list", int, 2), (8, 8)),
            "lsmi_training": (int, None),
            "lsmi_loading": (float, 1.0),
            "lsmi_guard": (int, 1),
        },
    )
    return _build(MethodSettings, "stap", dict(focuss=focuss, l1_eps=l1["eps"], **s))


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return _parse_doc(doc, text, source)


def _parse_doc(doc: dict, text: str, source: str) -> ExperimentConfig:
    sections = {"radar", "scene", "grid", "solver", "stap", "metrics", "run"}
    unknown = sorted(set(doc) - sections)
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {', '.join(unknown)}")
    missing = sorted({"radar", "scene", "run"} - set(doc))
    if missing:
        raise ConfigError(f"{source}: missing section(s) {', '.join(missing)}")
    for name in sections & set(doc):
        if not isinstance(doc[name], dict):
            raise ConfigError(f"{name}: expected a table")

    radar = _radar(doc["radar"])
    scene = _scene(doc["scene"])
    grid = _take(doc.get("grid", {}), "grid", {"rho_s": (int, 6), "rho_t": (int, 6)})
    if grid["rho_s"] < 1 or grid["rho_t"] < 1:
        raise ConfigError("grid: resolution scales must be >= 1")
    settings = _settings(doc.get("solver", {}), doc.get("stap", {}))
    m = _take(
        doc.get("metrics", {}),
        "metrics",
        {
            "doppler_points": (int, 15),
            "dopplers": (("list", float, None), ()),
            "trials": (int, 20),
        },
    )
    if m["trials"] < 1 or m["doppler_points"] < 1:
        raise ConfigError("metrics: trials and doppler_points must be >= 1")
    if m["dopplers"] and np.any(np.diff(m["dopplers"]) <= 0):
        raise ConfigError("metrics.dopplers: must be strictly increasing")
    run = _take(
        doc["run"],
        "run",
        {
            "methods": (("list", str, None), _REQUIRED),
            "seed": (int, 0),
            "output": (str, "out"),
            "threads": (int, 1),
        },
    )
    if not run["methods"]:
        raise ConfigError("run.methods: at least one method is required")
    for meth in run["methods"]:
        if meth not in METHODS:
            raise ConfigError(f"run.methods: unknown method {meth!r} (choose from {', '.join(METHODS)})")
    if run["threads"] < 1:
        raise ConfigError("run.threads: must be >= 1")
    if scene.target is None:
        raise ConfigError("scene.target: required for filtering and sweeps")
    return ExperimentConfig(
        radar=radar,
        scene=scene,
        rho=(grid["rho_s"], grid["rho_t"]),
        settings=settings,
        methods=run["methods"],
        metrics=MetricsConfig(**m),
        seed=run["seed"],
        output=run["output"],
        threads=run["threads"],
        source_text=text,
    )


def load_config(path) -> ExperimentConfig:
    """Read a TOML config, or the config embedded in a run manifest (``.json``)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    if path.suffix == ".json":
        try:
            text = json.loads(text)["config_text"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: not a run manifest") from exc
    return parse_config(text, str(path))
