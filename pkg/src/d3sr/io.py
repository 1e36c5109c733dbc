"""Plain-text artifacts.

Every file is a small self-describing table::

    # d3sr-table 1
    # {"kind": "snapshot", "columns": [...], ...JSON header...}
    0.5 -1.25 ...

Floats are written with ``repr`` (shortest round-trip form), so reading a
file back gives bit-identical binary64 values. Complex columns are stored
as ``<name>_re`` / ``<name>_im`` pairs. Writes go to a temporary file in the
target directory and are renamed into place.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dictionary import DictionaryGrid, SparseSpectrum
from .scene import Snapshot
from .stap import SoiSpec, StapFilter

MAGIC = "# d3sr-table 1"
COMPONENTS = ("data", "clutter", "interference", "target", "noise")


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v) -> str:
    if isinstance(v, str):
        if not v or any(c.isspace() for c in v):
            raise ValueError(f"text cell {v!r} must be non-empty without whitespace")
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def format_table(kind: str, columns, rows, header: dict | None = None, text_columns=()) -> str:
    meta = dict(header or {})
    meta.update(kind=kind, columns=list(columns), text_columns=list(text_columns))
    lines = [MAGIC, "# " + json.dumps(meta, sort_keys=True)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells for {len(columns)} columns")
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_table(path, kind: str, columns, rows, header: dict | None = None, text_columns=()) -> Path:
    return atomic_write_text(path, format_table(kind, columns, rows, header, text_columns))


def read_table(path, kind: str | None = None):
    """Returns ``(header, columns)`` where ``columns`` maps name -> float array (or list of str)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2 or lines[0] != MAGIC or not lines[1].startswith("# "):
        raise ValueError(f"{path}: not a d3sr table")
    header = json.loads(lines[1][2:])
    if kind is not None and header.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind} table, found {header.get('kind')}")
    names = header["columns"]
    text = set(header.get("text_columns", []))
    cells = [ln.split() for ln in lines[2:] if ln.strip()]
    for k, c in enumerate(cells):
        if len(c) != len(names):
            raise ValueError(f"{path}: line {k + 3} has {len(c)} cells for {len(names)} columns")
    cols = {}
    for k, name in enumerate(names):
        raw = [c[k] for c in cells]
        cols[name] = raw if name in text else np.array([float(v) for v in raw], dtype=float)
    return header, cols


def _complex(cols, name) -> np.ndarray:
    # Assign parts directly: re + 1j * im would turn inf imaginary parts into nan and lose -0.0.
    re = cols[f"{name}_re"]
    out = np.empty(re.shape, dtype=complex)
    out.real, out.imag = re, cols[f"{name}_im"]
    return out


def _cx_columns(names):
    return [f"{n}_{p}" for n in names for p in ("re", "im")]


def _cx_rows(arrays):
    return [tuple(v for a in row for v in (a.real, a.imag)) for row in zip(*arrays)]


# --- snapshots ------------------------------------------------------------


def save_cube(path, cube, header: dict | None = None) -> Path:
    """Range cells with their truth components (clutter atoms are not stored)."""
    rows = []
    for snap in cube:
        comps = [getattr(snap, c) for c in COMPONENTS]
        for k, vals in enumerate(zip(*comps)):
            rows.append((snap.range_cell, k) + tuple(x for v in vals for x in (v.real, v.imag)))
    return write_table(path, "cube", ["range_cell", "element"] + _cx_columns(COMPONENTS), rows, header)


def load_cube(path):
    header, cols = read_table(path, "cube")
    cells = cols["range_cell"].astype(int)
    cube = []
    for r in dict.fromkeys(cells.tolist()):
        sel = cells == r
        order = np.argsort(cols["element"][sel], kind="stable")
        comp = {c: _complex(cols, c)[sel][order] for c in COMPONENTS}
        cube.append(Snapshot(comp["data"], int(r), comp["clutter"], comp["interference"], comp["target"], comp["noise"]))
    return header, cube


def save_snapshot(path, snapshot: Snapshot, header: dict | None = None) -> Path:
    return save_cube(path, [snapshot], header)


def load_snapshot(path):
    header, cube = load_cube(path)
    if len(cube) != 1:
        raise ValueError(f"{path}: holds {len(cube)} range cells, expected one")
    return header, cube[0]


# --- spectra and filters ----------------------------------------------------


def save_spectrum(path, spectrum: SparseSpectrum, grid: DictionaryGrid | None = None, header: dict | None = None) -> Path:
    meta = dict(header or {})
    meta.update(
        size=int(spectrum.amplitudes.size),
        iteration_count=int(spectrum.iteration_count),
        residual_norm=spectrum.residual_norm,
        method=spectrum.method,
        restarts=int(spectrum.restarts),
        overfocal=bool(spectrum.overfocal),
        optimality=None if np.isnan(spectrum.optimality) else spectrum.optimality,
    )
    rows = []
    for idx in spectrum.support:
        a = spectrum.amplitudes[idx]
        fs, fd = grid.frequencies(idx) if grid is not None else (np.nan, np.nan)
        rows.append((int(idx), float(fs), float(fd), a.real, a.imag))
    cols = ["index", "spatial_freq", "normalized_doppler", "amplitude_re", "amplitude_im"]
    return write_table(path, "spectrum", cols, rows, meta)


def load_spectrum(path):
    header, cols = read_table(path, "spectrum")
    amps = np.zeros(header["size"], dtype=complex)
    idx = cols["index"].astype(int)
    amps[idx] = _complex(cols, "amplitude")
    opt = header.get("optimality")
    spec = SparseSpectrum(
        amps,
        np.sort(idx),
        header["iteration_count"],
        header["residual_norm"],
        method=header["method"],
        restarts=header["restarts"],
        overfocal=header["overfocal"],
        optimality=float("nan") if opt is None else opt,
    )
    return header, spec


def save_filter(path, flt: StapFilter, header: dict | None = None) -> Path:
    meta = dict(header or {})
    soi = flt.soi
    meta.update(
        method=flt.method,
        soi=None if soi is None else [soi.spatial_freq, soi.normalized_doppler, soi.n_soi, soi.m_soi],
        gain=[complex(flt.gain).real, complex(flt.gain).imag],
        shape=None if flt.shape is None else list(flt.shape),
        rank_deficient=bool(flt.rank_deficient),
    )
    rows = [(w.real, w.imag) for w in flt.weights]
    return write_table(path, "filter", ["weight_re", "weight_im"], rows, meta)


def load_filter(path):
    header, cols = read_table(path, "filter")
    soi = header["soi"]
    soi = None if soi is None else SoiSpec(soi[0], soi[1], int(soi[2]), int(soi[3]))
    g = header["gain"]
    flt = StapFilter(
        _complex(cols, "weight"),
        header["method"],
        soi,
        gain=complex(g[0], g[1]),
        shape=None if header["shape"] is None else tuple(header["shape"]),
        rank_deficient=header["rank_deficient"],
    )
    return header, flt


# --- result tables ------------------------------------------------------------


def save_grid_map(path, kind: str, grid: DictionaryGrid, values: np.ndarray, header: dict | None = None) -> Path:
    """Dense ``(n_spatial, n_doppler)`` map written as one row per Doppler bin, one column per spatial bin."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_spatial, grid.n_doppler):
        raise ValueError(f"map of shape {values.shape} does not match the grid")
    meta = dict(header or {})
    meta.update(
        units="dB",
        spatial_axis=[float(v) for v in grid.spatial_axis],
        doppler_axis=[float(v) for v in grid.doppler_axis],
    )
    cols = [f"s{i}" for i in range(grid.n_spatial)]
    return write_table(path, kind, cols, [tuple(r) for r in values.T], meta)


def load_grid_map(path, kind: str | None = None):
    """Returns ``(header, values)`` with ``values`` shaped ``(n_spatial, n_doppler)``."""
    header, cols = read_table(path, kind)
    values = np.array([cols[f"s{i}"] for i in range(len(header["spatial_axis"]))])
    return header, values


def save_range_profile(path, profile, header: dict | None = None) -> Path:
    rows = [(r, float(p)) for r, p in enumerate(profile)]
    return write_table(path, "range_profile", ["range_cell", "power_db"], rows, header)


def load_range_profile(path):
    header, cols = read_table(path, "range_profile")
    return header, cols["power_db"]


def save_curves(path, curves, header: dict | None = None) -> Path:
    """MDV curves, one block of rows per method."""
    rows = []
    for c in curves:
        for k, f in enumerate(c.doppler_axis):
            rows.append(
                (c.method, float(f), float(c.mean_scr_db[k]), int(c.trials[k]), int(c.failures[k]), int(c.unconverged[k]), float(c.mean_db[k]))
            )
    cols = ["method", "doppler", "mean_scr_db", "trials", "failures", "unconverged", "mean_db"]
    return write_table(path, "mdv", cols, rows, header, text_columns=("method",))


def load_curves(path):
    """Returns ``(header, {method: columns})`` in file order."""
    header, cols = read_table(path, "mdv")
    out = {}
    for m in dict.fromkeys(cols["method"]):
        sel = np.array([c == m for c in cols["method"]])
        out[m] = {k: v[sel] for k, v in cols.items() if k != "method"}
    return header, out
