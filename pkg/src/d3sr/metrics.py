"""Output SCR, range profiles, adapted spectra and Monte Carlo MDV sweeps."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dictionary import Dictionary, DictionaryGrid, SparseSpectrum, grid_index
from .errors import D3srError
from .geometry import RadarConfig, clutter_ridge
from .pipeline import MethodSettings, check_method, make_soi, method_rng, run_method
from .scene import ClutterScene, Snapshot, steering_matrix, synthesize_snapshot
from .stap import SoiSpec, StapFilter, apply_filter, covariance_from_atoms, mvdr_weights, soi_area

log = logging.getLogger(__name__)


def power_db(p, reference: float = 1.0):
    """``10 log10(p / reference)`` with exact zeros mapped to -inf."""
    p = np.asarray(p, dtype=float) / reference
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(p)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ScrReport:
    scr_out: float  # dB; +inf when the disturbance is annihilated, -inf without signal
    numerator: float
    denominator: float
    method: str = ""
    seed: int | None = None


def output_scr(flt: StapFilter, snapshot: Snapshot, cfg: RadarConfig | None = None, seed: int | None = None) -> ScrReport:
    """``|w^H x_t|^2 / |w^H (x_c + x_d + n)|^2`` from the stored truth components."""
    num = abs(apply_filter(flt, snapshot.target, cfg)) ** 2
    den = abs(apply_filter(flt, snapshot.disturbance, cfg)) ** 2
    if num == 0:
        scr = -np.inf
    elif den == 0:
        scr = np.inf
    else:
        scr = float(10 * np.log10(num / den))
    return ScrReport(scr, float(num), float(den), flt.method, seed)


def range_profile(flt, cube, cfg: RadarConfig | None = None, noise_power: float = 1.0) -> np.ndarray:
    """Output power per range cell in dB over the noise floor.

    ``flt`` is either one StapFilter applied to every cell or a callable
    ``snapshot -> StapFilter`` for methods that adapt per cell.
    """
    out = np.empty(len(cube))
    for r, snap in enumerate(cube):
        f = flt(snap) if callable(flt) else flt
        out[r] = abs(apply_filter(f, snap, cfg)) ** 2
    return power_db(out, noise_power)


def method_range_profile(
    method: str,
    cfg: RadarConfig,
    scene: ClutterScene,
    cube,
    soi: SoiSpec,
    dictionary: Dictionary | None,
    settings: MethodSettings,
    seed: int,
    threads: int = 1,
) -> np.ndarray:
    """Range profile with ``method``'s filter rebuilt from each cell's own data (fixed SOI)."""
    check_method(method)

    def power(snap):
        res = run_method(method, cfg, scene, snap, soi, dictionary, settings, method_rng(seed, snap.range_cell))
        return abs(apply_filter(res.filter, snap, cfg)) ** 2

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(power, cube))
    else:
        out = [power(s) for s in cube]
    return power_db(np.array(out), scene.noise_power)


def adapted_spectrum(
    snapshot: Snapshot | np.ndarray,
    grid: DictionaryGrid,
    factory: Callable[[float, float], StapFilter],
    cfg: RadarConfig | None = None,
    noise_power: float = 1.0,
) -> np.ndarray:
    """Filter output power (dB) with every grid cell in turn as the assumed SOI.

    ``factory(spatial_freq, normalized_doppler)`` builds the method's
    filter; the map has shape ``(n_spatial, n_doppler)``.
    """
    x = snapshot.data if isinstance(snapshot, Snapshot) else np.asarray(snapshot)
    out = np.empty((grid.n_spatial, grid.n_doppler))
    for j, fd in enumerate(grid.doppler_axis):
        for i, fs in enumerate(grid.spatial_axis):
            out[i, j] = abs(apply_filter(factory(float(fs), float(fd)), x, cfg)) ** 2
    return power_db(out, noise_power)


# --- oracles --------------------------------------------------------------


def _truth_atoms(snapshot: Snapshot):
    parts = [a for a in (snapshot.clutter_atoms, snapshot.interference_atoms) if a.amplitude.size]
    if not parts:
        parts = [snapshot.clutter_atoms]
    fsp = np.concatenate([a.spatial_freq for a in parts])
    fd = np.concatenate([a.normalized_doppler for a in parts])
    return fsp, fd, parts


def clairvoyant_filter(
    cfg: RadarConfig, snapshot: Snapshot, soi: SoiSpec, grid: DictionaryGrid, loading: float = 1.0
) -> StapFilter:
    """D3SR with the solver bypassed: the snapshot's own scatter list and realized powers.

    Scatterers whose nearest grid cell falls in the SOI window are left out,
    exactly as ``build_ccm`` does for a recovered spectrum.
    """
    fsp, fd, parts = _truth_atoms(snapshot)
    power = np.concatenate([np.abs(a.amplitude) ** 2 for a in parts])
    area = set(soi_area(grid, soi).tolist())
    keep = np.array([grid_index(grid, f, d) not in area for f, d in zip(fsp, fd)], dtype=bool)
    R = covariance_from_atoms(steering_matrix(cfg, fsp[keep], fd[keep]), power[keep], loading).matrix
    return StapFilter(mvdr_weights(R, soi.steering(cfg).values), "clairvoyant", soi)


def optimum_filter(cfg: RadarConfig, snapshot: Snapshot, soi: SoiSpec, noise_power: float = 1.0) -> StapFilter:
    """MVDR on the true disturbance covariance (expected clutter and interference powers plus noise)."""
    fsp, fd, parts = _truth_atoms(snapshot)
    power = np.concatenate([a.expected_power for a in parts])
    R = covariance_from_atoms(steering_matrix(cfg, fsp, fd), power, noise_power).matrix
    return StapFilter(mvdr_weights(R, soi.steering(cfg).values), "optimum", soi)


# --- spectrum checks ------------------------------------------------------


def _dilate(mask2d: np.ndarray, cells: int) -> np.ndarray:
    out = mask2d.copy()
    nd, ns = mask2d.shape
    for dj in range(-cells, cells + 1):
        for di in range(-cells, cells + 1):
            src = mask2d[max(0, -dj) : nd - max(0, dj), max(0, -di) : ns - max(0, di)]
            out[max(0, dj) : nd - max(0, -dj), max(0, di) : ns - max(0, -di)] |= src
    return out


def ridge_mask(
    cfg: RadarConfig,
    grid: DictionaryGrid,
    scene: ClutterScene,
    range_cell: int,
    soi: SoiSpec | None = None,
    dilation: int = 1,
    samples: int = 4096,
) -> np.ndarray:
    """Flat boolean mask: clutter ridge and interferer cells (both dilated) plus the SOI area."""
    m = np.zeros(grid.shape, dtype=bool)
    ridge = clutter_ridge(cfg, range_cell, np.linspace(*scene.sector, samples))
    pts = list(zip(ridge.spatial_freq, ridge.normalized_doppler))
    pts += [(itf.spatial_freq(cfg), itf.normalized_doppler) for itf in scene.interferers]
    for fs, fd in pts:
        i, j = grid.coords(grid_index(grid, fs, fd))
        m[j, i] = True
    flat = _dilate(m, dilation).ravel()
    if soi is not None:
        flat[soi_area(grid, soi)] = True
    return flat


def energy_fraction(spectrum: SparseSpectrum, mask: np.ndarray) -> float:
    p = spectrum.power()
    total = p.sum()
    return float(p[mask].sum() / total) if total > 0 else 1.0


def notch_dopplers(
    cfg: RadarConfig, scene: ClutterScene, range_cell: int, spatial_freq: float, sector=None, samples: int = 20001
):
    """Dopplers where the clutter ridge crosses ``spatial_freq``.

    The ridge is traced over ``sector`` (default: the whole front half-plane,
    so a target just outside the illuminated sector still has a notch).
    """
    lo, hi = (0.0, np.pi) if sector is None else sector
    ridge = clutter_ridge(cfg, range_cell, np.linspace(lo, hi, samples))
    d = ridge.spatial_freq - spatial_freq
    out = []
    for k in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0):
        t = d[k] / (d[k] - d[k + 1]) if d[k] != d[k + 1] else 0.0
        out.append(float(ridge.normalized_doppler[k] + t * (ridge.normalized_doppler[k + 1] - ridge.normalized_doppler[k])))
    return sorted(set(np.round(out, 12)))


def doppler_distance(a, b):
    """Distance between normalized Dopplers on the unit circle (they alias with period 1)."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 1.0
    out = np.minimum(d, 1.0 - d)
    return out if out.ndim else float(out)


# --- Monte Carlo ----------------------------------------------------------


@dataclass(frozen=True)
class MdvCurve:
    """Mean output SCR across the Doppler sweep.

    ``mean_scr_db`` is the linear mean of per-trial SCR ratios converted to
    dB; ``mean_db`` averages the per-trial dB values instead and is kept as
    a heavy-tail-robust companion.
    """

    doppler_axis: np.ndarray
    mean_scr_db: np.ndarray
    trials: np.ndarray  # successful trials per point
    failures: np.ndarray
    unconverged: np.ndarray
    mean_db: np.ndarray
    method: str

    def __post_init__(self):
        if np.any(np.diff(self.doppler_axis) <= 0):
            raise ValueError("doppler axis must be strictly increasing")

    def rows(self) -> list:
        return [
            (float(f), float(m), int(t), int(k))
            for f, m, t, k in zip(self.doppler_axis, self.mean_scr_db, self.trials, self.failures)
        ]


def trial_rngs(seed: int, trial: int) -> tuple:
    """(snapshot stream, method stream) for one trial.

    Streams do not depend on the Doppler point, so every point of a sweep
    sees the same clutter and noise draws and only the target moves.
    """
    return np.random.default_rng([int(seed), int(trial), 0]), np.random.default_rng([int(seed), int(trial), 1])


def _trial(cfg, scene, method, fd, trial, seed, dictionary, settings, test_cell):
    sc = scene.with_target(normalized_doppler=float(fd))
    snap_rng, method_rng = trial_rngs(seed, trial)
    snap = synthesize_snapshot(cfg, sc, test_cell, True, snap_rng)
    soi = make_soi(cfg, sc, settings)
    try:
        res = run_method(method, cfg, sc, snap, soi, dictionary, settings, method_rng)
    except D3srError as exc:
        log.warning("%s trial %d at Doppler %.4f failed: %s", method, trial, fd, exc)
        return None, False
    scr = output_scr(res.filter, snap, cfg, seed=trial)
    return scr.numerator / scr.denominator if scr.denominator > 0 else np.inf, res.converged


def mdv_sweep(
    cfg: RadarConfig,
    scene: ClutterScene,
    method: str,
    dopplers,
    num_trials: int,
    seed: int = 0,
    dictionary: Dictionary | None = None,
    settings: MethodSettings | None = None,
    threads: int = 1,
) -> MdvCurve:
    """Output SCR versus target Doppler, averaged over independent trials.

    Trials that raise a package error are logged, counted in ``failures``
    and left out of the mean. Results do not depend on ``threads``.
    """
    check_method(method)
    if num_trials < 1:
        raise ValueError("num_trials must be >= 1")
    if scene.target is None:
        raise ValueError("the sweep moves the scene's target; none is configured")
    settings = settings or MethodSettings()
    dopplers = np.asarray(dopplers, dtype=float)
    test_cell = scene.target.range_cell
    jobs = [(k, t) for k in range(dopplers.size) for t in range(num_trials)]

    def work(job):
        k, t = job
        return _trial(cfg, scene, method, dopplers[k], t, seed, dictionary, settings, test_cell)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    ratios = np.full((dopplers.size, num_trials), np.nan)
    unconverged = np.zeros(dopplers.size, dtype=int)
    for (k, t), (ratio, ok) in zip(jobs, results):
        if ratio is not None:
            ratios[k, t] = ratio
        unconverged[k] += int(ratio is not None and not ok)
    good = ~np.isnan(ratios)
    trials = good.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_lin = np.where(trials > 0, np.nansum(ratios, axis=1) / np.maximum(trials, 1), np.nan)
        mean_db = np.array([np.mean(power_db(r[g])) if g.any() else np.nan for r, g in zip(ratios, good)])
    return MdvCurve(dopplers, power_db(mean_lin), trials, num_trials - trials, unconverged, mean_db, method)
