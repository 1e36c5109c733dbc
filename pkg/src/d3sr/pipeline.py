"""One call per method: snapshot in, filter (and sparse spectrum) out.

Method names follow the experiment configs: ``d3sr-focuss``, ``d3sr-l1``,
``d3ls``, ``lsmi`` and ``none`` (the conventional, non-adaptive filter).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .dictionary import Dictionary, SparseSpectrum
from .errors import DidNotConverge
from .geometry import RadarConfig
from .scene import ClutterScene, Snapshot, synthesize_training
from .solvers import FocussOptions, focuss_solve, l1_solve
from .stap import (
    SoiSpec,
    StapFilter,
    build_ccm,
    conventional_filter,
    d3ls_filter,
    d3sr_filter,
    lsmi_filter,
    mvdr_weights,
    soi_area,
)

METHODS = ("d3sr-focuss", "d3sr-l1", "d3ls", "lsmi", "none")
SPARSE_METHODS = ("d3sr-focuss", "d3sr-l1")


@dataclass(frozen=True)
class MethodSettings:
    """Knobs shared by every method.

    ``l1_eps`` of None ties the error allowance to the expected noise norm
    ``sqrt(NM * noise_power)``. ``lsmi_training`` of None means ``2 NM``.
    """

    focuss: FocussOptions = field(default_factory=FocussOptions)
    l1_eps: float | None = None
    loading: float = 1.0
    soi_extent: tuple = (3, 3)
    d3ls_subaperture: tuple = (8, 8)
    lsmi_training: int | None = None
    lsmi_loading: float = 1.0
    lsmi_guard: int = 1

    def __post_init__(self):
        if not self.loading > 0 or not self.lsmi_loading > 0:
            raise ValueError("loading factors must be positive")
        if self.l1_eps is not None and self.l1_eps < 0:
            raise ValueError("l1_eps must be non-negative")
        if any(e < 1 or e % 2 == 0 for e in self.soi_extent):
            raise ValueError("SOI extents must be odd and >= 1")
        if self.lsmi_training is not None and self.lsmi_training < 1:
            raise ValueError("lsmi_training must be >= 1")


@dataclass(frozen=True)
class MethodResult:
    filter: StapFilter
    spectrum: SparseSpectrum | None = None
    converged: bool = True


def check_method(method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return method


def make_soi(cfg: RadarConfig, scene: ClutterScene, settings: MethodSettings) -> SoiSpec:
    """Assumed SOI at the configured target's angle and Doppler."""
    if scene.target is None:
        raise ValueError("the scene has no target to steer toward")
    n_soi, m_soi = settings.soi_extent
    return SoiSpec(scene.target.spatial_freq(cfg), scene.target.normalized_doppler, n_soi, m_soi)


def estimate_spectrum(
    method: str,
    cfg: RadarConfig,
    x: np.ndarray,
    dictionary: Dictionary,
    settings: MethodSettings,
    rng: np.random.Generator,
    noise_power: float = 1.0,
) -> tuple[SparseSpectrum, bool]:
    """Sparse spectrum of one snapshot; the flag is False when FOCUSS ran out of iterations."""
    if method == "d3sr-focuss":
        try:
            return focuss_solve(dictionary, x, settings.focuss, rng), True
        except DidNotConverge as exc:
            if exc.result is None:
                raise
            return exc.result, False
    if method == "d3sr-l1":
        eps = settings.l1_eps if settings.l1_eps is not None else float(np.sqrt(cfg.nm * noise_power))
        return l1_solve(dictionary, x, eps), True
    raise ValueError(f"{method} does not estimate a sparse spectrum")


def d3sr_from_spectrum(
    cfg: RadarConfig, dictionary: Dictionary, spectrum: SparseSpectrum, soi: SoiSpec, loading: float
) -> StapFilter:
    ccm = build_ccm(dictionary, spectrum, soi_area(dictionary.grid, soi), loading)
    return d3sr_filter(ccm, soi.steering(cfg), soi)


def run_method(
    method: str,
    cfg: RadarConfig,
    scene: ClutterScene,
    snapshot: Snapshot,
    soi: SoiSpec,
    dictionary: Dictionary | None,
    settings: MethodSettings,
    rng: np.random.Generator,
) -> MethodResult:
    """Build ``method``'s filter for ``snapshot`` steered at ``soi``.

    LSMI draws its own training snapshots from ``rng``; the sparse methods
    use it for FOCUSS restarts.
    """
    check_method(method)
    sv = soi.steering(cfg)
    if method in SPARSE_METHODS:
        if dictionary is None:
            raise ValueError("sparse methods need a dictionary")
        spectrum, ok = estimate_spectrum(method, cfg, snapshot.data, dictionary, settings, rng, scene.noise_power)
        return MethodResult(d3sr_from_spectrum(cfg, dictionary, spectrum, soi, settings.loading), spectrum, ok)
    if method == "d3ls":
        na, npl = settings.d3ls_subaperture
        return MethodResult(d3ls_filter(snapshot, cfg, soi, na, npl))
    if method == "lsmi":
        count = settings.lsmi_training or 2 * cfg.nm
        training = synthesize_training(cfg, scene, snapshot.range_cell, count, rng, settings.lsmi_guard)
        return MethodResult(lsmi_filter(training, sv, settings.lsmi_loading, soi))
    return MethodResult(conventional_filter(sv, soi))


def filter_factory(
    method: str,
    cfg: RadarConfig,
    scene: ClutterScene,
    snapshot: Snapshot,
    dictionary: Dictionary | None,
    settings: MethodSettings,
    rng: np.random.Generator,
):
    """``(spatial_freq, doppler) -> StapFilter`` for scanning the assumed SOI over a grid.

    Work that does not depend on the SOI (sparse spectrum, LSMI training
    covariance) is done once up front. Returns the factory and the sparse
    spectrum (None for non-sparse methods).
    """
    check_method(method)
    n_soi, m_soi = settings.soi_extent
    spectrum = None

    if method in SPARSE_METHODS:
        spectrum, _ = estimate_spectrum(method, cfg, snapshot.data, dictionary, settings, rng, scene.noise_power)
        supp = spectrum.support
        atoms = dictionary.atoms[:, supp]
        p = spectrum.power()[supp]
        full = (atoms * p) @ atoms.conj().T
        lookup = {int(c): k for k, c in enumerate(supp)}

        def make(fs, fd):
            soi = SoiSpec(fs, fd, n_soi, m_soi)
            excl = [lookup[int(c)] for c in soi_area(dictionary.grid, soi) if int(c) in lookup]
            R = full.copy()
            if excl:
                a = atoms[:, excl]
                R -= (a * p[excl]) @ a.conj().T
            R = 0.5 * (R + R.conj().T) + settings.loading * np.eye(cfg.nm)
            return StapFilter(mvdr_weights(R, soi.steering(cfg).values), "d3sr", soi)

    elif method == "lsmi":
        count = settings.lsmi_training or 2 * cfg.nm
        training = synthesize_training(cfg, scene, snapshot.range_cell, count, rng, settings.lsmi_guard)
        X = np.array([t.data for t in training])
        R = X.T @ X.conj() / X.shape[0] + settings.lsmi_loading * np.eye(cfg.nm)
        chol = sla.cho_factor(R, lower=True, check_finite=False)

        def make(fs, fd):
            soi = SoiSpec(fs, fd, n_soi, m_soi)
            s = soi.steering(cfg).values
            u = sla.cho_solve(chol, s, check_finite=False)
            return StapFilter(u / np.vdot(s, u), "lsmi", soi)

    elif method == "d3ls":
        na, npl = settings.d3ls_subaperture

        def make(fs, fd):
            return d3ls_filter(snapshot, cfg, SoiSpec(fs, fd, n_soi, m_soi), na, npl)

    else:

        def make(fs, fd):
            soi = SoiSpec(fs, fd, n_soi, m_soi)
            return conventional_filter(soi.steering(cfg), soi)

    return make, spectrum


def method_rng(seed: int, range_cell: int) -> np.random.Generator:
    """Stream for a method's own randomness at one range cell (distinct from the cell's data stream)."""
    return np.random.default_rng([int(seed), int(range_cell), 1])
