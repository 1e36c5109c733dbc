"""Adaptive filters: D3SR from a sparse spectrum, plus D3LS and LSMI baselines.

Every filter is normalized to unit gain at its assumed signal of interest
(``w^H s = 1``) so output powers are comparable across methods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dictionary import Dictionary, DictionaryGrid, SparseSpectrum, grid_index
from .errors import DimensionMismatch, OutOfRange, RankDeficient, SingularCovariance
from .geometry import RadarConfig
from .scene import Snapshot, SteeringVector, space_time_steering, steering_matrix


@dataclass(frozen=True)
class SoiSpec:
    """Assumed target location and the guard window excluded from the clutter estimate."""

    spatial_freq: float
    normalized_doppler: float
    n_soi: int = 3
    m_soi: int = 3

    def __post_init__(self):
        for ext in (self.n_soi, self.m_soi):
            if ext < 1 or ext % 2 == 0:
                raise ValueError("SOI extents must be odd and >= 1")

    def steering(self, cfg: RadarConfig) -> SteeringVector:
        return space_time_steering(cfg, self.spatial_freq, self.normalized_doppler)


@dataclass(frozen=True)
class CovarianceMatrix:
    matrix: np.ndarray
    loading: float


@dataclass(frozen=True)
class StapFilter:
    """Filter weights and where they came from.

    D3SR and LSMI weights span the full NM aperture. D3LS weights cover an
    ``shape = (N_a, N_p)`` subaperture and are slid over the full aperture
    (see ``full_weights``).
    """

    weights: np.ndarray
    method: str
    soi: SoiSpec | None
    gain: complex = 1.0
    shape: tuple | None = None
    rank_deficient: bool = False

    def full_weights(self, cfg: RadarConfig) -> np.ndarray:
        """Equivalent NM-length weight vector, so that ``y = w_full^H x``."""
        if self.shape is None:
            return self.weights
        na, npl = self.shape
        n, m = cfg.num_channels, cfg.num_pulses
        w = self.weights.reshape(na, npl)
        out = np.zeros((n, m), dtype=complex)
        placements = [(i, j) for i in range(n - na + 1) for j in range(m - npl + 1)]
        for i, j in placements:
            phase = np.exp(2j * np.pi * (self.soi.spatial_freq * i + self.soi.normalized_doppler * j))
            out[i : i + na, j : j + npl] += phase * w
        return out.ravel() / len(placements)


def soi_area(grid: DictionaryGrid, soi: SoiSpec) -> np.ndarray:
    """Grid cells in the guard window around the SOI, truncated at the grid edges."""
    center = grid_index(grid, soi.spatial_freq, soi.normalized_doppler)
    ci, cj = grid.coords(center)
    hi, hj = soi.n_soi // 2, soi.m_soi // 2
    ii = np.arange(max(0, ci - hi), min(grid.n_spatial, ci + hi + 1))
    jj = np.arange(max(0, cj - hj), min(grid.n_doppler, cj + hj + 1))
    return np.sort(grid.flat(ii[None, :], jj[:, None]).ravel())


def build_ccm(dictionary: Dictionary, spectrum: SparseSpectrum, soi_cells, loading: float) -> CovarianceMatrix:
    """Sum of spectral powers times atom outer products outside the SOI window, plus loading."""
    if not loading > 0:
        raise ValueError("loading must be positive")
    cells = np.setdiff1d(spectrum.support, np.asarray(soi_cells, dtype=int))
    p = np.abs(spectrum.amplitudes[cells]) ** 2
    return covariance_from_atoms(dictionary.atoms[:, cells], p, loading)


def covariance_from_atoms(atoms: np.ndarray, powers, loading: float) -> CovarianceMatrix:
    atoms = np.asarray(atoms)
    R = (atoms * np.asarray(powers)) @ atoms.conj().T
    R = 0.5 * (R + R.conj().T) + loading * np.eye(atoms.shape[0])
    return CovarianceMatrix(R, float(loading))


def mvdr_weights(R: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``R^-1 s / (s^H R^-1 s)`` via a Cholesky factorization."""
    try:
        c = sla.cho_factor(R, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc
    u = sla.cho_solve(c, s, check_finite=False)
    den = np.vdot(s, u)
    if not abs(den) > 0:
        raise SingularCovariance("s^H R^-1 s vanished")
    return u / den


def d3sr_filter(ccm: CovarianceMatrix, soi_steering: SteeringVector, soi: SoiSpec | None = None) -> StapFilter:
    if soi is None:
        soi = SoiSpec(soi_steering.spatial_freq, soi_steering.normalized_doppler)
    return StapFilter(mvdr_weights(ccm.matrix, soi_steering.values), "d3sr", soi)


def lsmi_filter(training, soi_steering: SteeringVector, loading: float = 1.0, soi: SoiSpec | None = None) -> StapFilter:
    """Loaded sample-matrix inversion from training snapshots (or raw data vectors)."""
    X = np.array([t.data if isinstance(t, Snapshot) else np.asarray(t) for t in training])
    if X.shape[0] < 1:
        raise ValueError("need at least one training snapshot")
    R = X.T @ X.conj() / X.shape[0] + loading * np.eye(X.shape[1])
    if soi is None:
        soi = SoiSpec(soi_steering.spatial_freq, soi_steering.normalized_doppler)
    return StapFilter(mvdr_weights(R, soi_steering.values), "lsmi", soi)


def conventional_filter(soi_steering: SteeringVector, soi: SoiSpec | None = None) -> StapFilter:
    """Non-adaptive matched filter ``s / (s^H s)``."""
    s = soi_steering.values
    if soi is None:
        soi = SoiSpec(soi_steering.spatial_freq, soi_steering.normalized_doppler)
    return StapFilter(s / np.vdot(s, s).real, "none", soi)


# --- D3LS -----------------------------------------------------------------


def d3ls_difference_windows(cube: np.ndarray, soi: SoiSpec, na: int, npl: int) -> np.ndarray:
    """SOI-free difference windows from an N x M data array, stacked as rows.

    Row families, each in lexicographic subaperture order: spatial
    ``x(n,m) - zs^-1 x(n+1,m)``, temporal ``x(n,m) - zt^-1 x(n,m+1)``,
    diagonal ``x(n,m) - zs^-1 zt^-1 x(n+1,m+1)`` and anti-diagonal
    ``x(n+1,m) - zs zt^-1 x(n,m+1)``. Each family cancels a plane wave at
    the SOI exactly. The first ``na * npl - 1`` rows are used.
    """
    zs = np.exp(2j * np.pi * soi.spatial_freq)
    zt = np.exp(2j * np.pi * soi.normalized_doppler)
    n, m = cube.shape
    fams = [
        cube[:-1, :] - cube[1:, :] / zs,
        cube[:, :-1] - cube[:, 1:] / zt,
        cube[:-1, :-1] - cube[1:, 1:] / (zs * zt),
        cube[1:, :-1] - cube[:-1, 1:] * zs / zt,
    ]
    rows = []
    for d in fams:
        dn, dm = d.shape
        for i in range(dn - na + 1):
            for j in range(dm - npl + 1):
                rows.append(d[i : i + na, j : j + npl].ravel())
    return np.array(rows).reshape(-1, na * npl)


def d3ls_filter(snapshot, cfg: RadarConfig, soi: SoiSpec, na: int = 8, npl: int = 8) -> StapFilter:
    """Forward D3LS: unit gain on the SOI and zero response to every difference window.

    Solves ``[s_sub^H; Y^H] w = [1, 0, ..., 0]`` in least squares, where the
    rows of ``Y`` are the ``na*npl - 1`` SOI-cancelling windows. Rank
    deficiency gives the least-norm solution and sets ``rank_deficient``.
    """
    n, m = cfg.num_channels, cfg.num_pulses
    if not (2 <= na <= n and 2 <= npl <= m):
        raise DimensionMismatch("subaperture must satisfy 2 <= N_a <= N and 2 <= N_p <= M")
    x = snapshot.data if isinstance(snapshot, Snapshot) else np.asarray(snapshot)
    if x.shape != (n * m,):
        raise DimensionMismatch("snapshot length does not match the radar")
    need = na * npl - 1
    windows = d3ls_difference_windows(x.reshape(n, m), soi, na, npl)
    if windows.shape[0] < need:
        raise DimensionMismatch(f"only {windows.shape[0]} difference windows for {need} required rows")
    s_sub = steering_matrix(_sub_cfg(cfg, na, npl), soi.spatial_freq, soi.normalized_doppler)[:, 0]
    A = np.vstack([s_sub.conj()[None, :], windows[:need].conj()])
    rhs = np.zeros(na * npl, dtype=complex)
    rhs[0] = 1.0
    w, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    deficient = rank < A.shape[1]
    if deficient and np.linalg.norm(w) == 0:
        raise RankDeficient("D3LS system has no usable solution")
    return StapFilter(w, "d3ls", soi, gain=np.vdot(w, s_sub), shape=(na, npl), rank_deficient=deficient)


def _sub_cfg(cfg: RadarConfig, na: int, npl: int) -> RadarConfig:
    from dataclasses import replace

    return replace(cfg, num_channels=na, num_pulses=npl)


def apply_filter(flt: StapFilter, x, cfg: RadarConfig | None = None) -> complex:
    """Filter output ``w^H x``; D3LS windows are phase-aligned and averaged over all placements."""
    x = x.data if isinstance(x, Snapshot) else np.asarray(x)
    if flt.shape is not None:
        if cfg is None:
            raise ValueError("subaperture filters need the radar config")
        w = flt.full_weights(cfg)
    else:
        w = flt.weights
    if x.shape != w.shape:
        raise DimensionMismatch(f"data of shape {x.shape} vs weights {w.shape}")
    return complex(np.vdot(w, x))
