"""Overcomplete angle-Doppler dictionary and the matched (Fourier) spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GridTooCoarse, OutOfRange
from .geometry import RadarConfig
from .scene import steering_matrix


@dataclass(frozen=True)
class DictionaryGrid:
    """Uniform grid over normalized spatial frequency x normalized Doppler.

    Both axes cover [-0.5, 0.5). Cells are indexed Doppler-major: index
    ``j * n_spatial + i`` is spatial bin ``i`` at Doppler bin ``j``.
    """

    num_channels: int
    num_pulses: int
    rho_s: int = 6
    rho_t: int = 6

    def __post_init__(self):
        if self.rho_s < 1 or self.rho_t < 1:
            raise ValueError("resolution scales must be >= 1")

    @classmethod
    def for_radar(cls, cfg: RadarConfig, rho_s: int = 6, rho_t: int = 6) -> "DictionaryGrid":
        return cls(cfg.num_channels, cfg.num_pulses, rho_s, rho_t)

    @property
    def n_spatial(self) -> int:
        return self.rho_s * self.num_channels

    @property
    def n_doppler(self) -> int:
        return self.rho_t * self.num_pulses

    @property
    def size(self) -> int:
        return self.n_spatial * self.n_doppler

    @property
    def shape(self) -> tuple:
        """(Doppler bins, spatial bins): the layout of a reshaped spectrum."""
        return (self.n_doppler, self.n_spatial)

    @property
    def spatial_axis(self) -> np.ndarray:
        return -0.5 + np.arange(self.n_spatial) / self.n_spatial

    @property
    def doppler_axis(self) -> np.ndarray:
        return -0.5 + np.arange(self.n_doppler) / self.n_doppler

    def coords(self, index):
        """(spatial bin, Doppler bin) of a flat index."""
        index = np.asarray(index)
        return index % self.n_spatial, index // self.n_spatial

    def flat(self, spatial_bin, doppler_bin):
        return np.asarray(doppler_bin) * self.n_spatial + np.asarray(spatial_bin)

    def frequencies(self, index):
        i, j = self.coords(index)
        return self.spatial_axis[i], self.doppler_axis[j]


def _nearest_bin(value: float, n: int) -> int:
    if not -0.5 <= value <= 0.5:
        raise OutOfRange(f"normalized frequency {value} outside [-0.5, 0.5]")
    u = (value + 0.5) * n
    # ties go to the lower bin; the top edge wraps onto -0.5
    return int(np.ceil(np.round(u - 0.5, 9))) % n


def grid_index(grid: DictionaryGrid, spatial_freq: float, normalized_doppler: float) -> int:
    """Nearest grid cell, ties broken toward the lower index."""
    i = _nearest_bin(float(spatial_freq), grid.n_spatial)
    j = _nearest_bin(float(normalized_doppler), grid.n_doppler)
    return int(grid.flat(i, j))


@dataclass(frozen=True)
class Dictionary:
    """Dense NM x K atom matrix. ``grid`` is None for unstructured (e.g. random) dictionaries."""

    atoms: np.ndarray
    grid: DictionaryGrid | None = None

    @property
    def shape(self) -> tuple:
        return self.atoms.shape

    @classmethod
    def from_matrix(cls, atoms) -> "Dictionary":
        return cls(np.asarray(atoms, dtype=complex), None)


def build_dictionary(cfg: RadarConfig, grid: DictionaryGrid) -> Dictionary:
    if grid.size < cfg.nm:
        raise GridTooCoarse(f"{grid.size} cells cannot span {cfg.nm} dimensions")
    if (grid.num_channels, grid.num_pulses) != (cfg.num_channels, cfg.num_pulses):
        raise DimensionMismatch("grid was built for a different array size")
    fsp = np.tile(grid.spatial_axis, grid.n_doppler)
    fd = np.repeat(grid.doppler_axis, grid.n_spatial)
    atoms = steering_matrix(cfg, fsp, fd)
    atoms.setflags(write=False)
    return Dictionary(atoms, grid)


def fourier_spectrum(dictionary: Dictionary, x) -> np.ndarray:
    """Matched-filter response ``s_i^H x`` for every atom."""
    x = np.asarray(x)
    if x.shape != (dictionary.atoms.shape[0],):
        raise DimensionMismatch(f"data of shape {x.shape} vs dictionary {dictionary.atoms.shape}")
    return dictionary.atoms.conj().T @ x


@dataclass(frozen=True)
class SparseSpectrum:
    """Solver output. ``support`` lists exactly the nonzero cells of ``amplitudes``."""

    amplitudes: np.ndarray
    support: np.ndarray
    iteration_count: int
    residual_norm: float
    method: str = ""
    restarts: int = 0
    overfocal: bool = False
    optimality: float = float("nan")

    @classmethod
    def from_amplitudes(cls, dictionary: Dictionary, x, amplitudes, **kw) -> "SparseSpectrum":
        amplitudes = np.asarray(amplitudes, dtype=complex)
        support = np.flatnonzero(amplitudes)
        resid = float(np.linalg.norm(x - dictionary.atoms[:, support] @ amplitudes[support]))
        return cls(amplitudes, support, residual_norm=resid, **kw)

    def power(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes)))
