"""Platform and array geometry for a linear airborne array.

Angles are radians throughout. Azimuth is measured from the flight
direction, elevation from the horizontal plane, and the look (cone) angle
from the array axis, which is rotated from the flight direction by the
crab angle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentGeometry, RangeBelowHeight

SPEED_OF_LIGHT = 2.99792458e8
DISCRIMINANT_TOL = 1e-9


@dataclass(frozen=True)
class RadarConfig:
    """Platform, array and waveform parameters.

    Defaults are the 12-channel, 12-pulse system used in the experiments.
    ``crab_angle`` is 0 for a side-looking array.
    """

    num_channels: int = 12
    num_pulses: int = 12
    velocity: float = 300.0
    pri: float = 0.25e-3
    sample_rate: float = 5e6
    wavelength: float = 0.3
    element_spacing: float = 0.15
    height: float = 3000.0
    crab_angle: float = 0.0
    input_scr_db: float = -30.0

    def __post_init__(self):
        if self.num_channels < 2 or self.num_pulses < 2:
            raise ValueError("need at least 2 channels and 2 pulses")
        for name in ("velocity", "pri", "wavelength", "element_spacing", "height", "sample_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.element_spacing > self.wavelength / 2 * (1 + 1e-12):
            warnings.warn("element spacing exceeds half a wavelength; expect grating lobes")

    @property
    def prf(self) -> float:
        return 1.0 / self.pri

    @property
    def nm(self) -> int:
        return self.num_channels * self.num_pulses

    @property
    def max_doppler(self) -> float:
        """2v/lambda, the largest clutter Doppler in Hz."""
        return 2.0 * self.velocity / self.wavelength

    @property
    def range_spacing(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.sample_rate)

    def slant_range(self, range_cell) -> float:
        """Range gates start at the platform height."""
        return self.height + np.asarray(range_cell) * self.range_spacing

    def spatial_freq_from_look(self, look_angle):
        """Cycles per element for a cone angle measured from the array axis."""
        return self.element_spacing / self.wavelength * np.cos(look_angle)

    def spatial_freq_from_arrival(self, arrival_angle):
        """Cycles per element for an arrival angle measured from broadside."""
        return self.element_spacing / self.wavelength * np.sin(arrival_angle)


@dataclass(frozen=True)
class ScatterGeometry:
    azimuth: float
    elevation: float
    slant_range: float
    look_angle: float


def doppler_from_angles(cfg: RadarConfig, azimuth, elevation):
    """Doppler (Hz) of a stationary scatterer."""
    return cfg.max_doppler * np.cos(azimuth) * np.cos(elevation)


def elevation_cos_from_range(height, slant_range):
    height = np.asarray(height, dtype=float)
    slant_range = np.asarray(slant_range, dtype=float)
    if np.any(height <= 0):
        raise ValueError("height must be positive")
    if np.any(slant_range < height):
        raise RangeBelowHeight(f"slant range {slant_range} below height {height}")
    out = np.sqrt(np.clip(1.0 - (height / slant_range) ** 2, 0.0, 1.0))
    return out if out.ndim else float(out)


def elevation_from_range(height, slant_range):
    return np.arccos(elevation_cos_from_range(height, slant_range))


def look_angle(cfg: RadarConfig, azimuth, elevation):
    """Cone angle between the array axis and the line of sight."""
    c = np.cos(azimuth - cfg.crab_angle) * np.cos(elevation)
    return np.arccos(np.clip(c, -1.0, 1.0))


def scatter_geometry(cfg: RadarConfig, azimuth: float, range_cell: int) -> ScatterGeometry:
    rs = float(cfg.slant_range(range_cell))
    el = float(elevation_from_range(cfg.height, rs))
    return ScatterGeometry(azimuth, el, rs, float(look_angle(cfg, azimuth, el)))


def doppler_from_look(cfg: RadarConfig, beta, elevation, branch: str = "left", tol=DISCRIMINANT_TOL):
    """Doppler (Hz) from the look angle, crab angle and elevation.

    ``branch`` picks the sign of the square root: ``"left"`` is ``+``,
    ``"right"`` is ``-``. A scatterer at azimuth phi sits on the ``+``
    branch when ``sin(crab) * sin(phi - crab) <= 0``.
    """
    if branch not in ("left", "right"):
        raise ValueError("branch must be 'left' or 'right'")
    psi = cfg.crab_angle
    cb = np.cos(beta)
    disc = np.cos(psi) ** 2 * cb**2 - cb**2 + np.sin(psi) ** 2 * np.cos(elevation) ** 2
    disc = np.asarray(disc, dtype=float)
    if np.any(disc < -tol):
        raise InconsistentGeometry("look angle not reachable at this elevation")
    root = np.sqrt(np.clip(disc, 0.0, None))
    sign = 1.0 if branch == "left" else -1.0
    out = cfg.max_doppler * (np.cos(psi) * cb + sign * root)
    return out if out.ndim else float(out)


def branch_for_azimuth(cfg: RadarConfig, azimuth) -> str:
    s = np.sin(cfg.crab_angle) * np.sin(azimuth - cfg.crab_angle)
    return "left" if s <= 0 else "right"


@dataclass(frozen=True)
class RidgePoints:
    """Clutter ridge samples for one range cell."""

    azimuth: np.ndarray
    look_angle: np.ndarray
    doppler: np.ndarray  # Hz
    spatial_freq: np.ndarray  # cycles/element
    normalized_doppler: np.ndarray  # cycles/pulse


def clutter_ridge(cfg: RadarConfig, range_cell: int, azimuths) -> RidgePoints:
    """Look angle and Doppler of stationary scatterers at the given azimuths."""
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    rs = cfg.slant_range(range_cell)
    el = elevation_from_range(cfg.height, rs)
    beta = look_angle(cfg, azimuths, el)
    fd = doppler_from_angles(cfg, azimuths, el)
    return RidgePoints(
        azimuth=azimuths,
        look_angle=beta,
        doppler=fd,
        spatial_freq=cfg.spatial_freq_from_look(beta),
        normalized_doppler=fd * cfg.pri,
    )
