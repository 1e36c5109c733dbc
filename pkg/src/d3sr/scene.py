"""Space-time snapshot synthesis: steering vectors, clutter, interference, target, noise.

Space-time vectors are laid out spatial-major: entry ``n * M + m`` holds
channel ``n``, pulse ``m`` (``np.kron(spatial, temporal)``).

Clutter scatterers are placed by azimuth and mapped to the array through
the platform geometry, so their spatial frequency is ``(d/lambda) cos(beta)``
with beta the cone angle from the array axis. Interferer directions are
arrival angles from broadside, mapped with ``sin``; the two conventions
describe the same quantity because the broadside angle is ``pi/2 - beta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .geometry import RadarConfig, clutter_ridge, elevation_from_range, look_angle


@dataclass(frozen=True)
class SteeringVector:
    values: np.ndarray
    spatial_freq: float
    normalized_doppler: float


def spatial_steering(cfg: RadarConfig, spatial_freq):
    """Array response; ``spatial_freq`` may be a scalar or a 1-D array (one column each)."""
    n = np.arange(cfg.num_channels)
    return np.exp(2j * np.pi * np.multiply.outer(n, spatial_freq))


def temporal_steering(cfg: RadarConfig, normalized_doppler):
    m = np.arange(cfg.num_pulses)
    return np.exp(2j * np.pi * np.multiply.outer(m, normalized_doppler))


def steering_matrix(cfg: RadarConfig, spatial_freqs, normalized_dopplers) -> np.ndarray:
    """NM x K matrix whose columns are space-time steering vectors."""
    a = spatial_steering(cfg, np.atleast_1d(spatial_freqs))
    b = temporal_steering(cfg, np.atleast_1d(normalized_dopplers))
    return (a[:, None, :] * b[None, :, :]).reshape(cfg.nm, -1)


def space_time_steering(cfg: RadarConfig, spatial_freq: float, normalized_doppler: float) -> SteeringVector:
    v = np.kron(spatial_steering(cfg, spatial_freq), temporal_steering(cfg, normalized_doppler))
    return SteeringVector(v, float(spatial_freq), float(normalized_doppler))


@dataclass(frozen=True)
class Interferer:
    """Discrete interferer; ``angle`` is the arrival angle from broadside (radians)."""

    angle: float
    normalized_doppler: float
    power_db: float = 30.0

    def spatial_freq(self, cfg: RadarConfig) -> float:
        return float(cfg.spatial_freq_from_arrival(self.angle))


@dataclass(frozen=True)
class Target:
    """Moving target; ``azimuth`` is resolved through the platform geometry at ``range_cell``."""

    azimuth: float
    normalized_doppler: float
    range_cell: int = 14
    snr_db: float = 0.0

    @property
    def amplitude(self) -> float:
        return 10 ** (self.snr_db / 20)

    def spatial_freq(self, cfg: RadarConfig) -> float:
        el = elevation_from_range(cfg.height, cfg.slant_range(self.range_cell))
        return float(cfg.spatial_freq_from_look(look_angle(cfg, self.azimuth, el)))


# Reference interferer set: (arrival angle in degrees, normalized Doppler)
REFERENCE_INTERFERERS = ((-60.0, 0.0), (-40.0, 0.1), (-20.0, 0.2), (40.0, 0.1), (60.0, -0.4))


@dataclass(frozen=True)
class ClutterScene:
    """Everything that defines one scenario, apart from the radar itself.

    Powers are in dB relative to the per-element noise power. Clutter is
    scaled so that the expected clutter energy over the expected target
    energy matches ``cfg.input_scr_db``.
    """

    sector: tuple = (np.deg2rad(20.0), np.deg2rad(60.0))
    num_scatters: int = 181
    taper_floor_db: float = -20.0
    interferers: tuple = ()
    interference_cells: tuple = ()
    target: Target | None = None
    noise_power: float = 1.0
    num_range_cells: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.num_scatters < 1:
            raise ValueError("num_scatters must be >= 1")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        lo, hi = self.sector
        if not (0.0 <= lo <= hi <= np.pi):
            raise ValueError("sector must lie within the front half-plane [0, pi]")

    def with_target(self, **changes) -> "ClutterScene":
        return replace(self, target=replace(self.target, **changes))

    @property
    def azimuths(self) -> np.ndarray:
        lo, hi = self.sector
        return np.linspace(lo, hi, self.num_scatters)

    @property
    def taper(self) -> np.ndarray:
        """Transmit amplitude weight per scatterer: raised cosine over the sector, floored."""
        lo, hi = self.sector
        if self.num_scatters == 1 or hi == lo:
            return np.ones(self.num_scatters)
        u = (self.azimuths - 0.5 * (lo + hi)) / (0.5 * (hi - lo))
        floor = 10 ** (self.taper_floor_db / 20)
        return np.maximum(0.5 * (1 + np.cos(np.pi * u)), floor)

    def clutter_scale(self, cfg: RadarConfig) -> float:
        """Common amplitude factor applied to every clutter scatterer."""
        target_power = (self.target.amplitude if self.target else 1.0) ** 2
        clutter_power = target_power * 10 ** (-cfg.input_scr_db / 10)
        return float(np.sqrt(clutter_power / np.sum(self.taper**2)))

    def scatter_powers(self, cfg: RadarConfig) -> np.ndarray:
        """Expected |gamma_i|^2 per scatterer."""
        return (self.clutter_scale(cfg) * self.taper) ** 2


def sidelook_scene(**kw) -> ClutterScene:
    """Side-looking setup: 20-60 deg sector, reference interferers in cells 30 and 60, target at 15 deg, 0.3."""
    defaults = dict(
        sector=(np.deg2rad(20.0), np.deg2rad(60.0)),
        interferers=tuple(Interferer(np.deg2rad(a), f) for a, f in REFERENCE_INTERFERERS),
        interference_cells=(30, 60),
        target=Target(np.deg2rad(15.0), 0.3, range_cell=14),
    )
    defaults.update(kw)
    return ClutterScene(**defaults)


def nonsidelook_scene(**kw) -> ClutterScene:
    """Non side-looking setup (use with crab angle 45 deg): 90-160 deg sector, no interference."""
    defaults = dict(
        sector=(np.deg2rad(90.0), np.deg2rad(160.0)),
        interferers=(),
        interference_cells=(),
        target=Target(np.deg2rad(135.0), 0.25, range_cell=14),
    )
    defaults.update(kw)
    return ClutterScene(**defaults)


@dataclass(frozen=True)
class Atoms:
    """Point components that make up a snapshot (truth for clairvoyant processing)."""

    spatial_freq: np.ndarray
    normalized_doppler: np.ndarray
    amplitude: np.ndarray
    expected_power: np.ndarray


def _empty_atoms() -> Atoms:
    z = np.zeros(0)
    return Atoms(z, z, z.astype(complex), z)


@dataclass(frozen=True)
class Snapshot:
    """One range cell: data plus the components it was summed from."""

    data: np.ndarray
    range_cell: int
    clutter: np.ndarray
    interference: np.ndarray
    target: np.ndarray
    noise: np.ndarray
    clutter_atoms: Atoms = field(default_factory=_empty_atoms, repr=False)
    interference_atoms: Atoms = field(default_factory=_empty_atoms, repr=False)

    @property
    def disturbance(self) -> np.ndarray:
        """Clutter + interference + noise."""
        return self.clutter + self.interference + self.noise


def _cn(rng: np.random.Generator, size) -> np.ndarray:
    """Unit-variance circular complex Gaussian samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


@lru_cache(maxsize=512)
def _clutter_layout(cfg: RadarConfig, scene: ClutterScene, range_cell: int):
    """Ridge frequencies, expected powers and steering matrix for one range cell (read-only)."""
    ridge = clutter_ridge(cfg, range_cell, scene.azimuths)
    powers = scene.scatter_powers(cfg)
    V = steering_matrix(cfg, ridge.spatial_freq, ridge.normalized_doppler)
    for arr in (ridge.spatial_freq, ridge.normalized_doppler, powers, V):
        arr.setflags(write=False)
    return ridge.spatial_freq, ridge.normalized_doppler, powers, V


def clutter_atoms(cfg: RadarConfig, scene: ClutterScene, range_cell: int, rng: np.random.Generator) -> Atoms:
    fsp, fd, powers, _ = _clutter_layout(cfg, scene, int(range_cell))
    gamma = np.sqrt(powers) * _cn(rng, scene.num_scatters)
    return Atoms(fsp, fd, gamma, powers)


def synthesize_clutter(cfg: RadarConfig, scene: ClutterScene, range_cell: int, rng: np.random.Generator) -> np.ndarray:
    atoms = clutter_atoms(cfg, scene, range_cell, rng)
    return _clutter_layout(cfg, scene, int(range_cell))[3] @ atoms.amplitude


def interference_atoms(cfg: RadarConfig, scene: ClutterScene, rng: np.random.Generator) -> Atoms:
    if not scene.interferers:
        return _empty_atoms()
    fsp = np.array([i.spatial_freq(cfg) for i in scene.interferers])
    fd = np.array([i.normalized_doppler for i in scene.interferers])
    powers = np.array([scene.noise_power * 10 ** (i.power_db / 10) for i in scene.interferers])
    phase = rng.uniform(0.0, 2 * np.pi, len(scene.interferers))
    return Atoms(fsp, fd, np.sqrt(powers) * np.exp(1j * phase), powers)


def synthesize_interference(cfg: RadarConfig, scene: ClutterScene, rng: np.random.Generator) -> np.ndarray:
    atoms = interference_atoms(cfg, scene, rng)
    if atoms.amplitude.size == 0:
        return np.zeros(cfg.nm, dtype=complex)
    return steering_matrix(cfg, atoms.spatial_freq, atoms.normalized_doppler) @ atoms.amplitude


def target_vector(cfg: RadarConfig, target: Target) -> np.ndarray:
    s = space_time_steering(cfg, target.spatial_freq(cfg), target.normalized_doppler)
    return target.amplitude * s.values


def synthesize_snapshot(
    cfg: RadarConfig,
    scene: ClutterScene,
    range_cell: int,
    include_target: bool,
    rng: np.random.Generator,
    include_interference: bool | None = None,
) -> Snapshot:
    """Draw one range cell.

    Random draws happen in a fixed order (clutter amplitudes, interferer
    phases, noise) whether or not a component is included, so toggling the
    target leaves the other components unchanged. Interference is present
    only in ``scene.interference_cells`` unless overridden.
    """
    c_atoms = clutter_atoms(cfg, scene, range_cell, rng)
    i_atoms = interference_atoms(cfg, scene, rng)
    noise = np.sqrt(scene.noise_power) * _cn(rng, cfg.nm)

    clutter = _clutter_layout(cfg, scene, int(range_cell))[3] @ c_atoms.amplitude
    if include_interference is None:
        include_interference = range_cell in scene.interference_cells
    if include_interference and i_atoms.amplitude.size:
        interference = steering_matrix(cfg, i_atoms.spatial_freq, i_atoms.normalized_doppler) @ i_atoms.amplitude
    else:
        interference = np.zeros(cfg.nm, dtype=complex)
        i_atoms = _empty_atoms()
    if include_target and scene.target is not None:
        tgt = target_vector(cfg, scene.target)
    else:
        tgt = np.zeros(cfg.nm, dtype=complex)
    data = clutter + interference + tgt + noise
    return Snapshot(data, int(range_cell), clutter, interference, tgt, noise, c_atoms, i_atoms)


def cell_rng(seed: int, range_cell: int) -> np.random.Generator:
    """Independent stream per (seed, range cell)."""
    return np.random.default_rng([int(seed), int(range_cell)])


def synthesize_cube(cfg: RadarConfig, scene: ClutterScene, num_range_cells: int, seed: int | None = None) -> list:
    """Range cells ``0 .. num_range_cells-1``; the target appears only in its own cell."""
    if num_range_cells < 1:
        raise ValueError("num_range_cells must be >= 1")
    seed = scene.seed if seed is None else seed
    tcell = scene.target.range_cell if scene.target is not None else None
    return [
        synthesize_snapshot(cfg, scene, r, r == tcell, cell_rng(seed, r))
        for r in range(num_range_cells)
    ]


def training_cells(test_cell: int, count: int, num_range_cells: int, guard: int = 1) -> list:
    """Range cells nearest the test cell (guard cells skipped), cycled until ``count`` are listed."""
    pool = [r for r in range(num_range_cells) if abs(r - test_cell) > guard]
    if not pool:
        raise ValueError("no training cells available")
    pool.sort(key=lambda r: (abs(r - test_cell), r))
    return [pool[i % len(pool)] for i in range(count)]


def synthesize_training(
    cfg: RadarConfig, scene: ClutterScene, test_cell: int, count: int, rng: np.random.Generator, guard: int = 1
) -> list:
    """Target-free, interference-free snapshots from cells around ``test_cell``.

    Discrete interferers are confined to their own cells, so training data
    never sees them. Each draw is independent even when a cell repeats.
    """
    cells = training_cells(test_cell, count, scene.num_range_cells, guard)
    return [synthesize_snapshot(cfg, scene, r, False, rng, include_interference=False) for r in cells]
