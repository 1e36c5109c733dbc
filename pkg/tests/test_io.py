import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from d3sr.dictionary import SparseSpectrum
from d3sr.io import (
    atomic_write_text,
    load_cube,
    load_curves,
    load_filter,
    load_grid_map,
    load_range_profile,
    load_snapshot,
    load_spectrum,
    read_table,
    save_cube,
    save_curves,
    save_filter,
    save_grid_map,
    save_range_profile,
    save_snapshot,
    save_spectrum,
    write_table,
)
from d3sr.metrics import MdvCurve
from d3sr.scene import Snapshot
from d3sr.stap import SoiSpec, StapFilter

floats = st.floats(allow_nan=False, width=64)


def _bits(a):
    return np.asarray(a, dtype=complex).view(np.uint64) if np.iscomplexobj(a) else np.asarray(a, float).view(np.uint64)


def _join(re, im):
    out = np.empty(len(re), dtype=complex)
    out.real, out.imag = re, im
    return out


def _cx(draw, n):
    re = draw(st.lists(floats, min_size=n, max_size=n))
    im = draw(st.lists(floats, min_size=n, max_size=n))
    return _join(re, im)


@st.composite
def snapshots(draw, n=4, cell=None):
    comps = [_cx(draw, n) for _ in range(5)]
    r = cell if cell is not None else draw(st.integers(0, 99))
    return Snapshot(comps[0], r, *comps[1:])


@given(st.lists(snapshots(), min_size=1, max_size=3, unique_by=lambda s: s.range_cell))
def test_cube_round_trip_is_bit_exact(tmp_path_factory, cube):
    path = tmp_path_factory.mktemp("io") / "cube.txt"
    save_cube(path, cube, {"seed": 3})
    header, back = load_cube(path)
    assert header["seed"] == 3 and [s.range_cell for s in back] == [s.range_cell for s in cube]
    for a, b in zip(cube, back):
        for name in ("data", "clutter", "interference", "target", "noise"):
            np.testing.assert_array_equal(_bits(getattr(a, name)), _bits(getattr(b, name)))


def test_special_values_survive(tmp_path):
    v = np.array([0.0, -0.0, np.inf, -np.inf, 5e-324, 1.7976931348623157e308])
    z = np.zeros_like(v)
    snap = Snapshot(_join(v, v[::-1]), 2, _join(v, z), _join(z, v), _join(v, -v), _join(-v, z))
    save_snapshot(tmp_path / "s.txt", snap)
    _, back = load_snapshot(tmp_path / "s.txt")
    np.testing.assert_array_equal(_bits(back.data), _bits(snap.data))
    assert math.copysign(1.0, back.clutter[1].real) == -1.0


def test_snapshot_loader_rejects_multi_cell_files(tmp_path):
    z = np.zeros(2, complex)
    save_cube(tmp_path / "c.txt", [Snapshot(z, 0, z, z, z, z), Snapshot(z, 1, z, z, z, z)])
    with pytest.raises(ValueError):
        load_snapshot(tmp_path / "c.txt")


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_spectrum_round_trip(tmp_path_factory, seed, optimal):
    rng = np.random.default_rng(seed)
    amps = np.zeros(20, complex)
    supp = np.sort(rng.choice(20, 4, replace=False))
    amps[supp] = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    spec = SparseSpectrum(amps, supp, 7, float(rng.random()), method="focuss", restarts=1, overfocal=True,
                          optimality=float(rng.random()) if optimal else float("nan"))
    path = tmp_path_factory.mktemp("io") / "spec.txt"
    save_spectrum(path, spec)
    _, back = load_spectrum(path)
    np.testing.assert_array_equal(_bits(back.amplitudes), _bits(spec.amplitudes))
    np.testing.assert_array_equal(back.support, spec.support)
    assert (back.iteration_count, back.residual_norm, back.method, back.restarts, back.overfocal) == (
        7, spec.residual_norm, "focuss", 1, True)
    assert (np.isnan(back.optimality) and not optimal) or back.optimality == spec.optimality


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_filter_round_trip(tmp_path_factory, seed, sub):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    soi = SoiSpec(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5)), 3, 3)
    flt = StapFilter(w, "d3ls" if sub else "lsmi", soi, gain=complex(rng.random(), rng.random()),
                     shape=(4, 4) if sub else None, rank_deficient=sub)
    path = tmp_path_factory.mktemp("io") / "f.txt"
    save_filter(path, flt)
    _, back = load_filter(path)
    np.testing.assert_array_equal(_bits(back.weights), _bits(w))
    assert (back.method, back.soi, back.gain, back.shape, back.rank_deficient) == (
        flt.method, soi, flt.gain, flt.shape, flt.rank_deficient)


def test_grid_map_layout(tmp_path, small_dictionary):
    grid = small_dictionary.grid
    values = np.arange(grid.size, dtype=float).reshape(grid.n_spatial, grid.n_doppler)
    values[0, 0] = -np.inf
    save_grid_map(tmp_path / "m.txt", "adapted_spectrum", grid, values, {"method": "lsmi"})
    header, back = load_grid_map(tmp_path / "m.txt", "adapted_spectrum")
    np.testing.assert_array_equal(back, values)
    assert header["units"] == "dB" and len(header["doppler_axis"]) == grid.n_doppler
    with pytest.raises(ValueError):
        save_grid_map(tmp_path / "bad.txt", "x", grid, values.T[:, :-1])


def test_range_profile_and_curves(tmp_path):
    prof = np.array([-np.inf, 0.5, 12.25])
    save_range_profile(tmp_path / "p.txt", prof, {"method": "none"})
    h, back = load_range_profile(tmp_path / "p.txt")
    np.testing.assert_array_equal(back, prof) and h["method"] == "none"

    def curve(m, off):
        ax = np.array([-0.25, 0.25])
        return MdvCurve(ax, ax + off, np.array([2, 1]), np.array([0, 1]), np.array([0, 0]), ax - off, m)

    save_curves(tmp_path / "mdv.txt", [curve("d3ls", 1.0), curve("lsmi", 2.0)])
    _, cols = load_curves(tmp_path / "mdv.txt")
    assert list(cols) == ["d3ls", "lsmi"]
    np.testing.assert_array_equal(cols["lsmi"]["mean_scr_db"], [1.75, 2.25])
    np.testing.assert_array_equal(cols["d3ls"]["failures"], [0, 1])


def test_table_validation(tmp_path):
    with pytest.raises(ValueError):
        write_table(tmp_path / "t.txt", "x", ["a", "b"], [(1.0,)])
    with pytest.raises(ValueError):
        write_table(tmp_path / "t.txt", "x", ["m"], [("two words",)], text_columns=("m",))
    (tmp_path / "junk.txt").write_text("hello\n")
    with pytest.raises(ValueError):
        read_table(tmp_path / "junk.txt")
    write_table(tmp_path / "t.txt", "x", ["a"], [(1.0,)])
    with pytest.raises(ValueError):
        read_table(tmp_path / "t.txt", "y")


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write_text(tmp_path / "sub" / "a.txt", "one\n")
    atomic_write_text(tmp_path / "sub" / "a.txt", "two\n")
    assert (tmp_path / "sub" / "a.txt").read_text() == "two\n"
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["a.txt"]

    class Boom:
        def __str__(self):
            raise RuntimeError

    with pytest.raises(TypeError):
        atomic_write_text(tmp_path / "sub" / "b.txt", Boom())
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["a.txt"]
