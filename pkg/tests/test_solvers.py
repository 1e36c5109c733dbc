import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, strategies as st

from d3sr.dictionary import Dictionary, DictionaryGrid, SparseSpectrum
from d3sr.errors import EmptySupport, Infeasible, NumericalBreakdown
from d3sr.solvers import (
    FocussOptions,
    FocussState,
    focuss_init,
    focuss_iterate,
    focuss_overfocal_check,
    focuss_prune_and_smooth,
    focuss_solve,
    l1_optimality,
    l1_solve,
    neighbor_count,
    neighbor_offsets,
    overfocal_correlation,
    tsvd_solve,
)
from oracles import l0_support, random_dictionary, sparse_instance, support_ls


def test_options_validation():
    for bad in (
        dict(threshold_fraction=0.0),
        dict(neighbor_distance=0.5),
        dict(convergence_tol=1.0),
        dict(tsvd_level=0.0),
        dict(overfocal_correlation_min=1.0),
        dict(max_iterations=0),
        dict(max_restarts=-1),
    ):
        with pytest.raises(ValueError):
            FocussOptions(**bad)


# --- initialization -------------------------------------------------------


def test_init_zero_and_single_atom(default_dictionary):
    s = focuss_init(default_dictionary, np.zeros(144))
    assert not np.any(s.amplitudes) and not np.any(s.weights)
    assert s.support.size == 5184
    x = default_dictionary.atoms[:, 777]
    s = focuss_init(default_dictionary, x)
    assert np.argmax(np.abs(s.amplitudes)) == 777
    assert s.amplitudes[777] == pytest.approx(144.0)


# --- iteration ------------------------------------------------------------


def test_iterate_identity_step():
    d = Dictionary.from_matrix(np.eye(4, dtype=complex))
    x = np.array([1, 2j, -3, 0.5])
    state = FocussState(np.zeros(4, complex), np.ones(4), np.arange(4))
    out = focuss_iterate(state, d, x, FocussOptions())
    np.testing.assert_allclose(out.amplitudes, x)
    assert out.iteration == 1


def test_iterate_zero_weights_break_down():
    d = Dictionary.from_matrix(np.eye(4, dtype=complex))
    state = FocussState(np.zeros(4, complex), np.zeros(4), np.arange(4))
    with pytest.raises(NumericalBreakdown):
        focuss_iterate(state, d, np.ones(4), FocussOptions())
    with pytest.raises(EmptySupport):
        focuss_iterate(replace(state, support=np.zeros(0, int)), d, np.ones(4), FocussOptions())


def _single_atom_energy(dictionary, iterations=5):
    k = dictionary.grid.flat(30, 40)
    x = 2.0 * dictionary.atoms[:, k]
    state = focuss_init(dictionary, x)
    opts = FocussOptions()
    for _ in range(iterations):
        state = focuss_iterate(state, dictionary, x, opts)
        energy = np.abs(state.amplitudes) ** 2
        state = focuss_prune_and_smooth(state, opts)
    i, j = dictionary.grid.coords(np.arange(dictionary.grid.size))
    block = (np.abs(i - 30) <= 1) & (np.abs(j - 40) <= 1)
    return k, energy, block


def test_single_atom_concentrates_in_its_neighborhood(default_dictionary):
    k, energy, block = _single_atom_energy(default_dictionary)
    assert np.argmax(energy) == k
    assert energy[block].sum() / energy.sum() >= 0.99


@pytest.mark.xfail(
    strict=True,
    reason="neighbor smoothing keeps the 8 adjacent, highly correlated atoms weighted at about a third "
    "of the peak, so the true cell alone holds about 68% of the energy",
)
def test_single_atom_concentrates_in_one_cell(default_dictionary):
    k, energy, _ = _single_atom_energy(default_dictionary)
    assert energy[k] / energy.sum() >= 0.99


@given(st.integers(0, 2**32 - 1), st.integers(3, 10), st.integers(1, 3))
def test_tsvd_matches_pinv_when_well_conditioned(seed, m, p):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, p)) + 1j * rng.standard_normal((m, p))
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] / s[-1] > 50:  # keep every singular value above the 1e-2 cutoff
        return
    x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    np.testing.assert_allclose(tsvd_solve(A, x, 1e-2), np.linalg.pinv(A) @ x, atol=1e-8)
    np.testing.assert_allclose(tsvd_solve(A.conj().T, x[:p], 1e-2), np.linalg.pinv(A.conj().T) @ x[:p], atol=1e-8)
    np.testing.assert_allclose(tsvd_solve(A, x, 1e-6), np.linalg.pinv(A) @ x, atol=1e-8)


def test_tsvd_drops_small_directions():
    A = np.diag([1.0, 1e-4]).astype(complex)
    np.testing.assert_allclose(tsvd_solve(A, np.array([1.0, 1.0]), 1e-2), [1.0, 0.0])
    with pytest.raises(NumericalBreakdown):
        tsvd_solve(np.zeros((3, 2)), np.ones(3), 1e-2)


# --- pruning and smoothing --------------------------------------------------


def test_neighborhood_counts():
    grid = DictionaryGrid(12, 12, 6, 6)
    offs = neighbor_offsets(np.sqrt(2))
    assert len(offs) == 8
    counts = neighbor_count(grid, offs).reshape(grid.shape)
    assert counts[10, 10] == 8 and counts[0, 0] == 3 and counts[0, 10] == 5
    assert len(neighbor_offsets(1.0)) == 4


def test_smoothing_preserves_constant_block():
    grid = DictionaryGrid(4, 4, 2, 2)  # 8 x 8 cells
    a = np.zeros(grid.size, complex)
    block = [grid.flat(i, j) for i in range(2, 5) for j in range(2, 5)]
    a[block] = 3 - 2j
    state = FocussState(a, np.abs(a), np.arange(grid.size), 1, grid)
    out = focuss_prune_and_smooth(state, FocussOptions())
    center = grid.flat(3, 3)
    assert out.weights[center] == pytest.approx(abs(3 - 2j))


@given(st.integers(0, 2**32 - 1))
def test_pruning_only_keeps_surviving_cells_before_dilation(seed):
    rng = np.random.default_rng(seed)
    a = (rng.standard_normal(20) + 1j * rng.standard_normal(20)) * (rng.uniform(size=20) > 0.5)
    if not np.any(a):
        return
    state = FocussState(a, np.abs(a), np.flatnonzero(a), 1, None)
    out = focuss_prune_and_smooth(state, FocussOptions(threshold_fraction=0.3))
    assert set(out.support) <= set(state.support)
    assert np.all(np.abs(a[out.support]) >= 0.3 * np.abs(a).max())


def test_prune_empty_raises():
    state = FocussState(np.zeros(5, complex), np.zeros(5), np.arange(5), 1, None)
    with pytest.raises(EmptySupport):
        focuss_prune_and_smooth(state, FocussOptions())


# --- over-focus check ---------------------------------------------------------


def test_overfocal_examples():
    grid = DictionaryGrid(4, 4, 2, 2)
    rng = np.random.default_rng(0)
    fourier = np.zeros(grid.size, complex)
    for i, j in [(1, 1), (6, 2), (3, 6)]:
        fourier[grid.flat(i, j)] = 10
    fourier += 0.01 * rng.standard_normal(grid.size)
    opts = FocussOptions()
    assert overfocal_correlation(fourier, fourier, None) == pytest.approx(1.0)
    spike = np.zeros(grid.size, complex)
    spike[grid.flat(7, 7)] = 50
    state = FocussState(spike, np.abs(spike), np.arange(grid.size), 1, grid)
    assert focuss_overfocal_check(state, fourier, opts) == "overfocal"
    zero = replace(state, amplitudes=np.zeros(grid.size, complex))
    assert focuss_overfocal_check(zero, fourier, opts) == "overfocal"


# --- full solve ----------------------------------------------------------------


def test_zero_input_returns_zero(default_dictionary):
    sp = focuss_solve(default_dictionary, np.zeros(144))
    assert sp.iteration_count == 0 and sp.support.size == 0 and not np.any(sp.amplitudes)


def test_two_sparse_recovery_matches_exhaustive_oracle():
    rng = np.random.default_rng(16)
    d = random_dictionary(rng, 16, 64)
    x, support, _, _ = sparse_instance(rng, d, 2)
    oracle = l0_support(d, x, 2)
    np.testing.assert_array_equal(oracle, support)
    sp = focuss_solve(d, x, rng=np.random.default_rng(0))
    np.testing.assert_array_equal(sp.support, oracle)


def test_residual_not_worse_than_initial_support_fit(default_dictionary, default_cfg):
    from d3sr.scene import cell_rng, sidelook_scene, synthesize_snapshot

    snap = synthesize_snapshot(default_cfg, sidelook_scene(), 14, True, cell_rng(0, 14))
    sp = focuss_solve(default_dictionary, snap.data, rng=np.random.default_rng(0))
    init = focuss_init(default_dictionary, snap.data)
    # least-squares fit from the matched spectrum restricted to the final support
    a0 = np.zeros_like(init.amplitudes)
    a0[sp.support] = init.amplitudes[sp.support]
    psi = default_dictionary.atoms[:, sp.support]
    scale = np.vdot(psi @ a0[sp.support], snap.data) / np.vdot(psi @ a0[sp.support], psi @ a0[sp.support])
    r0 = np.linalg.norm(snap.data - scale * psi @ a0[sp.support])
    assert sp.residual_norm <= r0


def test_solve_deterministic(small_dictionary, small_cfg):
    from d3sr.scene import ClutterScene, cell_rng, synthesize_snapshot

    snap = synthesize_snapshot(small_cfg, ClutterScene(), 5, False, cell_rng(1, 5))
    a = focuss_solve(small_dictionary, snap.data, rng=np.random.default_rng(3))
    b = focuss_solve(small_dictionary, snap.data, rng=np.random.default_rng(3))
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
    assert a.support.tolist() == np.flatnonzero(a.amplitudes).tolist()


def test_trace_rows(small_dictionary, small_cfg):
    from d3sr.scene import ClutterScene, cell_rng, synthesize_snapshot

    snap = synthesize_snapshot(small_cfg, ClutterScene(), 5, False, cell_rng(1, 5))
    rows = []
    focuss_solve(small_dictionary, snap.data, rng=np.random.default_rng(3), trace=rows)
    assert rows and {"k", "support", "residual", "threshold"} <= set(rows[0])


# --- l1 -------------------------------------------------------------------------------


def test_l1_zero_when_ball_contains_origin():
    d = random_dictionary(np.random.default_rng(0), 4, 8)
    x = d.atoms[:, 2]
    sp = l1_solve(d, x, 1.01 * np.linalg.norm(x))
    assert sp.support.size == 0 and sp.l1_norm() == 0


def test_l1_single_atom():
    d = random_dictionary(np.random.default_rng(1), 8, 16)
    x = d.atoms[:, 5] * (1 + 0j)
    eps = 0.01 * np.linalg.norm(x)
    sp = l1_solve(d, x, eps)
    assert 5 in sp.support
    assert sp.l1_norm() <= 1.01
    assert sp.residual_norm <= eps * (1 + 1e-6)
    assert sp.optimality <= 1e-4


def test_l1_matches_oracle_on_small_instance():
    rng = np.random.default_rng(4)
    d = random_dictionary(rng, 4, 8)
    x, _, _, _ = sparse_instance(rng, d, 2)
    ref = np.abs(support_ls(d, x, l0_support(d, x, 2))).sum()
    sp = l1_solve(d, x, 1e-6 * np.linalg.norm(x))
    assert sp.l1_norm() <= 1.01 * ref


def test_l1_not_worse_than_focuss():
    for seed in range(5):
        rng = np.random.default_rng([7, seed])
        d = random_dictionary(rng, 32, 128)
        x, _, _, nn = sparse_instance(rng, d, 3, 30.0)
        fs = focuss_solve(d, x, rng=np.random.default_rng(seed))
        eps = max(fs.residual_norm, 1e-12)
        sp = l1_solve(d, x, eps)
        assert sp.residual_norm <= eps * (1 + 1e-6)
        assert sp.l1_norm() <= 1.05 * fs.l1_norm()


def test_l1_infeasible_and_validation():
    d = Dictionary.from_matrix(np.array([[1.0], [0.0]], dtype=complex))
    with pytest.raises(Infeasible):
        l1_solve(d, np.array([1.0, 1.0]), 0.1)
    with pytest.raises(ValueError):
        l1_solve(d, np.array([1.0, 1.0]), -1.0)


def test_l1_optimality_zero_at_zero():
    d = random_dictionary(np.random.default_rng(0), 4, 8)
    assert l1_optimality(d, np.ones(4), np.zeros(8)) == 0.0


def test_spectrum_helpers():
    d = Dictionary.from_matrix(np.eye(3, dtype=complex))
    sp = SparseSpectrum.from_amplitudes(d, np.array([1, 0, 0]), np.array([1, 0, 1j]), iteration_count=2)
    assert sp.support.tolist() == [0, 2]
    assert sp.l1_norm() == 2.0
    assert sp.residual_norm == pytest.approx(1.0)
