"""Brute-force references used by the solver tests."""

from itertools import combinations

import numpy as np

from d3sr.dictionary import Dictionary


def random_dictionary(rng, rows, cols) -> Dictionary:
    """Unit-modulus random-phase atoms (no grid)."""
    return Dictionary.from_matrix(np.exp(2j * np.pi * rng.uniform(size=(rows, cols))))


def sparse_instance(rng, dictionary: Dictionary, k: int, snr_db: float | None = None):
    """``x = Psi a + n`` with ``k`` atoms of modulus in [0.5, 1.5]; returns (x, support, amplitudes, noise norm)."""
    n_rows, n_cols = dictionary.atoms.shape
    support = np.sort(rng.choice(n_cols, size=k, replace=False))
    amps = rng.uniform(0.5, 1.5, k) * np.exp(2j * np.pi * rng.uniform(size=k))
    x = dictionary.atoms[:, support] @ amps
    noise = np.zeros(n_rows, dtype=complex)
    if snr_db is not None:
        sigma2 = np.mean(np.abs(x) ** 2) / 10 ** (snr_db / 10)
        noise = np.sqrt(sigma2 / 2) * (rng.standard_normal(n_rows) + 1j * rng.standard_normal(n_rows))
    return x + noise, support, amps, float(np.linalg.norm(noise))


def l0_support(dictionary: Dictionary, x, max_k: int, tol: float = 1e-9):
    """Smallest support (ties: lowest residual) whose least-squares fit leaves at most ``tol * ||x||``."""
    psi = dictionary.atoms
    scale = np.linalg.norm(x)
    for k in range(1, max_k + 1):
        best, best_r = None, np.inf
        for supp in combinations(range(psi.shape[1]), k):
            a = np.linalg.lstsq(psi[:, supp], x, rcond=None)[0]
            r = np.linalg.norm(x - psi[:, supp] @ a)
            if r < best_r:
                best, best_r = supp, r
        if best_r <= tol * scale:
            return np.array(best)
    return None


def support_ls(dictionary: Dictionary, x, support):
    """Least-squares amplitudes on ``support`` (full-length vector)."""
    a = np.zeros(dictionary.atoms.shape[1], dtype=complex)
    a[support] = np.linalg.lstsq(dictionary.atoms[:, support], x, rcond=None)[0]
    return a
