"""Shared test utilities: instance generators and independent oracles."""

from __future__ import annotations

import itertools

import numpy as np

from xlmimo import SystemConfig


def make_config(**overrides) -> SystemConfig:
    """Small, fast config for unit tests."""
    defaults = dict(num_antennas=16, num_users=12, rng_seed=1234)
    defaults.update(overrides)
    return SystemConfig(**defaults)


def random_channels(rng, m: int, n: int, scale: float = 1.0) -> np.ndarray:
    """Well-conditioned random complex columns (unit average entry power)."""
    z = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    return scale * z / np.sqrt(2.0)


def direct_gram_inv_diag(matrix) -> np.ndarray:
    """Gram-inverse diagonal by plain dense inversion (oracle path)."""
    a = np.asarray(matrix, dtype=complex)
    return np.real(np.diag(np.linalg.inv(a.conj().T @ a)))


def null_projection_gain(matrix, k: int) -> float:
    """Effective zero-forcing channel gain of column k via the projection
    expansion ||a_k||^2 - a_k^H B (B^H B)^{-1} B^H a_k, B = other columns."""
    a = np.asarray(matrix, dtype=complex)
    a_k = a[:, k]
    b = np.delete(a, k, axis=1)
    if b.shape[1] == 0:
        return float(np.real(np.vdot(a_k, a_k)))
    coef = np.linalg.solve(b.conj().T @ b, b.conj().T @ a_k)
    proj = np.real(np.vdot(b.conj().T @ a_k, coef))
    return float(np.real(np.vdot(a_k, a_k)) - proj)


def waterfill_active_set_oracle(gram_inv_diag, min_rates, noise_power, p_max):
    """Exhaustive reference solution of the floored water-filling program.

    Enumerates every pinned/unpinned split, solves the budget equation on the
    unpinned users, keeps primal-feasible candidates, and returns the powers
    with the best sum-rate. Exponential in the user count; |K| <= ~12 only.
    """
    diag = np.asarray(gram_inv_diag, dtype=float)
    rates = np.asarray(min_rates, dtype=float)
    n = diag.size
    base = noise_power * diag
    floors = noise_power * (np.exp2(rates) - 1.0) * diag
    if floors.sum() > p_max:
        raise ValueError("infeasible instance handed to the oracle")

    def objective(powers):
        return float(np.sum(np.log2(1.0 + powers / base)))

    best_powers, best_value = None, -np.inf
    for pinned in itertools.product([False, True], repeat=n):
        pinned = np.asarray(pinned)
        unpinned = ~pinned
        powers = floors.copy()
        if unpinned.any():
            mu = (p_max - floors[pinned].sum() + base[unpinned].sum()) / unpinned.sum()
            powers[unpinned] = mu - base[unpinned]
            if np.any(powers[unpinned] < floors[unpinned] - 1e-15 * p_max):
                continue
        if powers.sum() > p_max * (1.0 + 1e-12):
            continue
        value = objective(powers)
        if value > best_value:
            best_value, best_powers = value, powers
    return best_powers, best_value
