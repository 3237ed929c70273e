"""Rate-floor constrained power allocation.

Serving user k at its floor R_k through a zero-forcing link costs
p_k = sigma_w^2 (2^R_k - 1) [(A^H A)^{-1}]_{kk}; a scheduled set is feasible
exactly when those minimum powers fit the budget. The optimal allocation is
water-filling floored at the per-user minimum: p_k* = max(p_k, mu - sigma_w^2
[(A^H A)^{-1}]_{kk}) with the water level mu chosen to spend the full budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible
from .precoding import gram_inverse_diag

# Budget match required of the water-level search, relative to the budget.
BUDGET_RELTOL = 1e-9
WATERFILL_MAX_ITERS = 200


@dataclass
class PowerAllocation:
    """Allocated powers (watts), water level, and a feasibility flag."""

    powers: np.ndarray = field(repr=False)
    water_level: float
    feasible: bool

    @property
    def total(self) -> float:
        return float(np.sum(self.powers))


def min_power(min_rate, gram_inv_diag_k, noise_power: float):
    """Minimum power for the rate floor under zero-forcing:
    sigma_w^2 (2^R - 1) [(A^H A)^{-1}]_{kk}. Vectorizes."""
    return noise_power * (np.exp2(np.asarray(min_rate, dtype=float)) - 1.0) \
        * np.asarray(gram_inv_diag_k, dtype=float)


def single_user_min_power(min_rate, channel_power, noise_power: float):
    """Minimum power for the rate floor if the user were served alone:
    sigma_w^2 (2^R - 1) / ||a||^2. Never exceeds min_power for the same user
    inside any full-rank set. Vectorizes."""
    return noise_power * (np.exp2(np.asarray(min_rate, dtype=float)) - 1.0) \
        / np.asarray(channel_power, dtype=float)


def min_powers_from_gram_diag(min_rates, gram_inv_diag, noise_power: float) -> np.ndarray:
    return np.atleast_1d(min_power(min_rates, gram_inv_diag, noise_power))


def check_feasibility(matrix, min_rates, noise_power: float, p_max: float) -> bool:
    """True iff the floors are jointly affordable: sum of zero-forcing minimum
    powers does not exceed the budget (boundary equality counts as feasible).

    Raises RankDeficient for dependent columns; the empty set is feasible.
    """
    rates = np.asarray(min_rates, dtype=float)
    if rates.size == 0:
        return True
    diag = gram_inverse_diag(matrix)
    return float(np.sum(min_power(rates, diag, noise_power))) <= p_max


def quick_infeasible(channel_powers, min_rates, noise_power: float, p_max: float) -> bool:
    """Matrix-inverse-free sufficient test for infeasibility.

    Even interference-free transmission costs single_user_min_power per user,
    which lower-bounds the zero-forcing minimum power; if those already sum to
    the budget or beyond, no allocation can work. False is inconclusive.
    """
    su = single_user_min_power(np.asarray(min_rates, dtype=float),
                               np.asarray(channel_powers, dtype=float), noise_power)
    return bool(np.sum(su) >= p_max)


def waterfill(gram_inv_diag, min_rates, noise_power: float, p_max: float) -> PowerAllocation:
    """Budget-exhausting water-filling with per-user floors.

    p_k* = max(floor_k, mu - sigma_w^2 diag_k); the water level mu is found by
    bisection (the spent power is nondecreasing and piecewise linear in mu),
    then snapped to the exact budget on the active linear piece.

    Raises Infeasible when the floors alone exceed the budget.
    """
    diag = np.atleast_1d(np.asarray(gram_inv_diag, dtype=float))
    rates = np.atleast_1d(np.asarray(min_rates, dtype=float))
    if diag.size != rates.size:
        raise ValueError("gram_inv_diag and min_rates must have equal length")
    n = diag.size
    if n == 0:
        return PowerAllocation(powers=np.zeros(0), water_level=0.0, feasible=True)

    floors = min_powers_from_gram_diag(rates, diag, noise_power)
    base = noise_power * diag          # what a unit of rate "costs" user k
    floor_sum = float(floors.sum())
    if floor_sum > p_max:
        raise Infeasible(f"rate floors need {floor_sum:.6g} W > budget {p_max:.6g} W")

    lo = float(np.min(floors + base))  # every user pinned at its floor
    hi = float(p_max + np.max(base))   # spent power >= p_max for sure
    tol = BUDGET_RELTOL * p_max
    mu = lo
    for _ in range(WATERFILL_MAX_ITERS):
        mu = 0.5 * (lo + hi)
        spent = float(np.maximum(floors, mu - base).sum())
        if abs(spent - p_max) <= tol:
            break
        if spent < p_max:
            lo = mu
        else:
            hi = mu

    # Snap mu to the exact budget within the linear piece identified above.
    unpinned = (mu - base) > floors
    if unpinned.any():
        exact = (p_max - float(floors[~unpinned].sum())
                 + float(base[unpinned].sum())) / int(unpinned.sum())
        still_unpinned = (exact - base) >= floors
        if np.array_equal(still_unpinned, unpinned):
            mu = exact

    powers = np.maximum(floors, mu - base)
    return PowerAllocation(powers=powers, water_level=float(mu), feasible=True)
