"""Monte-Carlo experiment driver and ensemble metric estimators.

Each realization draws a fresh user population (positions, states, rate
floors, channels) from a sub-stream keyed by ``(master_seed,
realization_index)``, so realizations are independent of execution order and
worker count; every algorithm under comparison sees the identical population.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import MAX_MIN_RATE, SystemConfig, sample_users
from .errors import ConfigInvalid, EmptyEnsemble
from .schedulers import (ALGORITHMS, RealizationContext, ScheduleOutcome,
                         schedule_and_allocate)

SWEEP_VARIABLES = ("p_max", "epsilon", "rho", "min_rate")
CCDF_GRID_POINTS = 100


@dataclass(frozen=True)
class ExperimentSpec:
    """A sweep: base config, the variable swept, its values, the algorithms
    compared, and the realization count per sweep point."""

    config: SystemConfig
    sweep_variable: str = "p_max"
    sweep_values: tuple[float, ...] = (1.0,)
    algorithms: tuple[str, ...] = ALGORITHMS
    num_realizations: int = 50

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigInvalid("sweep.variable",
                                f"must be one of {SWEEP_VARIABLES}")
        if not self.sweep_values:
            raise ConfigInvalid("sweep.values", "must be non-empty")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ConfigInvalid("algorithms", f"unknown algorithm '{alg}'")
        if self.num_realizations < 1:
            raise ConfigInvalid("num_realizations", "must be >= 1")
        for v in self.sweep_values:
            _check_sweep_value(self.sweep_variable, v)

    @property
    def master_seed(self) -> int:
        return self.config.rng_seed


def _check_sweep_value(variable: str, value: float):
    if variable == "p_max" and value <= 0:
        raise ConfigInvalid("sweep.values", "power budgets must be positive")
    if variable == "epsilon" and not 0.0 < value < 1.0:
        raise ConfigInvalid("sweep.values", "epsilon values must lie in (0, 1)")
    if variable == "rho" and not 0.0 <= value <= 1.0:
        raise ConfigInvalid("sweep.values", "LoS probabilities must lie in [0, 1]")
    if variable == "min_rate" and not 0.0 <= value <= MAX_MIN_RATE:
        raise ConfigInvalid("sweep.values",
                            f"rate floors must lie in [0, {MAX_MIN_RATE}]")


def apply_sweep(cfg: SystemConfig, variable: str, value: float) -> SystemConfig:
    """Config with one swept field replaced; ``min_rate`` pins a common floor."""
    if variable == "p_max":
        return dataclasses.replace(cfg, tx_power_budget=float(value))
    if variable == "epsilon":
        return dataclasses.replace(cfg, epsilon=float(value))
    if variable == "rho":
        return dataclasses.replace(cfg, los_probability=float(value))
    if variable == "min_rate":
        return dataclasses.replace(cfg, min_rate_range=(float(value), float(value)))
    raise ConfigInvalid("sweep.variable", f"must be one of {SWEEP_VARIABLES}")


def realization_rngs(master_seed: int, realization_index: int):
    """(population rng, scheduling rng) for one realization, keyed so that the
    first S sub-streams never change when S grows."""
    root = np.random.SeedSequence(entropy=(int(master_seed), int(realization_index)))
    population, scheduling = root.spawn(2)
    return np.random.default_rng(population), np.random.default_rng(scheduling)


def run_realization(cfg: SystemConfig, algorithms, realization_index: int) -> list[ScheduleOutcome]:
    """Draw one population and run every algorithm on it (paired comparison)."""
    population_rng, scheduling_rng = realization_rngs(cfg.rng_seed, realization_index)
    users = sample_users(cfg, population_rng)
    ctx = RealizationContext.from_users(users, cfg)
    return [schedule_and_allocate(alg, users, cfg, rng=scheduling_rng, context=ctx)
            for alg in algorithms]


def sum_rate(outcome: ScheduleOutcome) -> float:
    """Achievable sum-rate of a schedule: sum_k log2(1 + p_k / (sigma_w^2
    [(A^H A)^{-1}]_{kk})) in bps/Hz."""
    if outcome.num_scheduled == 0:
        return 0.0
    sinr = outcome.allocation.powers / (outcome.noise_power * outcome.gram_inv_diag)
    return float(np.sum(np.log1p(sinr)) / np.log(2.0))


def ccdf_estimate(outcomes, r):
    """Survival probability of the scheduled-user distance, pooled over the
    ensemble: (#scheduled users with r_k > r) / (#scheduled users).

    ``r`` may be a scalar or a grid. Raises EmptyEnsemble when nothing was
    scheduled anywhere.
    """
    outcomes = list(outcomes)
    radii = (np.concatenate([np.asarray(o.radii, dtype=float) for o in outcomes])
             if outcomes else np.zeros(0))
    if radii.size == 0:
        raise EmptyEnsemble("no scheduled users in the ensemble")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    values = (radii[None, :] > r_arr[:, None]).sum(axis=1) / radii.size
    return float(values[0]) if np.asarray(r).ndim == 0 else values


def state_sched_prob(outcomes) -> tuple[float, float]:
    """(P_LoS, P_NLoS): fractions of scheduled users in each channel state,
    pooled over the ensemble; complementary by construction."""
    outcomes = list(outcomes)
    states = (np.concatenate([np.asarray(o.states, dtype=int) for o in outcomes])
              if outcomes else np.zeros(0, dtype=int))
    if states.size == 0:
        raise EmptyEnsemble("no scheduled users in the ensemble")
    p_los = float(np.count_nonzero(states == 1)) / states.size
    return p_los, 1.0 - p_los


@dataclass
class RealizationSummary:
    """Compact per-realization record used for aggregation and trend checks."""

    realization: int
    algorithm: str
    sum_rate: float
    num_scheduled: int
    avg_rate: float
    total_power: float
    worst_rate_slack: float      # min over users of (rate - floor); inf if empty
    radii: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)


def summarize(outcome: ScheduleOutcome, realization_index: int) -> RealizationSummary:
    total_rate = sum_rate(outcome)
    n = outcome.num_scheduled
    slack = float(np.min(outcome.rates - outcome.min_rates)) if n else float("inf")
    return RealizationSummary(
        realization=realization_index,
        algorithm=outcome.algorithm,
        sum_rate=total_rate,
        num_scheduled=n,
        avg_rate=total_rate / n if n else 0.0,
        total_power=outcome.allocation.total,
        worst_rate_slack=slack,
        radii=np.asarray(outcome.radii, dtype=float),
        states=np.asarray(outcome.states, dtype=int),
    )


def _realization_summaries(cfg, algorithms, index):
    return [summarize(o, index) for o in run_realization(cfg, algorithms, index)]


def _pool_worker(args):
    return _realization_summaries(*args)


def run_realizations(cfg: SystemConfig, algorithms, indices,
                     workers: int = 1) -> list[RealizationSummary]:
    """Summaries for the given realization indices, ordered by (index,
    algorithm). With workers > 1 the realizations run in separate processes;
    results are identical to the serial order."""
    algorithms = tuple(algorithms)
    idx = [int(i) for i in indices]
    if workers <= 1 or len(idx) <= 1:
        batches = [_realization_summaries(cfg, algorithms, i) for i in idx]
    else:
        tasks = [(cfg, algorithms, i) for i in idx]
        chunk = max(1, len(idx) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_pool_worker, tasks, chunksize=chunk))
    return [s for batch in batches for s in batch]


@dataclass
class MetricsRow:
    """Aggregated metrics for one (sweep value, algorithm) cell."""

    sweep_variable: str
    sweep_value: float
    algorithm: str
    mean_sum_rate: float
    mean_num_scheduled: float
    mean_avg_rate: float
    ccdf_r: np.ndarray = field(repr=False)
    ccdf: np.ndarray = field(repr=False)
    p_los: float = float("nan")
    p_nlos: float = float("nan")
    num_realizations: int = 0
    seed: int = 0


def ccdf_grid(cfg: SystemConfig) -> np.ndarray:
    """Fixed uniform distance grid the CCDF is reported on."""
    return np.linspace(0.0, cfg.r_max, CCDF_GRID_POINTS)


def aggregate(summaries: list[RealizationSummary], algorithm: str,
              sweep_variable: str, sweep_value: float, grid: np.ndarray,
              seed: int) -> MetricsRow:
    """Reduce one algorithm's summaries into a metrics row. Deterministic:
    plain means in realization order, pooled-count estimators for the CCDF and
    the state probabilities (empty ensembles yield NaN there)."""
    sub = [s for s in summaries if s.algorithm == algorithm]
    radii = np.concatenate([s.radii for s in sub]) if sub else np.zeros(0)
    states = np.concatenate([s.states for s in sub]) if sub else np.zeros(0, dtype=int)
    if radii.size:
        ccdf = (radii[None, :] > grid[:, None]).sum(axis=1) / radii.size
        p_los = float(np.count_nonzero(states == 1)) / states.size
        p_nlos = 1.0 - p_los
    else:
        ccdf = np.full(grid.shape, float("nan"))
        p_los = p_nlos = float("nan")
    return MetricsRow(
        sweep_variable=sweep_variable,
        sweep_value=float(sweep_value),
        algorithm=algorithm,
        mean_sum_rate=float(np.mean([s.sum_rate for s in sub])) if sub else 0.0,
        mean_num_scheduled=float(np.mean([s.num_scheduled for s in sub])) if sub else 0.0,
        mean_avg_rate=float(np.mean([s.avg_rate for s in sub])) if sub else 0.0,
        ccdf_r=grid.copy(),
        ccdf=ccdf,
        p_los=p_los,
        p_nlos=p_nlos,
        num_realizations=len(sub),
        seed=seed,
    )


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> list[MetricsRow]:
    """Run the full sweep: for every sweep value, S realizations of every
    algorithm, reduced to one MetricsRow per (value, algorithm) in the order
    given by the spec."""
    rows: list[MetricsRow] = []
    for value in spec.sweep_values:
        cfg = apply_sweep(spec.config, spec.sweep_variable, value)
        summaries = run_realizations(cfg, spec.algorithms,
                                     range(spec.num_realizations), workers)
        grid = ccdf_grid(cfg)
        for alg in spec.algorithms:
            rows.append(aggregate(summaries, alg, spec.sweep_variable, value,
                                  grid, spec.master_seed))
    return rows
