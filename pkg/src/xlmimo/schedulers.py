"""User-selection algorithms and the scheduling -> removal -> allocation pipeline.

Selectors return user indices in insertion order and break every tie toward
the lowest index, so runs reproduce bit-for-bit. Two families exist:

* budget-blind selectors (clique growth by cheapest single-user power, and
  channel-power ranking) whose output may be infeasible and is repaired by
  ``user_removal`` before allocation;
* self-stopping baselines (capacity-weighted clique growth, distance-priority
  selection, random order) that test affordability after every addition and
  stop at the first violation, dropping the violating user.

``schedule_and_allocate`` composes either family with floored water-filling
into a complete downlink schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import SystemConfig, User
from .errors import RankDeficient
from .graph import UserGraph, graph_from_arrays
from .power import PowerAllocation, min_power, single_user_min_power, waterfill
from .precoding import (achievable_rate, gram_inv_diag_from_gram, zf_precoder,
                        zf_sinr)

ALGORITHMS = ("cbs", "cpbs", "gwc", "dbs", "sdbs", "random")


@dataclass
class RealizationContext:
    """Per-population arrays shared by every selector, so running several
    algorithms over one realization never recomputes channels or graphs."""

    channels: np.ndarray = field(repr=False)         # (M, K) complex
    channel_powers: np.ndarray = field(repr=False)   # (K,) ||a_k||^2
    min_rates: np.ndarray = field(repr=False)        # (K,) bps/Hz
    radii: np.ndarray = field(repr=False)            # (K,) m
    states: np.ndarray = field(repr=False)           # (K,) 0/1
    noise_power: float
    p_max: float
    epsilon: float
    _correlations: np.ndarray | None = field(default=None, repr=False)
    _user_graph: UserGraph | None = field(default=None, repr=False)
    _capacity_graph: UserGraph | None = field(default=None, repr=False)

    @classmethod
    def from_users(cls, users: list[User], cfg: SystemConfig) -> "RealizationContext":
        channels = (np.column_stack([u.channel for u in users]) if users
                    else np.zeros((cfg.num_antennas, 0), dtype=complex))
        return cls(
            channels=channels,
            channel_powers=np.sum(np.abs(channels) ** 2, axis=0),
            min_rates=np.array([u.min_rate for u in users], dtype=float),
            radii=np.array([u.position.r for u in users], dtype=float),
            states=np.array([u.state for u in users], dtype=int),
            noise_power=cfg.noise_power,
            p_max=cfg.tx_power_budget,
            epsilon=cfg.epsilon,
        )

    @property
    def num_users(self) -> int:
        return self.channels.shape[1]

    def correlations(self) -> np.ndarray:
        if self._correlations is None:
            from .graph import correlation_matrix
            self._correlations = correlation_matrix(self.channels)
        return self._correlations

    def user_graph(self) -> UserGraph:
        """Compatibility graph weighted by single-user minimum powers."""
        if self._user_graph is None:
            corr = self.correlations() if self.num_users else None
            self._user_graph = graph_from_arrays(
                self.channels, self.min_rates, self.epsilon, self.noise_power,
                correlations=corr)
        return self._user_graph

    def capacity_graph(self) -> UserGraph:
        """Same adjacency, but vertices weighted by single-user capacity under
        a uniform P_max/K power split (the heaviest vertex is the best lone
        user, not the cheapest one)."""
        if self._capacity_graph is None:
            base = self.user_graph()
            uniform = self.p_max / max(self.num_users, 1)
            capacity = achievable_rate(uniform * self.channel_powers / self.noise_power)
            self._capacity_graph = UserGraph(adjacency=base.adjacency,
                                             weights=np.atleast_1d(capacity),
                                             correlations=base.correlations)
        return self._capacity_graph


def _gram_extend(gram: np.ndarray, channels: np.ndarray,
                 selected: list[int], v: int) -> np.ndarray:
    """Gram matrix of channels[:, selected + [v]] from the Gram of selected."""
    col = channels[:, v]
    n = gram.shape[0]
    out = np.empty((n + 1, n + 1), dtype=complex)
    if n:
        cross = channels[:, selected].conj().T @ col
        out[:n, :n] = gram
        out[:n, n] = cross
        out[n, :n] = cross.conj()
    out[n, n] = np.real(np.vdot(col, col))
    return out


def _floors_fit(gram: np.ndarray, rates: np.ndarray, noise_power: float,
                p_max: float):
    """(fits, gram_inv_diag) for the candidate set; rank-deficient sets never fit."""
    try:
        diag = gram_inv_diag_from_gram(gram)
    except RankDeficient:
        return False, None
    fits = float(np.sum(min_power(rates, diag, noise_power))) <= p_max
    return fits, diag


def cbs(g: UserGraph, p_max: float) -> list[int]:
    """Greedy budgeted clique growth.

    Seed at the globally cheapest vertex, then repeatedly add the cheapest
    vertex of the running common neighborhood, accumulating the weight total;
    stop after the addition that reaches the budget, or when the neighborhood
    empties. The output is always a clique; only its final member may push the
    weight total past the budget.
    """
    if g.num_vertices == 0:
        return []
    w = g.weights
    seed = int(np.argmin(w))
    clique = [seed]
    total = float(w[seed])
    if total >= p_max:
        return clique
    nbhd = g.adjacency[seed].copy()
    while nbhd.any():
        cand = np.flatnonzero(nbhd)
        v = int(cand[np.argmin(w[cand])])
        clique.append(v)
        total += float(w[v])
        if total >= p_max:
            break
        nbhd &= g.adjacency[v]
    return clique


def _removal_trace(scheduled, min_rates, channels, noise_power, p_max, gram=None):
    current = [int(k) for k in scheduled]
    removed: list[int] = []
    if not current:
        return current, removed, np.zeros(0)
    rates = np.asarray(min_rates, dtype=float)[current]
    if gram is None:
        sub = channels[:, current]
        gram = sub.conj().T @ sub
    powers = np.real(np.diag(gram)).copy()
    diag = np.zeros(0)
    while current:
        try:
            diag = gram_inv_diag_from_gram(gram)
            need = float(np.sum(min_power(rates, diag, noise_power)))
        except RankDeficient:
            need = float("inf")     # not jointly servable; keep removing
        if need <= p_max:
            break
        ties = np.flatnonzero(powers == powers.min())
        pos = int(min(ties, key=lambda i: current[i]))
        removed.append(current.pop(pos))
        gram = np.delete(np.delete(gram, pos, axis=0), pos, axis=1)
        powers = np.delete(powers, pos)
        rates = np.delete(rates, pos)
    if not current:
        diag = np.zeros(0)
    return current, removed, diag


def user_removal(scheduled, min_rates, channels, noise_power: float,
                 p_max: float) -> list[int]:
    """Restore affordability by dropping the weakest-channel user until the
    zero-forcing minimum powers fit the budget.

    Affordability is tested before any removal, so a feasible input comes back
    unchanged; the input set must be full rank. The empty set is feasible.
    """
    survivors, _, _ = _removal_trace(scheduled, min_rates, channels, noise_power, p_max)
    return survivors


def _cpbs_order(channel_powers: np.ndarray, su_powers: np.ndarray,
                p_max: float) -> list[int]:
    order = np.argsort(-channel_powers, kind="stable")
    scheduled: list[int] = []
    total = 0.0
    for k in order:
        scheduled.append(int(k))
        total += float(su_powers[k])
        if total >= p_max:
            break
    return scheduled


def cpbs(users: list[User], cfg: SystemConfig) -> list[int]:
    """Channel-power ranking: schedule the strongest remaining user until the
    accumulated single-user minimum powers reach the budget, or everyone is
    scheduled. The user that crosses the budget stays in the set."""
    ctx = RealizationContext.from_users(users, cfg)
    su = np.atleast_1d(single_user_min_power(ctx.min_rates, ctx.channel_powers,
                                             ctx.noise_power))
    return _cpbs_order(ctx.channel_powers, su, ctx.p_max)


def _gwc_trace(g: UserGraph, ctx: RealizationContext):
    sel: list[int] = []
    gram = np.zeros((0, 0), dtype=complex)
    diag = np.zeros(0)
    candidates = np.ones(g.num_vertices, dtype=bool)
    rejected = None
    reason = "exhausted"
    w = g.weights
    while candidates.any():
        cand = np.flatnonzero(candidates)
        v = int(cand[np.argmax(w[cand])])
        new_gram = _gram_extend(gram, ctx.channels, sel, v)
        fits, new_diag = _floors_fit(new_gram, ctx.min_rates[sel + [v]],
                                     ctx.noise_power, ctx.p_max)
        if not fits:
            rejected = v
            reason = "infeasible"
            break
        sel.append(v)
        gram = new_gram
        diag = new_diag
        candidates &= g.adjacency[v]
    return sel, diag, {"rejected_user": rejected, "stop_reason": reason}


def gwc(g: UserGraph, users: list[User], cfg: SystemConfig) -> list[int]:
    """Greedy heaviest clique on a capacity-weighted compatibility graph, with
    an affordability test after every addition: at the first set whose rate
    floors no longer fit the budget, drop that last user and stop."""
    ctx = RealizationContext.from_users(users, cfg)
    sel, _, _ = _gwc_trace(g, ctx)
    return sel


def _distance_trace(ctx: RealizationContext, simplified: bool):
    remaining = np.ones(ctx.num_users, dtype=bool)
    sel: list[int] = []
    gram = np.zeros((0, 0), dtype=complex)
    committed_diag = np.zeros(0)
    prev_sum_rate = 0.0
    rejected = None
    reason = "exhausted"
    while remaining.any():
        cand = np.flatnonzero(remaining)
        if simplified or not sel:
            metric = ctx.radii[cand]
        else:
            # Equivalent distance: the plain distance inflated by how much the
            # candidate's channel leaks into the already-committed precoders.
            precoders = zf_precoder(ctx.channels[:, sel]).vectors
            leak = np.abs(ctx.channels[:, cand].conj().T @ precoders) ** 2
            metric = ctx.radii[cand] * (1.0 + leak.sum(axis=1) / ctx.channel_powers[cand])
        v = int(cand[np.argmin(metric)])
        new_gram = _gram_extend(gram, ctx.channels, sel, v)
        rates = ctx.min_rates[sel + [v]]
        fits, diag = _floors_fit(new_gram, rates, ctx.noise_power, ctx.p_max)
        if not fits:
            rejected = v
            reason = "infeasible"
            break
        alloc = waterfill(diag, rates, ctx.noise_power, ctx.p_max)
        sum_rate = float(np.sum(achievable_rate(alloc.powers / (ctx.noise_power * diag))))
        if sum_rate < prev_sum_rate:
            reason = "sum_rate_drop"
            break
        sel.append(v)
        gram = new_gram
        committed_diag = diag
        prev_sum_rate = sum_rate
        remaining[v] = False
    return sel, committed_diag, {"rejected_user": rejected, "stop_reason": reason}


def dbs(users: list[User], cfg: SystemConfig) -> list[int]:
    """Distance-priority selection with interference awareness: each round
    schedules the user with the smallest equivalent distance (see
    ``_distance_trace``), stopping when an addition would either break
    affordability (that user is dropped) or reduce the water-filled sum-rate
    (the addition is not kept)."""
    sel, _, _ = _distance_trace(RealizationContext.from_users(users, cfg), simplified=False)
    return sel


def sdbs(users: list[User], cfg: SystemConfig) -> list[int]:
    """dbs with the metric simplified to the plain distance to the array."""
    sel, _, _ = _distance_trace(RealizationContext.from_users(users, cfg), simplified=True)
    return sel


def _random_trace(ctx: RealizationContext, rng: np.random.Generator):
    sel: list[int] = []
    gram = np.zeros((0, 0), dtype=complex)
    diag = np.zeros(0)
    rejected = None
    reason = "exhausted"
    for v in rng.permutation(ctx.num_users):
        v = int(v)
        new_gram = _gram_extend(gram, ctx.channels, sel, v)
        fits, new_diag = _floors_fit(new_gram, ctx.min_rates[sel + [v]],
                                     ctx.noise_power, ctx.p_max)
        if not fits:
            rejected = v
            reason = "infeasible"
            break
        sel.append(v)
        gram = new_gram
        diag = new_diag
    return sel, diag, {"rejected_user": rejected, "stop_reason": reason}


def random_sched(users: list[User], cfg: SystemConfig,
                 rng: np.random.Generator) -> list[int]:
    """Schedule a uniformly random order, stopping (and dropping the violating
    user) at the first set whose rate floors no longer fit the budget."""
    sel, _, _ = _random_trace(RealizationContext.from_users(users, cfg), rng)
    return sel


def _rank_prune(selected: list[int], channels: np.ndarray):
    """Drop later-added users until the scheduled columns are independent,
    returning the survivors and their Gram matrix.

    Continuous channel draws are full rank with probability one; this guards
    degenerate hand-built populations (and candidate sets larger than the
    antenna count).
    """
    pruned = list(selected)
    m = channels.shape[0]
    if len(pruned) > m:
        del pruned[m:]
    sub = channels[:, pruned]
    gram = sub.conj().T @ sub
    while pruned:
        try:
            gram_inv_diag_from_gram(gram)
            break
        except RankDeficient:
            pruned.pop()
            gram = gram[:-1, :-1]
    return pruned, gram


@dataclass
class ScheduleOutcome:
    """One algorithm's complete result on one realization."""

    algorithm: str
    scheduled: list[int]
    allocation: PowerAllocation
    rates: np.ndarray = field(repr=False)            # bps/Hz per scheduled user
    gram_inv_diag: np.ndarray = field(repr=False)
    min_rates: np.ndarray = field(repr=False)        # floors of scheduled users
    radii: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    noise_power: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def num_scheduled(self) -> int:
        return len(self.scheduled)


def _empty_outcome(algorithm: str, noise_power: float, diagnostics: dict) -> ScheduleOutcome:
    return ScheduleOutcome(
        algorithm=algorithm, scheduled=[],
        allocation=PowerAllocation(powers=np.zeros(0), water_level=0.0, feasible=True),
        rates=np.zeros(0), gram_inv_diag=np.zeros(0), min_rates=np.zeros(0),
        radii=np.zeros(0), states=np.zeros(0, dtype=int), noise_power=noise_power,
        diagnostics=diagnostics)


def schedule_and_allocate(algorithm: str, users: list[User], cfg: SystemConfig,
                          rng: np.random.Generator | None = None,
                          context: RealizationContext | None = None) -> ScheduleOutcome:
    """Run one selector end to end and price out the resulting schedule.

    Budget-blind selectors are followed by rank pruning and user removal;
    self-stopping baselines already guarantee a feasible set. Water-filling
    then spends the budget and per-user rates come from the zero-forcing SINR.
    """
    ctx = context if context is not None else RealizationContext.from_users(users, cfg)
    diagnostics: dict = {"rejected_user": None, "stop_reason": None}

    if algorithm == "cbs":
        candidate = cbs(ctx.user_graph(), ctx.p_max)
        sel, diag = _repair(candidate, ctx, diagnostics)
    elif algorithm == "cpbs":
        su = np.atleast_1d(single_user_min_power(ctx.min_rates, ctx.channel_powers,
                                                 ctx.noise_power))
        candidate = _cpbs_order(ctx.channel_powers, su, ctx.p_max)
        sel, diag = _repair(candidate, ctx, diagnostics)
    elif algorithm == "gwc":
        sel, diag, extra = _gwc_trace(ctx.capacity_graph(), ctx)
        diagnostics.update(extra)
    elif algorithm == "dbs":
        sel, diag, extra = _distance_trace(ctx, simplified=False)
        diagnostics.update(extra)
    elif algorithm == "sdbs":
        sel, diag, extra = _distance_trace(ctx, simplified=True)
        diagnostics.update(extra)
    elif algorithm == "random":
        if rng is None:
            raise ValueError("random scheduling needs an rng")
        sel, diag, extra = _random_trace(ctx, rng)
        diagnostics.update(extra)
    else:
        raise ValueError(f"unknown algorithm '{algorithm}', expected one of {ALGORITHMS}")

    if not sel:
        return _empty_outcome(algorithm, ctx.noise_power, diagnostics)
    alloc = waterfill(diag, ctx.min_rates[sel], ctx.noise_power, ctx.p_max)
    rates = np.atleast_1d(achievable_rate(zf_sinr(alloc.powers, diag, ctx.noise_power)))
    return ScheduleOutcome(
        algorithm=algorithm, scheduled=sel, allocation=alloc, rates=rates,
        gram_inv_diag=diag, min_rates=ctx.min_rates[sel], radii=ctx.radii[sel],
        states=ctx.states[sel], noise_power=ctx.noise_power, diagnostics=diagnostics)


def _repair(candidate: list[int], ctx: RealizationContext, diagnostics: dict):
    pruned, gram = _rank_prune(candidate, ctx.channels)
    sel, removed, diag = _removal_trace(pruned, ctx.min_rates, ctx.channels,
                                        ctx.noise_power, ctx.p_max, gram=gram)
    diagnostics["candidate_size"] = len(candidate)
    diagnostics["rank_pruned"] = len(candidate) - len(pruned)
    diagnostics["removed_users"] = removed
    return sel, diag
