"""Renewal-path simulation, recurrence times, the hazard-integral compensator,
cycle variables, and empirical checks of the scaled-supremum limits.

Counting convention: N(t) = sum_{n>=0} 1{S_n <= t} counts the renewal at the
origin of a zero-delayed path, so the centered martingale reads
N(t) - 1 - Lambda(t).  The ``events`` array of a path stores only the
strictly positive renewals; ``count`` adds the origin back for pure paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import Distribution, Exponential, Gamma, ShiftedPareto, Uniform
from .errors import FiniteSupportError

__all__ = [
    "RenewalPath",
    "CycleHazards",
    "simulate_path",
    "draw_interarrivals",
    "sample_forward_recurrence",
    "recurrence_times",
    "compensator_at",
    "cycle_hazards",
    "scaled_compensator_sup",
    "scaled_recurrence_sup",
    "rootzen_uniform_error",
]


def draw_interarrivals(dist: Distribution, size, rng: np.random.Generator) -> np.ndarray:
    """Fast interarrival draws from numpy's native samplers.

    Deliberately independent of the inverse-CDF ``Distribution.sample`` so
    Monte Carlo checks exercise a second code path.
    """
    if isinstance(dist, Exponential):
        return rng.exponential(1.0 / dist.rate_, size)
    if isinstance(dist, Gamma):
        return rng.gamma(dist.shape, 1.0 / dist.rate_, size)
    if isinstance(dist, Uniform):
        return rng.uniform(dist.lo, dist.hi, size)
    if isinstance(dist, ShiftedPareto):
        return dist.scale * rng.pareto(dist.tail, size)
    return dist.sample(rng, size)


@dataclass(frozen=True)
class RenewalPath:
    """One realization: strictly increasing positive event times, run past the horizon."""

    delay: float
    events: np.ndarray
    horizon: float

    def __post_init__(self):
        events = np.asarray(self.events, dtype=float)
        object.__setattr__(self, "events", events)
        if events.size == 0 or events[0] <= 0.0:
            raise ValueError("paths must contain at least one strictly positive event")
        if np.any(np.diff(events) <= 0.0):
            raise ValueError("event times must be strictly increasing")
        if events[-1] < self.horizon:
            raise ValueError("simulation must run past the horizon")

    @property
    def is_pure(self) -> bool:
        return self.delay == 0.0

    def count(self, t: float) -> int:
        """N(t): number of renewals in [0, t], counting the origin for pure paths."""
        base = 1 if self.is_pure else 0
        return base + int(np.searchsorted(self.events, t, side="right"))

    def renewals(self) -> np.ndarray:
        """All renewal epochs including the origin for pure paths."""
        if self.is_pure:
            return np.concatenate(([0.0], self.events))
        return self.events

    def interarrivals(self) -> np.ndarray:
        """tau_1, tau_2, ... (the delay is not an interarrival)."""
        return np.diff(self.renewals()) if self.is_pure else np.diff(self.events)


def simulate_path(
    dist: Distribution,
    horizon: float,
    delay="zero",
    rng: np.random.Generator | None = None,
) -> RenewalPath:
    """Simulate a renewal path until the first event strictly past the horizon.

    ``delay`` is "zero", "stationary", or a fixed nonnegative time.
    """
    if rng is None:
        raise ValueError("an explicitly seeded rng is required")
    if horizon <= 0.0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    if delay == "zero":
        tau0 = 0.0
    elif delay == "stationary":
        tau0 = dist.sample_stationary_delay(rng)
    else:
        tau0 = float(delay)
        if tau0 < 0.0:
            raise ValueError(f"fixed delay must be >= 0, got {tau0}")

    mean = dist.mean()
    chunks = []
    total = tau0
    remaining = horizon - total
    while True:
        expect = max(remaining, 0.0) / mean
        block = int(1.2 * expect + 10.0 * math.sqrt(expect + 1.0) + 16.0)
        draws = draw_interarrivals(dist, block, rng)
        chunks.append(draws)
        total += float(draws.sum())
        if total > horizon:
            break
        remaining = horizon - total
    taus = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
    events = tau0 + np.cumsum(taus)
    if tau0 > 0.0:
        events = np.concatenate(([tau0], events))
    keep = int(np.searchsorted(events, horizon, side="right")) + 1
    return RenewalPath(tau0, events[:keep], horizon)


def sample_forward_recurrence(
    dist: Distribution,
    t: float,
    n: int,
    rng: np.random.Generator,
    chunk: int = 20000,
) -> np.ndarray:
    """n independent draws of B_t for the zero-delayed process, by direct
    block simulation of partial sums until they pass t."""
    mean = dist.mean()
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = min(chunk, n - filled)
        width = int(1.25 * t / mean + 10.0 * math.sqrt(t / mean + 1.0) + 16.0)
        totals = np.cumsum(draw_interarrivals(dist, (m, width), rng), axis=1)
        last = totals[:, -1].copy()
        rows = np.arange(m)
        result = np.full(m, np.nan)
        done = last > t
        if np.any(done):
            idx = np.argmax(totals[done] > t, axis=1)
            result[done] = totals[done, idx] - t
        while not np.all(done):
            todo = ~done
            extra = np.cumsum(draw_interarrivals(dist, (int(todo.sum()), width), rng), axis=1)
            extra += last[todo, None]
            sub_done = extra[:, -1] > t
            hit = extra > t
            first = np.argmax(hit, axis=1)
            vals = extra[np.arange(extra.shape[0]), first] - t
            sub_rows = rows[todo]
            result[sub_rows[sub_done]] = vals[sub_done]
            last[sub_rows] = extra[:, -1]
            done[sub_rows[sub_done]] = True
        out[filled : filled + m] = result
        filled += m
    return out


def recurrence_times(path: RenewalPath, t: float) -> tuple[float, float]:
    """(A_t, B_t): elapsed time since the last renewal <= t and time to the next.

    For a delayed path before its first renewal, A_t falls back to the time
    since the origin.
    """
    if t < 0.0 or t > path.horizon:
        raise ValueError(f"t = {t:g} outside [0, {path.horizon:g}]")
    r = path.renewals()
    idx = int(np.searchsorted(r, t, side="right"))
    last = r[idx - 1] if idx >= 1 else 0.0
    return t - float(last), float(r[idx]) - t


def compensator_at(path: RenewalPath, dist: Distribution, t: float) -> float:
    """Lambda(t) = sum of full-cycle hazard integrals plus the running partial.

    Requires a zero-delayed path (the hazard clock starts at the origin).
    """
    if not path.is_pure:
        raise ValueError("the compensator decomposition assumes a zero-delayed path")
    if t < 0.0 or t > path.horizon:
        raise ValueError(f"t = {t:g} outside [0, {path.horizon:g}]")
    e = path.events
    k = int(np.searchsorted(e, t, side="right"))
    renewals = np.concatenate(([0.0], e[:k]))
    taus = np.diff(renewals)
    full = float(np.sum(dist.cumulative_hazard(taus))) if taus.size else 0.0
    return full + float(dist.cumulative_hazard(t - renewals[-1]))


@dataclass(frozen=True)
class CycleHazards:
    """xi_i = integrated hazard over cycle i; distribution-free standard exponentials."""

    xi: np.ndarray


def cycle_hazards(path: RenewalPath, dist: Distribution) -> CycleHazards:
    """xi_i = -log(1 - F(tau_i)) for every completed cycle starting within the horizon.

    Inclusion is decided by the cycle's start (a stopping time), not its end;
    cutting the straddling cycle would length-bias the pool and break the
    standard-exponential law of the xi.
    """
    if not path.is_pure:
        raise ValueError("cycle hazards are defined for zero-delayed paths")
    taus = np.diff(np.concatenate(([0.0], path.events)))
    return CycleHazards(np.asarray(dist.cumulative_hazard(taus), dtype=float))


def scaled_compensator_sup(path: RenewalPath, dist: Distribution, T: float, p: float) -> float:
    """sup over v in [0,1] of the running-cycle hazard integral of Lambda at Tv,
    scaled by T^-p.  Within a cycle the integral is nondecreasing, so the sup
    is attained at a cycle boundary or at v = 1."""
    if not path.is_pure:
        raise ValueError("zero-delayed path required")
    if T > path.horizon:
        raise ValueError("T beyond the simulated horizon")
    e = path.events
    k = int(np.searchsorted(e, T, side="right"))
    renewals = np.concatenate(([0.0], e[:k]))
    taus = np.diff(renewals)
    best = float(np.max(dist.cumulative_hazard(taus))) if taus.size else 0.0
    partial = float(dist.cumulative_hazard(T - renewals[-1]))
    return max(best, partial) / T**p


def scaled_recurrence_sup(path: RenewalPath, T: float, p: float) -> tuple[float, float]:
    """(sup A, sup B) over [0, T], each scaled by T^{-1/p}.

    B attains the full span of every cycle starting in [0, T] (the straddling
    cycle included); A attains completed spans plus the final partial age.
    """
    if T > path.horizon:
        raise ValueError("T beyond the simulated horizon")
    r = path.renewals()
    if r[0] > 0.0:
        r = np.concatenate(([0.0], r))  # delayed path: B_0 is the delay itself
    idx = int(np.searchsorted(r, T, side="right"))
    spans = np.diff(r[: idx + 1])
    sup_b = float(np.max(spans))
    completed = spans[:-1]
    sup_a = max(float(np.max(completed)) if completed.size else 0.0, T - float(r[idx - 1]))
    scale = T ** (1.0 / p)
    return sup_a / scale, sup_b / scale


def path_max_statistic(path: RenewalPath, dist: Distribution, T: float, statistic: str) -> float:
    """max over cycles 1..N(T) of tau_k or of xi_k (full straddler span)."""
    r = path.renewals()
    idx = int(np.searchsorted(r, T, side="right"))
    taus = np.diff(r[: idx + 1])
    if statistic == "max-tau":
        return float(np.max(taus))
    if statistic == "max-xi":
        return float(np.max(dist.cumulative_hazard(taus)))
    raise ValueError(f"unknown statistic {statistic!r}")


def rootzen_uniform_error(
    dist: Distribution,
    T: float,
    n_paths: int,
    statistic: str,
    rng: np.random.Generator,
) -> float:
    """sup_x |F_T(x) - G(x)^{mT}| for the per-path cycle maximum over [0, T].

    G is the single-cycle law: standard exponential for max-xi, F itself for
    max-tau.  The sup is evaluated at the sample points (both sides of each
    jump) plus a thousand-point quantile lattice of G.
    """
    if statistic == "max-tau" and math.isfinite(dist.support_end()):
        raise FiniteSupportError("the cycle-max law has bounded support; G^{mT} degenerates")
    samples = np.empty(n_paths)
    for i in range(n_paths):
        path = simulate_path(dist, T, "zero", rng)
        samples[i] = path_max_statistic(path, dist, T, statistic)
    samples.sort()
    exponent = dist.rate() * T

    if statistic == "max-xi":
        g_cdf = lambda x: -np.expm1(-np.asarray(x, dtype=float))
        g_quantile = lambda u: -np.log1p(-u)
    else:
        g_cdf = lambda x: np.asarray(dist.cdf(x), dtype=float)
        g_quantile = dist.quantile

    target = np.power(np.clip(g_cdf(samples), 0.0, 1.0), exponent)
    upper = np.arange(1, n_paths + 1) / n_paths
    lower = np.arange(0, n_paths) / n_paths
    err = float(np.max(np.maximum(np.abs(upper - target), np.abs(lower - target))))

    lattice = g_quantile((np.arange(1, 1001)) / 1001.0)
    emp = np.searchsorted(samples, lattice, side="right") / n_paths
    target_lat = np.power(np.clip(g_cdf(lattice), 0.0, 1.0), exponent)
    return max(err, float(np.max(np.abs(emp - target_lat))))
