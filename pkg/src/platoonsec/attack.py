"""Sequential gain-modification attacks: schedules, budgets, affected spans.

An attack perturbs the velocity gain, but only gains sampled at trigger
instants take effect; a vehicle holding a clean input keeps it until its
next trigger, so the span actually affected by an attack is bracketed by
trigger instants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "AttackBudget",
    "AttackSchedule",
    "AffectedIntervals",
    "BudgetReport",
    "is_attacked",
    "effective_gain",
    "verify_budget",
    "affected_intervals",
    "random_schedule",
    "intervals_from_seconds",
]


@dataclass(frozen=True)
class AttackBudget:
    """Linear-in-time caps on total attacked time and attack count.

    zeta0 : duration offset, seconds
    tau0  : duration rate, dimensionless fraction of elapsed time
    F0    : count offset
    f0    : count rate, attacks per second
    """

    zeta0: float
    tau0: float
    F0: float
    f0: float

    def __post_init__(self):
        if self.zeta0 < 0:
            raise ValueError("zeta0 must be nonnegative")
        if not 0 < self.tau0 < 1:
            raise ValueError("tau0 must lie in (0, 1)")
        if self.F0 < 0:
            raise ValueError("F0 must be nonnegative")
        if self.f0 <= 0:
            raise ValueError("f0 must be positive")


@dataclass(frozen=True)
class AttackSchedule:
    """Non-overlapping attack intervals in step units plus the perturbation.

    intervals   : ascending (start_step, duration_steps) pairs
    g_tilde_v   : additive perturbation on the velocity gain
    targets     : affected follower indices (0-based; the leader is not a
                  follower and can never be targeted)
    attacked_kv : optional absolute velocity gain that overrides the
                  additive perturbation when sampled under attack
    """

    intervals: tuple[tuple[int, int], ...]
    g_tilde_v: float
    targets: frozenset[int] = field(default_factory=frozenset)
    attacked_kv: float | None = None

    def __post_init__(self):
        ivs = tuple((int(h), int(tau)) for h, tau in self.intervals)
        prev_end = None
        for h, tau in ivs:
            if h < 0 or tau < 1:
                raise ValueError("attack intervals need start >= 0 and duration >= 1 step")
            if prev_end is not None and h < prev_end:
                raise ValueError("attack intervals must be ascending and non-overlapping")
            prev_end = h + tau
        tg = frozenset(int(i) for i in self.targets)
        if any(i < 0 for i in tg):
            raise ValueError("targets are 0-based follower indices")
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "targets", tg)


@dataclass(frozen=True)
class AffectedIntervals:
    """Trigger-bracketed spans actually influenced by each attack.

    spans counts closed step ranges [first corrupted trigger, first clean
    re-broadcast]; delta_star is the worst excess of an affected span over
    its attack, in seconds. tail_flagged marks an attack with no clean
    re-broadcast before the horizon.
    """

    spans: tuple[tuple[int, int], ...]
    delta_star: float
    tail_flagged: bool = False


@dataclass(frozen=True)
class BudgetReport:
    duration_ok: bool
    frequency_ok: bool
    worst_window: dict


def is_attacked(s: AttackSchedule, i: int, t: int) -> bool:
    """True iff follower i is targeted and step t falls in an attack."""
    if i not in s.targets:
        return False
    for h, tau in s.intervals:
        if h <= t < h + tau:
            return True
        if t < h:
            break
    return False


def effective_gain(K, s: AttackSchedule, i: int, t_trigger: int) -> np.ndarray:
    """Gain sampled by vehicle i at a trigger instant.

    Under attack the velocity component is perturbed (or replaced when an
    absolute override is configured); the sampled gain is held until the
    vehicle's next trigger.
    """
    k = np.array(np.ravel(K), dtype=float)
    if is_attacked(s, i, t_trigger):
        if s.attacked_kv is not None:
            k[1] = s.attacked_kv
        else:
            k[1] += s.g_tilde_v
    return k


def _attack_indicators(s: AttackSchedule, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    active = np.zeros(horizon, dtype=float)
    launches = np.zeros(horizon, dtype=float)
    for h, tau in s.intervals:
        lo, hi = max(0, h), min(horizon, h + tau)
        if lo < hi:
            active[lo:hi] = 1.0
        if 0 <= h < horizon:
            launches[h] = 1.0
    return active, launches


def verify_budget(s: AttackSchedule, b: AttackBudget, horizon: int,
                  t_hat: float) -> BudgetReport:
    """Check the duration and frequency caps over every step-aligned window.

    Scans all window starts and ends at step granularity and reports the
    window with the smallest slack for each cap.
    """
    active, launches = _attack_indicators(s, horizon)
    cum_active = np.concatenate(([0.0], np.cumsum(active)))
    cum_launch = np.concatenate(([0.0], np.cumsum(launches)))
    dur_ok = freq_ok = True
    worst = {"duration": (math.inf, 0, 0), "frequency": (math.inf, 0, 0)}
    steps = np.arange(horizon + 1)
    for t0 in range(horizon + 1):
        span_s = (steps[t0:] - t0) * t_hat
        attacked_s = (cum_active[t0:] - cum_active[t0]) * t_hat
        count = cum_launch[t0:] - cum_launch[t0]
        dur_margin = b.zeta0 + b.tau0 * span_s - attacked_s
        freq_margin = b.F0 + b.f0 * span_s - count
        k = int(np.argmin(dur_margin))
        if dur_margin[k] < worst["duration"][0]:
            worst["duration"] = (float(dur_margin[k]), t0, t0 + k)
        k = int(np.argmin(freq_margin))
        if freq_margin[k] < worst["frequency"][0]:
            worst["frequency"] = (float(freq_margin[k]), t0, t0 + k)
        dur_ok = dur_ok and dur_margin.min() >= 0
        freq_ok = freq_ok and freq_margin.min() >= 0
    kind = "duration" if worst["duration"][0] <= worst["frequency"][0] else "frequency"
    margin, w0, w1 = worst[kind]
    return BudgetReport(
        duration_ok=bool(dur_ok),
        frequency_ok=bool(freq_ok),
        worst_window={"kind": kind, "margin": margin,
                      "start_s": w0 * t_hat, "end_s": w1 * t_hat},
    )


def affected_intervals(s: AttackSchedule, trigger_steps: Sequence[Sequence[int]],
                       horizon: int, t_hat: float) -> AffectedIntervals:
    """Bracket each attack by target trigger instants.

    An attack with no target trigger inside its window never corrupts a
    held gain and is skipped. Otherwise the span runs from the first
    corrupted trigger to the first trigger at or after the attack end; a
    missing clean re-broadcast extends the span to the horizon and flags
    the result.
    """
    target_list = sorted(s.targets) if s.targets else range(len(trigger_steps))
    merged = sorted({int(t) for i in target_list
                     for t in (trigger_steps[i] if i < len(trigger_steps) else ())})
    spans: list[tuple[int, int]] = []
    worst = 0.0
    flagged = False
    for h, tau in s.intervals:
        first_hit = next((t for t in merged if h <= t < h + tau), None)
        if first_hit is None:
            continue
        clean = next((t for t in merged if t >= h + tau), None)
        if clean is None:
            clean = horizon
            flagged = True
        spans.append((first_hit, clean))
        # closed span counts the re-broadcast step, hence the +1
        worst = max(worst, (clean - first_hit + 1 - tau) * t_hat)
    return AffectedIntervals(spans=tuple(spans), delta_star=max(worst, 0.0),
                             tail_flagged=flagged)


def intervals_from_seconds(pairs_s: Iterable[tuple[float, float]],
                           t_hat: float) -> tuple[tuple[int, int], ...]:
    """Second-based (start, duration) pairs to step intervals.

    Starts floor and ends ceil, which can only enlarge an interval: the
    conversion is conservative toward the attacker. Intervals that touch
    after enlargement are merged so the result stays a valid schedule.
    """
    out: list[list[int]] = []
    for start_s, dur_s in sorted(pairs_s):
        if dur_s <= 0:
            raise ValueError("attack duration must be positive")
        h = math.floor(start_s / t_hat)
        end = math.ceil((start_s + dur_s) / t_hat)
        end = max(end, h + 1)
        if out and h <= out[-1][0] + out[-1][1]:
            prev = out[-1]
            prev[1] = max(prev[0] + prev[1], end) - prev[0]
        else:
            out.append([h, end - h])
    return tuple((h, tau) for h, tau in out)


def random_schedule(seed: int, budget: AttackBudget, g_tilde_v: float,
                    targets: Iterable[int], horizon: int, t_hat: float,
                    attacked_kv: float | None = None,
                    max_attempts: int = 500) -> AttackSchedule:
    """Seeded rejection sampler for budget-compliant schedules.

    Draws interval counts and durations well inside the caps, converts to
    steps and keeps the first draw that passes verify_budget. The same seed
    always yields the same schedule.
    """
    rng = np.random.default_rng(seed)
    horizon_s = horizon * t_hat
    max_count = budget.F0 + budget.f0 * horizon_s
    max_total_s = budget.zeta0 + budget.tau0 * horizon_s
    tg = frozenset(int(i) for i in targets)
    for _ in range(max_attempts):
        m = int(rng.integers(1, max(2, int(max_count) + 1)))
        total_s = rng.uniform(0.2, 0.7) * max_total_s
        per = max(t_hat, total_s / m)
        cap = budget.zeta0 / (1 - budget.tau0) if budget.zeta0 > 0 else per
        per = min(per, cap) if cap > 0 else per
        starts = np.sort(rng.uniform(0.0, 0.85 * horizon_s, size=m))
        durations = rng.uniform(t_hat, max(t_hat * 1.0001, per), size=m)
        ivs: list[tuple[int, int]] = []
        prev_end = -1
        for st, du in zip(starts, durations):
            h = math.floor(st / t_hat)
            end = math.ceil((st + du) / t_hat)
            if h <= prev_end:
                continue
            if end >= horizon:
                break
            ivs.append((h, max(1, end - h)))
            prev_end = end
        if not ivs:
            continue
        cand = AttackSchedule(tuple(ivs), g_tilde_v, tg, attacked_kv)
        rep = verify_budget(cand, budget, horizon, t_hat)
        if rep.duration_ok and rep.frequency_ok:
            return cand
    raise RuntimeError(f"no budget-compliant schedule found in {max_attempts} attempts")
