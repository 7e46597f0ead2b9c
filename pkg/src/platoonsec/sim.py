"""Deterministic step-loop engine combining plant, triggers and attacks.

Each step evaluates trigger rules on the current broadcast table, applies
the resulting broadcasts and gain samples, advances the vehicles under the
held controls and records everything. Identical scenarios always produce
identical traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attack as attack_mod
from . import gain as gain_mod
from . import trigger as trigger_mod
from .attack import AttackBudget, AttackSchedule
from .graph import Spectrum, Topology, eigenvalues_symmetric, h_matrix, is_leader_connected
from .plant import PlantModel, VehicleState, shifted_state, step_follower, step_leader
from .trigger import BroadcastTable, DynamicTriggerParams, StaticTriggerParams

__all__ = ["Scenario", "Design", "Trace", "Metrics", "prepare", "run", "metrics",
           "lyapunov_series", "DIVERGENCE_LIMIT"]

DIVERGENCE_LIMIT = 1e9

# fraction of the trace used for the settled-error metrics
_TAIL_FRACTION = 0.1


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulation run."""

    plant: PlantModel
    topology: Topology
    leader: VehicleState
    followers: tuple[VehicleState, ...]
    xi: float = 0.98
    gain_override: tuple[float, float] | None = None
    scheme: str = "static"
    partial: float = 0.01
    w1_fraction: float = 0.5
    beta: float | None = None
    dynamic: DynamicTriggerParams | None = None
    g_tilde_v: float = 0.0
    attacked_kv: float | None = None
    targets: tuple[int, ...] | str = "all"
    attack_intervals_s: tuple[tuple[float, float], ...] = ()
    random_attack_seed: int | None = None
    budget: AttackBudget | None = None
    switch_topology: Topology | None = None
    switch_time_s: float | None = None
    horizon: int = 500
    threshold: float = 1e-2

    def validate(self) -> None:
        n = self.topology.n_followers
        if self.horizon < 1:
            raise ValueError("horizon must be at least one step")
        if len(self.followers) != n:
            raise ValueError(f"{len(self.followers)} follower states for {n} followers")
        if self.plant.n_followers != n:
            raise ValueError("spacing offsets do not match the follower count")
        if not is_leader_connected(self.topology):
            raise ValueError("initial topology is not leader-connected")
        if self.scheme not in ("static", "dynamic"):
            raise ValueError(f"unknown trigger scheme {self.scheme!r}")
        if self.scheme == "dynamic" and self.dynamic is None:
            raise ValueError("dynamic scheme requires rho/vartheta/theta/mu0 parameters")
        if not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")
        if self.threshold <= 0:
            raise ValueError("consensus threshold must be positive")
        if (self.switch_topology is None) != (self.switch_time_s is None):
            raise ValueError("topology switch needs both a target and a time")
        if self.switch_topology is not None:
            if self.switch_topology.n_followers != n:
                raise ValueError("switch topology must keep the follower count")
            step = self.switch_step()
            if not 0 < step < self.horizon:
                raise ValueError("switch time must fall strictly inside the horizon")
        if self.attack_intervals_s and self.random_attack_seed is not None:
            raise ValueError("give either explicit attack intervals or a random seed, not both")
        if self.random_attack_seed is not None and self.budget is None:
            raise ValueError("random attack schedules need budget parameters")
        if self.targets != "all":
            if any(not 0 <= i < n for i in self.targets):
                raise ValueError("attack targets must be valid follower indices")

    def switch_step(self) -> int | None:
        if self.switch_time_s is None:
            return None
        return int(round(self.switch_time_s / self.plant.sample_time))

    def resolved_targets(self) -> tuple[int, ...]:
        if self.targets == "all":
            return tuple(range(self.topology.n_followers))
        return tuple(self.targets)


@dataclass(eq=False)
class Design:
    """Derived quantities a run needs, all computed before the first step."""

    gain: gain_mod.GainDesign
    K: np.ndarray
    H: np.ndarray
    h_spectrum: Spectrum
    trigger: StaticTriggerParams
    schedule: AttackSchedule | None
    switch_step: int | None = None
    switch_H: np.ndarray | None = None
    switch_spectrum: Spectrum | None = None
    switch_trigger: StaticTriggerParams | None = None


@dataclass(eq=False)
class Trace:
    """Per-step record of one run; arrays share the step axis."""

    t_hat: float
    time: np.ndarray
    leader: np.ndarray
    states: np.ndarray
    delta: np.ndarray
    triggers: np.ndarray
    attack_active: np.ndarray
    corrupted_hold: np.ndarray
    control: np.ndarray
    mu: np.ndarray
    lyapunov: np.ndarray
    diverged: bool
    schedule: AttackSchedule | None

    @property
    def steps(self) -> int:
        return len(self.time)

    @property
    def attacked_mask(self) -> np.ndarray:
        """Steps on which some vehicle applied a corrupted held gain."""
        return self.corrupted_hold.any(axis=1)

    def trigger_steps(self) -> list[list[int]]:
        return [np.flatnonzero(self.triggers[:, i]).tolist()
                for i in range(self.triggers.shape[1])]


@dataclass(frozen=True)
class Metrics:
    consensus_time: float | None
    trigger_counts: tuple[int, ...]
    total_triggers: int
    J: float | None
    delta_star: float
    max_velocity_error_tail: float
    max_spacing_error_tail: float
    diverged: bool


def prepare(sc: Scenario) -> Design:
    """Resolve gains, spectra, trigger constants and the attack schedule."""
    sc.validate()
    A, B = sc.plant.A, sc.plant.B
    design = gain_mod.synthesize(sc.topology, A, B, sc.xi)
    K = np.array(sc.gain_override, dtype=float) if sc.gain_override is not None else design.K
    H = h_matrix(sc.topology)
    spectrum = eigenvalues_symmetric(H, tag="H")
    sp = trigger_mod.design_static_trigger(
        H, design.P, design.W, A, B, K,
        partial=sc.partial, w1_fraction=sc.w1_fraction, beta=sc.beta,
    )
    schedule = None
    targets = sc.resolved_targets()
    if sc.attack_intervals_s:
        ivs = attack_mod.intervals_from_seconds(sc.attack_intervals_s, sc.plant.sample_time)
        schedule = AttackSchedule(ivs, sc.g_tilde_v, frozenset(targets), sc.attacked_kv)
    elif sc.random_attack_seed is not None:
        schedule = attack_mod.random_schedule(
            sc.random_attack_seed, sc.budget, sc.g_tilde_v, targets,
            sc.horizon, sc.plant.sample_time, sc.attacked_kv,
        )
    d = Design(gain=design, K=K, H=H, h_spectrum=spectrum, trigger=sp, schedule=schedule)
    if sc.switch_topology is not None:
        d.switch_step = sc.switch_step()
        d.switch_H = h_matrix(sc.switch_topology)
        d.switch_spectrum = eigenvalues_symmetric(d.switch_H, tag="H-switched")
        # the gain and Riccati pair survive the switch; only the
        # topology-derived trigger constants are rebuilt
        d.switch_trigger = trigger_mod.design_static_trigger(
            d.switch_H, design.P, design.W, A, B, K,
            partial=sc.partial, w1_fraction=sc.w1_fraction, beta=sc.beta,
        )
    return d


def run(sc: Scenario) -> Trace:
    """Execute the step loop and record the full trace.

    Step order: optional topology switch, trigger evaluation on the current
    table, broadcasts plus gain sampling for firing vehicles, dynamics under
    the held controls, threshold-variable update, bookkeeping. A state
    leaving the divergence guard truncates the run with the flag set.

    Broadcast states live in the leader-relative shifted frame: the leader
    trajectory is known to every vehicle, so a held broadcast stays exact
    while the platoon moves in formation. This makes perfect consensus a
    true fixed point (no re-triggers) and matches the stacked closed-loop
    form the certificates are derived from.
    """
    d = prepare(sc)
    plant = sc.plant
    t_hat = plant.sample_time
    n = sc.topology.n_followers
    topo = sc.topology
    sp = d.trigger
    dp = sc.dynamic
    offsets = plant.spacing
    table = BroadcastTable(n)
    states = list(sc.followers)
    lead = sc.leader
    k_held = [d.K.copy() for _ in range(n)]
    corrupted = np.zeros(n, dtype=bool)
    u = np.zeros(n)
    mu = np.full(n, dp.mu0 if dp is not None else 0.0)

    rec_lead, rec_states, rec_delta = [], [], []
    rec_trig, rec_att, rec_corr, rec_u, rec_mu, rec_v = [], [], [], [], [], []
    diverged = False

    for t in range(sc.horizon):
        if d.switch_step is not None and t == d.switch_step:
            topo = sc.switch_topology
            sp = d.switch_trigger
        forced = t == 0 or (d.switch_step is not None and t == d.switch_step)
        shifted = np.array([shifted_state(states[i], offsets[i]) for i in range(n)])
        lead_arr = np.asarray(lead, dtype=float)
        delta = shifted - lead_arr
        lead_rel = np.zeros(2)

        if forced:
            fired = np.ones(n, dtype=bool)
            e_eval = np.zeros((n, 2))
            q_eval = np.zeros((n, 2))
        else:
            fired = np.zeros(n, dtype=bool)
            e_eval = np.empty((n, 2))
            q_eval = np.empty((n, 2))
            for i in range(n):
                e_eval[i] = trigger_mod.measurement_error(i, table, delta[i])
                q_eval[i] = trigger_mod.combined_measurement(i, table, topo, lead_rel)
                if sc.scheme == "static":
                    fired[i] = trigger_mod.static_should_trigger(e_eval[i], q_eval[i], sp)
                else:
                    fired[i] = trigger_mod.dynamic_should_trigger(
                        e_eval[i], q_eval[i], mu[i], sp, dp)
        for i in range(n):
            if fired[i]:
                table.broadcast(i, delta[i], t)
        for i in range(n):
            if fired[i]:
                if d.schedule is not None:
                    k_held[i] = attack_mod.effective_gain(d.K, d.schedule, i, t)
                    corrupted[i] = attack_mod.is_attacked(d.schedule, i, t)
                else:
                    k_held[i] = d.K
                u[i] = float(k_held[i] @ trigger_mod.combined_measurement(i, table, topo, lead_rel))

        rec_lead.append(lead_arr)
        rec_states.append(np.asarray(states, dtype=float))
        rec_delta.append(delta)
        rec_trig.append(fired.copy())
        rec_att.append(np.array([d.schedule is not None
                                 and attack_mod.is_attacked(d.schedule, i, t)
                                 for i in range(n)]))
        rec_corr.append(corrupted.copy())
        rec_u.append(u.copy())
        rec_mu.append(mu.copy())
        rec_v.append(float(np.einsum("ij,jk,ik->", delta, d.gain.P, delta)))

        if sc.scheme == "dynamic":
            for i in range(n):
                e_upd = np.zeros(2) if fired[i] else e_eval[i]
                mu[i] = trigger_mod.update_mu(mu[i], e_upd, q_eval[i], sp, dp)
                if mu[i] <= 0:
                    raise ArithmeticError(
                        f"dynamic threshold variable went nonpositive at step {t}")

        states = [step_follower(plant, states[i], u[i]) for i in range(n)]
        lead = step_leader(plant, lead)
        if any(abs(v) > DIVERGENCE_LIMIT for x in states for v in x):
            diverged = True
            break

    steps = len(rec_v)
    return Trace(
        t_hat=t_hat,
        time=np.arange(steps) * t_hat,
        leader=np.array(rec_lead),
        states=np.array(rec_states),
        delta=np.array(rec_delta),
        triggers=np.array(rec_trig),
        attack_active=np.array(rec_att),
        corrupted_hold=np.array(rec_corr),
        control=np.array(rec_u),
        mu=np.array(rec_mu),
        lyapunov=np.array(rec_v),
        diverged=diverged,
        schedule=d.schedule,
    )


def metrics(tr: Trace, sc: Scenario) -> Metrics:
    """Consensus time, trigger statistics and attack span summary.

    Consensus time is the first instant after which the worst velocity
    error stays below the threshold for the rest of the trace; trigger
    counts feeding the average rate are taken up to that instant.
    """
    n = tr.triggers.shape[1]
    verr = np.abs(tr.delta[:, :, 1]).max(axis=1)
    perr = np.abs(tr.delta[:, :, 0]).max(axis=1)
    consensus_time: float | None
    if tr.diverged:
        consensus_time = None
    else:
        bad = np.flatnonzero(verr >= sc.threshold)
        if len(bad) == 0:
            consensus_time = 0.0
        elif bad[-1] + 1 < tr.steps:
            consensus_time = float((bad[-1] + 1) * tr.t_hat)
        else:
            consensus_time = None
    if consensus_time is None:
        counts = tr.triggers.sum(axis=0)
    else:
        upto = int(round(consensus_time / tr.t_hat)) + 1
        counts = tr.triggers[:upto].sum(axis=0)
    if consensus_time is None:
        j_rate = None
    elif consensus_time == 0.0:
        j_rate = 0.0
    else:
        j_rate = float(counts.sum()) / (n * consensus_time)
    if tr.schedule is not None:
        spans = attack_mod.affected_intervals(
            tr.schedule, tr.trigger_steps(), tr.steps, tr.t_hat)
        delta_star = spans.delta_star
    else:
        delta_star = 0.0
    tail = max(1, int(round(_TAIL_FRACTION * tr.steps)))
    return Metrics(
        consensus_time=consensus_time,
        trigger_counts=tuple(int(c) for c in counts),
        total_triggers=int(tr.triggers.sum()),
        J=j_rate,
        delta_star=delta_star,
        max_velocity_error_tail=float(verr[-tail:].max()),
        max_spacing_error_tail=float(perr[-tail:].max()),
        diverged=tr.diverged,
    )


def lyapunov_series(tr: Trace, P: np.ndarray) -> np.ndarray:
    """Quadratic-form value of the stacked consensus error at every step."""
    P = np.asarray(P, dtype=float)
    return np.einsum("tij,jk,tik->t", tr.delta, P, tr.delta)
