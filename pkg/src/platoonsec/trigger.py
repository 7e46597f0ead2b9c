"""Event-triggered broadcasting: errors, thresholds, dynamic variables.

Followers re-broadcast their (offset-shifted) state only when a local
threshold on the measurement error is violated; the dynamic scheme adds a
decaying per-vehicle variable that absorbs small violations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Topology, eigenvalues_symmetric

__all__ = [
    "BroadcastTable",
    "StaticTriggerParams",
    "DynamicTriggerParams",
    "combined_measurement",
    "measurement_error",
    "compute_s_constants",
    "static_should_trigger",
    "dynamic_should_trigger",
    "update_mu",
    "design_static_trigger",
]


class BroadcastTable:
    """Latest broadcast shifted state of each follower, with trigger steps.

    The leader is not stored; its true state is always available and is
    passed to measurement computations directly.
    """

    def __init__(self, n: int):
        self._x_hat = np.zeros((n, 2))
        self._last_step = np.full(n, -1, dtype=int)

    @property
    def n(self) -> int:
        return self._x_hat.shape[0]

    def broadcast(self, i: int, shifted: np.ndarray, step: int) -> None:
        self._x_hat[i] = np.asarray(shifted, dtype=float)
        self._last_step[i] = step

    def state(self, i: int) -> np.ndarray:
        return self._x_hat[i].copy()

    def last_trigger_step(self, i: int) -> int:
        return int(self._last_step[i])


@dataclass(frozen=True, eq=False)
class StaticTriggerParams:
    """Threshold coefficient and the norm constants it is built from.

    sigma scales the squared combined-measurement norm; a vehicle stays
    silent while its squared error is below sigma times that. w1/w2 are the
    two positive-definite pieces of the Riccati residual split.
    """

    partial: float
    beta: float
    w1_fraction: float
    s1: float
    s2: float
    s3: float
    sigma: float
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        if not 0 < self.partial < 1:
            raise ValueError("partial must lie in (0, 1)")
        if not 0 < self.w1_fraction < 1:
            raise ValueError("w1_fraction must lie in (0, 1)")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.s2 > 0 and self.beta >= self.s1 / self.s2:
            raise ValueError("beta must stay below s1/s2")
        if self.s1 - self.beta * self.s2 <= 0:
            raise ValueError("s1 - beta*s2 must be positive in the nominal configuration")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class DynamicTriggerParams:
    """Decay/recharge coefficients of the per-vehicle threshold variable."""

    rho: float
    vartheta: float
    theta: float
    mu0: float

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not 0 < self.vartheta < 1:
            raise ValueError("vartheta must lie in (0, 1)")
        if self.theta <= (1 - self.vartheta) / self.rho:
            raise ValueError("theta must exceed (1 - vartheta)/rho")
        if self.vartheta + self.rho >= 1:
            raise ValueError("vartheta + rho must stay below 1")
        if self.vartheta >= self.theta * self.rho:
            raise ValueError("vartheta must stay below theta*rho")
        if self.mu0 <= 0:
            raise ValueError("mu0 must be positive")


def combined_measurement(i: int, table: BroadcastTable, topology: Topology,
                         leader) -> np.ndarray:
    """Neighbor disagreement sum seen by follower i on broadcast states.

    Adds the true leader term when i is pinned; an isolated unpinned
    follower always measures zero.
    """
    lead = np.asarray(leader, dtype=float)
    own = table.state(i)
    q = np.zeros(2)
    for j in topology.neighbors(i):
        q += table.state(int(j)) - own
    if topology.pinning[i] > 0:
        q += lead - own
    return q


def measurement_error(i: int, table: BroadcastTable, x_true_shifted) -> np.ndarray:
    """Broadcast state minus the current true shifted state of vehicle i."""
    return table.state(i) - np.asarray(x_true_shifted, dtype=float)


def _sigma_max(m: np.ndarray) -> float:
    """Largest singular value via the symmetric eigenproblem of m'm."""
    gram = m.T @ m
    top = eigenvalues_symmetric((gram + gram.T) / 2.0).lam_max
    return float(np.sqrt(max(top, 0.0)))


def compute_s_constants(H: np.ndarray, P: np.ndarray, A: np.ndarray, B: np.ndarray,
                        K, W1: np.ndarray) -> tuple[float, float, float]:
    """Norm constants bounding the Lyapunov difference terms.

    s1 bounds the measurement quadratic from below, s2 the error/measurement
    cross term and s3 the error quadratic from above; s2 and s3 are largest
    singular values of the fully assembled block matrices (subtracted parts
    included before the norm). All three are clamped to be nonnegative.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    eye = np.eye(n)
    BK = np.asarray(B, dtype=float).reshape(2, 1) @ np.atleast_2d(np.ravel(K)).astype(float)
    try:
        h_inv = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        raise ValueError("H matrix is singular") from None
    h_eigs = eigenvalues_symmetric(H)
    if abs(h_eigs.lam_min) < 1e-12 * max(1.0, h_eigs.lam_max):
        raise ValueError("H matrix is singular")
    s1 = eigenvalues_symmetric(W1).lam_min / h_eigs.lam_max ** 2
    cross = (np.kron(eye, BK).T @ np.kron(eye, P)
             @ (np.kron(eye, A) - np.kron(H, BK))
             - np.kron(h_inv, W1))
    quad = (np.kron(H, BK).T @ np.kron(eye, P)
            @ (2.0 * np.kron(eye, A) - np.kron(H, BK))
            - np.kron(eye, W1))
    return max(s1, 0.0), _sigma_max(cross), _sigma_max(quad)


def static_should_trigger(e: np.ndarray, q_hat: np.ndarray,
                          p: StaticTriggerParams) -> bool:
    """Fire when the squared error reaches the threshold share of the
    squared measurement. An exactly zero error never fires: re-broadcasting
    an unchanged state carries no information.
    """
    e2 = float(np.dot(e, e))
    q2 = float(np.dot(q_hat, q_hat))
    return e2 > 0.0 and e2 >= p.sigma * q2


def dynamic_should_trigger(e: np.ndarray, q_hat: np.ndarray, mu: float,
                           sp: StaticTriggerParams, dp: DynamicTriggerParams) -> bool:
    """Fire when the scaled threshold violation exceeds the remaining mu."""
    e2 = float(np.dot(e, e))
    q2 = float(np.dot(q_hat, q_hat))
    return dp.theta * (e2 - sp.sigma * q2) > mu


def update_mu(mu: float, e: np.ndarray, q_hat: np.ndarray,
              sp: StaticTriggerParams, dp: DynamicTriggerParams) -> float:
    """One decay/recharge step of the dynamic threshold variable.

    Positivity along any trajectory that respects the no-trigger condition
    follows from the parameter constraints; it is asserted by the engine,
    never enforced by clipping.
    """
    e2 = float(np.dot(e, e))
    q2 = float(np.dot(q_hat, q_hat))
    return (1.0 - dp.rho) * mu + dp.vartheta * (sp.sigma * q2 - e2)


def design_static_trigger(H: np.ndarray, P: np.ndarray, W: np.ndarray,
                          A: np.ndarray, B: np.ndarray, K,
                          partial: float = 0.01, w1_fraction: float = 0.5,
                          beta: float | None = None) -> StaticTriggerParams:
    """Assemble threshold parameters from the closed-loop design.

    The residual is split as w1 = w1_fraction * W; beta defaults to the
    midpoint of its admissible interval (0, s1/s2).
    """
    W = np.asarray(W, dtype=float)
    w1 = w1_fraction * W
    w2 = W - w1
    s1, s2, s3 = compute_s_constants(H, P, A, B, K, w1)
    if beta is None:
        if s2 <= 0:
            raise ValueError("cannot pick a default beta with s2 = 0")
        beta = 0.5 * s1 / s2
    sigma = partial * beta * (s1 - beta * s2) / (s2 + beta * s3)
    return StaticTriggerParams(partial=float(partial), beta=float(beta),
                               w1_fraction=float(w1_fraction),
                               s1=s1, s2=s2, s3=s3, sigma=float(sigma),
                               w1=w1, w2=w2)
