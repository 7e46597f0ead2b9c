"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from platoonsec import builtin
from platoonsec.plant import PlantModel, VehicleState, spacing_offsets
from platoonsec.sim import Scenario
from platoonsec.trigger import DynamicTriggerParams

REFERENCE_STATES = [(65.0, 10.0), (40.0, 8.0), (11.0, 6.0),
                    (0.0, 4.0), (-20.0, 2.0), (-25.0, 0.0)]
REFERENCE_LEADER = (100.0, 12.0)
REFERENCE_GAIN = (0.1259, 2.5252)
T_HAT = 0.2


def charpoly_eigenvalues(m: np.ndarray) -> np.ndarray:
    """Brute-force symmetric eigenvalues: characteristic polynomial roots.

    Coefficients come from the Faddeev-LeVerrier recursion, roots from the
    companion matrix. Entirely independent of the Jacobi path under test.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    mk = np.eye(n)
    for k in range(1, n + 1):
        mk = m @ mk
        ck = -np.trace(mk) / k
        mk += ck * np.eye(n)
        coeffs[k] = ck
    roots = np.roots(coeffs)
    return np.sort(roots.real)


def closed_loop_matrix(t_hat: float, K, H: np.ndarray) -> np.ndarray:
    """Full stacked closed-loop matrix for the eigenvalue oracle."""
    A = np.array([[1.0, t_hat], [0.0, 1.0]])
    B = np.array([[0.0], [t_hat]])
    BK = B @ np.atleast_2d(np.ravel(K)).astype(float)
    n = H.shape[0]
    return np.kron(np.eye(n), A) - np.kron(H, BK)


def spectral_radius_oracle(t_hat: float, K, H: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(closed_loop_matrix(t_hat, K, H)))))


def random_topology(rng: np.random.Generator, n: int | None = None):
    """Random leader-connected topology: spanning tree plus extra edges."""
    from platoonsec.graph import Topology, is_leader_connected

    n = n if n is not None else int(rng.integers(2, 7))
    adj = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        j = order[k]
        i = order[int(rng.integers(0, k))]
        adj[i, j] = adj[j, i] = 1.0
    for _ in range(int(rng.integers(0, n))):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            adj[i, j] = adj[j, i] = 1.0
    pin = np.zeros(n)
    pin[rng.integers(0, n)] = 1.0
    for i in range(n):
        if rng.random() < 0.3:
            pin[i] = 1.0
    t = Topology(adj, pin)
    assert is_leader_connected(t)
    return t


def reference_scenario(scheme: str = "static", horizon: int = 500,
                       gain_override=REFERENCE_GAIN, xi: float = 0.98,
                       **kwargs) -> Scenario:
    """The six-follower chain experiment with its standard initial states."""
    base = dict(
        plant=PlantModel(T_HAT, spacing_offsets(20.0, 6)),
        topology=builtin("BD"),
        leader=VehicleState(*REFERENCE_LEADER),
        followers=tuple(VehicleState(*s) for s in REFERENCE_STATES),
        xi=xi,
        gain_override=gain_override,
        scheme=scheme,
        horizon=horizon,
    )
    if scheme == "dynamic" and "dynamic" not in kwargs:
        base["dynamic"] = DynamicTriggerParams(rho=0.1, vartheta=0.6, theta=90.0, mu0=20.0)
    base.update(kwargs)
    return Scenario(**base)


def random_mini_scenario(rng: np.random.Generator, horizon: int = 40) -> Scenario:
    """Small randomized scenario for property tests; always valid."""
    topo = random_topology(rng)
    n = topo.n_followers
    followers = tuple(VehicleState(float(rng.uniform(-50, 50)), float(rng.uniform(-5, 5)))
                      for _ in range(n))
    scheme = "static" if rng.random() < 0.5 else "dynamic"
    kwargs = {}
    if scheme == "dynamic":
        # large thresholds force long silent stretches between triggers
        mu0 = float(10.0 ** rng.uniform(0.0, 6.0))
        kwargs["dynamic"] = DynamicTriggerParams(0.1, 0.6, 90.0, mu0)
    if rng.random() < 0.7:
        m = int(rng.integers(1, 4))
        starts = np.sort(rng.uniform(0.2, horizon * T_HAT * 0.7, size=m))
        ivs, prev = [], -1.0
        for s in starts:
            if s <= prev:
                continue
            d = float(rng.uniform(T_HAT, 5 * T_HAT))
            ivs.append((float(s), d))
            prev = s + d
        kwargs["attack_intervals_s"] = tuple(ivs)
        kwargs["g_tilde_v"] = float(rng.uniform(0.0, 0.6))
    return Scenario(
        plant=PlantModel(T_HAT, spacing_offsets(20.0, n)),
        topology=topo,
        leader=VehicleState(0.0, 10.0),
        followers=followers,
        xi=0.97,
        gain_override=REFERENCE_GAIN,
        scheme=scheme,
        horizon=horizon,
        **kwargs,
    )


@pytest.fixture(scope="session")
def bd_topology():
    return builtin("BD")


@pytest.fixture(scope="session")
def switched_topology():
    return builtin("Switched")


@pytest.fixture(scope="session")
def reference_plant():
    return PlantModel(T_HAT, spacing_offsets(20.0, 6))
