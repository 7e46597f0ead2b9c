"""Platoon communication topologies and their spectra.

Followers are indexed 0..n-1 internally (vehicle labels 1..n in file
formats); the leader is a separate node reachable through the pinning
vector. All matrices are small dense numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Topology",
    "Spectrum",
    "laplacian",
    "h_matrix",
    "extended_laplacian",
    "eigenvalues_symmetric",
    "is_leader_connected",
    "builtin",
    "BUILTIN_NAMES",
]


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected follower graph plus the leader pinning vector.

    adjacency : (n, n) symmetric 0/1 matrix, zero diagonal
    pinning   : length-n 0/1 vector, 1 where a follower hears the leader
    """

    adjacency: np.ndarray
    pinning: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=float)
        pin = np.array(self.pinning, dtype=float).ravel()
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        n = adj.shape[0]
        if n < 1:
            raise ValueError("topology needs at least one follower")
        if pin.shape != (n,):
            raise ValueError(f"pinning must have length {n}, got {pin.shape}")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric (links are bidirectional)")
        if np.any(np.diag(adj) != 0):
            raise ValueError("adjacency diagonal must be zero")
        if not np.isin(adj, (0.0, 1.0)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if not np.isin(pin, (0.0, 1.0)).all():
            raise ValueError("pinning entries must be 0 or 1")
        adj.setflags(write=False)
        pin.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "pinning", pin)

    @property
    def n_followers(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), j.tolist()))

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency) and np.array_equal(
            self.pinning, other.pinning
        )


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues of a named symmetric matrix."""

    eigenvalues: tuple[float, ...]
    matrix_tag: str = ""

    def __post_init__(self):
        vals = tuple(float(v) for v in self.eigenvalues)
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError("eigenvalues must be ascending")
        object.__setattr__(self, "eigenvalues", vals)

    @property
    def lam_min(self) -> float:
        return self.eigenvalues[0]

    @property
    def lam_max(self) -> float:
        return self.eigenvalues[-1]

    def __len__(self) -> int:
        return len(self.eigenvalues)


def laplacian(t: Topology) -> np.ndarray:
    """Laplacian of the follower graph (degree minus adjacency)."""
    return np.diag(t.adjacency.sum(axis=1)) - t.adjacency


def h_matrix(t: Topology) -> np.ndarray:
    """Follower Laplacian plus the diagonal pinning matrix."""
    return laplacian(t) + np.diag(t.pinning)


def extended_laplacian(t: Topology) -> np.ndarray:
    """Laplacian of the full graph with the leader as node 0."""
    n = t.n_followers
    ext = np.zeros((n + 1, n + 1))
    ext[1:, 1:] = t.adjacency
    ext[0, 1:] = t.pinning
    ext[1:, 0] = t.pinning
    return np.diag(ext.sum(axis=1)) - ext


def is_leader_connected(t: Topology) -> bool:
    """True iff every follower is reachable from the leader."""
    n = t.n_followers
    seen = np.zeros(n + 1, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        v = stack.pop()
        if v == 0:
            nxt = np.flatnonzero(t.pinning) + 1
        else:
            nxt = np.flatnonzero(t.adjacency[v - 1]) + 1
            if t.pinning[v - 1] and not seen[0]:
                seen[0] = True
        for w in nxt:
            if not seen[w]:
                seen[w] = True
                stack.append(int(w))
    return bool(seen[1:].all())


def eigenvalues_symmetric(m: np.ndarray, tol: float = 1e-12, tag: str = "") -> Spectrum:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps Givens rotations until the off-diagonal Frobenius norm drops
    below tol relative to the matrix norm. Robust for the small dense
    matrices used here (n <= ~14); rejects non-symmetric input.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("input must be a square matrix")
    scale = float(np.linalg.norm(a))
    if np.max(np.abs(a - a.T)) > 1e-10 * max(1.0, scale):
        raise ValueError("input matrix is not symmetric")
    a = (a + a.T) / 2.0
    n = a.shape[0]
    if n == 1 or scale == 0.0:
        vals = np.sort(np.diag(a))
        return Spectrum(tuple(vals), tag)
    idx = np.arange(n)
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(100):
        # summed directly over off-diagonal entries; the subtraction form
        # sum(a^2) - sum(diag^2) floors at sqrt(eps) from cancellation
        off = math.sqrt(float(np.sum(np.square(a[off_mask]))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale / (n * n):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # explicit pivot zeroing keeps roundoff from stalling the sweep
                app, aqq = a[p, p], a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                mask = (idx != p) & (idx != q)
                akp = a[mask, p].copy()
                akq = a[mask, q].copy()
                a[mask, p] = a[p, mask] = c * akp - s * akq
                a[mask, q] = a[q, mask] = s * akp + c * akq
    else:
        raise ArithmeticError("Jacobi sweeps did not converge")
    vals = np.sort(np.diag(a))
    return Spectrum(tuple(vals), tag)


def _path_topology(n: int, pinned: tuple[int, ...]) -> Topology:
    adj = np.zeros((n, n))
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = 1.0
    pin = np.zeros(n)
    pin[list(pinned)] = 1.0
    return Topology(adj, pin)


def _builtin_bd() -> Topology:
    # chain 1-2-3-4-5-6 with vehicle 1 hearing the leader
    return _path_topology(6, (0,))


def _builtin_switched() -> Topology:
    # vehicles 1..3 hear the leader and relay to 4..6 respectively
    adj = np.zeros((6, 6))
    for i, j in ((0, 3), (1, 4), (2, 5)):
        adj[i, j] = adj[j, i] = 1.0
    return Topology(adj, np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]))


BUILTIN_NAMES = ("BD", "Switched")
_BUILTINS = {"bd": _builtin_bd, "switched": _builtin_switched}


def builtin(name: str) -> Topology:
    """Return one of the fixed six-follower reference topologies."""
    try:
        return _BUILTINS[name.lower()]()
    except KeyError:
        raise ValueError(
            f"unknown builtin topology {name!r}; choose from {BUILTIN_NAMES}"
        ) from None
