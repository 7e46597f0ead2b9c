"""Controller gain synthesis and Schur stability analysis.

The gain is produced from a modified Riccati inequality solved by fixed
point iteration; stability of the networked closed loop reduces to a
scalar quadratic per topology eigenvalue.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import Spectrum, Topology, eigenvalues_symmetric, extended_laplacian

__all__ = [
    "GainSynthesisError",
    "GainDesign",
    "SchurWindow",
    "xi_window",
    "solve_mari",
    "lambda_window",
    "design_gain",
    "schur_window",
    "closed_loop_spectral_radius",
    "synthesize",
]

# eigenvalues this close to the unit circle count as unstable (the nominal
# plant carries a double eigenvalue exactly at 1)
_UNSTABLE_EDGE = 1.0 - 1e-12


class GainSynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchurWindow:
    """Open interval of velocity gains keeping every closed-loop mode stable."""

    lower: float
    upper: float

    def contains(self, k_v: float) -> bool:
        return self.lower < k_v < self.upper


@dataclass(frozen=True, eq=False)
class GainDesign:
    """Result of the synthesis pipeline for one topology."""

    xi: float
    P: np.ndarray
    W: np.ndarray
    K: np.ndarray
    lambda_bar_2: float
    lambda_bar_Np1: float


def _eig2(m: np.ndarray) -> tuple[complex, complex]:
    """Eigenvalues of a real 2x2 matrix in closed form."""
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0:
        s = math.sqrt(disc)
        return ((tr + s) / 2.0, (tr - s) / 2.0)
    s = math.sqrt(-disc) / 2.0
    return (complex(tr / 2.0, s), complex(tr / 2.0, -s))


def xi_window(A: np.ndarray, lambda_bar_2: float, lambda_bar_Np1: float) -> tuple[float, float]:
    """Admissible interval for the inverse contraction parameter.

    Lower end is the product of unstable eigenvalue magnitudes of A, upper
    end follows from the extended-graph eigenvalue ratio. Raises when the
    window is empty.
    """
    if not (0 < lambda_bar_2 < lambda_bar_Np1):
        raise ValueError("need 0 < lambda_bar_2 < lambda_bar_Np1")
    lo = 1.0
    for ev in _eig2(np.asarray(A, dtype=float)):
        mag = abs(ev)
        if mag >= _UNSTABLE_EDGE:
            lo *= mag
    ratio = lambda_bar_2 / lambda_bar_Np1
    hi = (1.0 + ratio) / (1.0 - ratio)
    if lo >= hi:
        raise GainSynthesisError(
            f"empty window for the inverse contraction parameter: [{lo:g}, {hi:g}]"
        )
    return lo, hi


@functools.lru_cache(maxsize=64)
def _solve_mari_cached(a_bytes: bytes, b_bytes: bytes, xi: float, w_bytes: bytes,
                       tol: float, max_iter: int) -> tuple[bytes, bytes]:
    A = np.frombuffer(a_bytes).reshape(2, 2)
    B = np.frombuffer(b_bytes).reshape(2, 1)
    Wseed = np.frombuffer(w_bytes).reshape(2, 2)
    P = np.eye(2)
    shrink = 1.0 - xi * xi
    for _ in range(max_iter):
        bpb = (B.T @ P @ B).item()
        if bpb <= 0:
            raise GainSynthesisError("input-weighted Riccati iterate lost definiteness")
        nxt = A.T @ P @ A - shrink * (A.T @ P @ B) @ (B.T @ P @ A) / bpb + Wseed
        if np.max(np.abs(nxt - P)) < tol:
            P = nxt
            break
        P = nxt
    else:
        raise GainSynthesisError(f"Riccati fixed point did not converge in {max_iter} iterations")
    bpb = (B.T @ P @ B).item()
    W = P - A.T @ P @ A + shrink * (A.T @ P @ B) @ (B.T @ P @ A) / bpb
    return P.tobytes(), W.tobytes()


def solve_mari(A: np.ndarray, B: np.ndarray, xi: float,
               seed_residual: np.ndarray | None = None,
               tol: float = 1e-12, max_iter: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Solve the modified Riccati inequality by fixed-point iteration.

    Starting from the identity, iterates the quadratic update with the
    correction term damped by (1 - xi^2) and the seed residual added back
    each pass. Returns (P, W) with W recomputed from the converged P and
    both certified positive definite. Deterministic, memoized on inputs.
    """
    if not 0 < xi < 1:
        raise ValueError("xi must lie in (0, 1)")
    A = np.array(A, dtype=float).reshape(2, 2)
    B = np.array(B, dtype=float).reshape(2, 1)
    Wseed = np.eye(2) if seed_residual is None else np.array(seed_residual, dtype=float).reshape(2, 2)
    if eigenvalues_symmetric((Wseed + Wseed.T) / 2).lam_min <= 0:
        raise ValueError("seed residual must be symmetric positive definite")
    p_bytes, w_bytes = _solve_mari_cached(
        A.tobytes(), B.tobytes(), float(xi), Wseed.tobytes(), float(tol), int(max_iter)
    )
    P = np.frombuffer(p_bytes).reshape(2, 2).copy()
    W = np.frombuffer(w_bytes).reshape(2, 2).copy()
    if eigenvalues_symmetric(P).lam_min <= 0:
        raise GainSynthesisError("Riccati solution is not positive definite")
    if eigenvalues_symmetric((W + W.T) / 2).lam_min <= 0:
        raise GainSynthesisError("recomputed residual is not positive definite")
    return P, W


def lambda_window(xi: float, lambda_bar_2: float, lambda_bar_Np1: float) -> tuple[float, float]:
    """Interval the follower-graph eigenvalues must fall into for xi."""
    mid = (lambda_bar_2 + lambda_bar_Np1) / 2.0
    return (1.0 - xi) * mid, (1.0 + xi) * mid


def design_gain(P: np.ndarray, A: np.ndarray, B: np.ndarray,
                lambda_bar_2: float, lambda_bar_Np1: float) -> np.ndarray:
    """Feedback row vector [k_p, k_v] from the Riccati solution."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(2, 1)
    P = np.asarray(P, dtype=float)
    bpb = (B.T @ P @ B).item()
    if bpb <= 0:
        raise GainSynthesisError("B'PB must be positive")
    return (2.0 / (lambda_bar_2 + lambda_bar_Np1)) * (B.T @ P @ A).ravel() / bpb


def schur_window(t_hat: float, k_p: float, lambda_max: float) -> SchurWindow:
    """Velocity-gain stability window for the given topology peak eigenvalue."""
    if t_hat <= 0 or k_p <= 0 or lambda_max <= 0:
        raise ValueError("t_hat, k_p and lambda_max must be positive")
    return SchurWindow(t_hat * k_p, 2.0 / (t_hat * lambda_max) + t_hat * k_p / 2.0)


def _spectrum_values(spectrum) -> Sequence[float]:
    return spectrum.eigenvalues if isinstance(spectrum, Spectrum) else tuple(spectrum)


def closed_loop_spectral_radius(t_hat: float, K, h_spectrum) -> float:
    """Largest closed-loop eigenvalue magnitude across all graph modes.

    Each mode contributes the roots of a monic quadratic; complex pairs are
    handled through the product-of-roots identity so no complex arithmetic
    is needed.
    """
    k_p, k_v = (float(v) for v in np.ravel(K))
    radius = 0.0
    for lam in _spectrum_values(h_spectrum):
        if lam <= 0:
            raise ValueError("spectrum entries must be positive")
        b = lam * t_hat * k_v - 2.0
        c = lam * t_hat * t_hat * k_p - lam * t_hat * k_v + 1.0
        disc = b * b - 4.0 * c
        if disc < 0:
            r = math.sqrt(c)
        else:
            s = math.sqrt(disc)
            r = max(abs((-b + s) / 2.0), abs((-b - s) / 2.0))
        radius = max(radius, r)
    return radius


def synthesize(topology: Topology, A: np.ndarray, B: np.ndarray, xi: float,
               seed_residual: np.ndarray | None = None) -> GainDesign:
    """Full pipeline: extended-graph spectrum, Riccati solve, gain assembly."""
    ext = eigenvalues_symmetric(extended_laplacian(topology), tag="extended-laplacian")
    l2, lNp1 = ext.eigenvalues[1], ext.eigenvalues[-1]
    P, W = solve_mari(A, B, xi, seed_residual)
    K = design_gain(P, A, B, l2, lNp1)
    return GainDesign(xi=float(xi), P=P, W=W, K=K, lambda_bar_2=l2, lambda_bar_Np1=lNp1)
