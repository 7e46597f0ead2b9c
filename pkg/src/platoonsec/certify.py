"""Secure-consensus rate certificates and mitigation topology selection.

The nominal decay rate and the attacked-mode rate feed a budget inequality:
consensus survives sequential gain attacks when the attacked share of time
stays below the rate ratio. Mitigation picks a replacement topology whose
stability window still contains the corrupted gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gain import schur_window
from .graph import Spectrum, Topology, eigenvalues_symmetric, h_matrix, is_leader_connected
from .trigger import DynamicTriggerParams, StaticTriggerParams

__all__ = [
    "CertificateError",
    "RateConstants",
    "CertificateResult",
    "Theorem2Result",
    "alpha_tilde",
    "gamma_tilde",
    "theorem1_certificate",
    "theorem2_params",
    "select_mitigation_topology",
]


class CertificateError(ValueError):
    """A certificate precondition failed; there is no meaningful rate."""


@dataclass(frozen=True)
class RateConstants:
    """Bundle of the decay/growth rates used by both certificates."""

    alpha_tilde: float
    gamma_tilde: float
    alpha1: float | None = None
    Gamma_tilde: float | None = None


@dataclass(frozen=True)
class CertificateResult:
    holds: bool
    margin: float
    lhs: float
    rhs: float


@dataclass(frozen=True)
class Theorem2Result:
    """Dynamic-scheme rate and feasibility flags.

    The printed form of the second feasibility inequality is inconsistent
    with the worked numbers, so both sign readings are reported; the
    adopted reading is the one consistent with alpha1.
    """

    alpha1: float
    Gamma_tilde: float
    alpha_tilde: float
    feasible: bool
    eq_threshold_ok: bool
    eq_decay_printed_ok: bool
    eq_decay_adopted_ok: bool


def _sigma_coefficient(s1: float, s2: float, s3: float, beta: float, partial: float) -> float:
    return partial * beta * (s1 - beta * s2) / (s2 + beta * s3)


def _lam_min(m: np.ndarray) -> float:
    return eigenvalues_symmetric(np.asarray(m, dtype=float)).lam_min


def _lam_max(m: np.ndarray) -> float:
    return eigenvalues_symmetric(np.asarray(m, dtype=float)).lam_max


def alpha_tilde(s1: float, s2: float, s3: float, beta: float, partial: float,
                W2: np.ndarray, lambda_N_H: float, P: np.ndarray) -> float:
    """Guaranteed per-step decay rate of the Lyapunov value between events.

    Requires a positive nominal margin s1 - beta*s2 and a threshold small
    enough that 1/lambda_N clears its square root; violations raise
    CertificateError rather than returning a number.
    """
    margin = s1 - beta * s2
    if margin <= 0:
        raise CertificateError("nominal margin s1 - beta*s2 is not positive")
    sigma = _sigma_coefficient(s1, s2, s3, beta, partial)
    root = math.sqrt(sigma)
    gap = 1.0 / lambda_N_H - root
    if gap <= 0:
        raise CertificateError("threshold too large: 1/lambda_N does not clear sqrt(sigma)")
    return ((1.0 - partial) * margin / (gap * gap) + _lam_min(W2)) / _lam_max(P)


def gamma_tilde(s1: float, s2_att: float, s3_att: float, beta: float, partial: float,
                W2_att: np.ndarray, lambda_N_H: float, P: np.ndarray,
                fallback_trace=None) -> float:
    """Attacked-mode growth rate: closed form when defined, else measured.

    The closed form mirrors the nominal rate with attacked norm constants
    and flipped sign; a large perturbation drives its square root complex,
    in which case the rate is taken as the worst one-step log growth of the
    Lyapunov value over corrupted steps of the supplied trace.
    """
    margin = s1 - beta * s2_att
    if margin > 0:
        sigma = _sigma_coefficient(s1, s2_att, s3_att, beta, partial)
        gap = 1.0 / lambda_N_H - math.sqrt(sigma)
        if gap > 0:
            return -((1.0 - partial) * margin / (gap * gap) + _lam_min(W2_att)) / _lam_max(P)
    if fallback_trace is None:
        raise CertificateError(
            "attacked-mode closed form undefined and no fallback trace supplied"
        )
    V = np.asarray(fallback_trace.lyapunov, dtype=float)
    mask = np.asarray(fallback_trace.attacked_mask, dtype=bool)
    rates = []
    for t in range(len(V) - 1):
        if mask[t] and V[t] > 0 and V[t + 1] > 0:
            rates.append(math.log(V[t + 1] / V[t]))
    if not rates:
        raise CertificateError("fallback trace contains no usable attacked steps")
    return max(rates)


def theorem1_certificate(tau0: float, delta_star: float, f0: float,
                         alpha_t: float, gamma_t: float) -> CertificateResult:
    """Static-scheme budget inequality with its margin."""
    if alpha_t <= 0:
        raise CertificateError("nominal decay rate must be positive")
    denom = alpha_t + gamma_t
    if denom <= 0:
        raise CertificateError("rate sum alpha + gamma must be positive")
    lhs = tau0 + delta_star * f0
    rhs = alpha_t / denom
    return CertificateResult(holds=lhs < rhs, margin=rhs - lhs, lhs=lhs, rhs=rhs)


def theorem2_params(sp: StaticTriggerParams, dp: DynamicTriggerParams,
                    spectrum: Spectrum, P: np.ndarray) -> Theorem2Result:
    """Dynamic-scheme rate from the threshold-variable decay coefficient.

    alpha1 groups the mu-term coefficient; the overall rate is the smaller
    of alpha1 and the static rate. Infeasibility is reported, not raised.
    """
    load = sp.s2 / sp.beta + sp.s3
    alpha1 = dp.rho - (load - dp.vartheta) / dp.theta
    lam_n = spectrum.lam_max if isinstance(spectrum, Spectrum) else max(spectrum)
    try:
        a_t = alpha_tilde(sp.s1, sp.s2, sp.s3, sp.beta, sp.partial, sp.w2, lam_n, P)
    except CertificateError:
        a_t = math.nan
    gamma_big = min(a_t, alpha1) if not math.isnan(a_t) else math.nan
    eq_threshold = load > dp.vartheta
    eq_printed = (-dp.theta * dp.rho + dp.vartheta) > load
    eq_adopted = (dp.theta * dp.rho + dp.vartheta) > load
    feasible = bool(eq_threshold and eq_adopted
                    and not math.isnan(gamma_big) and gamma_big > 0)
    return Theorem2Result(alpha1=alpha1, Gamma_tilde=gamma_big, alpha_tilde=a_t,
                          feasible=feasible, eq_threshold_ok=eq_threshold,
                          eq_decay_printed_ok=eq_printed,
                          eq_decay_adopted_ok=eq_adopted)


def select_mitigation_topology(candidates: list[Topology], t_hat: float,
                               k_p: float, attacked_kv: float) -> Topology | None:
    """Smallest-peak-eigenvalue topology whose window admits the bad gain.

    Candidates failing leader connectivity are dropped; among the rest the
    one with the smallest largest eigenvalue whose stability window
    strictly contains attacked_kv wins, first in list order on ties.
    """
    best: Topology | None = None
    best_lam = math.inf
    for cand in candidates:
        if not is_leader_connected(cand):
            continue
        lam_max = eigenvalues_symmetric(h_matrix(cand)).lam_max
        window = schur_window(t_hat, k_p, lam_max)
        if not window.contains(attacked_kv):
            continue
        if lam_max < best_lam:
            best, best_lam = cand, lam_max
    return best
