"""Command line interface: run, synthesize, certify, compare, sweep.

Scenarios are text files (or bundled names such as example1_static); every
run writes a manifest holding the resolved scenario so results can be
reproduced bit for bit.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import certify as certify_mod
from . import gain as gain_mod
from . import report
from . import sim
from . import trigger as trigger_mod
from .gain import GainSynthesisError
from .graph import builtin, eigenvalues_symmetric, h_matrix
from .scenario import (ScenarioError, bundled_scenario_names, bundled_scenario_path,
                       parse_scenario, serialize_scenario)

__all__ = ["main"]

_OUT_ROOT_ENV = "PLATOONSEC_OUT_ROOT"


def _load_scenario(spec: str) -> sim.Scenario:
    path = Path(spec)
    if path.is_file():
        return parse_scenario(path)
    if path.suffix == "" and "/" not in spec and os.sep not in spec:
        return parse_scenario(bundled_scenario_path(spec))
    raise ScenarioError(f"scenario file not found: {spec}")


def _apply_common_overrides(sc: sim.Scenario, args) -> sim.Scenario:
    if getattr(args, "horizon_override", None) is not None:
        sc = replace(sc, horizon=args.horizon_override)
    if getattr(args, "seed", None) is not None and sc.budget is not None:
        sc = replace(sc, random_attack_seed=args.seed, attack_intervals_s=())
    sc.validate()
    return sc


def _default_out(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    root = Path(os.environ.get(_OUT_ROOT_ENV, "."))
    stem = Path(args.scenario).stem
    return root / f"{stem}-out"


def _emit(pairs: list[tuple[str, str]], fmt: str) -> str:
    if fmt == "csv":
        return "\n".join(f"{k},{v}" for k, v in pairs) + "\n"
    return "\n".join(f"{k} = {v}" for k, v in pairs) + "\n"


def _num(x: float) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return report.format_float(x)


def cmd_run(args) -> int:
    sc = _apply_common_overrides(_load_scenario(args.scenario), args)
    out_dir = _default_out(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write-probe"
    probe.write_text("")
    probe.unlink()
    tr = sim.run(sc)
    m = sim.metrics(tr, sc)
    outputs = {"trace": "trace.csv", "metrics_csv": "metrics.csv",
               "metrics_kv": "metrics.txt", "manifest": "manifest.json"}
    report.write_trace_csv(tr, out_dir / "trace.csv")
    report.write_metrics(m, out_dir / "metrics.csv", out_dir / "metrics.txt")
    if not args.no_plots:
        for path in report.render_run_figures(tr, sc, out_dir):
            outputs[path.stem] = path.name
    report.write_manifest(out_dir / "manifest.json", serialize_scenario(sc),
                          sc.random_attack_seed, outputs)
    if args.format == "csv":
        sys.stdout.write(report.metrics_csv_text(m))
    else:
        sys.stdout.write("\n".join(report.metrics_kv_lines(m)) + "\n")
    sys.stdout.write(f"outputs written to {out_dir}\n")
    return 0


def cmd_synthesize(args) -> int:
    sc = _apply_common_overrides(_load_scenario(args.scenario), args)
    d = sim.prepare(sc)
    A = sc.plant.A
    lo, hi = gain_mod.xi_window(A, d.gain.lambda_bar_2, d.gain.lambda_bar_Np1)
    lam_lo, lam_hi = gain_mod.lambda_window(sc.xi, d.gain.lambda_bar_2, d.gain.lambda_bar_Np1)
    lam_ok = lam_lo < d.h_spectrum.lam_min and d.h_spectrum.lam_max < lam_hi
    window = gain_mod.schur_window(sc.plant.sample_time, float(d.K[0]), d.h_spectrum.lam_max)
    radius = gain_mod.closed_loop_spectral_radius(sc.plant.sample_time, d.K, d.h_spectrum)
    pairs = [
        ("xi", _num(sc.xi)),
        ("xi_inverse_window_lo", _num(lo)),
        ("xi_inverse_window_hi", _num(hi)),
        ("lambda_window_lo", _num(lam_lo)),
        ("lambda_window_hi", _num(lam_hi)),
        ("lambda_window_ok", str(int(lam_ok))),
        ("lambda_min_H", _num(d.h_spectrum.lam_min)),
        ("lambda_max_H", _num(d.h_spectrum.lam_max)),
        ("P11", _num(d.gain.P[0, 0])), ("P12", _num(d.gain.P[0, 1])),
        ("P22", _num(d.gain.P[1, 1])),
        ("W11", _num(d.gain.W[0, 0])), ("W12", _num(d.gain.W[0, 1])),
        ("W22", _num(d.gain.W[1, 1])),
        ("k_p_designed", _num(d.gain.K[0])), ("k_v_designed", _num(d.gain.K[1])),
        ("k_p_active", _num(d.K[0])), ("k_v_active", _num(d.K[1])),
        ("schur_window_lo", _num(window.lower)),
        ("schur_window_hi", _num(window.upper)),
        ("spectral_radius", _num(radius)),
        ("schur_stable", str(int(radius < 1.0))),
    ]
    text = _emit(pairs, args.format)
    sys.stdout.write(text)
    if args.out is not None:
        _write_report_dir(args.out, "synthesize", text, args.format, sc)
    return 0


def _write_report_dir(out: str, stem: str, text: str, fmt: str, sc: sim.Scenario) -> None:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = "csv" if fmt == "csv" else "txt"
    name = f"{stem}.{suffix}"
    (out_dir / name).write_text(text)
    report.write_manifest(out_dir / "manifest.json", serialize_scenario(sc),
                          sc.random_attack_seed, {stem: name, "manifest": "manifest.json"})


def _attacked_kv(sc: sim.Scenario, K: np.ndarray) -> float:
    if sc.attacked_kv is not None:
        return float(sc.attacked_kv)
    return float(K[1] + sc.g_tilde_v)


def _certificate_summary(sc: sim.Scenario) -> tuple[list[tuple[str, str]], dict]:
    d = sim.prepare(sc)
    sp = d.trigger
    A, B = sc.plant.A, sc.plant.B
    lam_n = d.h_spectrum.lam_max
    values: dict = {}
    pairs: list[tuple[str, str]] = []
    try:
        alpha = certify_mod.alpha_tilde(sp.s1, sp.s2, sp.s3, sp.beta, sp.partial,
                                        sp.w2, lam_n, d.gain.P)
    except certify_mod.CertificateError as exc:
        pairs.append(("alpha_tilde", "invalid"))
        pairs.append(("alpha_tilde_reason", str(exc)))
        alpha = None
    else:
        pairs.append(("alpha_tilde", _num(alpha)))
    values["alpha_tilde"] = alpha

    k_att = d.K.copy()
    k_att[1] = _attacked_kv(sc, d.K)
    s1a, s2a, s3a = trigger_mod.compute_s_constants(d.H, d.gain.P, A, B, k_att, sp.w1)
    tr = sim.run(sc)
    m = sim.metrics(tr, sc)
    values["trace"], values["metrics"] = tr, m
    try:
        gamma = certify_mod.gamma_tilde(sp.s1, s2a, s3a, sp.beta, sp.partial,
                                        sp.w2, lam_n, d.gain.P, fallback_trace=tr)
    except certify_mod.CertificateError as exc:
        pairs.append(("gamma_tilde", "invalid"))
        pairs.append(("gamma_tilde_reason", str(exc)))
        gamma = None
    else:
        pairs.append(("gamma_tilde", _num(gamma)))
    values["gamma_tilde"] = gamma
    formula_valid = sp.s1 - sp.beta * s2a > 0
    pairs.append(("gamma_tilde_path", "formula" if formula_valid else "trace-fallback"))
    empirical = None
    if tr.attacked_mask.any():
        with np.errstate(divide="ignore"):
            v = tr.lyapunov
            ok = tr.attacked_mask[:-1] & (v[:-1] > 0) & (v[1:] > 0)
            if ok.any():
                empirical = float(np.max(np.log(v[1:][ok] / v[:-1][ok])))
    pairs.append(("gamma_empirical", _num(empirical) if empirical is not None else "n/a"))
    pairs.append(("delta_star", _num(m.delta_star)))
    values["delta_star"] = m.delta_star

    if sc.budget is not None and alpha is not None and gamma is not None:
        try:
            cert = certify_mod.theorem1_certificate(sc.budget.tau0, m.delta_star,
                                                    sc.budget.f0, alpha, gamma)
        except certify_mod.CertificateError as exc:
            pairs += [("theorem1_holds", "invalid"), ("theorem1_reason", str(exc))]
            values["theorem1"] = None
        else:
            pairs += [("theorem1_lhs", _num(cert.lhs)), ("theorem1_rhs", _num(cert.rhs)),
                      ("theorem1_margin", _num(cert.margin)),
                      ("theorem1_holds", str(int(cert.holds)))]
            values["theorem1"] = cert
    else:
        pairs.append(("theorem1_holds", "n/a"))
        values["theorem1"] = None

    t2 = None
    if sc.dynamic is not None:
        t2 = certify_mod.theorem2_params(sp, sc.dynamic, d.h_spectrum, d.gain.P)
        pairs += [("alpha1", _num(t2.alpha1)), ("Gamma_tilde", _num(t2.Gamma_tilde)),
                  ("theorem2_threshold_ok", str(int(t2.eq_threshold_ok))),
                  ("theorem2_decay_printed_ok", str(int(t2.eq_decay_printed_ok))),
                  ("theorem2_decay_adopted_ok", str(int(t2.eq_decay_adopted_ok))),
                  ("theorem2_feasible", str(int(t2.feasible)))]
        values["theorem2"] = t2
        if (sc.budget is not None and gamma is not None
                and not math.isnan(t2.Gamma_tilde) and t2.Gamma_tilde > 0
                and t2.Gamma_tilde + gamma > 0):
            lhs = sc.budget.tau0 + m.delta_star * sc.budget.f0
            rhs = t2.Gamma_tilde / (t2.Gamma_tilde + gamma)
            pairs += [("theorem2_lhs", _num(lhs)), ("theorem2_rhs", _num(rhs)),
                      ("theorem2_margin", _num(rhs - lhs)),
                      ("theorem2_holds", str(int(lhs < rhs)))]
    else:
        pairs.append(("alpha1", "n/a"))
        values["theorem2"] = None
    if alpha is not None and gamma is not None:
        values["rates"] = certify_mod.RateConstants(
            alpha_tilde=alpha, gamma_tilde=gamma,
            alpha1=t2.alpha1 if t2 is not None else None,
            Gamma_tilde=t2.Gamma_tilde if t2 is not None else None)

    candidates = [sc.topology, builtin("BD"), builtin("Switched")]
    if sc.switch_topology is not None:
        candidates.append(sc.switch_topology)
    pick = certify_mod.select_mitigation_topology(
        candidates, sc.plant.sample_time, float(d.K[0]), _attacked_kv(sc, d.K))
    if pick is None:
        pairs.append(("mitigation_topology", "none"))
    else:
        name = next((nm for nm in ("BD", "Switched") if pick == builtin(nm)), "custom")
        pairs.append(("mitigation_topology", name))
        pairs.append(("mitigation_lambda_max",
                      _num(eigenvalues_symmetric(h_matrix(pick)).lam_max)))
    values["mitigation"] = pick
    return pairs, values


def cmd_certify(args) -> int:
    sc = _apply_common_overrides(_load_scenario(args.scenario), args)
    pairs, _ = _certificate_summary(sc)
    text = _emit(pairs, args.format)
    sys.stdout.write(text)
    if args.out is not None:
        _write_report_dir(args.out, "certify", text, args.format, sc)
    return 0


def _scheme_free(sc: sim.Scenario) -> sim.Scenario:
    return replace(sc, scheme="static", dynamic=None)


def cmd_compare(args) -> int:
    sc_static = _load_scenario(args.static)
    sc_dynamic = _load_scenario(args.dynamic)
    if sc_static.scheme == sc_dynamic.scheme:
        raise ScenarioError("compare needs one static and one dynamic scenario")
    if sc_static.scheme != "static":
        sc_static, sc_dynamic = sc_dynamic, sc_static
    if _scheme_free(sc_static) != _scheme_free(sc_dynamic):
        raise ScenarioError("scenarios differ beyond the trigger scheme")
    results = {}
    for label, sc in (("static", sc_static), ("dynamic", sc_dynamic)):
        tr = sim.run(sc)
        results[label] = sim.metrics(tr, sc)
    n = sc_static.topology.n_followers
    lines = [f"{'vehicle':>8} {'static':>8} {'dynamic':>8}"]
    for i in range(n):
        lines.append(f"{i + 1:>8} {results['static'].trigger_counts[i]:>8} "
                     f"{results['dynamic'].trigger_counts[i]:>8}")
    lines.append(f"{'total':>8} {results['static'].total_triggers:>8} "
                 f"{results['dynamic'].total_triggers:>8}")
    lines.append(f"{'t_c':>8} {_num(results['static'].consensus_time):>8} "
                 f"{_num(results['dynamic'].consensus_time):>8}")
    lines.append(f"{'J':>8} {_num(results['static'].J):>8} "
                 f"{_num(results['dynamic'].J):>8}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out is not None:
        rows = ["vehicle,static,dynamic"]
        for i in range(n):
            rows.append(f"{i + 1},{results['static'].trigger_counts[i]},"
                        f"{results['dynamic'].trigger_counts[i]}")
        rows.append(f"total,{results['static'].total_triggers},"
                    f"{results['dynamic'].total_triggers}")
        rows.append(f"t_c,{_num(results['static'].consensus_time)},"
                    f"{_num(results['dynamic'].consensus_time)}")
        rows.append(f"J,{_num(results['static'].J)},{_num(results['dynamic'].J)}")
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(rows) + "\n")
    return 0


_SWEEPABLE = {
    "g_v": lambda sc, v: replace(sc, g_tilde_v=v),
    "attacked_kv": lambda sc, v: replace(sc, attacked_kv=v),
    "partial": lambda sc, v: replace(sc, partial=v),
    "w1_fraction": lambda sc, v: replace(sc, w1_fraction=v),
    "beta": lambda sc, v: replace(sc, beta=v),
    "xi": lambda sc, v: replace(sc, xi=v),
    "threshold": lambda sc, v: replace(sc, threshold=v),
    "zeta0": lambda sc, v: replace(sc, budget=replace(sc.budget, zeta0=v)),
    "tau0": lambda sc, v: replace(sc, budget=replace(sc.budget, tau0=v)),
    "F0": lambda sc, v: replace(sc, budget=replace(sc.budget, F0=v)),
    "f0": lambda sc, v: replace(sc, budget=replace(sc.budget, f0=v)),
    "rho": lambda sc, v: replace(sc, dynamic=replace(sc.dynamic, rho=v)),
    "vartheta": lambda sc, v: replace(sc, dynamic=replace(sc.dynamic, vartheta=v)),
    "theta": lambda sc, v: replace(sc, dynamic=replace(sc.dynamic, theta=v)),
    "mu0": lambda sc, v: replace(sc, dynamic=replace(sc.dynamic, mu0=v)),
}


def cmd_sweep(args) -> int:
    sc = _apply_common_overrides(_load_scenario(args.scenario), args)
    if args.parameter not in _SWEEPABLE:
        raise ScenarioError(
            f"unknown sweep parameter {args.parameter!r}; "
            f"choose from {sorted(_SWEEPABLE)}")
    grid = [float(tok) for tok in args.grid.split(",") if tok.strip() != ""]
    rows = ["parameter,value,margin,consensus_time,J"]
    for value in grid:
        try:
            sc_i = _SWEEPABLE[args.parameter](sc, value)
            sc_i.validate()
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"cannot set {args.parameter}={value}: {exc}") from None
        pairs, values = _certificate_summary(sc_i)
        m = values["metrics"]
        alpha, gamma = values["alpha_tilde"], values["gamma_tilde"]
        if alpha is None or gamma is None or sc_i.budget is None:
            margin = "n/a"
        else:
            try:
                cert = certify_mod.theorem1_certificate(
                    sc_i.budget.tau0, m.delta_star, sc_i.budget.f0, alpha, gamma)
                margin = _num(cert.margin)
            except certify_mod.CertificateError:
                # attacked mode decays at least as fast as the nominal mode:
                # every budget is tolerable
                margin = "inf"
        rows.append(f"{args.parameter},{_num(value)},{margin},"
                    f"{_num(m.consensus_time)},{_num(m.J)}")
    text = "\n".join(rows) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platoonsec",
        description="Event-triggered platoon consensus simulator and certificate checker",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True,
                           help="scenario file or bundled name "
                                f"({', '.join(bundled_scenario_names())})")
        p.add_argument("--seed", type=int, default=None,
                       help="override the random attack seed")
        p.add_argument("--horizon-override", type=int, default=None)
        p.add_argument("--format", choices=("csv", "kv"), default="kv")

    p = sub.add_parser("run", help="simulate a scenario and write trace/metrics/figures")
    common(p)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synthesize", help="print the gain design and stability windows")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("certify", help="evaluate the secure-consensus certificates")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("compare", help="side-by-side trigger statistics of two schemes")
    p.add_argument("--static", required=True, help="scenario file or bundled name")
    p.add_argument("--dynamic", required=True, help="scenario file or bundled name")
    p.add_argument("--out", default=None, help="comparison CSV path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="grid sweep of one parameter with certificate margins")
    common(p)
    p.add_argument("--parameter", required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--out", default=None, help="sweep CSV path")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GainSynthesisError, certify_mod.CertificateError, ValueError,
            ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
