"""Scenario text files: parsing, validation and canonical serialization.

The format is a diff-friendly key=value document split into sections.
Unknown sections or keys are rejected with line numbers so typos never
pass silently. Serialization is canonical: parse, serialize, parse again
yields the same scenario.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

import numpy as np

from .attack import AttackBudget
from .graph import BUILTIN_NAMES, Topology, builtin
from .plant import PlantModel, VehicleState
from .sim import Scenario
from .trigger import DynamicTriggerParams

__all__ = [
    "ScenarioError",
    "parse_scenario",
    "parse_scenario_text",
    "serialize_scenario",
    "parse_topology_text",
    "serialize_topology",
    "load_topology",
    "bundled_scenario_path",
    "bundled_scenario_names",
]

_SECTION_KEYS = {
    "plant": {"sample_time", "spacing"},
    "topology": {"builtin", "file", "n", "pinning", "edge",
                 "switch_builtin", "switch_file", "switch_time"},
    "gain": {"xi", "k_p", "k_v"},
    "trigger": {"scheme", "partial", "w1_fraction", "beta",
                "rho", "vartheta", "theta", "mu0"},
    "attack": {"g_v", "attacked_kv", "targets", "attack", "random_seed",
               "zeta0", "tau0", "F0", "f0"},
    "sim": {"horizon", "threshold", "leader", "follower"},
}
_REPEATABLE = {"edge", "attack", "follower"}
_BUDGET_KEYS = ("zeta0", "tau0", "F0", "f0")


class ScenarioError(ValueError):
    """Configuration problem in a scenario or topology document."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _tokenize(text: str):
    """Yield (lineno, section, key, value) for every key=value line."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTION_KEYS:
                raise ScenarioError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ScenarioError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ScenarioError("key/value line before any [section]", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SECTION_KEYS[section]:
            raise ScenarioError(f"unknown key {key!r} in section [{section}]", lineno)
        yield lineno, section, key, value


def _collect(text: str) -> dict[str, dict[str, list[tuple[int, str]]]]:
    doc: dict[str, dict[str, list[tuple[int, str]]]] = {s: {} for s in _SECTION_KEYS}
    seen_sections = set()
    for lineno, section, key, value in _tokenize(text):
        seen_sections.add(section)
        slot = doc[section].setdefault(key, [])
        if slot and key not in _REPEATABLE:
            raise ScenarioError(f"duplicate key {key!r} in section [{section}]", lineno)
        slot.append((lineno, value))
    doc["__sections__"] = seen_sections  # type: ignore[assignment]
    return doc


def _single(doc, section, key, default=None, required=False):
    items = doc[section].get(key)
    if not items:
        if required:
            raise ScenarioError(f"section [{section}] is missing required key {key!r}")
        return None, default
    return items[0][0], items[0][1]


def _to_float(value: str, lineno: int | None, what: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ScenarioError(f"{what} must be a number, got {value!r}", lineno) from None
    if not math.isfinite(out):
        raise ScenarioError(f"{what} must be finite", lineno)
    return out


def _to_int(value: str, lineno: int | None, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(f"{what} must be an integer, got {value!r}", lineno) from None


def parse_topology_text(text: str) -> Topology:
    """Topology document: n=, pinning=, then edge lines with 1-based labels."""
    n = None
    pinning = None
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("n="):
            n = _to_int(line[2:].strip(), lineno, "follower count")
        elif line.startswith("pinning="):
            pinning = [_to_int(tok, lineno, "pinning entry") for tok in line[8:].split()]
        elif line.startswith("edge"):
            toks = line.split()
            if len(toks) != 3:
                raise ScenarioError("edge lines must read 'edge i j'", lineno)
            edges.append((_to_int(toks[1], lineno, "edge endpoint"),
                          _to_int(toks[2], lineno, "edge endpoint")))
        else:
            raise ScenarioError(f"unrecognized topology line {line!r}", lineno)
    if n is None or pinning is None:
        raise ScenarioError("topology document needs n= and pinning= lines")
    return _assemble_topology(n, pinning, edges)


def _assemble_topology(n: int, pinning: list[int], edges: list[tuple[int, int]],
                       lineno: int | None = None) -> Topology:
    if n < 1:
        raise ScenarioError("follower count must be at least 1", lineno)
    if len(pinning) != n:
        raise ScenarioError(f"pinning needs {n} entries, got {len(pinning)}", lineno)
    adj = np.zeros((n, n))
    for i, j in edges:
        if not (1 <= i <= n and 1 <= j <= n) or i == j:
            raise ScenarioError(f"edge {i} {j} is out of range for {n} followers", lineno)
        adj[i - 1, j - 1] = adj[j - 1, i - 1] = 1.0
    try:
        return Topology(adj, np.array(pinning, dtype=float))
    except ValueError as exc:
        raise ScenarioError(str(exc), lineno) from None


def serialize_topology(t: Topology) -> str:
    lines = [f"n={t.n_followers}",
             "pinning=" + " ".join(str(int(p)) for p in t.pinning)]
    lines += [f"edge {i + 1} {j + 1}" for i, j in t.edges()]
    return "\n".join(lines) + "\n"


def load_topology(path: str | Path) -> Topology:
    return parse_topology_text(Path(path).read_text())


def _topology_from_doc(doc, base_dir: Path, prefix: str = "") -> Topology | None:
    """Resolve builtin/file/inline topology keys, `prefix` selects switch_*."""
    b_key, f_key = prefix + "builtin", prefix + "file"
    ln_b, name = _single(doc, "topology", b_key)
    ln_f, fname = _single(doc, "topology", f_key)
    inline_given = prefix == "" and (doc["topology"].get("n") or doc["topology"].get("pinning"))
    given = sum(bool(x) for x in (name, fname, inline_given))
    if given == 0:
        return None
    if given > 1:
        raise ScenarioError(f"give exactly one of {b_key}, {f_key} or inline keys", ln_b or ln_f)
    if name:
        try:
            return builtin(name)
        except ValueError as exc:
            raise ScenarioError(str(exc), ln_b) from None
    if fname:
        path = Path(fname)
        if not path.is_absolute():
            path = base_dir / path
        try:
            return load_topology(path)
        except OSError as exc:
            raise ScenarioError(f"cannot read topology file {fname!r}: {exc}", ln_f) from None
    ln_n, n_val = _single(doc, "topology", "n", required=True)
    ln_p, p_val = _single(doc, "topology", "pinning", required=True)
    n = _to_int(n_val, ln_n, "follower count")
    pinning = [_to_int(tok, ln_p, "pinning entry") for tok in p_val.split()]
    edges = []
    for lineno, value in doc["topology"].get("edge", []):
        toks = value.split()
        if len(toks) != 2:
            raise ScenarioError("edge value must be two vehicle labels", lineno)
        edges.append((_to_int(toks[0], lineno, "edge endpoint"),
                      _to_int(toks[1], lineno, "edge endpoint")))
    return _assemble_topology(n, pinning, edges, ln_n)


def parse_scenario_text(text: str, base_dir: str | Path = ".") -> Scenario:
    """Parse a scenario document into a validated Scenario."""
    base_dir = Path(base_dir)
    doc = _collect(text)
    for required in ("plant", "topology", "gain", "trigger", "sim"):
        if required not in doc["__sections__"]:
            raise ScenarioError(f"missing section [{required}]")

    ln, val = _single(doc, "plant", "sample_time", required=True)
    sample_time = _to_float(val, ln, "sample_time")
    ln, val = _single(doc, "plant", "spacing", required=True)
    spacing_gap = _to_float(val, ln, "spacing")

    topology = _topology_from_doc(doc, base_dir)
    if topology is None:
        raise ScenarioError("section [topology] must define a topology")
    switch_topology = _topology_from_doc(doc, base_dir, prefix="switch_")
    ln_st, st_val = _single(doc, "topology", "switch_time")
    switch_time = _to_float(st_val, ln_st, "switch_time") if st_val is not None else None
    if (switch_topology is None) != (switch_time is None):
        raise ScenarioError("topology switching needs both switch_time and a target topology", ln_st)

    ln, val = _single(doc, "gain", "xi", required=True)
    xi = _to_float(val, ln, "xi")
    ln_kp, kp_val = _single(doc, "gain", "k_p")
    ln_kv, kv_val = _single(doc, "gain", "k_v")
    if (kp_val is None) != (kv_val is None):
        raise ScenarioError("gain override needs both k_p and k_v", ln_kp or ln_kv)
    gain_override = None
    if kp_val is not None:
        gain_override = (_to_float(kp_val, ln_kp, "k_p"), _to_float(kv_val, ln_kv, "k_v"))

    ln, val = _single(doc, "trigger", "scheme", required=True)
    scheme = val.lower()
    if scheme not in ("static", "dynamic"):
        raise ScenarioError(f"scheme must be static or dynamic, got {val!r}", ln)
    ln, val = _single(doc, "trigger", "partial", default="0.01")
    partial = _to_float(val, ln, "partial")
    ln, val = _single(doc, "trigger", "w1_fraction", default="0.5")
    w1_fraction = _to_float(val, ln, "w1_fraction")
    ln, val = _single(doc, "trigger", "beta")
    beta = _to_float(val, ln, "beta") if val is not None else None
    dynamic = None
    if scheme == "dynamic":
        vals = {}
        for key in ("rho", "vartheta", "theta", "mu0"):
            ln, val = _single(doc, "trigger", key)
            if val is None:
                raise ScenarioError(f"dynamic scheme requires trigger key {key!r}")
            vals[key] = _to_float(val, ln, key)
        try:
            dynamic = DynamicTriggerParams(**vals)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None

    ln, val = _single(doc, "attack", "g_v", default="0.0")
    g_tilde_v = _to_float(val, ln, "g_v")
    ln, val = _single(doc, "attack", "attacked_kv")
    attacked_kv = _to_float(val, ln, "attacked_kv") if val is not None else None
    ln, val = _single(doc, "attack", "targets", default="all")
    if val.strip().lower() == "all":
        targets: tuple[int, ...] | str = "all"
    else:
        labels = [_to_int(tok, ln, "target label") for tok in val.split()]
        targets = tuple(sorted(lbl - 1 for lbl in labels))
    intervals = []
    for lineno, value in doc["attack"].get("attack", []):
        toks = value.split()
        if len(toks) != 2:
            raise ScenarioError("attack value must read 'start duration' in seconds", lineno)
        intervals.append((_to_float(toks[0], lineno, "attack start"),
                          _to_float(toks[1], lineno, "attack duration")))
    ln, val = _single(doc, "attack", "random_seed")
    random_seed = _to_int(val, ln, "random_seed") if val is not None else None
    budget_vals = {}
    for key in _BUDGET_KEYS:
        ln, val = _single(doc, "attack", key)
        if val is not None:
            budget_vals[key] = _to_float(val, ln, key)
    budget = None
    if budget_vals:
        if set(budget_vals) != set(_BUDGET_KEYS):
            missing = sorted(set(_BUDGET_KEYS) - set(budget_vals))
            raise ScenarioError(f"attack budget needs all of {_BUDGET_KEYS}, missing {missing}")
        try:
            budget = AttackBudget(**budget_vals)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None

    ln, val = _single(doc, "sim", "horizon", required=True)
    horizon = _to_int(val, ln, "horizon")
    ln, val = _single(doc, "sim", "threshold", default="1e-2")
    threshold = _to_float(val, ln, "threshold")
    ln, val = _single(doc, "sim", "leader", required=True)
    toks = val.split()
    if len(toks) != 2:
        raise ScenarioError("leader value must read 'position velocity'", ln)
    leader = VehicleState(_to_float(toks[0], ln, "leader position"),
                          _to_float(toks[1], ln, "leader velocity"))
    followers = []
    for lineno, value in doc["sim"].get("follower", []):
        toks = value.split()
        if len(toks) != 2:
            raise ScenarioError("follower value must read 'position velocity'", lineno)
        followers.append(VehicleState(_to_float(toks[0], lineno, "follower position"),
                                      _to_float(toks[1], lineno, "follower velocity")))
    if not followers:
        raise ScenarioError("section [sim] needs at least one follower line")

    plant = PlantModel(sample_time, tuple(-spacing_gap * (i + 1) for i in range(len(followers))))
    sc = Scenario(
        plant=plant, topology=topology, leader=leader, followers=tuple(followers),
        xi=xi, gain_override=gain_override, scheme=scheme, partial=partial,
        w1_fraction=w1_fraction, beta=beta, dynamic=dynamic,
        g_tilde_v=g_tilde_v, attacked_kv=attacked_kv, targets=targets,
        attack_intervals_s=tuple(intervals), random_attack_seed=random_seed,
        budget=budget, switch_topology=switch_topology, switch_time_s=switch_time,
        horizon=horizon, threshold=threshold,
    )
    try:
        sc.validate()
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return sc


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario_text(path.read_text(), base_dir=path.parent)


def _fmt(x) -> str:
    return repr(float(x))


def _topology_lines(t: Topology, prefix: str = "") -> list[str]:
    for name in BUILTIN_NAMES:
        if t == builtin(name):
            return [f"{prefix}builtin = {name}"]
    if prefix:
        raise ScenarioError("switch topologies serialize only as builtins or files")
    lines = [f"n = {t.n_followers}",
             "pinning = " + " ".join(str(int(p)) for p in t.pinning)]
    lines += [f"edge = {i + 1} {j + 1}" for i, j in t.edges()]
    return lines


def serialize_scenario(sc: Scenario) -> str:
    """Canonical text form; embeds topologies so the result is portable."""
    gap = -sc.plant.spacing[0] if sc.plant.spacing else 0.0
    out = ["[plant]",
           f"sample_time = {_fmt(sc.plant.sample_time)}",
           f"spacing = {_fmt(gap)}",
           "",
           "[topology]"]
    out += _topology_lines(sc.topology)
    if sc.switch_topology is not None:
        out += _topology_lines(sc.switch_topology, prefix="switch_")
        out.append(f"switch_time = {_fmt(sc.switch_time_s)}")
    out += ["", "[gain]", f"xi = {_fmt(sc.xi)}"]
    if sc.gain_override is not None:
        out += [f"k_p = {_fmt(sc.gain_override[0])}", f"k_v = {_fmt(sc.gain_override[1])}"]
    out += ["", "[trigger]", f"scheme = {sc.scheme}",
            f"partial = {_fmt(sc.partial)}", f"w1_fraction = {_fmt(sc.w1_fraction)}"]
    if sc.beta is not None:
        out.append(f"beta = {_fmt(sc.beta)}")
    if sc.dynamic is not None:
        out += [f"rho = {_fmt(sc.dynamic.rho)}", f"vartheta = {_fmt(sc.dynamic.vartheta)}",
                f"theta = {_fmt(sc.dynamic.theta)}", f"mu0 = {_fmt(sc.dynamic.mu0)}"]
    has_attack = (sc.attack_intervals_s or sc.random_attack_seed is not None
                  or sc.budget is not None or sc.g_tilde_v or sc.attacked_kv is not None)
    if has_attack:
        out += ["", "[attack]", f"g_v = {_fmt(sc.g_tilde_v)}"]
        if sc.attacked_kv is not None:
            out.append(f"attacked_kv = {_fmt(sc.attacked_kv)}")
        if sc.targets != "all":
            out.append("targets = " + " ".join(str(i + 1) for i in sc.targets))
        for start, dur in sc.attack_intervals_s:
            out.append(f"attack = {_fmt(start)} {_fmt(dur)}")
        if sc.random_attack_seed is not None:
            out.append(f"random_seed = {sc.random_attack_seed}")
        if sc.budget is not None:
            out += [f"zeta0 = {_fmt(sc.budget.zeta0)}", f"tau0 = {_fmt(sc.budget.tau0)}",
                    f"F0 = {_fmt(sc.budget.F0)}", f"f0 = {_fmt(sc.budget.f0)}"]
    out += ["", "[sim]", f"horizon = {sc.horizon}", f"threshold = {_fmt(sc.threshold)}",
            f"leader = {_fmt(sc.leader.position)} {_fmt(sc.leader.velocity)}"]
    out += [f"follower = {_fmt(f.position)} {_fmt(f.velocity)}" for f in sc.followers]
    return "\n".join(out) + "\n"


def bundled_scenario_names() -> list[str]:
    root = resources.files("platoonsec") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def bundled_scenario_path(name: str) -> Path:
    path = resources.files("platoonsec") / "scenarios" / f"{name}.scn"
    if not path.is_file():
        raise ScenarioError(
            f"no bundled scenario {name!r}; available: {', '.join(bundled_scenario_names())}")
    return Path(str(path))
