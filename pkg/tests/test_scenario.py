import numpy as np
import pytest

from platoonsec.graph import builtin
from platoonsec.scenario import (ScenarioError, bundled_scenario_names,
                                 bundled_scenario_path, parse_scenario,
                                 parse_scenario_text, parse_topology_text,
                                 serialize_scenario, serialize_topology)

from conftest import random_mini_scenario

MINIMAL = """
[plant]
sample_time = 0.2
spacing = 20.0

[topology]
builtin = BD

[gain]
xi = 0.98

[trigger]
scheme = static

[sim]
horizon = 100
leader = 100 12
follower = 65 10
follower = 40 8
follower = 11 6
follower = 0 4
follower = -20 2
follower = -25 0
"""


class TestParsing:
    def test_minimal_scenario(self):
        sc = parse_scenario_text(MINIMAL)
        assert sc.topology == builtin("BD")
        assert sc.horizon == 100
        assert sc.partial == 0.01
        assert sc.w1_fraction == 0.5
        assert sc.threshold == 1e-2
        assert sc.beta is None
        assert sc.gain_override is None

    def test_unknown_key_reports_line(self):
        bad = MINIMAL.replace("spacing = 20.0", "spacing = 20.0\nwheelbase = 3")
        with pytest.raises(ScenarioError, match=r"line 5.*wheelbase"):
            parse_scenario_text(bad)

    def test_unknown_section_rejected(self):
        with pytest.raises(ScenarioError, match=r"unknown section"):
            parse_scenario_text("[weather]\nrain = 1\n")

    def test_missing_gain_section_named(self):
        bad = MINIMAL.replace("[gain]\nxi = 0.98\n", "")
        with pytest.raises(ScenarioError, match=r"\[gain\]"):
            parse_scenario_text(bad)

    def test_bad_number_reports_line(self):
        bad = MINIMAL.replace("xi = 0.98", "xi = fast")
        with pytest.raises(ScenarioError, match="xi must be a number"):
            parse_scenario_text(bad)

    def test_duplicate_scalar_key_rejected(self):
        bad = MINIMAL.replace("horizon = 100", "horizon = 100\nhorizon = 200")
        with pytest.raises(ScenarioError, match="duplicate"):
            parse_scenario_text(bad)

    def test_dynamic_requires_parameters(self):
        bad = MINIMAL.replace("scheme = static", "scheme = dynamic")
        with pytest.raises(ScenarioError, match="rho"):
            parse_scenario_text(bad)

    def test_gain_override_needs_both_components(self):
        bad = MINIMAL.replace("xi = 0.98", "xi = 0.98\nk_p = 0.1")
        with pytest.raises(ScenarioError, match="k_p and k_v"):
            parse_scenario_text(bad)

    def test_inline_topology(self):
        text = MINIMAL.replace(
            "builtin = BD",
            "n = 6\npinning = 1 0 0 0 0 0\n"
            "edge = 1 2\nedge = 2 3\nedge = 3 4\nedge = 4 5\nedge = 5 6")
        sc = parse_scenario_text(text)
        assert sc.topology == builtin("BD")

    def test_targets_are_one_based_labels(self):
        text = MINIMAL + "\n[attack]\ng_v = 0.5\ntargets = 1 3\nattack = 4.0 1.0\n"
        sc = parse_scenario_text(text)
        assert sc.targets == (0, 2)

    def test_budget_requires_all_constants(self):
        text = MINIMAL + "\n[attack]\nzeta0 = 3.0\ntau0 = 0.12\n"
        with pytest.raises(ScenarioError, match="budget"):
            parse_scenario_text(text)

    def test_follower_count_must_match_topology(self):
        bad = MINIMAL.replace("follower = -25 0\n", "")
        with pytest.raises(ScenarioError, match="follower"):
            parse_scenario_text(bad)


class TestTopologyFormat:
    def test_roundtrip(self):
        rng = np.random.default_rng(4)
        from conftest import random_topology
        for _ in range(30):
            t = random_topology(rng)
            again = parse_topology_text(serialize_topology(t))
            assert again == t

    def test_document_example(self):
        t = parse_topology_text("n=2\npinning=1 0\nedge 1 2\n")
        assert t.n_followers == 2
        assert t.edges() == [(0, 1)]

    def test_bad_edge_label(self):
        with pytest.raises(ScenarioError, match="out of range"):
            parse_topology_text("n=2\npinning=1 0\nedge 1 5\n")


class TestRoundTrip:
    def test_bundled_scenarios(self):
        for name in bundled_scenario_names():
            sc = parse_scenario(bundled_scenario_path(name))
            text = serialize_scenario(sc)
            assert parse_scenario_text(text) == sc
            # canonical form is a fixed point
            assert serialize_scenario(parse_scenario_text(text)) == text

    def test_random_scenarios(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            sc = random_mini_scenario(rng)
            assert parse_scenario_text(serialize_scenario(sc)) == sc

    def test_switch_scenario_roundtrip(self):
        sc = parse_scenario(bundled_scenario_path("example2_switch"))
        again = parse_scenario_text(serialize_scenario(sc))
        assert again.switch_topology == builtin("Switched")
        assert again.switch_time_s == 43.0


class TestBundled:
    def test_names_cover_reference_experiments(self):
        names = bundled_scenario_names()
        for expected in ("example1_static", "example1_dynamic",
                         "example2_switch", "example2_noswitch"):
            assert expected in names

    def test_example1_configurations(self):
        st = parse_scenario(bundled_scenario_path("example1_static"))
        dy = parse_scenario(bundled_scenario_path("example1_dynamic"))
        assert st.scheme == "static" and dy.scheme == "dynamic"
        assert st.gain_override == (0.1259, 2.5252)
        assert st.g_tilde_v == 0.58
        assert st.budget is not None and st.budget.tau0 == 0.12
        assert st.random_attack_seed is not None
        assert dy.dynamic.theta == 90.0 and dy.dynamic.mu0 == 20.0

    def test_example2_configurations(self):
        sw = parse_scenario(bundled_scenario_path("example2_switch"))
        ns = parse_scenario(bundled_scenario_path("example2_noswitch"))
        assert sw.switch_time_s == 43.0
        assert sw.attacked_kv == 3.25
        assert ns.switch_topology is None
        assert ns.attacked_kv == 3.25

    def test_unknown_bundled_name(self):
        with pytest.raises(ScenarioError, match="bundled"):
            bundled_scenario_path("example9")
