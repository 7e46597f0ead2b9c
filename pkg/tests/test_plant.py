import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoonsec.plant import (PlantModel, VehicleState, shifted_state,
                              spacing_offsets, step_follower, step_leader)


def matrix_step_oracle(m: PlantModel, x: VehicleState, u: float) -> VehicleState:
    out = m.A @ np.array(x) + (m.B * u).ravel()
    return VehicleState(float(out[0]), float(out[1]))


@pytest.fixture
def model():
    return PlantModel(0.2, spacing_offsets(20.0, 6))


class TestStepFollower:
    def test_zero_input_coasts(self, model):
        assert step_follower(model, VehicleState(0.0, 1.0), 0.0) == (0.2, 1.0)

    def test_unit_input_from_rest(self, model):
        assert step_follower(model, VehicleState(0.0, 0.0), 1.0) == (0.0, 0.2)

    def test_matches_matrix_oracle(self, model):
        x = VehicleState(65.0, 10.0)
        got = step_follower(model, x, -0.5)
        assert got == matrix_step_oracle(model, x, -0.5)
        assert got == pytest.approx((67.0, 9.9))

    def test_matches_matrix_oracle_random(self, model):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = VehicleState(float(rng.uniform(-100, 100)), float(rng.uniform(-20, 20)))
            u = float(rng.uniform(-3, 3))
            got = step_follower(model, x, u)
            ref = matrix_step_oracle(model, x, u)
            assert got.position == pytest.approx(ref.position, abs=1e-12)
            assert got.velocity == pytest.approx(ref.velocity, abs=1e-12)

    def test_rejects_non_finite(self, model):
        with pytest.raises(ValueError):
            step_follower(model, VehicleState(float("nan"), 0.0), 0.0)
        with pytest.raises(ValueError):
            step_follower(model, VehicleState(0.0, 0.0), float("inf"))

    @settings(max_examples=100)
    @given(p1=st.floats(-1e3, 1e3), v1=st.floats(-1e2, 1e2),
           p2=st.floats(-1e3, 1e3), v2=st.floats(-1e2, 1e2),
           u1=st.floats(-10, 10), u2=st.floats(-10, 10))
    def test_linearity(self, p1, v1, p2, v2, u1, u2):
        m = PlantModel(0.2, (0.0,))
        a = step_follower(m, VehicleState(p1, v1), u1)
        b = step_follower(m, VehicleState(p2, v2), u2)
        both = step_follower(m, VehicleState(p1 + p2, v1 + v2), u1 + u2)
        zero = step_follower(m, VehicleState(0.0, 0.0), 0.0)
        assert both.position == pytest.approx(a.position + b.position - zero.position,
                                              rel=1e-9, abs=1e-9)
        assert both.velocity == pytest.approx(a.velocity + b.velocity - zero.velocity,
                                              rel=1e-9, abs=1e-9)


class TestStepLeader:
    def test_constant_velocity_advance(self, model):
        assert step_leader(model, VehicleState(100.0, 12.0)) == (102.4, 12.0)

    def test_origin_fixed_point(self, model):
        assert step_leader(model, VehicleState(0.0, 0.0)) == (0.0, 0.0)

    def test_closed_form_after_500_steps(self, model):
        x = VehicleState(100.0, 12.0)
        for _ in range(500):
            x = step_leader(model, x)
        assert x.position == pytest.approx(100.0 + 500 * 0.2 * 12.0)
        assert x.velocity == 12.0

    def test_velocity_constant_along_trajectory(self, model):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = VehicleState(float(rng.uniform(-10, 10)), float(rng.uniform(-5, 5)))
            v0 = x.velocity
            for _ in range(50):
                x = step_leader(model, x)
                assert x.velocity == v0


class TestShiftedState:
    def test_removes_offset(self):
        assert shifted_state(VehicleState(20.0, 5.0), 20.0) == (0.0, 5.0)

    def test_zero_offset_identity(self):
        x = VehicleState(3.0, -1.0)
        assert shifted_state(x, 0.0) == x

    def test_uniform_gap_offsets(self):
        offs = spacing_offsets(20.0, 6)
        assert offs == tuple(-20.0 * i for i in range(1, 7))


class TestModelValidation:
    def test_rejects_nonpositive_sample_time(self):
        with pytest.raises(ValueError):
            PlantModel(0.0, (0.0,))

    def test_rejects_non_finite_spacing(self):
        with pytest.raises(ValueError):
            PlantModel(0.2, (float("inf"),))

    def test_matrices(self, model):
        assert np.array_equal(model.A, [[1.0, 0.2], [0.0, 1.0]])
        assert np.array_equal(model.B, [[0.0], [0.2]])


def test_zero_input_follower_tracks_leader(model):
    follower = VehicleState(40.0, 7.0)
    leader = VehicleState(40.0, 7.0)
    for _ in range(200):
        follower = step_follower(model, follower, 0.0)
        leader = step_leader(model, leader)
        assert follower == leader
