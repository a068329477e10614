import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from collision import ClassicalBL, Quantum, TwoBit
from lattice import (
    DensityProfile,
    GridSpec,
    OccupancyField,
    Trajectory,
    density,
    flow_velocity,
    init_from_density,
    initial_profile,
    stream,
    total_mass,
)
from theory import equilibrium
from utils.errors import ParameterError, RangeViolationError

probabilities = arrays(np.float64, st.integers(4, 64), elements=st.floats(0.0, 1.0))


class TestGridSpec:
    def test_defaults(self):
        grid = GridSpec()
        assert grid.n_sites == 256
        assert grid.c == 1.0
        assert grid.length == 256.0

    def test_positions_scale_with_dx(self):
        grid = GridSpec(n_sites=8, dx=0.5, dt=0.25)
        assert grid.c == 2.0
        np.testing.assert_allclose(grid.x, 0.5 * np.arange(8))

    @pytest.mark.parametrize("kwargs", [{"n_sites": 3}, {"dx": 0.0}, {"dt": -1.0},
                                        {"n_sites": 10.5}])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            GridSpec(**kwargs)


class TestOccupancyField:
    def test_rejects_out_of_range(self):
        with pytest.raises(RangeViolationError):
            OccupancyField(np.array([0.5, 1.2, 0.1, 0.1]), np.zeros(4))

    def test_rejects_mismatched_shapes(self):
        with pytest.raises(ParameterError):
            OccupancyField(np.zeros(4), np.zeros(5))

    def test_tolerates_rounding_slack(self):
        field = OccupancyField(np.array([-1e-15, 0.5, 1.0 + 1e-15, 0.2]), np.zeros(4))
        assert field.n_sites == 4

    def test_arrays_are_read_only(self):
        field = OccupancyField.uniform(4, 0.3, 0.2)
        with pytest.raises(ValueError):
            field.plus[0] = 0.9


class TestStream:
    def test_moves_plus_right_and_minus_left(self):
        plus = np.array([1.0, 0.0, 0.0, 0.0])
        minus = np.array([0.0, 0.0, 0.0, 1.0])
        streamed = stream(OccupancyField(plus, minus))
        np.testing.assert_array_equal(streamed.plus, [0.0, 1.0, 0.0, 0.0])
        np.testing.assert_array_equal(streamed.minus, [0.0, 0.0, 1.0, 0.0])

    @settings(max_examples=50)
    @given(probabilities)
    def test_conserves_each_component_exactly(self, values):
        field = OccupancyField(values, values[::-1])
        streamed = stream(field)
        assert sorted(streamed.plus) == sorted(field.plus)
        assert sorted(streamed.minus) == sorted(field.minus)

    def test_full_period_is_identity(self):
        rng = np.random.default_rng(3)
        field = OccupancyField(rng.random(16), rng.random(16))
        current = field
        for _ in range(16):
            current = stream(current)
        np.testing.assert_array_equal(current.plus, field.plus)
        np.testing.assert_array_equal(current.minus, field.minus)


class TestObservables:
    def test_density_and_mass(self):
        field = OccupancyField.uniform(10, 0.25, 0.5)
        np.testing.assert_allclose(density(field).rho, 0.75)
        assert total_mass(field) == pytest.approx(7.5)
        assert total_mass(density(field)) == pytest.approx(7.5)

    def test_flow_velocity(self):
        grid = GridSpec(n_sites=4, dx=2.0, dt=1.0)
        np.testing.assert_allclose(flow_velocity(np.array([1.0, 1.5, 0.5, 1.0]), grid),
                                   [0.0, 1.0, -1.0, 0.0])

    def test_density_profile_rejects_out_of_range(self):
        with pytest.raises(RangeViolationError):
            DensityProfile(np.array([0.5, 2.5, 1.0, 1.0]))


class TestInitFromDensity:
    def test_symmetric_split(self):
        field = init_from_density(np.array([0.4, 1.0, 1.6, 0.8]), split="symmetric")
        np.testing.assert_allclose(field.plus, field.minus)
        np.testing.assert_allclose(field.plus + field.minus, [0.4, 1.0, 1.6, 0.8])

    @pytest.mark.parametrize("model", [ClassicalBL(0.707), TwoBit(), Quantum(np.pi / 4)])
    def test_equilibrium_split_matches_theory(self, model):
        rho = np.linspace(0.1, 1.9, 19)
        field = init_from_density(rho, model)
        solution = equilibrium(model, rho)
        np.testing.assert_allclose(field.plus, solution.d_plus)
        np.testing.assert_allclose(field.plus + field.minus, rho, atol=1e-14)

    @pytest.mark.parametrize("rho", [[0.0, 1.0, 1.0, 1.0], [1.0, 2.0, 1.0, 1.0]])
    def test_rejects_closed_interval_ends(self, rho):
        with pytest.raises(ParameterError):
            init_from_density(np.array(rho), split="symmetric")

    def test_equilibrium_requires_model(self):
        with pytest.raises(ParameterError):
            init_from_density(np.ones(4))


class TestInitialProfile:
    def test_sine(self, grid):
        profile = initial_profile("sine", grid, amplitude=0.4)
        assert profile.rho.max() == pytest.approx(1.4)
        assert profile.rho.min() == pytest.approx(0.6)
        assert profile.total == pytest.approx(256.0)

    def test_step_levels(self, small_grid):
        rho = initial_profile("step", small_grid, levels=(0.7, 1.3)).rho
        assert set(np.round(rho, 12)) == {0.7, 1.3}
        assert rho[0] == 0.7 and rho[-1] == 1.3

    def test_gaussian_peak_at_centre(self, grid):
        rho = initial_profile("gaussian", grid, amplitude=0.5, width=8.0).rho
        assert np.argmax(rho) == 128

    def test_rejects_profile_leaving_interval(self, grid):
        with pytest.raises(ParameterError):
            initial_profile("sine", grid, amplitude=1.0)

    def test_rejects_unknown_kind(self, grid):
        with pytest.raises(ParameterError):
            initial_profile("triangle", grid)


class TestTrajectory:
    def test_lookup_by_step(self):
        trajectory = Trajectory(steps=[0, 5, 10], rho=np.arange(12.0).reshape(3, 4) / 12,
                                dt=0.5)
        np.testing.assert_allclose(trajectory.times, [0.0, 2.5, 5.0])
        np.testing.assert_allclose(trajectory.at_step(5), trajectory.rho[1])
        assert trajectory.n_snapshots == 3
        with pytest.raises(ParameterError):
            trajectory.at_step(7)

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ParameterError):
            Trajectory(steps=[0, 1], rho=np.ones((3, 4)))
