import math

import numpy as np
import pytest

from collision import ClassicalBL, Quantum, build_unitary, step
from lattice import OccupancyField, init_from_density, initial_profile
from microscopic import (
    BitEnsemble,
    BitRealization,
    EnsembleSpec,
    classical_micro_collide,
    classical_micro_step,
    collide_ensemble,
    ensemble_average,
    fit_noise_exponent,
    measure_noise,
    quantum_micro_step,
    sample_ensemble,
    stream_ensemble,
)
from utils.errors import ConservationError, ParameterError
from utils.rng import Draw, uniforms


@pytest.fixture
def field(small_grid):
    return init_from_density(initial_profile("sine", small_grid, amplitude=0.4), ClassicalBL(0.5))


class TestRandomStreams:
    def test_reproducible(self):
        a = uniforms(7, 3, 10, Draw.FAIR, 16)
        b = uniforms(7, 3, 10, Draw.FAIR, 16)
        np.testing.assert_array_equal(a, b)

    def test_coordinates_are_independent(self):
        base = uniforms(7, 3, 10, Draw.FAIR, 16)
        for other in (uniforms(8, 3, 10, Draw.FAIR, 16), uniforms(7, 4, 10, Draw.FAIR, 16),
                      uniforms(7, 3, 11, Draw.FAIR, 16), uniforms(7, 3, 10, Draw.BIAS, 16)):
            assert not np.array_equal(base, other)

    def test_prefix_property(self):
        np.testing.assert_array_equal(uniforms(1, 0, 0, Draw.PLUS, 8),
                                      uniforms(1, 0, 0, Draw.PLUS, 32)[:8])


class TestEnsembleSpec:
    @pytest.mark.parametrize("kwargs", [{"n_realizations": 0}, {"master_seed": -1},
                                        {"mode": "exact"}, {"workers": 0}])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            EnsembleSpec(**kwargs)

    def test_realization_rejects_non_bits(self):
        with pytest.raises(ParameterError):
            BitRealization(np.array([0, 2]), np.array([0, 1]))


class TestClassicalMicro:
    def test_sample_matches_field_on_average(self, field):
        ensemble = sample_ensemble(field, EnsembleSpec(n_realizations=4096, master_seed=1))
        average = ensemble_average(ensemble)
        np.testing.assert_allclose(average.plus, field.plus, atol=0.04)
        np.testing.assert_allclose(average.minus, field.minus, atol=0.04)

    def test_collision_conserves_particles_per_realization(self, field):
        ensemble = sample_ensemble(field, EnsembleSpec(n_realizations=32, master_seed=2))
        collided = collide_ensemble(ensemble, 0.5)
        np.testing.assert_array_equal(collided.plus.sum(axis=1) + collided.minus.sum(axis=1),
                                      ensemble.plus.sum(axis=1) + ensemble.minus.sum(axis=1))

    def test_empty_and_full_sites_fixed(self):
        realization = BitRealization(np.array([0, 1, 1, 0]), np.array([0, 1, 0, 1]))
        collided = classical_micro_collide(realization, 0.3)
        assert collided.bits_plus[0] == 0 and collided.bits_minus[0] == 0
        assert collided.bits_plus[1] == 1 and collided.bits_minus[1] == 1
        assert collided.particle_count == realization.particle_count

    def test_alpha_one_sends_lone_particles_right(self):
        realization = BitRealization(np.zeros(64, dtype=np.uint8), np.ones(64, dtype=np.uint8))
        collided = classical_micro_collide(realization, 1.0)
        assert collided.bits_plus.all() and not collided.bits_minus.any()

    def test_exit_probability(self):
        # One lone left mover per site, many independent realizations.
        n, alpha = 2000, 0.4
        spec = EnsembleSpec(n_realizations=n, master_seed=5)
        ensemble = BitEnsemble(np.zeros((n, 64)), np.ones((n, 64)), spec)
        collided = collide_ensemble(ensemble, alpha)
        fraction = collided.plus.mean()
        sigma = math.sqrt(0.7 * 0.3 / (64 * n))
        assert abs(fraction - (1 + alpha) / 2) < 4 * sigma

    def test_worker_count_does_not_change_result(self, field):
        serial = EnsembleSpec(n_realizations=16, master_seed=9, workers=1)
        threaded = EnsembleSpec(n_realizations=16, master_seed=9, workers=4)
        a = classical_micro_step(sample_ensemble(field, serial), 0.5)
        b = classical_micro_step(sample_ensemble(field, threaded), 0.5)
        np.testing.assert_array_equal(a.plus, b.plus)
        np.testing.assert_array_equal(a.minus, b.minus)

    def test_particle_change_detected(self, field, mocker):
        ensemble = sample_ensemble(field, EnsembleSpec(n_realizations=4, master_seed=3))
        mocker.patch(
            "microscopic.classical_micro_collide",
            side_effect=lambda r, alpha: BitRealization(np.ones_like(r.bits_plus),
                                                        np.ones_like(r.bits_minus),
                                                        r.master_seed, r.index, r.step),
        )
        with pytest.raises(ConservationError):
            collide_ensemble(ensemble, 0.5)

    def test_stream_advances_step(self, field):
        ensemble = sample_ensemble(field, EnsembleSpec(n_realizations=2))
        streamed = stream_ensemble(ensemble)
        assert streamed.step == 1
        np.testing.assert_array_equal(streamed.plus[:, 1], ensemble.plus[:, 0])
        np.testing.assert_array_equal(streamed.minus[:, 0], ensemble.minus[:, 1])

    def test_average_tracks_mesoscopic_step(self, field):
        spec = EnsembleSpec(n_realizations=8192, master_seed=4)
        ensemble = classical_micro_step(sample_ensemble(field, spec), 0.5)
        expected = step(field, ClassicalBL(0.5))
        stats = measure_noise(ensemble, expected)
        assert stats.n_realizations == 8192
        assert stats.std < 3.0 / math.sqrt(8192)


class TestQuantumMicro:
    @pytest.fixture
    def quantum_field(self, small_grid):
        return init_from_density(initial_profile("sine", small_grid, amplitude=0.4),
                                 Quantum(math.pi / 4))

    def test_mean_field_step_tracks_mesoscopic(self, quantum_field):
        model = Quantum(math.pi / 4)
        spec = EnsembleSpec(n_realizations=4096, master_seed=6, mode="quantum_sampled")
        ensemble = sample_ensemble(quantum_field, spec)
        new_ensemble, estimate = quantum_micro_step(quantum_field, build_unitary(model.theta),
                                                    ensemble)
        assert new_ensemble.step == 1
        expected = step(quantum_field, model)
        assert measure_noise(estimate, expected).max_abs < 5.0 * 0.5 / math.sqrt(4096)

    def test_independent_mode_conserves_particles_per_realization(self, quantum_field):
        spec = EnsembleSpec(n_realizations=64, master_seed=6, mode="quantum_sampled",
                            independent=True)
        ensemble = sample_ensemble(quantum_field, spec)
        new_ensemble, _ = quantum_micro_step(quantum_field, build_unitary(math.pi / 4), ensemble)
        for r in range(spec.n_realizations):
            assert new_ensemble.realization(r).particle_count == \
                ensemble.realization(r).particle_count

    def test_independent_mode_swap_probability(self):
        n, theta = 512, 1.0
        spec = EnsembleSpec(n_realizations=n, master_seed=13, mode="quantum_sampled",
                            independent=True)
        ensemble = BitEnsemble(np.ones((n, 64)), np.zeros((n, 64)), spec)
        new_ensemble, _ = quantum_micro_step(OccupancyField.uniform(64, 1.0, 0.0),
                                             build_unitary(theta), ensemble)
        assert np.all(new_ensemble.plus + new_ensemble.minus == 1)
        sigma = math.sqrt(0.3 * 0.7 / (64 * n))
        assert abs(new_ensemble.plus.mean() - math.cos(theta) ** 2) < 4 * sigma

    def test_independent_mode_fixes_empty_and_full_sites(self):
        spec = EnsembleSpec(n_realizations=16, master_seed=2, mode="quantum_sampled",
                            independent=True)
        plus = np.zeros((16, 8))
        plus[:, ::2] = 1
        ensemble = BitEnsemble(plus, plus, spec)
        new_ensemble, _ = quantum_micro_step(OccupancyField.uniform(8, 0.5, 0.5),
                                             build_unitary(0.7), ensemble)
        # Streaming shifts the movers in opposite directions.
        np.testing.assert_array_equal(new_ensemble.plus, np.roll(plus, 1, axis=1))
        np.testing.assert_array_equal(new_ensemble.minus, np.roll(plus, -1, axis=1))

    def test_independent_mode_detects_lost_particles(self, quantum_field, mocker):
        spec = EnsembleSpec(n_realizations=4, mode="quantum_sampled", independent=True)
        ensemble = sample_ensemble(quantum_field, spec)
        empty = BitEnsemble(np.zeros((4, 32)), np.zeros((4, 32)), spec)
        mocker.patch.object(BitEnsemble, "from_realizations", return_value=empty)
        with pytest.raises(ConservationError):
            quantum_micro_step(quantum_field, build_unitary(1.0), ensemble)

    def test_reproducible(self, quantum_field):
        spec = EnsembleSpec(n_realizations=32, master_seed=11, mode="quantum_sampled")
        gate = build_unitary(1.0)
        first = quantum_micro_step(quantum_field, gate, sample_ensemble(quantum_field, spec))[1]
        second = quantum_micro_step(quantum_field, gate, sample_ensemble(quantum_field, spec))[1]
        np.testing.assert_array_equal(first.plus, second.plus)

    def test_rejects_mismatched_estimate(self, quantum_field):
        spec = EnsembleSpec(n_realizations=4, mode="quantum_sampled")
        ensemble = sample_ensemble(quantum_field, spec)
        with pytest.raises(ParameterError):
            quantum_micro_step(OccupancyField.uniform(8, 0.5, 0.5), build_unitary(1.0), ensemble)


class TestNoise:
    def test_exponent_of_exact_power_law(self):
        ns = np.array([16, 64, 256, 1024])
        assert fit_noise_exponent(ns, 0.3 / np.sqrt(ns)) == pytest.approx(-0.5)

    def test_exponent_needs_two_points(self):
        with pytest.raises(ParameterError):
            fit_noise_exponent([16], [0.1])

    def test_measure_noise_of_exact_field(self, field):
        stats = measure_noise(field, field)
        assert stats.std == 0.0 and stats.max_abs == 0.0
