"""End-to-end checks of the lattice gases against their continuum descriptions."""

import math

import numpy as np
import pytest

from collision import ClassicalBL, Quantum, TwoBit, omega_classical
from experiments import (
    ExperimentSpec,
    angle_scan_sweep,
    burgers_misfit_grid,
    compare_trajectories,
    ensemble_noise_sweep,
    fit_burgers_coefficients,
    grid_convergence_sweep,
    relative_l2,
    run_mesoscopic,
)
from lattice import GridSpec, OccupancyField, init_from_density, initial_profile
from microscopic import BitEnsemble, EnsembleSpec, collide_ensemble, sample_ensemble
from reference_pde import PdeSpec, solve, solve_eft
from theory import complexity, effective_transport, energy_budget, turbulence_scales

pytestmark = pytest.mark.slow

GRID = GridSpec(n_sites=256)


def sine_field(model, amplitude=0.4, mean=1.0):
    profile = initial_profile("sine", GRID, amplitude=amplitude, mean=mean)
    return init_from_density(profile, model)


class TestDiffusionLimit:
    def test_unbiased_gas_is_pure_diffusion(self):
        trajectory = run_mesoscopic(ClassicalBL(0.0), sine_field(ClassicalBL(0.0)), 200, 50)
        reference = solve(PdeSpec(c_s=0.0, nu=0.5, grid=GRID), trajectory.rho[0], 200.0,
                          snapshot_steps=trajectory.steps)
        report = compare_trajectories(trajectory, reference)
        assert report.l2_error.max() < 0.01


class TestConservation:
    @pytest.mark.parametrize("model", [Quantum(math.pi / 4), ClassicalBL(0.707), Quantum(1.5)])
    def test_long_run_mass_drift(self, model):
        field = sine_field(model)
        trajectory = run_mesoscopic(model, field, 10_000, 10_000)
        assert abs(trajectory.rho[-1].sum() - trajectory.rho[0].sum()) < 1e-9

    def test_small_angle_stays_in_range(self):
        model = Quantum(1.5)
        trajectory = run_mesoscopic(model, sine_field(model), 10_000, 2500)
        assert np.all(np.isfinite(trajectory.rho))
        assert trajectory.plus.min() >= 0.0 and trajectory.plus.max() <= 1.0
        assert trajectory.minus.min() >= 0.0 and trajectory.minus.max() <= 1.0


class TestEnsembleNoise:
    def test_noise_falls_as_inverse_square_root(self):
        base = ExperimentSpec.from_dict({
            "name": "noise",
            "steps": 1,
            "model": {"kind": "quantum", "theta": math.pi / 4},
            "grid": {"n_sites": 256},
        })
        rows = ensemble_noise_sweep(base, [16, 64, 256, 1024], repeats=4)
        assert rows[0]["exponent"] == pytest.approx(-0.5, abs=0.05)
        stds = [row["std"] for row in rows]
        assert stds == sorted(stds, reverse=True)

    def test_collision_exit_probability(self):
        n, alpha = 16384, 0.3
        ensemble = BitEnsemble(np.ones((n, 64)), np.zeros((n, 64)),
                               EnsembleSpec(n_realizations=n, master_seed=21))
        fraction = collide_ensemble(ensemble, alpha).plus.mean()
        sigma = math.sqrt(0.65 * 0.35 / (64 * n))
        assert abs(fraction - (1 + alpha) / 2) < 3 * sigma

    def test_bit_rule_matches_collision_term(self):
        rng = np.random.default_rng(2024)
        n = 16384
        for seed, (p_plus, p_minus, alpha) in enumerate(rng.uniform(0.05, 0.95, size=(10, 3))):
            ensemble = sample_ensemble(OccupancyField.uniform(64, p_plus, p_minus),
                                       EnsembleSpec(n_realizations=n, master_seed=seed))
            gained = collide_ensemble(ensemble, alpha).plus.astype(int) - ensemble.plus
            expected = float(omega_classical(p_plus, p_minus, alpha))
            assert abs(gained.mean() - expected) < 3 * gained.std() / math.sqrt(gained.size)


class TestTwoBitGas:
    def test_agrees_with_its_eft_below_unit_density(self):
        field = sine_field(TwoBit(), amplitude=0.15, mean=0.5)
        trajectory = run_mesoscopic(TwoBit(), field, 32, 32)
        eft = solve_eft(TwoBit(), trajectory.rho[0], 32.0, grid=GRID,
                        snapshot_steps=trajectory.steps)
        assert relative_l2(trajectory.rho[-1], eft.rho[-1]) < 0.10

    def test_no_burgers_equation_fits_across_unit_density(self):
        trajectory = run_mesoscopic(TwoBit(), sine_field(TwoBit()), 64, 16)
        misfit = burgers_misfit_grid(trajectory, GRID, np.linspace(0.0, 1.5, 7),
                                     np.linspace(0.0, 2.0, 5))
        assert misfit.min() > 0.10


class TestBurgersFits:
    @pytest.fixture(scope="class")
    def fits(self):
        cases = {
            "classical": (ClassicalBL(0.5), 120, 20),
            "quantum": (Quantum(math.pi / 4), 50, 10),
            "small_angle": (Quantum(1.5), 200, 25),
        }
        results = {}
        for label, (model, steps, every) in cases.items():
            trajectory = run_mesoscopic(model, sine_field(model), steps, every)
            results[label] = (model, fit_burgers_coefficients(trajectory, GRID))
        return results

    @pytest.mark.parametrize("label", ["classical", "quantum", "small_angle"])
    def test_fit_below_five_percent(self, fits, label):
        _, (_, _, misfit) = fits[label]
        assert misfit < 0.05

    @pytest.mark.parametrize("label", ["classical", "quantum"])
    def test_fitted_speed_near_effective_theory(self, fits, label):
        model, (c_s, _, _) = fits[label]
        assert c_s == pytest.approx(effective_transport(model, GRID).c_s, rel=0.1)

    def test_small_angle_is_less_viscous(self, fits):
        assert fits["small_angle"][1][1] < fits["classical"][1][1]


class TestDiagnostics:
    def test_complexity_counts(self):
        classical, quantum = complexity(100, 256)
        assert classical == 76800.0
        assert quantum == pytest.approx(40575.04, abs=0.01)

    def test_kolmogorov_identities(self):
        scales = turbulence_scales(L=256.0, u_L=0.1, nu=0.01)
        assert scales.lam * scales.u_lambda / scales.nu == pytest.approx(1.0)
        assert scales.L / scales.lam == pytest.approx(scales.Re**0.75)

    def test_uniform_profile_does_not_dissipate(self):
        energy, dissipation = energy_budget(np.full(16, 0.8), GridSpec(n_sites=16), 0.1)
        assert energy == pytest.approx(0.32)
        assert dissipation == 0.0


def sweep_base(model, steps, snapshot_every):
    return ExperimentSpec.from_dict({
        "name": "sweep",
        "steps": steps,
        "snapshot_every": snapshot_every,
        "model": model,
        "grid": {"n_sites": 256},
        "initial": {"kind": "sine", "amplitude": 0.3},
    })


class TestSweeps:
    @pytest.mark.parametrize("model", [
        {"kind": "quantum", "theta": math.pi / 4},
        {"kind": "classical", "alpha": 0.5},
    ])
    def test_grid_convergence_is_monotone(self, model):
        rows = grid_convergence_sweep(sweep_base(model, 64, 64), [128, 256, 512, 1024])
        errors = [row["l2_error"] for row in rows]
        assert all(later < earlier for earlier, later in zip(errors, errors[1:]))

    def test_angle_scan_speed_follows_cotangent(self):
        rows = angle_scan_sweep(sweep_base({"kind": "quantum", "theta": 1.0}, 100, 20),
                                [1.0, 1.2])
        for row in rows:
            assert row["c_s_theory"] == pytest.approx(1.0 / math.tan(row["theta"]))
            assert row["c_s_fit"] == pytest.approx(row["c_s_theory"], rel=0.1)
