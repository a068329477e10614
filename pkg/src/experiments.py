"""Experiments: configured runs, comparisons, sweeps and figure presets.

An ExperimentSpec describes one lattice-gas run. ExperimentRunner executes
it into a run directory (snapshots, provenance, plot script and, when a
reference equation is configured, a comparison report) and records it in
the run registry.
"""

import logging
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from collision import ClassicalBL, Quantum, TwoBit, gate_for, model_from_dict, step
from lattice import GridSpec, Trajectory, init_from_density, initial_profile, total_mass
from microscopic import (
    EnsembleSpec,
    classical_micro_step,
    ensemble_average,
    fit_noise_exponent,
    measure_noise,
    quantum_micro_step,
    sample_ensemble,
)
from reference_pde import PdeSpec, numerical_diffusion, solve, solve_eft
from theory import (
    COEFFICIENT_COLUMNS,
    coefficient_table,
    effective_transport,
    theory_report,
    transport_coefficients,
)
from utils.config import flatten, load_config, apply_overrides, output_root
from utils.errors import ConfigError, ConservationError, ParameterError, QlgError
from utils.export import (
    PROVENANCE_FILE,
    load_trajectory,
    write_ensemble_dump,
    write_plot_script,
    write_provenance,
    write_rows,
    write_trajectory,
)
from utils.run_registry import RunRegistry

logger = logging.getLogger("Experiments")

MODES = ("mesoscopic", "microscopic")
INITIAL_KINDS = ("sine", "step", "gaussian")
SWEEP_KINDS = ("ensemble_noise", "grid_convergence", "angle_scan")
# Sections of a provenance file that describe results rather than inputs.
IGNORED_SECTIONS = ("theory", "meta")
MASS_DRIFT_TOL = 1e-9
FIT_TOL = 1e-3


def _table(data, name):
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError("expected a table", field=name)
    return value


def _check_keys(table, allowed, prefix):
    for key in table:
        if key not in allowed:
            raise ConfigError("unknown option", field=f"{prefix}{key}")


def _get(table, key, default, cast, prefix=""):
    value = table.get(key, default)
    if value is None:
        return None
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {value!r}", field=f"{prefix}{key}")


def _as_bool(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise ValueError(value)


def _as_int(value):
    if isinstance(value, bool) or float(value) != int(value):
        raise ValueError(value)
    return int(value)


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "sine"
    amplitude: float = 0.4
    mean: float = 1.0
    levels: tuple = (0.7, 1.3)
    width: float = 16.0
    split: str = "equilibrium"

    def profile(self, grid):
        return initial_profile(self.kind, grid, amplitude=self.amplitude, mean=self.mean,
                               levels=self.levels, width=self.width)

    def field(self, grid, model):
        return init_from_density(self.profile(grid), model, split=self.split)

    def to_dict(self):
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "mean": self.mean,
            "levels": list(self.levels),
            "width": self.width,
            "split": self.split,
        }


@dataclass(frozen=True)
class ReferenceConfig:
    """Reference equation for a run.

    Burgers coefficients default to the values implied by the effective
    field theory at rho = 1; with ``fit`` they are fitted to the lattice
    run over its first ``fit_steps`` steps.
    """

    kind: str = "burgers"
    c_s: Optional[float] = None
    nu: Optional[float] = None
    cfl_safety: float = 0.9
    fit: bool = False
    fit_steps: Optional[int] = None

    def to_dict(self):
        data = {"kind": self.kind, "cfl_safety": self.cfl_safety, "fit": self.fit}
        for key in ("c_s", "nu", "fit_steps"):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        return data


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    model: object
    grid: GridSpec = GridSpec()
    mode: str = "mesoscopic"
    ensemble: EnsembleSpec = EnsembleSpec()
    initial: InitialCondition = InitialCondition()
    steps: int = 100
    snapshot_every: int = 10
    reference: Optional[ReferenceConfig] = None
    output_dir: Optional[str] = None
    seed: int = 0
    dump_every: int = 0
    sweep: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        """Validate a nested configuration dict; failures name the dotted field."""
        data = {k: v for k, v in data.items() if k not in IGNORED_SECTIONS}
        _check_keys(data, ("name", "mode", "steps", "snapshot_every", "seed", "output_dir",
                           "model", "grid", "initial", "ensemble", "reference", "sweep"), "")

        name = _get(data, "name", "experiment", str)
        mode = _get(data, "mode", "mesoscopic", str)
        if mode not in MODES:
            raise ConfigError(f"expected one of {MODES}, got {mode!r}", field="mode")
        steps = _get(data, "steps", 100, _as_int)
        if steps < 1:
            raise ConfigError(f"must be >= 1, got {steps}", field="steps")
        snapshot_every = _get(data, "snapshot_every", steps, _as_int)
        if snapshot_every < 1 or steps % snapshot_every:
            raise ConfigError(f"{snapshot_every} does not divide steps={steps}",
                              field="snapshot_every")
        seed = _get(data, "seed", 0, _as_int)
        if seed < 0:
            raise ConfigError("must be non-negative", field="seed")

        model_table = _table(data, "model")
        _check_keys(model_table, ("kind", "alpha", "theta", "zeta", "xi"), "model.")
        model = model_from_dict(model_table)

        grid_table = _table(data, "grid")
        _check_keys(grid_table, ("n_sites", "dx", "dt"), "grid.")
        try:
            grid = GridSpec(
                n_sites=_get(grid_table, "n_sites", 256, _as_int, "grid."),
                dx=_get(grid_table, "dx", 1.0, float, "grid."),
                dt=_get(grid_table, "dt", 1.0, float, "grid."),
            )
        except ParameterError as e:
            raise ConfigError(str(e), field="grid")

        initial_table = _table(data, "initial")
        _check_keys(initial_table, ("kind", "amplitude", "mean", "levels", "width", "split"),
                    "initial.")
        initial = InitialCondition(
            kind=_get(initial_table, "kind", "sine", str, "initial."),
            amplitude=_get(initial_table, "amplitude", 0.4, float, "initial."),
            mean=_get(initial_table, "mean", 1.0, float, "initial."),
            levels=_get(initial_table, "levels", (0.7, 1.3), lambda v: tuple(map(float, v)),
                        "initial."),
            width=_get(initial_table, "width", 16.0, float, "initial."),
            split=_get(initial_table, "split", "equilibrium", str, "initial."),
        )
        if initial.kind not in INITIAL_KINDS:
            raise ConfigError(f"expected one of {INITIAL_KINDS}", field="initial.kind")
        if initial.split not in ("equilibrium", "symmetric"):
            raise ConfigError("expected 'equilibrium' or 'symmetric'", field="initial.split")
        if len(initial.levels) != 2:
            raise ConfigError("expected two levels", field="initial.levels")
        try:
            initial.profile(grid)
        except ParameterError as e:
            raise ConfigError(str(e), field="initial")

        ensemble_table = _table(data, "ensemble")
        _check_keys(ensemble_table, ("n_realizations", "master_seed", "mode", "independent",
                                     "workers", "dump_every"), "ensemble.")
        default_mode = "quantum_sampled" if isinstance(model, Quantum) else "classical_bits"
        try:
            ensemble = EnsembleSpec(
                n_realizations=_get(ensemble_table, "n_realizations", 64, _as_int, "ensemble."),
                master_seed=_get(ensemble_table, "master_seed", seed, _as_int, "ensemble."),
                mode=_get(ensemble_table, "mode", default_mode, str, "ensemble."),
                independent=_get(ensemble_table, "independent", False, _as_bool, "ensemble."),
                workers=_get(ensemble_table, "workers", 1, _as_int, "ensemble."),
            )
        except ParameterError as e:
            raise ConfigError(str(e), field="ensemble")
        if mode == "microscopic":
            wants_quantum = ensemble.mode == "quantum_sampled"
            if wants_quantum != isinstance(model, Quantum):
                raise ConfigError(f"{ensemble.mode} does not apply to the {model.kind} model",
                                  field="ensemble.mode")
        dump_every = _get(ensemble_table, "dump_every", 0, _as_int, "ensemble.")

        reference = None
        if "reference" in data:
            table = _table(data, "reference")
            _check_keys(table, ("kind", "c_s", "nu", "cfl_safety", "fit", "fit_steps"),
                        "reference.")
            reference = ReferenceConfig(
                kind=_get(table, "kind", "burgers", str, "reference."),
                c_s=_get(table, "c_s", None, float, "reference."),
                nu=_get(table, "nu", None, float, "reference."),
                cfl_safety=_get(table, "cfl_safety", 0.9, float, "reference."),
                fit=_get(table, "fit", False, _as_bool, "reference."),
                fit_steps=_get(table, "fit_steps", None, _as_int, "reference."),
            )
            if reference.kind not in ("burgers", "general_eft"):
                raise ConfigError("expected 'burgers' or 'general_eft'", field="reference.kind")
            if not (0.0 < reference.cfl_safety <= 1.0):
                raise ConfigError("must lie in (0, 1]", field="reference.cfl_safety")
            if reference.nu is not None and reference.nu < 0:
                raise ConfigError("must be non-negative", field="reference.nu")

        return cls(
            name=name,
            model=model,
            grid=grid,
            mode=mode,
            ensemble=ensemble,
            initial=initial,
            steps=steps,
            snapshot_every=snapshot_every,
            reference=reference,
            output_dir=_get(data, "output_dir", None, str),
            seed=seed,
            dump_every=dump_every,
            sweep=dict(_table(data, "sweep")),
        )

    def to_dict(self):
        data = {
            "name": self.name,
            "mode": self.mode,
            "steps": self.steps,
            "snapshot_every": self.snapshot_every,
            "seed": self.seed,
            "model": self.model.to_dict(),
            "grid": {"n_sites": self.grid.n_sites, "dx": self.grid.dx, "dt": self.grid.dt},
            "initial": self.initial.to_dict(),
            "ensemble": {
                "n_realizations": self.ensemble.n_realizations,
                "master_seed": self.ensemble.master_seed,
                "mode": self.ensemble.mode,
                "independent": self.ensemble.independent,
                "workers": self.ensemble.workers,
                "dump_every": self.dump_every,
            },
        }
        if self.output_dir is not None:
            data["output_dir"] = self.output_dir
        if self.reference is not None:
            data["reference"] = self.reference.to_dict()
        if self.sweep:
            data["sweep"] = dict(self.sweep)
        return data


def load_spec(path, overrides=()):
    """Read a configuration file, apply ``--dotted.key value`` overrides and validate it."""
    return ExperimentSpec.from_dict(apply_overrides(load_config(path), overrides))


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def _snapshot_steps(steps, every):
    return list(range(0, steps + 1, every))


def run_mesoscopic(model, field, steps, snapshot_every=1):
    """Lattice Boltzmann evolution recording density and both components."""
    wanted = set(_snapshot_steps(steps, snapshot_every))
    mass0 = total_mass(field)
    recorded = [(0, field)]
    for n in range(1, steps + 1):
        field = step(field, model)
        if n in wanted:
            recorded.append((n, field))

    drift = abs(total_mass(field) - mass0)
    if drift > MASS_DRIFT_TOL:
        logger.error(f"Mass drift {drift:.3g} after {steps} steps of the {model.kind} model")
        raise ConservationError(f"mass drift {drift:.3g} exceeds {MASS_DRIFT_TOL}")
    return _trajectory(recorded)


def _trajectory(recorded, dt=1.0):
    return Trajectory(
        steps=np.array([n for n, _ in recorded]),
        rho=np.array([f.plus + f.minus for _, f in recorded]),
        dt=dt,
        plus=np.array([f.plus for _, f in recorded]),
        minus=np.array([f.minus for _, f in recorded]),
    )


def run_microscopic(model, field, ensemble_spec, steps, snapshot_every=1, on_step=None):
    """Ensemble-averaged bit-level evolution.

    ``on_step(step, ensemble)`` is called after every step (used for dumps).
    """
    wanted = set(_snapshot_steps(steps, snapshot_every))

    if ensemble_spec.mode == "quantum_sampled":
        gate = gate_for(model)
        recorded = [(0, field)]
        ensemble = sample_ensemble(field, ensemble_spec)
        estimate = field
        for n in range(1, steps + 1):
            ensemble, estimate = quantum_micro_step(estimate, gate, ensemble)
            if on_step is not None:
                on_step(n, ensemble)
            if n in wanted:
                recorded.append((n, estimate))
        return _trajectory(recorded)

    if isinstance(model, ClassicalBL):
        alpha = model.alpha
    elif isinstance(model, TwoBit):
        alpha = 1.0
    else:
        raise ParameterError("classical bits need a classical or 2-bit model")
    ensemble = sample_ensemble(field, ensemble_spec)
    recorded = [(0, ensemble_average(ensemble))]
    particles = ensemble.particle_count
    for n in range(1, steps + 1):
        ensemble = classical_micro_step(ensemble, alpha)
        if ensemble.particle_count != particles:
            raise ConservationError(
                f"particle count changed from {particles} to {ensemble.particle_count}"
            )
        if on_step is not None:
            on_step(n, ensemble)
        if n in wanted:
            recorded.append((n, ensemble_average(ensemble)))
    return _trajectory(recorded)


def simulate(spec, on_step=None):
    field = spec.initial.field(spec.grid, spec.model)
    if spec.mode == "mesoscopic":
        trajectory = run_mesoscopic(spec.model, field, spec.steps, spec.snapshot_every)
    else:
        trajectory = run_microscopic(spec.model, field, spec.ensemble, spec.steps,
                                     spec.snapshot_every, on_step)
    return Trajectory(trajectory.steps, trajectory.rho, spec.grid.dt, trajectory.plus,
                      trajectory.minus)


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


def _scale(reference, ord):
    fluctuation = np.linalg.norm(reference - np.mean(reference), ord)
    if fluctuation > 0:
        return fluctuation
    norm = np.linalg.norm(reference, ord)
    return norm if norm > 0 else 1.0


def relative_l2(rho, reference):
    """||rho - ref||_2 / ||ref - mean(ref)||_2 (falls back to ||ref||_2 for a flat ref)."""
    rho, reference = np.asarray(rho, dtype=float), np.asarray(reference, dtype=float)
    return float(np.linalg.norm(rho - reference) / _scale(reference, 2))


def relative_linf(rho, reference):
    rho, reference = np.asarray(rho, dtype=float), np.asarray(reference, dtype=float)
    return float(np.max(np.abs(rho - reference)) / _scale(reference, np.inf))


def _window(trajectory, max_step=None):
    keep = trajectory.steps - trajectory.steps[0]
    if max_step is not None:
        mask = keep <= max_step
        return keep[mask], trajectory.rho[mask]
    return keep, trajectory.rho


def burgers_trajectory(trajectory, grid, c_s, nu, cfl_safety=0.9, max_step=None):
    """Burgers solution started from the trajectory's first snapshot, on its time stamps."""
    steps, rho = _window(trajectory, max_step)
    spec = PdeSpec(kind="burgers", c_s=c_s, nu=nu, grid=grid, cfl_safety=cfl_safety)
    return solve(spec, rho[0], float(steps[-1]) * grid.dt, snapshot_steps=steps)


def burgers_misfit(trajectory, grid, c_s, nu, cfl_safety=0.9, max_step=None):
    """Mean relative L2 error between the trajectory and a Burgers solution."""
    steps, rho = _window(trajectory, max_step)
    if len(steps) < 2:
        raise ParameterError("need at least two snapshots to compare")
    reference = burgers_trajectory(trajectory, grid, c_s, nu, cfl_safety, max_step)
    return float(np.mean([relative_l2(a, b) for a, b in zip(rho[1:], reference.rho[1:])]))


def burgers_misfit_grid(trajectory, grid, c_s_values, nu_values, max_step=None):
    """Misfit for every (c_s, nu) pair; rows follow ``c_s_values``."""
    return np.array([
        [burgers_misfit(trajectory, grid, c_s, nu, max_step=max_step) for nu in nu_values]
        for c_s in c_s_values
    ])


def fit_burgers_coefficients(trajectory, grid, c_s_bounds=None, nu_bounds=None, tol=FIT_TOL,
                             max_step=None):
    """Fit effective (c_s, nu) with nested bounded 1-D searches.

    Args:
        trajectory: Lattice trajectory; its first snapshot is the initial profile.
        grid: Grid of the trajectory.
        c_s_bounds: Search interval for c_s; defaults to [0, 1.5 c].
        nu_bounds: Search interval for nu; defaults to [0, 2 dx^2 / dt].
        tol: Relative tolerance of each search, as a fraction of its interval.
        max_step: Only fit snapshots up to this many steps after the first.

    Returns:
        (c_s, nu, misfit) with misfit the mean relative L2 error at the optimum.
    """
    c_s_bounds = c_s_bounds or (0.0, 1.5 * grid.c)
    nu_bounds = nu_bounds or (0.0, 2.0 * grid.dx**2 / grid.dt)
    best = {}

    def inner(c_s):
        result = minimize_scalar(
            lambda nu: burgers_misfit(trajectory, grid, c_s, nu, max_step=max_step),
            bounds=nu_bounds,
            method="bounded",
            options={"xatol": tol * (nu_bounds[1] - nu_bounds[0])},
        )
        best[c_s] = float(result.x)
        return float(result.fun)

    outer = minimize_scalar(
        inner,
        bounds=c_s_bounds,
        method="bounded",
        options={"xatol": tol * (c_s_bounds[1] - c_s_bounds[0])},
    )
    c_s = float(outer.x)
    nu = best[c_s] if c_s in best else float(
        minimize_scalar(lambda v: burgers_misfit(trajectory, grid, c_s, v, max_step=max_step),
                        bounds=nu_bounds, method="bounded").x
    )
    misfit = burgers_misfit(trajectory, grid, c_s, nu, max_step=max_step)
    logger.info(f"Fitted c_s={c_s:.6g}, nu={nu:.6g} (misfit {misfit:.4g})")
    return c_s, nu, misfit


@dataclass(frozen=True)
class ComparisonReport:
    steps: np.ndarray
    l2_error: np.ndarray
    linf_error: np.ndarray
    mass_drift: float
    c_s_fit: Optional[float] = None
    nu_fit: Optional[float] = None
    fit_error: Optional[float] = None
    reference_c_s: Optional[float] = None
    reference_nu: Optional[float] = None
    numerical_diffusion: Optional[float] = None

    def rows(self):
        return [
            {"step": int(s), "l2_error": float(l2), "linf_error": float(linf)}
            for s, l2, linf in zip(self.steps, self.l2_error, self.linf_error)
        ]

    def summary(self):
        data = {
            "max_l2_error": float(np.max(self.l2_error)) if len(self.l2_error) else 0.0,
            "max_linf_error": float(np.max(self.linf_error)) if len(self.linf_error) else 0.0,
            "mass_drift": self.mass_drift,
        }
        for key in ("c_s_fit", "nu_fit", "fit_error", "reference_c_s", "reference_nu",
                    "numerical_diffusion"):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        return data


def compare_trajectories(run, reference, **extra):
    """Time-aligned relative norms of ``run`` against ``reference``."""
    common = np.intersect1d(run.steps, reference.steps)
    if len(common) == 0:
        raise ParameterError("trajectories share no time stamps")
    l2, linf = [], []
    for s in common:
        a, b = run.at_step(s), reference.at_step(s)
        if a.shape != b.shape:
            raise ParameterError(f"profiles have {a.size} and {b.size} sites")
        l2.append(relative_l2(a, b))
        linf.append(relative_linf(a, b))
    drift = abs(float(np.sum(run.rho[-1]) - np.sum(run.rho[0])))
    return ComparisonReport(np.asarray(common), np.array(l2), np.array(linf), drift, **extra)


def reference_trajectory(config, model, trajectory, grid):
    """Reference solution for a run plus the comparison fields it contributes."""
    if config.kind == "general_eft":
        reference = solve_eft(model, trajectory.rho[0], float(trajectory.steps[-1]) * grid.dt,
                              grid=grid, cfl_safety=config.cfl_safety,
                              snapshot_steps=trajectory.steps)
        return reference, {}

    extra = {}
    if config.fit:
        c_s, nu, misfit = fit_burgers_coefficients(trajectory, grid, max_step=config.fit_steps)
        extra.update(c_s_fit=c_s, nu_fit=nu, fit_error=misfit)
    elif config.c_s is not None and config.nu is not None:
        c_s, nu = config.c_s, config.nu
    else:
        try:
            effective = effective_transport(model, grid)
        except QlgError as e:
            raise ConfigError(f"give c_s and nu or enable fitting ({e})", field="reference")
        c_s = config.c_s if config.c_s is not None else effective.c_s
        nu = config.nu if config.nu is not None else effective.nu
    reference = burgers_trajectory(trajectory, grid, c_s, nu, config.cfl_safety)
    spec = PdeSpec(kind="burgers", c_s=c_s, nu=nu, grid=grid, cfl_safety=config.cfl_safety)
    extra.update(reference_c_s=c_s, reference_nu=nu,
                 numerical_diffusion=numerical_diffusion(spec, trajectory.rho[0]))
    return reference, extra


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def preset_specs(name):
    """Specs of the figure presets ``fig1`` and ``fig2``."""
    initial = InitialCondition(kind="sine", amplitude=0.4)
    if name == "fig1":
        models = [Quantum(theta=math.pi / 4), ClassicalBL(alpha=0.707), TwoBit()]
        steps, every, fit_steps = 300, 50, 100
    elif name == "fig2":
        models = [Quantum(theta=1.5), ClassicalBL(alpha=0.5)]
        steps, every, fit_steps = 2000, 250, 250
    else:
        raise ConfigError(f"unknown preset {name!r}; expected fig1 or fig2", field="preset")
    return [
        ExperimentSpec(
            name=f"{name}_{model.label}",
            model=model,
            initial=initial,
            steps=steps,
            snapshot_every=every,
            reference=ReferenceConfig(kind="burgers", fit=True, fit_steps=fit_steps),
            output_dir=f"{name}/{model.label}",
        )
        for model in models
    ]


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    path: Path
    trajectory: Trajectory
    report: Optional[ComparisonReport] = None
    run_id: Optional[int] = None


class ExperimentRunner:
    """Runs experiments into directories under the output root."""

    def __init__(self, root=None, registry=None):
        self.logger = logging.getLogger("ExperimentRunner")
        self.root = Path(root) if root is not None else output_root()
        self.root.mkdir(parents=True, exist_ok=True)
        self.registry = registry or RunRegistry(str(self.root / "runs.db"))

    def run_dir(self, spec):
        path = Path(spec.output_dir or spec.name)
        return path if path.is_absolute() else self.root / path

    def _clear_outputs(self, directory):
        """Drop what an earlier run left in a reused directory."""
        for pattern in ("snapshot_*.csv", "ensemble_*.qlg", "comparison.csv"):
            for stale in directory.glob(pattern):
                stale.unlink()
        shutil.rmtree(directory / "reference", ignore_errors=True)

    def run(self, spec, kind="run"):
        """Execute ``spec`` and write its run directory."""
        directory = self.run_dir(spec)
        if directory.exists():
            self._clear_outputs(directory)
        directory.mkdir(parents=True, exist_ok=True)
        run_id = self.registry.register(spec.name, kind, directory)
        self.logger.info(f"Run {spec.name} ({spec.model.kind}, {spec.mode}) -> {directory}")

        try:
            on_step = None
            if spec.mode == "microscopic" and spec.dump_every > 0:
                def on_step(n, ensemble):
                    if n % spec.dump_every == 0:
                        write_ensemble_dump(directory / f"ensemble_{n:06d}.qlg", ensemble)

            trajectory = simulate(spec, on_step)
            write_trajectory(directory, trajectory, spec.grid)

            report = None
            if spec.reference is not None:
                reference, extra = reference_trajectory(spec.reference, spec.model, trajectory,
                                                        spec.grid)
                report = compare_trajectories(trajectory, reference, **extra)
                write_trajectory(directory / "reference", reference, spec.grid)
                write_rows(directory / "comparison.csv", report.rows())

            provenance = flatten(spec.to_dict())
            provenance.update(theory_report(spec.model, spec.grid).to_flat_dict())
            provenance["meta.run_id"] = run_id
            if report is not None:
                provenance.update(flatten(report.summary(), prefix="meta.comparison."))
            write_provenance(directory / PROVENANCE_FILE, provenance)
            write_plot_script(directory, title=spec.name)

        except Exception as e:
            self.logger.error(f"Run {spec.name} failed: {e}")
            self.registry.update_status(run_id, "failed", {"error": str(e)})
            raise

        self.registry.update_status(run_id, "finished", report.summary() if report else None)
        self.logger.info(f"Run {spec.name} finished")
        return RunResult(directory, trajectory, report, run_id)

    def resolve(self, ref):
        """Run directory for a registry id or a path."""
        text = str(ref)
        if text.isdigit():
            record = self.registry.get_run(int(text))
            if record is None:
                raise ConfigError(f"no run with id {text}", field="run")
            return Path(record["path"])
        path = Path(text)
        if not path.is_dir() and (self.root / path).is_dir():
            path = self.root / path
        if not path.is_dir():
            raise ConfigError(f"no run directory {text}", field="run")
        return path

    def load_run(self, ref):
        directory = self.resolve(ref)
        provenance = directory / PROVENANCE_FILE
        if not provenance.exists():
            raise ConfigError(f"{directory} has no {PROVENANCE_FILE}", field="run")
        spec = ExperimentSpec.from_dict(load_config(provenance))
        return spec, load_trajectory(directory, dt=spec.grid.dt)

    def compare(self, run_a, run_b="reference", fit=False, output=None):
        """Compare a run with another run or with its reference equation.

        ``run_b`` is a run id or directory, or ``"reference"`` for the run's
        configured reference (the EFT-implied Burgers equation if none).
        """
        spec, trajectory = self.load_run(run_a)
        if run_b == "reference":
            config = spec.reference or ReferenceConfig()
            if fit:
                config = ReferenceConfig(config.kind, None, None, config.cfl_safety, True,
                                         config.fit_steps)
            reference, extra = reference_trajectory(config, spec.model, trajectory, spec.grid)
        else:
            _, reference = self.load_run(run_b)
            extra = {}
            if fit:
                c_s, nu, misfit = fit_burgers_coefficients(trajectory, spec.grid)
                extra = {"c_s_fit": c_s, "nu_fit": nu, "fit_error": misfit}
        report = compare_trajectories(trajectory, reference, **extra)
        if output is not None:
            write_rows(output, report.rows())
        self.logger.info(f"Compared {run_a} with {run_b}: {report.summary()}")
        return report

    def sweep(self, kind, base, values=None, repeats=4):
        """Run a sweep and write ``summary.csv``; returns (path, rows)."""
        if kind not in SWEEP_KINDS:
            raise ConfigError(f"expected one of {SWEEP_KINDS}", field="sweep.kind")
        directory = self.root / f"sweep_{kind}_{base.name}"
        directory.mkdir(parents=True, exist_ok=True)
        run_id = self.registry.register(base.name, "sweep", directory)
        self.logger.info(f"Sweep {kind} over {base.name} -> {directory}")

        try:
            if kind == "ensemble_noise":
                rows = ensemble_noise_sweep(base, values or [16, 64, 256, 1024], repeats)
            elif kind == "grid_convergence":
                rows = grid_convergence_sweep(base, values or [128, 256, 512, 1024])
            else:
                rows = angle_scan_sweep(base, values or [1.0, 1.2, math.pi / 4, 1.5])
        except Exception as e:
            self.logger.error(f"Sweep {kind} failed: {e}")
            self.registry.update_status(run_id, "failed", {"error": str(e)})
            raise

        path = write_rows(directory / "summary.csv", rows)
        self.registry.update_status(run_id, "finished", {"kind": kind, "points": len(rows)})
        self.logger.info(f"Sweep {kind} finished with {len(rows)} points")
        return path, rows

    def run_preset(self, name):
        specs = preset_specs(name)
        results = [self.run(spec, kind="preset") for spec in specs]
        preset_dir = self.root / name
        preset_dir.mkdir(parents=True, exist_ok=True)
        write_plot_script(preset_dir, title=name, pattern="*/")
        if len(results) >= 2:
            report = compare_trajectories(results[0].trajectory, results[1].trajectory)
            write_rows(preset_dir / "comparison.csv", report.rows())
        return results


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def ensemble_noise_sweep(base, sizes, repeats=4):
    """Deviation of a one-step ensemble estimate from the mesoscopic step, per ensemble size.

    Each size pools ``repeats`` independent master seeds. Every row carries
    the exponent fitted over the whole sweep.
    """
    model = base.model
    field = base.initial.field(base.grid, model)
    expected = step(field, model)
    rows = []
    for n in sizes:
        squares, worst = [], 0.0
        for r in range(repeats):
            spec = EnsembleSpec(n_realizations=n, master_seed=base.seed + r,
                                mode="quantum_sampled" if isinstance(model, Quantum)
                                else "classical_bits", workers=base.ensemble.workers)
            ensemble = sample_ensemble(field, spec)
            if isinstance(model, Quantum):
                _, estimate = quantum_micro_step(field, gate_for(model), ensemble)
            else:
                alpha = model.alpha if isinstance(model, ClassicalBL) else 1.0
                estimate = ensemble_average(classical_micro_step(ensemble, alpha))
            stats = measure_noise(estimate, expected)
            squares.append(stats.std**2)
            worst = max(worst, stats.max_abs)
        rows.append({"n_realizations": n, "std": float(np.sqrt(np.mean(squares))),
                     "max_abs": worst})
    exponent = fit_noise_exponent([r["n_realizations"] for r in rows], [r["std"] for r in rows])
    for row in rows:
        row["exponent"] = exponent
    logger.info(f"Ensemble noise exponent {exponent:.4f}")
    return rows


def grid_convergence_sweep(base, sizes):
    """Lattice-vs-EFT error at a fixed number of wavelengths per domain.

    The run length scales with the lattice size so every point reaches the
    same fraction of the shock-formation time. The reference integrates the
    model's own general EFT on each lattice, so the error left is the
    finite Knudsen-number correction that shrinks as the lattice grows.
    """
    rows = []
    for n_sites in sizes:
        grid = GridSpec(n_sites=n_sites, dx=base.grid.dx, dt=base.grid.dt)
        steps = max(1, round(base.steps * n_sites / base.grid.n_sites))
        field = base.initial.field(grid, base.model)
        trajectory = run_mesoscopic(base.model, field, steps, steps)
        reference = solve_eft(base.model, trajectory.rho[0], steps * grid.dt, grid=grid,
                              snapshot_steps=trajectory.steps)
        rows.append({
            "n_sites": n_sites,
            "steps": steps,
            "knudsen": 1.0 / n_sites,
            "l2_error": relative_l2(trajectory.rho[-1], reference.rho[-1]),
        })
        logger.info(f"Grid {n_sites}: relative L2 error {rows[-1]['l2_error']:.4g}")
    return rows


def angle_scan_sweep(base, thetas):
    """Fitted Burgers coefficients of the quantum gas against its closed forms."""
    rows = []
    zeta = base.model.zeta if isinstance(base.model, Quantum) else 0.0
    xi = base.model.xi if isinstance(base.model, Quantum) else 0.0
    for theta in thetas:
        model = Quantum(theta=theta, zeta=zeta, xi=xi)
        field = base.initial.field(base.grid, model)
        trajectory = run_mesoscopic(model, field, base.steps, base.snapshot_every)
        c_s, nu, misfit = fit_burgers_coefficients(trajectory, base.grid)
        closed = transport_coefficients(model, base.grid)
        effective = effective_transport(model, base.grid)
        rows.append({
            "theta": float(theta),
            "c_s_fit": c_s,
            "nu_fit": nu,
            "misfit": misfit,
            "c_s_theory": closed.c_s,
            "nu_theory": closed.nu,
            "c_s_effective": effective.c_s,
            "nu_effective": effective.nu,
        })
    return rows


def write_coefficient_table(path, model, grid=None, rho_values=None):
    return write_rows(path, coefficient_table(model, grid, rho_values), COEFFICIENT_COLUMNS)


def remove_run(runner, ref):
    """Delete a run directory and its registry entry."""
    directory = runner.resolve(ref)
    for record in runner.registry.list_runs():
        if Path(record["path"]) == directory:
            runner.registry.delete_run(record["id"])
    shutil.rmtree(directory)
