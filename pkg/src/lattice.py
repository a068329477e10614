"""Lattice geometry, the two-component occupancy field and its observables.

The mesoscopic state of a one-dimensional two-speed lattice gas is a pair of
occupation-probability arrays ``p_+`` (right movers) and ``p_-`` (left
movers) on a periodic lattice. Streaming is an index rotation, never
arithmetic, so it conserves both components bit-exactly.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from utils.errors import ParameterError, RangeViolationError

# Slack allowed on probabilities produced by floating-point collision updates.
PROBABILITY_TOL = 1e-12


def _frozen_array(values, dtype=float):
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class GridSpec:
    """Lattice geometry and units."""

    n_sites: int = 256
    dx: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 4:
            raise ParameterError(f"n_sites must be an integer >= 4, got {self.n_sites}")
        if not self.dx > 0 or not self.dt > 0:
            raise ParameterError(f"dx and dt must be positive, got dx={self.dx}, dt={self.dt}")
        object.__setattr__(self, "n_sites", int(self.n_sites))

    @property
    def c(self):
        """Propagation speed dx/dt."""
        return self.dx / self.dt

    @property
    def length(self):
        return self.n_sites * self.dx

    @property
    def x(self):
        """Site positions ``site * dx``."""
        return np.arange(self.n_sites) * self.dx


@dataclass(frozen=True)
class DensityProfile:
    """Particle number density rho = p_+ + p_- on every site."""

    rho: np.ndarray

    def __post_init__(self):
        rho = _frozen_array(self.rho)
        if rho.ndim != 1:
            raise ParameterError(f"density profile must be one-dimensional, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise ParameterError("density profile contains non-finite values")
        if rho.min() < -2 * PROBABILITY_TOL or rho.max() > 2 + 2 * PROBABILITY_TOL:
            raise RangeViolationError(
                f"density outside [0, 2]: min={rho.min():.6g}, max={rho.max():.6g}"
            )
        object.__setattr__(self, "rho", rho)

    @property
    def total(self):
        return float(np.sum(self.rho))

    def __len__(self):
        return len(self.rho)


@dataclass(frozen=True)
class OccupancyField:
    """Occupation probabilities of the right (plus) and left (minus) movers."""

    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        plus = _frozen_array(self.plus)
        minus = _frozen_array(self.minus)
        if plus.shape != minus.shape or plus.ndim != 1:
            raise ParameterError(
                f"plus and minus must be matching 1-D arrays, got {plus.shape} and {minus.shape}"
            )
        for name, values in (("plus", plus), ("minus", minus)):
            if not np.all(np.isfinite(values)):
                raise RangeViolationError(f"{name} contains non-finite values")
            if values.min() < -PROBABILITY_TOL or values.max() > 1 + PROBABILITY_TOL:
                raise RangeViolationError(
                    f"{name} probability outside [0, 1]: "
                    f"min={values.min():.17g}, max={values.max():.17g}"
                )
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @property
    def n_sites(self):
        return len(self.plus)

    @classmethod
    def uniform(cls, n_sites, p_plus, p_minus):
        return cls(np.full(n_sites, p_plus), np.full(n_sites, p_minus))


@dataclass(frozen=True)
class Trajectory:
    """Density snapshots at lattice time stamps.

    ``rho[i]`` is the profile after ``steps[i]`` lattice steps. Lattice runs
    also keep the two components; PDE solves only have rho.
    """

    steps: np.ndarray
    rho: np.ndarray
    dt: float = 1.0
    plus: Optional[np.ndarray] = field(default=None, repr=False)
    minus: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "steps", np.asarray(self.steps, dtype=np.int64))
        object.__setattr__(self, "rho", np.atleast_2d(np.asarray(self.rho, dtype=float)))
        if len(self.steps) != self.rho.shape[0]:
            raise ParameterError(
                f"{len(self.steps)} time stamps for {self.rho.shape[0]} snapshots"
            )

    @property
    def times(self):
        return self.steps * self.dt

    @property
    def n_snapshots(self):
        return len(self.steps)

    def profile(self, index):
        return DensityProfile(self.rho[index])

    def at_step(self, step):
        """Density snapshot taken after exactly ``step`` lattice steps."""
        matches = np.nonzero(self.steps == step)[0]
        if len(matches) == 0:
            raise ParameterError(f"no snapshot at step {step}")
        return self.rho[matches[0]]


def as_density_array(profile):
    """Accept a DensityProfile or a plain array of densities."""
    if isinstance(profile, DensityProfile):
        return profile.rho
    return np.asarray(profile, dtype=float)


def stream(field):
    """Shift plus one site in +x and minus one site in -x, periodically."""
    return OccupancyField(np.roll(field.plus, 1), np.roll(field.minus, -1))


def density(field):
    return DensityProfile(field.plus + field.minus)


def total_mass(state):
    """Sum of rho over the lattice for a field or a density profile."""
    if isinstance(state, OccupancyField):
        return float(np.sum(state.plus) + np.sum(state.minus))
    return float(np.sum(as_density_array(state)))


def flow_velocity(field, grid):
    """Macroscopic flow field u = c (rho - 1)."""
    if isinstance(field, OccupancyField):
        rho = field.plus + field.minus
    else:
        rho = as_density_array(field)
    return grid.c * (rho - 1.0)


def init_from_density(rho, model=None, split="equilibrium"):
    """Split a density profile into plus/minus occupation probabilities.

    Args:
        rho: DensityProfile (or array) with every entry in (0, 2).
        model: CollisionModel; required for the equilibrium split.
        split: ``"equilibrium"`` puts every site on the model's equilibrium
            (d_+(rho), d_-(rho)), suppressing initial transients;
            ``"symmetric"`` uses plus = minus = rho / 2.

    Returns:
        OccupancyField whose density reproduces ``rho``.
    """
    values = as_density_array(rho)
    if values.size == 0 or values.min() <= 0.0 or values.max() >= 2.0:
        raise ParameterError(
            f"initial density must lie strictly inside (0, 2), got "
            f"[{values.min():.6g}, {values.max():.6g}]"
        )

    if split == "symmetric":
        return OccupancyField(values / 2.0, values / 2.0)
    if split == "equilibrium":
        if model is None:
            raise ParameterError("equilibrium split requires a collision model")
        from theory import equilibrium

        solution = equilibrium(model, values)
        return OccupancyField(solution.d_plus, solution.d_minus)
    raise ParameterError(f"unknown split {split!r}; expected 'equilibrium' or 'symmetric'")


def initial_profile(kind, grid, amplitude=0.4, mean=1.0, levels=(0.7, 1.3), width=16.0):
    """Build one of the standard initial density profiles.

    ``sine`` is ``mean + amplitude * sin(2 pi x / L)``; ``step`` puts
    ``levels[0]`` on the first half of the periodic domain and ``levels[1]``
    on the second; ``gaussian`` is a bump of the given width centred at L/2.
    """
    x = grid.x
    if kind == "sine":
        rho = mean + amplitude * np.sin(2.0 * np.pi * x / grid.length)
    elif kind == "step":
        low, high = levels
        rho = np.where(x < grid.length / 2.0, low, high).astype(float)
    elif kind == "gaussian":
        if not width > 0:
            raise ParameterError(f"gaussian width must be positive, got {width}")
        rho = mean + amplitude * np.exp(-((x - grid.length / 2.0) ** 2) / (2.0 * width**2))
    else:
        raise ParameterError(f"unknown initial profile {kind!r}")

    if rho.min() <= 0.0 or rho.max() >= 2.0:
        raise ParameterError(
            f"{kind} profile leaves (0, 2): [{rho.min():.6g}, {rho.max():.6g}]"
        )
    return DensityProfile(rho)
