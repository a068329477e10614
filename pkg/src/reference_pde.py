"""Explicit finite-volume solvers for the macroscopic equations.

Both the Burgers equation in density form

    d_t rho + c_s (1 - rho) d_x rho = nu d_x^2 rho

and the general lattice-gas EFT are integrated in conservation form
``d_t rho + d_x [F(rho) + g(rho) d_x rho] = 0`` with a first-order upwind
advective flux and a centred diffusive flux on the lattice's own periodic
grid. The PDE clock is sub-stepped so that every lattice time stamp is hit
exactly.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from lattice import GridSpec, Trajectory, as_density_array
from theory import EftCoefficients, eft_coefficients
from utils.errors import CflViolationError, ConservationError, ParameterError, SingularityError

logger = logging.getLogger("ReferencePde")

PDE_KINDS = ("burgers", "general_eft")
MASS_TOL = 1e-8

# Smallest |lambda_2| the EFT integration accepts before halting.
SINGULARITY_TOL = 1e-3


@dataclass(frozen=True)
class PdeSpec:
    """Macroscopic equation, its coefficients and the time-stepping contract.

    ``dt`` fixes the PDE sub-step explicitly; when None the solver chooses
    the largest sub-step allowed by ``cfl_safety``.
    """

    kind: str = "burgers"
    c_s: float = 1.0
    nu: float = 0.5
    coefficients: Optional[EftCoefficients] = None
    grid: GridSpec = GridSpec()
    cfl_safety: float = 0.9
    dt: Optional[float] = None

    def __post_init__(self):
        if self.kind not in PDE_KINDS:
            raise ParameterError(f"kind must be one of {PDE_KINDS}, got {self.kind!r}")
        if self.nu < 0:
            raise ParameterError(f"nu must be non-negative, got {self.nu}")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ParameterError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.kind == "general_eft" and self.coefficients is None:
            raise ParameterError("general_eft requires coefficient functions")
        if self.dt is not None and not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")

    def flux(self, rho):
        if self.kind == "burgers":
            return self.c_s * (rho - 0.5 * rho**2)
        return self.coefficients.flux(rho)

    def speed(self, rho):
        if self.kind == "burgers":
            return self.c_s * (1.0 - rho)
        return self.coefficients.advection(rho)

    def conductance(self, rho):
        """g(rho): the diffusive flux is g d_x rho, so the viscosity is -g."""
        if self.kind == "burgers":
            return np.full_like(rho, -self.nu)
        return self.coefficients.diffusion(rho)

    def max_stable_dt(self, rho):
        """Largest admissible sub-step for the profile ``rho``.

        Uses the combined bound dt (|a|/dx + 2 nu/dx^2) <= cfl_safety, which
        never exceeds cfl_safety * min(dx / max|a|, dx^2 / (2 nu)).
        """
        rho = np.asarray(rho, dtype=float)
        mid = 0.5 * (rho + np.roll(rho, -1))
        dx = self.grid.dx
        speed = float(np.max(np.abs(self.speed(mid))))
        viscosity = self.viscosity_bound(mid)
        rate = speed / dx + 2.0 * viscosity / dx**2
        if rate == 0.0:
            return math.inf
        return self.cfl_safety / rate

    def viscosity_bound(self, mid):
        viscosity = -self.conductance(mid)
        if np.min(viscosity) < 0.0:
            site = int(np.argmin(viscosity))
            logger.error(f"Negative effective viscosity {viscosity[site]:.6g} at face {site}")
            raise SingularityError(
                f"negative effective viscosity {viscosity[site]:.6g} at rho={mid[site]:.6g}"
            )
        return float(np.max(viscosity))


def _face_flux(spec, rho):
    right = np.roll(rho, -1)
    mid = 0.5 * (rho + right)
    upwind = np.where(spec.speed(mid) >= 0.0, spec.flux(rho), spec.flux(right))
    return upwind + spec.conductance(mid) * (right - rho) / spec.grid.dx


def _check_relaxation(spec, rho, time):
    relaxation = spec.coefficients.relaxation if spec.coefficients is not None else None
    if relaxation is None:
        return
    lambda2 = np.abs(relaxation(rho))
    site = int(np.argmin(lambda2))
    if lambda2[site] < SINGULARITY_TOL:
        logger.error(f"EFT singular at t={time:.6g}, site {site}, rho={rho[site]:.6g}")
        raise SingularityError(
            f"EFT coefficients singular at t={time:.6g}: |lambda_2|={lambda2[site]:.3g} "
            f"at site {site} (rho={rho[site]:.6g})"
        )


def _sub_steps(spec, rho):
    admissible = spec.max_stable_dt(rho)
    interval = spec.grid.dt
    if spec.dt is not None:
        if spec.dt > admissible:
            logger.error(f"Requested PDE step {spec.dt} exceeds the stable bound {admissible:.6g}")
            raise CflViolationError(
                f"PDE step {spec.dt} violates the explicit stability bound", admissible
            )
        return max(1, math.ceil(interval / spec.dt - 1e-12))
    if math.isinf(admissible):
        return 1
    return max(1, math.ceil(interval / admissible))


def _n_steps(grid, t_final):
    steps = t_final / grid.dt
    n_steps = int(round(steps))
    if n_steps < 0 or abs(steps - n_steps) > 1e-9 * max(1.0, steps):
        raise ParameterError(f"t_final={t_final} is not a whole number of lattice steps")
    return n_steps


def solve(spec, rho0, t_final, snapshot_steps=None):
    """Integrate ``spec`` from ``rho0`` up to ``t_final``.

    Args:
        spec: PdeSpec describing the equation and its grid.
        rho0: Initial DensityProfile (or array) on ``spec.grid``.
        t_final: Final time; must be a whole number of lattice steps.
        snapshot_steps: Lattice steps to record; defaults to every step.

    Returns:
        Trajectory with one density snapshot per requested step.
    """
    grid = spec.grid
    rho = np.array(as_density_array(rho0), dtype=float)
    if rho.shape != (grid.n_sites,):
        raise ParameterError(f"initial profile has {rho.size} sites, grid has {grid.n_sites}")
    n_steps = _n_steps(grid, t_final)
    wanted = set(range(n_steps + 1) if snapshot_steps is None else snapshot_steps)
    if any(s < 0 or s > n_steps for s in wanted):
        raise ParameterError(f"snapshot steps must lie in [0, {n_steps}]")

    mass0 = float(np.sum(rho))
    steps, snapshots = [], []
    if 0 in wanted:
        steps.append(0)
        snapshots.append(rho.copy())

    for lattice_step in range(1, n_steps + 1):
        _check_relaxation(spec, rho, (lattice_step - 1) * grid.dt)
        m = _sub_steps(spec, rho)
        dt_sub = grid.dt / m
        if lattice_step == 1:
            logger.debug(f"{spec.kind}: {m} sub-steps of {dt_sub:.6g} per lattice step")
        for _ in range(m):
            face = _face_flux(spec, rho)
            rho = rho - dt_sub / grid.dx * (face - np.roll(face, 1))
        if not np.all(np.isfinite(rho)):
            raise SingularityError(f"non-finite density after {lattice_step} lattice steps")
        if lattice_step in wanted:
            steps.append(lattice_step)
            snapshots.append(rho.copy())

    drift = abs(float(np.sum(rho)) - mass0)
    if drift > MASS_TOL:
        logger.error(f"PDE mass drift {drift:.3g} over {n_steps} steps")
        raise ConservationError(f"PDE mass drift {drift:.3g} exceeds tolerance")
    return Trajectory(steps=np.array(steps), rho=np.array(snapshots), dt=grid.dt)


def solve_eft(model, rho0, t_final, grid=None, cfl_safety=0.9, snapshot_steps=None,
              coefficients=None):
    """Integrate the general EFT of ``model`` (or explicit ``coefficients``).

    Halts with SingularityError when lambda_2 approaches zero anywhere on the
    profile, which for the 2-bit gas happens where rho crosses 1.
    """
    grid = grid or GridSpec(n_sites=len(as_density_array(rho0)))
    if coefficients is None:
        coefficients = eft_coefficients(model, grid)
    spec = PdeSpec(kind="general_eft", coefficients=coefficients, grid=grid,
                   cfl_safety=cfl_safety, nu=0.0)
    return solve(spec, rho0, t_final, snapshot_steps)


def numerical_diffusion(spec, rho, dt_sub=None):
    """Leading-order numerical viscosity of the upwind flux, |a| dx / 2 (1 - |a| dt / dx).

    Returns the maximum over the faces of ``rho``.
    """
    rho = np.asarray(as_density_array(rho), dtype=float)
    if dt_sub is None:
        dt_sub = spec.grid.dt / _sub_steps(spec, rho)
    mid = 0.5 * (rho + np.roll(rho, -1))
    speed = np.abs(spec.speed(mid))
    dx = spec.grid.dx
    return float(np.max(0.5 * speed * dx * (1.0 - speed * dt_sub / dx)))
