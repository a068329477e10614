"""Chapman-Enskog theory of the two-speed lattice gases.

Equilibria, collision Jacobians and their spectral data, transport
coefficients and the coefficient functions of the general effective field
theory

    d_t rho + d_x [c (d_+ - d_-)] + d_x [g(rho) d_x rho] = 0,
    g(rho) = (dx^2 / 2 dt) (2 / lambda_2 + 1),   lambda_2 = J_+ - J_-,

together with the turbulence-scaling and complexity diagnostics.
Expanding the flux term gives the familiar non-conservative form with a
gradient-squared coefficient (dx^2/dt) lambda_2' / lambda_2^2 entering with
a minus sign.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from collision import ClassicalBL, Quantum, TwoBit, omega, omega_quantum_closed
from lattice import GridSpec, as_density_array, flow_velocity
from utils.errors import DomainError, ParameterError, SingularityError

logger = logging.getLogger("Theory")

EQUILIBRIUM_TOL = 1e-10
DERIVATIVE_STEP = 1e-6
SINGULARITY_TOL = 1e-14


def _density(rho, closed=False):
    values = np.asarray(as_density_array(rho), dtype=float)
    if closed:
        bad = np.any(values < 0.0) or np.any(values > 2.0)
    else:
        bad = np.any(values <= 0.0) or np.any(values >= 2.0)
    if bad or not np.all(np.isfinite(values)):
        interval = "[0, 2]" if closed else "(0, 2)"
        raise ParameterError(f"density must lie in {interval}")
    return values


@dataclass(frozen=True)
class EquilibriumSolution:
    """Equilibrium occupations d_+(rho), d_-(rho) sampled on ``rho``."""

    rho: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    alpha_eff: float
    sign_branch: str = "exact"

    @property
    def offset(self):
        """d_+ - d_-."""
        return self.d_plus - self.d_minus


# ---------------------------------------------------------------------------
# Equilibria
# ---------------------------------------------------------------------------


def classical_equilibrium(rho, alpha):
    """Exact equilibrium of the classical gas.

    d_+- = rho/2 +- A where A is the root of
    alpha A^2 - A + (alpha rho / 2)(1 - rho / 2) = 0 that vanishes with alpha.
    """
    rho = _density(rho, closed=True)
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    discriminant = 1.0 - 2.0 * alpha**2 * rho * (1.0 - rho / 2.0)
    if np.any(discriminant < 0.0):
        raise DomainError(f"negative discriminant for alpha={alpha}")
    a = alpha * rho * (1.0 - rho / 2.0) / (1.0 + np.sqrt(discriminant))
    return rho / 2.0 + a, rho / 2.0 - a


def classical_equilibrium_leading_order(rho, alpha):
    """Leading-order equilibrium A = (alpha rho / 2)(1 - rho / 2)."""
    rho = _density(rho, closed=True)
    a = 0.5 * alpha * rho * (1.0 - rho / 2.0)
    return rho / 2.0 + a, rho / 2.0 - a


def twobit_equilibrium(rho):
    rho = _density(rho, closed=True)
    d_plus = np.minimum(rho, 1.0)
    return d_plus, rho - d_plus


def _quantum_offset(rho, alpha):
    """d_+ - d_- = (sqrt(1+a^2) - sqrt(1+a^2 (rho-1)^2)) / a, cancellation-free."""
    outer = np.sqrt(1.0 + alpha**2)
    inner = np.sqrt(1.0 + alpha**2 * (rho - 1.0) ** 2)
    return alpha * rho * (2.0 - rho) / (outer + inner)


def _balance_bracket(d_plus, d_minus, alpha):
    """Omega_QLG / sin^2(theta)."""
    root = np.sqrt(d_plus * (1.0 - d_plus) * d_minus * (1.0 - d_minus))
    return (d_minus - d_plus) + 2.0 * alpha * root


def quantum_equilibrium_root(rho, theta, zeta=0.0, xi=0.0):
    """Equilibrium found by bracketing Omega_QLG on the line p_+ + p_- = rho."""
    rho = np.atleast_1d(_density(rho))

    def residual(p, total):
        q = min(max(total - p, 0.0), 1.0)
        return float(omega_quantum_closed(p, q, theta, zeta, xi))

    d_plus = np.array([
        brentq(residual, max(0.0, total - 1.0), min(1.0, total), args=(total,),
               xtol=1e-15, rtol=4 * np.finfo(float).eps)
        for total in rho
    ])
    return d_plus, rho - d_plus


@lru_cache(maxsize=256)
def _quantum_sign_branch(alpha):
    """Decide which sign of the closed-form offset zeroes the collision term."""
    rho = np.array([0.3, 0.7, 1.2, 1.6])
    offset = _quantum_offset(rho, alpha)
    printed = _balance_bracket(rho / 2.0 - offset / 2.0, rho / 2.0 + offset / 2.0, alpha)
    if np.max(np.abs(printed)) < EQUILIBRIUM_TOL:
        logger.info(f"Quantum equilibrium for alpha_eff={alpha:.6g}: printed sign verified")
        return "printed"

    flipped = _balance_bracket(rho / 2.0 + offset / 2.0, rho / 2.0 - offset / 2.0, alpha)
    root_plus, _ = quantum_equilibrium_root(rho, math.atan2(1.0, alpha))
    if np.max(np.abs(flipped)) < EQUILIBRIUM_TOL and np.allclose(
        rho / 2.0 + offset / 2.0, root_plus, atol=1e-9
    ):
        logger.info(
            f"Quantum equilibrium for alpha_eff={alpha:.6g}: printed form fails the residual "
            f"check (max {np.max(np.abs(printed)):.3g}); using the root-verified branch "
            f"d_+ - d_- = +(sqrt(1+a^2) - sqrt(1+a^2(rho-1)^2))/a"
        )
        return "flipped"

    logger.error(f"No closed-form branch matches the root for alpha_eff={alpha:.6g}")
    raise DomainError(f"quantum equilibrium closed form has no valid branch at alpha={alpha}")


def quantum_equilibrium(rho, theta, zeta=0.0, xi=0.0):
    """Closed-form quantum equilibrium, verified against the collision term.

    Args:
        rho: Densities in (0, 2).
        theta, zeta, xi: Gate angles; theta must not be a multiple of pi.

    Returns:
        (d_plus, d_minus, sign_branch).
    """
    rho = _density(rho)
    alpha = Quantum(theta, zeta, xi).alpha_eff
    branch = _quantum_sign_branch(round(alpha, 12))
    offset = _quantum_offset(rho, alpha)
    if branch == "printed":
        offset = -offset
    d_plus, d_minus = rho / 2.0 + offset / 2.0, rho / 2.0 - offset / 2.0

    residual = np.abs(omega_quantum_closed(d_plus, d_minus, theta, zeta, xi))
    if np.max(residual, initial=0.0) > EQUILIBRIUM_TOL:
        logger.error(f"Quantum equilibrium residual {residual.max():.3g} at theta={theta}")
        raise DomainError(f"quantum equilibrium residual {residual.max():.3g} exceeds tolerance")
    return d_plus, d_minus, branch


def fermi_dirac_equilibrium(rho, alpha):
    """Equilibrium through the Fermi-Dirac ansatz d_+ = 1/(gamma z + 1), d_- = 1/(z/gamma + 1).

    gamma = sqrt(alpha^2 + 1) - alpha is the branch satisfying the
    detailed-balance relation; z is the positive root of
    rho z^2 + (gamma + 1/gamma)(rho - 1) z + rho - 2 = 0.

    Returns:
        (d_plus, d_minus, gamma, z)
    """
    rho = _density(rho)
    gamma = math.sqrt(alpha**2 + 1.0) - alpha
    b = (gamma + 1.0 / gamma) * (rho - 1.0)
    z = (-b + np.sqrt(b**2 - 4.0 * rho * (rho - 2.0))) / (2.0 * rho)
    return 1.0 / (gamma * z + 1.0), 1.0 / (z / gamma + 1.0), gamma, z


def detailed_balance_residual(d_plus, d_minus, alpha):
    """x_+ - x_- - 2 alpha sqrt(x_+ x_-) with x = d / (1 - d)."""
    x_plus = np.asarray(d_plus) / (1.0 - np.asarray(d_plus))
    x_minus = np.asarray(d_minus) / (1.0 - np.asarray(d_minus))
    return x_plus - x_minus - 2.0 * alpha * np.sqrt(x_plus * x_minus)


def equilibrium(model, rho):
    """Equilibrium of any collision model sampled on ``rho``."""
    if isinstance(model, ClassicalBL):
        d_plus, d_minus = classical_equilibrium(rho, model.alpha)
        return EquilibriumSolution(_density(rho, closed=True), d_plus, d_minus, model.alpha,
                                   "negative_root")
    if isinstance(model, TwoBit):
        d_plus, d_minus = twobit_equilibrium(rho)
        return EquilibriumSolution(_density(rho, closed=True), d_plus, d_minus, 1.0, "saturated")
    if isinstance(model, Quantum):
        d_plus, d_minus, branch = quantum_equilibrium(rho, model.theta, model.zeta, model.xi)
        return EquilibriumSolution(_density(rho), d_plus, d_minus, model.alpha_eff, branch)
    raise ParameterError(f"unknown collision model {model!r}")


# ---------------------------------------------------------------------------
# Jacobians and spectral data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JacobianPair:
    """J_+- = dOmega/dp_+- at the equilibrium for every density in ``rho``."""

    rho: np.ndarray
    j_plus: np.ndarray
    j_minus: np.ndarray

    @property
    def lambda2(self):
        return self.j_plus - self.j_minus

    def matrix(self, index=0):
        """Linearised collision matrix acting on (delta p_+, delta p_-)."""
        jp = float(np.ravel(self.j_plus)[index])
        jm = float(np.ravel(self.j_minus)[index])
        return np.array([[jp, jm], [-jp, -jm]])


def _classical_jacobian(d_plus, d_minus, alpha):
    return -0.5 + 0.5 * alpha * (1.0 - 2.0 * d_minus), 0.5 + 0.5 * alpha * (1.0 - 2.0 * d_plus)


def _quantum_jacobian(d_plus, d_minus, model):
    var_plus = d_plus * (1.0 - d_plus)
    var_minus = d_minus * (1.0 - d_minus)
    if np.any(var_plus <= 0.0) or np.any(var_minus <= 0.0):
        raise DomainError("quantum Jacobian is singular for equilibria on the boundary of [0, 1]")
    s2 = math.sin(model.theta) ** 2
    a = model.alpha_eff
    j_plus = s2 * (-1.0 - a * (2.0 * d_plus - 1.0) * np.sqrt(var_minus / var_plus))
    j_minus = s2 * (1.0 - a * (2.0 * d_minus - 1.0) * np.sqrt(var_plus / var_minus))
    return j_plus, j_minus


def jacobian(model, rho):
    solution = equilibrium(model, rho)
    d_plus, d_minus = solution.d_plus, solution.d_minus
    if isinstance(model, ClassicalBL):
        j_plus, j_minus = _classical_jacobian(d_plus, d_minus, model.alpha)
    elif isinstance(model, TwoBit):
        j_plus, j_minus = -d_minus, 1.0 - d_plus
    else:
        j_plus, j_minus = _quantum_jacobian(d_plus, d_minus, model)
    return JacobianPair(solution.rho, np.asarray(j_plus, dtype=float), np.asarray(j_minus, dtype=float))


def finite_difference_jacobian(model, rho, h=DERIVATIVE_STEP):
    """Central differences of Omega at the equilibrium (one-sided at the unit-interval edges)."""
    solution = equilibrium(model, rho)
    d_plus, d_minus = solution.d_plus, solution.d_minus

    up, down = np.minimum(d_plus + h, 1.0), np.maximum(d_plus - h, 0.0)
    j_plus = (omega(model, up, d_minus) - omega(model, down, d_minus)) / (up - down)

    up, down = np.minimum(d_minus + h, 1.0), np.maximum(d_minus - h, 0.0)
    j_minus = (omega(model, d_plus, up) - omega(model, d_plus, down)) / (up - down)
    return JacobianPair(solution.rho, j_plus, j_minus)


@dataclass(frozen=True)
class SpectralData:
    """Eigen-decomposition of a singular 2x2 collision Jacobian.

    Rows of ``left`` are <xi_1|, <xi_2|; columns of ``right`` are
    |xi_1>, |xi_2>; the pairs are biorthonormal.
    """

    eigenvalues: np.ndarray
    left: np.ndarray
    right: np.ndarray
    generalized_inverse: np.ndarray

    @property
    def lambda2(self):
        return float(self.eigenvalues[1])


def spectral(matrix):
    """Spectral data and generalised inverse of a collision Jacobian.

    The matrix must have the conservative form [[J_+, J_-], [-J_+, -J_-]].
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (2, 2) or not np.allclose(matrix[1], -matrix[0], rtol=0.0, atol=1e-14):
        raise ParameterError("collision Jacobian must have the form [[J+, J-], [-J+, -J-]]")
    j_plus, j_minus = matrix[0]
    lambda2 = j_plus - j_minus
    if abs(lambda2) < SINGULARITY_TOL:
        raise SingularityError("relaxation eigenvalue J_+ - J_- vanishes")

    left = np.array([[1.0, 1.0], [j_plus / lambda2, j_minus / lambda2]])
    right = np.array([[-j_minus / lambda2, 1.0], [j_plus / lambda2, -1.0]])
    xi2_right = right[:, 1]
    inverse = np.outer(xi2_right, left[1]) / lambda2
    return SpectralData(np.array([0.0, lambda2]), left, right, inverse)


# ---------------------------------------------------------------------------
# Transport coefficients and the effective field theory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransportCoefficients:
    c_s: float
    nu: float


def transport_coefficients(model, grid=None):
    """Closed-form Burgers coefficients (c_s, nu) of the classical and quantum gases."""
    grid = grid or GridSpec()
    if isinstance(model, ClassicalBL):
        return TransportCoefficients(grid.c * model.alpha, grid.dx**2 / (2.0 * grid.dt))
    if isinstance(model, Quantum):
        cot = math.cos(model.theta) / math.sin(model.theta)
        return TransportCoefficients(grid.c * model.alpha_eff, cot**2 * grid.dx**2 / grid.dt)
    raise ParameterError("the 2-bit gas has no Burgers transport coefficients")


@dataclass(frozen=True)
class EftCoefficients:
    """Coefficient functions of the general effective field theory.

    ``flux`` is c (d_+ - d_-); ``advection`` its rho-derivative;
    ``gradient_squared`` is (dx^2/dt) lambda_2' / lambda_2^2; ``diffusion``
    is the second-derivative coefficient (dx^2 / 2dt)(2/lambda_2 + 1), whose
    negative is the effective viscosity; ``relaxation`` is lambda_2 itself
    (None when the theory has no relaxation mode).
    """

    flux: Callable
    advection: Callable
    gradient_squared: Callable
    diffusion: Callable
    relaxation: Optional[Callable] = None

    @classmethod
    def zero(cls):
        zeros = np.zeros_like
        return cls(flux=zeros, advection=zeros, gradient_squared=zeros, diffusion=zeros)

    def evaluate(self, rho):
        rho = np.asarray(rho, dtype=float)
        values = {
            "flux": self.flux(rho),
            "advection": self.advection(rho),
            "gradient_squared": self.gradient_squared(rho),
            "diffusion": self.diffusion(rho),
        }
        if self.relaxation is not None:
            values["relaxation"] = self.relaxation(rho)
        return values


def _offset_and_derivative(model, rho):
    """(d_+ - d_-, d/drho (d_+ - d_-)) evaluated analytically."""
    if isinstance(model, ClassicalBL):
        d_plus, d_minus = classical_equilibrium(rho, model.alpha)
        root = np.sqrt(1.0 - 2.0 * model.alpha**2 * rho * (1.0 - rho / 2.0))
        return d_plus - d_minus, model.alpha * (1.0 - rho) / root
    if isinstance(model, TwoBit):
        d_plus, d_minus = twobit_equilibrium(rho)
        return d_plus - d_minus, np.where(rho < 1.0, 1.0, -1.0)
    d_plus, d_minus, _ = quantum_equilibrium(rho, model.theta, model.zeta, model.xi)
    a = model.alpha_eff
    return d_plus - d_minus, a * (1.0 - rho) / np.sqrt(1.0 + a**2 * (rho - 1.0) ** 2)


def _relaxation_derivative(model, rho):
    if isinstance(model, ClassicalBL):
        root = np.sqrt(1.0 - 2.0 * model.alpha**2 * rho * (1.0 - rho / 2.0))
        return model.alpha**2 * (1.0 - rho) / root
    if isinstance(model, TwoBit):
        return np.where(rho < 1.0, 1.0, -1.0)
    h = DERIVATIVE_STEP
    return (jacobian(model, rho + h).lambda2 - jacobian(model, rho - h).lambda2) / (2.0 * h)


def eft_coefficients(model, grid=None):
    """Coefficient functions of the general EFT for ``model`` on ``grid``."""
    grid = grid or GridSpec()
    c = grid.c
    scale = grid.dx**2 / grid.dt

    def relaxation(rho):
        return jacobian(model, _density(rho)).lambda2

    def checked_relaxation(rho):
        lambda2 = relaxation(rho)
        if np.any(np.abs(lambda2) < SINGULARITY_TOL):
            raise SingularityError(f"lambda_2 vanishes for the {model.kind} model")
        return lambda2

    def flux(rho):
        return c * _offset_and_derivative(model, _density(rho))[0]

    def advection(rho):
        return c * _offset_and_derivative(model, _density(rho))[1]

    def gradient_squared(rho):
        rho = _density(rho)
        return scale * _relaxation_derivative(model, rho) / checked_relaxation(rho) ** 2

    def diffusion(rho):
        return 0.5 * scale * (2.0 / checked_relaxation(rho) + 1.0)

    return EftCoefficients(flux, advection, gradient_squared, diffusion, relaxation)


def effective_transport(model, grid=None, rho=1.0):
    """(c_s, nu) implied by the general EFT at density ``rho``.

    The advection coefficient is matched to c_s (1 - rho); at rho = 1 the
    limit is taken with a central difference.
    """
    grid = grid or GridSpec()
    eft = eft_coefficients(model, grid)
    if abs(1.0 - rho) > 1e-6:
        c_s = float(eft.advection(np.array([rho]))[0]) / (1.0 - rho)
    else:
        h = 1e-4
        adv = eft.advection(np.array([rho - h, rho + h]))
        c_s = -float(adv[1] - adv[0]) / (2.0 * h)
    nu = -float(eft.diffusion(np.array([rho]))[0])
    return TransportCoefficients(c_s, nu)


def viscosity_factor(model, rho):
    """Factor f in lambda_2 = -2 sin^2(theta) (1 + alpha^2 f) for the quantum gas."""
    if not isinstance(model, Quantum):
        raise ParameterError("the viscosity factor is defined for the quantum gas only")
    a = model.alpha_eff
    if abs(a) < 1e-12:
        raise ParameterError("the viscosity factor is undefined at alpha_eff = 0")
    lambda2 = jacobian(model, rho).lambda2
    return (lambda2 / (-2.0 * math.sin(model.theta) ** 2) - 1.0) / a**2


# ---------------------------------------------------------------------------
# Turbulence scaling and complexity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TurbulenceScales:
    L: float
    u_L: float
    nu: float
    c: float
    epsilon: float
    lam: float
    u_lambda: float
    Re: float
    M: float
    n_x_required: float
    n_required_lower: float


def turbulence_scales(L, u_L, nu, c=1.0):
    for name, value in (("L", L), ("u_L", u_L), ("nu", nu), ("c", c)):
        if not value > 0:
            raise ParameterError(f"{name} must be positive, got {value}")
    epsilon = u_L**3 / L
    lam = (nu**3 / epsilon) ** 0.25
    u_lambda = (nu * epsilon) ** 0.25
    reynolds = L * u_L / nu
    mach = u_L / c
    return TurbulenceScales(
        L=L,
        u_L=u_L,
        nu=nu,
        c=c,
        epsilon=epsilon,
        lam=lam,
        u_lambda=u_lambda,
        Re=reynolds,
        M=mach,
        n_x_required=reynolds**0.75,
        n_required_lower=reynolds**0.5 / mach**2,
    )


def scales_from_profile(rho, grid, nu):
    """Turbulence scales with L the domain length and u_L the rms flow fluctuation."""
    u = flow_velocity(rho, grid)
    u_rms = float(np.std(u))
    if u_rms == 0.0:
        raise ParameterError("a uniform profile has no eddy velocity")
    return turbulence_scales(grid.length, u_rms, nu, grid.c)


def complexity(n_realizations, n_x, local_resources=3):
    """Classical cost N N_x r and the quantum lower bound N N_x log2(r)."""
    if n_realizations < 1 or n_x < 1 or local_resources < 1:
        raise ParameterError("ensemble size, lattice size and local resources must be >= 1")
    classical = float(n_realizations * n_x * local_resources)
    quantum = n_realizations * n_x * math.log2(local_resources)
    return classical, quantum


def energy_budget(rho, grid, nu):
    """Kinetic energy sum(u^2/2) dx and dissipation nu sum((d_x u)^2) dx on the periodic domain."""
    u = flow_velocity(rho, grid)
    gradient = (np.roll(u, -1) - u) / grid.dx
    return float(0.5 * np.sum(u**2) * grid.dx), float(nu * np.sum(gradient**2) * grid.dx)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoryReport:
    model: object
    grid: GridSpec
    rho: float
    equilibrium: EquilibriumSolution
    jacobian: JacobianPair
    eft: EftCoefficients = field(repr=False)
    transport: Optional[TransportCoefficients] = None
    effective: Optional[TransportCoefficients] = None
    viscosity_factor: Optional[float] = None

    def to_flat_dict(self, prefix="theory."):
        flat = {
            "model": self.model.kind,
            "rho": float(self.rho),
            "alpha_eff": float(self.equilibrium.alpha_eff),
            "sign_branch": self.equilibrium.sign_branch,
            "d_plus": float(self.equilibrium.d_plus[0]),
            "d_minus": float(self.equilibrium.d_minus[0]),
            "j_plus": float(self.jacobian.j_plus[0]),
            "j_minus": float(self.jacobian.j_minus[0]),
            "lambda2": float(self.jacobian.lambda2[0]),
        }
        if self.transport is not None:
            flat["c_s"] = self.transport.c_s
            flat["nu"] = self.transport.nu
        if self.effective is not None:
            flat["c_s_effective"] = self.effective.c_s
            flat["nu_effective"] = self.effective.nu
        if self.viscosity_factor is not None:
            flat["viscosity_factor"] = self.viscosity_factor
        return {f"{prefix}{key}": value for key, value in flat.items()}


def theory_report(model, grid=None, rho=1.0):
    grid = grid or GridSpec()
    at = np.array([float(rho)])
    transport = None
    if not isinstance(model, TwoBit):
        transport = transport_coefficients(model, grid)
    try:
        effective = effective_transport(model, grid, rho)
    except SingularityError:
        logger.info(f"No effective transport for {model.kind} at rho={rho}: lambda_2 vanishes")
        effective = None
    factor = None
    if isinstance(model, Quantum) and abs(model.alpha_eff) > 1e-12:
        factor = float(viscosity_factor(model, at)[0])
    return TheoryReport(
        model=model,
        grid=grid,
        rho=float(rho),
        equilibrium=equilibrium(model, at),
        jacobian=jacobian(model, at),
        eft=eft_coefficients(model, grid),
        transport=transport,
        effective=effective,
        viscosity_factor=factor,
    )


COEFFICIENT_COLUMNS = ("rho", "d_plus", "d_minus", "J_plus", "J_minus", "adv_coeff", "diff_coeff")


def coefficient_table(model, grid=None, rho_values=None):
    """Sampled coefficient functions, one dict per density; singular entries are nan."""
    grid = grid or GridSpec()
    if rho_values is None:
        rho_values = np.linspace(0.05, 1.95, 39)
    rho_values = _density(rho_values)
    solution = equilibrium(model, rho_values)
    pair = jacobian(model, rho_values)
    eft = eft_coefficients(model, grid)
    advection = eft.advection(rho_values)
    lambda2 = pair.lambda2
    with np.errstate(divide="ignore", invalid="ignore"):
        diffusion = np.where(
            np.abs(lambda2) < SINGULARITY_TOL,
            np.nan,
            0.5 * grid.dx**2 / grid.dt * (2.0 / lambda2 + 1.0),
        )
    columns = (rho_values, solution.d_plus, solution.d_minus, pair.j_plus, pair.j_minus,
               advection, diffusion)
    return [dict(zip(COEFFICIENT_COLUMNS, map(float, row))) for row in zip(*columns)]

