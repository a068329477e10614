"""Collision terms for the classical, 2-bit and quantum lattice gases.

All three collision terms move probability between the two movers of one
site: ``plus' = plus + omega`` and ``minus' = minus - omega``. The quantum
term is obtained from a conservative 2-qubit gate acting on the product
state of the two occupancy qubits of a site.
"""

import logging
import math
from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from lattice import PROBABILITY_TOL, OccupancyField, stream
from utils.errors import ConfigError, ConservationError, ParameterError, RangeViolationError

logger = logging.getLogger("Collision")

UNITARITY_TOL = 1e-12

# Basis order |11>, |10>, |01>, |00>; the first qubit is the right mover.
_N_PLUS = np.array([1.0, 1.0, 0.0, 0.0])
_N_MINUS = np.array([1.0, 0.0, 1.0, 0.0])


@dataclass(frozen=True)
class ClassicalBL:
    """3-bit classical lattice gas: two movers plus a biased random bit."""

    alpha: float
    kind: ClassVar[str] = "classical"

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def label(self):
        return f"classical_alpha{self.alpha:g}"

    def to_dict(self):
        return {"kind": self.kind, "alpha": float(self.alpha)}


@dataclass(frozen=True)
class TwoBit:
    """Degenerate 2-bit lattice gas (no random bit)."""

    kind: ClassVar[str] = "twobit"

    @property
    def label(self):
        return "twobit"

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Quantum:
    """2-qubit quantum lattice gas parameterised by the gate's Euler angles."""

    theta: float
    zeta: float = 0.0
    xi: float = 0.0
    kind: ClassVar[str] = "quantum"

    def __post_init__(self):
        for name in ("theta", "zeta", "xi"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite, got {getattr(self, name)}")
        if abs(math.sin(self.theta)) < 1e-12:
            raise ParameterError(f"theta must not be a multiple of pi, got {self.theta}")

    @property
    def alpha_eff(self):
        """cot(theta) * cos(zeta - xi)."""
        return math.cos(self.theta) / math.sin(self.theta) * math.cos(self.zeta - self.xi)

    @property
    def label(self):
        return f"quantum_theta{self.theta:.4g}"

    def to_dict(self):
        return {
            "kind": self.kind,
            "theta": float(self.theta),
            "zeta": float(self.zeta),
            "xi": float(self.xi),
        }


CollisionModel = Union[ClassicalBL, TwoBit, Quantum]


def alpha_eff(model):
    """Dimensionless nonlinearity of a model (1 for the 2-bit gas)."""
    if isinstance(model, ClassicalBL):
        return model.alpha
    if isinstance(model, Quantum):
        return model.alpha_eff
    return 1.0


def model_from_dict(data):
    """Build a CollisionModel from a ``[model]`` configuration table."""
    kind = data.get("kind")
    try:
        if kind == "classical":
            return ClassicalBL(alpha=float(data.get("alpha", 0.707)))
        if kind == "twobit":
            return TwoBit()
        if kind == "quantum":
            return Quantum(
                theta=float(data.get("theta", math.pi / 4)),
                zeta=float(data.get("zeta", 0.0)),
                xi=float(data.get("xi", 0.0)),
            )
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), field="model")
    raise ConfigError(
        f"unknown model kind {kind!r}; expected classical, twobit or quantum", field="model.kind"
    )


@dataclass(frozen=True)
class UnitaryGate:
    """A 4x4 gate on the two occupancy qubits of a site."""

    matrix: np.ndarray
    theta: float = float("nan")
    zeta: float = float("nan")
    xi: float = float("nan")

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (4, 4):
            raise ParameterError(f"gate must be 4x4, got shape {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def unitarity_error(self):
        """max |U^dagger U - I|."""
        product = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(product - np.eye(4))))

    def is_unitary(self, tol=UNITARITY_TOL):
        return self.unitarity_error < tol

    def format_table(self, precision=6):
        labels = ["|11>", "|10>", "|01>", "|00>"]
        width = 2 * precision + 12
        lines = ["      " + "".join(label.center(width) for label in labels)]
        for label, row in zip(labels, self.matrix):
            cells = [
                f"{value.real:+.{precision}f}{value.imag:+.{precision}f}j".center(width)
                for value in row
            ]
            lines.append(f"{label:<6}" + "".join(cells))
        return "\n".join(lines)


def build_unitary(theta, zeta=0.0, xi=0.0):
    """The conservative collision gate acting only on |10> and |01>."""
    matrix = np.eye(4, dtype=complex)
    matrix[1, 1] = np.exp(1j * xi) * math.cos(theta)
    matrix[1, 2] = np.exp(1j * zeta) * math.sin(theta)
    matrix[2, 1] = -np.exp(-1j * zeta) * math.sin(theta)
    matrix[2, 2] = np.exp(-1j * xi) * math.cos(theta)
    return UnitaryGate(matrix, theta=float(theta), zeta=float(zeta), xi=float(xi))


def gate_for(model):
    if not isinstance(model, Quantum):
        raise ParameterError(f"{model.kind} model has no quantum gate")
    return build_unitary(model.theta, model.zeta, model.xi)


def _probabilities(name, values):
    array = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(array)) or np.any(array < -PROBABILITY_TOL) or np.any(
        array > 1.0 + PROBABILITY_TOL
    ):
        raise ParameterError(f"{name} must lie in [0, 1]")
    return np.clip(array, 0.0, 1.0)


def omega_classical(p_plus, p_minus, alpha):
    p_plus = _probabilities("p_plus", p_plus)
    p_minus = _probabilities("p_minus", p_minus)
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    return 0.5 * (p_minus - p_plus) + 0.5 * alpha * (p_plus + p_minus - 2.0 * p_plus * p_minus)


def omega_twobit(p_plus, p_minus):
    p_plus = _probabilities("p_plus", p_plus)
    p_minus = _probabilities("p_minus", p_minus)
    return (1.0 - p_plus) * p_minus


def omega_quantum_expect(p_plus, p_minus, gate):
    """Collision term as an expectation value of the gate's output state.

    Each occupancy is encoded as sqrt(p)|1> + sqrt(1-p)|0>, the gate is
    applied to the product state and the new right-mover occupancy is the
    expectation of n_1 = n (x) 1.

    Args:
        p_plus: Right-mover probabilities (scalar or array).
        p_minus: Left-mover probabilities, same shape as ``p_plus``.
        gate: UnitaryGate; rejected unless unitary to 1e-12.

    Returns:
        <psi'|n_1|psi'> - p_plus, with the shape of the inputs.
    """
    if not gate.is_unitary():
        raise ParameterError(f"gate is not unitary (max error {gate.unitarity_error:.3g})")
    p_plus = _probabilities("p_plus", p_plus)
    p_minus = _probabilities("p_minus", p_minus)

    a_plus, b_plus = np.sqrt(p_plus), np.sqrt(1.0 - p_plus)
    a_minus, b_minus = np.sqrt(p_minus), np.sqrt(1.0 - p_minus)
    psi = np.stack(
        [a_plus * a_minus, a_plus * b_minus, b_plus * a_minus, b_plus * b_minus], axis=-1
    ).astype(complex)
    psi_out = psi @ gate.matrix.T
    weights = np.abs(psi_out) ** 2

    omega = weights @ _N_PLUS - p_plus
    omega_minus = weights @ _N_MINUS - p_minus
    drift = np.max(np.abs(omega_minus + omega), initial=0.0)
    if drift > UNITARITY_TOL:
        logger.error(f"Gate does not conserve particle number (drift {drift:.3g})")
        raise ConservationError(f"gate changes total occupancy by {drift:.3g}")
    return omega


def omega_quantum_closed(p_plus, p_minus, theta, zeta=0.0, xi=0.0):
    p_plus = _probabilities("p_plus", p_plus)
    p_minus = _probabilities("p_minus", p_minus)
    root = np.sqrt(p_plus * (1.0 - p_plus) * p_minus * (1.0 - p_minus))
    return math.sin(theta) ** 2 * (p_minus - p_plus) + math.sin(2.0 * theta) * math.cos(
        zeta - xi
    ) * root


def omega(model, p_plus, p_minus):
    """Collision term of ``model`` evaluated elementwise."""
    if isinstance(model, ClassicalBL):
        return omega_classical(p_plus, p_minus, model.alpha)
    if isinstance(model, TwoBit):
        return omega_twobit(p_plus, p_minus)
    if isinstance(model, Quantum):
        return omega_quantum_closed(p_plus, p_minus, model.theta, model.zeta, model.xi)
    raise ParameterError(f"unknown collision model {model!r}")


def collide(field, model):
    """Apply the site-local collision to every site of ``field``."""
    delta = omega(model, field.plus, field.minus)
    plus = field.plus + delta
    minus = field.minus - delta
    low = min(plus.min(), minus.min())
    high = max(plus.max(), minus.max())
    if low < -PROBABILITY_TOL or high > 1.0 + PROBABILITY_TOL:
        site = int(np.argmax((plus < -PROBABILITY_TOL) | (plus > 1 + PROBABILITY_TOL)
                             | (minus < -PROBABILITY_TOL) | (minus > 1 + PROBABILITY_TOL)))
        logger.error(
            f"Collision left [0, 1] at site {site}: "
            f"plus={plus[site]!r}, minus={minus[site]!r}, model={model}"
        )
        raise RangeViolationError(
            f"{model.kind} collision produced p_plus={plus[site]!r}, "
            f"p_minus={minus[site]!r} at site {site}"
        )
    return OccupancyField(plus, minus)


def step(field, model):
    """One lattice Boltzmann step: collide, then stream."""
    return stream(collide(field, model))
