"""Bit-level stochastic lattice gases and their ensemble averages.

A realization holds one occupancy bit per mover and site. The classical
gas routes a lone particle to the right with probability (1 + alpha) / 2
using a biased bit and a fair bit; the quantum gas models the projective
measurement of the two qubits of every site, either by sampling bits from
the shared post-collision probabilities (mean field) or by measuring each
realization's own collided basis state (independent). Ensemble averages
over N realizations estimate the occupation probabilities with an error
of order 1/sqrt(N).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from collision import omega_quantum_expect
from lattice import OccupancyField
from utils.errors import ConservationError, ParameterError
from utils.rng import INIT_STEP, Draw, uniforms

logger = logging.getLogger("Microscopic")

ENSEMBLE_MODES = ("classical_bits", "quantum_sampled")


@dataclass(frozen=True)
class EnsembleSpec:
    n_realizations: int = 64
    master_seed: int = 0
    mode: str = "classical_bits"
    independent: bool = False
    workers: int = 1

    def __post_init__(self):
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            raise ParameterError(f"n_realizations must be >= 1, got {self.n_realizations}")
        if not (0 <= self.master_seed < 2**64):
            raise ParameterError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.mode not in ENSEMBLE_MODES:
            raise ParameterError(f"mode must be one of {ENSEMBLE_MODES}, got {self.mode!r}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class BitRealization:
    """Occupancy bits of one realization.

    ``(master_seed, index, step)`` is the realization's RNG stream position:
    every draw it makes next is addressed from these coordinates.
    """

    bits_plus: np.ndarray
    bits_minus: np.ndarray
    master_seed: int = 0
    index: int = 0
    step: int = 0

    def __post_init__(self):
        plus = np.asarray(self.bits_plus, dtype=np.uint8)
        minus = np.asarray(self.bits_minus, dtype=np.uint8)
        if plus.shape != minus.shape or plus.ndim != 1:
            raise ParameterError("bit arrays must be matching 1-D arrays")
        if plus.max(initial=0) > 1 or minus.max(initial=0) > 1:
            raise ParameterError("occupancy bits must be 0 or 1")
        object.__setattr__(self, "bits_plus", plus)
        object.__setattr__(self, "bits_minus", minus)

    @property
    def particle_count(self):
        return int(self.bits_plus.sum(dtype=np.int64) + self.bits_minus.sum(dtype=np.int64))


@dataclass(frozen=True)
class BitEnsemble:
    """N realizations stacked row-wise: ``plus[r]`` is realization r."""

    plus: np.ndarray
    minus: np.ndarray
    spec: EnsembleSpec
    step: int = 0

    def __post_init__(self):
        plus = np.asarray(self.plus, dtype=np.uint8)
        minus = np.asarray(self.minus, dtype=np.uint8)
        if plus.shape != minus.shape or plus.ndim != 2:
            raise ParameterError("ensemble bit arrays must be matching 2-D arrays")
        if plus.shape[0] != self.spec.n_realizations:
            raise ParameterError(
                f"{plus.shape[0]} rows for {self.spec.n_realizations} realizations"
            )
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @property
    def n_sites(self):
        return self.plus.shape[1]

    @property
    def particle_count(self):
        return int(self.plus.sum(dtype=np.int64) + self.minus.sum(dtype=np.int64))

    def realization(self, index):
        return BitRealization(
            self.plus[index], self.minus[index], self.spec.master_seed, index, self.step
        )

    @classmethod
    def from_realizations(cls, realizations, spec, step):
        plus = np.stack([r.bits_plus for r in realizations])
        minus = np.stack([r.bits_minus for r in realizations])
        return cls(plus, minus, spec, step)


def _map_realizations(function, n_realizations, workers):
    """Apply ``function`` to every realization index, keeping index order."""
    if workers <= 1 or n_realizations == 1:
        return [function(r) for r in range(n_realizations)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, range(n_realizations)))


def sample_ensemble(field, spec):
    """Draw every realization's bits as independent Bernoulli(p) variables."""
    n_sites = field.n_sites

    def sample(r):
        u_plus = uniforms(spec.master_seed, r, INIT_STEP, Draw.PLUS, n_sites)
        u_minus = uniforms(spec.master_seed, r, INIT_STEP, Draw.MINUS, n_sites)
        return BitRealization(u_plus < field.plus, u_minus < field.minus, spec.master_seed, r, 0)

    realizations = _map_realizations(sample, spec.n_realizations, spec.workers)
    logger.debug(f"Sampled {spec.n_realizations} realizations on {n_sites} sites")
    return BitEnsemble.from_realizations(realizations, spec, step=0)


def classical_micro_collide(realization, alpha):
    """Biased-bit collision of one realization.

    Sites holding exactly one particle send it right when the biased bit
    (P = alpha) is set, otherwise when the fair bit is set. Empty and full
    sites are fixed points.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    plus = realization.bits_plus.astype(bool)
    minus = realization.bits_minus.astype(bool)
    n_sites = len(plus)
    seed, index, step = realization.master_seed, realization.index, realization.step

    bias = uniforms(seed, index, step, Draw.BIAS, n_sites) < alpha
    fair = uniforms(seed, index, step, Draw.FAIR, n_sites) < 0.5
    go_plus = bias | fair
    lone = plus ^ minus

    new_plus = np.where(lone, go_plus, plus)
    new_minus = np.where(lone, ~go_plus, minus)
    return replace(realization, bits_plus=new_plus, bits_minus=new_minus)


def collide_ensemble(ensemble, alpha, workers=None):
    """Classical collision of every realization; identical for any worker count."""
    workers = ensemble.spec.workers if workers is None else workers
    collided = _map_realizations(
        lambda r: classical_micro_collide(ensemble.realization(r), alpha),
        ensemble.spec.n_realizations,
        workers,
    )
    result = BitEnsemble.from_realizations(collided, ensemble.spec, ensemble.step)
    if result.particle_count != ensemble.particle_count:
        logger.error(
            f"Particle count changed in collision: {ensemble.particle_count} -> "
            f"{result.particle_count}"
        )
        raise ConservationError("microscopic collision changed the particle count")
    return result


def stream_ensemble(ensemble):
    """Move right movers one site right and left movers one site left."""
    return BitEnsemble(
        np.roll(ensemble.plus, 1, axis=1),
        np.roll(ensemble.minus, -1, axis=1),
        ensemble.spec,
        ensemble.step + 1,
    )


def classical_micro_step(ensemble, alpha, workers=None):
    return stream_ensemble(collide_ensemble(ensemble, alpha, workers))


def ensemble_average(ensemble):
    """Fraction of realizations occupied, per mover and site.

    Integer counts are summed before the single division, so the estimate
    is exact and independent of reduction order.
    """
    n = ensemble.spec.n_realizations
    plus = ensemble.plus.sum(axis=0, dtype=np.int64) / n
    minus = ensemble.minus.sum(axis=0, dtype=np.int64) / n
    return OccupancyField(plus, minus)


def quantum_micro_step(field_estimate, gate, ensemble):
    """One measurement-sampled quantum step.

    Args:
        field_estimate: Current ensemble-averaged OccupancyField.
        gate: UnitaryGate applied at every site.
        ensemble: BitEnsemble whose spec fixes N, the seed and the coupling;
            with ``spec.independent`` each realization collides its own
            bits instead of the shared estimate.

    Returns:
        (new BitEnsemble, new ensemble-averaged OccupancyField)
    """
    spec = ensemble.spec
    n_sites = ensemble.n_sites
    if field_estimate.n_sites != n_sites:
        raise ParameterError(
            f"estimate has {field_estimate.n_sites} sites, ensemble has {n_sites}"
        )

    if spec.independent:
        return _independent_quantum_step(gate, ensemble)

    p_plus = field_estimate.plus
    p_minus = field_estimate.minus
    delta = omega_quantum_expect(p_plus, p_minus, gate)
    step = ensemble.step

    def measure(r):
        u_plus = uniforms(spec.master_seed, r, step, Draw.PLUS, n_sites)
        u_minus = uniforms(spec.master_seed, r, step, Draw.MINUS, n_sites)
        return BitRealization(
            u_plus < p_plus + delta, u_minus < p_minus - delta, spec.master_seed, r, step
        )

    measured = _map_realizations(measure, spec.n_realizations, spec.workers)
    streamed = stream_ensemble(BitEnsemble.from_realizations(measured, spec, step))
    return streamed, ensemble_average(streamed)


def _independent_quantum_step(gate, ensemble):
    """Collide and measure every realization's own basis state.

    Empty and doubly occupied sites are fixed by the gate. A lone particle in
    basis state k stays with probability |U[k, k]|^2 and otherwise moves to
    the other channel, so each realization keeps its particle number exactly.
    """
    spec = ensemble.spec
    n_sites = ensemble.n_sites
    step = ensemble.step
    stay_plus = abs(gate.matrix[1, 1]) ** 2
    stay_minus = abs(gate.matrix[2, 2]) ** 2

    def measure(r):
        plus = ensemble.plus[r].astype(bool)
        minus = ensemble.minus[r].astype(bool)
        u = uniforms(spec.master_seed, r, step, Draw.PLUS, n_sites)
        swap = (plus & ~minus & (u >= stay_plus)) | (minus & ~plus & (u >= stay_minus))
        return BitRealization(plus ^ swap, minus ^ swap, spec.master_seed, r, step)

    measured = _map_realizations(measure, spec.n_realizations, spec.workers)
    collided = BitEnsemble.from_realizations(measured, spec, step)
    before = ensemble.plus.sum(axis=1, dtype=np.int64) + ensemble.minus.sum(axis=1, dtype=np.int64)
    after = collided.plus.sum(axis=1, dtype=np.int64) + collided.minus.sum(axis=1, dtype=np.int64)
    if not np.array_equal(before, after):
        changed = int(np.count_nonzero(before != after))
        logger.error(f"Quantum measurement changed the particle count of {changed} realizations")
        raise ConservationError(f"particle count changed in {changed} realizations")
    streamed = stream_ensemble(collided)
    return streamed, ensemble_average(streamed)


@dataclass(frozen=True)
class NoiseStatistics:
    """Deviation of an ensemble estimate from the mesoscopic field."""

    n_realizations: int
    per_site: np.ndarray
    std: float
    max_abs: float


def measure_noise(estimate, reference):
    """Compare an ensemble (or its average) with a mesoscopic reference field.

    ``per_site`` is the rms of the two components' deviations at each site;
    ``std`` pools both components over all sites.
    """
    if isinstance(estimate, BitEnsemble):
        n_realizations = estimate.spec.n_realizations
        estimate = ensemble_average(estimate)
    else:
        n_realizations = 0
    dev_plus = estimate.plus - reference.plus
    dev_minus = estimate.minus - reference.minus
    per_site = np.sqrt(0.5 * (dev_plus**2 + dev_minus**2))
    pooled = np.concatenate([dev_plus, dev_minus])
    return NoiseStatistics(
        n_realizations=n_realizations,
        per_site=per_site,
        std=float(np.sqrt(np.mean(pooled**2))),
        max_abs=float(np.max(np.abs(pooled))),
    )


def fit_noise_exponent(ns, stds):
    """Slope of log(std) against log(N)."""
    ns = np.asarray(ns, dtype=float)
    stds = np.asarray(stds, dtype=float)
    if len(ns) < 2 or np.any(ns <= 0) or np.any(stds <= 0):
        raise ParameterError("need at least two positive (N, std) pairs")
    slope, _ = np.polyfit(np.log(ns), np.log(stds), 1)
    return float(slope)
