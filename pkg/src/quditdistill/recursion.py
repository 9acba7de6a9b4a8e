"""Weight-level distillation dynamics and their closed-form solutions.

A weight matrix ``q`` has shape (D, D) with ``q[k, j]`` the probability of
the Bell state |Psi_kj>. One round convolves each column over the phase
index and renormalizes; the coincidence probability is the normalizer.

Every 2**k power is taken in log-space: ``0.9 ** 2**10`` already underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDistributionError, InvalidStateError, OutOfBasinError, OutOfRangeError
from .gates import check_dim

NORM_TOL = 1e-12
DEGENERATE_FLOOR = 1e-300


def as_weights(q, tol: float = NORM_TOL) -> np.ndarray:
    """Validate a square weight matrix and return it as a float array."""
    q = np.array(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InvalidStateError(f"weight matrix must be square, got shape {q.shape}")
    check_dim(q.shape[0])
    if not np.all(np.isfinite(q)) or np.any(q < 0):
        raise InvalidStateError("weights must be finite and nonnegative")
    if abs(q.sum() - 1.0) > tol:
        raise InvalidStateError(f"weights sum to {q.sum():.17g}, expected 1")
    return q


def _as_probability_vector(q) -> np.ndarray:
    q = np.array(q, dtype=float)
    if q.ndim != 1 or q.size == 0:
        raise InvalidStateError("expected a nonempty 1-d weight vector")
    if not np.all(np.isfinite(q)) or np.any(q < 0):
        raise InvalidStateError("weights must be finite and nonnegative")
    return q


def _check_fidelity(F: float) -> float:
    if not 0.0 <= F <= 1.0:
        raise OutOfRangeError(f"fidelity must lie in [0, 1], got {F}")
    return float(F)


def random_weights(D: int, rng: np.random.Generator, zero_fraction: float = 0.0) -> np.ndarray:
    """D*D independent uniforms, ``floor(zero_fraction * D*D)`` of them zeroed, normalized."""
    D = check_dim(D)
    if not 0.0 <= zero_fraction < 1.0:
        raise OutOfRangeError("zero_fraction must lie in [0, 1)")
    q = rng.uniform(size=D * D)
    n_zero = int(math.floor(zero_fraction * D * D))
    if n_zero:
        q[rng.choice(D * D, size=n_zero, replace=False)] = 0.0
    return (q / q.sum()).reshape(D, D)


def convolve_columns(q: np.ndarray) -> np.ndarray:
    """Unnormalized weights g[k, j] = sum_k' q[k - k', j] q[k', j]."""
    g = np.zeros_like(q)
    for kp in range(q.shape[0]):
        g += np.roll(q, kp, axis=0) * q[kp]
    return g


def step_general(q) -> tuple[np.ndarray, float]:
    """One round on a diagonal Bell mixture. Returns (new weights, coincidence probability)."""
    q = as_weights(q)
    g = convolve_columns(q)
    norm = float(g.sum())
    if norm < DEGENERATE_FLOOR:
        raise DegenerateDistributionError("coincidence probability underflowed")
    return g / norm, norm


def step_subset(q) -> np.ndarray:
    """Squares renormalized; weights on |Psi_0i> only."""
    q = _as_probability_vector(q)
    sq = q * q
    norm = sq.sum()
    if norm < DEGENERATE_FLOOR:
        raise DegenerateDistributionError("all weights vanish")
    return sq / norm


def step_isotropic(F: float, D: int) -> float:
    """Fidelity after one round when the noise is spread evenly over D - 1 states."""
    F = _check_fidelity(F)
    D = check_dim(D)
    return _isotropic_map(F, D)


def _isotropic_map(F: float, D: int) -> float:
    a = F * F
    return a / (a + (1.0 - F) ** 2 / (D - 1))


def step_nondiagonal(F: float, D: int) -> float:
    """Fidelity update for the |Psi_d>/|Psi_o> mixture.

    Same map as :func:`step_isotropic`; kept separate so the coherent-noise
    family has its own entry point.
    """
    F = _check_fidelity(F)
    D = check_dim(D)
    return _isotropic_map(F, D)


def coincidence_prob_isotropic(F: float, D: int) -> float:
    F = _check_fidelity(F)
    D = check_dim(D)
    return F * F + (1.0 - F) ** 2 / (D - 1)


def step_qutrit(q0: float, q1: float) -> tuple[float, float]:
    q2 = 1.0 - q0 - q1
    if q0 < 0 or q1 < 0 or q2 < -1e-15:
        raise OutOfRangeError(f"({q0}, {q1}) is outside the probability simplex")
    return _qutrit_map(q0, q1)


def _qutrit_map(q0: float, q1: float) -> tuple[float, float]:
    q2 = 1.0 - q0 - q1
    s = q0 * q0 + q1 * q1 + q2 * q2
    if s < DEGENERATE_FLOOR:
        raise DegenerateDistributionError("all weights vanish")
    return q0 * q0 / s, q1 * q1 / s


def _doubling_exponent(k: int) -> float:
    try:
        return math.ldexp(1.0, k)
    except OverflowError:
        return math.inf


def closed_form_isotropic(F0: float, D: int, k: int) -> float:
    """Fidelity after ``k`` rounds, evaluated as a logistic in log-space.

    F_k = 1 / (1 + (D-1) r**(2**k)) with r = (1 - F0) / ((D - 1) F0). For very
    large ``k`` this saturates at the stable fixed point 0 or 1.
    """
    F0 = _check_fidelity(F0)
    D = check_dim(D)
    if k < 0:
        raise OutOfRangeError("k must be >= 0")
    if k == 0 or F0 in (0.0, 1.0):
        return F0
    if 1.0 - F0 == (D - 1) * F0:
        return F0
    log_r = math.log1p(-F0) - math.log(D - 1) - math.log(F0)
    t = math.log(D - 1) + _doubling_exponent(k) * log_r
    # 1 / (1 + e^t) without overflow
    if t > 0:
        e = math.exp(-t)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(t))


def _log_power_normalize(values: np.ndarray, k: int) -> np.ndarray:
    """values**(2**k) / sum(values**(2**k)) with zeros staying zero."""
    with np.errstate(divide="ignore"):
        logs = np.log(values)
    top = logs.max()
    if not np.isfinite(top):
        raise DegenerateDistributionError("all weights vanish")
    gap = logs - top
    with np.errstate(invalid="ignore"):
        scaled = np.exp(np.where(gap == 0.0, 0.0, _doubling_exponent(k) * gap))
    total = scaled.sum()
    if total < DEGENERATE_FLOOR:
        raise DegenerateDistributionError("normalizer underflowed")
    return scaled / total


def closed_form_subset(q0, k: int) -> np.ndarray:
    """``k`` rounds of :func:`step_subset` in one shot."""
    q0 = _as_probability_vector(q0)
    if k < 0:
        raise OutOfRangeError("k must be >= 0")
    if k == 0:
        return q0.copy()
    return _log_power_normalize(q0, k)


def closed_form_dft(w0, n: int) -> np.ndarray:
    """``n`` rounds of :func:`step_general` through the discrete Fourier transform.

    Per column, transform over the phase index, raise each coefficient to the
    power 2**n, transform back and normalize over the whole matrix. Powers
    are taken on magnitude and phase separately, after dividing by the
    largest magnitude (the largest column sum), so nothing underflows.
    """
    q = as_weights(w0)
    if n < 0:
        raise OutOfRangeError("n must be >= 0")
    if n == 0:
        return q.copy()
    D = q.shape[0]
    kk = np.arange(D)
    fwd = np.exp(2j * np.pi * np.outer(kk, kk) / D)
    R = fwd @ q  # R[khat, j]
    mag = np.abs(R)
    top = mag.max()
    if top < DEGENERATE_FLOOR:
        raise DegenerateDistributionError("all transformed weights vanish")
    power = _doubling_exponent(n)
    with np.errstate(divide="ignore"):
        log_mag = np.log(mag / top)
    with np.errstate(invalid="ignore"):
        exponent = np.where(log_mag == 0.0, 0.0, power * log_mag)
    new_mag = np.where(mag > 0, np.exp(exponent), 0.0)
    # 2**n * angle is exact in binary floating point; fmod keeps exp() well conditioned.
    new_phase = np.fmod(power * np.angle(R), 2 * np.pi) if math.isfinite(power) else np.zeros_like(mag)
    Rn = new_mag * np.exp(1j * new_phase)
    g = (fwd.conj() @ Rn).real / D
    g = np.clip(g, 0.0, None)
    total = g.sum()
    if total < DEGENERATE_FLOOR:
        raise DegenerateDistributionError("normalizer underflowed")
    return g / total


def iterations_needed(eps: float, F0: float, D: int) -> int:
    """Rounds needed to lift the isotropic fidelity from ``F0`` to at least ``1 - eps``."""
    D = check_dim(D)
    if not 0.0 < eps < 1.0:
        raise OutOfRangeError(f"eps must lie in (0, 1), got {eps}")
    if not F0 <= 1.0:
        raise OutOfRangeError(f"fidelity must lie in [0, 1], got {F0}")
    if F0 <= 1.0 / D:
        raise OutOfBasinError(f"F0={F0} does not exceed the unstable fixed point 1/{D}")
    if F0 >= 1.0 - eps:
        return 0
    ratio = math.log(eps / ((1.0 - eps) * (D - 1))) / math.log((1.0 - F0) / ((D - 1) * F0))
    # 1e-9 absorbs rounding when the target is reached exactly after an integer number of rounds
    return max(0, math.ceil(math.log2(ratio) - 1e-9))


@dataclass(frozen=True)
class FlowRecord:
    step: int
    weights: np.ndarray = field(repr=False)
    coincidence_prob: float


@dataclass(frozen=True)
class FlowTrajectory:
    """Iterates of the general recursion.

    ``coincidence_prob`` of record ``n`` is the success probability of the
    round that produced it; the initial record carries 1.
    """

    records: tuple[FlowRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i) -> FlowRecord:
        return self.records[i]


def flow(q0, steps: int) -> FlowTrajectory:
    q = as_weights(q0)
    records = [FlowRecord(0, q, 1.0)]
    for n in range(1, steps + 1):
        q, p = step_general(q)
        records.append(FlowRecord(n, q, p))
    return FlowTrajectory(tuple(records))


def isotropic_weights(F: float, D: int) -> np.ndarray:
    """Weight matrix with F on |Psi_00> and (1 - F)/(D - 1) on each |Psi_0i>."""
    F = _check_fidelity(F)
    D = check_dim(D)
    q = np.zeros((D, D))
    q[0, 0] = F
    q[0, 1:] = (1.0 - F) / (D - 1)
    return q


def subset_weights(q) -> np.ndarray:
    """Embed a length-(M+1) vector on |Psi_00>..|Psi_0M> into a D x D matrix (D = len)."""
    q = _as_probability_vector(q)
    w = np.zeros((max(q.size, 2), max(q.size, 2)))
    w[0, : q.size] = q
    return w
