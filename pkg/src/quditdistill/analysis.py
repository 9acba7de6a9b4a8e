"""Fixed points, basins, the continuum limit and a block-RG comparison.

Stability is read off numerical Jacobians (central differences, h = 1e-6).
Phase-diagram grid points are iterated on the full weight triple so that the
q0 <-> q1 mirror symmetry holds bit for bit.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import optimize

from .errors import DegenerateDistributionError, InvalidStateError, OutOfRangeError
from .gates import check_dim
from .recursion import _as_probability_vector, _doubling_exponent, _isotropic_map, _qutrit_map

JACOBIAN_STEP = 1e-6
MARGINAL_BAND = 1e-6
CAPTURE_RADIUS = 1e-6
UNRESOLVED = "unresolved"


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


def _classify(rate: float) -> Stability:
    if rate < 1.0 - MARGINAL_BAND:
        return Stability.STABLE
    if rate > 1.0 + MARGINAL_BAND:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def _fraction_label(coords) -> str:
    return "(" + ",".join(str(Fraction(c).limit_denominator(12)) for c in coords) + ")"


@dataclass(frozen=True)
class FixedPoint:
    coordinates: tuple[float, ...]
    stability: Stability
    rate: float  # |derivative| or Jacobian spectral radius

    @property
    def label(self) -> str:
        return _fraction_label(self.coordinates)


def fixed_points_isotropic(D: int) -> list[FixedPoint]:
    """Fixed points 0, 1/D, 1 of the isotropic fidelity map, classified by |dF'/dF|."""
    D = check_dim(D)
    h = JACOBIAN_STEP
    out = []
    for F in (0.0, 1.0 / D, 1.0):
        rate = abs(_isotropic_map(F + h, D) - _isotropic_map(F - h, D)) / (2 * h)
        out.append(FixedPoint((F,), _classify(rate), rate))
    return out


def qutrit_jacobian(q0: float, q1: float) -> np.ndarray:
    h = JACOBIAN_STEP
    jac = np.empty((2, 2))
    for col, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
        plus = np.array(_qutrit_map(q0 + dx, q1 + dy))
        minus = np.array(_qutrit_map(q0 - dx, q1 - dy))
        jac[:, col] = (plus - minus) / (2 * h)
    return jac


def _qutrit_residual(x):
    return np.array(_qutrit_map(x[0], x[1])) - x


def qutrit_fixed_points(seed_spacing: int = 20) -> list[FixedPoint]:
    """Fixed points of the qutrit map found by root finding from a simplex grid of seeds.

    Plain forward iteration only ever reaches attractors, so each seed is
    refined with a Powell hybrid solve of f(q) - q = 0 instead.
    """
    found: list[np.ndarray] = []
    n = seed_spacing
    for i, j in itertools.product(range(n + 1), repeat=2):
        if i + j > n:
            continue
        sol = optimize.root(_qutrit_residual, np.array([i / n, j / n]), method="hybr", tol=1e-15)
        x = sol.x
        if not np.all(np.isfinite(x)) or np.max(np.abs(_qutrit_residual(x))) > 1e-12:
            continue
        if x.min() < -1e-9 or x.sum() > 1.0 + 1e-9:
            continue
        x = np.clip(x, 0.0, 1.0)
        x[x < 1e-14] = 0.0
        if np.max(np.abs(_qutrit_residual(x))) > 1e-12:
            continue
        if all(np.max(np.abs(x - y)) > 1e-8 for y in found):
            found.append(x)
    points = []
    for x in sorted(found, key=lambda v: (v[0], v[1])):
        rate = float(np.max(np.abs(np.linalg.eigvals(qutrit_jacobian(*x)))))
        points.append(FixedPoint((float(x[0]), float(x[1])), _classify(rate), rate))
    return points


@dataclass(frozen=True)
class PhaseCell:
    i: int
    j: int
    q0: float
    q1: float
    label: str


@dataclass(frozen=True)
class PhaseDiagram:
    """Terminal fixed point of every simplex grid point (i/(r-1), j/(r-1)), i + j <= r - 1."""

    resolution: int
    cells: tuple[PhaseCell, ...] = field(repr=False)

    def label_at(self, i: int, j: int) -> str:
        return self._index[(i, j)]

    @cached_property
    def _index(self) -> dict:
        return {(c.i, c.j): c.label for c in self.cells}


def iterate_simplex(counts: np.ndarray, denom: int, max_iters: int) -> np.ndarray:
    """Iterate q -> q**2 / sum(q**2) on rows of integer compositions of ``denom``.

    Rows stop updating once a step moves them by less than 1e-15.
    """
    q = counts.astype(float) / denom
    active = np.ones(len(q), dtype=bool)
    for _ in range(max_iters):
        if not active.any():
            break
        sub = q[active]
        sq = sub * sub
        new = sq / sq.sum(axis=1, keepdims=True)
        moved = np.max(np.abs(new - sub), axis=1)
        q[active] = new
        still = moved >= 1e-15
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
    return q


def phase_diagram(resolution: int, max_iters: int = 200, capture: float = CAPTURE_RADIUS) -> PhaseDiagram:
    if resolution < 2:
        raise OutOfRangeError("resolution must be >= 2")
    n = resolution - 1
    ij = [(i, j) for i in range(n + 1) for j in range(n + 1 - i)]
    counts = np.array([(i, j, n - i - j) for i, j in ij])
    final = iterate_simplex(counts, n, max_iters)[:, :2]
    fps = qutrit_fixed_points()
    coords = np.array([fp.coordinates for fp in fps])
    labels = [fp.label for fp in fps]
    cells = []
    for (i, j), end in zip(ij, final):
        dist = np.max(np.abs(coords - end), axis=1)
        best = int(np.argmin(dist))
        label = labels[best] if dist[best] < capture else UNRESOLVED
        cells.append(PhaseCell(i, j, i / n, j / n, label))
    return PhaseDiagram(resolution, tuple(cells))


def asymptotic_weights(q0) -> np.ndarray:
    """Limit of repeated squaring: 1/p on each of the p maximal entries.

    Ties are exact floating-point equality; round beforehand if needed.
    """
    q = _as_probability_vector(q0)
    hit = q == q.max()
    return hit / hit.sum()


@dataclass(frozen=True)
class ContinuumProfile:
    """Density sampled on a uniform grid over [0, 1]."""

    x: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise InvalidStateError("grid and values must be 1-d arrays of equal length >= 2")
        if abs(x[0]) > 1e-12 or abs(x[-1] - 1.0) > 1e-12 or not np.allclose(np.diff(x), 1.0 / (x.size - 1), atol=1e-12):
            raise InvalidStateError("grid must be uniform on [0, 1]")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidStateError("density must be finite and nonnegative")
        if abs(self.integral(v, x) - 1.0) > 1e-6:
            raise InvalidStateError("density does not integrate to 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @staticmethod
    def integral(values, x) -> float:
        return float(np.trapezoid(values, x))

    @classmethod
    def from_samples(cls, values) -> "ContinuumProfile":
        """Normalize nonnegative samples on a uniform [0, 1] grid."""
        v = np.asarray(values, dtype=float)
        x = np.linspace(0.0, 1.0, v.size)
        total = cls.integral(v, x)
        if not total > 0:
            raise DegenerateDistributionError("profile is identically zero")
        return cls(x, v / total)

    def mass_between(self, lo: float, hi: float) -> float:
        """Integral of the piecewise-linear interpolant over [lo, hi]."""
        inner = self.x[(self.x > lo) & (self.x < hi)]
        xs = np.concatenate(([lo], inner, [hi]))
        return float(np.trapezoid(np.interp(xs, self.x, self.values), xs))


def parabolic_profile(n: int = 1001) -> ContinuumProfile:
    """6 x (1 - x), renormalized on the grid."""
    x = np.linspace(0.0, 1.0, n)
    return ContinuumProfile.from_samples(6.0 * (x - x * x))


def continuum_evolve(profile: ContinuumProfile, k: int) -> ContinuumProfile:
    """Density after ``k`` rounds: profile**(2**k) renormalized by trapezoidal quadrature."""
    if k < 0:
        raise OutOfRangeError("k must be >= 0")
    v = profile.values
    if not np.any(v > 0):
        raise DegenerateDistributionError("profile is identically zero")
    if k == 0:
        return profile
    with np.errstate(divide="ignore"):
        gap = np.log(v) - np.log(v.max())
    with np.errstate(invalid="ignore"):
        powered = np.exp(np.where(gap == 0.0, 0.0, _doubling_exponent(k) * gap))
    return ContinuumProfile.from_samples(powered)


SPIN_X = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SPIN_Y = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
# index 0 is spin down, index 1 spin up
SPIN_Z = np.diag([-0.5, 0.5]).astype(complex)


def _site_op(op: np.ndarray, site: int, n_sites: int = 3) -> np.ndarray:
    mats = [np.eye(2, dtype=complex)] * n_sites
    mats[site] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def heisenberg_block(J: float, n_sites: int = 3) -> np.ndarray:
    """Open-chain Heisenberg block J sum_i S_i . S_{i+1}, site 1 leftmost in the tensor product."""
    H = np.zeros((2**n_sites, 2**n_sites), dtype=complex)
    for s in range(n_sites - 1):
        for op in (SPIN_X, SPIN_Y, SPIN_Z):
            H += J * _site_op(op, s, n_sites) @ _site_op(op, s + 1, n_sites)
    return H


def reference_doublet_up() -> np.ndarray:
    """(2|ud u> - |d u u> - |u u d>) / sqrt 6 on three sites."""
    up, down = np.array([0, 1.0]), np.array([1.0, 0])

    def ket(*spins):
        out = spins[0]
        for s in spins[1:]:
            out = np.kron(out, s)
        return out

    return (2 * ket(up, down, up) - ket(down, up, up) - ket(up, up, down)) / np.sqrt(6)


@dataclass(frozen=True)
class QrgReport:
    ground_energy: float
    doublet_overlap: float
    edge_spin_factor: float
    ground_degeneracy: int
    renormalized_block: np.ndarray = field(repr=False)

    @property
    def coupling_factor(self) -> float:
        """Interblock coupling renormalization, the square of the edge factor."""
        return self.edge_spin_factor**2


def qrg_demo(J: float = 1.0) -> QrgReport:
    """Exactly diagonalize the three-site block and extract its doublet data.

    The Sz = +1/2 member of the computed ground doublet is compared with the
    textbook state; the edge factor is <S3z> in that state divided by 1/2.
    """
    if not J > 0:
        raise OutOfRangeError("J must be positive")
    H = heisenberg_block(J)
    energies, vecs = np.linalg.eigh(H)
    e0 = energies[0]
    ground = vecs[:, np.abs(energies - e0) < 1e-9 * J]
    sz_total = sum(_site_op(SPIN_Z, s) for s in range(3))
    m, rot = np.linalg.eigh(ground.conj().T @ sz_total @ ground)
    doublet = ground @ rot  # columns ordered Sz = -1/2, +1/2
    up_state = doublet[:, np.argmax(m)]
    overlap = float(abs(np.vdot(up_state, reference_doublet_up())) ** 2)
    edge = float(np.vdot(up_state, _site_op(SPIN_Z, 2) @ up_state).real) / 0.5
    truncation = doublet.conj().T
    return QrgReport(float(e0), overlap, edge, ground.shape[1], truncation @ H @ truncation.conj().T)
