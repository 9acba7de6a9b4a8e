"""Brute-force density-matrix simulation of one distillation round.

The four-party space is ordered (A1, B1, A2, B2): Alice holds factors 1 and 3,
Bob holds 2 and 4, pair 1 is the source and pair 2 the target. A four-party
basis index is therefore ``source * D**2 + a2 * D + b2`` with
``source = a1 * D + b1``.

For ``D <= DENSE_LIMIT`` the round is simulated literally: rho (x) rho is
materialized, conjugated by the bilateral CNOT and the target pair is measured
outcome by outcome. Above that the D^4 x D^4 matrix no longer fits in memory,
so each outcome branch is assembled directly from entries of rho. Both paths
compute the same contraction and are cross-checked in the tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDistributionError, DimensionMismatchError, InvalidStateError, OutOfRangeError
from .gates import MAX_DIM, BellIndex, Residue, bell_basis, bell_state, check_dim, step2prime_unitaries

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
SUCCESS_FLOOR = 1e-15
FORM_TOL = 1e-10
DENSE_LIMIT = 6


def _check_density(matrix: np.ndarray, what: str, psd: bool = True) -> None:
    if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOL:
        raise InvalidStateError(f"{what} is not Hermitian")
    tr = np.trace(matrix)
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidStateError(f"{what} has trace {tr.real:.17g}, expected 1")
    if psd:
        lo = np.linalg.eigvalsh(matrix)[0]
        if lo < PSD_TOL:
            raise InvalidStateError(f"{what} has negative eigenvalue {lo:.3e}")


@dataclass(frozen=True)
class BipartiteDensity:
    """Two-qudit density matrix of shape (D^2, D^2)."""

    dim: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        D = check_dim(self.dim)
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (D * D, D * D):
            raise DimensionMismatchError(f"expected shape {(D * D, D * D)}, got {m.shape}")
        _check_density(m, "bipartite density")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_weights(cls, q) -> "BipartiteDensity":
        """Bell-diagonal state sum_kj q[k, j] |Psi_kj><Psi_kj|."""
        q = np.asarray(q, dtype=float)
        D = q.shape[0]
        B = bell_basis(D)
        return cls(D, (B * q.reshape(-1)) @ B.conj().T)

    @classmethod
    def from_pure(cls, psi: np.ndarray, D: int) -> "BipartiteDensity":
        psi = np.asarray(psi, dtype=complex)
        return cls(D, np.outer(psi, psi.conj()))

    @classmethod
    def from_mixture(cls, terms, D: int) -> "BipartiteDensity":
        """Incoherent mixture of ``(probability, ket)`` pairs."""
        m = sum(p * np.outer(v, np.conj(v)) for p, v in terms)
        return cls(D, m)


@dataclass(frozen=True)
class FourPartyDensity:
    """Density matrix on (A1, B1, A2, B2), shape (D^4, D^4)."""

    dim: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        D = self.dim
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (D**4, D**4):
            raise DimensionMismatchError(f"expected shape {(D**4, D**4)}, got {m.shape}")
        # PSD is inherited from the factors; an eigendecomposition here would dominate the run time.
        _check_density(m, "four-party density", psd=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class RoundOutcome:
    """Result of one distillation round.

    ``outcome_probabilities[zA, zB]`` is the probability of each joint target
    reading before post-selection; ``post_state`` is None when the coincidence
    probability is below ``SUCCESS_FLOOR``.
    """

    post_state: BipartiteDensity | None
    success_probability: float
    outcome_probabilities: np.ndarray = field(repr=False)


def tensor_pair(rho: BipartiteDensity, other: BipartiteDensity | None = None) -> FourPartyDensity:
    """Source pair ``rho`` and target pair ``other`` (default: a second copy of rho)."""
    other = rho if other is None else other
    if other.dim != rho.dim:
        raise DimensionMismatchError("source and target pairs differ in dimension")
    return FourPartyDensity(rho.dim, np.kron(rho.matrix, other.matrix))


def bcnot_permutation(D: int) -> np.ndarray:
    """Index map of the bilateral CNOT on (A1, B1, A2, B2).

    |a1 b1 a2 b2> -> |a1 b1 (a1 - a2) (b1 - b2)>. The map is an involution.
    """
    D = check_dim(D)
    a1, b1, a2, b2 = np.unravel_index(np.arange(D**4), (D, D, D, D))
    return np.ravel_multi_index((a1, b1, (a1 - a2) % D, (b1 - b2) % D), (D, D, D, D))


def bcnot_matrix(D: int) -> np.ndarray:
    """Dense D^4 x D^4 bilateral CNOT matrix (small D only)."""
    perm = bcnot_permutation(D)
    u = np.zeros((D**4, D**4), dtype=complex)
    u[perm, np.arange(D**4)] = 1.0
    return u


def bcnot_on_bell_pair(a: BellIndex, b: BellIndex) -> tuple[BellIndex, BellIndex]:
    """Closed-form image of |Psi_a>|Psi_b> under the bilateral CNOT.

    ((k, j), (k', j')) -> ((k + k', j), (D - k', j - j')), all mod D.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"Bell labels of dimension {a.dim} and {b.dim}")
    D = a.dim
    source = BellIndex(int(a.phase + b.phase), a.j, D)
    target = BellIndex(int(D - b.phase), int(a.shift - b.shift), D)
    return source, target


def apply_bcnot_to_pair(a: BellIndex, b: BellIndex) -> np.ndarray:
    """U_BCNOT applied to |Psi_a>(x)|Psi_b> as an explicit D^4 vector."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"Bell labels of dimension {a.dim} and {b.dim}")
    psi = np.kron(bell_state(a), bell_state(b))
    out = np.empty_like(psi)
    out[bcnot_permutation(a.dim)] = psi
    return out


def apply_bcnot(four: FourPartyDensity) -> FourPartyDensity:
    # U is a self-inverse permutation, so U X U^dag is a simultaneous row/column gather.
    perm = bcnot_permutation(four.dim)
    return FourPartyDensity(four.dim, four.matrix[np.ix_(perm, perm)])


def apply_source_unitaries(four: FourPartyDensity, u_a: np.ndarray, u_b: np.ndarray) -> FourPartyDensity:
    D = four.dim
    u = np.kron(np.kron(u_a, u_b), np.eye(D * D))
    return FourPartyDensity(D, u @ four.matrix @ u.conj().T)


def measure_targets(four: FourPartyDensity) -> np.ndarray:
    """Unnormalized source states for every target reading.

    Returns an array of shape (D, D, D^2, D^2) indexed ``[zA, zB]``: the
    source block left after projecting A2 on |zA> and B2 on |zB> and tracing
    the target pair out.
    """
    D = four.dim
    t = four.matrix.reshape(D * D, D, D, D * D, D, D)
    return np.einsum("sabtab->abst", t)


def _branches_streaming(rho: np.ndarray, D: int) -> np.ndarray:
    # branch(zA, zB)[s, s'] = rho[s, s'] * rho[s - (zA, zB), s' - (zA, zB)]
    r = rho.reshape(D, D, D, D)
    out = np.empty((D, D, D * D, D * D), dtype=complex)
    for za in range(D):
        for zb in range(D):
            shifted = np.roll(r, (za, zb, za, zb), axis=(0, 1, 2, 3))
            out[za, zb] = (r * shifted).reshape(D * D, D * D)
    return out


def _post_select(branches: np.ndarray, D: int, source_unitaries) -> RoundOutcome:
    probs = np.einsum("abss->ab", branches).real
    kept = sum(branches[z, z] for z in range(D))
    p = float(np.trace(kept).real)
    if source_unitaries is not None:
        u = np.kron(*source_unitaries)
        kept = u @ kept @ u.conj().T
    if p <= SUCCESS_FLOOR:
        return RoundOutcome(None, p, probs)
    kept = kept / p
    kept = 0.5 * (kept + kept.conj().T)
    return RoundOutcome(BipartiteDensity(D, kept), p, probs)


def round_from_four_party(four: FourPartyDensity, source_unitaries=None) -> RoundOutcome:
    """Bilateral CNOT, optional source correction, target measurement, post-selection."""
    mixed = apply_bcnot(four)
    if source_unitaries is not None:
        mixed = apply_source_unitaries(mixed, *source_unitaries)
    return _post_select(measure_targets(mixed), four.dim, None)


def distill_round_oracle(
    rho: BipartiteDensity,
    source_unitaries: tuple[np.ndarray, np.ndarray] | None = None,
    method: str = "auto",
    max_dim: int = MAX_DIM,
) -> RoundOutcome:
    """Run one round of the protocol on two copies of ``rho``.

    ``method`` is ``"dense"`` (materialize rho (x) rho), ``"streaming"``
    (assemble each target branch from rho directly) or ``"auto"``.
    """
    if not isinstance(rho, BipartiteDensity):
        raise InvalidStateError("expected a BipartiteDensity")
    D = rho.dim
    if D > max_dim:
        raise DimensionMismatchError(f"oracle capped at D={max_dim}; use the recursion for D={D}")
    if method == "auto":
        method = "dense" if D <= DENSE_LIMIT else "streaming"
    if method == "dense":
        return round_from_four_party(tensor_pair(rho), source_unitaries)
    if method == "streaming":
        return _post_select(_branches_streaming(rho.matrix, D), D, source_unitaries)
    raise ValueError(f"unknown method {method!r}")


def decompose_bell(rho: BipartiteDensity) -> np.ndarray:
    """Coefficients c[k, j, k', j'] = <Psi_kj| rho |Psi_k'j'>."""
    D = rho.dim
    B = bell_basis(D)
    return (B.conj().T @ rho.matrix @ B).reshape(D, D, D, D)


def bell_weights(rho: BipartiteDensity) -> np.ndarray:
    """Diagonal Bell coefficients as a real D x D weight matrix."""
    D = rho.dim
    c = decompose_bell(rho).reshape(D * D, D * D)
    return np.diag(c).real.reshape(D, D).copy()


def offdiagonal_leakage(rho: BipartiteDensity) -> float:
    """Largest off-diagonal Bell coefficient magnitude."""
    D = rho.dim
    c = decompose_bell(rho).reshape(D * D, D * D)
    return float(np.max(np.abs(c - np.diag(np.diag(c)))))


class QubitVariant(enum.Enum):
    """Qubit mixtures F|Phi+-><Phi+-| + (1-F)|Psi+-><Psi+-|."""

    PP = "PP"
    PM = "PM"
    MP = "MP"
    MM = "MM"


# (fidelity state, noise state) as Bell labels (k, j) with D = 2.
_VARIANT_LABELS = {
    QubitVariant.PP: ((0, 0), (0, 1)),
    QubitVariant.PM: ((0, 0), (1, 1)),
    QubitVariant.MP: ((1, 0), (0, 1)),
    QubitVariant.MM: ((1, 0), (1, 1)),
}


def variant_labels(variant: QubitVariant | str) -> tuple[BellIndex, BellIndex]:
    good, bad = _VARIANT_LABELS[QubitVariant(variant)]
    return BellIndex(*good, 2), BellIndex(*bad, 2)


def variant_state(variant: QubitVariant | str, F: float) -> BipartiteDensity:
    if not 0.0 <= F <= 1.0:
        raise OutOfRangeError(f"fidelity must lie in [0, 1], got {F}")
    good, bad = variant_labels(variant)
    q = np.zeros((2, 2))
    q[good.k, good.j] = F
    q[bad.k, bad.j] += 1.0 - F
    return BipartiteDensity.from_weights(q)


def variant_form(rho: BipartiteDensity, variant: QubitVariant | str) -> tuple[float, float]:
    """Fidelity of ``rho`` in the variant's form and the largest coefficient outside it."""
    good, bad = variant_labels(variant)
    c = decompose_bell(rho).copy()
    F = float(c[good.k, good.j, good.k, good.j].real)
    c[good.k, good.j, good.k, good.j] = 0.0
    c[bad.k, bad.j, bad.k, bad.j] = 0.0
    return F, float(np.max(np.abs(c)))


def qubit_variant_round(variant: QubitVariant | str, F: float) -> RoundOutcome:
    """One oracle round on a qubit variant with its local source correction inserted."""
    variant = QubitVariant(variant)
    rho = variant_state(variant, F)
    unitaries = None if variant is QubitVariant.PP else step2prime_unitaries(variant.value)
    return distill_round_oracle(rho, source_unitaries=unitaries)


def diagonal_ket(D: int) -> np.ndarray:
    """(1/sqrt D) sum_i |ii>."""
    v = np.zeros(D * D, dtype=complex)
    v[np.arange(D) * (D + 1)] = 1.0
    return v / np.sqrt(D)


def offdiagonal_ket(D: int) -> np.ndarray:
    """Uniform superposition of all |ij> with i != j."""
    v = np.ones(D * D, dtype=complex)
    v[np.arange(D) * (D + 1)] = 0.0
    return v / np.sqrt(D * (D - 1))


def nondiagonal_state(F: float, D: int) -> BipartiteDensity:
    """F |Psi_d><Psi_d| + (1 - F) |Psi_o><Psi_o|."""
    D = check_dim(D)
    if not 0.0 <= F <= 1.0:
        raise OutOfRangeError(f"fidelity must lie in [0, 1], got {F}")
    return BipartiteDensity.from_mixture([(F, diagonal_ket(D)), (1.0 - F, offdiagonal_ket(D))], D)


def nondiagonal_round(F: float, D: int, method: str = "auto") -> tuple[float, float]:
    """Oracle round on the diagonal/off-diagonal mixture; returns (F', success probability).

    Raises InvalidStateError if the post-selected state leaves the two-term family.
    """
    rho = nondiagonal_state(F, D)
    out = distill_round_oracle(rho, method=method)
    if out.post_state is None:
        raise DegenerateDistributionError("no coincidences")
    F_new = float(np.vdot(diagonal_ket(D), out.post_state.matrix @ diagonal_ket(D)).real)
    F_new = min(max(F_new, 0.0), 1.0)
    expected = nondiagonal_state(F_new, D)
    gap = np.max(np.abs(decompose_bell(out.post_state) - decompose_bell(expected)))
    if gap > FORM_TOL:
        raise InvalidStateError(f"post-selected state left the two-term family (gap {gap:.3e})")
    return F_new, out.success_probability


def coincidence_check(a: BellIndex, b: BellIndex) -> float:
    """Coincidence probability when the source is |Psi_a> and the target |Psi_b>."""
    four = FourPartyDensity(
        a.dim, np.kron(np.outer(bell_state(a), bell_state(a).conj()), np.outer(bell_state(b), bell_state(b).conj()))
    )
    return round_from_four_party(four).success_probability


__all__ = [
    "BipartiteDensity",
    "FourPartyDensity",
    "RoundOutcome",
    "QubitVariant",
    "Residue",
    "apply_bcnot",
    "apply_bcnot_to_pair",
    "bcnot_matrix",
    "bcnot_on_bell_pair",
    "bcnot_permutation",
    "bell_weights",
    "coincidence_check",
    "decompose_bell",
    "distill_round_oracle",
    "measure_targets",
    "nondiagonal_round",
    "nondiagonal_state",
    "offdiagonal_leakage",
    "qubit_variant_round",
    "round_from_four_party",
    "tensor_pair",
    "variant_form",
    "variant_state",
]
