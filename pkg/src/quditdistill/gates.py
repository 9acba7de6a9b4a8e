"""Modular index arithmetic, qudit gates and the generalized Bell basis.

Two-qudit kets |a>|b> are stored row-major: basis index ``a * D + b``.
Every module in the package shares this ordering.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidDimensionError, UnsupportedVariantError

UNITARY_TOL = 1e-12
MAX_DIM = 16


def check_dim(D: int) -> int:
    if isinstance(D, bool) or int(D) != D or D < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {D!r}")
    return int(D)


@dataclass(frozen=True)
class Residue:
    """An integer modulo ``dim`` supporting the circled plus/minus operations."""

    value: int
    dim: int

    def __post_init__(self):
        check_dim(self.dim)
        object.__setattr__(self, "value", int(self.value) % self.dim)

    def _other(self, other) -> int:
        if isinstance(other, Residue):
            if other.dim != self.dim:
                raise DimensionMismatchError(f"residues mod {self.dim} and mod {other.dim}")
            return other.value
        return int(other)

    def __add__(self, other) -> "Residue":
        return Residue(self.value + self._other(other), self.dim)

    def __sub__(self, other) -> "Residue":
        return Residue(self.value - self._other(other), self.dim)

    def __rsub__(self, other) -> "Residue":
        return Residue(int(other) - self.value, self.dim)

    def __neg__(self) -> "Residue":
        return Residue(-self.value, self.dim)

    def __int__(self) -> int:
        return self.value

    def __index__(self) -> int:
        return self.value


@dataclass(frozen=True)
class BellIndex:
    """Label (k, j) of the generalized Bell state: k is the phase index, j the shift."""

    k: int
    j: int
    dim: int

    def __post_init__(self):
        check_dim(self.dim)
        object.__setattr__(self, "k", int(self.k) % self.dim)
        object.__setattr__(self, "j", int(self.j) % self.dim)

    @property
    def phase(self) -> Residue:
        return Residue(self.k, self.dim)

    @property
    def shift(self) -> Residue:
        return Residue(self.j, self.dim)

    @classmethod
    def all(cls, D: int) -> list["BellIndex"]:
        """All D*D labels in (k, j) row-major order."""
        D = check_dim(D)
        return [cls(k, j, D) for k in range(D) for j in range(D)]


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) < tol)


def qft_matrix(D: int) -> np.ndarray:
    """Quantum Fourier transform, entry (y, k) = exp(2 pi i k y / D) / sqrt(D)."""
    D = check_dim(D)
    y = np.arange(D)
    return np.exp(2j * np.pi * np.outer(y, y) / D) / np.sqrt(D)


def cnot_permutation(D: int) -> np.ndarray:
    """Index map of the generalized CNOT: ``perm[a*D + b] = a*D + (a - b) mod D``."""
    D = check_dim(D)
    a, b = np.divmod(np.arange(D * D), D)
    return a * D + (a - b) % D


def cnot_matrix(D: int) -> np.ndarray:
    """Generalized CNOT |i>|j> -> |i>|i - j mod D> as a D^2 x D^2 permutation matrix.

    Unlike the "add" generalization this gate is Hermitian as well as unitary.
    """
    D = check_dim(D)
    perm = cnot_permutation(D)
    u = np.zeros((D * D, D * D), dtype=complex)
    u[perm, np.arange(D * D)] = 1.0
    return u


def bell_state(idx: BellIndex) -> np.ndarray:
    """|Psi_kj> = D^{-1/2} sum_y exp(2 pi i k y / D) |y>|y - j>."""
    D, k, j = idx.dim, idx.k, idx.j
    y = np.arange(D)
    psi = np.zeros(D * D, dtype=complex)
    psi[y * D + (y - j) % D] = np.exp(2j * np.pi * k * y / D) / np.sqrt(D)
    return psi


def bell_state_from_gates(idx: BellIndex) -> np.ndarray:
    """Same state built as U_CNOT (U_F|k> tensor |j>)."""
    D = idx.dim
    ket_k = np.zeros(D, dtype=complex)
    ket_k[idx.k] = 1.0
    ket_j = np.zeros(D, dtype=complex)
    ket_j[idx.j] = 1.0
    return cnot_matrix(D) @ np.kron(qft_matrix(D) @ ket_k, ket_j)


def bell_basis(D: int) -> np.ndarray:
    """Columns are the Bell states, column ``k * D + j`` holding |Psi_kj>."""
    return np.column_stack([bell_state(idx) for idx in BellIndex.all(D)])


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class Step2Variant(enum.Enum):
    """Qubit mixtures needing a local correction on the source pair.

    The names give the signs of the (Phi, Psi) Bell states in the mixture.
    """

    PLUS_MINUS = "PM"
    MINUS_PLUS = "MP"
    MINUS_MINUS = "MM"


def step2prime_unitaries(variant: Step2Variant | str, D: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Local unitaries (U_A, U_B) Alice and Bob apply to their source qubits."""
    if D != 2:
        raise UnsupportedVariantError(f"source corrections exist only for qubits, got D={D}")
    variant = Step2Variant(variant)
    if variant is Step2Variant.PLUS_MINUS:
        return 0.5 * (1 + 1j) * (SIGMA_X + SIGMA_Y), 0.5 * (1 - 1j) * (SIGMA_X - SIGMA_Y)
    if variant is Step2Variant.MINUS_PLUS:
        u = 0.5 * (1 + 1j) * (SIGMA_X + SIGMA_Y)
        return u, u.copy()
    return SIGMA_Z.copy(), IDENTITY_2.copy()
