"""Pauli-transfer (Liouville) representation of operators and channels.

Operators on k qubits are expanded in the orthonormal basis P_j / sqrt(2^k),
where P_j is the j-th Pauli string in quaternary order (digit 0..3 maps to
I, X, Y, Z; the most significant digit is qubit 0).  A channel becomes a
real 4^k x 4^k matrix acting on those coefficient vectors; for any
trace-preserving channel the identity row is (1, 0, ..., 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sim import ATOL, PAULIS, QuantumState, SimulationError

PAULI_LETTERS = "IXYZ"


def quaternary_pauli(index: int, n: int) -> str:
    """Pauli string for a base-4 index; digit order matches qubit order."""
    if not (0 <= index < 4**n):
        raise SimulationError(f"Pauli index {index} outside 0..{4 ** n - 1}")
    digits = []
    for _ in range(n):
        digits.append(PAULI_LETTERS[index % 4])
        index //= 4
    return "".join(reversed(digits))


def pauli_matrix(letters: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for c in letters:
        out = np.kron(out, PAULIS[c])
    return out


@lru_cache(maxsize=None)
def pauli_basis(k: int) -> np.ndarray:
    """Stack of the 4^k Pauli matrices in quaternary order, shape (4^k, 2^k, 2^k)."""
    return np.stack([pauli_matrix(quaternary_pauli(j, k)) for j in range(4**k)])


def to_liouville(op: np.ndarray, k: int) -> np.ndarray:
    """Coefficients of an operator in the normalized Pauli basis."""
    basis = pauli_basis(k)
    d = 2**k
    return np.einsum("jab,ba->j", basis, op) / np.sqrt(d)


def from_liouville(vec: np.ndarray, k: int) -> np.ndarray:
    basis = pauli_basis(k)
    d = 2**k
    return np.einsum("j,jab->ab", vec, basis) / np.sqrt(d)


@dataclass(frozen=True)
class ChannelMatrix:
    """A channel as a real matrix in the normalized Pauli basis."""

    k: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = 4**self.k
        if self.matrix.shape != (dim, dim):
            raise SimulationError(f"channel matrix shape {self.matrix.shape} != ({dim}, {dim})")

    def check_trace_preserving(self, atol: float = ATOL) -> None:
        row = self.matrix[0]
        expected = np.zeros_like(row)
        expected[0] = 1.0
        if np.max(np.abs(row - expected)) > atol:
            raise SimulationError("identity row of channel matrix is not (1, 0, ..., 0)")

    def __matmul__(self, other: "ChannelMatrix") -> "ChannelMatrix":
        if self.k != other.k:
            raise SimulationError("channel qubit counts differ")
        return ChannelMatrix(self.k, self.matrix @ other.matrix)


def channel_of_unitary(u: np.ndarray) -> ChannelMatrix:
    d = u.shape[0]
    k = int(round(np.log2(d)))
    basis = pauli_basis(k)
    mat = np.einsum("iab,bc,jcd,ad->ij", basis, u, basis, u.conj()) / d
    return ChannelMatrix(k, mat.real)


def channels_of_unitaries(us: np.ndarray) -> np.ndarray:
    """Batched transfer matrices, shape (len(us), 4^k, 4^k)."""
    d = us.shape[-1]
    k = int(round(np.log2(d)))
    basis = pauli_basis(k)
    mats = np.einsum("iab,nbc,jcd,nad->nij", basis, us, basis, us.conj(), optimize=True) / d
    return mats.real


def channel_of_kraus(kraus: list[np.ndarray]) -> ChannelMatrix:
    d = kraus[0].shape[0]
    k = int(round(np.log2(d)))
    basis = pauli_basis(k)
    mat = np.zeros((4**k, 4**k))
    for op in kraus:
        mat += (np.einsum("iab,bc,jcd,ad->ij", basis, op, basis, op.conj()) / d).real
    return ChannelMatrix(k, mat)


def measure_prepare_channel(k: int) -> ChannelMatrix:
    """Computational-basis measure-and-prepare: X -> sum_s <s|X|s> |s><s|."""
    d = 2**k
    vecs = np.stack([to_liouville(np.diag(np.eye(d)[s]), k) for s in range(d)])
    mat = np.einsum("si,sj->ij", vecs, vecs.conj())
    return ChannelMatrix(k, mat.real)


def apply_channel(channel: ChannelMatrix, state: QuantumState) -> QuantumState:
    if state.n != channel.k:
        raise SimulationError("channel and state qubit counts differ")
    rho = state.to_density().data
    vec = channel.matrix @ to_liouville(rho, channel.k)
    return QuantumState(from_liouville(vec, channel.k), "density", validate=False)


def identity_channel(k: int) -> ChannelMatrix:
    return ChannelMatrix(k, np.eye(4**k))


def nonidentity_projector(k: int) -> ChannelMatrix:
    """Projector onto the span of the non-identity Pauli directions."""
    mat = np.eye(4**k)
    mat[0, 0] = 0.0
    return ChannelMatrix(k, mat)
