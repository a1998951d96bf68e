"""Exact simulation of small quantum circuits.

States are dense complex arrays, either a pure amplitude vector of length
2**n or a density matrix of shape (2**n, 2**n).  Qubit 0 is the most
significant bit of a basis-state index, so bitstrings read left to right
as qubit 0..n-1.  Dense simulation is capped at 12 qubits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 12
ATOL = 1e-10

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = {"I": I2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


class SimulationError(ValueError):
    """Raised on malformed states, gates, or dimension mismatches."""


def rotation(axis: str, theta: float) -> np.ndarray:
    """exp(-i*theta*P/2) for P in {X, Y, Z}."""
    p = PAULIS[axis]
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * p


CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


@dataclass(frozen=True)
class Gate:
    """A named unitary acting on one or two qubits."""

    name: str
    targets: tuple[int, ...]
    theta: float | None = None
    matrix: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if len(set(self.targets)) != len(self.targets):
            raise SimulationError(f"duplicate targets in gate {self.name}")
        mat = self.matrix
        if mat is None:
            mat = _builtin_matrix(self.name, self.theta)
            object.__setattr__(self, "matrix", mat)
        dim = 2 ** len(self.targets)
        if mat.shape != (dim, dim):
            raise SimulationError(f"gate {self.name}: matrix shape {mat.shape} does not match targets")
        if not np.allclose(mat @ mat.conj().T, np.eye(dim), atol=ATOL):
            raise SimulationError(f"gate {self.name} is not unitary")


def _builtin_matrix(name: str, theta: float | None) -> np.ndarray:
    if name in ("Rx", "Ry", "Rz"):
        if theta is None:
            raise SimulationError(f"{name} requires an angle")
        return rotation(name[1].upper(), theta)
    fixed = {"H": HADAMARD, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z, "CNOT": CNOT, "CZ": CZ}
    if name not in fixed:
        raise SimulationError(f"unknown gate {name}")
    return fixed[name]


def rx(q: int, theta: float) -> Gate:
    return Gate("Rx", (q,), theta)


def ry(q: int, theta: float) -> Gate:
    return Gate("Ry", (q,), theta)


def rz(q: int, theta: float) -> Gate:
    return Gate("Rz", (q,), theta)


def h(q: int) -> Gate:
    return Gate("H", (q,))


def x(q: int) -> Gate:
    return Gate("X", (q,))


def y(q: int) -> Gate:
    return Gate("Y", (q,))


def z(q: int) -> Gate:
    return Gate("Z", (q,))


def cnot(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


def cz(a: int, b: int) -> Gate:
    return Gate("CZ", (a, b))


def unitary(targets: Sequence[int], matrix: np.ndarray, name: str = "U") -> Gate:
    return Gate(name, tuple(targets), matrix=np.asarray(matrix, dtype=complex))


@dataclass(frozen=True)
class Circuit:
    """An ordered gate list on n qubits."""

    n: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if not (1 <= self.n <= MAX_QUBITS):
            raise SimulationError(f"qubit count {self.n} outside 1..{MAX_QUBITS}")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(t < 0 or t >= self.n for t in g.targets):
                raise SimulationError(f"gate {g.name} targets {g.targets} outside 0..{self.n - 1}")

    def then(self, *gates: Gate) -> "Circuit":
        return Circuit(self.n, self.gates + tuple(gates))


def ghz_circuit(n: int) -> Circuit:
    """H on qubit 0 followed by a CNOT chain."""
    return Circuit(n, tuple([h(0)] + [cnot(q, q + 1) for q in range(n - 1)]))


class QuantumState:
    """Pure amplitude vector or density matrix on n <= 12 qubits."""

    def __init__(self, data: np.ndarray, kind: str, *, validate: bool = True):
        data = np.asarray(data, dtype=complex)
        if kind == "pure":
            if data.ndim != 1:
                raise SimulationError("pure state must be a vector")
            dim = data.shape[0]
        elif kind == "density":
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise SimulationError("density state must be a square matrix")
            dim = data.shape[0]
        else:
            raise SimulationError(f"unknown state kind {kind!r}")
        n = int(round(np.log2(dim)))
        if 2**n != dim:
            raise SimulationError(f"dimension {dim} is not a power of two")
        if n > MAX_QUBITS:
            raise SimulationError(f"{n} qubits exceeds the dense-simulation cap of {MAX_QUBITS}")
        self.data = data
        self.kind = kind
        self.n = n
        if validate:
            self._check()

    def _check(self):
        if self.kind == "pure":
            norm = float(np.vdot(self.data, self.data).real)
            if abs(norm - 1.0) > ATOL:
                raise SimulationError(f"pure state norm^2 = {norm} != 1")
        else:
            tr = complex(np.trace(self.data))
            if abs(tr - 1.0) > ATOL:
                raise SimulationError(f"density trace = {tr} != 1")
            if not np.allclose(self.data, self.data.conj().T, atol=ATOL):
                raise SimulationError("density matrix is not Hermitian")
            eig = np.linalg.eigvalsh(self.data)
            if eig.min() < -1e-9:
                raise SimulationError(f"density matrix has eigenvalue {eig.min()} < -1e-9")

    @classmethod
    def pure(cls, amplitudes: np.ndarray) -> "QuantumState":
        return cls(amplitudes, "pure")

    @classmethod
    def density(cls, matrix: np.ndarray) -> "QuantumState":
        return cls(matrix, "density")

    @classmethod
    def zero(cls, n: int) -> "QuantumState":
        vec = np.zeros(2**n, dtype=complex)
        vec[0] = 1.0
        return cls(vec, "pure", validate=False)

    @classmethod
    def basis(cls, n: int, index: int) -> "QuantumState":
        vec = np.zeros(2**n, dtype=complex)
        vec[index] = 1.0
        return cls(vec, "pure", validate=False)

    def to_density(self) -> "QuantumState":
        if self.kind == "density":
            return self
        return QuantumState(np.outer(self.data, self.data.conj()), "density", validate=False)

    def copy(self) -> "QuantumState":
        return QuantumState(self.data.copy(), self.kind, validate=False)


def _apply_to_vector(vec: np.ndarray, mat: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    k = len(targets)
    tensor = vec.reshape([2] * n)
    op = mat.reshape([2] * (2 * k))
    tensor = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(targets)))
    tensor = np.moveaxis(tensor, list(range(k)), list(targets))
    return np.ascontiguousarray(tensor).reshape(-1)


def _apply_to_density(rho: np.ndarray, mat: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    k = len(targets)
    tensor = rho.reshape([2] * (2 * n))
    op = mat.reshape([2] * (2 * k))
    # ket side
    tensor = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(targets)))
    tensor = np.moveaxis(tensor, list(range(k)), list(targets))
    # bra side
    bra_axes = [n + t for t in targets]
    tensor = np.tensordot(op.conj(), tensor, axes=(list(range(k, 2 * k)), bra_axes))
    tensor = np.moveaxis(tensor, list(range(k)), bra_axes)
    return np.ascontiguousarray(tensor).reshape(2**n, 2**n)


def apply_gate(state: QuantumState, gate: Gate) -> QuantumState:
    if max(gate.targets) >= state.n:
        raise SimulationError(f"gate targets {gate.targets} exceed state qubits {state.n}")
    if state.kind == "pure":
        return QuantumState(_apply_to_vector(state.data, gate.matrix, gate.targets, state.n), "pure", validate=False)
    return QuantumState(_apply_to_density(state.data, gate.matrix, gate.targets, state.n), "density", validate=False)


def run_circuit(circuit: Circuit, initial: QuantumState) -> QuantumState:
    """Apply all gates in order; the state representation is preserved."""
    if circuit.n != initial.n:
        raise SimulationError(f"circuit on {circuit.n} qubits, state on {initial.n}")
    state = initial
    for gate in circuit.gates:
        state = apply_gate(state, gate)
    return state


def measurement_probabilities(state: QuantumState, setting: Sequence[np.ndarray | None]) -> np.ndarray:
    """Outcome distribution over {0,1}^n after per-qubit basis rotations.

    ``setting`` supplies one single-qubit unitary per qubit; ``None`` means
    identity.  The returned table is indexed by the basis-state integer.
    """
    if len(setting) != state.n:
        raise SimulationError(f"setting has {len(setting)} entries for {state.n} qubits")
    rotated = state
    for q, u in enumerate(setting):
        if u is None:
            continue
        rotated = apply_gate(rotated, unitary((q,), u, name="setting"))
    if rotated.kind == "pure":
        probs = np.abs(rotated.data) ** 2
    else:
        probs = np.diag(rotated.data).real.copy()
    total = probs.sum()
    if abs(total - 1.0) > ATOL:
        raise SimulationError(f"probabilities sum to {total}")
    np.clip(probs, 0.0, None, out=probs)
    return probs / probs.sum()


def sample_shots(probs: np.ndarray, m: int, stream: np.random.Generator) -> np.ndarray:
    """Multinomial counts over the outcome table; deterministic per stream."""
    if m < 1:
        raise SimulationError("shot count must be >= 1")
    probs = np.asarray(probs, dtype=float)
    total = probs.sum()
    if abs(total - 1.0) > 1e-8:
        raise SimulationError(f"unnormalized probability table (sum={total})")
    return stream.multinomial(m, probs / total).astype(np.int64)


def parse_pauli(pauli: str, n: int | None = None) -> tuple[int, str]:
    """Split an optional sign prefix off a Pauli string; validate letters."""
    s = pauli.strip()
    sign = 1
    if s[:1] in "+-":
        sign = -1 if s[0] == "-" else 1
        s = s[1:]
    if not s or any(c not in "IXYZ" for c in s):
        raise SimulationError(f"malformed Pauli string {pauli!r}")
    if n is not None and len(s) != n:
        raise SimulationError(f"Pauli length {len(s)} != qubit count {n}")
    return sign, s


def pauli_expectation(state: QuantumState, pauli: str) -> float:
    """tr(rho P) for a signed Pauli string (qubit 0 = leftmost letter)."""
    sign, letters = parse_pauli(pauli, state.n)
    if state.kind == "pure":
        shifted = state.data
        for q, c in enumerate(letters):
            if c != "I":
                shifted = _apply_to_vector(shifted, PAULIS[c], (q,), state.n)
        value = np.vdot(state.data, shifted).real
    else:
        shifted = state.data
        for q, c in enumerate(letters):
            if c != "I":
                k = len(letters)
                tensor = shifted.reshape([2] * (2 * state.n))
                tensor = np.tensordot(PAULIS[c], tensor, axes=([1], [q]))
                tensor = np.moveaxis(tensor, 0, q)
                shifted = tensor.reshape(2**state.n, 2**state.n)
        value = np.trace(shifted).real
    return float(sign * value)


def partial_trace(state: QuantumState, keep: Iterable[int]) -> QuantumState:
    """Reduced density matrix on the kept qubits (in ascending order)."""
    keep = sorted(set(keep))
    if not keep:
        raise SimulationError("cannot trace out every qubit")
    if any(q < 0 or q >= state.n for q in keep):
        raise SimulationError(f"keep set {keep} outside 0..{state.n - 1}")
    drop = [q for q in range(state.n) if q not in keep]
    if state.kind == "pure":
        tensor = state.data.reshape([2] * state.n)
        perm = keep + drop
        tensor = np.transpose(tensor, perm).reshape(2 ** len(keep), 2 ** len(drop))
        rho = tensor @ tensor.conj().T
    else:
        tensor = state.data.reshape([2] * (2 * state.n))
        for q in reversed(drop):
            tensor = np.trace(tensor, axis1=q, axis2=q + tensor.ndim // 2)
        rho = tensor.reshape(2 ** len(keep), 2 ** len(keep))
    return QuantumState(rho, "density", validate=False)


def overlap_trace(a: QuantumState, b: QuantumState) -> float:
    """tr(rho sigma); equals |<a|b>|^2 for pure inputs."""
    if a.n != b.n:
        raise SimulationError(f"qubit counts differ: {a.n} vs {b.n}")
    if a.kind == "pure" and b.kind == "pure":
        return float(abs(np.vdot(a.data, b.data)) ** 2)
    if a.kind == "pure":
        return float(np.vdot(a.data, b.data @ a.data).real)
    if b.kind == "pure":
        return float(np.vdot(b.data, a.data @ b.data).real)
    return float(np.einsum("ij,ji->", a.data, b.data).real)


def purity(state: QuantumState) -> float:
    return overlap_trace(state, state)


def index_to_bits(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> (n - 1 - q)) & 1 for q in range(n))


def bits_to_index(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")
