"""Unitary ensembles used by the protocols.

Covers the 24-element single-qubit Clifford group, the 11520-element
two-qubit Clifford group (built by closure from generators), the 4-tuple
cut-configuration table, shared measurement-setting ensembles, stabilizer
groups for GHZ states, and Pauli bookkeeping.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .liouville import quaternary_pauli  # re-exported; shared quaternary convention
from .rng import substream
from .sim import CZ, HADAMARD, I2, PAULIS, SimulationError, rotation

__all__ = [
    "single_qubit_clifford_table",
    "two_qubit_clifford_table",
    "sample_k_clifford",
    "ConfigEntry",
    "CutConfigTable",
    "cut_config_table",
    "UnitaryEnsemble",
    "shared_ensemble",
    "StabilizerGroup",
    "ghz_stabilizers",
    "stabilizer_setting",
    "quaternary_pauli",
    "pauli_multiply",
    "conjugate_pauli_letter",
]

S_GATE = np.diag([1, 1j]).astype(complex)

# Basis-rotation subset used by the parallel cut protocol and the exhaustive
# measurement mode.  Applying U then measuring Z measures U^dag Z U, which is
# Z, Y, -X for the three entries respectively.
RX90 = rotation("X", np.pi / 2)
RY90 = rotation("Y", np.pi / 2)
EXHAUSTIVE_LABELS = ("I", "RX90", "RY90")
EXHAUSTIVE_SET = (I2, RX90, RY90)
EXHAUSTIVE_MEASURED = (("Z", 1), ("Y", 1), ("X", -1))


def phase_normalize(u: np.ndarray) -> np.ndarray:
    """Fix the global phase: first entry above tolerance becomes real positive."""
    flat = u.reshape(-1)
    idx = int(np.argmax(np.abs(flat) > 1e-8))
    ref = flat[idx]
    return u * (ref.conjugate() / abs(ref))


def _closure(generators: list[np.ndarray], expected: int) -> np.ndarray:
    """BFS closure under left multiplication, modulo global phase."""
    def key(u):
        r = np.round(phase_normalize(u), 8) + 0.0  # clear negative zeros
        return r.tobytes()

    start = phase_normalize(np.eye(generators[0].shape[0], dtype=complex))
    table = {key(start): start}
    frontier = [start]
    while frontier:
        fresh = []
        for u in frontier:
            for g in generators:
                v = phase_normalize(g @ u)
                k = key(v)
                if k not in table:
                    table[k] = v
                    fresh.append(v)
        frontier = fresh
    if len(table) != expected:
        raise RuntimeError(f"Clifford closure produced {len(table)} elements, expected {expected}")
    return np.stack(list(table.values()))


@lru_cache(maxsize=None)
def single_qubit_clifford_table() -> np.ndarray:
    """The 24 single-qubit Cliffords, phase-normalized, deterministic order."""
    return _closure([HADAMARD, S_GATE], 24)


@lru_cache(maxsize=None)
def two_qubit_clifford_table() -> np.ndarray:
    """The 11520 two-qubit Cliffords, built by closure from generators."""
    gens = [
        np.kron(HADAMARD, I2),
        np.kron(I2, HADAMARD),
        np.kron(S_GATE, I2),
        np.kron(I2, S_GATE),
        CZ,
    ]
    return _closure(gens, 11520)


def sample_k_clifford(k: int, stream: np.random.Generator) -> np.ndarray:
    """Uniform element of the k-qubit Clifford group, k in {1, 2}."""
    if k == 1:
        table = single_qubit_clifford_table()
    elif k == 2:
        table = two_qubit_clifford_table()
    else:
        raise SimulationError("Clifford sampling supports k in {1, 2} only")
    return table[int(stream.integers(len(table)))]


@lru_cache(maxsize=None)
def channels_for_cut_width(k: int) -> np.ndarray:
    """Batched transfer matrices of the full k-qubit Clifford group."""
    from .liouville import channels_of_unitaries

    table = single_qubit_clifford_table() if k == 1 else two_qubit_clifford_table()
    if k > 2:
        raise SimulationError("cut widths above 2 are not supported")
    return channels_of_unitaries(table)


@dataclass(frozen=True)
class ConfigEntry:
    """One cut configuration: Bernoulli bit, applied unitary, and its weight."""

    z: int
    label: str
    unitary: np.ndarray
    probability: float


@dataclass(frozen=True)
class CutConfigTable:
    """Discrete distribution over (z, unitary) tuples applied at a cut.

    The z=0 entries carry the three basis rotations; the z=1 entry is the
    trace-and-replace branch.  ``f_hat`` is None for the noiseless table and
    the calibrated readout factor otherwise; the signed estimator weight per
    entry is ``scale * (-1)**z * probability`` with ``scale = (2 - f) / f``
    and f = 1/3 in the noiseless case.
    """

    k1: int
    entries: tuple[ConfigEntry, ...]
    f_hat: float | None = None

    def __post_init__(self):
        total = sum(e.probability for e in self.entries)
        if abs(total - 1.0) > 1e-12:
            raise SimulationError(f"configuration probabilities sum to {total}")
        for e in self.entries:
            if e.z == 1 and e.label != "I":
                raise SimulationError("z=1 entries must use the identity unitary")

    @property
    def scale(self) -> float:
        f = 1.0 / 3.0 if self.f_hat is None else self.f_hat
        return (2.0 - f) / f

    def signed_weights(self) -> np.ndarray:
        """Per-entry weights scale * (-1)^z * probability; they sum to 1."""
        return np.array([self.scale * (-1) ** e.z * e.probability for e in self.entries])

    def z_bits(self) -> np.ndarray:
        return np.array([e.z for e in self.entries], dtype=int)


def cut_config_table(k1: int = 1, f_hat: float | None = None) -> CutConfigTable:
    """The 4-tuple configuration set for single-qubit cuts.

    Without ``f_hat`` the weights are (1/5, 1/5, 1/5, 2/5).  With a
    calibrated factor the z=0 entries carry 1/(3(2-f)) each and the z=1
    entry (1-f)/(2-f), which reduces to the noiseless table at f = 1/3.
    """
    if k1 != 1:
        raise SimulationError("configuration tables are defined for single-qubit cuts")
    if f_hat is None:
        p0, p1 = 1.0 / 5.0, 2.0 / 5.0
    else:
        if not (0.0 < f_hat < 1.0):
            raise SimulationError(f"calibration factor {f_hat} outside (0, 1)")
        p0 = 1.0 / (3.0 * (2.0 - f_hat))
        p1 = (1.0 - f_hat) / (2.0 - f_hat)
    entries = (
        ConfigEntry(0, "I", I2, p0),
        ConfigEntry(0, "RY90", RY90, p0),
        ConfigEntry(0, "RX90", RX90, p0),
        ConfigEntry(1, "I", I2, p1),
    )
    return CutConfigTable(1, entries, f_hat)


@dataclass(frozen=True)
class UnitaryEnsemble:
    """Shared measurement settings, reproducible from (part_sizes, N, seed).

    ``mode`` is "random" (per-qubit labels drawn uniformly from the
    24-element Clifford table) or "exhaustive" (all 3^k combinations of the
    basis-rotation subset).  ``labels[part]`` has shape (N_part, size).
    """

    part_sizes: tuple[int, ...]
    N: int
    seed: int
    mode: str
    labels: tuple[np.ndarray, ...]

    def counts(self) -> tuple[int, ...]:
        return tuple(lab.shape[0] for lab in self.labels)

    def setting(self, part: int, index: int) -> tuple[np.ndarray, ...]:
        table = single_qubit_clifford_table() if self.mode == "random" else EXHAUSTIVE_SET
        return tuple(table[l] for l in self.labels[part][index])

    def measured_paulis(self, part: int, index: int) -> tuple[tuple[str, int], ...]:
        """Per-qubit (letter, sign) with U^dag Z U = sign * letter."""
        out = []
        for l in self.labels[part][index]:
            if self.mode == "exhaustive":
                out.append(EXHAUSTIVE_MEASURED[l])
            else:
                u = single_qubit_clifford_table()[l]
                out.append(_heisenberg_z(u))
        return tuple(out)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.mode.encode())
        h.update(int(self.seed).to_bytes(16, "little", signed=True))
        for lab in self.labels:
            h.update(np.ascontiguousarray(lab, dtype=np.int64).tobytes())
        return h.hexdigest()


def _heisenberg_z(u: np.ndarray) -> tuple[str, int]:
    img = u.conj().T @ PAULIS["Z"] @ u
    for letter in "XYZ":
        p = PAULIS[letter]
        coeff = np.trace(p @ img) / 2.0
        if abs(coeff) > 0.5:
            return letter, int(round(coeff.real))
    raise SimulationError("unitary does not map Z to a Pauli axis")


def shared_ensemble(
    part_sizes, N: int, seed: int, mode: str = "random"
) -> UnitaryEnsemble:
    """Ensemble both platforms derive identically from the master seed."""
    part_sizes = tuple(int(s) for s in part_sizes)
    if mode == "random":
        if N < 1:
            raise SimulationError("N must be >= 1")
        labels = []
        for part, size in enumerate(part_sizes):
            stream = substream(seed, "ensemble", part)
            labels.append(stream.integers(24, size=(N, size)))
    elif mode == "exhaustive":
        labels = []
        for size in part_sizes:
            combos = np.array(list(itertools.product(range(3), repeat=size)), dtype=np.int64)
            labels.append(combos)
        N = max(lab.shape[0] for lab in labels)
    else:
        raise SimulationError(f"unknown ensemble mode {mode!r}")
    return UnitaryEnsemble(part_sizes, N, seed, mode, tuple(labels))


# ---------------------------------------------------------------------------
# Signed Pauli algebra and stabilizer groups


_MULT = {}  # (a, b) -> (phase, c) with a*b = phase * c, phase in {1, -1, 1j, -1j}
for _a in "IXYZ":
    _MULT[("I", _a)] = (1, _a)
    _MULT[(_a, "I")] = (1, _a)
    _MULT[(_a, _a)] = (1, "I")
_MULT[("X", "Y")] = (1j, "Z")
_MULT[("Y", "X")] = (-1j, "Z")
_MULT[("Y", "Z")] = (1j, "X")
_MULT[("Z", "Y")] = (-1j, "X")
_MULT[("Z", "X")] = (1j, "Y")
_MULT[("X", "Z")] = (-1j, "Y")


def pauli_multiply(a: tuple[int, str], b: tuple[int, str]) -> tuple[int, str]:
    """Product of signed Pauli strings; the result must have a real sign."""
    sign_a, s_a = a
    sign_b, s_b = b
    phase = complex(sign_a * sign_b)
    letters = []
    for ca, cb in zip(s_a, s_b):
        ph, c = _MULT[(ca, cb)]
        phase *= ph
        letters.append(c)
    if abs(phase.imag) > 1e-12:
        raise SimulationError(f"product of {s_a} and {s_b} has imaginary phase")
    return int(phase.real), "".join(letters)


@dataclass(frozen=True)
class StabilizerGroup:
    """All 2^n signed Pauli strings stabilizing a stabilizer state."""

    n: int
    generators: tuple[tuple[int, str], ...]
    elements: tuple[tuple[int, str], ...]

    def __post_init__(self):
        if len(self.elements) != 2**self.n:
            raise SimulationError(f"{len(self.elements)} elements for n={self.n}")


def _group_closure(generators: list[tuple[int, str]], n: int) -> list[tuple[int, str]]:
    elements = [(1, "I" * n)]
    seen = {elements[0]}
    # generators are involutions, so products over subsets enumerate the group
    for r in range(1, len(generators) + 1):
        for combo in itertools.combinations(range(len(generators)), r):
            acc = (1, "I" * n)
            for g in combo:
                acc = pauli_multiply(acc, generators[g])
            if acc in seen:
                raise SimulationError("stabilizer generators are not independent")
            seen.add(acc)
            elements.append(acc)
    return elements


def ghz_stabilizers(n: int) -> StabilizerGroup:
    """Group generated by X...X and the nearest-neighbour ZZ pairs."""
    if n < 2:
        raise SimulationError("GHZ stabilizers need n >= 2")
    gens = [(1, "X" * n)]
    for j in range(1, n):
        letters = "".join("Z" if q in (j - 1, j) else "I" for q in range(n))
        gens.append((1, letters))
    return StabilizerGroup(n, tuple(gens), tuple(_group_closure(gens, n)))


# Rotations satisfying U^dag Z U = letter exactly (sign +1).
_SETTING_FOR_LETTER = {
    "Z": ("I", I2),
    "I": ("I", I2),
    "X": ("RY-90", rotation("Y", -np.pi / 2)),
    "Y": ("RX90", RX90),
}


def stabilizer_setting(pauli: tuple[int, str]) -> tuple[tuple[np.ndarray, ...], tuple[int, ...]]:
    """Per-qubit rotations that diagonalize a signed Pauli string.

    Returns (rotations, support).  The rotations W satisfy
    W^dag Z...Z W = P on the support; identity factors are measured and
    marginalized (they are excluded from the parity support).
    """
    sign, letters = pauli
    rotations = []
    support = []
    for q, c in enumerate(letters):
        if c not in _SETTING_FOR_LETTER:
            raise SimulationError(f"malformed Pauli letter {c!r}")
        rotations.append(_SETTING_FOR_LETTER[c][1])
        if c != "I":
            support.append(q)
    return tuple(rotations), tuple(support)
