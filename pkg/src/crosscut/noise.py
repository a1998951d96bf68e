"""Synthetic readout noise and the two mitigation layers.

Readout errors are modelled per qubit as independent bit flips with
P(read 1 | true 0) = xi and P(read 0 | true 1) = eta; noise is injected at
measurement only.  Mitigation combines a calibrated damping factor for the
cut-qubit channel with per-qubit inversion of the confusion matrices for
all other measured bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ensembles import single_qubit_clifford_table
from .liouville import ChannelMatrix, measure_prepare_channel
from .rng import substream
from .sim import QuantumState, SimulationError, apply_gate, unitary


@dataclass(frozen=True)
class ReadoutNoiseModel:
    """Per-qubit confusion parameters (xi, eta), indexed by wire."""

    xi: tuple[float, ...]
    eta: tuple[float, ...]

    def __post_init__(self):
        if len(self.xi) != len(self.eta):
            raise SimulationError("xi and eta lists differ in length")
        for a, b in zip(self.xi, self.eta):
            if not (0.0 <= a < 1.0 and 0.0 <= b < 1.0):
                raise SimulationError("flip probabilities must lie in [0, 1)")

    @classmethod
    def uniform(cls, n: int, xi: float, eta: float | None = None) -> "ReadoutNoiseModel":
        eta = xi if eta is None else eta
        return cls((xi,) * n, (eta,) * n)

    @property
    def n(self) -> int:
        return len(self.xi)

    def confusion(self, wire: int) -> np.ndarray:
        """Column-stochastic matrix taking true to recorded probabilities."""
        xi, eta = self.xi[wire], self.eta[wire]
        return np.array([[1.0 - xi, eta], [xi, 1.0 - eta]])

    def corrupt_table(self, table: np.ndarray, wires) -> np.ndarray:
        """Apply the per-bit confusion to an outcome table.

        ``wires`` lists the wire behind each bit, most significant first,
        across both axes of the (2^s, 2^c) table.
        """
        bits = len(wires)
        tensor = table.reshape([2] * bits)
        for axis, wire in enumerate(wires):
            tensor = np.tensordot(self.confusion(wire), tensor, axes=([1], [axis]))
            tensor = np.moveaxis(tensor, 0, axis)
        return tensor.reshape(table.shape)

    def to_json(self) -> str:
        rows = [{"qubit": q, "xi": self.xi[q], "eta": self.eta[q]} for q in range(self.n)]
        return json.dumps(rows, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ReadoutNoiseModel":
        rows = json.loads(text)
        rows = sorted(rows, key=lambda r: r["qubit"])
        return cls(tuple(float(r["xi"]) for r in rows), tuple(float(r["eta"]) for r in rows))


def apply_readout_noise(
    table: np.ndarray, model: ReadoutNoiseModel, wires, stream: np.random.Generator | None = None
) -> np.ndarray:
    """Corrupt a probability table or resample counts through the confusion.

    Float tables are pushed through the confusion matrices exactly; integer
    count tables are resampled shot by shot, which needs a stream.
    """
    if np.issubdtype(table.dtype, np.floating):
        return model.corrupt_table(table, wires)
    if stream is None:
        raise SimulationError("corrupting counts requires an RNG substream")
    flat = table.reshape(-1)
    bits = len(wires)
    out = np.zeros_like(flat)
    for outcome, count in enumerate(flat):
        if count == 0:
            continue
        point = np.zeros(flat.size)
        point[outcome] = 1.0
        corrupted = model.corrupt_table(point.reshape(table.shape), wires).reshape(-1)
        out += stream.multinomial(int(count), corrupted)
    return out.reshape(table.shape)


def readout_inverse(model: ReadoutNoiseModel) -> dict[int, np.ndarray]:
    """Per-qubit inverse confusion matrices (columns sum to one)."""
    out = {}
    for q in range(model.n):
        xi, eta = model.xi[q], model.eta[q]
        det = 1.0 - xi - eta
        if det <= 0.0:
            raise SimulationError(f"confusion on qubit {q} is singular (xi + eta >= 1)")
        out[q] = np.array([[1.0 - eta, -eta], [-xi, 1.0 - xi]]) / det
    return out


def mitigated_parity_weights(model: ReadoutNoiseModel) -> dict[int, np.ndarray]:
    """Alias used by the estimators: wire -> inverse confusion matrix."""
    return readout_inverse(model)


@dataclass(frozen=True)
class CalibrationReport:
    """Estimated non-identity damping of the cut-qubit measurement channel."""

    f_hat: float
    rounds: int
    per_round: tuple[float, ...] = ()

    def to_row(self) -> dict:
        return {"f_hat": self.f_hat, "rounds": self.rounds}


def noisy_measure_channel(model: ReadoutNoiseModel | None, wire: int) -> ChannelMatrix:
    """Transfer matrix of measure-and-prepare followed by recorded-bit flips."""
    m = measure_prepare_channel(1).matrix
    if model is None:
        return ChannelMatrix(1, m)
    conf = model.confusion(wire)
    basis_states = [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
    from .liouville import to_liouville

    vecs = np.stack([to_liouville(b, 1) for b in basis_states])
    lam = np.einsum("si,ts,tj->ij", vecs, conf, vecs).real  # classical flip channel
    return ChannelMatrix(1, lam @ m)


def exact_cut_factor(model: ReadoutNoiseModel | None, wire: int = 0) -> float:
    """tr over the non-identity sector of the twirl-averaged noisy channel.

    Computed directly from the channel matrix; equals 1/3 when noiseless
    and (1 - xi - eta)/3 under independent bit flips.
    """
    chan = noisy_measure_channel(model, wire).matrix
    return float(np.trace(chan[1:, 1:]) / 3.0)


def calibrate_cut_factor(
    model: ReadoutNoiseModel | None,
    T: int,
    seed: int,
    *,
    platform: int = 1,
    wire: int = 0,
    exact: bool = False,
) -> CalibrationReport:
    """Estimate the cut-channel damping factor from single-qubit probes.

    Each round applies a random Clifford inverse to |0>, measures through
    the (possibly noisy) readout, and scores 2 * |<0|C|s>|^2 - 1; the mean
    over rounds estimates the damping factor.  Exact mode averages over the
    whole 24-element table analytically instead of sampling.
    """
    if T < 1:
        raise SimulationError("calibration needs at least one round")
    table = single_qubit_clifford_table()
    if exact:
        return CalibrationReport(exact_cut_factor(model, wire), T)
    # Per element: corrupted P(read 0) after C^dag|0>, and the score for each
    # recorded outcome, 2 * |<0|C|s>|^2 - 1.
    p_zero = np.empty(len(table))
    scores = np.empty((len(table), 2))
    for i, c in enumerate(table):
        probs = np.abs(c.conj().T[:, 0]) ** 2
        if model is not None:
            probs = model.corrupt_table(probs.reshape(2, 1), [wire]).reshape(-1)
        p_zero[i] = probs[0]
        scores[i] = 2.0 * np.abs(c[0, :]) ** 2 - 1.0
    stream = substream(seed, "calibration", platform)
    idx = stream.integers(len(table), size=T)
    outcome = (stream.random(T) >= p_zero[idx]).astype(int)
    values = scores[idx, outcome]
    return CalibrationReport(float(values.mean()), T, tuple(values))


def depolarize_qubit(state: QuantumState, qubit: int, p: float) -> QuantumState:
    """(1-p) rho + p * (I/2 (x) tr_q rho); returns a density state."""
    rho = state.to_density()
    from .sim import PAULIS

    mixed = rho.data * (1.0 - p)
    for letter in "IXYZ":
        gate = unitary((qubit,), PAULIS[letter], name="dep")
        mixed += (p / 4.0) * apply_gate(rho, gate).data
    return QuantumState(mixed, "density", validate=False)
