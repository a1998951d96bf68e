import numpy as np
import pytest

from crosscut import liouville, sim
from crosscut.rng import substream


def test_hadamard_on_zero():
    state = sim.run_circuit(sim.Circuit(1, (sim.h(0),)), sim.QuantumState.zero(1))
    assert np.allclose(state.data, [1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_cnot_makes_bell_state():
    plus0 = sim.QuantumState.pure(np.array([1, 0, 1, 0]) / np.sqrt(2))
    bell = sim.run_circuit(sim.Circuit(2, (sim.cnot(0, 1),)), plus0)
    assert np.allclose(bell.data, np.array([1, 0, 0, 1]) / np.sqrt(2))


def test_ghz5_amplitudes():
    state = sim.run_circuit(sim.ghz_circuit(5), sim.QuantumState.zero(5))
    expected = np.zeros(32)
    expected[0] = expected[31] = 1 / np.sqrt(2)
    assert np.allclose(state.data, expected)


def test_dimension_mismatch_raises():
    with pytest.raises(sim.SimulationError):
        sim.run_circuit(sim.ghz_circuit(3), sim.QuantumState.zero(2))


def test_qubit_cap_enforced():
    with pytest.raises(sim.SimulationError):
        sim.QuantumState.zero(13)


def test_measurement_probabilities_basic():
    zero = sim.QuantumState.zero(1)
    assert np.allclose(sim.measurement_probabilities(zero, [None]), [1.0, 0.0])
    assert np.allclose(sim.measurement_probabilities(zero, [sim.HADAMARD]), [0.5, 0.5])


def test_measurement_probabilities_ghz3():
    ghz = sim.run_circuit(sim.ghz_circuit(3), sim.QuantumState.zero(3))
    probs = sim.measurement_probabilities(ghz, [None] * 3)
    assert probs[0] == pytest.approx(0.5, abs=1e-10)
    assert probs[7] == pytest.approx(0.5, abs=1e-10)
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)


def test_sample_shots_deterministic_distribution():
    counts = sim.sample_shots(np.array([1.0, 0.0]), 100, substream(0, "a"))
    assert counts.tolist() == [100, 0]


def test_sample_shots_same_stream_same_counts():
    a = sim.sample_shots(np.array([0.3, 0.7]), 500, substream(3, "x"))
    b = sim.sample_shots(np.array([0.3, 0.7]), 500, substream(3, "x"))
    assert np.array_equal(a, b)


def test_sample_shots_binomial_concentration():
    counts = sim.sample_shots(np.array([0.5, 0.5]), 10000, substream(1, "fair"))
    assert abs(counts[0] / 10000 - 0.5) < 0.05


def test_sample_shots_rejects_unnormalized():
    with pytest.raises(sim.SimulationError):
        sim.sample_shots(np.array([0.5, 0.4]), 10, substream(0, "bad"))


def test_pauli_expectations():
    ghz = sim.run_circuit(sim.ghz_circuit(5), sim.QuantumState.zero(5))
    assert sim.pauli_expectation(ghz, "XXXXX") == pytest.approx(1.0, abs=1e-10)
    assert sim.pauli_expectation(ghz, "ZIIII") == pytest.approx(0.0, abs=1e-10)
    assert sim.pauli_expectation(sim.QuantumState.zero(1), "Z") == pytest.approx(1.0)
    assert sim.pauli_expectation(ghz, "-XXXXX") == pytest.approx(-1.0, abs=1e-10)


def test_pauli_expectation_rejects_malformed():
    with pytest.raises(sim.SimulationError):
        sim.pauli_expectation(sim.QuantumState.zero(2), "XA")


def test_partial_trace_bell():
    bell = sim.QuantumState.pure(np.array([1, 0, 0, 1]) / np.sqrt(2))
    reduced = sim.partial_trace(bell, [0])
    assert np.allclose(reduced.data, np.eye(2) / 2, atol=1e-10)


def test_partial_trace_product():
    plus = np.array([1, 1]) / np.sqrt(2)
    state = sim.QuantumState.pure(np.kron([1, 0], plus))
    reduced = sim.partial_trace(state, [1])
    assert np.allclose(reduced.data, np.outer(plus, plus), atol=1e-10)


def test_partial_trace_ghz3():
    ghz = sim.run_circuit(sim.ghz_circuit(3), sim.QuantumState.zero(3))
    reduced = sim.partial_trace(ghz, [0, 1])
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.5
    assert np.allclose(reduced.data, expected, atol=1e-10)
    assert np.trace(reduced.data).real == pytest.approx(1.0, abs=1e-10)


def test_partial_trace_empty_keep_rejected():
    with pytest.raises(sim.SimulationError):
        sim.partial_trace(sim.QuantumState.zero(2), [])


def test_overlap_trace():
    ghz = sim.run_circuit(sim.ghz_circuit(4), sim.QuantumState.zero(4))
    zero = sim.QuantumState.zero(4)
    one = sim.QuantumState.basis(1, 1)
    assert sim.overlap_trace(ghz, ghz) == pytest.approx(1.0)
    assert sim.overlap_trace(sim.QuantumState.zero(1), one) == pytest.approx(0.0)
    assert sim.overlap_trace(zero, ghz) == pytest.approx(0.5)


def test_unitarity_preserved_deep_random_circuit():
    rng = substream(11, "deep")
    gates = []
    for _ in range(100):
        q = int(rng.integers(4))
        gates.append(sim.ry(q, float(rng.uniform(0, 2 * np.pi))))
        a, b = rng.choice(4, size=2, replace=False)
        gates.append(sim.cnot(int(a), int(b)))
    state = sim.run_circuit(sim.Circuit(4, tuple(gates)), sim.QuantumState.zero(4))
    assert abs(np.vdot(state.data, state.data).real - 1.0) < 1e-10


def test_nonunitary_gate_rejected():
    with pytest.raises(sim.SimulationError):
        sim.unitary((0,), np.array([[1.0, 0.0], [0.0, 0.5]]))


@pytest.mark.parametrize("k", [1, 2])
def test_channel_matrix_agrees_with_direct_evolution(k):
    rng = substream(21, "chan", k)
    mats = rng.standard_normal((2**k, 2**k)) + 1j * rng.standard_normal((2**k, 2**k))
    u = np.linalg.qr(mats)[0]
    chan = liouville.channel_of_unitary(u)
    chan.check_trace_preserving()
    vec = rng.standard_normal(2**k) + 1j * rng.standard_normal(2**k)
    vec /= np.linalg.norm(vec)
    state = sim.QuantumState.pure(vec)
    via_channel = liouville.apply_channel(chan, state)
    direct = u @ state.to_density().data @ u.conj().T
    assert np.abs(via_channel.data - direct).max() < 1e-10


def test_kraus_channel_matches_direct_evolution():
    rng = substream(14, "kraus")
    p = 0.2
    kraus = [np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * sim.PAULI_X]
    chan = liouville.channel_of_kraus(kraus)
    chan.check_trace_preserving()
    vec = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    vec /= np.linalg.norm(vec)
    rho = np.outer(vec, vec.conj())
    direct = sum(k @ rho @ k.conj().T for k in kraus)
    via = liouville.apply_channel(chan, sim.QuantumState.density(rho))
    assert np.abs(via.data - direct).max() < 1e-10


def test_measure_prepare_channel_matches_explicit_sum():
    chan = liouville.measure_prepare_channel(1)
    rng = substream(8, "mp")
    vec = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    vec /= np.linalg.norm(vec)
    rho = np.outer(vec, vec.conj())
    expected = np.diag(np.diag(rho))
    got = liouville.apply_channel(chan, sim.QuantumState.density(rho))
    assert np.abs(got.data - expected).max() < 1e-10


def test_probabilities_reproduce_pauli_expectation():
    ghz = sim.run_circuit(sim.ghz_circuit(3), sim.QuantumState.zero(3))
    # measure X on every qubit through the basis rotation satisfying
    # W^dag Z W = X, then form the parity
    w = sim.rotation("Y", -np.pi / 2)
    probs = sim.measurement_probabilities(ghz, [w, w, w])
    parity = np.array([(-1) ** bin(i).count("1") for i in range(8)])
    assert probs @ parity == pytest.approx(sim.pauli_expectation(ghz, "XXX"), abs=1e-10)


def test_bit_helpers_roundtrip():
    assert sim.index_to_bits(5, 4) == (0, 1, 0, 1)
    assert sim.bits_to_index((0, 1, 0, 1)) == 5
    assert sim.bitstring(5, 4) == "0101"
