import numpy as np
import pytest

from crosscut import phase, sim
from crosscut.rng import substream


def test_ising_n2_classical_point():
    ham = phase.ising_hamiltonian(2, 0.5, 0.0)
    assert np.allclose(np.linalg.eigvalsh(ham), [-0.5, -0.5, 0.5, 0.5])


def test_ising_n2_pure_field():
    ham = phase.ising_hamiltonian(2, 0.0, 1.0)
    state, energy = phase.exact_ground_state(ham)
    assert energy == pytest.approx(-2.0)
    assert np.allclose(np.abs(state.data), 0.5, atol=1e-10)


def test_ising_matches_dense_pauli_sum():
    n, J, h = 4, 0.5, 0.7
    ham = phase.ising_hamiltonian(n, J, h)
    from crosscut.liouville import pauli_matrix

    dense = np.zeros((2**n, 2**n), dtype=complex)
    for q in range(n - 1):
        label = "".join("Z" if i in (q, q + 1) else "I" for i in range(n))
        dense -= J * pauli_matrix(label)
    for q in range(n):
        label = "".join("X" if i == q else "I" for i in range(n))
        dense -= h * pauli_matrix(label)
    assert np.abs(ham - dense.real).max() < 1e-12


def test_ground_state_degenerate_sector_pick():
    state, energy = phase.exact_ground_state(phase.ising_hamiltonian(2, 0.5, 0.0))
    assert energy == pytest.approx(-0.5)
    expected = np.zeros(4)
    expected[0] = expected[3] = 1 / np.sqrt(2)
    assert np.abs(np.abs(state.data) - expected).max() < 1e-10
    assert state.data[0] == pytest.approx(state.data[3])  # symmetric combination


def test_ground_state_residual_small():
    ham = phase.ising_hamiltonian(5, 0.5, 1.45)
    state, energy = phase.exact_ground_state(ham)
    assert np.linalg.norm(ham @ state.data - energy * state.data) < 1e-9


def test_phase_label_limits():
    ghz = sim.run_circuit(sim.ghz_circuit(5), sim.QuantumState.zero(5))
    assert phase.phase_label(ghz) == pytest.approx(1.0, abs=1e-10)
    plus = sim.QuantumState.pure(np.ones(32) / np.sqrt(32))
    assert phase.phase_label(plus) == pytest.approx(0.2, abs=1e-10)


def test_phase_label_monotone_in_field_magnitude():
    labels = []
    for h in [v for v in phase.H_GRID if v >= 0]:
        state, _ = phase.exact_ground_state(phase.ising_hamiltonian(5, 0.5, h))
        labels.append(phase.phase_label(state))
    assert all(a >= b - 1e-12 for a, b in zip(labels, labels[1:]))


def test_ansatz_plan_matches_direct_state():
    shape = phase.AnsatzShape(5, 3)
    params = substream(1, "p").uniform(-np.pi, np.pi, shape.n_params)
    fast = phase._FastAnsatz(shape)
    via_plan = phase.ansatz_state(shape, params)
    assert np.abs(fast.state(params) - via_plan.data).max() < 1e-10


def test_ansatz_gates_are_z_rotations_in_fixed_frames():
    shape = phase.AnsatzShape(3, 1)
    plan = phase.ansatz_plan(shape, np.zeros(shape.n_params))
    names = {g.name for p in plan.parts for g in p.circuit.gates}
    assert names <= {"Rx", "Rz", "CZ"}


def test_vqe_single_point_converges():
    res = phase.vqe_optimize(5, 0.5, 1.45, layers=4, seed=1)
    assert res.converged
    assert res.energy_gap < 1e-3
    # restarting from the optimum does not move the energy
    again = phase.vqe_optimize(5, 0.5, 1.45, layers=4, seed=1, initial=res.params, restarts=1)
    assert abs(again.energy - res.energy) < 1e-3


@pytest.mark.slow
def test_vqe_grid_sweep_quality():
    results = phase.vqe_grid_sweep(5, 0.5, phase.H_GRID, layers=4, seed=1)
    shape = phase.AnsatzShape(5, 4)
    for h, res in results.items():
        assert res.converged, f"h={h} gap={res.energy_gap}"
        state = phase.ansatz_state(shape, res.params)
        exact, _ = phase.exact_ground_state(phase.ising_hamiltonian(5, 0.5, h))
        assert sim.overlap_trace(state, exact) >= 0.99


def test_exact_kernel_properties():
    states = []
    for h in (-0.45, 0.0, 0.45, 1.45):
        state, _ = phase.exact_ground_state(phase.ising_hamiltonian(4 + 1, 0.5, h))
        states.append(state)
    kernel = phase.exact_kernel(states)
    assert np.allclose(kernel.values, kernel.values.T, atol=1e-12)
    assert np.allclose(np.diag(kernel.values), 1.0, atol=1e-10)
    assert np.linalg.eigvalsh(kernel.values).min() > -1e-9


def test_svr_constant_labels_predict_constant():
    k = np.eye(4) * 0.2 + 0.8
    y = np.full(4, 0.6)
    pred = phase.svr_train_predict(k, y, k)
    assert np.abs(pred - 0.6).max() <= 0.011  # epsilon tube around the constant


def test_svr_degenerate_kernel_rejected():
    k = np.ones((3, 3))
    with pytest.raises(phase.PhaseModelError):
        phase.svr_train_predict(k, np.array([0.1, 0.2, 0.3]), k)


def test_svr_agrees_with_kernel_ridge_on_exact_grid():
    states, labels = [], []
    for h in phase.H_GRID:
        state, _ = phase.exact_ground_state(phase.ising_hamiltonian(5, 0.5, h))
        states.append(state)
        labels.append(phase.phase_label(state))
    labels = np.asarray(labels)
    kernel = phase.exact_kernel(states).values
    train = np.unique(np.linspace(0, 20, 8).round().astype(int))
    k_train = kernel[np.ix_(train, train)]
    k_cross = kernel[:, train]
    pred_svr = phase.svr_train_predict(k_train, labels[train], k_cross)
    pred_kr = phase.kernel_ridge_predict(k_train, labels[train], k_cross)
    _, mse_svr = phase.mse(pred_svr, labels)
    _, mse_kr = phase.mse(pred_kr, labels)
    assert abs(mse_svr - mse_kr) < 0.02


def test_cka_scale_invariance():
    rng = substream(3, "cka")
    k = rng.standard_normal((6, 6))
    k = k @ k.T
    assert phase.centered_kernel_alignment(k, k) == pytest.approx(1.0)
    assert phase.centered_kernel_alignment(k, 2 * k) == pytest.approx(1.0)


def test_mse_conventions():
    total, mean = phase.mse([1.0, 2.0], [1.0, 2.0])
    assert total == 0.0 and mean == 0.0
    total, mean = phase.mse([1.0, 0.0], [0.0, 0.0])
    assert total == pytest.approx(1.0)
    assert mean == pytest.approx(0.5)
    with pytest.raises(phase.PhaseModelError):
        phase.mse([1.0], [1.0, 2.0])


@pytest.mark.slow
def test_federated_kernel_entry_error_shrinks_with_snapshots():
    from crosscut.experiments import federated_phase_kernel

    sweep = phase.vqe_grid_sweep(5, 0.5, phase.H_GRID, layers=4, seed=42)
    params = [sweep[h].params for h in phase.H_GRID]
    shape = phase.AnsatzShape(5, 4)
    states = [phase.ansatz_state(shape, p) for p in params]
    exact = phase.exact_kernel(states).values
    maes = {}
    for shots in (1000, 2000):
        kernel, _ = federated_phase_kernel(
            params, n=5, layers=4, shots=shots, seed=21, distributed=False
        )
        maes[shots] = float(np.abs(kernel.values - exact).mean())
    assert maes[1000] <= 0.05
    assert maes[2000] <= 0.035


def test_learning_curve_improves_with_training_size():
    states, labels = [], []
    for h in phase.H_GRID:
        state, _ = phase.exact_ground_state(phase.ising_hamiltonian(5, 0.5, h))
        states.append(state)
        labels.append(phase.phase_label(state))
    labels = np.asarray(labels)
    kernel = phase.exact_kernel(states).values

    def mean_mse(n_train):
        out = []
        for seed in range(10):
            idx = np.sort(substream(seed, "lc", n_train).choice(21, size=n_train, replace=False))
            k_train = kernel[np.ix_(idx, idx)]
            spread = np.abs(k_train - k_train[0]).max()
            if spread < 1e-12:
                continue
            pred = phase.svr_train_predict(k_train, labels[idx], kernel[:, idx])
            out.append(phase.mse(pred, labels)[1])
        return float(np.mean(out))

    assert mean_mse(11) <= mean_mse(4)
