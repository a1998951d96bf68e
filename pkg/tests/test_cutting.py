import numpy as np
import pytest

from crosscut import cutting, ensembles, sim
from crosscut.ensembles import cut_config_table, shared_ensemble
from crosscut.rng import substream
from conftest import random_pair_plans


@pytest.fixture(scope="module")
def table():
    return cut_config_table()


def test_measure_prepare_channel_action(table):
    mp, tr = cutting.cut_channels(1)
    from crosscut import liouville

    proj = sim.QuantumState.density(np.diag([1.0, 0.0]).astype(complex))
    out = liouville.apply_channel(mp, proj)
    assert np.allclose(np.diag(out.data).real, [2 / 3, 1 / 3], atol=1e-12)
    mixed = sim.QuantumState.density(np.eye(2, dtype=complex) / 2)
    assert np.abs(liouville.apply_channel(mp, mixed).data - np.eye(2) / 2).max() < 1e-12
    assert np.abs(liouville.apply_channel(tr, proj).data - np.eye(2) / 2).max() < 1e-12


@pytest.mark.parametrize("k", [1, 2])
def test_identity_reconstruction(k):
    assert cutting.identity_reconstruction_error(k) < 1e-12


def test_identity_reconstruction_on_random_density():
    from crosscut import liouville

    mp, tr = cutting.cut_channels(1)
    rng = substream(3, "dens")
    mat = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    rho = mat @ mat.conj().T
    rho /= np.trace(rho)
    state = sim.QuantumState.density(rho)
    rebuilt = 3 * liouville.apply_channel(mp, state).data - 2 * liouville.apply_channel(tr, state).data
    assert np.abs(rebuilt - rho).max() < 1e-10


def test_bernoulli_masses():
    assert cutting.bernoulli_one_probability(1) == pytest.approx(2 / 5)
    assert cutting.bernoulli_one_probability(2) == pytest.approx(4 / 9)
    table = cut_config_table()
    z0 = sum(e.probability for e in table.entries if e.z == 0)
    assert z0 == pytest.approx((2**1 + 1) / (2**2 + 1))


@pytest.mark.parametrize("r,expected", [(2, 12), (3, 44), (4, 76), (5, 108)])
def test_configuration_counts_for_chains(r, expected, table):
    n = {2: 5, 3: 7, 4: 9, 5: 11}[r]
    plan = cutting.ghz_chain_plan(n, r)
    assert cutting.configuration_count(plan, table) == expected


def test_per_part_configuration_counts(table):
    plan = cutting.ghz_chain_plan(7, 3)
    sizes = [len(c) for c in cutting.enumerate_configurations(plan, table)]
    assert sizes == [4, 32, 8]


def test_enumeration_rejects_wide_cuts(table):
    stream = substream(0, "wide")
    from crosscut.oracles import random_segment

    plan = cutting.chain_cut_plan(
        4,
        [(random_segment(stream, 3), (0, 1, 2)), (random_segment(stream, 3), (1, 2, 3))],
        [(1, 2)],
    )
    with pytest.raises(sim.SimulationError):
        cutting.enumerate_configurations(plan, table)


def test_execute_part_trivial_plan_matches_measurement(table):
    circuit = sim.ghz_circuit(3)
    plan = cutting.trivial_plan(circuit)
    out = cutting.execute_part(plan, 0, {}, {}, [np.eye(2)] * 3)
    direct = sim.measurement_probabilities(
        sim.run_circuit(circuit, sim.QuantumState.zero(3)), [None] * 3
    )
    assert np.allclose(out.reshape(-1), direct, atol=1e-12)


def test_execute_part_cut_marginal(ghz5_plan, table):
    config = {0: table.entries[0]}
    out = cutting.execute_part(ghz5_plan, 0, config, {}, [np.eye(2)] * 2)
    assert out.shape == (4, 2)
    assert np.allclose(out.sum(axis=0), [0.5, 0.5], atol=1e-12)


def test_execute_part_mixed_marker_averages_basis_runs(ghz5_plan, table):
    config = {0: table.entries[0]}
    eye3 = [np.eye(2)] * 3
    mixed = cutting.execute_part(ghz5_plan, 1, config, {0: cutting.MIXED}, eye3)
    low = cutting.execute_part(ghz5_plan, 1, config, {0: 0}, eye3)
    high = cutting.execute_part(ghz5_plan, 1, config, {0: 1}, eye3)
    assert np.abs(mixed - (low + high) / 2).max() < 1e-12


def test_execute_part_missing_input_rejected(ghz5_plan, table):
    with pytest.raises(sim.SimulationError):
        cutting.execute_part(ghz5_plan, 1, {0: table.entries[0]}, {}, [np.eye(2)] * 3)


def test_execute_part_config_mismatch_rejected(ghz5_plan, table):
    with pytest.raises(sim.SimulationError):
        cutting.execute_part(ghz5_plan, 0, {}, {}, [np.eye(2)] * 2)


def test_ghz_cut_plan_shapes():
    plan5 = cutting.ghz_cut_plan(5)
    assert [p.circuit.n for p in plan5.parts] == [3, 3]
    assert plan5.setting_sizes() == (2, 3)
    plan11 = cutting.ghz_cut_plan(11)
    assert [p.circuit.n for p in plan11.parts] == [6, 6]
    with pytest.raises(sim.SimulationError):
        cutting.ghz_cut_plan(4)


def test_ghz_reconstruction_matches_uncut_state(ghz5_plan, table):
    rho = cutting.reconstruct_density(ghz5_plan, table)
    ghz = sim.run_circuit(sim.ghz_circuit(5), sim.QuantumState.zero(5)).to_density()
    assert np.abs(rho.data - ghz.data).max() < 1e-10


@pytest.mark.parametrize("seed,n,bounds", [(1, 3, (0, 1, 2)), (2, 4, (0, 2, 3)), (3, 5, (0, 2, 4))])
def test_reconstruction_on_random_circuits(seed, n, bounds, table):
    plan, _ = random_pair_plans(seed, n, bounds)
    rho = cutting.reconstruct_density(plan, table)
    target = sim.run_circuit(cutting.uncut_circuit(plan), sim.QuantumState.zero(n)).to_density()
    assert np.abs(rho.data - target.data).max() < 1e-10


def test_plan_validation_rejects_inconsistent_wires():
    circuit = sim.Circuit(2, ())
    part_a = cutting.PartSpec(circuit, (0, 1), incoming=((0, (1,)),))
    part_b = cutting.PartSpec(circuit, (1, 2), departing=((0, (0,)),))
    cutting.CutPlan(3, (part_a, part_b), (cutting.Cut((1,), 0, 1),))
    with pytest.raises(sim.SimulationError):
        # wire 2 claimed twice, wire 0 never finalized
        cutting.CutPlan(3, (part_b, part_b), (cutting.Cut((1,), 0, 1),))


def test_plan_validation_rejects_cycles():
    circuit = sim.Circuit(2, ())
    part_a = cutting.PartSpec(circuit, (0, 1), incoming=((0, (1,)),), departing=((1, (0,)),))
    part_b = cutting.PartSpec(circuit, (1, 0), incoming=((1, (1,)),), departing=((0, (0,)),))
    with pytest.raises(sim.SimulationError):
        cutting.CutPlan(2, (part_a, part_b), (cutting.Cut((1,), 0, 1), cutting.Cut((0,), 1, 0)))


def test_record_collection_determinism(ghz5_plan, table):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 2, 3)
    rec1 = cutting.collect_records(ghz5_plan, table, ens, shots=50, seed=9, platform=1)
    rec2 = cutting.collect_records(ghz5_plan, table, ens, shots=50, seed=9, platform=1)
    assert rec1.data.keys() == rec2.data.keys()
    for key in rec1.data:
        assert np.array_equal(rec1.data[key], rec2.data[key])
    other = cutting.collect_records(ghz5_plan, table, ens, shots=50, seed=9, platform=2)
    assert any(not np.array_equal(rec1.data[k], other.data[k]) for k in rec1.data)


def test_record_merge_owns_disjoint_keys(ghz5_plan, table):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 3)
    record = cutting.collect_records(ghz5_plan, table, ens, shots=10, seed=0, platform=1)
    keys = sorted(record.data)
    half_a = cutting.ShotRecord(1, 10, {k: record.data[k] for k in keys[::2]})
    half_b = cutting.ShotRecord(1, 10, {k: record.data[k] for k in keys[1::2]})
    merged = half_a.merge(half_b)
    assert merged.data.keys() == record.data.keys()


def test_record_csv_roundtrip(tmp_path, ghz5_plan, table):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 3)
    record = cutting.collect_records(ghz5_plan, table, ens, shots=40, seed=2, platform=1)
    path = tmp_path / "record.csv"
    cutting.write_record_csv(record, path)
    loaded = cutting.read_record_csv(path, shots=40)
    assert loaded.platform == 1
    for key, value in record.data.items():
        assert np.array_equal(loaded.data[key], value)


def test_record_csv_field_order(tmp_path, ghz5_plan, table):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 3)
    record = cutting.collect_records(ghz5_plan, table, ens, shots=5, seed=2, platform=1)
    path = tmp_path / "record.csv"
    cutting.write_record_csv(record, path)
    header = path.read_text().splitlines()[0]
    assert header == "platform,part,config,unitary_index,cut_input,outcome,count"
