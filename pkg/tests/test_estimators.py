import numpy as np
import pytest

from crosscut import cutting, ensembles, estimators, oracles, sim
from crosscut.ensembles import cut_config_table, ghz_stabilizers, shared_ensemble
from crosscut.estimators import (
    EstimationBudget,
    EstimationError,
    StabilizerSettings,
    collision_cp_estimate,
    cross_platform_fidelity,
    distance_cp_estimate,
    hamming_distance,
    multi_cut_estimate,
    parallel_single_cut_estimate,
    purity_estimate,
    stabilizer_fidelity_estimate,
)
from crosscut.rng import substream
from conftest import output_overlap, random_pair_plans

TABLE = cut_config_table()


def test_hamming_distance_examples():
    assert hamming_distance("101", "101") == 0
    assert hamming_distance("00", "11") == 2
    assert hamming_distance("0110", "1110") == 1
    with pytest.raises(EstimationError):
        hamming_distance("01", "011")


def test_budget_rejects_nonpositive():
    with pytest.raises(EstimationError):
        EstimationBudget(N=0)


def _manual_record(tables, shots=None, platform=1):
    rec = cutting.ShotRecord(platform, shots)
    for t, tbl in enumerate(tables):
        rec.data[(0, (), (), t)] = np.asarray(tbl, dtype=float if shots is None else np.int64).reshape(-1, 1)
    return rec


class _FixedCounts:
    def __init__(self, n):
        self.n = n

    def counts(self):
        return (self.n,)


def test_distance_estimate_single_setting_plugins():
    p = _manual_record([[1.0, 0.0]])
    q = _manual_record([[1.0, 0.0]])
    est = distance_cp_estimate(p, q, _FixedCounts(1), 1)
    assert est.value == pytest.approx(2.0)
    flat = _manual_record([[0.5, 0.5]])
    est = distance_cp_estimate(flat, flat, _FixedCounts(1), 1)
    assert est.value == pytest.approx(0.5)


def test_distance_estimate_exact_equals_overlap():
    plan_p, plan_q = random_pair_plans(12, 3, (0, 1, 2))
    tp = cutting.trivial_plan(cutting.uncut_circuit(plan_p))
    tq = cutting.trivial_plan(cutting.uncut_circuit(plan_q))
    ens = shared_ensemble((3,), 1, 0, mode="exhaustive")
    rp = cutting.collect_records(tp, TABLE, ens, shots=None, seed=0, platform=1)
    rq = cutting.collect_records(tq, TABLE, ens, shots=None, seed=0, platform=2)
    est = distance_cp_estimate(rp, rq, ens, 3)
    assert est.value == pytest.approx(output_overlap(plan_p, plan_q), abs=1e-10)


def test_collision_plugins():
    p = _manual_record([[1, 0]], shots=1)
    q = _manual_record([[1, 0]], shots=1)
    assert collision_cp_estimate(p, q, 1, 1).value == pytest.approx(2.0)
    q2 = _manual_record([[0, 1]], shots=1)
    assert collision_cp_estimate(p, q2, 1, 1).value == pytest.approx(-1.0)


def test_collision_design_expectation_on_zero_state():
    circuit = sim.Circuit(2, ())
    rp = estimators.collect_global_records(circuit, 400, None, 5, 1)
    rq = estimators.collect_global_records(circuit, 400, None, 5, 2)
    est = collision_cp_estimate(rp, rq, 2, 400)
    assert est.value == pytest.approx(1.0, abs=4 * est.std_error)
    # the Haar second-moment expectation is exactly the overlap
    assert oracles.haar_second_moment_collision(1.0, 4) == pytest.approx(1.0)


def test_collision_rejects_large_n():
    with pytest.raises(EstimationError):
        estimators.collect_global_records(sim.Circuit(5, ()), 2, 10, 0, 1)


def test_parallel_coefficient_z1_pair():
    w = TABLE.signed_weights()
    assert w[3] * w[3] == pytest.approx(4.0)  # 25 * (-1)^(1+1) * (2/5)^2


def test_parallel_exact_ghz5(ghz5_plan):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 0, mode="exhaustive")
    rp = cutting.collect_records(ghz5_plan, TABLE, ens, shots=None, seed=0, platform=1)
    rq = cutting.collect_records(ghz5_plan, TABLE, ens, shots=None, seed=0, platform=2)
    est = parallel_single_cut_estimate(rp, rq, ghz5_plan, TABLE, TABLE, ens)
    assert est.value == pytest.approx(1.0, abs=1e-10)


def test_parallel_exact_ghz5_vs_zero(ghz5_plan):
    zero_plan = cutting.chain_cut_plan(
        5,
        [(sim.Circuit(3, ()), (0, 1, 2)), (sim.Circuit(3, ()), (2, 3, 4))],
        [2],
    )
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 0, mode="exhaustive")
    rp = cutting.collect_records(ghz5_plan, TABLE, ens, shots=None, seed=0, platform=1)
    rq = cutting.collect_records(zero_plan, TABLE, ens, shots=None, seed=0, platform=2)
    est = parallel_single_cut_estimate(rp, rq, ghz5_plan, TABLE, TABLE, ens)
    assert est.value == pytest.approx(0.5, abs=1e-10)


def test_parallel_platform_swap_symmetry(ghz5_plan):
    plan_p, plan_q = random_pair_plans(4, 5, (0, 2, 4))
    ens = shared_ensemble(plan_p.setting_sizes(), 2, 1)
    rp = cutting.collect_records(plan_p, TABLE, ens, shots=200, seed=1, platform=1)
    rq = cutting.collect_records(plan_q, TABLE, ens, shots=200, seed=1, platform=2)
    forward = parallel_single_cut_estimate(rp, rq, plan_p, TABLE, TABLE, ens)
    backward = parallel_single_cut_estimate(rq, rp, plan_q, TABLE, TABLE, ens)
    assert forward.value == pytest.approx(backward.value, abs=1e-12)


def test_multicut_weights_contain_fourth_power_prefactor():
    # two single-qubit cuts: the enumerated pair weights scale as 5^(2*k2) = 625
    plan = cutting.ghz_chain_plan(7, 3)
    options = estimators._assignment_options(plan, TABLE, None)
    # the all-(z=1) assignment has weight (5 * 2/5)^k2 = 2^k2 per platform
    w_last = [w for tags, w, z in options if z == (1, 1)]
    assert w_last[0] == pytest.approx(4.0)
    total_scale = TABLE.scale ** (2 * plan.k2)
    assert total_scale == pytest.approx(625.0)


def test_multicut_matches_parallel_on_single_cut(ghz5_plan):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 2, 8)
    rp = cutting.collect_records(ghz5_plan, TABLE, ens, shots=100, seed=3, platform=1)
    rq = cutting.collect_records(ghz5_plan, TABLE, ens, shots=100, seed=3, platform=2)
    a = parallel_single_cut_estimate(rp, rq, ghz5_plan, TABLE, TABLE, ens)
    b = multi_cut_estimate(rp, rq, ghz5_plan, ens, table_p=TABLE)
    assert a.value == pytest.approx(b.value, abs=1e-12)


def test_multicut_exact_ghz7_two_cuts():
    plan = cutting.ghz_chain_plan(7, 3)
    ens = shared_ensemble(plan.setting_sizes(), 1, 0, mode="exhaustive")
    rp = cutting.collect_records(plan, TABLE, ens, shots=None, seed=0, platform=1)
    rq = cutting.collect_records(plan, TABLE, ens, shots=None, seed=0, platform=2)
    est = multi_cut_estimate(rp, rq, plan, ens, table_p=TABLE)
    assert est.value == pytest.approx(1.0, abs=1e-9)


def test_multicut_sampled_rounds_unbiased_small_case():
    plan = cutting.ghz_cut_plan(3)
    ens = shared_ensemble(plan.setting_sizes(), 1, 0, mode="exhaustive")
    values = []
    for trial in range(40):
        ap = estimators.sample_cut_assignments(plan, 2, 600 + trial, 1)
        aq = estimators.sample_cut_assignments(plan, 2, 600 + trial, 2)
        rp = cutting.collect_records_sampled(plan, ap, ens, shots=None, seed=0, platform=1)
        rq = cutting.collect_records_sampled(plan, aq, ens, shots=None, seed=0, platform=2)
        values.append(
            multi_cut_estimate(rp, rq, plan, ens, assignments_p=ap, assignments_q=aq).value
        )
    values = np.asarray(values)
    se = values.std(ddof=1) / np.sqrt(values.size)
    assert values.mean() == pytest.approx(1.0, abs=4 * se)


def test_l_round_averaging_shrinks_variance():
    plan = cutting.ghz_cut_plan(3)
    ens = shared_ensemble(plan.setting_sizes(), 1, 0, mode="exhaustive")

    def trial_values(L, base):
        out = []
        for trial in range(30):
            ap = estimators.sample_cut_assignments(plan, L, base + trial, 1)
            aq = estimators.sample_cut_assignments(plan, L, base + trial, 2)
            rp = cutting.collect_records_sampled(plan, ap, ens, shots=None, seed=0, platform=1)
            rq = cutting.collect_records_sampled(plan, aq, ens, shots=None, seed=0, platform=2)
            out.append(
                multi_cut_estimate(rp, rq, plan, ens, assignments_p=ap, assignments_q=aq).value
            )
        return np.asarray(out)

    var1 = trial_values(1, 100).var(ddof=1)
    var4 = trial_values(4, 900).var(ddof=1)
    ratio = var1 / var4
    assert 16 / 4 < ratio < 16 * 4  # L^2 = 16 within statistical slack


def test_ensemble_mismatch_rejected(ghz5_plan):
    ens_a = shared_ensemble(ghz5_plan.setting_sizes(), 2, 1)
    ens_b = shared_ensemble(ghz5_plan.setting_sizes(), 2, 2)
    rp = cutting.collect_records(ghz5_plan, TABLE, ens_a, shots=20, seed=1, platform=1)
    rq = cutting.collect_records(ghz5_plan, TABLE, ens_b, shots=20, seed=1, platform=2)
    with pytest.raises(EstimationError):
        parallel_single_cut_estimate(rp, rq, ghz5_plan, TABLE, TABLE, ens_a)


def test_tomography_strict_mode_raises_for_unmeasurable(ghz5_plan):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 4, mode="random")
    rec = cutting.collect_records(ghz5_plan, TABLE, ens, shots=10, seed=1, platform=1)
    hard = ["XYZXY", "YXZYX", "ZZXXY"]  # one random setting cannot cover all of these
    estimates, _ = estimators.pauli_tomography(rec, hard, ghz5_plan, TABLE, ens)
    if any(e is None for e in estimates):
        with pytest.raises(EstimationError):
            estimators.pauli_tomography(rec, hard, ghz5_plan, TABLE, ens, strict=True)


def test_stabilizer_group_closed_under_multiplication():
    group = ensembles.ghz_stabilizers(4)
    elements = set(group.elements)
    for a in group.elements:
        for b in group.elements:
            assert ensembles.pauli_multiply(a, b) in elements


def test_missing_configuration_raises(ghz5_plan):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 0, mode="exhaustive")
    rp = cutting.collect_records(ghz5_plan, TABLE, ens, shots=None, seed=0, platform=1)
    rq = cutting.collect_records(ghz5_plan, TABLE, ens, shots=None, seed=0, platform=2)
    broken = cutting.ShotRecord(1, None, dict(list(rp.data.items())[:-5]))
    with pytest.raises(EstimationError):
        parallel_single_cut_estimate(broken, rq, ghz5_plan, TABLE, TABLE, ens)


def test_purity_exact_pure_state(ghz5_plan):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 0, mode="exhaustive")
    rec = cutting.collect_records(ghz5_plan, TABLE, ens, shots=None, seed=0, platform=1)
    a, b = estimators.split_shot_record(rec)
    est = purity_estimate(a, b, ghz5_plan, ens, TABLE)
    assert est.value == pytest.approx(1.0, abs=1e-10)


def test_purity_exact_maximally_mixed_qubit():
    plan = cutting.trivial_plan(sim.Circuit(1, ()))
    ens = shared_ensemble((1,), 1, 0, mode="exhaustive")
    rec = cutting.collect_records(
        plan, TABLE, ens, shots=None, seed=0, platform=1, depolarize={0: 1.0}
    )
    a, b = estimators.split_shot_record(rec)
    est = purity_estimate(a, b, plan, ens)
    assert est.value == pytest.approx(0.5, abs=1e-10)


def test_purity_sampled_depolarized_ghz3():
    plan = cutting.trivial_plan(sim.ghz_circuit(3))
    ens = shared_ensemble((3,), 1, 11, mode="exhaustive")
    ghz = sim.run_circuit(sim.ghz_circuit(3), sim.QuantumState.zero(3))
    from crosscut.noise import depolarize_qubit

    target = sim.overlap_trace(depolarize_qubit(ghz, 1, 0.2), depolarize_qubit(ghz, 1, 0.2))
    values = []
    for rep in range(12):
        halves = []
        for tag in ("half-0", "half-1"):
            halves.append(
                cutting.collect_records(
                    plan, TABLE, ens, shots=500, seed=100 + rep, platform=1,
                    depolarize={1: 0.2}, stream_tag=tag,
                )
            )
        values.append(purity_estimate(halves[0], halves[1], plan, ens).value)
    report = estimators.report_from_values(values, EstimationBudget(m=500))
    assert report.value == pytest.approx(target, abs=3 * report.std_error)


def test_purity_split_guard():
    plan = cutting.trivial_plan(sim.Circuit(1, ()))
    ens = shared_ensemble((1,), 1, 0, mode="exhaustive")
    rec = cutting.collect_records(plan, TABLE, ens, shots=4, seed=0, platform=1)
    with pytest.raises(EstimationError):
        estimators.split_shot_record(rec)


def test_cross_platform_fidelity_plugins():
    budget = EstimationBudget()
    one = estimators.EstimateReport(1.0, 0.0, budget)
    half = estimators.EstimateReport(0.5, 0.0, budget)
    assert cross_platform_fidelity(one, one, one).value == pytest.approx(1.0)
    assert cross_platform_fidelity(half, one, half).value == pytest.approx(0.7071, abs=1e-4)
    bad = estimators.EstimateReport(0.0, 0.0, budget)
    with pytest.raises(EstimationError):
        cross_platform_fidelity(estimators.EstimateReport(0.3, 0.0, budget), bad, one)


def test_stabilizer_fidelity_exact_values(ghz5_plan):
    group = ghz_stabilizers(5)
    settings = StabilizerSettings(ghz5_plan, group.elements)
    rec = cutting.collect_records(ghz5_plan, TABLE, settings, shots=None, seed=0, platform=1)
    est = stabilizer_fidelity_estimate(rec, settings, ghz5_plan, TABLE)
    assert est.value == pytest.approx(1.0, abs=1e-10)

    zero_plan = cutting.chain_cut_plan(
        5, [(sim.Circuit(3, ()), (0, 1, 2)), (sim.Circuit(3, ()), (2, 3, 4))], [2]
    )
    rec0 = cutting.collect_records(zero_plan, TABLE, settings, shots=None, seed=0, platform=1)
    est0 = stabilizer_fidelity_estimate(rec0, settings, zero_plan, TABLE)
    assert est0.value == pytest.approx(0.5, abs=1e-10)


def test_identity_stabilizer_parity_is_one():
    vec = estimators.parity_vector(3, support=())
    assert np.allclose(vec, np.ones(8))


def test_pauli_tomography_stabilizer_values(ghz5_plan):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 0, mode="exhaustive")
    rec = cutting.collect_records(ghz5_plan, TABLE, ens, shots=2000, seed=5, platform=1)
    paulis = ["ZZIII", "XXXXX", "IIIII", "IZZII"]
    estimates, _ = estimators.pauli_tomography(rec, paulis, ghz5_plan, TABLE, ens)
    assert estimates[0] == pytest.approx(1.0, abs=0.1)
    assert estimates[1] == pytest.approx(1.0, abs=0.1)
    assert estimates[2] == pytest.approx(1.0, abs=0.1)
    assert estimates[3] == pytest.approx(1.0, abs=0.1)


def test_pauli_tomography_exact_matches_oracle(ghz5_plan):
    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 0, mode="exhaustive")
    rec = cutting.collect_records(ghz5_plan, TABLE, ens, shots=None, seed=0, platform=1)
    paulis = [ensembles.quaternary_pauli(i, 5) for i in range(64)]
    ideal = oracles.plan_output_state(ghz5_plan)
    exact = [sim.pauli_expectation(ideal, p) for p in paulis]
    estimates, mse = estimators.pauli_tomography(rec, paulis, ghz5_plan, TABLE, ens, exact)
    assert mse == pytest.approx(0.0, abs=1e-18)
    for est, ref in zip(estimates, exact):
        assert est == pytest.approx(ref, abs=1e-9)


def test_unbiasedness_over_random_pairs_single_cut():
    for seed, n, bounds in [(21, 3, (0, 1, 2)), (22, 4, (0, 2, 3)), (23, 5, (0, 2, 4))]:
        plan_p, plan_q = random_pair_plans(seed, n, bounds)
        got = oracles.exact_estimator_expectation(plan_p, plan_q, "parallel")
        assert got == pytest.approx(output_overlap(plan_p, plan_q), abs=1e-9)


def test_convergence_rate_of_repetitions(ghz5_plan):
    # the error of a k-repetition estimate, read off disjoint blocks of
    # sub-experiments, shrinks like 1/sqrt(k)
    from crosscut.rng import derive_seed

    ens = shared_ensemble(ghz5_plan.setting_sizes(), 1, 0, mode="exhaustive")
    values = []
    for rep in range(24):
        seed = derive_seed(5, "conv", rep)
        rp = cutting.collect_records(ghz5_plan, TABLE, ens, shots=500, seed=seed, platform=1)
        rq = cutting.collect_records(ghz5_plan, TABLE, ens, shots=500, seed=seed, platform=2)
        values.append(parallel_single_cut_estimate(rp, rq, ghz5_plan, TABLE, TABLE, ens).value)
    values = np.asarray(values)
    ks, ses = [], []
    for k in (1, 2, 4):
        means = values.reshape(-1, k).mean(axis=1)
        ks.append(k)
        ses.append(means.std(ddof=1))
    slope = np.polyfit(np.log(ks), np.log(ses), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.15)
