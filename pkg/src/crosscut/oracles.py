"""Independent brute-force checks that anchor the estimator algebra.

These computations never touch the estimator implementations: permutation
operators are materialized as explicit matrices, Haar moments come from
Gram-matrix pseudo-inverses, and exact estimator expectations are obtained
by enumerating every configuration, setting, and outcome table.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import cutting, estimators, sim
from .ensembles import CutConfigTable, cut_config_table, shared_ensemble


def permutation_matrix(perm: tuple[int, ...], d: int = 2) -> np.ndarray:
    """Operator on (C^d)^(x t) sending the i-th tensor slot to slot perm[i]."""
    t = len(perm)
    dim = d**t
    out = np.zeros((dim, dim))
    for idx in range(dim):
        digits = []
        rest = idx
        for _ in range(t):
            digits.append(rest % d)
            rest //= d
        digits = digits[::-1]
        permuted = [0] * t
        for i in range(t):
            permuted[perm[i]] = digits[i]
        jdx = 0
        for dgt in permuted:
            jdx = jdx * d + dgt
        out[jdx, idx] = 1.0
    return out


def _cycles(perm: tuple[int, ...]) -> int:
    seen = set()
    count = 0
    for start in range(len(perm)):
        if start in seen:
            continue
        count += 1
        cur = start
        while cur not in seen:
            seen.add(cur)
            cur = perm[cur]
    return count


@dataclass(frozen=True)
class WeingartenTable:
    """Gram matrix over S_t and its pseudo-inverse for Haar moments."""

    t: int
    d: int
    permutations: tuple[tuple[int, ...], ...]
    gram: np.ndarray
    coefficients: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.coefficients.sum(axis=1)


def weingarten_table(t: int, d: int) -> WeingartenTable:
    perms = tuple(itertools.permutations(range(t)))
    gram = np.empty((len(perms), len(perms)))
    for i, zeta in enumerate(perms):
        inv = tuple(np.argsort(zeta))
        for j, tau in enumerate(perms):
            composed = tuple(tau[inv[k]] for k in range(t))
            gram[i, j] = float(d) ** _cycles(composed)
    coeff = np.linalg.pinv(gram)
    return WeingartenTable(t, d, perms, gram, coeff)


def weingarten_sum_check(t: int, d: int) -> tuple[float, float]:
    """(max row sum deviation, expected value 1 / (d+t-1)^(falling t))."""
    table = weingarten_table(t, d)
    expected = 1.0
    for i in range(t):
        expected /= d + t - 1 - i
    dev = float(np.abs(table.row_sums() - expected).max())
    return dev, expected


def permutation_sum_check() -> tuple[float, dict[tuple[int, int, int, int], float]]:
    """Distance-weighted sum of permutation traces over four qubit outcomes.

    Enumerates sum_tau tr(V_tau |s s' b b'><...|) against the weights
    (-2)^(-D(s,s') - D(b,b')); the total must be exactly 36, with cell
    traces 24, 6, and 4 for the representative outcome patterns.
    """
    vs = [permutation_matrix(p, 2) for p in itertools.permutations(range(4))]
    cells: dict[tuple[int, int, int, int], float] = {}
    total = 0.0
    for s, sp, b, bp in itertools.product(range(2), repeat=4):
        proj = np.zeros((16, 16))
        idx = ((s * 2 + sp) * 2 + b) * 2 + bp
        proj[idx, idx] = 1.0
        trace_sum = sum(float(np.trace(v @ proj)) for v in vs)
        weight = (-2.0) ** (-(int(s != sp) + int(b != bp)))
        cells[(s, sp, b, bp)] = trace_sum
        total += weight * trace_sum
    return total, cells


def schur_average_check(k: int) -> float:
    """Max deviation of the enumerated Clifford twirl from the closed form."""
    from .ensembles import channels_for_cut_width
    from .liouville import measure_prepare_channel, nonidentity_projector

    cliffords = channels_for_cut_width(k)
    m = measure_prepare_channel(k).matrix
    avg = np.einsum("nij,jk,nlk->il", cliffords, m, cliffords, optimize=True) / len(cliffords)
    closed = np.zeros_like(avg)
    closed[0, 0] = 1.0
    closed += nonidentity_projector(k).matrix / (2**k + 1)
    return float(np.abs(avg - closed).max())


def haar_second_moment_collision(overlap: float, d: int) -> float:
    """Exact expectation of the collision statistic from the 2nd Haar moment.

    E[sum_s p_s q_s] = (1 + tr(rho sigma)) / (d + 1), so the collision
    estimator has expectation tr(rho sigma) for any states.
    """
    return (d + 1) * (1.0 + overlap) / (d + 1) - 1.0


# ---------------------------------------------------------------------------
# Exact estimator expectations through full enumeration


def random_segment(stream: np.random.Generator, width: int, depth: int = 3) -> sim.Circuit:
    gates = []
    for layer in range(depth):
        for q in range(width):
            gates.append(sim.ry(q, float(stream.uniform(0.0, 2.0 * np.pi))))
            gates.append(sim.rz(q, float(stream.uniform(0.0, 2.0 * np.pi))))
        for q in range(layer % 2, width - 1, 2):
            gates.append(sim.cnot(q, q + 1))
    return sim.Circuit(width, tuple(gates))


def random_chain_plan(stream: np.random.Generator, n: int, bounds, depth: int = 3) -> cutting.CutPlan:
    """Random staircase circuit cut at the given wire boundaries."""
    segments = []
    for j in range(len(bounds) - 1):
        wires = tuple(range(bounds[j], bounds[j + 1] + 1))
        segments.append((random_segment(stream, len(wires), depth), wires))
    return cutting.chain_cut_plan(n, segments, list(bounds[1:-1]))


def plan_output_state(plan: cutting.CutPlan) -> sim.QuantumState:
    return sim.run_circuit(cutting.uncut_circuit(plan), sim.QuantumState.zero(plan.n))


def exact_estimator_expectation(
    plan_p: cutting.CutPlan,
    plan_q: cutting.CutPlan,
    estimator: str,
    table: CutConfigTable | None = None,
) -> float:
    """Exact expectation by enumerating configurations, settings, outcomes.

    ``estimator`` is one of "distance", "parallel", or "multicut"; the
    result is sampling-free and can be compared against the direct overlap
    of the two output states.
    """
    n = sum(plan_p.setting_sizes())
    if n > 6:
        raise estimators.EstimationError("exact enumeration is limited to n <= 6")
    table = table or cut_config_table()
    ens = shared_ensemble(plan_p.setting_sizes(), 1, 0, mode="exhaustive")
    rec_p = cutting.collect_records(plan_p, table, ens, shots=None, seed=0, platform=1)
    rec_q = cutting.collect_records(plan_q, table, ens, shots=None, seed=0, platform=2)
    if estimator == "distance":
        if plan_p.k2 != 0:
            raise estimators.EstimationError("distance mode expects an uncut plan")
        return estimators.distance_cp_estimate(rec_p, rec_q, ens, n).value
    if estimator == "parallel":
        return estimators.parallel_single_cut_estimate(rec_p, rec_q, plan_p, table, table, ens).value
    if estimator == "multicut":
        return estimators.multi_cut_estimate(rec_p, rec_q, plan_p, ens, table_p=table).value
    raise estimators.EstimationError(f"unknown estimator id {estimator!r}")
