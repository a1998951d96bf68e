"""Overlap and fidelity estimators assembled from shot records.

All estimators are folds over ShotRecord frequencies.  Outcome pairs are
weighted by (-2)^(-d) with d the Hamming distance, which together with the
2^n prefactor becomes a per-bit kernel [[2, -1], [-1, 2]].  Cut
configurations enter through signed weights from the configuration table
(or through sampled Bernoulli assignments), and parts are chained by
matching measured cut outcomes to re-prepared inputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cutting import CutPlan, ShotRecord, bernoulli_one_probability
from .ensembles import CutConfigTable, StabilizerGroup, sample_k_clifford, stabilizer_setting
from .rng import substream


class EstimationError(ValueError):
    """Raised when records cannot support the requested estimate."""


@dataclass(frozen=True)
class EstimationBudget:
    """Sampling budget: settings N, shots m, Bernoulli rounds L, stabilizers T."""

    N: int = 1
    m: int = 1
    L: int = 1
    T: int = 1

    def __post_init__(self):
        if min(self.N, self.m, self.L, self.T) < 1:
            raise EstimationError("budget components must be >= 1")


@dataclass
class EstimateReport:
    value: float
    std_error: float
    budget: EstimationBudget
    repetitions: int = 1
    per_repetition: tuple[float, ...] = ()

    def to_row(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "N": self.budget.N,
            "m": self.budget.m,
            "L": self.budget.L,
            "T": self.budget.T,
            "repetitions": self.repetitions,
        }


def report_from_values(values, budget: EstimationBudget) -> EstimateReport:
    """Aggregate sub-experiment values: mean and sample std / sqrt(R)."""
    values = np.asarray(values, dtype=float)
    if values.size > 1:
        err = float(values.std(ddof=1) / np.sqrt(values.size))
    else:
        err = 0.0
    return EstimateReport(float(values.mean()), err, budget, values.size, tuple(values))


def hamming_distance(a, b) -> int:
    """Number of differing positions of two equal-length bitstrings."""
    a = str(a)
    b = str(b)
    if len(a) != len(b):
        raise EstimationError(f"length mismatch: {a!r} vs {b!r}")
    return sum(x != y for x, y in zip(a, b))


@lru_cache(maxsize=None)
def distance_kernel(bits: int) -> np.ndarray:
    """2^bits * (-2)^(-Hamming) as a matrix over outcome pairs."""
    base = np.array([[2.0, -1.0], [-1.0, 2.0]])
    out = np.array([[1.0]])
    for _ in range(bits):
        out = np.kron(out, base)
    return out


# ---------------------------------------------------------------------------
# Uncut estimators


def _plain_tables(record: ShotRecord, counts: int) -> np.ndarray:
    """Stack frequencies of an uncut record, shape (N, 2^n)."""
    out = []
    for t in range(counts):
        key = (0, (), (), t)
        if key not in record.data:
            raise EstimationError(f"record is missing setting {t}")
        out.append(record.frequency(key).reshape(-1))
    return np.stack(out)


def _check_matched(*records, settings=None) -> None:
    """Reject record pairs taken under different measurement ensembles."""
    digests = {r.ensemble_digest for r in records if r.ensemble_digest is not None}
    if settings is not None:
        digest = getattr(settings, "digest", None)
        if callable(digest):
            digests.add(digest())
    if len(digests) > 1:
        raise EstimationError("ensemble mismatch: records were taken under different settings")


def distance_cp_estimate(
    records_p: ShotRecord, records_q: ShotRecord, ensemble, n: int
) -> EstimateReport:
    """Distance-weighted overlap from matched local random measurements.

    Per setting t the statistic is sum_{s,s'} 2^n (-2)^(-D(s,s')) p_s q_s';
    its mean over the shared ensemble estimates tr(rho sigma).
    """
    _check_matched(records_p, records_q, settings=ensemble)
    counts = ensemble.counts()[0]
    p = _plain_tables(records_p, counts)
    q = _plain_tables(records_q, counts)
    kernel = distance_kernel(n)
    per_setting = np.einsum("ts,sr,tr->t", p, kernel, q)
    m = records_p.shots or 1
    budget = EstimationBudget(N=counts, m=m)
    if counts > 1:
        err = float(per_setting.std(ddof=1) / np.sqrt(counts))
    else:
        err = 0.0
    return EstimateReport(float(per_setting.mean()), err, budget)


def collect_global_records(
    circuit, N: int, shots: int | None, seed: int, platform: int
) -> ShotRecord:
    """Uncut records under shared global Haar unitaries (n <= 4).

    The unitaries derive from the seed alone, so both platforms see the
    identical sequence; only the shot streams are platform-specific.
    """
    from scipy.stats import unitary_group

    from .sim import QuantumState, run_circuit, sample_shots

    if circuit.n > 4:
        raise EstimationError("global Haar sampling is limited to n <= 4")
    state = run_circuit(circuit, QuantumState.zero(circuit.n))
    record = ShotRecord(platform, shots, ensemble_digest=f"haar-{seed}-{N}")
    for t in range(N):
        w = unitary_group.rvs(2**circuit.n, random_state=substream(seed, "haar", t))
        if state.kind == "pure":
            probs = np.abs(w @ state.data) ** 2
        else:
            probs = np.diag(w @ state.data @ w.conj().T).real
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum()
        if shots is None:
            record.data[(0, (), (), t)] = probs.reshape(-1, 1)
        else:
            stream = substream(seed, "haar-shots", platform, t)
            record.data[(0, (), (), t)] = sample_shots(probs, shots, stream).reshape(-1, 1)
    return record


def collision_cp_estimate(
    records_p: ShotRecord, records_q: ShotRecord, n: int, counts: int
) -> EstimateReport:
    """Collision overlap under a shared global random unitary.

    Per setting the statistic is (d+1)/m^2 * sum_s #s * #s' - 1, counting
    outcome collisions between the platforms.
    """
    if n > 4:
        raise EstimationError("global-unitary collision records are limited to n <= 4")
    _check_matched(records_p, records_q)
    d = 2**n
    p = _plain_tables(records_p, counts)
    q = _plain_tables(records_q, counts)
    per_setting = (d + 1) * np.einsum("ts,ts->t", p, q) - 1.0
    m = records_p.shots or 1
    budget = EstimationBudget(N=counts, m=m)
    err = float(per_setting.std(ddof=1) / np.sqrt(counts)) if counts > 1 else 0.0
    return EstimateReport(float(per_setting.mean()), err, budget)


# ---------------------------------------------------------------------------
# Cut-record access helpers


def _cut_roles(plan: CutPlan):
    """Per part: sorted incoming cut ids and sorted departing cut ids."""
    inc = [tuple(sorted(c for c, _ in plan.parts[p].incoming)) for p in range(plan.r)]
    dep = [tuple(sorted(c for c, _ in plan.parts[p].departing)) for p in range(plan.r)]
    return inc, dep


def _part_frequency(record: ShotRecord, pid, config, inputs, t) -> np.ndarray:
    key = (pid, config, inputs, t)
    if key not in record.data:
        raise EstimationError(f"record is missing configuration {key}")
    return record.frequency(key)


class _PairKernelCache:
    """mean_t P^T K Q per (part, config/input pair), shape (2^inc, 2^inc)."""

    def __init__(self, rec_p: ShotRecord, rec_q: ShotRecord, plan: CutPlan, counts):
        self.rec_p = rec_p
        self.rec_q = rec_q
        self.plan = plan
        self.counts = counts
        self.cache: dict = {}

    def get(self, pid, cfg_p, inp_p, cfg_q, inp_q) -> np.ndarray:
        key = (pid, cfg_p, inp_p, cfg_q, inp_q)
        if key not in self.cache:
            bits = len(self.plan.parts[pid].setting_locals)
            kernel = distance_kernel(bits)
            acc = None
            for t in range(self.counts[pid]):
                a = _part_frequency(self.rec_p, pid, cfg_p, inp_p, t)
                b = _part_frequency(self.rec_q, pid, cfg_q, inp_q, t)
                term = a.T @ kernel @ b
                acc = term if acc is None else acc + term
            self.cache[key] = acc / self.counts[pid]
        return self.cache[key]


# ---------------------------------------------------------------------------
# Parallel single-cut estimator


def parallel_single_cut_estimate(
    records_p: ShotRecord,
    records_q: ShotRecord,
    plan: CutPlan,
    table_p: CutConfigTable,
    table_q: CutConfigTable | None,
    ensemble,
) -> EstimateReport:
    """Overlap estimator for one single-qubit cut with enumerated configurations.

    Implements the double sum over per-platform configuration entries (j, j')
    and cut outcomes (c, c'), with the two parts' setting sums taken
    independently so N settings act as N^2 matched pairs.  The per-entry
    weight is scale * (-1)^z * probability per platform (scale = 5 for the
    noiseless table), and the measured outcome c feeds the re-prepared input
    for z = 0 while z = 1 averages both basis inputs.
    """
    if plan.k2 != 1 or plan.r != 2 or plan.cuts[0].width != 1:
        raise EstimationError("parallel estimator needs exactly one single-qubit cut")
    _check_matched(records_p, records_q, settings=ensemble)
    table_q = table_q or table_p
    counts = ensemble.counts()
    src, tgt = plan.cuts[0].source, plan.cuts[0].target
    w_p, w_q = table_p.signed_weights(), table_q.signed_weights()
    z_p, z_q = table_p.z_bits(), table_q.z_bits()
    kern = _PairKernelCache(records_p, records_q, plan, counts)
    n_entries = len(table_p.entries)
    total = 0.0
    for j in range(n_entries):
        for jp in range(n_entries):
            ka = kern.get(src, (j,), (), (jp,), ())  # (2, 2) over (c, c')
            gb = np.zeros((2, 2))
            for c in range(2):
                for cp in range(2):
                    acc = 0.0
                    for u, wu in _input_link(z_p[j], c):
                        for up, wup in _input_link(z_q[jp], cp):
                            acc += wu * wup * kern.get(tgt, (j,), (u,), (jp,), (up,))[0, 0]
                    gb[c, cp] = acc
            total += w_p[j] * w_q[jp] * float(np.sum(ka * gb))
    m = records_p.shots or 1
    budget = EstimationBudget(N=max(counts), m=m)
    return EstimateReport(float(total), 0.0, budget)


def _input_link(z: int, c: int):
    """Re-preparation rule: measured outcome for z=0, both halves for z=1."""
    if z == 0:
        return [(c, 1.0)]
    return [(0, 0.5), (1, 0.5)]


# ---------------------------------------------------------------------------
# General multi-cut estimator


@dataclass(frozen=True)
class CutAssignment:
    """One sampled Bernoulli vector with its per-cut unitaries."""

    z: tuple[int, ...]
    unitaries: tuple[np.ndarray, ...]


def sample_cut_assignments(plan: CutPlan, L: int, seed: int, platform: int) -> list[CutAssignment]:
    """L independent per-cut (z, Clifford) draws for one platform."""
    out = []
    for ell in range(L):
        zs, us = [], []
        for l, cut in enumerate(plan.cuts):
            stream = substream(seed, "bernoulli", platform, ell, l)
            z = int(stream.random() < bernoulli_one_probability(cut.width))
            zs.append(z)
            if z == 0:
                us.append(sample_k_clifford(cut.width, substream(seed, "cutcliff", platform, ell, l)))
            else:
                us.append(np.eye(2**cut.width, dtype=complex))
        out.append(CutAssignment(tuple(zs), tuple(us)))
    return out


def multi_cut_estimate(
    records_p: ShotRecord,
    records_q: ShotRecord,
    plan: CutPlan,
    ensemble,
    *,
    table_p: CutConfigTable | None = None,
    table_q: CutConfigTable | None = None,
    assignments_p: list[CutAssignment] | None = None,
    assignments_q: list[CutAssignment] | None = None,
) -> EstimateReport:
    """Overlap estimator for an arbitrary acyclic plan.

    In enumerated mode every cut ranges over the configuration table with
    its signed weights.  In sampled mode each platform contributes L
    Bernoulli assignments; each pair carries the weight
    prod_cuts (2^(w+1)+1)^2 * (-1)^(|z|+|z'|) / L^2 and the estimate
    averages over all L^2 pairs.
    """
    _check_matched(records_p, records_q, settings=ensemble)
    counts = ensemble.counts()
    kern = _PairKernelCache(records_p, records_q, plan, counts)
    options_p = _assignment_options(plan, table_p, assignments_p)
    options_q = _assignment_options(plan, table_q or table_p, assignments_q)
    total = 0.0
    L = None
    for tags_p, weight_p, z_vec_p in options_p:
        for tags_q, weight_q, z_vec_q in options_q:
            total += weight_p * weight_q * _contract_parts(plan, kern, tags_p, z_vec_p, tags_q, z_vec_q)
    m = records_p.shots or 1
    if assignments_p is not None:
        L = len(assignments_p)
    budget = EstimationBudget(N=max(counts), m=m, L=L or 1)
    return EstimateReport(float(total), 0.0, budget)


def _assignment_options(plan: CutPlan, table: CutConfigTable | None, assignments):
    """Yield (per-cut tags, weight, per-cut z bits) for one platform."""
    if assignments is not None:
        L = len(assignments)
        out = []
        for ell, asg in enumerate(assignments):
            w = 1.0
            for l, cut in enumerate(plan.cuts):
                w *= (2 ** (cut.width + 1) + 1) * (-1) ** asg.z[l]
            out.append((tuple([ell] * plan.k2), w / L, asg.z))
        return out
    if table is None:
        raise EstimationError("need either a configuration table or sampled assignments")
    weights = table.signed_weights()
    zbits = table.z_bits()
    out = []
    for combo in itertools.product(range(len(table.entries)), repeat=plan.k2):
        w = float(np.prod([weights[e] for e in combo]))
        out.append((combo, w, tuple(int(zbits[e]) for e in combo)))
    return out


def _contract_parts(plan, kern, tags_p, z_p, tags_q, z_q) -> float:
    """Sum over cut outcomes and inputs of the product of part kernels."""
    inc, dep = _cut_roles(plan)
    cut_opts_p = [_cut_variable_options(plan.cuts[l].width, z_p[l]) for l in range(plan.k2)]
    cut_opts_q = [_cut_variable_options(plan.cuts[l].width, z_q[l]) for l in range(plan.k2)]
    total = 0.0
    for vp in itertools.product(*cut_opts_p) if cut_opts_p else [()]:
        wp = float(np.prod([w for _, _, w in vp])) if vp else 1.0
        for vq in itertools.product(*cut_opts_q) if cut_opts_q else [()]:
            wq = float(np.prod([w for _, _, w in vq])) if vq else 1.0
            prod = wp * wq
            for pid in range(plan.r):
                incident = plan.incident_cuts(pid)
                cfg_p = tuple(tags_p[l] for l in incident)
                cfg_q = tuple(tags_q[l] for l in incident)
                inp_p = tuple(vp[l][1] for l in dep[pid])
                inp_q = tuple(vq[l][1] for l in dep[pid])
                mat = kern.get(pid, cfg_p, inp_p, cfg_q, inp_q)
                ci_p = _bits_to_index([vp[l][0] for l in inc[pid]], plan, inc[pid])
                ci_q = _bits_to_index([vq[l][0] for l in inc[pid]], plan, inc[pid])
                prod *= float(mat[ci_p, ci_q])
                if prod == 0.0:
                    break
            total += prod
    return total


def _cut_variable_options(width: int, z: int):
    """(measured outcome, prepared input, weight) triples for one cut."""
    outcomes = range(2**width)
    if z == 0:
        return [(c, c, 1.0) for c in outcomes]
    frac = 1.0 / (2**width)
    return [(c, u, frac) for c in outcomes for u in outcomes]


def _bits_to_index(values, plan, cut_ids) -> int:
    index = 0
    for cid, v in zip(cut_ids, values):
        index = (index << plan.cuts[cid].width) | v
    return index


# ---------------------------------------------------------------------------
# Purity and fidelity


def purity_estimate(
    half_a: ShotRecord,
    half_b: ShotRecord,
    plan: CutPlan,
    ensemble,
    table: CutConfigTable | None = None,
) -> EstimateReport:
    """Purity via the overlap machinery with two disjoint shot halves.

    Splitting the shots removes the self-collision bias of reusing one
    sample on both sides; exact tables may be passed twice.
    """
    if half_a.shots is not None and (half_a.shots < 1 or half_b.shots < 1):
        raise EstimationError("purity needs at least one shot in each half")
    n = sum(plan.setting_sizes())
    if plan.k2 == 0:
        return distance_cp_estimate(half_a, half_b, ensemble, n)
    if plan.k2 == 1:
        return parallel_single_cut_estimate(half_a, half_b, plan, table, table, ensemble)
    return multi_cut_estimate(half_a, half_b, plan, ensemble, table_p=table)


def split_shot_record(record: ShotRecord) -> tuple[ShotRecord, ShotRecord]:
    """Exact-mode convenience: both purity halves are the same exact table."""
    if record.shots is not None:
        raise EstimationError("sampled purity halves must be collected separately")
    return record, record


def cross_platform_fidelity(
    overlap: EstimateReport, purity_p: EstimateReport, purity_q: EstimateReport
) -> EstimateReport:
    """Overlap normalized by the geometric mean of the purities.

    Standard error is propagated to first order in the three inputs.
    """
    pp, pq = purity_p.value, purity_q.value
    if pp <= 0 or pq <= 0:
        raise EstimationError(
            f"nonpositive purity estimate ({pp}, {pq}); increase the sampling budget"
        )
    denom = np.sqrt(pp * pq)
    value = overlap.value / denom
    grads = (
        1.0 / denom,
        -0.5 * overlap.value / (denom * pp),
        -0.5 * overlap.value / (denom * pq),
    )
    errs = (overlap.std_error, purity_p.std_error, purity_q.std_error)
    err = float(np.sqrt(sum((g * e) ** 2 for g, e in zip(grads, errs))))
    return EstimateReport(float(value), err, overlap.budget, overlap.repetitions)


# ---------------------------------------------------------------------------
# Stabilizer (pure-state) fidelity


class StabilizerSettings:
    """Measurement settings that diagonalize sampled stabilizer elements.

    Presents the same counts()/setting() interface as the shared ensemble;
    setting t of part p diagonalizes the restriction of the t-th sampled
    Pauli to that part's measured wires.
    """

    def __init__(self, plan: CutPlan, paulis):
        self.plan = plan
        self.paulis = list(paulis)
        self._rotations = []
        self._supports = []
        for sign, letters in self.paulis:
            rots, sups = [], []
            for pid in range(plan.r):
                wires = plan.parts[pid].setting_wires
                local = "".join(letters[w] for w in wires)
                rot, support = stabilizer_setting((1, local))
                rots.append(rot)
                sups.append(support)
            self._rotations.append(rots)
            self._supports.append(sups)

    def counts(self):
        return tuple([len(self.paulis)] * self.plan.r)

    def setting(self, pid, t):
        return self._rotations[t][pid]

    def support(self, pid, t):
        return self._supports[t][pid]

    def sign(self, t):
        return self.paulis[t][0]

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for sign, letters in self.paulis:
            h.update(b"+" if sign > 0 else b"-")
            h.update(letters.encode())
        return h.hexdigest()


def sample_stabilizers(group: StabilizerGroup, T: int, seed: int, platform: int = 1):
    stream = substream(seed, "stabilizers", platform)
    idx = stream.integers(len(group.elements), size=T)
    return [group.elements[int(i)] for i in idx]


def parity_vector(bits: int, support, weights: dict[int, np.ndarray] | None = None) -> np.ndarray:
    """(-1)^(sum of support bits) as a vector over 2^bits outcomes.

    ``weights`` overrides the per-qubit (+1, -1) pair, which is how the
    readout-inverted parities are injected.
    """
    out = np.array([1.0])
    for q in range(bits):
        if q in support:
            w = weights[q] if weights is not None else np.array([1.0, -1.0])
        else:
            w = weights[q] if weights is not None and q in weights else np.array([1.0, 1.0])
        out = np.kron(out, w)
    return out


def stabilizer_fidelity_estimate(
    records: ShotRecord,
    settings: StabilizerSettings,
    plan: CutPlan,
    table: CutConfigTable,
    parity_weights=None,
) -> EstimateReport:
    """Fidelity with the stabilizer state whose group generated the settings.

    Averages sign(P_t) times the parity of the measured bits over the
    sampled stabilizers, with the cut reconstructed through the signed
    configuration weights.  ``parity_weights`` maps wire -> length-2 vector
    to replace the (+1, -1) parity (readout inversion); identity wires are
    marginalized either way.
    """
    if plan.k2 != 1 or plan.r != 2 or plan.cuts[0].width != 1:
        raise EstimationError("stabilizer fidelity needs one single-qubit cut")
    _check_matched(records, settings=settings)
    src, tgt = plan.cuts[0].source, plan.cuts[0].target
    w = table.signed_weights()
    zb = table.z_bits()
    T = settings.counts()[0]
    values = np.zeros(T)
    for t in range(T):
        sign = settings.sign(t)
        mu_src = _parity_for_part(plan, src, settings, t, parity_weights)
        mu_tgt = _parity_for_part(plan, tgt, settings, t, parity_weights)
        acc = 0.0
        for j in range(len(table.entries)):
            a = _part_frequency(records, src, (j,), (), t)  # (2^s, 2)
            src_factor = mu_src @ a  # per cut outcome c
            tgt_factor = np.zeros(2)
            for c in range(2):
                for u, wu in _input_link(zb[j], c):
                    b = _part_frequency(records, tgt, (j,), (u,), t)
                    tgt_factor[c] += wu * float(mu_tgt @ b[:, 0])
            acc += w[j] * float(src_factor @ tgt_factor)
        values[t] = sign * acc
    err = float(values.std(ddof=1) / np.sqrt(T)) if T > 1 else 0.0
    m = records.shots or 1
    return EstimateReport(float(values.mean()), err, EstimationBudget(m=m, T=T))


def _parity_for_part(plan, pid, settings, t, parity_weights):
    part = plan.parts[pid]
    bits = len(part.setting_locals)
    support = settings.support(pid, t)
    if parity_weights is None:
        return parity_vector(bits, support)
    weights = {}
    for pos, local in enumerate(part.setting_locals):
        wire = part.wires[local]
        base = np.array([1.0, -1.0]) if pos in support else np.array([1.0, 1.0])
        if wire in parity_weights:
            lamb = parity_weights[wire]  # 2x2 inverse confusion, columns sum to 1
            weights[pos] = base @ lamb
        else:
            weights[pos] = base
    return parity_vector(bits, support, weights)


# ---------------------------------------------------------------------------
# Pauli tomography from shared records


def pauli_tomography(
    records: ShotRecord,
    paulis,
    plan: CutPlan,
    table: CutConfigTable,
    ensemble,
    exact_values=None,
    *,
    strict: bool = False,
) -> tuple[list[float | None], float | None]:
    """Pauli expectations re-assembled from cross-platform records.

    A Pauli is estimated only when at least one recorded setting
    diagonalizes it on every non-identity wire of each part; all compatible
    settings are averaged.  Returns (estimates, mean squared error) with
    None entries for unmeasurable strings, or raises when ``strict``.
    """
    if plan.k2 != 1 or plan.r != 2:
        raise EstimationError("tomography reuse expects a two-part single-cut plan")
    _check_matched(records, settings=ensemble)
    src, tgt = plan.cuts[0].source, plan.cuts[0].target
    w = table.signed_weights()
    zb = table.z_bits()
    counts = ensemble.counts()
    measured = {
        pid: [ensemble.measured_paulis(pid, t) for t in range(counts[pid])]
        for pid in (src, tgt)
    }
    estimates: list[float | None] = []
    for pauli in paulis:
        letters = pauli if isinstance(pauli, str) else pauli[1]
        per_part = {}
        ok = True
        for pid in (src, tgt):
            part = plan.parts[pid]
            wires = part.setting_wires
            compat = []
            for t in range(counts[pid]):
                sign = 1
                good = True
                for pos, wire in enumerate(wires):
                    want = letters[wire]
                    if want == "I":
                        continue
                    got, s = measured[pid][t][pos]
                    if got != want:
                        good = False
                        break
                    sign *= s
                if good:
                    compat.append((t, sign))
            if not compat:
                ok = False
                break
            support = tuple(pos for pos, wire in enumerate(wires) if letters[wire] != "I")
            per_part[pid] = (compat, parity_vector(len(wires), support))
        if not ok:
            if strict:
                raise EstimationError(f"Pauli {letters} is not measurable from the recorded settings")
            estimates.append(None)
            continue
        compat_src, mu_src = per_part[src]
        compat_tgt, mu_tgt = per_part[tgt]
        value = 0.0
        for j in range(len(table.entries)):
            src_factor = np.zeros(2)
            for t, sign in compat_src:
                a = _part_frequency(records, src, (j,), (), t)
                src_factor += sign * (mu_src @ a)
            src_factor /= len(compat_src)
            tgt_factor = np.zeros(2)
            for c in range(2):
                for u, wu in _input_link(zb[j], c):
                    acc = 0.0
                    for t, sign in compat_tgt:
                        b = _part_frequency(records, tgt, (j,), (u,), t)
                        acc += sign * wu * float(mu_tgt @ b[:, 0])
                    tgt_factor[c] += acc / len(compat_tgt)
            value += w[j] * float(src_factor @ tgt_factor)
        estimates.append(float(value))
    mse = None
    if exact_values is not None:
        pairs = [(e, x) for e, x in zip(estimates, exact_values) if e is not None]
        if pairs:
            mse = float(np.mean([(e - x) ** 2 for e, x in pairs]))
    return estimates, mse
