"""Wire cutting: cut plans, cut channels, configuration enumeration, and
execution of subcircuits into shot records.

A cut replaces the identity channel on a wire by a signed mixture of a
measure-and-prepare channel (z=0, Clifford-twirled) and a trace-and-replace
channel (z=1).  Execution is parallel-first: every subcircuit configuration
is run independently and recombined classically, so nothing is ever
simulated mid-circuit.
"""

from __future__ import annotations

import csv
from functools import lru_cache
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ensembles import ConfigEntry, CutConfigTable, channels_for_cut_width
from .liouville import (
    ChannelMatrix,
    identity_channel,
    measure_prepare_channel,
    nonidentity_projector,
)
from .rng import substream
from .sim import (
    Circuit,
    QuantumState,
    SimulationError,
    apply_gate,
    bitstring,
    cnot,
    h,
    measurement_probabilities,
    sample_shots,
    unitary,
)

MIXED = "mixed"  # departing-cut input marker for the maximally mixed state


# ---------------------------------------------------------------------------
# Cut channels


@lru_cache(maxsize=None)
def cut_channels(k1: int) -> tuple[ChannelMatrix, ChannelMatrix]:
    """The two k1-qubit cut channels in the Liouville basis.

    The measure-and-prepare branch is computed both by enumerating the
    Clifford twirl and from the closed form |I><I| + Pi_1/(2^k+1); the two
    are asserted equal.  The trace-and-replace branch is |I><I|.
    """
    if k1 not in (1, 2):
        raise SimulationError("cut channels support k1 in {1, 2}")
    cliffords = channels_for_cut_width(k1)
    m = measure_prepare_channel(k1).matrix
    enumerated = np.einsum("nij,jk,nlk->il", cliffords, m, cliffords, optimize=True) / len(cliffords)
    closed = np.zeros_like(enumerated)
    closed[0, 0] = 1.0
    closed += nonidentity_projector(k1).matrix / (2**k1 + 1)
    if np.abs(enumerated - closed).max() > 1e-10:
        raise SimulationError("enumerated Clifford twirl disagrees with the closed form")
    measure_prepare = ChannelMatrix(k1, enumerated)
    trace_replace_mat = np.zeros_like(enumerated)
    trace_replace_mat[0, 0] = 1.0
    trace_replace = ChannelMatrix(k1, trace_replace_mat)
    return measure_prepare, trace_replace


def identity_reconstruction_error(k1: int) -> float:
    """Max-abs deviation of (2^k+1)*Phi_mp - 2^k*Phi_tr from the identity."""
    mp, tr = cut_channels(k1)
    recon = (2**k1 + 1) * mp.matrix - (2**k1) * tr.matrix
    return float(np.abs(recon - identity_channel(k1).matrix).max())


def bernoulli_one_probability(k1: int) -> float:
    """P(z=1) = 2^k / (2^(k+1) + 1); the z=0 branch carries the rest."""
    return (2**k1) / (2 ** (k1 + 1) + 1)


# ---------------------------------------------------------------------------
# Cut plans


@dataclass(frozen=True)
class Cut:
    """A cut on ``wires``, measured in part ``source`` and re-prepared in ``target``."""

    wires: tuple[int, ...]
    source: int
    target: int

    @property
    def width(self) -> int:
        return len(self.wires)


@dataclass(frozen=True)
class PartSpec:
    """One subcircuit plus the roles of its local qubits.

    ``wires[q]`` is the original wire carried by local qubit q.  Incoming
    cuts are measured here (a rotation from the cut configuration is applied
    before measurement); departing cuts are re-initialized here and flow
    through the circuit to the final measurement.
    """

    circuit: Circuit
    wires: tuple[int, ...]
    incoming: tuple[tuple[int, tuple[int, ...]], ...] = ()  # (cut_id, local qubits)
    departing: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __post_init__(self):
        if self.circuit.n != len(self.wires):
            raise SimulationError("part circuit size does not match wire list")

    @property
    def incoming_locals(self) -> tuple[int, ...]:
        return tuple(q for _, qs in sorted(self.incoming) for q in qs)

    @property
    def setting_locals(self) -> tuple[int, ...]:
        skip = set(self.incoming_locals)
        return tuple(q for q in range(self.circuit.n) if q not in skip)

    @property
    def setting_wires(self) -> tuple[int, ...]:
        return tuple(self.wires[q] for q in self.setting_locals)


@dataclass(frozen=True)
class CutPlan:
    """Partition of an n-wire circuit into parts joined by cuts."""

    n: int
    parts: tuple[PartSpec, ...]
    cuts: tuple[Cut, ...]

    def __post_init__(self):
        seen_incoming, seen_departing = set(), set()
        for pid, part in enumerate(self.parts):
            for cid, qs in part.incoming:
                if self.cuts[cid].source != pid or len(qs) != self.cuts[cid].width:
                    raise SimulationError(f"cut {cid} incoming mismatch in part {pid}")
                seen_incoming.add(cid)
            for cid, qs in part.departing:
                if self.cuts[cid].target != pid or len(qs) != self.cuts[cid].width:
                    raise SimulationError(f"cut {cid} departing mismatch in part {pid}")
                seen_departing.add(cid)
        if seen_incoming != set(range(len(self.cuts))) or seen_departing != seen_incoming:
            raise SimulationError("every cut needs exactly one incoming and one departing side")
        covered = [w for part in self.parts for w in part.setting_wires]
        if sorted(covered) != list(range(self.n)):
            raise SimulationError("setting wires do not partition the circuit wires")
        self._check_acyclic()

    def _check_acyclic(self):
        order, marked, active = [], set(), set()

        def visit(pid):
            if pid in marked:
                return
            if pid in active:
                raise SimulationError("cut dependency graph has a cycle")
            active.add(pid)
            for cut in self.cuts:
                if cut.source == pid:
                    visit(cut.target)
            active.discard(pid)
            marked.add(pid)
            order.append(pid)

        for pid in range(len(self.parts)):
            visit(pid)

    @property
    def r(self) -> int:
        return len(self.parts)

    @property
    def k2(self) -> int:
        return len(self.cuts)

    @property
    def k1(self) -> int:
        return max((c.width for c in self.cuts), default=0)

    def setting_sizes(self) -> tuple[int, ...]:
        return tuple(len(p.setting_locals) for p in self.parts)

    def incident_cuts(self, pid: int) -> tuple[int, ...]:
        part = self.parts[pid]
        return tuple(sorted([cid for cid, _ in part.incoming] + [cid for cid, _ in part.departing]))


def trivial_plan(circuit: Circuit) -> CutPlan:
    """A plan with a single part and no cuts; execution reduces to plain measurement."""
    part = PartSpec(circuit, tuple(range(circuit.n)))
    return CutPlan(circuit.n, (part,), ())


def chain_cut_plan(
    n: int, segments: Sequence[tuple[Circuit, Sequence[int]]], cut_wires: Sequence
) -> CutPlan:
    """Build a chain plan from r wire blocks cut at shared wires per boundary.

    ``segments[j]`` is (circuit, wires); consecutive blocks overlap exactly
    on the cut wires between them.  Each entry of ``cut_wires`` is a wire
    index or a tuple of wire indices (a multi-qubit cut).
    """
    if len(cut_wires) != len(segments) - 1:
        raise SimulationError("a chain needs one cut per consecutive segment pair")
    normalized = [tuple(w) if isinstance(w, (tuple, list)) else (int(w),) for w in cut_wires]
    cuts = tuple(Cut(w, j, j + 1) for j, w in enumerate(normalized))
    parts = []
    for j, (circ, wires) in enumerate(segments):
        wires = tuple(int(w) for w in wires)
        incoming = ()
        departing = ()
        if j < len(normalized):
            incoming = ((j, tuple(wires.index(w) for w in normalized[j])),)
        if j > 0:
            departing = ((j - 1, tuple(wires.index(w) for w in normalized[j - 1])),)
        parts.append(PartSpec(circ, wires, incoming, departing))
    return CutPlan(n, tuple(parts), cuts)


def ghz_cut_plan(n: int) -> CutPlan:
    """GHZ preparation cut at the central qubit into two equal parts."""
    if n % 2 == 0 or n < 3:
        raise SimulationError("GHZ cut plans need odd n >= 3")
    mid = (n - 1) // 2
    upper = Circuit(mid + 1, tuple([h(0)] + [cnot(q, q + 1) for q in range(mid)]))
    lower = Circuit(n - mid, tuple(cnot(q, q + 1) for q in range(n - mid - 1)))
    return chain_cut_plan(
        n,
        [(upper, tuple(range(mid + 1))), (lower, tuple(range(mid, n)))],
        [mid],
    )


def ghz_chain_plan(n: int, r: int) -> CutPlan:
    """GHZ preparation split into r chain parts of near-equal size."""
    if r < 2 or n < 2 * r - 1:
        raise SimulationError("need at least two wires per part beyond the shared ones")
    bounds = np.linspace(0, n - 1, r + 1).round().astype(int)
    cut_wires = [int(b) for b in bounds[1:-1]]
    segments = []
    for j in range(r):
        lo, hi = int(bounds[j]), int(bounds[j + 1])
        wires = tuple(range(lo, hi + 1))
        gates = [cnot(q - lo, q - lo + 1) for q in range(lo, hi)]
        if j == 0:
            gates = [h(0)] + gates
        segments.append((Circuit(len(wires), tuple(gates)), wires))
    return chain_cut_plan(n, segments, cut_wires)


def uncut_circuit(plan: CutPlan) -> Circuit:
    """Stitch the part circuits back into the original n-wire circuit."""
    order = _topological_parts(plan)
    gates = []
    for pid in order:
        part = plan.parts[pid]
        for g in part.circuit.gates:
            targets = tuple(part.wires[q] for q in g.targets)
            gates.append(unitary(targets, g.matrix, name=g.name))
    return Circuit(plan.n, tuple(gates))


def _topological_parts(plan: CutPlan) -> list[int]:
    remaining = set(range(plan.r))
    done, order = set(), []
    while remaining:
        for pid in sorted(remaining):
            needs = {cid for cid, _ in plan.parts[pid].departing}
            if all(plan.cuts[cid].source in done for cid in needs):
                order.append(pid)
                done.add(pid)
                remaining.discard(pid)
                break
        else:
            raise SimulationError("cyclic plan")
    return order


# ---------------------------------------------------------------------------
# Configuration enumeration


def enumerate_configurations(plan: CutPlan, table: CutConfigTable):
    """Per-part circuit settings (configuration x departing input).

    Each part contributes len(table)^(#incident cuts) configuration
    assignments times 2^(#departing wires) basis inputs, i.e. 4 for a part
    with one incoming cut, 8 for one departing cut, 32 for one of each.
    """
    if any(c.width != 1 for c in plan.cuts):
        raise SimulationError("exhaustive configuration enumeration needs single-qubit cuts")
    per_part = []
    for pid in range(plan.r):
        part = plan.parts[pid]
        incident = plan.incident_cuts(pid)
        dep_cuts = sorted(cid for cid, _ in part.departing)
        combos = []
        for entries in itertools.product(range(len(table.entries)), repeat=len(incident)):
            config = dict(zip(incident, entries))
            for inputs in itertools.product(range(2), repeat=len(dep_cuts)):
                combos.append((tuple(config[c] for c in incident), tuple(inputs)))
        per_part.append(combos)
    return per_part


def configuration_count(plan: CutPlan, table: CutConfigTable) -> int:
    """Total circuit settings across parts (12, 44, 76 for chains r=2,3,4)."""
    return sum(len(c) for c in enumerate_configurations(plan, table))


# ---------------------------------------------------------------------------
# Execution


def _base_state(plan: CutPlan, pid: int, entry_unitaries: dict[int, np.ndarray],
                input_bits: dict[int, tuple[int, ...]]) -> QuantumState:
    """Part state after input preparation, departing rotations, circuit, and
    the incoming-cut inverse rotations (everything except the setting)."""
    part = plan.parts[pid]
    nq = part.circuit.n
    bits = [0] * nq
    for cid, qs in part.departing:
        for q, b in zip(qs, input_bits[cid]):
            bits[q] = int(b)
    index = 0
    for b in bits:
        index = (index << 1) | b
    state = QuantumState.basis(nq, index)
    for cid, qs in part.departing:
        state = apply_gate(state, unitary(qs, entry_unitaries[cid], name="cutcfg"))
    for gate in part.circuit.gates:
        state = apply_gate(state, gate)
    for cid, qs in part.incoming:
        u = entry_unitaries[cid]
        state = apply_gate(state, unitary(qs, u.conj().T, name="cutcfg"))
    return state


def _split_outcomes(probs: np.ndarray, part: PartSpec) -> np.ndarray:
    """Reshape a local outcome table into (setting outcomes, incoming outcomes)."""
    nq = part.circuit.n
    s_locals = part.setting_locals
    c_locals = part.incoming_locals
    tensor = probs.reshape([2] * nq)
    tensor = np.transpose(tensor, s_locals + c_locals)
    return np.ascontiguousarray(tensor).reshape(2 ** len(s_locals), 2 ** len(c_locals))


def execute_part(
    plan: CutPlan,
    pid: int,
    config: dict[int, ConfigEntry],
    cut_inputs: dict[int, object],
    setting: Sequence[np.ndarray],
    *,
    shots: int | None = None,
    stream: np.random.Generator | None = None,
) -> np.ndarray:
    """Run one part under a cut configuration and measurement setting.

    ``cut_inputs`` maps each departing cut to a basis index or the MIXED
    marker (realized as the uniform average of the basis-state runs).
    Returns a (2^s, 2^c) table of probabilities (exact mode) or counts.
    """
    part = plan.parts[pid]
    incident = plan.incident_cuts(pid)
    if set(config) != set(incident):
        raise SimulationError(f"config covers cuts {sorted(config)} but part {pid} touches {incident}")
    for cid, _ in part.departing:
        if cid not in cut_inputs:
            raise SimulationError(f"missing input for departing cut {cid}")
    mixed = [cid for cid, _ in part.departing if cut_inputs[cid] == MIXED]
    basis_choices = []
    for cid, _ in sorted(part.departing):
        w = plan.cuts[cid].width
        if cid in mixed:
            basis_choices.append([(cid, u) for u in range(2**w)])
        else:
            basis_choices.append([(cid, int(cut_inputs[cid]))])
    unit = {cid: config[cid].unitary for cid in incident}
    tables = []
    for combo in itertools.product(*basis_choices) if basis_choices else [()]:
        input_bits = {
            cid: tuple((u >> (plan.cuts[cid].width - 1 - i)) & 1 for i in range(plan.cuts[cid].width))
            for cid, u in combo
        }
        state = _base_state(plan, pid, unit, input_bits)
        full_setting: list[np.ndarray | None] = [None] * part.circuit.n
        if len(setting) != len(part.setting_locals):
            raise SimulationError("setting length does not match the part's measured qubits")
        for q, u in zip(part.setting_locals, setting):
            full_setting[q] = u
        probs = measurement_probabilities(state, full_setting)
        tables.append(_split_outcomes(probs, part))
    table = np.mean(tables, axis=0)
    if shots is None:
        return table
    if stream is None:
        raise SimulationError("sampled mode needs an RNG substream")
    counts = sample_shots(table.reshape(-1), shots, stream)
    return counts.reshape(table.shape)


# ---------------------------------------------------------------------------
# Shot records


RecordKey = tuple[int, tuple[int, ...], tuple[int, ...], int]  # part, config, input, setting


@dataclass
class ShotRecord:
    """Bitstring statistics keyed by (part, configuration, cut input, setting).

    Values are (2^s, 2^c) arrays: integer counts summing to ``shots`` per
    key, or exact probability tables when ``shots`` is None.  The digest of
    the settings ensemble the record was taken under travels along so the
    estimators can reject mismatched record pairs.
    """

    platform: int
    shots: int | None
    data: dict[RecordKey, np.ndarray] = field(default_factory=dict)
    ensemble_digest: str | None = None

    def merge(self, other: "ShotRecord") -> "ShotRecord":
        if other.platform != self.platform or other.shots != self.shots:
            raise SimulationError("cannot merge records from different collections")
        if self.ensemble_digest != other.ensemble_digest:
            raise SimulationError("cannot merge records from different ensembles")
        overlap = self.data.keys() & other.data.keys()
        for key in overlap:
            if not np.array_equal(self.data[key], other.data[key]):
                raise SimulationError(f"conflicting entries for {key}")
        merged = dict(self.data)
        merged.update(other.data)
        return ShotRecord(self.platform, self.shots, merged, self.ensemble_digest)

    def frequency(self, key: RecordKey) -> np.ndarray:
        value = self.data[key]
        if self.shots is None:
            return value
        return value / self.shots


def _input_bits_for(plan: CutPlan, part: PartSpec, input_code: tuple[int, ...]) -> dict:
    bits = {}
    for k, (cid, _) in enumerate(sorted(part.departing)):
        w = plan.cuts[cid].width
        bits[cid] = tuple((input_code[k] >> (w - 1 - i)) & 1 for i in range(w))
    return bits


def _execute_record(
    plan: CutPlan,
    pid: int,
    entry_unitaries: dict[int, np.ndarray],
    config_code: tuple[int, ...],
    input_code: tuple[int, ...],
    settings,
    t: int,
    *,
    shots: int | None,
    seed: int,
    platform: int,
    repetition: int,
    noise,
    stream_tag: str,
    base_cache: dict | None,
    depolarize: dict[int, float] | None = None,
) -> np.ndarray:
    part = plan.parts[pid]
    cache_key = (pid, config_code, input_code)
    base = base_cache.get(cache_key) if base_cache is not None else None
    if base is None:
        base = _base_state(plan, pid, entry_unitaries, _input_bits_for(plan, part, input_code))
        if depolarize:
            from .noise import depolarize_qubit

            for local, wire in enumerate(part.wires):
                p = depolarize.get(wire, 0.0)
                if p > 0.0:
                    base = depolarize_qubit(base, local, p)
        if base_cache is not None:
            base_cache[cache_key] = base
    rotated = base
    for q, u in zip(part.setting_locals, settings.setting(pid, t)):
        rotated = apply_gate(rotated, unitary((q,), u, name="setting"))
    probs = measurement_probabilities(rotated, [None] * part.circuit.n)
    tbl = _split_outcomes(probs, part)
    if noise is not None:
        order = part.setting_locals + part.incoming_locals
        wires = [part.wires[q] for q in order]
        tbl = noise.corrupt_table(tbl, wires)
    if shots is None:
        return tbl
    stream = substream(seed, stream_tag, platform, repetition, pid, config_code, input_code, t)
    return sample_shots(tbl.reshape(-1), shots, stream).reshape(tbl.shape)


def run_record_key(
    plan: CutPlan,
    table: CutConfigTable,
    settings,
    pid: int,
    config_code: tuple[int, ...],
    input_code: tuple[int, ...],
    t: int,
    *,
    shots: int | None,
    seed: int,
    platform: int,
    repetition: int = 0,
    noise=None,
    stream_tag: str = "shots",
    base_cache: dict | None = None,
    depolarize: dict[int, float] | None = None,
) -> np.ndarray:
    """One (part, configuration, input, setting) execution.

    This is the single code path behind both in-process record collection
    and the platform-process job handler, so the two produce byte-identical
    counts for equal substream keys.
    """
    incident = plan.incident_cuts(pid)
    entry_unitaries = {cid: table.entries[e].unitary for cid, e in zip(incident, config_code)}
    return _execute_record(
        plan, pid, entry_unitaries, config_code, input_code, settings, t,
        shots=shots, seed=seed, platform=platform, repetition=repetition,
        noise=noise, stream_tag=stream_tag, base_cache=base_cache, depolarize=depolarize,
    )


def collect_records(
    plan: CutPlan,
    table: CutConfigTable,
    settings,
    *,
    shots: int | None,
    seed: int,
    platform: int,
    repetition: int = 0,
    noise=None,
    stream_tag: str = "shots",
    depolarize: dict[int, float] | None = None,
) -> ShotRecord:
    """Execute every (part, configuration, input, setting) and record outcomes.

    ``settings`` must expose counts() and setting(part, t); the shared
    UnitaryEnsemble does.  Shot sampling draws from a substream keyed by
    (platform, part, config, input, setting, repetition), so identical
    arguments reproduce identical records anywhere.  ``depolarize`` maps a
    wire to a depolarizing strength applied to the prepared part state, the
    synthetic-noise knob for mixed-state studies.
    """
    record = ShotRecord(platform, shots, ensemble_digest=_settings_digest(settings))
    per_part = enumerate_configurations(plan, table)
    counts = settings.counts()
    cache: dict = {}
    for pid in range(plan.r):
        for config_code, input_code in per_part[pid]:
            for t in range(counts[pid]):
                record.data[(pid, config_code, input_code, t)] = run_record_key(
                    plan, table, settings, pid, config_code, input_code, t,
                    shots=shots, seed=seed, platform=platform, repetition=repetition,
                    noise=noise, stream_tag=stream_tag, base_cache=cache,
                    depolarize=depolarize,
                )
    return record


def _settings_digest(settings) -> str | None:
    digest = getattr(settings, "digest", None)
    return digest() if callable(digest) else None


def collect_records_sampled(
    plan: CutPlan,
    assignments,
    settings,
    *,
    shots: int | None,
    seed: int,
    platform: int,
    repetition: int = 0,
    noise=None,
    stream_tag: str = "shots",
) -> ShotRecord:
    """Record collection for sampled Bernoulli rounds.

    Round ``ell`` fixes one (z, Clifford) per cut; the record is keyed by the
    round index in place of table-entry indices, and departing inputs are
    enumerated over the basis states so the estimator can form both the
    matched-outcome and the maximally-mixed branches.
    """
    record = ShotRecord(platform, shots, ensemble_digest=_settings_digest(settings))
    counts = settings.counts()
    cache: dict = {}
    for ell, asg in enumerate(assignments):
        for pid in range(plan.r):
            part = plan.parts[pid]
            incident = plan.incident_cuts(pid)
            config_code = tuple([ell] * len(incident))
            entry_unitaries = {cid: asg.unitaries[cid] for cid in incident}
            dep = sorted(cid for cid, _ in part.departing)
            input_spaces = [range(2 ** plan.cuts[cid].width) for cid in dep]
            for input_code in itertools.product(*input_spaces) if input_spaces else [()]:
                for t in range(counts[pid]):
                    record.data[(pid, config_code, tuple(input_code), t)] = _execute_record(
                        plan, pid, entry_unitaries, config_code, tuple(input_code), settings, t,
                        shots=shots, seed=seed, platform=platform, repetition=repetition,
                        noise=noise, stream_tag=stream_tag, base_cache=cache,
                    )
    return record


# ---------------------------------------------------------------------------
# Exact reconstruction (oracle-facing)


def reconstruct_density(plan: CutPlan, table: CutConfigTable) -> QuantumState:
    """Exact density matrix rebuilt from the signed configuration mixture.

    Evaluates the full quasiprobability sum over configurations, cut
    outcomes, and inputs, gluing parts through the cut wires.  Used to
    certify that cutting reproduces the uncut output state.
    """
    if any(c.width != 1 for c in plan.cuts):
        raise SimulationError("reconstruction implemented for single-qubit cuts")
    weights = table.signed_weights()
    total = None
    entry_ids = range(len(table.entries))
    for assignment in itertools.product(entry_ids, repeat=plan.k2):
        w = float(np.prod([weights[e] for e in assignment]))
        rho = _assemble_density(plan, table, dict(enumerate(assignment)))
        total = w * rho if total is None else total + w * rho
    # reorder from part-setting-wire order to global wire order
    wire_order = [w for part in plan.parts for w in part.setting_wires]
    perm = np.argsort(wire_order)
    tensor = total.reshape([2] * (2 * plan.n))
    tensor = np.transpose(tensor, list(perm) + [plan.n + p for p in perm])
    rho = np.ascontiguousarray(tensor).reshape(2**plan.n, 2**plan.n)
    return QuantumState(rho, "density", validate=False)


def _assemble_density(plan: CutPlan, table: CutConfigTable, assignment: dict[int, int]) -> np.ndarray:
    """Joint unnormalized output over all parts for one configuration choice."""
    order = _topological_parts(plan)
    # joint[c bits so far][ket wires, bra wires] accumulated part by part
    pieces: dict[tuple, np.ndarray] = {(): np.array(1.0, dtype=complex)}
    c_index: list[tuple[int, int]] = []  # (cut_id, position in the c-tuple)
    for pid in order:
        part = plan.parts[pid]
        entry_unit = {cid: table.entries[assignment[cid]].unitary for cid in plan.incident_cuts(pid)}
        new_pieces: dict[tuple, np.ndarray] = {}
        dep = sorted(part.departing)
        inc = sorted(part.incoming)
        for c_bits, acc in pieces.items():
            input_options = []
            for cid, _ in dep:
                z = table.entries[assignment[cid]].z
                pos = next(p for c, p in c_index if c == cid)
                if z == 0:
                    input_options.append([(c_bits[pos], 1.0)])
                else:
                    input_options.append([(0, 0.5), (1, 0.5)])
            for combo in itertools.product(*input_options) if input_options else [()]:
                w_in = float(np.prod([wgt for _, wgt in combo])) if combo else 1.0
                input_bits = {cid: (b,) for (cid, _), (b, _) in zip(dep, combo)}
                state = _base_state(plan, pid, entry_unit, input_bits)
                rho = state.to_density().data
                # split local qubits into setting (kept) and incoming (measured)
                nq = part.circuit.n
                s_loc, c_loc = part.setting_locals, part.incoming_locals
                tensor = rho.reshape([2] * (2 * nq))
                perm = list(s_loc) + list(c_loc)
                tensor = np.transpose(tensor, perm + [nq + p for p in perm])
                dim_s, dim_c = 2 ** len(s_loc), 2 ** len(c_loc)
                tensor = tensor.reshape(dim_s, dim_c, dim_s, dim_c)
                for c_out in range(dim_c):
                    block = tensor[:, c_out, :, c_out]
                    new_key = c_bits + tuple((c_out >> (len(c_loc) - 1 - i)) & 1 for i in range(len(c_loc)))
                    piece = w_in * np.multiply.outer(acc, block) if acc.ndim else w_in * acc * block
                    if acc.ndim:
                        # fuse (old ket, old bra, new ket, new bra) -> (ket, bra)
                        d_old = int(np.sqrt(acc.size))
                        piece = piece.reshape(d_old, d_old, dim_s, dim_s)
                        piece = piece.transpose(0, 2, 1, 3).reshape(d_old * dim_s, d_old * dim_s)
                    if new_key in new_pieces:
                        new_pieces[new_key] += piece
                    else:
                        new_pieces[new_key] = piece
        pieces = new_pieces
        for cid, _ in inc:
            c_index.append((cid, len(c_index)))
    return sum(pieces.values())


# ---------------------------------------------------------------------------
# Serialization


def write_record_csv(record: ShotRecord, path) -> None:
    """Flat rows: platform, part, config, unitary_index, cut_input, outcome, count.

    The outcome field is 'sbits.cbits' (the incoming-cut half omitted when
    the part has no incoming cuts); counts are integers in sampled mode and
    probabilities in exact mode.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["platform", "part", "config", "unitary_index", "cut_input", "outcome", "count"])
        for (pid, config, cut_input, t), tbl in sorted(record.data.items()):
            n_s = int(np.log2(tbl.shape[0]))
            n_c = int(np.log2(tbl.shape[1])) if tbl.shape[1] > 1 else 0
            for si in range(tbl.shape[0]):
                for ci in range(tbl.shape[1]):
                    value = tbl[si, ci]
                    if record.shots is not None and value == 0:
                        continue
                    outcome = bitstring(si, n_s) if n_s else ""
                    if n_c:
                        outcome += "." + bitstring(ci, n_c)
                    writer.writerow([
                        record.platform,
                        pid,
                        "-".join(str(e) for e in config),
                        t,
                        "-".join(str(b) for b in cut_input),
                        outcome,
                        int(value) if record.shots is not None else repr(float(value)),
                    ])


def read_record_csv(path, shots: int | None) -> ShotRecord:
    record = None
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        staged: dict[RecordKey, dict] = {}
        platform = None
        for row in reader:
            platform = int(row["platform"])
            config = tuple(int(x) for x in row["config"].split("-")) if row["config"] else ()
            cut_input = tuple(int(x) for x in row["cut_input"].split("-")) if row["cut_input"] else ()
            key = (int(row["part"]), config, cut_input, int(row["unitary_index"]))
            s_part, _, c_part = row["outcome"].partition(".")
            si = int(s_part, 2) if s_part else 0
            ci = int(c_part, 2) if c_part else 0
            cell = staged.setdefault(key, {})
            cell[(si, ci, len(s_part), len(c_part))] = float(row["count"])
        record = ShotRecord(platform if platform is not None else 1, shots)
        for key, cells in staged.items():
            n_s = max(k[2] for k in cells)
            n_c = max(k[3] for k in cells)
            tbl = np.zeros((2**n_s, 2**n_c))
            for (si, ci, _, _), v in cells.items():
                tbl[si, ci] = v
            record.data[key] = tbl if shots is None else tbl.astype(np.int64)
    return record
