"""Two-platform execution harness.

Each platform runs as an independent process that knows its own circuits
(loaded from a local setup file, never transmitted) and exchanges only the
protocol messages: a seed to derive the shared measurement ensemble, job
descriptions, and outcome counts.  The coordinator owns all estimator math.

The same job-execution code backs an in-process pair of platforms, so a
distributed run reproduces the in-process result bit-exactly for equal
master seeds.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import tempfile
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cutting, phase, sim
from .ensembles import CutConfigTable, cut_config_table, shared_ensemble
from .noise import ReadoutNoiseModel, calibrate_cut_factor
from .protocol import (
    PROTOCOL_VERSION,
    ProtocolError,
    ProtocolMessage,
    validate_message,
)
from .rng import derive_seed


class HarnessError(RuntimeError):
    pass


class TransportError(HarnessError):
    """Connection lost, timed out, or closed mid-session."""


# ---------------------------------------------------------------------------
# Platform setup (local, private) and job execution


@dataclass
class PlatformSetup:
    """Everything a platform knows locally and never sends over the wire."""

    platform: int  # 1 or 2
    family: str  # "ghz", "zero", or "phase"
    n: int
    layers: int = 4
    params: list | None = None  # phase: per-state ansatz parameters (private)
    noise: ReadoutNoiseModel | None = None
    mitigate: bool = False
    calibration_rounds: int = 10000
    seed_offset: int = 0  # fault-injection knob for tests
    duplicate_shots: bool = False  # fault-injection knob for tests

    def plans(self) -> list[cutting.CutPlan]:
        if self.family == "ghz":
            return [cutting.ghz_cut_plan(self.n)]
        if self.family == "zero":
            mid = (self.n - 1) // 2
            w = mid + 1
            return [
                cutting.chain_cut_plan(
                    self.n,
                    [
                        (sim.Circuit(w, ()), tuple(range(w))),
                        (sim.Circuit(self.n - mid, ()), tuple(range(mid, self.n))),
                    ],
                    [mid],
                )
            ]
        if self.family == "phase":
            shape = phase.AnsatzShape(self.n, self.layers)
            return [phase.ansatz_plan(shape, np.asarray(p)) for p in self.params]
        raise HarnessError(f"unknown state family {self.family!r}")

    def to_json(self) -> str:
        body = {
            "platform": self.platform,
            "family": self.family,
            "n": self.n,
            "layers": self.layers,
            "params": self.params,
            "noise": json.loads(self.noise.to_json()) if self.noise else None,
            "mitigate": self.mitigate,
            "calibration_rounds": self.calibration_rounds,
            "seed_offset": self.seed_offset,
            "duplicate_shots": self.duplicate_shots,
        }
        return json.dumps(body)

    @classmethod
    def from_json(cls, text: str) -> "PlatformSetup":
        body = json.loads(text)
        noise_model = None
        if body.get("noise"):
            noise_model = ReadoutNoiseModel.from_json(json.dumps(body["noise"]))
        return cls(
            platform=body["platform"],
            family=body["family"],
            n=body["n"],
            layers=body.get("layers", 4),
            params=body.get("params"),
            noise=noise_model,
            mitigate=body.get("mitigate", False),
            calibration_rounds=body.get("calibration_rounds", 10000),
            seed_offset=body.get("seed_offset", 0),
            duplicate_shots=body.get("duplicate_shots", False),
        )


def state_seed(master_seed: int, state_index: int) -> int:
    return derive_seed(master_seed, "state", state_index)


class PlatformRuntime:
    """Executes jobs against the platform's local circuits."""

    def __init__(self, setup: PlatformSetup):
        self.setup = setup
        self._plans = setup.plans()
        self.table = cut_config_table()
        self.master_seed: int | None = None
        self.ensemble = None
        self._cache: dict = {}

    @property
    def r(self) -> int:
        return self._plans[0].r

    def seed(self, master_seed: int, spec: dict) -> str:
        self.master_seed = master_seed + self.setup.seed_offset
        sizes = tuple(spec.get("part_sizes", self._plans[0].setting_sizes()))
        self.ensemble = shared_ensemble(
            sizes, spec.get("N", 1), self.master_seed, spec.get("mode", "random")
        )
        self._cache.clear()
        return self.ensemble.digest()

    def calibrate(self) -> tuple[float, int]:
        wire = self._plans[0].cuts[0].wires[0] if self._plans[0].cuts else 0
        report = calibrate_cut_factor(
            self.setup.noise,
            self.setup.calibration_rounds,
            self.master_seed,
            platform=self.setup.platform,
            wire=wire,
        )
        return report.f_hat, report.rounds

    def run_job(
        self, part_id: int, config_code: tuple[int, ...], input_code: tuple[int, ...],
        unitary_index: int, shots: int
    ) -> np.ndarray:
        if self.ensemble is None:
            raise HarnessError("job received before seeding")
        state_idx, pid = divmod(part_id, self.r)
        plan = self._plans[state_idx]
        return cutting.run_record_key(
            plan, self.table, self.ensemble, pid, config_code, input_code, unitary_index,
            shots=shots, seed=state_seed(self.master_seed, state_idx),
            platform=self.setup.platform, noise=self.setup.noise,
            base_cache=self._cache.setdefault(state_idx, {}),
        )


# ---------------------------------------------------------------------------
# Wire helpers


def _encode_counts(table: np.ndarray) -> dict[str, int]:
    n_s = int(np.log2(table.shape[0])) if table.shape[0] > 1 else 0
    n_c = int(np.log2(table.shape[1])) if table.shape[1] > 1 else 0
    out: dict[str, int] = {}
    for si in range(table.shape[0]):
        for ci in range(table.shape[1]):
            value = int(table[si, ci])
            if value == 0:
                continue
            key = sim.bitstring(si, n_s) if n_s else ""
            if n_c:
                key += "." + sim.bitstring(ci, n_c)
            out[key] = value
    return out


def _decode_counts(counts: dict[str, int], shape: tuple[int, int]) -> np.ndarray:
    table = np.zeros(shape, dtype=np.int64)
    for key, value in counts.items():
        s_part, _, c_part = key.partition(".")
        si = int(s_part, 2) if s_part else 0
        ci = int(c_part, 2) if c_part else 0
        table[si, ci] = value
    return table


def _config_str(code: tuple[int, ...]) -> str:
    return "-".join(str(e) for e in code)


def _parse_config(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split("-")) if text else ()


# ---------------------------------------------------------------------------
# Message-framed socket


class MessageStream:
    def __init__(self, sock: socket.socket, timeout: float, transcript: list[str] | None = None):
        self.sock = sock
        self.sock.settimeout(timeout)
        self.buffer = b""
        self.transcript = transcript
        self.last_seen: int | None = None
        self.sent = -1

    def send(self, msg: ProtocolMessage) -> None:
        line = msg.to_json()
        if self.transcript is not None:
            self.transcript.append("send " + line)
        try:
            self.sock.sendall(line.encode() + b"\n")
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc
        self.sent = msg.seq

    def recv(self) -> ProtocolMessage:
        while b"\n" not in self.buffer:
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout as exc:
                raise TransportError("timed out waiting for a message") from exc
            except OSError as exc:
                raise TransportError(f"recv failed: {exc}") from exc
            if not chunk:
                raise TransportError("connection closed mid-session")
            self.buffer += chunk
        line, _, self.buffer = self.buffer.partition(b"\n")
        text = line.decode()
        if self.transcript is not None:
            self.transcript.append("recv " + text)
        msg = validate_message(text, self.last_seen)
        self.last_seen = msg.seq
        return msg

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# Platform server (subprocess entry point)


def serve_platform(host: str, port: int, setup: PlatformSetup) -> None:
    sock = socket.create_connection((host, port), timeout=300.0)
    stream = MessageStream(sock, timeout=300.0)
    runtime = PlatformRuntime(setup)
    session = ""
    seq = -1

    def send(mtype: str, payload: dict) -> None:
        nonlocal seq
        seq += 1
        stream.send(ProtocolMessage(mtype, session, seq, payload))

    hello = stream.recv()
    if hello.type != "HELLO":
        raise ProtocolError("expected HELLO")
    if hello.payload["protocol_version"] != PROTOCOL_VERSION:
        raise ProtocolError("protocol version mismatch")
    session = hello.session
    send("HELLO", {"protocol_version": PROTOCOL_VERSION, "role": f"platform-{setup.platform}"})
    while True:
        msg = stream.recv()
        if msg.type == "DONE":
            break
        if msg.type == "SEED":
            digest = runtime.seed(msg.payload["master_seed"], msg.payload["ensemble_spec"])
            send("SEED", {"master_seed": msg.payload["master_seed"], "ensemble_spec": {"digest": digest}})
            if setup.mitigate:
                f_hat, rounds = runtime.calibrate()
                send("CALIB", {"f_hat": float(f_hat), "rounds": int(rounds)})
        elif msg.type == "JOB":
            table = runtime.run_job(
                msg.payload["part_id"],
                _parse_config(msg.payload["config_id"]),
                _parse_config(msg.payload["cut_input"]),
                msg.payload["unitary_index"],
                msg.payload["shots"],
            )
            payload = {"job_ref": msg.seq, "counts": _encode_counts(table)}
            send("SHOTS", payload)
            if setup.duplicate_shots:
                send("SHOTS", payload)
        else:
            raise ProtocolError(f"unexpected message type {msg.type}")
    stream.close()


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="crosscut platform process")
    parser.add_argument("--connect", required=True, help="host:port of the coordinator")
    parser.add_argument("--setup", required=True, help="path to the local platform setup JSON")
    args = parser.parse_args(argv)
    host, _, port = args.connect.rpartition(":")
    setup = PlatformSetup.from_json(Path(args.setup).read_text())
    serve_platform(host, int(port), setup)
    return 0


# ---------------------------------------------------------------------------
# Coordinator


@dataclass
class SessionResult:
    records: dict[int, cutting.ShotRecord] = field(default_factory=dict)
    f_hat: dict[int, float] = field(default_factory=dict)


class PlatformLink:
    """Coordinator-side handle to one platform (socket or in-process)."""

    def seed(self, master_seed: int, spec: dict, mitigate: bool) -> tuple[str, float | None]:
        raise NotImplementedError

    def run_job(self, part_id, config_code, input_code, unitary_index, shots) -> np.ndarray:
        raise NotImplementedError

    def done(self) -> None:
        pass

    def close(self) -> None:
        pass


class LocalPlatformLink(PlatformLink):
    def __init__(self, setup: PlatformSetup):
        self.runtime = PlatformRuntime(setup)
        self.setup = setup

    def seed(self, master_seed, spec, mitigate):
        digest = self.runtime.seed(master_seed, spec)
        f_hat = None
        if mitigate:
            f_hat, _ = self.runtime.calibrate()
        return digest, f_hat

    def run_job(self, part_id, config_code, input_code, unitary_index, shots):
        return self.runtime.run_job(part_id, config_code, input_code, unitary_index, shots)


class SocketPlatformLink(PlatformLink):
    def __init__(self, stream: MessageStream, session: str, process: subprocess.Popen | None):
        self.stream = stream
        self.session = session
        self.process = process
        self.seq = -1
        self.received: dict[int, dict] = {}

    def _send(self, mtype: str, payload: dict) -> int:
        self.seq += 1
        self.stream.send(ProtocolMessage(mtype, self.session, self.seq, payload))
        return self.seq

    def _recv_shots(self, job_ref: int) -> dict:
        while job_ref not in self.received:
            msg = self.stream.recv()
            if msg.type != "SHOTS":
                raise ProtocolError(f"expected SHOTS, got {msg.type}")
            ref = msg.payload["job_ref"]
            if ref in self.received:
                continue  # idempotent retry: a duplicate job_ref changes nothing
            self.received[ref] = msg.payload["counts"]
        return self.received[job_ref]

    def seed(self, master_seed, spec, mitigate):
        self._send("SEED", {"master_seed": master_seed, "ensemble_spec": spec})
        ack = self.stream.recv()
        if ack.type != "SEED":
            raise ProtocolError("expected SEED acknowledgement")
        digest = ack.payload["ensemble_spec"].get("digest", "")
        f_hat = None
        if mitigate:
            calib = self.stream.recv()
            if calib.type != "CALIB":
                raise ProtocolError("expected CALIB")
            f_hat = calib.payload["f_hat"]
        return digest, f_hat

    def run_job(self, part_id, config_code, input_code, unitary_index, shots):
        ref = self._send(
            "JOB",
            {
                "part_id": int(part_id),
                "config_id": _config_str(config_code),
                "unitary_index": int(unitary_index),
                "cut_input": _config_str(input_code),
                "shots": int(shots),
            },
        )
        counts = self._recv_shots(ref)
        return counts

    def done(self):
        try:
            self._send("DONE", {})
        except TransportError:
            pass

    def close(self):
        self.stream.close()
        if self.process is not None:
            try:
                self.process.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.process.kill()


class PlatformPair:
    """Both platforms plus the shared session bookkeeping."""

    def __init__(self, links: dict[int, PlatformLink], transcript: list[str] | None = None):
        self.links = links
        self.transcript = transcript

    def close(self) -> None:
        for link in self.links.values():
            link.done()
        for link in self.links.values():
            link.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def local_pair(setup1: PlatformSetup, setup2: PlatformSetup) -> PlatformPair:
    return PlatformPair({1: LocalPlatformLink(setup1), 2: LocalPlatformLink(setup2)})


def spawn_pair(
    setup1: PlatformSetup,
    setup2: PlatformSetup,
    *,
    timeout: float = 300.0,
    session_tag: str = "session",
) -> PlatformPair:
    """Launch both platforms as subprocesses and complete the handshake."""
    transcript: list[str] = []
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.bind(("127.0.0.1", 0))
    listener.listen(2)
    listener.settimeout(timeout)
    host, port = listener.getsockname()
    tmp = Path(tempfile.mkdtemp(prefix="crosscut-harness-"))
    processes = []
    for setup in (setup1, setup2):
        path = tmp / f"platform{setup.platform}.json"
        path.write_text(setup.to_json())
        processes.append(
            subprocess.Popen(
                [sys.executable, "-m", "crosscut.harness", "--connect", f"{host}:{port}", "--setup", str(path)],
                stdout=subprocess.DEVNULL,
            )
        )
    links: dict[int, PlatformLink] = {}
    try:
        for _ in range(2):
            conn, _addr = listener.accept()
            stream = MessageStream(conn, timeout, transcript)
            session = f"{session_tag}-{uuid.uuid4().hex[:12]}"
            hello = ProtocolMessage("HELLO", session, 0, {"protocol_version": PROTOCOL_VERSION, "role": "coordinator"})
            stream.send(hello)
            reply = stream.recv()
            if reply.type != "HELLO":
                raise ProtocolError("platform did not HELLO")
            if reply.payload["protocol_version"] != PROTOCOL_VERSION:
                raise ProtocolError("protocol version mismatch")
            role = reply.payload["role"]
            number = int(role.rsplit("-", 1)[1])
            link = SocketPlatformLink(stream, session, processes[number - 1])
            link.seq = 0  # HELLO used seq 0
            links[number] = link
    except socket.timeout as exc:
        raise TransportError("platforms did not connect in time") from exc
    finally:
        listener.close()
    if set(links) != {1, 2}:
        raise HarnessError("expected exactly platform-1 and platform-2")
    return PlatformPair(links, transcript)


def collect_via_link(
    link: PlatformLink,
    plan: cutting.CutPlan,
    table: CutConfigTable,
    ensemble,
    *,
    state_index: int,
    shots: int,
    platform: int,
) -> cutting.ShotRecord:
    """Gather a full ShotRecord for one prepared state through a link."""
    record = cutting.ShotRecord(platform, shots, ensemble_digest=ensemble.digest())
    per_part = cutting.enumerate_configurations(plan, table)
    counts = ensemble.counts()
    for pid in range(plan.r):
        part = plan.parts[pid]
        shape = (2 ** len(part.setting_locals), 2 ** len(part.incoming_locals))
        for config_code, input_code in per_part[pid]:
            for t in range(counts[pid]):
                raw = link.run_job(state_index * plan.r + pid, config_code, input_code, t, shots)
                if isinstance(raw, dict):
                    raw = _decode_counts(raw, shape)
                record.data[(pid, config_code, input_code, t)] = raw
    return record


def seed_pair(pair: PlatformPair, master_seed: int, spec: dict, *, mitigate: bool = False,
              expected_digest: str | None = None) -> dict[int, float | None]:
    """Seed both platforms and verify the ensemble digests match."""
    f_hats: dict[int, float | None] = {}
    digests = {}
    for number, link in sorted(pair.links.items()):
        digest, f_hat = link.seed(master_seed, spec, mitigate)
        digests[number] = digest
        f_hats[number] = f_hat
    reference = expected_digest if expected_digest is not None else digests[1]
    for number, digest in digests.items():
        if digest != reference:
            raise HarnessError(
                f"ensemble digest mismatch on platform {number}: seeding diverged before any job ran"
            )
    return f_hats


if __name__ == "__main__":
    sys.exit(main())
