"""Wire protocol for the two-platform sessions.

Messages are newline-delimited UTF-8 JSON objects carrying an envelope
(type, session, seq) plus a per-type payload.  Validation is strict: the
payload fields must exactly match the whitelist for the type, values must
satisfy their schemas, and sequence numbers must strictly increase per
sender within a session.  Nothing resembling circuit parameters, state
amplitudes, or data labels is representable, which is what makes a
transcript auditable for the federated setting.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

PROTOCOL_VERSION = 1

ROLES = ("coordinator", "platform-1", "platform-2")

ENVELOPE_FIELDS = ("type", "session", "seq")

PAYLOAD_FIELDS: dict[str, tuple[str, ...]] = {
    "HELLO": ("protocol_version", "role"),
    "SEED": ("master_seed", "ensemble_spec"),
    "JOB": ("part_id", "config_id", "unitary_index", "cut_input", "shots"),
    "SHOTS": ("job_ref", "counts"),
    "CALIB": ("f_hat", "rounds"),
    "DONE": (),
}

# ensemble_spec is the one structured payload value; its keys are pinned so
# a transcript scan can prove nothing else ever crossed the wire.
ENSEMBLE_SPEC_FIELDS = (
    "kind",
    "n",
    "parts",
    "part_sizes",
    "N",
    "mode",
    "states",
    "mitigate",
    "calibration_rounds",
    "digest",
)

_OUTCOME_RE = re.compile(r"^[01]*(\.[01]+)?$")
_CONFIG_RE = re.compile(r"^(\d+(-\d+)*)?$")


class ProtocolError(ValueError):
    """Malformed, out-of-order, or non-whitelisted message."""


@dataclass(frozen=True)
class ProtocolMessage:
    type: str
    session: str
    seq: int
    payload: dict

    def to_json(self) -> str:
        body = {"type": self.type, "session": self.session, "seq": self.seq}
        body.update(self.payload)
        return json.dumps(body, sort_keys=True, separators=(",", ":"))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ProtocolError(message)


def _check_counts(counts) -> None:
    _require(isinstance(counts, dict), "counts must be an object")
    for outcome, value in counts.items():
        _require(isinstance(outcome, str) and _OUTCOME_RE.match(outcome) is not None,
                 f"bad outcome key {outcome!r}")
        _require(isinstance(value, int) and value >= 0 and not isinstance(value, bool),
                 f"bad count for {outcome!r}")


def _check_ensemble_spec(spec) -> None:
    _require(isinstance(spec, dict), "ensemble_spec must be an object")
    for key, value in spec.items():
        _require(key in ENSEMBLE_SPEC_FIELDS, f"ensemble_spec field {key!r} not allowed")
        if key in ("n", "parts", "N", "states", "calibration_rounds"):
            _require(isinstance(value, int) and not isinstance(value, bool), f"{key} must be an integer")
        elif key == "part_sizes":
            _require(
                isinstance(value, list) and all(isinstance(v, int) for v in value),
                "part_sizes must be a list of integers",
            )
        elif key in ("kind", "mode", "digest"):
            _require(isinstance(value, str), f"{key} must be a string")
        elif key == "mitigate":
            _require(isinstance(value, bool), "mitigate must be a boolean")


_VALIDATORS = {
    "protocol_version": lambda v: isinstance(v, int) and v >= 1,
    "role": lambda v: v in ROLES,
    "master_seed": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
    "part_id": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
    "config_id": lambda v: isinstance(v, str) and _CONFIG_RE.match(v) is not None,
    "unitary_index": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
    "cut_input": lambda v: isinstance(v, str) and re.match(r"^(\d+(-\d+)*)?$", v) is not None,
    "shots": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1,
    "job_ref": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
    "f_hat": lambda v: isinstance(v, float) and 0.0 < v < 1.0,
    "rounds": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1,
}


def validate_message(raw: str | dict, last_seq: int | None = None) -> ProtocolMessage:
    """Parse and validate one message; raises ProtocolError on any violation."""
    if isinstance(raw, str):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"not valid JSON: {exc}") from exc
    else:
        obj = raw
    _require(isinstance(obj, dict), "message must be a JSON object")
    for field in ENVELOPE_FIELDS:
        _require(field in obj, f"missing envelope field {field!r}")
    mtype = obj["type"]
    _require(mtype in PAYLOAD_FIELDS, f"unknown message type {mtype!r}")
    _require(isinstance(obj["session"], str) and obj["session"], "session must be a nonempty string")
    seq = obj["seq"]
    _require(isinstance(seq, int) and not isinstance(seq, bool) and seq >= 0, "seq must be a nonnegative integer")
    if last_seq is not None:
        _require(seq > last_seq, f"seq {seq} does not increase past {last_seq}")
    allowed = PAYLOAD_FIELDS[mtype]
    payload = {k: v for k, v in obj.items() if k not in ENVELOPE_FIELDS}
    for key in payload:
        _require(key in allowed, f"field {key!r} not allowed in {mtype}")
    for key in allowed:
        _require(key in payload, f"{mtype} is missing field {key!r}")
    for key, value in payload.items():
        if key == "counts":
            _check_counts(value)
        elif key == "ensemble_spec":
            _check_ensemble_spec(value)
        else:
            _require(_VALIDATORS[key](value), f"bad value for {key!r}: {value!r}")
    return ProtocolMessage(mtype, obj["session"], seq, payload)


def scan_transcript(lines) -> list[str]:
    """Re-validate a recorded transcript; returns a list of violations.

    Each line is 'dir json' with dir in {send, recv}; per-sender sequence
    monotonicity is enforced per session, every payload is re-checked
    against the whitelist, and no numeric field other than f_hat may carry
    a float (so no angles, fields, or labels can hide anywhere).
    """
    violations: list[str] = []
    seqs: dict[tuple[str, str], int] = {}
    for i, line in enumerate(lines):
        direction, _, body = line.partition(" ")
        if direction not in ("send", "recv"):
            violations.append(f"line {i}: bad direction {direction!r}")
            continue
        try:
            obj = json.loads(body)
            key = (obj.get("session", ""), direction)
            msg = validate_message(obj, seqs.get(key))
            seqs[key] = msg.seq
        except ProtocolError as exc:
            violations.append(f"line {i}: {exc}")
            continue
        for field, value in msg.payload.items():
            if field == "f_hat":
                continue
            if isinstance(value, float):
                violations.append(f"line {i}: float value in field {field!r}")
    return violations
