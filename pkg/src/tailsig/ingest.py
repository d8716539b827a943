"""Transaction log parsing and fixed-length sample windows.

Two input formats are understood, both carrying the same three fields::

    timestamp,transaction_type,response_ms
    2013-02-04T08:00:01.250Z,login,142.0

or one JSON object per line with the keys ``timestamp``, ``transaction_type``
and ``response_ms``.  Timestamps are RFC 3339 strings or integer epoch
milliseconds; a single file must not mix the two.
"""
from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

CSV_HEADER = ("timestamp", "transaction_type", "response_ms")
FORMATS = ("csv", "ndjson")
DEFAULT_WINDOW_MS = 300_000
DEFAULT_MIN_SAMPLES = 30


class SchemaError(ValueError):
    """The input does not match the declared record schema."""


@dataclass(frozen=True)
class TransactionRecord:
    timestamp: int  # epoch milliseconds
    tx_type: str
    response_ms: float

    def __post_init__(self):
        if not self.tx_type:
            raise ValueError("tx_type must be non-empty")
        if not (self.response_ms >= 0.0) or math.isinf(self.response_ms):
            raise ValueError(f"response_ms must be finite and >= 0, got {self.response_ms!r}")


@dataclass(frozen=True)
class Reject:
    line_no: int
    reason: str

    def to_json(self) -> str:
        return json.dumps({"line_no": self.line_no, "reason": self.reason})


@dataclass
class ParseResult:
    records: list[TransactionRecord]
    rejects: list[Reject] = field(default_factory=list)

    @property
    def reject_count(self) -> int:
        return len(self.rejects)

    def write_rejects(self, fh: IO[str]) -> None:
        for r in self.rejects:
            fh.write(r.to_json() + "\n")


@dataclass(frozen=True)
class SampleWindow:
    window_start: int  # epoch ms, inclusive
    window_length: int  # ms
    records: tuple[TransactionRecord, ...]
    fittable: bool

    @property
    def arrival_count(self) -> int:
        return len(self.records)

    @property
    def window_end(self) -> int:
        return self.window_start + self.window_length

    def response_times(self) -> np.ndarray:
        return np.fromiter((r.response_ms for r in self.records), dtype=float, count=len(self.records))


# -- timestamps ---------------------------------------------------------------

def parse_rfc3339(text: str) -> int:
    """Convert an RFC 3339 timestamp to epoch milliseconds (naive means UTC)."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    # fromisoformat on 3.10 only accepts 3 or 6 fractional digits
    if "." in s:
        head, _, rest = s.partition(".")
        digits = ""
        for ch in rest:
            if not ch.isdigit():
                break
            digits += ch
        tail = rest[len(digits):]
        if not digits:
            raise ValueError(f"bad fractional seconds in {text!r}")
        s = f"{head}.{(digits + '000000')[:6]}{tail}"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - datetime(1970, 1, 1, tzinfo=timezone.utc)
    return (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000


def format_rfc3339(epoch_ms: int) -> str:
    dt = datetime.fromtimestamp(epoch_ms // 1000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{epoch_ms % 1000:03d}Z"


def _timestamp_kind(value) -> str:
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, int):
        return "epoch"
    if isinstance(value, str):
        v = value.strip()
        if v.lstrip("-").isdigit():
            return "epoch"
        return "rfc3339"
    raise ValueError(f"unsupported timestamp {value!r}")


def _timestamp_value(value, kind: str) -> int:
    if kind == "epoch":
        return int(value)
    return parse_rfc3339(value)


def _parse_response(value) -> float:
    if isinstance(value, bool):
        raise ValueError("boolean is not a response time")
    x = float(value)
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite response_ms {value!r}")
    if x < 0:
        raise ValueError(f"negative response_ms {value!r}")
    return x


# -- parsing ------------------------------------------------------------------

def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    data = source.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"input is not valid UTF-8: {exc}") from exc
    if data.startswith("\ufeff"):
        data = data[1:]
    return data.splitlines()


def parse_records(source, fmt: str = "csv") -> ParseResult:
    """Parse a byte stream of transaction records.

    Lines that fail to parse are collected in ``ParseResult.rejects`` and
    processing continues.  A bad CSV header or a file mixing timestamp
    styles raises :class:`SchemaError`.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    lines = _iter_lines(source)
    records: list[TransactionRecord] = []
    rejects: list[Reject] = []
    ts_kind = None

    start = 0
    if fmt == "csv":
        if not lines:
            raise SchemaError("missing CSV header")
        header = tuple(h.strip() for h in lines[0].split(","))
        if header != CSV_HEADER:
            raise SchemaError(f"CSV header {lines[0]!r} does not match {','.join(CSV_HEADER)!r}")
        start = 1

    for idx in range(start, len(lines)):
        line_no = idx + 1
        line = lines[idx]
        if not line.strip():
            continue
        try:
            if fmt == "csv":
                parts = line.split(",")
                if len(parts) != 3:
                    raise ValueError(f"expected 3 fields, got {len(parts)}")
                raw_ts, tx_type, raw_resp = (p.strip() for p in parts)
            else:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                missing = [k for k in CSV_HEADER if k not in obj]
                if missing:
                    raise ValueError(f"missing keys {missing}")
                raw_ts, tx_type, raw_resp = obj["timestamp"], obj["transaction_type"], obj["response_ms"]
                if not isinstance(tx_type, str):
                    raise ValueError("transaction_type must be a string")
            kind = _timestamp_kind(raw_ts)
        except ValueError as exc:
            rejects.append(Reject(line_no, str(exc)))
            continue

        if ts_kind is None:
            ts_kind = kind
        elif kind != ts_kind:
            raise SchemaError(f"line {line_no}: mixed timestamp formats ({ts_kind} and {kind})")

        try:
            rec = TransactionRecord(_timestamp_value(raw_ts, kind), tx_type, _parse_response(raw_resp))
        except ValueError as exc:
            rejects.append(Reject(line_no, str(exc)))
            continue
        records.append(rec)

    if rejects:
        logger.warning("rejected %d of %d data lines", len(rejects), len(records) + len(rejects))
    return ParseResult(records, rejects)


def read_records(path, fmt: str = "csv") -> ParseResult:
    with open(path, "rb") as fh:
        return parse_records(fh, fmt)


def write_records(records: Iterable[TransactionRecord], fh: IO[str], fmt: str = "csv",
                  epoch_timestamps: bool = False) -> None:
    """Serialize records in the same format ``parse_records`` reads."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    if fmt == "csv":
        fh.write(",".join(CSV_HEADER) + "\n")
    for r in records:
        ts = r.timestamp if epoch_timestamps else format_rfc3339(r.timestamp)
        if fmt == "csv":
            fh.write(f"{ts},{r.tx_type},{r.response_ms:.3f}\n")
        else:
            fh.write(json.dumps({"timestamp": ts, "transaction_type": r.tx_type,
                                 "response_ms": round(r.response_ms, 3)}) + "\n")


# -- windowing ----------------------------------------------------------------

def window_records(records: Sequence[TransactionRecord], window_length: int = DEFAULT_WINDOW_MS,
                   min_samples: int = DEFAULT_MIN_SAMPLES) -> list[SampleWindow]:
    """Partition records into contiguous half-open windows ``[start, start + length)``.

    The first window starts at the earliest timestamp truncated to a multiple of
    ``window_length``.  Empty gaps still produce (unfittable) windows so window
    indices stay aligned with wall-clock time.
    """
    if window_length <= 0:
        raise ValueError("window_length must be positive")
    if not records:
        return []
    ordered = sorted(records, key=lambda r: r.timestamp)  # stable: ties keep source order
    origin = (ordered[0].timestamp // window_length) * window_length
    n_windows = (ordered[-1].timestamp - origin) // window_length + 1

    buckets: list[list[TransactionRecord]] = [[] for _ in range(n_windows)]
    for r in ordered:
        buckets[(r.timestamp - origin) // window_length].append(r)

    return [
        SampleWindow(origin + i * window_length, window_length, tuple(b), len(b) >= min_samples)
        for i, b in enumerate(buckets)
    ]
