"""On-disk formats: time-tag streams, histograms, key-value reports and CSV tables.

Byte layouts are documented in ``docs/formats.md``. All writers emit
``\\n`` line endings and locale-independent number formatting.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .events import PS_PER_NS, EventStream
from .histogram import CorrelationHistogram

FORMAT_VERSION = 1
TEXT_MAGIC = "# photonstream-timetags"
BINARY_MAGIC = b"PSTT"
HIST_MAGIC = "# photonstream-histogram"
REPORT_MAGIC = "# photonstream-report"
RECORD_DTYPE = np.dtype([("channel", "<u1"), ("timestamp", "<u8")])  # packed, 9 bytes
_BIN_PREFIX = struct.Struct("<4sHI")


class FormatError(ValueError):
    """Malformed or inconsistent file content."""


class UnsupportedVersionError(FormatError):
    """File written by a newer format version than this reader understands."""


class BinGeometryError(FormatError):
    pass


def _check_version(v) -> int:
    try:
        v = int(v)
    except (TypeError, ValueError):
        raise FormatError(f"bad version field {v!r}") from None
    if v > FORMAT_VERSION:
        raise UnsupportedVersionError(f"format version {v} is newer than supported version {FORMAT_VERSION}")
    if v < 1:
        raise FormatError(f"bad version {v}")
    return v


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --- time tags -------------------------------------------------------------

def write_timetags(events: EventStream, path, binary: bool = False, metadata: dict | None = None) -> None:
    """Write an event stream; ``metadata`` is echoed into the header (seed, parameters)."""
    if not events.is_sorted():
        raise ValueError("events must be sorted by time")
    if len(events) and events.time_ps[0] < 0:
        raise ValueError("timestamps must be non-negative")
    header = {"version": FORMAT_VERSION, "time_unit": "ps", "channels": 2}
    header.update({k: v for k, v in (metadata or {}).items() if k not in header})
    path = Path(path)
    if binary:
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        rec = np.empty(len(events), dtype=RECORD_DTYPE)
        rec["channel"] = events.channel
        rec["timestamp"] = events.time_ps.astype(np.uint64)
        with open(path, "wb") as fh:
            fh.write(_BIN_PREFIX.pack(BINARY_MAGIC, FORMAT_VERSION, len(blob)))
            fh.write(blob)
            fh.write(rec.tobytes())
        return
    lines = [TEXT_MAGIC]
    lines += [f"# {k}: {_fmt(v)}" for k, v in header.items()]
    lines.append("channel,timestamp_ps")
    body = "\n".join(lines) + "\n"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(body)
        if len(events):
            table = np.column_stack([events.channel.astype(np.int64), events.time_ps])
            np.savetxt(fh, table, fmt="%d", delimiter=",")


def read_timetags(path, with_header: bool = False):
    """Read either time-tag variant (detected from the first bytes)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        events, header = _read_binary(path)
    else:
        events, header = _read_text(path)
    if np.any(np.diff(events.time_ps) < 0):
        raise FormatError("timestamps are not monotone")
    if np.any(events.channel > 1):
        raise FormatError("channel must be 0 or 1")
    return (events, header) if with_header else events


def _read_binary(path: Path):
    data = path.read_bytes()
    if len(data) < _BIN_PREFIX.size:
        raise FormatError("truncated header")
    magic, version, hlen = _BIN_PREFIX.unpack_from(data)
    _check_version(version)
    start = _BIN_PREFIX.size + hlen
    try:
        header = json.loads(data[_BIN_PREFIX.size:start].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed header: {exc}") from None
    body = data[start:]
    if len(body) % RECORD_DTYPE.itemsize:
        raise FormatError("record section is not a whole number of 9-byte records")
    rec = np.frombuffer(body, dtype=RECORD_DTYPE)
    return EventStream(rec["channel"].copy(), rec["timestamp"].astype(np.int64)), header


def _parse_header_lines(lines, magic):
    if not lines or lines[0].strip() != magic:
        raise FormatError(f"missing {magic!r} line")
    header = {}
    n = 1
    while n < len(lines) and lines[n].startswith("#"):
        body = lines[n][1:].strip()
        if ":" not in body:
            raise FormatError(f"line {n + 1}: malformed header entry {lines[n]!r}")
        k, v = body.split(":", 1)
        header[k.strip()] = v.strip()
        n += 1
    if "version" not in header:
        raise FormatError("header lacks version")
    _check_version(header["version"])
    return header, n


def _read_text(path: Path):
    try:
        lines = path.read_text(encoding="ascii").splitlines()
    except UnicodeDecodeError:
        raise FormatError("not an ASCII time-tag file") from None
    header, n = _parse_header_lines(lines, TEXT_MAGIC)
    if header.get("time_unit") != "ps":
        raise FormatError("time_unit must be ps")
    if n >= len(lines) or lines[n].strip() != "channel,timestamp_ps":
        raise FormatError("missing column header 'channel,timestamp_ps'")
    rows = lines[n + 1:]
    table = np.zeros((0, 2), dtype=np.int64)
    if rows:
        try:
            table = np.loadtxt(rows, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError:
            for i, r in enumerate(rows):
                parts = r.split(",")
                if len(parts) != 2 or not all(q.strip().isdigit() for q in parts):
                    raise FormatError(f"line {n + 2 + i}: malformed record {r!r}") from None
            raise FormatError("malformed records") from None
        if table.shape[1] != 2:
            raise FormatError("records must have two columns")
    ch, t = table[:, 0], table[:, 1]
    if np.any(t < 0) or np.any((ch != 0) & (ch != 1)):
        raise FormatError("channel must be 0|1 and timestamps non-negative")
    return EventStream(ch.astype(np.uint8), t), header


def file_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- histograms ------------------------------------------------------------

def write_histogram(hist: CorrelationHistogram, path, source_checksum: str = "none") -> None:
    bw_ps = round(hist.bin_width * PS_PER_NS)
    if bw_ps % 2 or abs(bw_ps - hist.bin_width * PS_PER_NS) > 1e-6:
        raise ValueError("bin width must be an even whole number of picoseconds")
    counts = np.asarray(hist.counts)
    if np.any(counts < 0) or np.any(counts != np.rint(counts)):
        raise ValueError("histogram files hold non-negative integer counts only")
    max_ps = hist.n_half * bw_ps
    centres = np.arange(-hist.n_half, hist.n_half) * bw_ps + bw_ps // 2
    lines = [
        HIST_MAGIC,
        f"# version: {FORMAT_VERSION}",
        f"# bin_width_ps: {bw_ps}",
        f"# max_delay_ps: {max_ps}",
        f"# source_sha256: {source_checksum}",
        "bin_center_ps,counts",
    ]
    lines += [f"{c},{int(n)}" for c, n in zip(centres, hist.counts)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_histogram(path, with_header: bool = False):
    lines = Path(path).read_text(encoding="ascii").splitlines()
    header, n = _parse_header_lines(lines, HIST_MAGIC)
    try:
        bw_ps = int(header["bin_width_ps"])
        max_ps = int(header["max_delay_ps"])
    except (KeyError, ValueError):
        raise FormatError("header needs integer bin_width_ps and max_delay_ps") from None
    if bw_ps <= 0 or max_ps <= 0 or max_ps % bw_ps:
        raise BinGeometryError("max_delay_ps must be a positive multiple of bin_width_ps")
    if n >= len(lines) or lines[n].strip() != "bin_center_ps,counts":
        raise FormatError("missing column header 'bin_center_ps,counts'")
    rows = lines[n + 1:]
    half = max_ps // bw_ps
    if len(rows) != 2 * half:
        raise BinGeometryError(f"expected {2 * half} rows, found {len(rows)}")
    try:
        table = np.array([r.split(",") for r in rows], dtype=np.int64).reshape(len(rows), 2)
    except ValueError:
        raise FormatError("malformed histogram rows") from None
    expect = np.arange(-half, half) * bw_ps + bw_ps // 2
    if not np.array_equal(table[:, 0], expect):
        raise BinGeometryError("bin centres are not contiguous with the declared geometry")
    if np.any(table[:, 1] < 0):
        raise FormatError("negative counts")
    hist = CorrelationHistogram(bw_ps / PS_PER_NS, max_ps / PS_PER_NS, table[:, 1])
    return (hist, header) if with_header else hist


# --- reports ---------------------------------------------------------------

def write_report(fields: dict, path=None) -> str:
    """Serialise flat ``key = value`` pairs; returns the text and writes it if ``path`` is given."""
    lines = [REPORT_MAGIC, f"version = {FORMAT_VERSION}"]
    for k, v in fields.items():
        if "=" in k or "\n" in k:
            raise ValueError(f"bad report key {k!r}")
        lines.append(f"{k} = {_fmt(v)}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    return text


def parse_report(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0].strip() != REPORT_MAGIC:
        raise FormatError("not a photonstream report")
    out = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        if " = " not in line:
            raise FormatError(f"line {i}: expected 'key = value'")
        k, v = line.split(" = ", 1)
        out[k.strip()] = _parse_value(v.strip())
    if "version" not in out:
        raise FormatError("report lacks version")
    _check_version(out["version"])
    return out


def read_report(path) -> dict:
    return parse_report(Path(path).read_text(encoding="utf-8"))


def _parse_value(v: str):
    if v in ("true", "false"):
        return v == "true"
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def fit_report_fields(fit) -> dict:
    """Fixed report keys for a fit result (see docs/formats.md)."""
    fields = {
        "model": fit.model,
        "converged": True,
        "iterations": fit.iterations,
        "n_points": len(fit.data),
        "chi2": fit.chi2,
        "dof": fit.dof,
    }
    all_names = list(fit.names) + [n for n in fit.fixed if n not in fit.names]
    for name in all_names:
        fields[f"param.{name}"] = fit[name]
        fields[f"error.{name}"] = fit.error(name)
    for i, a in enumerate(fit.names):
        for j, b in enumerate(fit.names):
            fields[f"cov.{a}.{b}"] = float(fit.covariance[i, j])
    if fit.model == "wandering":
        fields["flag.tau_c_fixed"] = "tau_c" in fit.fixed
    fields["flag.at_bounds"] = ",".join(fit.at_bounds) if fit.at_bounds else "none"
    fields["flag.identifiable"] = fit.identifiable
    return fields


# --- CSV tables ------------------------------------------------------------

def write_csv(path, columns: list[str], rows) -> None:
    """Plain comma-separated table with a fixed header row."""
    out = [",".join(columns)]
    for row in rows:
        out.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(out) + "\n", encoding="ascii", newline="\n")


def read_series_csv(path):
    """Read an ``x,y,sigma`` series. Raises FormatError naming the offending line."""
    from .fitting import DataSeries

    rows = []
    text = Path(path).read_text(encoding="utf-8").splitlines()
    for i, line in enumerate(text, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = [p.strip() for p in s.split(",")]
        if not rows and [p.lower() for p in parts] == ["x", "y", "sigma"]:
            continue
        if len(parts) != 3:
            raise FormatError(f"line {i}: expected 3 columns x,y,sigma, got {len(parts)}")
        try:
            x, y, sig = (float(p) for p in parts)
        except ValueError:
            raise FormatError(f"line {i}: non-numeric value in {line!r}") from None
        if not sig > 0:
            raise FormatError(f"line {i}: sigma must be > 0")
        rows.append((x, y, sig))
    if not rows:
        raise FormatError("no data rows")
    return DataSeries.from_points(rows)


def read_budget_csv(path) -> list[tuple[str, float, float]]:
    """Read ``name,value,sigma`` optical elements."""
    out = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = [p.strip() for p in s.split(",")]
        if [p.lower() for p in parts] == ["name", "value", "sigma"]:
            continue
        if len(parts) != 3:
            raise FormatError(f"line {i}: expected 3 columns name,value,sigma")
        try:
            out.append((parts[0], float(parts[1]), float(parts[2])))
        except ValueError:
            raise FormatError(f"line {i}: non-numeric value in {line!r}") from None
    if not out:
        raise FormatError("no elements")
    return out
