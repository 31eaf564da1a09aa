"""Deterministic output files: CSV tables, waveform CSVs and 16-bit PCM.

All writers go through a temp file in the target directory and ``os.replace``
so an error never leaves a partial artifact behind.
"""
import csv
import json
import logging
import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from errors import InvalidParameterError
from signal_lab import Waveform

_LOG = logging.getLogger(__name__)

PCM_FULL_SCALE = 32767


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@contextmanager
def atomic_open(path, mode: str = "w"):
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        kwargs = {"encoding": "utf-8", "newline": ""} if "b" not in mode else {}
        with os.fdopen(fd, mode, **kwargs) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_csv(path, header, rows, units: str | None = None) -> int:
    """Write ``# units: ...``, the header and one line per row; returns the row count."""
    header = list(header)
    count = 0
    with atomic_open(path) as f:
        if units:
            f.write(f"# units: {units}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            row = list(row)
            if len(row) != len(header):
                raise InvalidParameterError(f"row has {len(row)} fields, header has {len(header)}")
            writer.writerow([format_number(v) for v in row])
            count += 1
    _LOG.debug("wrote %d rows to %s", count, path)
    return count


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and raw rows of a CSV written by write_csv (comment lines skipped)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    table = list(csv.reader(lines))
    if not table:
        return [], []
    return table[0], table[1:]


def write_waveform_csv(path, w: Waveform) -> int:
    return write_csv(path, ["time_s", "volts"], zip(w.times(), w.samples), units="s,V")


def read_waveform_csv(path) -> Waveform:
    header, rows = read_csv(path)
    if header != ["time_s", "volts"]:
        raise InvalidParameterError(f"{path}: not a waveform CSV (header {header!r})")
    if len(rows) < 2:
        raise InvalidParameterError(f"{path}: waveform needs at least two samples")
    data = np.array(rows, dtype=float)
    t, v = data[:, 0], data[:, 1]
    step = np.diff(t)
    if np.any(step <= 0):
        raise InvalidParameterError(f"{path}: time column must be strictly increasing")
    rate = 1.0 / float(np.mean(step))
    if not np.allclose(step, 1.0 / rate, rtol=1e-6, atol=0):
        raise InvalidParameterError(f"{path}: samples are not uniformly spaced")
    return Waveform(v, rate, float(t[0]))


def write_pcm(path, w: Waveform) -> float:
    """Peak-normalized s16le samples plus a ``<path>.rate`` JSON sidecar; returns V per LSB."""
    samples = np.asarray(w.samples, dtype=float)
    peak = float(np.max(np.abs(samples))) if samples.size else 0.0
    scale = peak / PCM_FULL_SCALE if peak > 0 else 1.0
    if not math.isfinite(scale):
        raise InvalidParameterError("waveform is not finite")
    pcm = np.clip(np.rint(samples / scale), -PCM_FULL_SCALE, PCM_FULL_SCALE).astype("<i2")
    with atomic_open(path, "wb") as f:
        f.write(pcm.tobytes())
    sidecar = {
        "sample_rate_hz": float(w.sample_rate),
        "scale_v_per_lsb": scale,
        "samples": int(pcm.size),
        "format": "s16le",
    }
    with atomic_open(f"{path}.rate") as f:
        f.write(json.dumps(sidecar, sort_keys=True) + "\n")
    return scale


def read_pcm(path) -> Waveform:
    with open(f"{path}.rate", "r", encoding="utf-8") as f:
        meta = json.load(f)
    raw = np.fromfile(path, dtype="<i2")
    if raw.size != int(meta.get("samples", raw.size)):
        raise InvalidParameterError(f"{path}: sidecar says {meta['samples']} samples, file has {raw.size}")
    return Waveform(raw.astype(float) * float(meta["scale_v_per_lsb"]), float(meta["sample_rate_hz"]))
