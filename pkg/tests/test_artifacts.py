"""Tests for CSV/PCM artifact writers."""

import json

import numpy as np
import pytest

from artifacts import (
    PCM_FULL_SCALE,
    atomic_open,
    format_number,
    read_csv,
    read_pcm,
    read_waveform_csv,
    write_csv,
    write_pcm,
    write_waveform_csv,
)
from errors import InvalidParameterError
from signal_lab import Waveform, constant, synth_tone


# --- number formatting ---


def test_format_number_is_lossless():
    assert format_number(True) == "true"
    assert format_number(np.bool_(False)) == "false"
    assert format_number(np.int64(7)) == "7"
    assert float(format_number(0.1 + 0.2)) == 0.1 + 0.2
    assert format_number("mean_v") == "mean_v"


# --- CSV tables ---


def test_csv_has_units_line_and_header(tmp_path):
    path = tmp_path / "out" / "frc.csv"
    assert write_csv(path, ["frequency_hz", "magnitude"], [(50.0, 1.5), (100.0, 2)], units="Hz,A") == 2
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["# units: Hz,A", "frequency_hz,magnitude", "50,1.5", "100,2"]
    assert read_csv(path) == (["frequency_hz", "magnitude"], [["50", "1.5"], ["100", "2"]])


def test_row_length_mismatch_leaves_no_file(tmp_path):
    path = tmp_path / "bad.csv"
    with pytest.raises(InvalidParameterError):
        write_csv(path, ["a", "b"], [(1, 2), (3,)])
    assert list(tmp_path.iterdir()) == []


def test_atomic_open_keeps_previous_contents_on_error(tmp_path):
    path = tmp_path / "table.csv"
    path.write_text("old\n", encoding="utf-8")
    with pytest.raises(RuntimeError):
        with atomic_open(path) as f:
            f.write("new\n")
            raise RuntimeError("interrupted")
    assert path.read_text(encoding="utf-8") == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["table.csv"]


# --- waveforms ---


def test_waveform_csv_round_trip(tmp_path):
    w = synth_tone(50.0, 2.0, 0.3, 0.02, 1000.0)
    path = tmp_path / "wave.csv"
    assert write_waveform_csv(path, w) == 20
    back = read_waveform_csv(path)
    assert back.sample_rate == pytest.approx(1000.0, rel=1e-9)
    np.testing.assert_array_equal(back.samples, w.samples)


def test_non_uniform_waveform_rejected(tmp_path):
    path = tmp_path / "wave.csv"
    write_csv(path, ["time_s", "volts"], [(0.0, 1.0), (0.001, 1.0), (0.003, 1.0)])
    with pytest.raises(InvalidParameterError, match="uniformly"):
        read_waveform_csv(path)


def test_wrong_header_rejected(tmp_path):
    path = tmp_path / "frc.csv"
    write_csv(path, ["frequency_hz", "magnitude"], [(1.0, 2.0), (2.0, 3.0)])
    with pytest.raises(InvalidParameterError, match="not a waveform"):
        read_waveform_csv(path)


# --- PCM ---


def test_pcm_is_peak_normalized_with_sidecar(tmp_path):
    w = synth_tone(100.0, 0.5, 0.0, 0.05, 8000.0)
    path = tmp_path / "attack.pcm"
    scale = write_pcm(path, w)
    assert scale == pytest.approx(0.5 / PCM_FULL_SCALE)
    raw = np.fromfile(path, dtype="<i2")
    assert raw.size == len(w)
    assert int(np.max(np.abs(raw))) == PCM_FULL_SCALE

    meta = json.loads((tmp_path / "attack.pcm.rate").read_text(encoding="utf-8"))
    assert meta == {"format": "s16le", "sample_rate_hz": 8000.0, "samples": len(w), "scale_v_per_lsb": scale}

    back = read_pcm(path)
    np.testing.assert_allclose(back.samples, w.samples, atol=scale)


def test_silent_waveform_uses_unit_scale(tmp_path):
    path = tmp_path / "silent.pcm"
    assert write_pcm(path, constant(0.0, 0.01, 1000.0)) == 1.0
    assert not np.any(np.fromfile(path, dtype="<i2"))


def test_truncated_pcm_detected(tmp_path):
    path = tmp_path / "attack.pcm"
    write_pcm(path, Waveform(np.array([0.1, -0.2, 0.3]), 100.0))
    path.write_bytes(path.read_bytes()[:2])
    with pytest.raises(InvalidParameterError):
        read_pcm(path)
