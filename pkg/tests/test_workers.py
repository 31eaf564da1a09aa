"""Tests for the ordered sweep map and per-row error naming."""

import time

import pytest

import workers
from config import settings
from errors import FrequencyRowError, InvalidParameterError


def test_map_ordered_keeps_input_order_across_threads(monkeypatch):
    monkeypatch.setattr(settings, "threads", 4)

    def _slow_first(i):
        # Early items finish last.
        time.sleep(0.002 * (10 - i))
        return i * i

    assert workers.map_ordered(_slow_first, range(10)) == [i * i for i in range(10)]


def test_map_ordered_empty():
    assert workers.map_ordered(lambda x: x, []) == []


def test_resolve_threads_defaults_to_cpu_count(monkeypatch):
    monkeypatch.setattr(settings, "threads", 0)
    monkeypatch.setattr(workers.os, "cpu_count", lambda: 3)
    assert workers.resolve_threads() == 3


def test_sweep_reports_first_failing_frequency(monkeypatch, reset_metrics):
    import metrics

    monkeypatch.setattr(settings, "threads", 4)

    def _row(freq):
        if freq >= 300:
            raise InvalidParameterError("bad row")
        return freq

    with pytest.raises(FrequencyRowError) as exc:
        workers.sweep_frequencies("coupling", [100.0, 200.0, 300.0, 400.0], _row)
    assert exc.value.frequency_hz == 300.0
    assert 'gndline_row_failures_total{kind="coupling"}' in metrics.render_prometheus()


def test_sweep_records_and_logs(reset_metrics, caplog):
    import metrics

    with caplog.at_level("INFO", logger="workers"):
        rows = workers.sweep_frequencies("conversion", [1.0, 2.0], lambda f: f * 2)
    assert rows == [2.0, 4.0]
    assert 'gndline_sweep_rows_total{kind="conversion"} 2' in metrics.render_prometheus()
    assert '"event": "sweep_done"' in caplog.text


def test_non_simulator_errors_propagate_unchanged():
    def _row(freq):
        raise KeyError("boom")

    with pytest.raises(KeyError):
        workers.sweep_frequencies("coupling", [1.0], _row)
