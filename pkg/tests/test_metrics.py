"""Unit tests for the in-process metrics recorder and Prometheus rendering."""

import metrics


def test_command_counter_by_exit_code(reset_metrics):
    metrics.record_command("frc", 0)
    metrics.record_command("frc", 0)
    metrics.record_command("attack", 2)
    out = metrics.render_prometheus()
    assert 'gndline_commands_total{command="frc",exit_code="0"} 2' in out
    assert 'gndline_commands_total{command="attack",exit_code="2"} 1' in out


def test_sweep_rows_and_histogram(reset_metrics):
    metrics.record_sweep("coupling", 200, 0.05)
    metrics.record_sweep("coupling", 50, 2.0)
    out = metrics.render_prometheus()
    assert 'gndline_sweeps_total{kind="coupling"} 2' in out
    assert 'gndline_sweep_rows_total{kind="coupling"} 250' in out
    # Cumulative buckets: the 0.05 s sweep lands in le=0.1, both in +Inf.
    assert 'gndline_sweep_seconds_bucket{kind="coupling",le="0.1"} 1' in out
    assert 'gndline_sweep_seconds_bucket{kind="coupling",le="+Inf"} 2' in out


def test_negative_or_bad_seconds_clamped(reset_metrics):
    metrics.record_sweep("Whatif", 1, -3)
    metrics.record_sweep("whatif", 1, "soon")
    out = metrics.render_prometheus()
    assert 'gndline_sweep_seconds_total{kind="whatif"} 0.0' in out
    assert 'gndline_sweep_seconds_bucket{kind="whatif",le="0.01"} 2' in out


def test_row_failures_and_infeasible_attacks(reset_metrics):
    metrics.record_row_failure("endtoend")
    metrics.record_row_failure("")  # ignored
    metrics.record_infeasible_attack("pulse")
    out = metrics.render_prometheus()
    assert 'gndline_row_failures_total{kind="endtoend"} 1' in out
    assert 'gndline_infeasible_attacks_total{method="pulse"} 1' in out


def test_reset_clears_everything(reset_metrics):
    metrics.record_command("sweep", 0)
    metrics.reset_metrics()
    out = metrics.render_prometheus()
    assert "gndline_commands_total{" not in out
    assert out.endswith("\n")
