import threading

_lock = threading.Lock()
_command_count = {}
_sweep_count = {}
_sweep_rows = {}
_sweep_seconds_total = {}
_sweep_seconds_buckets = [0.01, 0.1, 0.5, 1, 5, 30, 120]
_sweep_seconds_counts = {}
_row_failure_count = {}
_infeasible_attack_count = {}


def record_command(name: str, exit_code: int):
    key = f"{name}|{int(exit_code)}"
    with _lock:
        _command_count[key] = _command_count.get(key, 0) + 1


def record_sweep(kind: str, rows: int, seconds: float):
    key = str(kind or "").strip().lower() or "unknown"
    try:
        s = float(seconds)
    except Exception:
        s = 0.0
    if s < 0:
        s = 0.0
    with _lock:
        _sweep_count[key] = _sweep_count.get(key, 0) + 1
        _sweep_rows[key] = _sweep_rows.get(key, 0) + int(rows)
        _sweep_seconds_total[key] = _sweep_seconds_total.get(key, 0.0) + s
        for b in _sweep_seconds_buckets:
            if s <= b:
                bkey = f"{key}|{b}"
                _sweep_seconds_counts[bkey] = _sweep_seconds_counts.get(bkey, 0) + 1
        bkey = f"{key}|+Inf"
        _sweep_seconds_counts[bkey] = _sweep_seconds_counts.get(bkey, 0) + 1


def record_row_failure(kind: str):
    key = str(kind or "").strip().lower()
    if not key:
        return
    with _lock:
        _row_failure_count[key] = _row_failure_count.get(key, 0) + 1


def record_infeasible_attack(method: str):
    key = str(method or "").strip().lower() or "unknown"
    with _lock:
        _infeasible_attack_count[key] = _infeasible_attack_count.get(key, 0) + 1


def reset_metrics():
    with _lock:
        for d in (
            _command_count,
            _sweep_count,
            _sweep_rows,
            _sweep_seconds_total,
            _sweep_seconds_counts,
            _row_failure_count,
            _infeasible_attack_count,
        ):
            d.clear()


def render_prometheus():
    lines = []
    lines.append("# HELP gndline_commands_total CLI command runs by exit code")
    lines.append("# TYPE gndline_commands_total counter")
    with _lock:
        for key, count in sorted(_command_count.items()):
            name, code = key.split("|", 1)
            lines.append(f'gndline_commands_total{{command="{name}",exit_code="{code}"}} {count}')
    lines.append("# HELP gndline_sweeps_total Completed sweeps by kind")
    lines.append("# TYPE gndline_sweeps_total counter")
    with _lock:
        for key, count in sorted(_sweep_count.items()):
            lines.append(f'gndline_sweeps_total{{kind="{key}"}} {count}')
    lines.append("# HELP gndline_sweep_rows_total Rows produced by sweeps")
    lines.append("# TYPE gndline_sweep_rows_total counter")
    with _lock:
        for key, count in sorted(_sweep_rows.items()):
            lines.append(f'gndline_sweep_rows_total{{kind="{key}"}} {count}')
    lines.append("# HELP gndline_sweep_seconds_total Wall time spent in sweeps")
    lines.append("# TYPE gndline_sweep_seconds_total counter")
    with _lock:
        for key, total in sorted(_sweep_seconds_total.items()):
            lines.append(f'gndline_sweep_seconds_total{{kind="{key}"}} {total}')
    lines.append("# HELP gndline_sweep_seconds_bucket Sweep duration histogram buckets")
    lines.append("# TYPE gndline_sweep_seconds_bucket histogram")
    with _lock:
        for key, count in _sweep_seconds_counts.items():
            kind, bucket = key.split("|", 1)
            lines.append(f'gndline_sweep_seconds_bucket{{kind="{kind}",le="{bucket}"}} {count}')
    lines.append("# HELP gndline_row_failures_total Sweep rows that raised")
    lines.append("# TYPE gndline_row_failures_total counter")
    with _lock:
        for key, count in sorted(_row_failure_count.items()):
            lines.append(f'gndline_row_failures_total{{kind="{key}"}} {count}')
    lines.append("# HELP gndline_infeasible_attacks_total Attack designs rejected as infeasible")
    lines.append("# TYPE gndline_infeasible_attacks_total counter")
    with _lock:
        for key, count in sorted(_infeasible_attack_count.items()):
            lines.append(f'gndline_infeasible_attacks_total{{method="{key}"}} {count}')
    return "\n".join(lines) + "\n"
