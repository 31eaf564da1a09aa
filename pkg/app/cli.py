# app/cli.py
"""gndline command line: frc, attack, sweep and guard over a scenario file.

Exit codes: 0 success, 1 usage or scenario error, 2 numerical or
infeasibility error.
"""
import argparse
import json
import logging
import sys
import time

import metrics
from artifacts import atomic_open, write_csv, write_pcm, write_waveform_csv
from config import settings
from conversion import frc_conversion
from coupling import frc_cm_current
from errors import GndlineError, InfeasibleAttackError, InvalidParameterError, ScenarioError
from frequency_grid import FrequencyGrid, default_grid, parse_grid
from guard import (
    detect_attack_endtoend,
    evaluate_randomized_sampling_seeds,
    rank_symmetry_pairs,
    symmetry_whatif,
)
from otel import setup_tracing, span
from reference_packs import canonical_attack, measurements
from scenario import ScenarioConfig, parse_scenario
from signal_lab import (
    AdcSampler,
    apply_nonlinear_amp,
    comparator_pulses,
    design_ac_attack,
    design_dc_attack,
    design_pulse_attack,
    lowpass_ideal,
    predict_alias,
    sample_adc,
    synth_tone,
    tone_amplitude,
)
from victim import (
    amplitude_response,
    frc_dm_voltage,
    frequency_sweep,
    minimum_effective_amplitude,
    rank_vulnerable,
)

_LOG = logging.getLogger("gndline")

FRC_HEADER = ["frequency_hz", "magnitude", "phase_rad"]
FRC_UNITS = {"coupling": "Hz,A,rad", "conversion": "Hz,ohm,rad", "endtoend": "Hz,V,rad"}
SWEEP_HEADER = ["x", "output_metric", "deviation"]
METRICS_HEADER = ["method", "metric", "value"]
VERDICT_HEADER = ["frequency_hz", "vs_volt", "sense_voltage_v", "threshold_v", "detected"]
DEFENSE_HEADER = ["seed", "std_fixed_v", "std_random_v", "defense_effective"]
WHATIF_HEADER = ["parameter", "frequency_hz", "k2_before_ohm", "k2_after_ohm", "scale"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {value}")
    return value


def _grid(text: str) -> FrequencyGrid:
    try:
        return parse_grid(text)
    except InvalidParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON file")
    common.add_argument("--seed", type=_u64, default=None, help="override the scenario seed (u64)")
    common.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")
    common.add_argument("--metrics-textfile", default=None,
                        help="write Prometheus text metrics here after the command")

    parser = _Parser(prog="gndline", description="Ground-line injection simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    frc = sub.add_parser("frc", parents=[common], help="frequency response curve CSV")
    frc.add_argument("which", choices=["coupling", "conversion", "endtoend"])
    frc.add_argument("--out", required=True, help="output CSV")
    frc.add_argument("--grid", type=_grid, default=None, help="start,stop,points,log|lin")

    attack = sub.add_parser("attack", parents=[common], help="design an attack waveform")
    attack.add_argument("method", choices=["ac", "pulse", "dc"])
    attack.add_argument("--out", required=True, help="waveform CSV (time_s,volts)")
    attack.add_argument("--metrics", default=None, help="metrics CSV (method,metric,value)")
    attack.add_argument("--pcm", default=None, help="16-bit PCM export with .rate sidecar")

    sweep = sub.add_parser("sweep", parents=[common], help="frequency or amplitude sweep")
    sweep.add_argument("--out", required=True, help="output CSV (x,output_metric,deviation)")
    sweep.add_argument("--grid", type=_grid, default=None, help="start,stop,points,log|lin")

    guard = sub.add_parser("guard", parents=[common], help="detection, defense and symmetry what-if")
    guard.add_argument("--out", default=None, help="detection verdict CSV")
    guard.add_argument("--defense-out", default=None, help="randomized-sampling evaluation CSV")
    guard.add_argument("--whatif-out", default=None, help="symmetry what-if CSV")
    guard.add_argument("--grid", type=_grid, default=None, help="what-if grid start,stop,points,log|lin")
    return parser


# --- commands ---------------------------------------------------------------


def cmd_frc(config: ScenarioConfig, which: str, out_path, grid: FrequencyGrid | None = None) -> int:
    grid = grid or default_grid()
    if which == "coupling":
        rows = frc_cm_current(config.coupling_network(), grid)
    elif which == "conversion":
        rows = frc_conversion(config.conversion, grid)
    else:
        rows = frc_dm_voltage(config.coupling_network(), config.conversion, grid)
    write_csv(out_path, FRC_HEADER, rows, units=FRC_UNITS[which])
    return 0


def _ac_attack(config: ScenarioConfig):
    cfg = config.attack_for("ac")
    baseband = synth_tone(cfg.baseband_freq_hz, cfg.baseband_amplitude, 0.0, cfg.duration_s,
                          cfg.sample_rate_hz)
    w = design_ac_attack(baseband, cfg.carrier_freq_hz)
    demod = lowpass_ideal(apply_nonlinear_amp(cfg.amp, w), cfg.cutoff_hz, remove_dc=True)
    recovered = tone_amplitude(demod, cfg.baseband_freq_hz)
    rows = [
        ("carrier_freq_hz", cfg.carrier_freq_hz),
        ("recovered_amplitude_v", recovered),
        ("expected_amplitude_v", cfg.amp.gain_quadratic * cfg.baseband_amplitude),
    ]
    return w, rows


def _pulse_attack(config: ScenarioConfig):
    cfg = config.attack_for("pulse")
    w = design_pulse_attack(cfg.target_pulse_rate_hz, cfg.jitter_amplitude_v, cfg.comparator,
                            cfg.duration_s, cfg.sample_rate_hz)
    _, edges = comparator_pulses(cfg.comparator, w)
    rows = [
        ("target_pulse_rate_hz", cfg.target_pulse_rate_hz),
        ("rising_edges", edges),
        ("target_edges", cfg.target_pulse_rate_hz * cfg.duration_s),
    ]
    return w, rows


def _dc_attack(config: ScenarioConfig):
    cfg = config.attack_for("dc")
    dc = design_dc_attack(cfg.target_bias_v, cfg.adc_rate_hz, cfg.band_hz)
    w = synth_tone(dc.carrier_freq_hz, dc.amplitude, dc.phase_rad, cfg.window_s,
                   settings.dc_oversampling * dc.carrier_freq_hz)
    sampled = sample_adc(AdcSampler(sample_rate_fs=cfg.adc_rate_hz), w).samples
    alias = predict_alias(dc.carrier_freq_hz, cfg.adc_rate_hz)
    rows = [
        ("carrier_freq_hz", dc.carrier_freq_hz),
        ("carrier_multiple", round(dc.carrier_freq_hz / cfg.adc_rate_hz)),
        ("sampled_mean_v", float(sampled.mean())),
        ("sampled_std_v", float(sampled.std())),
        ("f_alias_formula_hz", alias.f_alias_formula),
        ("f_alias_empirical_hz", alias.f_alias_empirical),
        ("f_alias_folded_hz", alias.f_alias_folded),
        ("alias_predictors_agree", alias.agree),
    ]
    return w, rows


_ATTACKS = {"ac": _ac_attack, "pulse": _pulse_attack, "dc": _dc_attack}


def cmd_attack(config: ScenarioConfig, method: str, out_path, metrics_path=None, pcm_path=None) -> int:
    try:
        w, rows = _ATTACKS[method](config)
    except InfeasibleAttackError as exc:
        metrics.record_infeasible_attack(method)
        _LOG.warning(json.dumps({"event": "infeasible_attack", "method": method, "reason": str(exc)}))
        raise
    write_waveform_csv(out_path, w)
    if pcm_path:
        write_pcm(pcm_path, w)
    if metrics_path:
        write_csv(metrics_path, METRICS_HEADER, [(method, name, value) for name, value in rows])
    _LOG.info(json.dumps({"event": "attack_designed", "method": method,
                          **{name: value for name, value in rows}}))
    return 0


_READING_KEYS = ("module", "freq_hz", "vs_volt", "original", "attacked", "unit")


def _log_documented_readings(config: ScenarioConfig) -> None:
    module_type = config.pipeline.module_type
    if not module_type:
        return
    readings = [{k: row.get(k) for k in _READING_KEYS} for row in measurements(module_type)]
    _LOG.info(json.dumps({"event": "documented_readings", "module_type": module_type,
                          "readings": readings}))


def cmd_sweep(config: ScenarioConfig, out_path, grid: FrequencyGrid | None = None) -> int:
    p = config.victim_pipeline()
    sweep = config.sweep
    if sweep.kind == "amplitude":
        result = amplitude_response(p, sweep.freq_hz, sweep.amplitudes_v)
        units = f"V,{p.metric_name},1"
        if sweep.target_deviation is not None:
            minimum = minimum_effective_amplitude(p, sweep.freq_hz, sweep.target_deviation,
                                                  response=result)
            _LOG.info(json.dumps({"event": "minimum_effective_amplitude", "freq_hz": sweep.freq_hz,
                                  "target_deviation": sweep.target_deviation, "amplitude_v": minimum}))
    else:
        amplitude = sweep.amplitude_v
        if amplitude is None:
            tone = config.tone_attack()
            amplitude = tone.amplitude_v if tone else config.source.vs_volt
        result = frequency_sweep(p, grid or sweep.grid or default_grid(), amplitude)
        units = f"Hz,{p.metric_name},1"
        top = rank_vulnerable(result.rows, sweep.top_k)
        _LOG.info(json.dumps({"event": "vulnerable_frequencies", "metric": p.metric_name,
                              "top": [{"freq_hz": f, "deviation": d} for f, d in top]}))
    write_csv(out_path, SWEEP_HEADER, result.rows, units=units)
    _log_documented_readings(config)
    return 0


def _guard_attack(config: ScenarioConfig) -> tuple[float, float]:
    if config.guard.attack is not None:
        return config.guard.attack.freq_hz, config.guard.attack.vs_volt
    canonical = canonical_attack("household_grid")
    if canonical is None:
        raise ScenarioError("no guard.attack and no canonical household_grid attack", "guard.attack")
    return canonical["freq_hz"], canonical["vs_volt"]


def cmd_guard(config: ScenarioConfig, out_path=None, defense_path=None, whatif_path=None,
              grid: FrequencyGrid | None = None) -> int:
    guard = config.guard
    freq, vs = _guard_attack(config)
    if out_path:
        verdict = detect_attack_endtoend(config.victim_pipeline(), guard.detector, (freq, vs))
        write_csv(out_path, VERDICT_HEADER, [(
            freq, vs, verdict.sense_voltage_magnitude, verdict.threshold, verdict.detected,
        )], units="Hz,V,V,V,1")

    if defense_path:
        d = guard.defense
        if d is None:
            raise ScenarioError("--defense-out needs a guard.defense table", "guard.defense")
        fs = d.adc_rate_hz
        fixed = AdcSampler(sample_rate_fs=fs)
        randomized = AdcSampler(
            sample_rate_fs=fs,
            jitter_mode="uniform_random",
            jitter_span_s=1.0 / fs if d.jitter_span_s is None else d.jitter_span_s,
        )
        carrier = fs if d.carrier_freq_hz is None else d.carrier_freq_hz
        window = settings.alias_probe_samples / fs if d.window_s is None else d.window_s
        seeds = [(config.seed + i) % 2**64 for i in range(d.seeds)]
        rows = evaluate_randomized_sampling_seeds(fixed, randomized, (carrier, d.amplitude_v, d.phase_rad),
                                                  window, seeds)
        write_csv(defense_path, DEFENSE_HEADER,
                  [(seed, ev.std_fixed, ev.std_random, ev.defense_effective) for seed, ev in rows],
                  units="1,V,V,1")

    if whatif_path:
        rows = symmetry_whatif(config.conversion, grid or guard.whatif_grid or default_grid())
        write_csv(whatif_path, WHATIF_HEADER, rows, units="1,Hz,ohm,ohm,ohm")
        ranking = rank_symmetry_pairs(config.conversion, freq)
        _LOG.info(json.dumps({"event": "symmetry_ranking", "freq_hz": freq,
                              "ranking": [{"parameter": n, "k2_reduction_ohm": r} for n, r in ranking]}))
    return 0


# --- entry point ------------------------------------------------------------


def _configure_logging(quiet: bool):
    level = logging.WARNING if quiet else getattr(logging, str(settings.log_level).upper(), logging.INFO)
    fmt = "%(message)s" if settings.log_json else "%(levelname)s %(name)s: %(message)s"
    logging.basicConfig(level=level, format=fmt)
    logging.getLogger().setLevel(level)
    if quiet:
        settings.progress = False


def _dispatch(args) -> int:
    config = parse_scenario(args.scenario)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    with span(f"command.{args.command}", scenario=config.name, seed=str(config.seed)):
        if args.command == "frc":
            return cmd_frc(config, args.which, args.out, args.grid)
        if args.command == "attack":
            return cmd_attack(config, args.method, args.out, args.metrics, args.pcm)
        if args.command == "sweep":
            return cmd_sweep(config, args.out, args.grid)
        if not (args.out or args.defense_out or args.whatif_out):
            raise ScenarioError("guard needs at least one of --out, --defense-out, --whatif-out")
        return cmd_guard(config, args.out, args.defense_out, args.whatif_out, args.grid)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args.quiet)
    setup_tracing()

    start = time.monotonic()
    try:
        code = _dispatch(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 1
    except GndlineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    elapsed_ms = int((time.monotonic() - start) * 1000)
    metrics.record_command(args.command, code)
    _LOG.info(json.dumps({"event": "command", "command": args.command, "exit_code": code,
                          "elapsed_ms": elapsed_ms}))
    if args.metrics_textfile:
        with atomic_open(args.metrics_textfile) as f:
            f.write(metrics.render_prometheus())
    return code


if __name__ == "__main__":
    sys.exit(main())
