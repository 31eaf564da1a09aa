"""End-to-end victim sensor: inject -> couple -> convert -> amplify -> filter -> decide.

The phasor stages are evaluated at each attack frequency to give the DM
disturbance k2·mu·Vs (pure-CM excitation of the converting stage). That
disturbance is synthesized as a tone at the amplifier input, on top of the
legitimate reading, and pushed through the time-domain stages.
"""
import json
import logging
import math
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

import metrics
from config import settings
from conversion import ConversionNetwork, common_mode_transfer, conversion_coefficients
from coupling import CouplingNetwork, solve_coupling
from errors import GndlineError, InvalidParameterError, StageError
from frequency_grid import FrcRow, FrequencyGrid, frc_row
from signal_lab import (
    AdcSampler,
    HysteresisComparator,
    NonlinearAmp,
    Tone,
    ToneModel,
    Waveform,
    apply_nonlinear_amp,
    comparator_pulses,
    lowpass_ideal,
    sample_adc,
)
from workers import map_ordered, sweep_frequencies

_LOG = logging.getLogger(__name__)


class CmrrAmp(BaseModel):
    """Differential amplifier with finite CMRR from transistor mismatch."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    g_m: float = Field(1e-3, gt=0)
    delta_g_m: float = Field(1e-5, ge=0)
    r_ss: float = Field(1e6, gt=0)
    differential_gain: float = 1.0
    # Perfectly matched pair: infinite CMRR, no CM feedthrough.
    ideal: bool = False


def cmrr(amp: CmrrAmp) -> float:
    if amp.ideal:
        return math.inf
    if not amp.delta_g_m > 0:
        raise InvalidParameterError("delta_g_m must be > 0; use ideal=True for a matched pair")
    return 2 * amp.g_m**2 * amp.r_ss / amp.delta_g_m


def cm_feedthrough_gain(amp: CmrrAmp) -> float:
    if amp.ideal:
        return 0.0
    return amp.differential_gain / cmrr(amp)


class AttackTone(NamedTuple):
    freq_hz: float
    amplitude_v: float


class SweepRow(NamedTuple):
    x: float
    output_metric: float
    deviation: float


@dataclass
class SweepResult:
    kind: str
    rows: list[SweepRow]


@dataclass(frozen=True)
class VictimPipeline:
    coupling: CouplingNetwork
    conversion: ConversionNetwork
    amp: CmrrAmp | NonlinearAmp | None = None
    filter_cutoff_hz: float | None = None
    filter_remove_dc: bool = False
    comparator: HysteresisComparator | None = None
    adc: AdcSampler | None = None
    legitimate_output: float | Waveform = 0.0

    def __post_init__(self):
        if self.comparator is not None and self.adc is not None:
            raise InvalidParameterError("pipeline ends in a comparator or an ADC, not both")
        if self.filter_cutoff_hz is not None and not self.filter_cutoff_hz > 0:
            raise InvalidParameterError("filter cutoff must be > 0")

    @property
    def metric_name(self) -> str:
        if self.comparator is not None:
            return "edges_per_s"
        if self.adc is not None:
            return "mean_v"
        return "peak_v"


@dataclass(frozen=True)
class EndToEndResult:
    corrupted: Waveform
    baseline: Waveform
    row: SweepRow
    disturbance: complex


def deviation(attacked: float, original: float) -> float:
    return abs(attacked - original) / max(abs(original), settings.deviation_floor)


def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except GndlineError as exc:
        raise StageError(name, exc) from exc


def _phasor_gains(p: VictimPipeline, freq: float) -> tuple[complex, complex]:
    """(DM, output-CM) voltage per volt of source at ``freq``."""
    omega = 2 * np.pi * freq
    mu = _stage("coupling", lambda: solve_coupling(p.coupling, omega, source_amplitude=1.0).mu)
    k2 = _stage("conversion", lambda: conversion_coefficients(p.conversion, omega).k2)
    cm = 0j
    if isinstance(p.amp, CmrrAmp) and not p.amp.ideal:
        cm = _stage("conversion", common_mode_transfer, p.conversion, omega) * mu
    return k2 * mu, cm


def _attack_tones(attack) -> list[Tone]:
    if isinstance(attack, Waveform):
        tones = attack.tone_model().tones
        peak = max((t.amplitude for t in tones), default=0.0)
        return [t for t in tones if t.amplitude > 1e-12 * peak]
    freq, amplitude = attack
    if not freq > 0:
        raise InvalidParameterError(f"attack frequency must be > 0, got {freq!r}")
    return [Tone(float(freq), float(amplitude), 0.0)]


def _time_base(p: VictimPipeline, attack, duration: float | None) -> tuple[float, int, float]:
    """(sample_rate, samples, t0) the time-domain stages run on."""
    if isinstance(attack, Waveform):
        return attack.sample_rate, len(attack), attack.t0
    freq = float(attack[0])
    rate = settings.samples_per_cycle * freq
    duration = settings.endtoend_duration_s if duration is None else float(duration)
    cycles = max(1, int(round(duration * freq)))
    if p.adc is not None:
        cycles = max(cycles, math.ceil(8 * freq / p.adc.sample_rate_fs - 1e-9))
    return rate, cycles * settings.samples_per_cycle, 0.0


def _legit_model(p: VictimPipeline) -> ToneModel | None:
    legit = p.legitimate_output
    if isinstance(legit, Waveform):
        return legit.model
    return ToneModel(float(legit))


def _input_waveform(p: VictimPipeline, disturbance: ToneModel, t: np.ndarray, rate: float):
    legit = _legit_model(p)
    if legit is not None:
        model = legit + disturbance
        return Waveform(model.evaluate(t), rate, t[0], model)
    base = p.legitimate_output.evaluate(t)
    return Waveform(base + disturbance.evaluate(t), rate, t[0])


def _run_stages(p: VictimPipeline, x: Waveform, cm: ToneModel) -> tuple[Waveform, float]:
    y = x
    amp = p.amp
    if isinstance(amp, CmrrAmp):
        g_cm = _stage("amp", cm_feedthrough_gain, amp)
        g = amp.differential_gain
        samples = g * x.samples
        model = x.model.scaled(g) if x.model is not None else None
        if g_cm != 0:
            samples = samples + g_cm * cm.evaluate(x.times())
            model = model + cm.scaled(g_cm) if model is not None else None
        y = Waveform(samples, x.sample_rate, x.t0, model)
    elif isinstance(amp, NonlinearAmp):
        y = _stage("amp", apply_nonlinear_amp, amp, x)

    if p.filter_cutoff_hz is not None:
        if p.filter_cutoff_hz < y.sample_rate / 2:
            y = _stage("filter", lowpass_ideal, y, p.filter_cutoff_hz, p.filter_remove_dc)
        else:
            _LOG.debug("filter cutoff %.6g Hz above Nyquist; stage skipped", p.filter_cutoff_hz)

    if p.comparator is not None:
        digital, edges = _stage("comparator", comparator_pulses, p.comparator, y)
        return digital, edges / y.duration
    if p.adc is not None:
        sampled = _stage("adc", sample_adc, p.adc, y)
        return sampled, float(np.mean(sampled.samples))
    if y.model is not None:
        return y, float(y.model.peak_bound)
    return y, float(np.max(y.samples))


def run_endtoend(p: VictimPipeline, attack, duration: float | None = None) -> EndToEndResult:
    """Attack the pipeline with a (freq, Vs) tone or a source waveform Vs(t)."""
    tones = _attack_tones(attack)
    dm_tones, cm_tones = [], []
    for tone in tones:
        dm_gain, cm_gain = _phasor_gains(p, tone.freq_hz)
        dm = dm_gain * tone.phasor
        cm = cm_gain * tone.phasor
        dm_tones.append(Tone(tone.freq_hz, abs(dm), float(np.angle(dm))))
        cm_tones.append(Tone(tone.freq_hz, abs(cm), float(np.angle(cm))))
    disturbance = ToneModel(0.0, tuple(dm_tones)).normalized()
    cm_model = ToneModel(0.0, tuple(cm_tones)).normalized()

    rate, n, t0 = _time_base(p, attack, duration)
    t = t0 + np.arange(n) / rate
    corrupted, attacked_metric = _run_stages(p, _input_waveform(p, disturbance, t, rate), cm_model)
    baseline, original_metric = _run_stages(p, _input_waveform(p, ToneModel(), t, rate), ToneModel())

    dominant = max(tones, key=lambda tn: abs(tn.amplitude), default=Tone(0.0, 0.0, 0.0))
    peak_dm = max(dm_tones, key=lambda tn: tn.amplitude, default=Tone(0.0, 0.0, 0.0))
    row = SweepRow(
        x=dominant.freq_hz,
        output_metric=attacked_metric,
        deviation=deviation(attacked_metric, original_metric),
    )
    return EndToEndResult(corrupted, baseline, row, peak_dm.phasor)


def frequency_sweep(p: VictimPipeline, grid: FrequencyGrid, amplitude: float | None = None) -> SweepResult:
    vs = p.coupling.source_amplitude if amplitude is None else float(amplitude)

    def _row(freq):
        return run_endtoend(p, AttackTone(freq, vs)).row

    return SweepResult("frequency", sweep_frequencies("endtoend", grid.frequencies(), _row))


def _check_top_k(top_k: int) -> int:
    if int(top_k) < 1:
        raise InvalidParameterError(f"top_k must be >= 1, got {top_k!r}")
    return int(top_k)


def rank_vulnerable(rows: list[SweepRow], top_k: int) -> list[tuple[float, float]]:
    """Highest deviation first; ties go to the lower frequency."""
    ranked = sorted(rows, key=lambda r: (-r.deviation, r.x))
    return [(r.x, r.deviation) for r in ranked[: _check_top_k(top_k)]]


def find_vulnerable_frequencies(
    p: VictimPipeline, grid: FrequencyGrid, top_k: int, amplitude: float | None = None
) -> list[tuple[float, float]]:
    _check_top_k(top_k)
    return rank_vulnerable(frequency_sweep(p, grid, amplitude).rows, top_k)


def default_amplitudes() -> list[float]:
    step = settings.amplitude_grid_step_v
    count = int(round(settings.amplitude_grid_stop_v / step))
    return [i * step for i in range(count + 1)]


def amplitude_response(p: VictimPipeline, freq: float, amplitudes=None) -> SweepResult:
    amps = default_amplitudes() if amplitudes is None else [float(a) for a in amplitudes]
    if not amps:
        raise InvalidParameterError("amplitude list is empty")
    if any(a < 0 for a in amps) or any(b <= a for a, b in zip(amps, amps[1:])):
        raise InvalidParameterError("amplitudes must be non-negative and strictly increasing")
    start = time.perf_counter()
    rows = map_ordered(lambda a: run_endtoend(p, AttackTone(freq, a)).row._replace(x=a), amps,
                       desc="amplitude")
    metrics.record_sweep("amplitude", len(rows), time.perf_counter() - start)
    return SweepResult("amplitude", rows)


def minimum_effective_amplitude(
    p: VictimPipeline,
    freq: float,
    target_deviation: float,
    amplitudes=None,
    response: SweepResult | None = None,
) -> float | None:
    """Smallest amplitude on the grid whose deviation reaches ``target_deviation``.

    ``response`` reuses an amplitude sweep already run at ``freq``.
    """
    if response is None:
        response = amplitude_response(p, freq, amplitudes)
    for row in response.rows:
        if row.deviation >= target_deviation:
            return row.x
    _LOG.info(json.dumps({"event": "no_effective_amplitude", "freq_hz": freq,
                          "target_deviation": target_deviation}))
    return None


def frc_dm_voltage(
    coupling: CouplingNetwork,
    conversion: ConversionNetwork,
    grid: FrequencyGrid,
    vs: float | None = None,
) -> list[FrcRow]:
    """|V_DM| = |k2·mu·Vs| per grid frequency."""
    source = coupling.source_amplitude if vs is None else float(vs)

    def _row(freq):
        omega = 2 * np.pi * freq
        mu = solve_coupling(coupling, omega, source_amplitude=1.0).mu
        return frc_row(freq, conversion_coefficients(conversion, omega).k2 * mu * source)

    return sweep_frequencies("endtoend", grid.frequencies(), _row)
