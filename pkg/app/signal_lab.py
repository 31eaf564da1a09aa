"""Time-domain signals and the component models attacks exploit.

A ``Waveform`` is a uniformly sampled series. When it was synthesized from
tones it also carries a ``ToneModel`` (DC offset plus cosines), which the
amplifier, filter and AM designer transform exactly. That lets the ADC sample
the continuous signal at arbitrary (jittered, sub-Nyquist) instants without
interpolation error.
"""
import cmath
import json
import logging
import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import settings
from errors import InfeasibleAttackError, InvalidParameterError, NoFeasibleCarrierError

_LOG = logging.getLogger(__name__)

# Relative tolerance under which two tone frequencies are treated as one line.
_FREQ_MERGE_RTOL = 1e-12


class Tone(NamedTuple):
    freq_hz: float
    amplitude: float
    phase_rad: float

    @property
    def phasor(self) -> complex:
        return cmath.rect(self.amplitude, self.phase_rad)


@dataclass(frozen=True)
class ToneModel:
    """offset + sum(a·cos(2π f t + φ)) over ``tones`` (all f > 0)."""

    offset: float = 0.0
    tones: tuple[Tone, ...] = ()

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, float(self.offset))
        for tone in self.tones:
            out += tone.amplitude * np.cos(2 * np.pi * tone.freq_hz * t + tone.phase_rad)
        return out

    @property
    def max_frequency(self) -> float:
        return max((t.freq_hz for t in self.tones), default=0.0)

    @property
    def peak_bound(self) -> float:
        """Upper bound of the signal: offset plus every tone amplitude."""
        return self.offset + sum(abs(t.amplitude) for t in self.tones)

    def normalized(self) -> "ToneModel":
        """Merge lines at the same frequency and drop zero-amplitude lines."""
        groups: list[list[Tone]] = []
        for tone in sorted(self.tones, key=lambda t: t.freq_hz):
            if groups and math.isclose(
                tone.freq_hz, groups[-1][0].freq_hz, rel_tol=_FREQ_MERGE_RTOL
            ):
                groups[-1].append(tone)
            else:
                groups.append([tone])
        merged = []
        for group in groups:
            if len(group) == 1:
                tone = group[0]
            else:
                p = sum(t.phasor for t in group)
                tone = Tone(group[0].freq_hz, abs(p), cmath.phase(p))
            if tone.amplitude != 0:
                merged.append(tone)
        return ToneModel(float(self.offset), tuple(merged))

    def scaled(self, k: float) -> "ToneModel":
        return ToneModel(
            self.offset * k, tuple(Tone(t.freq_hz, t.amplitude * k, t.phase_rad) for t in self.tones)
        ).normalized()

    def __add__(self, other: "ToneModel") -> "ToneModel":
        return ToneModel(self.offset + other.offset, self.tones + other.tones).normalized()

    def __mul__(self, other: "ToneModel") -> "ToneModel":
        # cos(a)cos(b) = (cos(a+b) + cos(a-b)) / 2
        offset = self.offset * other.offset
        out = [Tone(t.freq_hz, t.amplitude * other.offset, t.phase_rad) for t in self.tones]
        out += [Tone(t.freq_hz, t.amplitude * self.offset, t.phase_rad) for t in other.tones]
        for a in self.tones:
            for b in other.tones:
                half = a.amplitude * b.amplitude / 2
                out.append(Tone(a.freq_hz + b.freq_hz, half, a.phase_rad + b.phase_rad))
                diff = a.freq_hz - b.freq_hz
                if math.isclose(a.freq_hz, b.freq_hz, rel_tol=_FREQ_MERGE_RTOL):
                    offset += half * math.cos(a.phase_rad - b.phase_rad)
                elif diff > 0:
                    out.append(Tone(diff, half, a.phase_rad - b.phase_rad))
                else:
                    out.append(Tone(-diff, half, b.phase_rad - a.phase_rad))
        return ToneModel(offset, tuple(out)).normalized()

    def lowpass(self, cutoff_hz: float, remove_dc: bool = False) -> "ToneModel":
        kept = tuple(t for t in self.tones if t.freq_hz <= cutoff_hz)
        return ToneModel(0.0 if remove_dc else self.offset, kept)


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0
    model: ToneModel | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise InvalidParameterError(f"samples must be 1-D, got shape {samples.shape}")
        rate = float(self.sample_rate)
        if not math.isfinite(rate) or rate <= 0:
            raise InvalidParameterError(f"sample_rate must be > 0, got {self.sample_rate!r}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", rate)
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    def evaluate(self, t) -> np.ndarray:
        """The continuous signal at instants ``t``.

        Exact when a tone model is attached; otherwise band-limited
        (periodic trigonometric) interpolation of the samples.
        """
        t = np.asarray(t, dtype=float)
        if self.model is not None:
            return self.model.evaluate(t)
        _require_samples(self)
        n = self.samples.size
        spec = np.fft.rfft(self.samples)
        weights = np.full(spec.size, 2.0)
        weights[0] = 1.0
        if n % 2 == 0:
            weights[-1] = 1.0
        coeffs = weights * spec / n
        k = np.arange(spec.size)
        cycles = (t - self.t0) * self.sample_rate / n
        out = np.empty(t.size)
        # Bound the outer-product scratch to a few million entries per chunk.
        chunk = max(1, 2_000_000 // spec.size)
        flat = cycles.ravel()
        for start in range(0, flat.size, chunk):
            phase = 2 * np.pi * np.outer(flat[start:start + chunk], k)
            out[start:start + chunk] = (np.exp(1j * phase) @ coeffs).real
        return out.reshape(t.shape)

    def tone_model(self) -> ToneModel:
        """The attached model, else the interpolant of ``evaluate`` as tones.

        Phases are referred to t = 0, not to the first sample. A tone that
        falls between bins is carried by its neighbouring bins, exactly as
        ``evaluate`` reconstructs it.
        """
        if self.model is not None:
            return self.model
        freqs, amps = spectrum(self)
        spec = np.fft.rfft(self.samples)
        phases = np.angle(spec) - 2 * np.pi * freqs * self.t0
        tones = tuple(
            Tone(float(f), float(a), float(ph))
            for f, a, ph in zip(freqs[1:], amps[1:], phases[1:])
            if a > 0
        )
        return ToneModel(float(spec[0].real) / self.samples.size, tones)


class NonlinearAmp(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    gain_linear: float = 1.0
    gain_quadratic: float = 0.0


class HysteresisComparator(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    threshold_high: float
    threshold_low: float
    # "auto": the first sample's out-of-band decision, low when it starts inside the band.
    initial_state: Literal["auto", "low", "high"] = "auto"

    @model_validator(mode="after")
    def _band(self):
        if not self.threshold_high > self.threshold_low:
            raise ValueError("threshold_high must be greater than threshold_low")
        return self

    @property
    def half_band(self) -> float:
        return (self.threshold_high - self.threshold_low) / 2

    @property
    def centre(self) -> float:
        return (self.threshold_high + self.threshold_low) / 2


class AdcSampler(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    sample_rate_fs: float = Field(gt=0)
    jitter_mode: Literal["none", "uniform_random"] = "none"
    jitter_span_s: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)


@dataclass(frozen=True)
class AliasPrediction:
    f_alias_formula: float
    m_used: int
    f_alias_empirical: float
    f_alias_folded: float

    @property
    def agree(self) -> bool:
        return math.isclose(self.f_alias_formula, self.f_alias_empirical, abs_tol=1e-6)


class DcAttack(NamedTuple):
    carrier_freq_hz: float
    amplitude: float
    phase_rad: float


def _require_samples(w: Waveform):
    if w.samples.size == 0:
        raise InvalidParameterError("waveform has no samples")


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be > 0, got {value!r}")
    return value


# --- synthesis and spectra --------------------------------------------------


def synth_tone(
    freq: float,
    amplitude: float,
    phase: float,
    duration: float,
    sample_rate: float,
    t0: float = 0.0,
) -> Waveform:
    freq = _positive("freq", freq)
    sample_rate = _positive("sample_rate", sample_rate)
    duration = _positive("duration", duration)
    n = max(1, int(round(duration * sample_rate)))
    t = t0 + np.arange(n) / sample_rate
    samples = amplitude * np.cos(2 * np.pi * freq * t + phase)
    model = ToneModel(0.0, (Tone(freq, float(amplitude), float(phase)),)).normalized()
    return Waveform(samples, sample_rate, t0, model)


def constant(value: float, duration: float, sample_rate: float, t0: float = 0.0) -> Waveform:
    sample_rate = _positive("sample_rate", sample_rate)
    n = max(1, int(round(_positive("duration", duration) * sample_rate)))
    return Waveform(np.full(n, float(value)), sample_rate, t0, ToneModel(float(value)))


def spectrum(w: Waveform) -> tuple[np.ndarray, np.ndarray]:
    """One-sided amplitude spectrum: a cosine of amplitude a on a bin reads a."""
    _require_samples(w)
    n = w.samples.size
    amps = np.abs(np.fft.rfft(w.samples)) / n
    amps[1:] *= 2
    if n % 2 == 0 and n > 1:
        amps[-1] /= 2
    return np.fft.rfftfreq(n, 1.0 / w.sample_rate), amps


def tone_amplitude(w: Waveform, freq: float) -> float:
    freqs, amps = spectrum(w)
    return float(amps[int(np.argmin(np.abs(freqs - freq)))])


def occupied_bandwidth(w: Waveform, rel_floor: float = 1e-9) -> float:
    """Highest nonzero-frequency bin above ``rel_floor`` of the spectral peak."""
    if w.model is not None:
        return w.model.max_frequency
    freqs, amps = spectrum(w)
    peak = amps.max()
    if peak == 0:
        return 0.0
    live = np.flatnonzero((amps > rel_floor * peak) & (freqs > 0))
    return float(freqs[live[-1]]) if live.size else 0.0


# --- AC injection -----------------------------------------------------------


def design_ac_attack(baseband: Waveform, carrier_freq: float) -> Waveform:
    """(m(t) + 1)·cos(2π f_c t) on the baseband's time base."""
    _require_samples(baseband)
    carrier_freq = _positive("carrier_freq", carrier_freq)
    peak = float(np.max(np.abs(baseband.samples)))
    if peak > 1 + 1e-12:
        raise InvalidParameterError(f"baseband peak {peak:.6g} exceeds 1; envelope would fold")
    if not baseband.sample_rate > 2 * carrier_freq:
        raise InvalidParameterError(
            f"sample_rate {baseband.sample_rate:.6g} must exceed 2x carrier {carrier_freq:.6g}"
        )
    bandwidth = occupied_bandwidth(baseband)
    if not carrier_freq > 2 * bandwidth:
        raise InvalidParameterError(
            f"carrier {carrier_freq:.6g} Hz must exceed 2x baseband bandwidth {bandwidth:.6g} Hz"
        )
    t = baseband.times()
    samples = (baseband.samples + 1.0) * np.cos(2 * np.pi * carrier_freq * t)
    model = None
    if baseband.model is not None:
        carrier = ToneModel(0.0, (Tone(carrier_freq, 1.0, 0.0),))
        model = (baseband.model + ToneModel(1.0)) * carrier
    return Waveform(samples, baseband.sample_rate, baseband.t0, model)


def apply_nonlinear_amp(amp: NonlinearAmp, w: Waveform) -> Waveform:
    a, b = amp.gain_linear, amp.gain_quadratic
    x = w.samples
    model = None
    if w.model is not None:
        model = w.model.scaled(a) + (w.model * w.model).scaled(b)
    return Waveform(a * x + b * x * x, w.sample_rate, w.t0, model)


def lowpass_ideal(w: Waveform, cutoff: float, remove_dc: bool = False) -> Waveform:
    """Brick-wall low-pass keeping |f| <= cutoff.

    With a tone model the filter acts on the continuous signal and the
    samples are re-evaluated from the filtered model; otherwise rfft bins
    above the cutoff are zeroed.
    """
    _require_samples(w)
    cutoff = float(cutoff)
    if not 0 < cutoff < w.sample_rate / 2:
        raise InvalidParameterError(
            f"cutoff must lie in (0, {w.sample_rate / 2:.6g}) Hz, got {cutoff!r}"
        )
    if w.model is not None:
        model = w.model.lowpass(cutoff, remove_dc)
        return Waveform(model.evaluate(w.times()), w.sample_rate, w.t0, model)
    spec = np.fft.rfft(w.samples)
    freqs = np.fft.rfftfreq(w.samples.size, 1.0 / w.sample_rate)
    spec[freqs > cutoff] = 0
    if remove_dc:
        spec[0] = 0
    return Waveform(np.fft.irfft(spec, n=w.samples.size), w.sample_rate, w.t0)


# --- pulse injection --------------------------------------------------------


def comparator_pulses(cmp: HysteresisComparator, w: Waveform) -> tuple[Waveform, int]:
    """Run the two-threshold state machine; returns (0/1 output, rising edges).

    The state before the first sample is ``cmp.initial_state``. A rising edge
    at t0 is only counted when that state is low and the first sample is
    already at or above threshold_high, which "auto" never does.
    """
    x = w.samples
    if cmp.initial_state == "auto":
        initial = 1 if x.size and x[0] >= cmp.threshold_high else 0
    else:
        initial = 1 if cmp.initial_state == "high" else 0
    marks = np.full(x.size, -1, dtype=np.int8)
    marks[x <= cmp.threshold_low] = 0
    marks[x >= cmp.threshold_high] = 1
    # Each sample holds the decision of the latest sample that left the band.
    last = np.maximum.accumulate(np.where(marks >= 0, np.arange(x.size), -1))
    state = np.where(last >= 0, marks[np.maximum(last, 0)], initial).astype(np.int8)
    prev = np.concatenate(([initial], state[:-1])).astype(np.int8)
    rising = int(np.count_nonzero((prev == 0) & (state == 1)))
    return Waveform(state.astype(float), w.sample_rate, w.t0), rising


def design_pulse_attack(
    target_pulse_rate: float,
    jitter_amplitude: float,
    cmp: HysteresisComparator,
    duration: float,
    sample_rate: float,
) -> Waveform:
    """Sinusoidal jitter centred on the hysteresis band at ``target_pulse_rate``.

    The phase puts every upward crossing of threshold_high at (k + 1/2)/rate,
    away from the window edges, so the edge count is rate·duration.
    """
    rate = _positive("target_pulse_rate", target_pulse_rate)
    duration = _positive("duration", duration)
    sample_rate = _positive("sample_rate", sample_rate)
    if not sample_rate > 20 * rate:
        raise InvalidParameterError(
            f"sample_rate {sample_rate:.6g} must exceed 20x pulse rate {rate:.6g}"
        )
    half = cmp.half_band
    if not jitter_amplitude > half:
        raise InfeasibleAttackError(
            f"jitter amplitude {jitter_amplitude:.6g} V cannot cross hysteresis band "
            f"[{cmp.threshold_low:.6g}, {cmp.threshold_high:.6g}] V"
        )
    phase = -math.acos(half / jitter_amplitude) - math.pi
    tone = synth_tone(rate, jitter_amplitude, phase, duration, sample_rate)
    w = Waveform(
        tone.samples + cmp.centre,
        sample_rate,
        0.0,
        ToneModel(cmp.centre, tone.model.tones if tone.model else ()),
    )
    expected = math.ceil(rate * duration - 0.5 - 1e-9)
    _, edges = comparator_pulses(cmp, w)
    if edges != expected:
        raise InfeasibleAttackError(f"designed jitter yields {edges} edges, expected {expected}")
    return w


# --- DC injection / ADC aliasing -------------------------------------------


def sample_adc(adc: AdcSampler, w: Waveform) -> Waveform:
    """Sample the continuous signal behind ``w`` at t_k (+ uniform jitter)."""
    _require_samples(w)
    fs = adc.sample_rate_fs
    n = int(math.floor(w.duration * fs + 1e-9))
    if n == 0:
        raise InvalidParameterError("empty sampling window")
    if n < 8:
        raise InvalidParameterError(f"window holds {n} ADC periods; need at least 8")
    t = w.t0 + np.arange(n) / fs
    if adc.jitter_mode == "uniform_random" and adc.jitter_span_s > 0:
        rng = np.random.default_rng(adc.seed)
        t = t + rng.random(n) * adc.jitter_span_s
    return Waveform(w.evaluate(t), fs, w.t0)


def _formula_alias(f_n: float, f_s: float) -> tuple[float, int, bool]:
    """|2m·f_N - f_s| minimized over integer m >= 0 subject to f_a < f_N."""
    centre = f_s / (2 * f_n)
    candidates = sorted({max(0, math.floor(centre)), max(0, math.ceil(centre))})
    scored = [(abs(2 * m * f_n - f_s), m) for m in candidates]
    valid = [s for s in scored if s[0] < f_n]
    f_a, m = min(valid or scored)
    return float(f_a), int(m), bool(valid)


def predict_alias(f_n: float, f_s: float) -> AliasPrediction:
    f_n = _positive("f_n", f_n)
    f_s = _positive("f_s", f_s)
    f_formula, m, constraint_met = _formula_alias(f_n, f_s)
    n = int(settings.alias_probe_samples)
    probe = synth_tone(f_n, 1.0, 0.0, n / f_s, f_s)
    freqs, amps = spectrum(probe)
    f_empirical = float(freqs[int(np.argmax(amps))])
    f_folded = abs(f_n - round(f_n / f_s) * f_s)
    pred = AliasPrediction(f_formula, m, f_empirical, float(f_folded))
    resolution = f_s / n
    if not constraint_met or abs(f_formula - f_empirical) > resolution:
        _LOG.info(json.dumps({
            "event": "alias_disagreement",
            "f_n": f_n,
            "f_s": f_s,
            "m": m,
            "constraint_met": constraint_met,
            "f_alias_formula": f_formula,
            "f_alias_empirical": f_empirical,
            "f_alias_folded": pred.f_alias_folded,
        }))
    return pred


def design_dc_attack(
    target_bias: float, f_s: float, vulnerable_band: tuple[float, float]
) -> DcAttack:
    """Carrier at the smallest multiple k·f_s inside the band; samples hold target_bias."""
    f_s = _positive("f_s", f_s)
    lo, hi = (float(v) for v in vulnerable_band)
    if not 0 < lo <= hi:
        raise InvalidParameterError(f"vulnerable band must satisfy 0 < lo <= hi, got {vulnerable_band!r}")
    k = max(1, math.ceil(lo / f_s - 1e-12))
    carrier = k * f_s
    if carrier > hi * (1 + 1e-12):
        raise NoFeasibleCarrierError(
            f"no multiple of f_s={f_s:.6g} Hz in band [{lo:.6g}, {hi:.6g}] Hz"
        )
    return DcAttack(carrier, abs(float(target_bias)), 0.0 if target_bias >= 0 else math.pi)
