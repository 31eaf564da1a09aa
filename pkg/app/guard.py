"""Countermeasures: CM-choke detection, randomized ADC sampling, symmetry what-ifs."""
import json
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import settings
from conversion import ConversionNetwork, conversion_coefficients
from coupling import solve_coupling
from errors import InvalidParameterError
from frequency_grid import FrequencyGrid
from numeric_core import check_omega
from signal_lab import AdcSampler, DcAttack, sample_adc, synth_tone
from victim import AttackTone, VictimPipeline
from workers import map_ordered, sweep_frequencies

_LOG = logging.getLogger(__name__)

SYMMETRY_PAIRS: dict[str, tuple[tuple[str, str], ...]] = {
    "z_1o/z_2o": (("z_1o", "z_2o"),),
    "z_l/z_r": (("z_l", "z_r"),),
    "z_1i/z_2i": (("z_1i", "z_2i"),),
    "all": (("z_1o", "z_2o"), ("z_l", "z_r"), ("z_1i", "z_2i")),
}


class CmChokeDetector(BaseModel):
    """Third winding of a three-phase CM choke sensing the core flux.

    ``threshold_v=None`` means detection_threshold_factor x noise_floor_v.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    mutual_inductance_h: float = Field(1e-3, gt=0)
    sense_resistance_ohm: float = Field(50.0, gt=0)
    threshold_v: float | None = Field(None, ge=0)

    @property
    def effective_threshold(self) -> float:
        if self.threshold_v is not None:
            return self.threshold_v
        return settings.detection_threshold_factor * settings.noise_floor_v


@dataclass(frozen=True)
class DetectionVerdict:
    sense_voltage_magnitude: float
    detected: bool
    frequency: float
    threshold: float


class DefenseEvaluation(NamedTuple):
    std_fixed: float
    std_random: float
    defense_effective: bool


class WhatIfRow(NamedTuple):
    parameter: str
    frequency_hz: float
    k2_before: float
    k2_after: float
    scale: float


def detect_cm(det: CmChokeDetector, i_g: complex, i_s: complex, omega: float) -> DetectionVerdict:
    """V_sense = jωM(I_g + I_s); opposite line currents cancel in the core."""
    omega = check_omega(omega)
    v_sense = 1j * omega * det.mutual_inductance_h * (complex(i_g) + complex(i_s))
    magnitude = abs(v_sense)
    threshold = det.effective_threshold
    return DetectionVerdict(magnitude, magnitude > threshold, omega / (2 * math.pi), threshold)


def detect_attack_endtoend(p: VictimPipeline, det: CmChokeDetector, attack) -> DetectionVerdict:
    freq, vs = AttackTone(*attack)
    omega = 2 * math.pi * freq
    sol = solve_coupling(p.coupling, omega, source_amplitude=vs)
    verdict = detect_cm(det, sol.i_g, sol.i_s, omega)
    _LOG.info(json.dumps({
        "event": "cm_detection",
        "freq_hz": freq,
        "vs_volt": vs,
        "sense_voltage_v": verdict.sense_voltage_magnitude,
        "detected": verdict.detected,
    }))
    return verdict


def evaluate_randomized_sampling(
    adc_fixed: AdcSampler, adc_random: AdcSampler, dc_attack, window: float
) -> DefenseEvaluation:
    carrier, amplitude, phase = DcAttack(*dc_attack)
    ratio = carrier / adc_fixed.sample_rate_fs
    if not ratio >= 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
        raise InvalidParameterError(
            f"carrier {carrier:.6g} Hz is not a multiple of f_s {adc_fixed.sample_rate_fs:.6g} Hz"
        )
    rate = settings.dc_oversampling * max(carrier, adc_random.sample_rate_fs)
    w = synth_tone(carrier, amplitude, phase, window, rate)
    std_fixed = float(np.std(sample_adc(adc_fixed, w).samples))
    std_random = float(np.std(sample_adc(adc_random, w).samples))
    effective = std_random > 0.5 * abs(amplitude) and std_fixed < 1e-3 * abs(amplitude)
    return DefenseEvaluation(std_fixed, std_random, bool(effective))


def evaluate_randomized_sampling_seeds(
    adc_fixed: AdcSampler, adc_random: AdcSampler, dc_attack, window: float, seeds
) -> list[tuple[int, DefenseEvaluation]]:
    """One evaluation per seed of the randomized sampler, in seed order."""
    seeds = [int(s) for s in seeds]

    def _one(seed):
        randomized = adc_random.model_copy(update={"seed": seed})
        return seed, evaluate_randomized_sampling(adc_fixed, randomized, dc_attack, window)

    return map_ordered(_one, seeds, desc="defense")


def symmetrized(net: ConversionNetwork, parameter: str) -> ConversionNetwork:
    """Replace each named pair with its elementwise mean."""
    if parameter not in SYMMETRY_PAIRS:
        raise InvalidParameterError(f"unknown pair {parameter!r}; expected one of {list(SYMMETRY_PAIRS)}")
    update = {}
    for left, right in SYMMETRY_PAIRS[parameter]:
        mean = getattr(net, left).mean(getattr(net, right))
        update[left] = mean
        update[right] = mean
    return net.model_copy(update=update)


def symmetry_whatif(net: ConversionNetwork, grid: FrequencyGrid) -> list[WhatIfRow]:
    variants = {name: symmetrized(net, name) for name in SYMMETRY_PAIRS}

    def _rows(freq):
        omega = 2 * math.pi * freq
        before = conversion_coefficients(net, omega)
        out = []
        for name, variant in variants.items():
            after = conversion_coefficients(variant, omega)
            out.append(WhatIfRow(name, freq, abs(before.k2), abs(after.k2), after.scale()))
        return out

    rows = sweep_frequencies("whatif", grid.frequencies(), _rows)
    return [row for per_freq in rows for row in per_freq]


def rank_symmetry_pairs(net: ConversionNetwork, freq: float) -> list[tuple[str, float]]:
    """Single pairs ordered by how much symmetrizing them shrinks |k2| at ``freq``."""
    omega = 2 * math.pi * freq
    before = abs(conversion_coefficients(net, omega).k2)
    reductions = [
        (name, before - abs(conversion_coefficients(symmetrized(net, name), omega).k2))
        for name in SYMMETRY_PAIRS
        if name != "all"
    ]
    return sorted(reductions, key=lambda r: (-r[1], r[0]))
