"""Scenario files: one JSON document describing a victim, its attacks and its guard.

Every table is a strict pydantic model, so a misspelt key fails the parse
instead of silently falling back to a default.
"""
import json
import logging
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from conversion import ConversionNetwork
from coupling import CouplingNetwork
from errors import ScenarioError
from frequency_grid import FrequencyGrid
from guard import CmChokeDetector
from signal_lab import AdcSampler, HysteresisComparator, NonlinearAmp
from victim import AttackTone, CmrrAmp, VictimPipeline

_LOG = logging.getLogger(__name__)


class _Strict(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class SourceConfig(_Strict):
    vs_volt: float = Field(300.0, ge=0)


# --- pipeline stages --------------------------------------------------------


class CmrrAmpStage(CmrrAmp):
    type: Literal["cmrr_amp"]


class NonlinearAmpStage(NonlinearAmp):
    type: Literal["nonlinear_amp"]


class LowpassStage(_Strict):
    type: Literal["lowpass"]
    cutoff_hz: float = Field(gt=0)
    remove_dc: bool = False


class ComparatorStage(HysteresisComparator):
    type: Literal["comparator"]


class AdcStage(AdcSampler):
    type: Literal["adc"]


Stage = Annotated[
    Union[CmrrAmpStage, NonlinearAmpStage, LowpassStage, ComparatorStage, AdcStage],
    Field(discriminator="type"),
]

# amp -> filter -> decision; each position at most once.
_STAGE_POSITION = {"cmrr_amp": 0, "nonlinear_amp": 0, "lowpass": 1, "comparator": 2, "adc": 2}


class PipelineConfig(_Strict):
    stages: list[Stage] = Field(default_factory=list)
    legitimate_output: float = 0.0
    # Reference-pack module type (amp, vfc, ...) whose documented readings sweeps log.
    module_type: str | None = None

    @model_validator(mode="after")
    def _ordered(self):
        positions = [_STAGE_POSITION[s.type] for s in self.stages]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            order = " -> ".join(s.type for s in self.stages)
            raise ValueError(f"stages must run amp -> lowpass -> comparator|adc, once each; got {order}")
        return self


# --- attacks ----------------------------------------------------------------


class AcAttackConfig(_Strict):
    method: Literal["ac"]
    baseband_freq_hz: float = Field(1000.0, gt=0)
    baseband_amplitude: float = Field(1.0, gt=0, le=1)
    carrier_freq_hz: float = Field(370e3, gt=0)
    sample_rate_hz: float = Field(1e6, gt=0)
    duration_s: float = Field(0.01, gt=0)
    amp: NonlinearAmp = NonlinearAmp(gain_linear=1.0, gain_quadratic=0.5)
    cutoff_hz: float = Field(1500.0, gt=0)


class PulseAttackConfig(_Strict):
    method: Literal["pulse"]
    target_pulse_rate_hz: float = Field(gt=0)
    jitter_amplitude_v: float = Field(gt=0)
    comparator: HysteresisComparator
    duration_s: float = Field(1.0, gt=0)
    sample_rate_hz: float = Field(1e5, gt=0)


class DcAttackConfig(_Strict):
    method: Literal["dc"]
    target_bias_v: float
    adc_rate_hz: float = Field(gt=0)
    band_hz: tuple[float, float]
    window_s: float = Field(0.01, gt=0)


class ToneAttackConfig(_Strict):
    method: Literal["tone"]
    freq_hz: float = Field(gt=0)
    # None: use source.vs_volt
    amplitude_v: float | None = Field(None, ge=0)


AttackConfig = Annotated[
    Union[AcAttackConfig, PulseAttackConfig, DcAttackConfig, ToneAttackConfig],
    Field(discriminator="method"),
]


# --- sweep and guard --------------------------------------------------------


class SweepConfig(_Strict):
    kind: Literal["frequency", "amplitude"] = "frequency"
    grid: FrequencyGrid | None = None
    amplitude_v: float | None = Field(None, ge=0)
    freq_hz: float | None = Field(None, gt=0)
    amplitudes_v: list[float] | None = None
    # Amplitude sweeps: report the smallest grid amplitude reaching this deviation.
    target_deviation: float | None = Field(None, gt=0)
    top_k: int = Field(5, ge=1)

    @model_validator(mode="after")
    def _amplitude_needs_frequency(self):
        if self.kind == "amplitude" and self.freq_hz is None:
            raise ValueError("amplitude sweeps need freq_hz")
        return self


class GuardAttackConfig(_Strict):
    freq_hz: float = Field(gt=0)
    vs_volt: float = Field(ge=0)


class DefenseConfig(_Strict):
    adc_rate_hz: float = Field(gt=0)
    # None: one full sampling period, 1/adc_rate_hz.
    jitter_span_s: float | None = Field(None, ge=0)
    # None: the ADC rate itself (k = 1).
    carrier_freq_hz: float | None = Field(None, gt=0)
    amplitude_v: float = Field(1.0, gt=0)
    phase_rad: float = 0.0
    # None: alias_probe_samples ADC periods.
    window_s: float | None = Field(None, gt=0)
    seeds: int = Field(32, ge=1)


class GuardConfig(_Strict):
    detector: CmChokeDetector = CmChokeDetector()
    # None: the canonical household-grid attack from the reference packs.
    attack: GuardAttackConfig | None = None
    defense: DefenseConfig | None = None
    whatif_grid: FrequencyGrid | None = None


# --- scenario ---------------------------------------------------------------


class ScenarioConfig(_Strict):
    name: str = Field(min_length=1)
    seed: int = Field(0, ge=0, lt=2**64)
    source: SourceConfig = SourceConfig()
    coupling: CouplingNetwork
    conversion: ConversionNetwork
    pipeline: PipelineConfig = PipelineConfig()
    attack: AttackConfig | list[AttackConfig] | None = None
    sweep: SweepConfig = SweepConfig()
    guard: GuardConfig = GuardConfig()

    @field_validator("coupling", mode="before")
    @classmethod
    def _source_lives_in_source(cls, v):
        if isinstance(v, dict) and "source_amplitude" in v:
            raise ValueError("set the source amplitude with source.vs_volt, not coupling.source_amplitude")
        return v

    @property
    def attacks(self) -> list:
        if self.attack is None:
            return []
        return list(self.attack) if isinstance(self.attack, list) else [self.attack]

    def attack_for(self, method: str):
        for attack in self.attacks:
            if attack.method == method:
                return attack
        raise ScenarioError(f"scenario has no {method!r} attack", "attack")

    def coupling_network(self) -> CouplingNetwork:
        return self.coupling.model_copy(update={"source_amplitude": self.source.vs_volt})

    def tone_attack(self) -> AttackTone | None:
        for attack in self.attacks:
            if attack.method == "tone":
                vs = self.source.vs_volt if attack.amplitude_v is None else attack.amplitude_v
                return AttackTone(attack.freq_hz, vs)
        return None

    def victim_pipeline(self) -> VictimPipeline:
        """Build the runnable pipeline; the ADC draws its jitter from the scenario seed."""
        parts: dict = {}
        for stage in self.pipeline.stages:
            params = stage.model_dump(exclude={"type"})
            if stage.type == "cmrr_amp":
                parts["amp"] = CmrrAmp(**params)
            elif stage.type == "nonlinear_amp":
                parts["amp"] = NonlinearAmp(**params)
            elif stage.type == "lowpass":
                parts["filter_cutoff_hz"] = stage.cutoff_hz
                parts["filter_remove_dc"] = stage.remove_dc
            elif stage.type == "comparator":
                parts["comparator"] = HysteresisComparator(**params)
            else:
                parts["adc"] = AdcSampler(**{**params, "seed": self.seed})
        return VictimPipeline(
            coupling=self.coupling_network(),
            conversion=self.conversion,
            legitimate_output=self.pipeline.legitimate_output,
            **parts,
        )


def _location(loc) -> str:
    return ".".join(str(part) for part in loc)


def _scenario_error(exc: ValidationError) -> ScenarioError:
    first = exc.errors()[0]
    loc = first.get("loc") or ()
    key = loc[-1] if loc else ""
    if first["type"] == "extra_forbidden":
        message = f"unknown key {key!r}"
    elif first["type"] == "missing":
        message = f"missing key {key!r}"
    else:
        message = first.get("msg", "invalid value")
    extra = exc.error_count() - 1
    if extra:
        message += f" (+{extra} more)"
    return ScenarioError(message, _location(loc))


def parse_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror or exc}", str(path)) from exc
    if not text.strip():
        raise ScenarioError("scenario file is empty", str(path))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object", str(path))
    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise _scenario_error(exc) from exc
    _LOG.debug("scenario %s loaded from %s", config.name, path)
    return config
