"""Tests for scenario parsing, validation errors and pipeline construction."""

import copy
import json
import os

import pytest

from conftest import SCENARIO_DIR
from errors import ScenarioError
from scenario import parse_scenario
from signal_lab import AdcSampler
from victim import AttackTone, CmrrAmp

with open(os.path.join(SCENARIO_DIR, "reference.json"), encoding="utf-8") as _f:
    REFERENCE = json.load(_f)


def _scenario_file(tmp_path, data=None, text=None):
    path = tmp_path / "scenario.json"
    path.write_text(text if text is not None else json.dumps(data), encoding="utf-8")
    return path


def _reference(**changes):
    data = copy.deepcopy(REFERENCE)
    data.update(changes)
    return data


# --- shipped scenarios ---


def test_reference_scenario_loads(reference_scenario):
    assert reference_scenario.name == "reference"
    assert [a.method for a in reference_scenario.attacks] == ["tone", "ac", "pulse", "dc"]
    assert reference_scenario.tone_attack() == AttackTone(320e3, 300.0)
    assert reference_scenario.coupling_network().source_amplitude == 300.0


def test_reference_pipeline_built_from_stages(reference_scenario):
    p = reference_scenario.victim_pipeline()
    assert isinstance(p.amp, CmrrAmp)
    assert p.legitimate_output == 2.5
    assert p.comparator is None and p.adc is None


def test_single_attack_table_is_a_list_of_one(symmetric_scenario):
    assert len(symmetric_scenario.attacks) == 1
    assert symmetric_scenario.attack_for("tone").freq_hz == 320e3


def test_missing_attack_method_names_location(symmetric_scenario):
    with pytest.raises(ScenarioError) as exc:
        symmetric_scenario.attack_for("dc")
    assert exc.value.location == "attack"


def test_tone_amplitude_overrides_source(tmp_path):
    data = _reference(attack={"method": "tone", "freq_hz": 1e5, "amplitude_v": 12.0})
    assert parse_scenario(_scenario_file(tmp_path, data)).tone_attack() == AttackTone(1e5, 12.0)


def test_adc_stage_takes_scenario_seed(tmp_path):
    data = _reference(seed=77)
    data["pipeline"] = {"stages": [{"type": "adc", "sample_rate_fs": 48000.0}], "legitimate_output": 0.0}
    p = parse_scenario(_scenario_file(tmp_path, data)).victim_pipeline()
    assert p.adc == AdcSampler(sample_rate_fs=48000.0, seed=77)


# --- validation errors ---


def test_misspelt_key_is_rejected_with_path(tmp_path):
    data = _reference(source={"vss_volt": 300.0})
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(_scenario_file(tmp_path, data))
    assert exc.value.location == "source.vss_volt"
    assert "unknown key 'vss_volt'" in str(exc.value)


def test_missing_element_is_reported(tmp_path):
    data = _reference()
    del data["coupling"]["z_g"]
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(_scenario_file(tmp_path, data))
    assert exc.value.location == "coupling.z_g"
    assert "missing key 'z_g'" in str(exc.value)


def test_zero_farad_capacitor_rejected(tmp_path):
    data = _reference()
    data["conversion"]["z_l"] = {"r_ohm": 20.0, "c_farad": 0}
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(_scenario_file(tmp_path, data))
    assert exc.value.location.startswith("conversion.z_l")


def test_source_amplitude_belongs_to_source(tmp_path):
    data = _reference()
    data["coupling"]["source_amplitude"] = 10.0
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(_scenario_file(tmp_path, data))
    assert exc.value.location == "coupling"
    assert "source.vs_volt" in str(exc.value)


def test_stage_order_enforced(tmp_path):
    data = _reference()
    data["pipeline"] = {"stages": [{"type": "lowpass", "cutoff_hz": 1e3}, {"type": "cmrr_amp"}]}
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(_scenario_file(tmp_path, data))
    assert exc.value.location == "pipeline"
    assert "lowpass -> cmrr_amp" in str(exc.value)


def test_amplitude_sweep_needs_frequency(tmp_path):
    with pytest.raises(ScenarioError):
        parse_scenario(_scenario_file(tmp_path, _reference(sweep={"kind": "amplitude"})))


def test_seed_must_fit_u64(tmp_path):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(_scenario_file(tmp_path, _reference(seed=2**64)))
    assert exc.value.location == "seed"


def test_unknown_attack_method(tmp_path):
    with pytest.raises(ScenarioError):
        parse_scenario(_scenario_file(tmp_path, _reference(attack={"method": "laser"})))


def test_several_errors_are_counted(tmp_path):
    data = _reference(source={"vss_volt": 1.0, "extra": 2.0})
    with pytest.raises(ScenarioError, match=r"\(\+1 more\)"):
        parse_scenario(_scenario_file(tmp_path, data))


# --- file-level errors ---


def test_empty_file(tmp_path):
    with pytest.raises(ScenarioError, match="empty"):
        parse_scenario(_scenario_file(tmp_path, text="  \n"))


def test_malformed_json_reports_line_and_column(tmp_path):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(_scenario_file(tmp_path, text='{\n  "name": "x",,\n}'))
    assert exc.value.location == "line 2 column 15"


def test_top_level_must_be_object(tmp_path):
    with pytest.raises(ScenarioError, match="JSON object"):
        parse_scenario(_scenario_file(tmp_path, text="[1, 2]"))


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        parse_scenario(tmp_path / "absent.json")
