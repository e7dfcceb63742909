import json

import pytest

from footfall.config import ClassifierSection, DetectorSection, PipelineConfig
from footfall.errors import ConfigError
from footfall.signal import PIPELINE_FILTERS


def test_defaults_carry_pipeline_constants():
    cfg = PipelineConfig()
    assert cfg.sample_rate_hz == 880.0
    assert cfg.k == 10
    assert cfg.classifier.learning_rate == 5e-4
    assert cfg.filters == PIPELINE_FILTERS
    det = cfg.detector.to_detector()
    assert (det.min_len, det.event_len, det.max_len) == (66, 190, 312)
    assert cfg.detector.needs_calibration


def test_empty_document_is_default():
    assert PipelineConfig.from_json("{}") == PipelineConfig()


def test_round_trip():
    cfg = PipelineConfig(
        detector=DetectorSection(method="ccw", threshold=1.7, bias=-12),
        classifier=ClassifierSection(kind="ann", epochs=20),
        k=5,
        seed=3,
        inputs=("a.csv", "b.csv"),
    )
    back = PipelineConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.to_json() == cfg.to_json()


def test_json_is_complete_and_sorted():
    d = json.loads(PipelineConfig().to_json())
    assert list(d) == sorted(d)
    assert d["filters"][0]["cutoff_hz"] == [50.0, 60.0]


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"k": 1}, "k"),
        ({"k": 2.5}, "k"),
        ({"sample_rate_hz": -1}, "sample_rate_hz"),
        ({"bogus": 1}, "bogus"),
        ({"detector": {"method": "xyz"}}, "detector.method"),
        ({"detector": {"window": 3}}, "detector.window"),
        ({"detector": {"threshold": -1.0}}, "detector.threshold"),
        ({"classifier": {"kind": "tree"}}, "classifier.kind"),
        ({"classifier": {"C": 0}}, "classifier.C"),
        ({"filters": [{"kind": "lowpass", "cutoff_hz": 500, "order": 4}]}, "filters[0]"),
        ({"filters": [{"kind": "bandstop", "cutoff_hz": 55}]}, "filters[0].cutoff_hz"),
    ],
)
def test_validation_names_field(doc, field):
    with pytest.raises(ConfigError) as info:
        PipelineConfig.from_dict(doc).validate(check_paths=False)
    assert info.value.field == field


def test_missing_paths(tmp_path):
    cfg = PipelineConfig(inputs=(str(tmp_path / "none.csv"),))
    with pytest.raises(ConfigError) as info:
        cfg.validate()
    assert info.value.field == "inputs[0]"
    cfg.validate(check_paths=False)


def test_invalid_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    with pytest.raises(ConfigError):
        PipelineConfig.load(p)
