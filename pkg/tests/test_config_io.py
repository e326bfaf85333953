import math
from datetime import date

import numpy as np
import pytest
import yaml

from pmusynth.config import PipelineConfig
from pmusynth.exceptions import ConfigurationError, ParseError, ValidationError
from pmusynth.io import (read_load_history, read_prototype, read_table, read_wind_5min,
                         read_wind_history, write_table)

BASE = {"seed": 7, "simulation": {"start_utc": "2016-07-15T17:00:00Z"}}


def test_seed_is_required():
    with pytest.raises(ConfigurationError, match="seed"):
        PipelineConfig.from_dict({"simulation": BASE["simulation"]})


def test_seed_override_and_stage_seeds():
    cfg = PipelineConfig.from_dict(BASE, seed_override=99)
    assert cfg.seed == 99
    assert cfg.stage_seed("wind") == PipelineConfig.from_dict(BASE, seed_override=99).stage_seed("wind")
    assert cfg.stage_seed("wind") != cfg.stage_seed("kmeans")
    assert cfg.stage_seed("wind") != PipelineConfig.from_dict(BASE).stage_seed("wind")


def test_paths_resolve_against_config_dir(tmp_path):
    doc = dict(BASE, paths={"case": "case.yaml", "output_dir": "o"})
    (tmp_path / "cfg.yaml").write_text(yaml.safe_dump(doc))
    cfg = PipelineConfig.load(tmp_path / "cfg.yaml")
    assert cfg.paths["case"] == (tmp_path / "case.yaml").resolve()
    assert cfg.output_dir == (tmp_path / "o").resolve()
    with pytest.raises(ValidationError, match="paths.case"):
        cfg.require("case")


def test_exponent_floats_are_coerced():
    cfg = PipelineConfig.from_dict(dict(BASE, demand={"same_cluster_distance": "1e-6"}))
    assert cfg.demand["same_cluster_distance"] == 1e-6
    assert cfg.demand["K"] == 4


@pytest.mark.parametrize("override", [
    {"simulation": {"start_utc": "2016-07-15T17:30:00Z"}},
    {"bogus": {}},
    {"demand": {"K": 0}},
    {"wind": {"step_s": 7}},
    {"emit": {"power_factor": 0.0}},
    {"emit": {"offset_minutes": 55, "duration_minutes": 10}},
    {"compose": {"period_windows": {"Peak": [[0, 12]]}}},
])
def test_bad_knobs_rejected(override):
    with pytest.raises(ValidationError):
        PipelineConfig.from_dict(dict(BASE, **override))


def test_unparsable_yaml(tmp_path):
    (tmp_path / "c.yaml").write_text("seed: [1,\n")
    with pytest.raises(ParseError):
        PipelineConfig.load(tmp_path / "c.yaml")


def test_yaml_datetime_start_accepted(tmp_path):
    (tmp_path / "c.yaml").write_text("seed: 1\nsimulation:\n  start_utc: 2016-07-15 17:00:00\n")
    assert PipelineConfig.load(tmp_path / "c.yaml").start_utc.hour == 17


# --- readers ----------------------------------------------------------------

def _write(path, text):
    path.write_text(text)
    return path


def test_load_history_grouped_by_date(tmp_path):
    p = _write(tmp_path / "h.csv", "date,minute_of_hour,load_mw\n2016-07-01,1,11\n2016-07-01,0,10\n"
               "2016-07-02,0,20\n2016-07-02,1,21\n")
    h = read_load_history(p)
    assert list(h) == [date(2016, 7, 1), date(2016, 7, 2)]
    np.testing.assert_array_equal(h[date(2016, 7, 1)], [10, 11])


@pytest.mark.parametrize("body,exc,match", [
    ("2016-07-01,0,nan\n2016-07-01,1,1\n", ValidationError, "nonnegative"),
    ("2016-07-01,0,-1\n2016-07-01,1,1\n", ValidationError, "nonnegative"),
    ("2016-07-01,0,1\n2016-07-01,2,1\n", ValidationError, "without gaps"),
    ("2016-07-01,0,1\n2016-07-01,1,1\n2016-07-02,0,1\n", ValidationError, "different numbers"),
    ("2016-13-01,0,1\n", ParseError, "bad date"),
    ("2016-07-01,0,abc\n", ParseError, "not a number"),
])
def test_load_history_rejects(tmp_path, body, exc, match):
    p = _write(tmp_path / "h.csv", "date,minute_of_hour,load_mw\n" + body)
    with pytest.raises(exc, match=match):
        read_load_history(p)


def test_wrong_header(tmp_path):
    with pytest.raises(ParseError, match="expected header"):
        read_load_history(_write(tmp_path / "h.csv", "day,minute,load\n"))


def test_prototype_file(tmp_path):
    p = _write(tmp_path / "res.csv", "sector,lat,lon\nresidential,30.5,-97.5\n1.0\n2.5\n")
    proto = read_prototype(p)
    assert proto.sector == "residential" and proto.name == "res"
    np.testing.assert_array_equal(proto.hourly_values, [1.0, 2.5])


def test_wind_5min_requires_complete_grid(tmp_path):
    p = _write(tmp_path / "w.csv", "farm_id,timestamp_utc,speed_mps\n1,2016-07-15T17:00:00Z,5\n"
               "2,2016-07-15T17:00:00Z,6\n1,2016-07-15T17:05:00Z,7\n")
    with pytest.raises(ValidationError, match="farm 2"):
        read_wind_5min(p)


def test_wind_history(tmp_path):
    p = _write(tmp_path / "w.csv", "timestamp_utc,speed_mps\n2016-07-15T17:00:00Z,5\n2016-07-15T17:00:01Z,6\n")
    stamps, v = read_wind_history(p)
    assert len(stamps) == 2 and v.tolist() == [5.0, 6.0]


def test_table_round_trip_is_exact(tmp_path):
    values = [math.pi, 1 / 3, 1e-17, 123456789.123456789]
    write_table(tmp_path / "t.csv", ("a", "b"), [[i, v] for i, v in enumerate(values)])
    header, data = read_table(tmp_path / "t.csv")
    assert header == ["a", "b"]
    assert data[:, 1].tolist() == values
