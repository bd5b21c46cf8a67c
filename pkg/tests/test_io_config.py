import json

import numpy as np
import pytest

from cpsloss import io
from cpsloss.config import ConfigError, load_config
from cpsloss.errors import ParseError


def write(path, text):
    path.write_text(text)
    return path


def test_table_reader_comments_and_values(tmp_path):
    p = write(tmp_path / "t.csv", "# note one\n# note two\nn_photon,q_int\n1,2e6\n10,2.1e6\n")
    cols, comments = io.read_table(p, ("n_photon", "q_int"))
    assert comments == ["note one", "note two"]
    assert cols["q_int"] == [2e6, 2.1e6]


@pytest.mark.parametrize("body,line", [("n_photon,q_int\n1,abc\n", 2),
                                        ("n_photon,q_int\n1,2\n3\n", 3),
                                        ("n_photon,q_int\n1,nan\n", 2)])
def test_parse_errors_carry_line_numbers(tmp_path, body, line):
    p = write(tmp_path / "bad.csv", body)
    with pytest.raises(ParseError) as exc:
        io.read_table(p, ("n_photon", "q_int"))
    assert exc.value.line == line


def test_header_mismatch(tmp_path):
    p = write(tmp_path / "bad.csv", "n,q\n1,2\n")
    with pytest.raises(ParseError):
        io.read_sweep(p, "power")


def test_trace_sidecar_power(data_dir):
    trace, meta = io.read_trace(data_dir / "cavity_trace.csv")
    assert trace.applied_power == pytest.approx(1e-9, rel=1e-12)
    assert trace.frequencies.size == 201


def test_geometry_keys(tmp_path, data_dir):
    geom, extras = io.read_geometry(data_dir / "geometries" / "cps3.json")
    assert geom.gap == pytest.approx(46e-6) and extras["lambda_nm"] == 39.0
    data = json.loads((data_dir / "geometries" / "cps3.json").read_text())
    data["colour"] = "red"
    with pytest.raises(ParseError):
        io.geometry_from_dict(data)


def test_dumps_is_canonical():
    a = io.dumps({"b": np.float64(1.5), "a": [np.inf, np.int64(2)]})
    assert a == io.dumps({"a": [float("inf"), 2], "b": 1.5})
    assert '"inf"' in a


def test_tidy_csv_round_trip(tmp_path):
    p = io.write_tidy_csv(tmp_path / "x.csv", ("a", "b"), [(0.1, "s"), (1 / 3, "t")])
    cols, _ = io.read_table(p, ("a", "b"), text_columns=("b",))
    assert cols["a"] == [0.1, 1 / 3]


def test_shipped_config_loads(data_dir):
    cfg = load_config(data_dir / "project.json")
    assert sorted(cfg.devices) == ["CPS1", "CPS2", "CPS3", "CPS4"]
    assert cfg.bound_device == "CPS3"
    assert cfg.devices["CPS3"].p_tilde["ma"] == 17.4


def _config(tmp_path, data_dir, **extra):
    raw = json.loads((data_dir / "project.json").read_text())
    for dev in raw["devices"].values():
        dev["geometry"] = str(data_dir / dev["geometry"])
    raw.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(raw))
    return p


@pytest.mark.parametrize("extra", [{"colour": 1}, {"fit": {"xtol": -1}},
                                   {"materials": {"london_depth_nm": 0}},
                                   {"calibration": {"line_attenuation_db": -3}},
                                   {"budget": {"method": "magic"}},
                                   {"bounds": {"device": "CPS9"}}])
def test_bad_config_rejected(tmp_path, data_dir, extra):
    with pytest.raises(ConfigError):
        load_config(_config(tmp_path, data_dir, **extra))


def test_missing_geometry_file(tmp_path, data_dir):
    p = _config(tmp_path, data_dir, devices={"X": {"geometry": "nowhere.json"}})
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(p)


def test_material_override(tmp_path, data_dir):
    cfg = load_config(_config(tmp_path, data_dir, materials={"london_depth_nm": 50}))
    assert cfg.materials.london_depth == pytest.approx(50e-9)
