import json

import pytest

from zenocert.sysio import (
    RunManifest,
    SystemFormatError,
    bundled_system_path,
    fingerprint_system,
    load_system,
    system_from_dict,
    system_to_dict,
    write_manifest,
)


def test_bundled_names_resolve():
    for name in ("example1", "example2", "bouncing-ball"):
        assert bundled_system_path(name).exists()
    with pytest.raises(FileNotFoundError):
        bundled_system_path("no-such-system")


def test_constants_substituted(example2):
    guard = example2.parameter_set.inequalities[0]
    assert guard.to_text() == "-2 + p1"
    assert example2.parameter_set.box == ((2.0, 12.0),)


def test_param_bound_override():
    sys_ = load_system("example2", param_bound=3.5)
    assert sys_.parameter_set.box[0] == (3.5, 13.5)
    assert sys_.parameter_set.inequalities[0].evaluate([0, 0, 3.5]) == 0.0


def test_round_trip_fingerprint(example1, example2, bouncing_ball):
    for sys_ in (example1, example2, bouncing_ball):
        d = system_to_dict(sys_)
        again = system_from_dict(d)
        assert fingerprint_system(again) == fingerprint_system(sys_)


def test_fingerprint_sensitive_to_content():
    a = load_system("example2", param_bound=2.0)
    b = load_system("example2", param_bound=2.5)
    assert fingerprint_system(a) != fingerprint_system(b)


def test_missing_file_and_fields(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_system(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(SystemFormatError) as ei:
        load_system(bad)
    assert "line" in str(ei.value)
    incomplete = tmp_path / "inc.json"
    incomplete.write_text(json.dumps({"variables": ["x1"]}))
    with pytest.raises(SystemFormatError):
        load_system(incomplete)


def test_invalid_system_rejected(tmp_path):
    data = {
        "variables": ["x1", "x2"],
        "modes": [
            {"id": 1, "domain": ["x1"], "field": ["x2", "-x1"],
             "neighborhood": ["1 - x1^2 - x2^2"], "anchor": [0, 0]},
            {"id": 2, "domain": ["x1"], "field": ["x2", "-x1"],
             "neighborhood": ["1 - x1^2 - x2^2"], "anchor": [0, 0]},
        ],
        "edges": [
            {"from": 1, "to": 2, "guard_eq": "x1", "guard_ineq": [], "reset": ["x1", "x2"]},
        ],
    }
    f = tmp_path / "half.json"
    f.write_text(json.dumps(data))
    with pytest.raises(SystemFormatError) as ei:
        load_system(f)
    assert "lacks an outgoing edge" in str(ei.value)


def test_manifest_written(tmp_path):
    import time
    m = RunManifest.create("certify", {"degree": 8}, "aa" * 32, seed=7,
                           started=time.time())
    path = write_manifest(tmp_path, m)
    data = json.loads(path.read_text())
    assert data["command"] == "certify"
    assert data["seed"] == 7
    assert len(data["config_hash"]) == 64
