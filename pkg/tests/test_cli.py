import csv
import io
import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from qsdcnet import cli
from qsdcnet.errors import ConfigError


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(p)


BASE = {"d": 3, "m_bases": 4, "n_pairs": 128, "trials": 3, "seed": 10,
        "eve": {"kind": "intercept_resend", "legs": ["charlie_to_bob"]}}


def test_run_json_report(tmp_path, capsys):
    assert cli.main(["run", "--config", _write(tmp_path, BASE)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema_version"] == 1
    assert report["config"]["m_bases"] == 4
    assert [t["seed"] for t in report["trials"]] == [10, 11, 12]
    agg = report["aggregate"]
    assert agg["eve_error_rate"]["check"] == "decoy_check"
    assert agg["eve_error_rate"]["theoretical"] == 0.5
    assert agg["abort_fraction"] == 1.0
    assert "key_recovery_rate" in report["trials"][0]["eve"]


def test_run_csv_and_out_file(tmp_path):
    out = tmp_path / "r.csv"
    cfg = _write(tmp_path, {"d": 2, "n_pairs": 64, "trials": 2})
    assert cli.main(["run", "--config", cfg, "--format", "csv", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["status"] for r in rows] == ["completed", "completed"]
    assert rows[0]["message_fidelity"] == "1.0"


def test_seed_override_and_transcripts(tmp_path, capsys):
    cfg = _write(tmp_path, {"d": 2, "n_pairs": 64, "trials": 2})
    tdir = tmp_path / "tx"
    assert cli.main(["run", "--config", cfg, "--seed", "7", "--transcripts", str(tdir)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["seed"] == 7
    files = sorted(p.name for p in tdir.iterdir())
    assert files == ["trial_0000.ndjson", "trial_0001.ndjson"]


def test_parallel_matches_serial(tmp_path):
    cfg = _write(tmp_path, BASE)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(b), "--parallel", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("data,field", [
    ({"d": 3, "colour": "red"}, "colour"),
    ({"d": "three"}, "'d'"),
    ({"n_pairs": 2.5}, "n_pairs"),
    ({"eve": {"kind": "teleport"}}, "eve.kind"),
    ({"eve": {"kind": "intercept_resend", "legs": ["sideways"]}}, "eve.legs"),
    ({"eve": {"kind": "intercept_resend", "hop": "S1"}}, "eve.hop"),
    ({"d": 4, "m_bases": 3}, "m_bases"),
    ({"decoy_source": "magic"}, "decoy_source"),
    ({"trials": 0}, "trials"),
    ({"route": {"sender": "a", "receiver": "b"}}, "topology"),
    ({"topology": [1, 2]}, "topology"),
])
def test_bad_config_names_field(tmp_path, capsys, data, field):
    assert cli.main(["run", "--config", _write(tmp_path, data)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and field in err


def test_unreadable_and_malformed_files(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["run", "--config", _write(tmp_path, "{not json")]) == 2
    assert cli.main(["run", "--config", _write(tmp_path, "[1, 2]")]) == 2


def test_network_config(tmp_path, capsys):
    data = {"d": 2, "n_pairs": 64, "topology": {"kind": "loop", "branches": [
        {"server_id": "S0", "user_ids": ["alice0"]},
        {"server_id": "S1", "user_ids": ["bob1"]},
        {"server_id": "S2", "user_ids": ["carol2"]}]},
        "route": {"sender": "carol2", "receiver": "alice0"},
        "eve": {"kind": "intercept_resend", "legs": ["charlie_to_bob"], "hop": "S2"}}
    assert cli.main(["run", "--config", _write(tmp_path, data)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["route"] == {"sender": "carol2", "receiver": "alice0"}
    data["eve"]["hop"] = "S1"
    assert cli.main(["run", "--config", _write(tmp_path, data)]) == 2


def test_sweep_marks_unsupported_rows(tmp_path, capsys):
    cfg = _write(tmp_path, {"n_pairs": 128, "trials": 1,
                            "eve": {"kind": "intercept_resend"}})
    assert cli.main(["sweep", "--config", cfg, "--format", "csv",
                     "--sweep", '{"d": [2, 4], "m_bases": [2, 3]}']) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    status = {(r["d"], r["m_bases"]): r["status"] for r in rows}
    assert status[("2", "2")] == "ok" and status[("2", "3")] == "ok"
    assert status[("4", "3")].startswith("unsupported")
    assert float(next(r for r in rows if r["d"] == "2" and r["m_bases"] == "3")["theoretical"]) == \
        pytest.approx(1 / 3)


def test_sweep_rejects_unknown_axis(tmp_path, capsys):
    cfg = _write(tmp_path, {"n_pairs": 64})
    assert cli.main(["sweep", "--config", cfg, "--sweep", '{"n_pairs": [1]}']) == 2


def test_verify_and_fault_injection(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5
    assert cli.main(["verify", "--inject-fault", "hadamard"]) == 1
    assert "FAIL" in capsys.readouterr().out


json_leaf = st.one_of(st.none(), st.booleans(), st.integers(-5, 300), st.floats(allow_nan=False),
                      st.text(max_size=5))
json_value = st.recursive(json_leaf, lambda c: st.lists(c, max_size=3) |
                          st.dictionaries(st.text(max_size=5), c, max_size=3), max_leaves=6)
keys = st.sampled_from(sorted(cli.CONFIG_FIELDS) + ["extra"])


@given(st.dictionaries(keys, json_value, max_size=5))
@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_parse_config_never_crashes(data):
    try:
        cli.parse_config(data)
    except ConfigError:
        pass
    except Exception as exc:  # noqa: BLE001
        from qsdcnet.errors import QSDCError
        assert isinstance(exc, QSDCError), repr(exc)


def test_sweep_theoretical_column_over_m(tmp_path, capsys):
    cfg = _write(tmp_path, {"d": 3, "n_pairs": 128, "eve": {"kind": "intercept_resend"}})
    assert cli.main(["sweep", "--config", cfg, "--format", "csv",
                     "--sweep", '{"m_bases": [2, 3, 4]}']) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    got = [float(r["theoretical"]) for r in rows]
    assert got == pytest.approx([1 / 3, 4 / 9, 1 / 2])


def test_empty_sweep_is_single_row(tmp_path, capsys):
    cfg = _write(tmp_path, {"d": 2, "n_pairs": 64})
    assert cli.main(["sweep", "--config", cfg, "--format", "csv"]) == 0
    assert len(list(csv.DictReader(io.StringIO(capsys.readouterr().out)))) == 1


def test_honest_run_baseline(tmp_path, capsys):
    cfg = _write(tmp_path, {"d": 2, "m_bases": 2, "n_pairs": 64, "trials": 10})
    assert cli.main(["run", "--config", cfg]) == 0
    agg = json.loads(capsys.readouterr().out)["aggregate"]
    assert agg["abort_fraction"] == 0 and agg["message_fidelity"] == 1.0
    assert agg["trials"] == 10


def test_attacked_run_brackets_headline_rate(tmp_path, capsys):
    cfg = _write(tmp_path, {"d": 3, "m_bases": 4, "n_pairs": 2600, "decoy_count": 2000, "p_check": 0.05,
                            "trials": 10, "eve": {"kind": "intercept_resend",
                                                  "legs": ["charlie_to_bob"]}})
    assert cli.main(["run", "--config", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    eve = report["aggregate"]["eve_error_rate"]
    assert eve["samples"] == 20_000
    assert eve["ci95"][0] <= 0.5 <= eve["ci95"][1]
    assert all(t["watched_check"]["theoretical"] == 0.5 for t in report["trials"])


def test_unwritable_output_is_a_diagnostic(tmp_path, capsys):
    cfg = _write(tmp_path, {"d": 2, "n_pairs": 64})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "no" / "such" / "r.json")]) == 2
    assert "cannot write" in capsys.readouterr().err
