import csv
import json

import numpy as np
import pytest

from quadbound import sweep
from quadbound.cli import main
from quadbound.export import read_branch_json


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_drop_test_touches_down_at_one(tmp_path):
    out = tmp_path / "drop.csv"
    assert main(["simulate", "--drop", "1.5", "--duration", "1.5", "--out", str(out)]) == 0
    data = rows(out)
    first = next(r for r in data if r["contact_F"] == "1")
    assert float(first["t"]) == pytest.approx(1.0, abs=1e-9)


def test_malformed_config_names_the_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[model]\nk_legg = 20\n")
    code = main(["--config", str(cfg), "simulate", "--drop", "1.5", "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "k_legg" in capsys.readouterr().err


def test_unparsable_value_is_a_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[integrator]\nrtol = tight\n")
    assert main(["--config", str(cfg), "simulate", "--drop", "1.5", "--out", str(tmp_path / "x.csv")]) == 2
    assert "rtol" in capsys.readouterr().err


def test_found_gait_replays_periodically(tmp_path):
    gait = tmp_path / "gait.json"
    assert main(["find-gait", "--seed", "pp", "--apex", "1.4", "--out", str(gait)]) == 0
    assert json.loads(gait.read_text())["label"] == "PP"
    traj = tmp_path / "traj.csv"
    assert main(["simulate", "--state", str(gait), "--out", str(traj)]) == 0
    data = rows(traj)
    cols = [c for c in data[0] if c not in ("t", "x")]
    first = np.array([float(data[0][c]) for c in cols])
    last = np.array([float(data[-1][c]) for c in cols])
    assert np.max(np.abs(first - last)) < 1e-6


@pytest.fixture(scope="module")
def pp_branch(tmp_path_factory):
    d = tmp_path_factory.mktemp("pp")
    out = d / "pp.json"
    assert main(["trace", "--seed", "pp", "--apex", "1.2", "--until", "y0=2.0", "--out", str(out)]) == 0
    return out


def test_trace_flags_point_a(pp_branch):
    br = read_branch_json(pp_branch)
    flagged = [s.z.y for s in br.specials("PITCHFORK")]
    assert min(abs(y - 1.71) for y in flagged) < 0.01
    plot = rows(pp_branch.with_suffix(".csv"))
    assert {"E_tot", "xdot", "y", "alpha_F", "label", "special"} <= set(plot[0])
    assert sum(r["special"] == "PITCHFORK" for r in plot) == len(flagged)


def test_trace_is_deterministic(pp_branch, tmp_path):
    again = tmp_path / "again.json"
    assert main(["trace", "--seed", "pp", "--apex", "1.2", "--until", "y0=2.0", "--out", str(again)]) == 0
    assert again.read_bytes() == pp_branch.read_bytes()
    assert again.with_suffix(".csv").read_bytes() == pp_branch.with_suffix(".csv").read_bytes()


def test_switching_at_a_gives_extended_pronking(pp_branch, tmp_path):
    out = tmp_path / "pe.json"
    code = main(["trace", "--from", str(pp_branch), "--switch-at", "A", "--direction", "+",
                 "--max-points", "6", "--out", str(out)])
    assert code == 0
    labels = {p.label for p in read_branch_json(out).points}
    assert labels == {"PE"}


def test_switching_needs_a_known_point(pp_branch, tmp_path, capsys):
    code = main(["trace", "--from", str(pp_branch), "--switch-at", "Q7", "--out", str(tmp_path / "x.json")])
    assert code == 2


def test_invalid_bracket_reports_both_ends(tmp_path, monkeypatch, capsys):
    # structure on both sides of the bracket is "separate", so there is nothing to bisect
    def fake_probe(J, params, ref=None, step=None, sides="CD", **kw):
        return sweep.Probe(J, merged=False, c_turnings=[], c_exit_xdot=6.0)

    monkeypatch.setattr(sweep, "probe", fake_probe)
    monkeypatch.setattr(sweep, "pronking_reference", lambda *a, **k: None)
    out = tmp_path / "sweep.json"
    code = main(["sweep", "--event", "merge", "--bracket", "1.1", "1.2", "--out", str(out)])
    assert code == 2
    err = capsys.readouterr().err
    assert "J=1.1" in err and "J=1.2" in err
    census = json.loads(out.read_text())["census"]
    assert [c["J"] for c in census] == [1.2, 1.1]
