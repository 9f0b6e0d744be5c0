import math

import numpy as np
import pytest

from quadbound import sweep
from quadbound.model import ModelError, ModelParams
from quadbound.shoot import residual
from quadbound.sweep import (
    BracketError,
    Probe,
    continue_in_inertia,
    find_critical_inertia,
    fold_drift,
    inertia_path,
    regime,
)


def test_inertia_path_from_rigid_body():
    path = inertia_path(math.inf, 1.0)
    assert path[0] == 1e3 and path[-1] == 1.0
    assert np.all(np.diff(np.log(path)) < 0)
    ratios = np.diff(np.log(path[0:]))
    assert np.allclose(ratios, ratios[0])
    assert list(inertia_path(math.inf, 5e3)) == [5e3]
    assert list(inertia_path(2.0, math.inf)) == [math.inf]
    with pytest.raises(ModelError):
        inertia_path(1.0, -1.0)


def test_pronking_does_not_feel_the_inertia(gaits, params):
    z = gaits["PF_300"]
    moved = continue_in_inertia(z, params, 5.0, steps=3)
    assert np.max(np.abs(moved.z - z.z)) < 1e-9


def test_bounding_starts_to_pitch_at_finite_inertia(gaits, params):
    z = gaits["B2_400"]
    moved, path = continue_in_inertia(z, params, 3.0, return_path=True)
    assert path[-1][0] == 3.0
    assert abs(moved.phidot) > 1e-3
    assert moved.xdot == z.xdot  # the anchor holds the speed
    assert np.max(np.abs(residual(moved, ModelParams(J=3.0)))) < 1e-9


def _fake_probe(J_merge, J_folds):
    def fake(J, params, ref=None, step=None, sides="CD", **kw):
        pr = Probe(J, merged=J < J_merge, c_turnings=[], c_exit_xdot=0.3 if J < J_merge else 6.0)
        if "D" in sides:
            pr.d_turnings = [(1.0, 9.0, "min")] if J < J_folds else [(1.0, 9.0, "min"), (2.0, 10.0, "max")] * 2
        return pr

    return fake


def test_bisection_converges_to_the_structural_change(monkeypatch, params):
    monkeypatch.setattr(sweep, "probe", _fake_probe(1.047, 0.501))
    probes = []
    Jc = find_critical_inertia("merge", (0.9, 1.2), params, ref=object(), probes=probes)
    assert Jc == pytest.approx(1.047, abs=5e-3)
    assert len(probes) <= 9
    Jc = find_critical_inertia("turning_points", (0.4, 0.6), params, ref=object())
    assert Jc == pytest.approx(0.501, abs=5e-3)


def test_bracket_without_a_change_is_rejected(monkeypatch, params):
    monkeypatch.setattr(sweep, "probe", _fake_probe(1.047, 0.501))
    with pytest.raises(BracketError) as info:
        find_critical_inertia("merge", (1.1, 1.2), params, ref=object())
    assert [p.J for p in info.value.probes] == [1.1, 1.2]
    with pytest.raises(ModelError):
        find_critical_inertia("gallop", (1.1, 1.2), params, ref=object())


def test_regimes_and_fold_drift():
    def merged(J, f1, f2):
        return Probe(J, True, [(3.0, f1 - 0.5, "min"), (3.5, f1, "max")], 0.3,
                     [(40.0, 9.0, "min"), (45.0, 10.0, "max"), (30.0, 8.0, "max"), (20.0, f2, "min")])

    seps = Probe(1.2, False, [], 6.0, [(1.0, 9.0, "min")] * 4)
    none = Probe(0.45, True, [], 0.3, [(1.0, 6.5, "min")])
    probes = [seps, merged(1.0, 2.3, 9.4), merged(0.9, 1.9, 9.6), none]
    assert [regime(p) for p in probes] == ["separate", "merged", "merged", "no_fold_pair"]
    drift = fold_drift(probes)
    assert drift["J"] == [1.0, 0.9]
    assert drift["F1_decreasing"] and drift["F2_increasing"]
    assert none.F1() is None and none.F2() is None and seps.F1() is None
