import json

import numpy as np
import pytest

from quadbound.continuation import (
    ContinuationOptions,
    SpecialKind,
    bounds_rule,
    detect_bifurcations,
    switch_branch,
    trace,
)
from quadbound.export import branch_from_dict, branch_to_dict, read_branch_json, write_branch_json, write_branch_csv
from quadbound.gaitlib import classify, mirror, seed_vertical_gait, symmetry_check_PE_PG
from quadbound.shoot import fix_component, residual, solve

STEP = 0.02


@pytest.fixture(scope="module")
def pp(params):
    s1 = seed_vertical_gait("PP", 1.55, params)
    s2 = seed_vertical_gait("PP", 1.56, params)
    return trace(s1, s2, params, step=STEP, stop_rules=(bounds_rule("y", hi=1.75),))


@pytest.fixture(scope="module")
def point_a(pp):
    return pp.specials(SpecialKind.PITCHFORK)[-1]


def test_accepted_steps_satisfy_arclength_and_direction(pp, params):
    Z = pp.Z
    allowed = STEP / 2.0 ** np.arange(7)
    for n in range(1, len(Z)):
        d = np.linalg.norm(Z[n] - Z[n - 1])
        assert np.min(np.abs(allowed - d)) < 1e-8
        if n >= 2:
            assert np.dot(Z[n] - Z[n - 1], Z[n - 1] - Z[n - 2]) > 0
    for z in Z[::5]:
        assert np.max(np.abs(residual(z, params))) < 1e-9


def test_pronking_in_place_has_two_branch_points(pp):
    forks = [s.z.y for s in pp.specials(SpecialKind.PITCHFORK)]
    assert forks == pytest.approx([1.6144, 1.7042], abs=1e-3)
    assert pp.special[-1].kind == SpecialKind.TERMINATION


def test_rescan_finds_the_same_points(pp, params):
    again = detect_bifurcations(pp, params)
    assert [s.kind for s in again] == [s.kind for s in pp.special]
    for a, b in zip(again, pp.special):
        assert np.allclose(a.z.z, b.z.z, atol=1e-9)


def test_switching_at_a_gives_leg_inverted_pair(pp, point_a, params):
    sols = {}
    for sign in (1, -1):
        _, s2 = switch_branch(pp, point_a, params, sign=sign)
        sols[str(classify(s2, params))] = s2
    assert set(sols) == {"PE", "PG"}
    pg = solve(sols["PG"], params, [fix_component("y", sols["PE"].y)])
    assert symmetry_check_PE_PG(sols["PE"], pg, params)


def test_trace_is_step_size_independent(pp, point_a, params):
    seeds = switch_branch(pp, point_a, params, sign=1)
    coarse = trace(*seeds, params, step=STEP, options=ContinuationOptions(max_points=5, detect=False))
    fine = trace(*seeds, params, step=STEP / 2, options=ContinuationOptions(max_points=9, detect=False))
    for z in coarse.Z[1:]:
        k = int(np.argmin(np.abs(fine.column("y") - z[0])))
        twin = solve(fine.Z[k], params, [fix_component("y", z[0])])
        assert np.max(np.abs(twin.z - z)) < 1e-6


def test_mirrored_gaits_are_gaits(gaits, params):
    for name in ("PF_300", "B2_400", "BGBE_300"):
        assert np.max(np.abs(residual(mirror(gaits[name]), params))) < 1e-9


def test_branch_export_round_trip(pp, tmp_path):
    back = branch_from_dict(json.loads(json.dumps(branch_to_dict(pp))))
    assert np.array_equal(back.Z, pp.Z)
    assert [s.kind for s in back.special] == [s.kind for s in pp.special]
    path = tmp_path / "pp.json"
    write_branch_json(pp, path)
    again = read_branch_json(path)
    assert np.array_equal(again.energies, pp.energies)
    assert again.params == pp.params
    write_branch_csv(pp, tmp_path / "pp.csv")
    rows = (tmp_path / "pp.csv").read_text().splitlines()
    assert len(rows) == 1 + len(pp) + len(pp.special)
