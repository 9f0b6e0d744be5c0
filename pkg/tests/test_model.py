import math

import numpy as np
import pytest

from quadbound.model import (
    INFINITE, Contact, GeometryError, HybridState, Leg, ModelError, ModelParams, leg_geometry_stance, load_config,
    parse_inertia, total_energy,
)


def test_defaults_are_dimensionless_reference_values(params):
    assert params.k_leg == 20.0
    assert params.omega_swing**2 == pytest.approx(5.0)
    assert (params.l_bF, params.l_bH) == (0.5, -0.5)
    assert params.rigid and params.J == INFINITE


@pytest.mark.parametrize("kw", [{"k_leg": -1.0}, {"M": 0.0}, {"J": 0.0}, {"l_bF": -0.1}, {"l_bH": 0.2},
                                {"omega_swing": math.nan}])
def test_invalid_parameters_rejected(kw):
    with pytest.raises(ModelError):
        ModelParams(**kw)


def test_from_mapping_names_unknown_key():
    with pytest.raises(ModelError, match="k_spring"):
        ModelParams.from_mapping({"k_spring": "3"})


def test_parse_inertia():
    assert parse_inertia("inf") == INFINITE
    assert parse_inertia("1.047") == pytest.approx(1.047)
    assert ModelParams.from_mapping({"J": "Infinity"}).rigid


def test_normalized_scales_units():
    p = ModelParams(M=2.0, g=9.81, l_o=0.5, k_leg=20 * 2 * 9.81 / 0.5, J=2.0 * 0.25 * 1.047,
                    omega_swing=math.sqrt(5 * 9.81 / 0.5), l_bF=0.25, l_bH=-0.25)
    n = p.normalized()
    assert n.k_leg == pytest.approx(20.0)
    assert n.omega_swing**2 == pytest.approx(5.0)
    assert n.J == pytest.approx(1.047)
    assert (n.l_bF, n.l_bH) == (pytest.approx(0.5), pytest.approx(-0.5))


def test_flight_energy_is_potential_plus_kinetic(params):
    s = HybridState([0.3, 1.4, 0.0, 0.1, -0.2], [2.0, -0.5, 0.0, 0.7, 0.3])
    assert total_energy(s, params) == pytest.approx(1.4 + 0.5 * (4.0 + 0.25))


def test_pitch_energy_with_finite_inertia():
    p = ModelParams(J=0.8)
    s = HybridState([0.0, 1.2, 0.1, 0.0, 0.0], [0.0, 0.0, 0.5, 0.0, 0.0])
    assert total_energy(s, p) == pytest.approx(1.2 + 0.5 * 0.8 * 0.25)


def test_rigid_body_rejects_pitch_rate(params):
    s = HybridState([0.0, 1.2, 0.0, 0.0, 0.0], [0.0, 0.0, 0.5, 0.0, 0.0])
    with pytest.raises(ModelError):
        total_energy(s, params)


def test_stance_energy_includes_spring(params):
    # front foot straight under the hip, compressed by 0.1
    s = HybridState([0.0, 0.9, 0.0, 0.0, 0.0], np.zeros(5), (Contact.STANCE, Contact.SWING), foothold_F=0.5)
    assert total_energy(s, params) == pytest.approx(0.9 + 0.5 * 20 * 0.01)


def test_leg_geometry_vertical_leg(params):
    s = HybridState([0.0, 0.9, 0.0, 0.0, 0.0], [0.0, -0.3, 0.0, 0.0, 0.0], (Contact.STANCE, Contact.SWING),
                    foothold_F=0.5)
    l, a, ld, ad = leg_geometry_stance(s, Leg.F, params)
    assert (l, a, ld, ad) == (pytest.approx(0.9), pytest.approx(0.0), pytest.approx(-0.3), pytest.approx(0.0))


def test_leg_geometry_inclined_leg(params):
    # hind hip at x=-0.5; foot 0.3 ahead of it; leg angle measured from the vertical
    s = HybridState([0.0, 0.8, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0, 0.0], (Contact.SWING, Contact.STANCE),
                    foothold_H=-0.2)
    l, a, ld, ad = leg_geometry_stance(s, Leg.H, params)
    assert l == pytest.approx(math.hypot(0.3, 0.8))
    assert a == pytest.approx(math.atan2(0.3, 0.8))
    assert ld == pytest.approx(-0.3 / l)  # hip moving towards the foot shortens the leg
    assert ad == pytest.approx(-0.8 / l**2)


def test_leg_geometry_requires_stance(params):
    s = HybridState([0.0, 1.2, 0.0, 0.0, 0.0], np.zeros(5))
    with pytest.raises(ModelError):
        leg_geometry_stance(s, Leg.F, params)


def test_hip_below_ground_is_geometry_error(params):
    s = HybridState([0.0, -0.1, 0.0, 0.0, 0.0], np.zeros(5), (Contact.STANCE, Contact.SWING), foothold_F=0.5)
    with pytest.raises(GeometryError):
        leg_geometry_stance(s, Leg.F, params)


def test_foothold_must_match_phase():
    with pytest.raises(ModelError):
        HybridState([0.0, 1.0, 0.0, 0.0, 0.0], np.zeros(5), (Contact.STANCE, Contact.SWING))


def test_load_config_sections(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[model]\nJ = 1.2\nk_leg = 25\n[integrator]\nrtol = 1e-10\n")
    sec = load_config(cfg)
    assert ModelParams.from_mapping(sec["model"]).J == pytest.approx(1.2)
    assert sec["continuation"] == {}
    cfg.write_text("[modle]\nJ = 1\n")
    with pytest.raises(ModelError, match="modle"):
        load_config(cfg)
