import math

import numpy as np
import pytest

from quadbound.gaitlib import (
    GaitKind,
    bg_be_exchange_deviation,
    biped_correspondence_check,
    classify,
    keyframes,
    leg_exchange,
    mirror,
    seed_vertical_gait,
    symmetry_check_PE_PG,
)
from quadbound.integrate import integrate_timed
from quadbound.model import ModelError, ModelParams
from quadbound.shoot import residual


def test_pronking_seed_timing(params):
    z = seed_vertical_gait("PP", 1.5, params)
    assert z.t_Htd == pytest.approx(1.0)  # fall of 0.5 under unit gravity
    stance = z.t_Hlo - z.t_Htd
    w = math.sqrt(2 * params.k_leg / params.M)
    # a symmetric arc of the harmonic stance about the loaded equilibrium
    u0 = params.M * params.g / (2 * params.k_leg)
    amp = math.hypot(u0, 1.0 / w)
    assert stance == pytest.approx((2 * math.pi - 2 * math.acos(u0 / amp)) / w)
    assert z.t_stride == pytest.approx(2.0 + stance)


def test_bounding_seed_staggers_the_pairs(params):
    z = seed_vertical_gait("BP", 1.2, params)
    assert z.t_Ftd - z.t_Htd == pytest.approx(z.t_stride / 2)
    traj = integrate_timed(z.initial_state(params), z.schedule(), params)
    # the single-pair stance is a harmonic arc about l_o - Mg/k = 0.95
    w = math.sqrt(params.k_leg / params.M)
    amp = math.hypot(0.05, math.sqrt(2 * 0.2) / w)
    assert traj.states[:, 1].min() == pytest.approx(0.95 - amp, abs=1e-6)  # nearest sample to the bottom


@pytest.mark.parametrize("kind,apex", [("PP", 0.99), ("PP", 25.0), ("BP", 12.0), ("PF", 1.5)])
def test_seed_rejects_bad_requests(kind, apex, params):
    with pytest.raises(ModelError):
        seed_vertical_gait(kind, apex, params)


def test_bounding_seed_needs_rigid_body():
    with pytest.raises(ModelError):
        seed_vertical_gait("BP", 1.2, ModelParams(J=2.0))


@pytest.mark.parametrize(
    "name,kind",
    [("PF_300", "PF"), ("PF_50", "PF"), ("B2_40", "B2"), ("B2_400", "B2"),
     ("BGBE_60", "BE"), ("BGBE_300", "BE"), ("BGBE_900", "BG")],
)
def test_classify_known_gaits(name, kind, gaits, params):
    assert classify(gaits[name], params).kind == GaitKind(kind)


def test_classify_seeds_and_merged_point(gaits, params):
    assert classify(seed_vertical_gait("PP", 1.3, params), params).kind == GaitKind.PP
    assert classify(seed_vertical_gait("BP", 1.3, params), params).kind == GaitKind.BP
    assert classify(gaits["F"], ModelParams(J=1.047)).kind == GaitKind.B2


def test_mirror_is_an_involution_that_swaps_suspension(gaits, params):
    z = gaits["BGBE_300"]
    assert np.array_equal(mirror(mirror(z)).z, z.z)
    assert classify(mirror(z), params).kind == GaitKind.BE  # a reflected picture is still extended
    assert mirror(z).xdot == -z.xdot


def test_leg_exchange_maps_extended_to_gathered(gaits, params):
    be = gaits["BGBE_300"]
    bg = leg_exchange(be)
    assert np.max(np.abs(residual(bg, params))) < 1e-9
    assert classify(bg, params).kind == GaitKind.BG
    assert bg_be_exchange_deviation(bg, be) == 0.0


@pytest.mark.parametrize("name", ["PF_50", "B2_40", "BGBE_60", "BGBE_900"])
def test_biped_correspondence(name, gaits, params):
    rep = biped_correspondence_check(gaits[name], params)
    assert rep.ok, rep.deviation


def test_biped_correspondence_needs_rigid_body(gaits):
    with pytest.raises(ModelError):
        biped_correspondence_check(gaits["F"], ModelParams(J=1.047))


def test_leg_inversion_check_needs_equal_apex(params):
    a = seed_vertical_gait("PP", 1.3, params)
    b = seed_vertical_gait("PP", 1.4, params)
    with pytest.raises(ModelError):
        symmetry_check_PE_PG(a, b, params)
    assert symmetry_check_PE_PG(a, a, params)


def test_keyframes_cover_every_event(gaits, params):
    frames = keyframes(gaits["B2_400"], params)
    tags = [f["event"] for f in frames]
    assert tags[0] == "apex" and tags[-1] == "apex_end"
    assert sorted(tags[1:-1]) == sorted(["t_Htd", "t_Hlo", "t_Ftd", "t_Flo"])
    for f in frames:
        assert (f["foot_F"] is None) == (f["contact_F"] == 0)
