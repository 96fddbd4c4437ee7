import numpy as np
import pytest

from arisim.channel import numerical_rank
from arisim.errors import Infeasible, ValidationError
from arisim.pipeline import BeamSpec, TrackingSpec, run_joint, stage, with_overrides


def test_scenario_validation(shallow):
    with pytest.raises(ValidationError):
        with_overrides(shallow, rx_pos=(500.0, 150.0))
    with pytest.raises(ValidationError):
        with_overrides(shallow, f_c=0.0)
    with pytest.raises(ValidationError):
        with_overrides(shallow, rx_pos=shallow.tx_pos)
    with pytest.raises(ValidationError):
        BeamSpec(g_req=0.0)
    with pytest.raises(ValidationError):
        TrackingSpec(start_min=5.0, start_max=1.0)


def test_defaults(shallow):
    assert shallow.tx_geom.n_elements == shallow.rx_geom.n_elements == 4
    assert shallow.f_c == 9000.0
    assert shallow.lambda_c == pytest.approx(1500.0 / 9000.0)


def test_shallow_three_streams(shallow_joint):
    r = shallow_joint
    assert r.d_max == 3
    assert numerical_rank(r.cascade) == 3
    assert len(r.capture_aoas) == len(r.target_aods) == 3
    assert r.rank_h_eff >= r.rank_h


def test_deep_two_streams(deep_joint):
    r = deep_joint
    assert r.d_max == 2
    assert r.rank_h_eff >= 2
    assert numerical_rank(r.cascade) >= 2
    assert r.rank_h_eff >= r.rank_h


@pytest.mark.parametrize("name", ["shallow_joint", "deep_joint"])
def test_aris_never_hurts(name, request):
    r = request.getfixturevalue(name)
    for row in r.capacity_table:
        assert row.c_with >= row.c_no - 1e-9
    c = [row.c_with for row in r.capacity_table]
    assert all(b >= a - 1e-12 for a, b in zip(c, c[1:]))


def test_tracking_gamma(shallow_joint):
    r = shallow_joint
    assert r.traces
    assert 0.95 <= r.gamma <= 1.0


def test_zero_phi_collapses_to_baseline(shallow, shallow_joint):
    r = run_joint(shallow, seed=0, dof_map=shallow_joint.dof_map, force_zero_phi=True)
    assert np.array_equal(r.h_eff, r.h)
    for row in r.capacity_table:
        # gamma scales the effective channel only, so match the baseline at gamma = 1
        assert row.c_with <= row.c_no + 1e-12
    no_track = run_joint(with_overrides(shallow, tracking=None), seed=0,
                         dof_map=shallow_joint.dof_map, force_zero_phi=True)
    for row in no_track.capacity_table:
        assert row.c_with == row.c_no


def test_deterministic(shallow, shallow_joint):
    again = run_joint(shallow, seed=0, dof_map=shallow_joint.dof_map)
    assert again.p_star == shallow_joint.p_star
    assert np.array_equal(again.h_eff, shallow_joint.h_eff)
    assert [r.c_with for r in again.capacity_table] == [r.c_with for r in shallow_joint.capacity_table]


def test_stage_tagging(shallow, shallow_joint):
    bad = with_overrides(shallow, beam=BeamSpec(g_req=0.8, eps_cross=0.01, g_max=1e-3))
    with pytest.raises(Infeasible) as exc:
        run_joint(bad, dof_map=shallow_joint.dof_map)
    assert exc.value.stage == "beamform"
    assert str(exc.value).startswith("[beamform]")


def test_stage_context_keeps_first_tag():
    with pytest.raises(ValidationError) as exc:
        with stage("outer"):
            with stage("inner"):
                raise ValidationError("boom")
    assert exc.value.stage == "inner"


def test_report_snr_in_table(shallow_joint):
    row = shallow_joint.row_at(20.0)
    assert row.rho_db == 20.0
    with pytest.raises(KeyError):
        shallow_joint.row_at(13.0)
