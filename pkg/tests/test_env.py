import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from arisim.env import (Environment, LayeredMedium, LinearGradient, Munk, Tabulated,
                        critical_grazing_angle, discretize, layer_discretization_error,
                        sound_speed)
from arisim.errors import (DepthOutOfRange, InvalidLayerCount, NoCriticalAngle,
                           ValidationError)

MUNK = Munk(1500.0, 7e-3, 1000.0, 1000.0)


def test_munk_at_axis():
    assert sound_speed(MUNK, 1000.0) == 1500.0


def test_linear_at_surface():
    assert sound_speed(LinearGradient(1500.0, 1e-4), 0.0) == 1500.0


def test_munk_one_scale_below_axis():
    # eta = 1: bracket is 1 + e^-1 - 1
    assert sound_speed(MUNK, 2000.0) == pytest.approx(1500.0 * (1 + 7e-3 * math.exp(-1)), rel=1e-14)


def test_linear_gradient_formula():
    assert sound_speed(LinearGradient(1500.0, 5e-5), 80.0) == pytest.approx(1500 * (1 - 4e-3))


def test_tabulated_interpolates_and_rejects_extrapolation():
    prof = Tabulated(((0.0, 1500.0), (100.0, 1480.0)))
    assert sound_speed(prof, 25.0) == pytest.approx(1495.0)
    with pytest.raises(DepthOutOfRange):
        sound_speed(prof, 150.0)


def test_negative_depth_rejected():
    with pytest.raises(DepthOutOfRange):
        sound_speed(MUNK, -1.0)


def test_vectorised_evaluation():
    z = np.array([0.0, 1000.0, 2000.0])
    out = sound_speed(MUNK, z)
    assert out.shape == (3,)
    assert out[1] == 1500.0


@pytest.mark.parametrize("bad", [
    lambda: Munk(1500, 0.0, 1000, 1000),
    lambda: Munk(1500, 7e-3, 1000, 0.0),
    lambda: Munk(-1, 7e-3, 1000, 1000),
    lambda: LinearGradient(0.0, 1e-5),
    lambda: Tabulated(((0.0, 1500.0),)),
    lambda: Tabulated(((0.0, 1500.0), (0.0, 1490.0))),
    lambda: Tabulated(((0.0, 1500.0), (10.0, -1.0))),
    lambda: Environment(0.0, 0, 0, 0, MUNK),
    lambda: Environment(100.0, -1, 0, 0, MUNK),
    lambda: Environment(100.0, 0, 0, -0.1, MUNK),
])
def test_invariant_violations(bad):
    with pytest.raises(ValidationError):
        bad()


def test_discretize_constant_table():
    prof = Tabulated(((0.0, 1500.0), (100.0, 1500.0)))
    med = discretize(prof, 100.0, 4)
    assert np.all(med.speeds == 1500.0)
    assert np.all(med.thicknesses == 25.0)
    assert med.is_constant


def test_discretize_midpoints():
    prof = LinearGradient(1500.0, 1e-4)
    med = discretize(prof, 100.0, 2)
    assert med.speeds[0] == sound_speed(prof, 25.0)
    assert med.speeds[1] == sound_speed(prof, 75.0)


def test_munk_minimum_layer_contains_axis():
    med = discretize(MUNK, 4000.0, 200)
    k = int(np.argmin(med.speeds))
    # independent evaluation of every midpoint
    mids = (np.arange(200) + 0.5) * 20.0
    eta = (mids - 1000.0) / 1000.0
    ref = 1500.0 * (1 + 7e-3 * (eta + np.exp(-eta) - 1))
    assert k == int(np.argmin(ref))
    lo, hi = med.boundaries[k], med.boundaries[k + 1]
    assert lo <= 1000.0 <= hi


def test_zero_layers_rejected():
    with pytest.raises(InvalidLayerCount):
        discretize(MUNK, 4000.0, 0)


def test_critical_angle():
    assert critical_grazing_angle(1500.0, 1500.0) == 0.0
    assert critical_grazing_angle(750.0, 1500.0) == pytest.approx(math.pi / 3, abs=1e-15)
    assert critical_grazing_angle(1480.0, 1500.0) == pytest.approx(math.acos(1480 / 1500))
    with pytest.raises(NoCriticalAngle):
        critical_grazing_angle(1510.0, 1500.0)


def test_layer_index_on_interface():
    med = LayeredMedium(np.array([1500.0, 1490.0]), np.array([50.0, 50.0]))
    assert med.layer_index(50.0, downward=True) == 1
    assert med.layer_index(50.0, downward=False) == 0
    assert med.layer_index(100.0, downward=True) == 1


def test_medium_arrays_read_only():
    med = discretize(MUNK, 4000.0, 10)
    with pytest.raises(ValueError):
        med.speeds[0] = 1.0


@given(st.floats(0.0, 4000.0))
def test_munk_unique_minimum(z):
    assert sound_speed(MUNK, z) >= sound_speed(MUNK, 1000.0)
    if abs(z - 1000.0) > 1.0:
        assert sound_speed(MUNK, z) > sound_speed(MUNK, 1000.0)


@given(st.integers(1, 400), st.floats(10.0, 5000.0))
def test_discretize_preserves_depth(M, H):
    med = discretize(LinearGradient(1500.0, 1e-5), H, M)
    assert med.total_depth == pytest.approx(H, rel=1e-9)
    assert len(med.layers) == M


@given(st.integers(1, 200))
def test_halving_never_increases_error(M):
    e1 = layer_discretization_error(MUNK, 4000.0, M)
    e2 = layer_discretization_error(MUNK, 4000.0, 2 * M)
    assert e2 <= e1 + 1e-12
