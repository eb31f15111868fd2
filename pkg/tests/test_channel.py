import math

import numpy as np
import pytest

from diqsdc.channel import (
    ChannelParams, depolarize, depolarize_matrix, distance_for, efficiency_at, lose_photon, transmit_round,
    werner_after_loss,
)
from diqsdc.errors import ConfigError
from diqsdc.quantum import SectoredTwoPhotonState, bell_density, werner


def test_efficiency_values():
    assert efficiency_at(0) == 1
    assert efficiency_at(50) == pytest.approx(0.1)
    assert efficiency_at(100) == pytest.approx(0.01)
    assert efficiency_at(1) == pytest.approx(10 ** -0.02)


def test_distance_inverse():
    assert distance_for(efficiency_at(37.5)) == pytest.approx(37.5)


def test_params_validation():
    with pytest.raises(ConfigError):
        ChannelParams(distance_km=-1)
    with pytest.raises(ConfigError):
        ChannelParams(p=1.1)
    with pytest.raises(ConfigError):
        ChannelParams(device_efficiency=0)
    assert ChannelParams(distance_km=50, device_efficiency=0.5).eta == pytest.approx(0.05)


def test_depolarize_composition():
    rho = bell_density(0)
    assert np.allclose(depolarize_matrix(depolarize_matrix(rho, 0.9), 0.8), depolarize_matrix(rho, 0.72), atol=1e-12)


def test_first_round_closed_form():
    eta, p = 0.6, 0.95
    st = transmit_round(SectoredTwoPhotonState.bell(), ChannelParams(distance_km=distance_for(eta), p=p), "b")
    ref = werner_after_loss(eta, p)
    assert st.w_both == pytest.approx(eta) and st.w_a_only == pytest.approx(1 - eta)
    assert np.allclose(st.rho_both, ref.rho_both) and np.allclose(st.rho_a, np.eye(2) / 2)
    assert st.is_valid()


def test_second_round_gives_p_squared_and_vacuum():
    eta, p = 0.6, 0.95
    params = ChannelParams(distance_km=distance_for(eta), p=p)
    st = transmit_round(transmit_round(SectoredTwoPhotonState.bell(), params, "b"), params, "a")
    assert st.w_both == pytest.approx(eta**2)
    assert st.w_vac == pytest.approx((1 - eta) ** 2)
    assert st.w_a_only == pytest.approx(eta * (1 - eta)) and st.w_b_only == pytest.approx(eta * (1 - eta))
    assert np.allclose(st.rho_both, werner(p * p), atol=1e-12)
    assert st.is_valid()


def test_loss_is_identity_at_unit_efficiency():
    st = SectoredTwoPhotonState.pair(werner(0.5))
    out = lose_photon(st, 1.0, "a")
    assert out.w_both == 1 and np.allclose(out.rho_both, st.rho_both)


def test_depolarize_leaves_other_sectors():
    st = SectoredTwoPhotonState(0.5, bell_density(0), 0.5, np.diag([1, 0]))
    out = depolarize(st, 0.5)
    assert np.allclose(out.rho_a, np.diag([1, 0]))
    assert math.isclose(out.w_a_only, 0.5)
