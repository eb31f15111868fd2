"""Lossy, depolarizing fibre channel acting on sectored two-photon states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .quantum import I2, I4, SectoredTwoPhotonState, partial_trace, werner

DEFAULT_ALPHA_DB_PER_KM = 0.2


@dataclass(frozen=True)
class ChannelParams:
    """Fibre link: length, attenuation and Werner parameter.

    ``device_efficiency`` folds detector and memory inefficiency into the
    transmission efficiency; 1 means perfect devices.
    """

    distance_km: float = 0.0
    alpha_db_per_km: float = DEFAULT_ALPHA_DB_PER_KM
    p: float = 1.0
    device_efficiency: float = 1.0

    def __post_init__(self):
        if not self.distance_km >= 0:
            raise ConfigError(f"distance_km must be >= 0, got {self.distance_km}")
        if not self.alpha_db_per_km >= 0:
            raise ConfigError(f"alpha_db_per_km must be >= 0, got {self.alpha_db_per_km}")
        if not 0 <= self.p <= 1:
            raise ConfigError(f"p must be in [0, 1], got {self.p}")
        if not 0 < self.device_efficiency <= 1:
            raise ConfigError(f"device_efficiency must be in (0, 1], got {self.device_efficiency}")

    @property
    def eta(self) -> float:
        return transmission_efficiency(self)


def efficiency_at(distance_km: float, alpha_db_per_km: float = DEFAULT_ALPHA_DB_PER_KM) -> float:
    return 10.0 ** (-alpha_db_per_km * distance_km / 10.0)


def distance_for(eta: float, alpha_db_per_km: float = DEFAULT_ALPHA_DB_PER_KM) -> float:
    """Inverse of :func:`efficiency_at`."""
    return -10.0 * np.log10(eta) / alpha_db_per_km


def transmission_efficiency(params: ChannelParams) -> float:
    return efficiency_at(params.distance_km, params.alpha_db_per_km) * params.device_efficiency


def depolarize_matrix(rho: np.ndarray, p: float) -> np.ndarray:
    return p * np.asarray(rho) + (1 - p) * I4 / 4


def depolarize(state: SectoredTwoPhotonState, p: float) -> SectoredTwoPhotonState:
    """Werner-type noise on the two-photon sector; other sectors unchanged."""
    return state.replace(rho_both=depolarize_matrix(state.rho_both, p))


def lose_photon(state: SectoredTwoPhotonState, eta: float, side: str) -> SectoredTwoPhotonState:
    """Photon ``side`` (``"a"`` or ``"b"``) survives with probability ``eta``.

    On loss the two-photon mass moves to the partner's single-photon sector
    carrying the partial trace; single-photon mass of the lost side moves to
    vacuum.
    """
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    if side not in ("a", "b"):
        raise ValueError(f"side must be 'a' or 'b', got {side!r}")
    lost = 1 - eta
    partner = "b" if side == "a" else "a"
    reduced = partial_trace(state.rho_both, keep=partner)

    own_w = state.w_a_only if side == "a" else state.w_b_only
    own_rho = state.rho_a if side == "a" else state.rho_b
    part_w = state.w_b_only if side == "a" else state.w_a_only
    part_rho = state.rho_b if side == "a" else state.rho_a

    new_part_w = part_w + lost * state.w_both
    if new_part_w > 0:
        new_part_rho = (part_w * part_rho + lost * state.w_both * reduced) / new_part_w
    else:
        new_part_rho = part_rho
    new_own_w = eta * own_w

    changes = dict(w_both=eta * state.w_both, w_vac=state.w_vac + lost * own_w)
    if side == "a":
        changes.update(w_a_only=new_own_w, rho_a=own_rho, w_b_only=new_part_w, rho_b=new_part_rho)
    else:
        changes.update(w_b_only=new_own_w, rho_b=own_rho, w_a_only=new_part_w, rho_a=new_part_rho)
    return state.replace(**changes)


def transmit_round(state: SectoredTwoPhotonState, params: ChannelParams, side: str) -> SectoredTwoPhotonState:
    """One pass of photon ``side`` through the fibre: depolarize, then loss."""
    return lose_photon(depolarize(state, params.p), transmission_efficiency(params), side)


def werner_after_loss(eta: float, p: float) -> SectoredTwoPhotonState:
    """Closed-form state after the first round: Werner pair or Alice's photon alone."""
    return SectoredTwoPhotonState(eta, werner(p), 1 - eta, I2 / 2, 0.0, I2 / 2, 0.0)
