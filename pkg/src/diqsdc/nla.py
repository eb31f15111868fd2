"""Heralded noiseless linear amplification of a transmitted photon.

The amplifier is a parity check between the incoming photon and one half of
an ancilla pair: a PBS mixes them, both outputs are measured in the
diagonal basis, and success (one photon per station) teleports the incoming
polarization onto the other ancilla photon.  A vacuum input can never fill
both stations, so loss is filtered out while polarization noise passes
through unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fock
from .errors import DomainError, MalformedState
from .quantum import BELL_VECTORS, I2, Z, BellState, SectoredTwoPhotonState, fidelity_pure

HERALD_PATTERNS = (("H", "H"), ("H", "V"), ("V", "H"), ("V", "V"))


@dataclass(frozen=True, eq=False)
class NlaOutcome:
    success: bool
    restored_state: SectoredTwoPhotonState | None = None
    herald_pattern: tuple | None = None

    @property
    def needs_correction(self) -> bool:
        """Unequal station outcomes call for a phase flip on the output photon."""
        return self.herald_pattern is not None and self.herald_pattern[0] != self.herald_pattern[1]


def nla_success_probability(eta: float) -> float:
    if not 0 <= eta <= 1:
        raise DomainError(f"eta must be in [0, 1], got {eta}")
    return eta / 2


def apply_nla(state: SectoredTwoPhotonState, rng: np.random.Generator, photon: str = "b") -> NlaOutcome:
    """Amplify the transmitted ``photon`` of a pair after one lossy pass.

    Only the sector holding both photons can herald, with probability 1/2;
    the feed-forward phase flip is applied internally so the restored pair
    equals the input two-photon state.
    """
    if photon not in ("a", "b"):
        raise ValueError(f"photon must be 'a' or 'b', got {photon!r}")
    if state.w_vac > 0:
        raise MalformedState("vacuum component present: both photons lost")
    partner_lost = state.w_b_only if photon == "b" else state.w_a_only
    if partner_lost > 0:
        raise MalformedState("the stay-at-home photon is missing")
    if rng.random() >= nla_success_probability(state.w_both):
        return NlaOutcome(False)
    pattern = HERALD_PATTERNS[int(rng.integers(4))]
    return NlaOutcome(True, SectoredTwoPhotonState.pair(state.rho_both), pattern)


# -- linear-optics oracle ---------------------------------------------------


def parity_gate(space: fock.ModeSpace, inp: str, anc: str) -> list[dict]:
    """Optical elements of one amplifier: PBS on (inp, anc), then diagonal plates."""
    return [fock.pbs(space, inp, anc), fock.merge(fock.hadamard_plate(space, inp), fock.hadamard_plate(space, anc))]


def station(space: fock.ModeSpace, name: str) -> tuple[int, int]:
    return (space(name, fock.H), space(name, fock.V))


def fock_nla_density(eta: float, target: BellState = BellState.PHI_PLUS) -> np.ndarray:
    """Unnormalized heralded output pair (stay-at-home photon, amplifier output).

    The input is ``target`` with the travelling photon surviving with
    probability ``eta``; otherwise the remaining photon is maximally mixed.
    """
    if not 0 <= eta <= 1:
        raise DomainError(f"eta must be in [0, 1], got {eta}")
    space = fock.ModeSpace(["a", "b", "e", "f"])
    ancilla = fock.pair_factor(space, "e", "f", BELL_VECTORS[BellState.PHI_PLUS])
    survived = fock.product_state(fock.pair_factor(space, "a", "b", BELL_VECTORS[BellState(target)]), ancilla)
    components = [(eta, survived)]
    for pol in (fock.H, fock.V):
        components.append(((1 - eta) / 2, fock.product_state([(1.0, (space("a", pol),))], ancilla)))
    flip = np.kron(I2, Z)
    return fock.heralded_density(
        components,
        parity_gate(space, "b", "e"),
        [station(space, "b"), station(space, "e")],
        [station(space, "a"), station(space, "f")],
        lambda pat: flip if pat[0] != pat[1] else np.eye(4),
    )


def fock_nla_oracle(eta: float, target: BellState = BellState.PHI_PLUS) -> tuple[float, float | None]:
    """Success probability and output fidelity to ``target`` from the optical circuit.

    Fidelity is ``None`` when nothing heralds.
    """
    rho = fock_nla_density(eta, target)
    p = float(np.real(np.trace(rho)))
    if p <= 1e-15:
        return 0.0, None
    return p, fidelity_pure(rho / p, BELL_VECTORS[BellState(target)])
