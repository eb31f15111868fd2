import math

import numpy as np
import pytest

from diqsdc.channel import werner_after_loss
from diqsdc.errors import DomainError, MalformedState
from diqsdc.nla import apply_nla, fock_nla_density, fock_nla_oracle, nla_success_probability
from diqsdc.quantum import BELL_VECTORS, BellState, SectoredTwoPhotonState, fidelity_pure, werner


def test_success_probability():
    assert nla_success_probability(1) == 0.5
    assert nla_success_probability(0.5) == 0.25
    assert nla_success_probability(0) == 0
    with pytest.raises(DomainError):
        nla_success_probability(1.2)


@pytest.mark.parametrize("eta", [0.3, 1.0])
def test_oracle_examples(eta):
    p, fid = fock_nla_oracle(eta)
    assert p == pytest.approx(eta / 2, abs=1e-10)
    assert fid == pytest.approx(1, abs=1e-10)


def test_oracle_vacuum():
    assert fock_nla_oracle(0.0) == (0.0, None)


@pytest.mark.parametrize("target", list(BellState))
def test_oracle_all_targets(target):
    rho = fock_nla_density(0.4, target)
    p = np.real(np.trace(rho))
    assert p == pytest.approx(0.2, abs=1e-12)
    assert fidelity_pure(rho / p, BELL_VECTORS[target]) == pytest.approx(1, abs=1e-12)


def test_oracle_patterns_equally_likely():
    # output is rank one and fixed for every herald, so each pattern carries 1/4 of the success
    rho = fock_nla_density(1.0)
    assert np.linalg.matrix_rank(rho, tol=1e-10) == 1


def test_apply_nla_statistics_and_output():
    eta, p = 0.6, 0.9
    st = werner_after_loss(eta, p)
    rng = np.random.default_rng(8)
    n = 100_000
    wins = 0
    for _ in range(n):
        out = apply_nla(st, rng)
        if out.success:
            wins += 1
            assert out.restored_state.w_both == 1
    assert abs(wins / n - eta / 2) < 3 * math.sqrt(eta / 2 * (1 - eta / 2) / n)
    out = next(o for o in (apply_nla(st, rng) for _ in range(100)) if o.success)
    assert np.allclose(out.restored_state.rho_both, werner(p), atol=1e-12)
    assert len(out.herald_pattern) == 2


def test_apply_nla_pure_and_empty():
    rng = np.random.default_rng(1)
    outs = [apply_nla(SectoredTwoPhotonState.bell(), rng) for _ in range(2000)]
    assert abs(np.mean([o.success for o in outs]) - 0.5) < 0.05
    empty = SectoredTwoPhotonState(0.0, np.eye(4) / 4, w_a_only=1.0)
    assert not any(apply_nla(empty, rng).success for _ in range(200))


def test_apply_nla_rejects_vacuum():
    st = SectoredTwoPhotonState(0.5, werner(1), 0.25, w_vac=0.25)
    with pytest.raises(MalformedState):
        apply_nla(st, np.random.default_rng(0))


def test_apply_nla_never_purifies():
    rho = werner(0.7)
    st = SectoredTwoPhotonState(0.9, rho, 0.1)
    rng = np.random.default_rng(2)
    out = next(o for o in (apply_nla(st, rng) for _ in range(100)) if o.success)
    phi = BELL_VECTORS[BellState.PHI_PLUS]
    assert fidelity_pure(out.restored_state.rho_both, phi) == pytest.approx(fidelity_pure(rho, phi), abs=1e-12)
