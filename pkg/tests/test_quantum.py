import math

import numpy as np
import pytest

from diqsdc.quantum import (
    A0, A1, A2, ALICE_PHASES, B1, B2, BOB_PHASES, AnalysisMode, BellState, PHOTON_MISSING, UNREADABLE,
    SectoredTwoPhotonState, apply_encoding, bell_analysis, bell_density, correlator, is_density_matrix,
    partial_trace, werner,
)

SQ = 1 / math.sqrt(2)
H, V = np.array([1, 0]), np.array([0, 1])


def test_phi_plus_matrix_entries():
    rho = bell_density(BellState.PHI_PLUS)
    expected = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            expected[i, j] = 0.5
    assert np.allclose(rho, expected, atol=1e-12)


def test_psi_minus_block_sign():
    rho = bell_density(BellState.PSI_MINUS)
    assert rho[1, 1] == pytest.approx(0.5) and rho[2, 2] == pytest.approx(0.5)
    assert rho[1, 2] == pytest.approx(-0.5) and rho[2, 1] == pytest.approx(-0.5)


def test_bell_orthonormal():
    for b in BellState:
        for c in BellState:
            assert np.real(np.trace(bell_density(b) @ bell_density(c))) == pytest.approx(float(b == c), abs=1e-12)


def test_dibit_bijection():
    assert [b.dibit for b in BellState] == ["00", "01", "10", "11"]
    assert all(BellState.from_dibit(b.dibit) is b for b in BellState)


def test_settings():
    assert (A0.phase, A1.phase, A2.phase) == (math.pi / 4, 0.0, math.pi / 2)
    assert (B1.phase, B2.phase) == (math.pi / 4, -math.pi / 4)


@pytest.mark.parametrize("m,target", [(0, BellState.PHI_PLUS), (1, BellState.PHI_MINUS), (2, BellState.PSI_PLUS), (3, BellState.PSI_MINUS)])
def test_encoding_maps_phi_plus(m, target):
    out = apply_encoding(SectoredTwoPhotonState.bell(), m)
    assert np.real(np.trace(out.rho_both @ bell_density(target))) == pytest.approx(1, abs=1e-12)


def test_each_encoding_permutes_bell_basis():
    for m in range(4):
        images = []
        for b in BellState:
            out = apply_encoding(SectoredTwoPhotonState.bell(b), m).rho_both
            fids = [np.real(np.trace(out @ bell_density(c))) for c in BellState]
            assert max(fids) == pytest.approx(1, abs=1e-12)
            images.append(int(np.argmax(fids)))
        assert sorted(images) == [0, 1, 2, 3]


def test_encoding_keeps_werner_weight():
    out = apply_encoding(SectoredTwoPhotonState.pair(werner(0.8)), 1).rho_both
    assert np.allclose(out, werner(0.8, BellState.PHI_MINUS), atol=1e-12)


def test_correlator_on_phi_plus():
    assert correlator(SectoredTwoPhotonState.bell(), math.pi / 4, math.pi / 4) == pytest.approx(1, abs=1e-12)


def test_correlator_cosine_law_with_loss():
    eta, p = 0.7, 0.9
    state = SectoredTwoPhotonState(eta, werner(p), 1 - eta)
    for ta in ALICE_PHASES:
        for tb in BOB_PHASES:
            assert correlator(state, ta, tb) == pytest.approx(eta * p * math.cos(ta - tb), abs=1e-12)


def test_correlator_maximally_mixed():
    state = SectoredTwoPhotonState.pair(np.eye(4) / 4)
    assert correlator(state, 0.3, -1.1) == pytest.approx(0, abs=1e-12)


def test_correlator_from_explicit_kets():
    # independent oracle: build the diagonal-basis eigenvectors by hand
    plus_a = (H + np.exp(1j * math.pi / 4) * V) / math.sqrt(2)
    plus_b = (H + np.exp(-1j * math.pi / 4) * V) / math.sqrt(2)
    phi = (np.kron(H, H) + np.kron(V, V)) * SQ
    p_pp = abs(np.kron(plus_a, plus_b).conj() @ phi) ** 2
    assert p_pp == pytest.approx(0.5, abs=1e-12)


def test_partial_trace_of_bell_is_mixed():
    for b in BellState:
        assert np.allclose(partial_trace(bell_density(b), "a"), np.eye(2) / 2)
        assert np.allclose(partial_trace(bell_density(b), "b"), np.eye(2) / 2)


def test_density_validation():
    assert is_density_matrix(werner(0.3))
    assert not is_density_matrix(np.diag([1.2, -0.2, 0, 0]))
    assert not is_density_matrix(np.eye(4))


def test_bell_analysis_eigenstate():
    rng = np.random.default_rng(0)
    st = SectoredTwoPhotonState.bell(BellState.PSI_PLUS)
    assert all(bell_analysis(st, AnalysisMode.COMPLETE, rng) is BellState.PSI_PLUS for _ in range(200))


def test_bell_analysis_linear_optics():
    rng = np.random.default_rng(1)
    st = SectoredTwoPhotonState.bell(BellState.PHI_PLUS)
    assert all(bell_analysis(st, AnalysisMode.LINEAR_OPTICS, rng) is UNREADABLE for _ in range(200))
    readable = 0
    for _ in range(4000):
        b = BellState(int(rng.integers(4)))
        readable += bell_analysis(SectoredTwoPhotonState.bell(b), AnalysisMode.LINEAR_OPTICS, rng) in (BellState.PSI_PLUS, BellState.PSI_MINUS)
    assert abs(readable / 4000 - 0.5) < 4 * math.sqrt(0.25 / 4000)


def test_bell_analysis_missing():
    rng = np.random.default_rng(2)
    st = SectoredTwoPhotonState(0.0, np.eye(4) / 4, w_a_only=1.0)
    assert bell_analysis(st, AnalysisMode.COMPLETE, rng) is PHOTON_MISSING


def test_bell_analysis_chi_square():
    from scipy.stats import chisquare

    w = np.array([0.55, 0.2, 0.15, 0.1])
    rho = sum(wi * bell_density(b) for wi, b in zip(w, BellState))
    rng = np.random.default_rng(3)
    st = SectoredTwoPhotonState.pair(rho)
    n = 100_000
    counts = np.bincount([int(bell_analysis(st, AnalysisMode.COMPLETE, rng)) for _ in range(n)], minlength=4)
    assert chisquare(counts, w * n).pvalue > 0.01
