import math

import numpy as np
import pytest

from diqsdc import analytics as an
from diqsdc.channel import ChannelParams, efficiency_at
from diqsdc.chsh import chsh_exact
from diqsdc.errors import ConfigError, InsufficientSamples
from diqsdc.protocol import (
    EveModel, ProtocolConfig, Round, StateRegistry, expected_pair_budget, intercept_resend, pair_budget,
    run_modified, run_original, security_check_round,
)
from diqsdc.quantum import BOB_PHASES, BellState, SectoredTwoPhotonState, bell_density, werner

TSIRELSON = 2 * math.sqrt(2)


def cfg(**kw):
    kw.setdefault("n_pairs", 100_000)
    return ProtocolConfig(**kw)


def test_noiseless_end_to_end():
    st = run_original(cfg(seed=1))
    assert st.aborted_at is None
    assert st.r_error_empirical == 0 and st.r_loss_empirical == 0
    assert st.dibits_correct == st.dibits_sent == st.counts["message_pairs"]
    assert np.array_equal(st.sent_dibits, st.decoded_dibits)


def test_loss_rate_at_one_km():
    st = run_original(cfg(n_pairs=1_000_000, channel=ChannelParams(distance_km=1), seed=2), threads=4)
    eta = efficiency_at(1)
    assert abs(st.r_loss_empirical - (1 - eta**2)) < 3 * st.r_loss_stderr
    assert st.r_error_empirical == 0


def test_noisy_channel_aborts_round1():
    st = run_original(cfg(channel=ChannelParams(p=0.5), seed=3))
    assert st.aborted_at is Round.ROUND1 and st.s1 < 2
    assert st.check2 is None and st.dibits_sent == 0


def test_deterministic_across_threads():
    c = cfg(n_pairs=300_000, channel=ChannelParams(distance_km=2, p=0.97), eve=EveModel(fraction_round1=0.05), seed=4)
    a, b = run_original(c, threads=1), run_original(c, threads=6)
    assert a.to_dict() == b.to_dict()
    assert np.array_equal(a.decoded_dibits, b.decoded_dibits)


def test_seed_changes_results():
    c1 = cfg(channel=ChannelParams(distance_km=2, p=0.97), seed=5)
    c2 = cfg(channel=ChannelParams(distance_km=2, p=0.97), seed=6)
    assert run_original(c1).to_dict() != run_original(c2).to_dict()


def test_payload_round_trip():
    bits = "0001101100111001"
    st = run_original(cfg(seed=7, payload=bits))
    assert st.decoded_payload == bits


def test_linear_optics_reads_half():
    st = run_original(cfg(seed=8, bell_analysis_mode="linear_optics"))
    frac = st.dibits_identified / st.dibits_sent
    assert abs(frac - 0.5) < 4 * math.sqrt(0.25 / st.dibits_sent)
    assert st.r_error_empirical == 0


def _post_attack_state(rho):
    """Average over Eve's measurement of photon b in a uniform Bob setting."""
    out = np.zeros((4, 4), dtype=complex)
    for phase in BOB_PHASES:
        for sign in (1, -1):
            ket = np.array([1, sign * np.exp(-1j * phase)]) / math.sqrt(2)  # eigenvector of cos X - sin Y
            proj = np.kron(np.eye(2), np.outer(ket, ket.conj()))
            out += proj @ rho @ proj / len(BOB_PHASES)
    return out


def test_full_round1_attack_matches_oracle_and_aborts():
    s_oracle = chsh_exact(SectoredTwoPhotonState.pair(_post_attack_state(bell_density(BellState.PHI_PLUS))))
    assert s_oracle < 2
    st = run_original(cfg(eve=EveModel(fraction_round1=1.0), seed=9))
    assert st.aborted_at is Round.ROUND1
    assert abs(st.s1 - s_oracle) < 4 * st.check1.s_stderr


def test_zero_fraction_is_no_attack():
    a = run_original(cfg(seed=10))
    b = run_original(cfg(seed=10, eve=EveModel()))
    assert a.to_dict() == b.to_dict()


def test_round2_only_attack_learns_nothing():
    for seed in range(5):
        st = run_original(cfg(eve=EveModel(fraction_round2=1.0), seed=seed))
        assert st.eve_dibits_learned == 0
        assert st.aborted_at is Round.ROUND2


def test_partial_attack_exposes_pairs():
    st = run_original(cfg(eve=EveModel(fraction_round1=0.3, fraction_round2=0.3), seed=11))
    n = st.counts["message_pairs"]
    assert abs(st.eve_dibits_learned / n - 0.09) < 4 * math.sqrt(0.09 * 0.91 / n)


def test_intercept_resend_collapses():
    reg = StateRegistry(bell_density(BellState.PHI_PLUS))
    rng = np.random.default_rng(0)
    cls, hit = intercept_resend(reg, np.zeros(1000, dtype=np.int64), "b", 1.0, rng)
    assert hit.all()
    for c in np.unique(cls):
        assert np.linalg.matrix_rank(reg.states[c], tol=1e-10) == 1
        assert chsh_exact(SectoredTwoPhotonState.pair(reg.states[c])) <= 2 + 1e-12
    same, none = intercept_resend(reg, np.zeros(10, dtype=np.int64), "b", 0.0, rng)
    assert (same == 0).all() and not none.any()


def _check(rho, n=50_000, seed=0):
    reg = StateRegistry(rho)
    ones = np.ones(n, dtype=bool)
    return security_check_round(reg, np.zeros(n, dtype=np.int64), ones, ones, seed, 0)


def test_security_check_round():
    assert _check(bell_density(BellState.PHI_PLUS)).secure
    assert not _check(werner(0.6)).secure
    assert _check(werner(1 / math.sqrt(2)), n=20_000).warn
    with pytest.raises(InsufficientSamples):
        _check(werner(1), n=100)


def test_modified_variant_statistics():
    c = cfg(n_pairs=10**10, channel=ChannelParams(distance_km=25, p=0.98), variant="modified", seed=12)
    st = run_modified(c, threads=4)
    assert st.aborted_at is None
    assert st.r_loss_empirical == 0
    assert abs(st.q2 - 0.01) < 3 * st.check2.q_stderr
    assert st.s1 > 2.8
    assert st.epp_schedule.k == 2


def test_modified_pair_budget():
    st = run_modified(cfg(n_pairs=10**7, channel=ChannelParams(distance_km=0, p=1.0), variant="modified", seed=13))
    assert pair_budget(st) == pytest.approx(0.25, rel=0.05)
    eta = efficiency_at(25)
    st = run_modified(cfg(n_pairs=10**10, channel=ChannelParams(distance_km=25, p=0.98), variant="modified", seed=14))
    assert pair_budget(st) == pytest.approx(expected_pair_budget(eta, st.epp_schedule), rel=0.05)


def test_modified_noiseless_matches_original():
    st = run_modified(cfg(n_pairs=400_000, variant="modified", seed=15))
    assert st.r_error_empirical == 0 and st.r_loss_empirical == 0
    assert st.dibits_correct == st.dibits_sent > 0


def test_modified_rejects_round1_eve():
    with pytest.raises(ConfigError):
        run_modified(cfg(variant="modified", eve=EveModel(fraction_round1=0.5)))


def test_modified_needs_enough_pairs():
    with pytest.raises(InsufficientSamples):
        run_modified(cfg(n_pairs=100_000, channel=ChannelParams(distance_km=50, p=0.98), variant="modified"))


def test_config_round_trip_and_validation():
    c = cfg(channel=ChannelParams(distance_km=3, p=0.9), eve=EveModel(fraction_round2=0.2), variant="modified", payload="01")
    assert ProtocolConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ConfigError):
        ProtocolConfig.from_dict({"n_pairs": 10, "typo": 1})
    with pytest.raises(ConfigError):
        ProtocolConfig.from_dict({"n_pairs": 10, "channel": {"distance": 1}})
    with pytest.raises(ConfigError):
        cfg(check_fraction=1.0)
    with pytest.raises(ConfigError):
        cfg(variant="other")
    with pytest.raises(ConfigError):
        EveModel(fraction_round1=2)
    with pytest.raises(ConfigError):
        run_original(cfg(n_pairs=15_000))


def test_variant_dispatch_guard():
    with pytest.raises(ConfigError):
        run_original(cfg(variant="modified"))
    with pytest.raises(ConfigError):
        run_modified(cfg())
