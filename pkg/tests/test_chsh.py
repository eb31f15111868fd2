import math

import numpy as np
import pytest

from diqsdc.chsh import (
    CheckTally, InsufficientSamples, Verdict, chsh_exact, estimate_security, qber_exact, result_from_tally,
    sample_pair_outcome,
)
from diqsdc.quantum import SectoredTwoPhotonState, werner

TSIRELSON = 2 * math.sqrt(2)


def lossy(eta, p):
    return SectoredTwoPhotonState(eta, werner(p), 1 - eta)


def test_ideal_values():
    st = SectoredTwoPhotonState.bell()
    assert chsh_exact(st) == pytest.approx(TSIRELSON, abs=1e-12)
    assert qber_exact(st) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("eta,p", [(1, 1), (0.8, 0.9), (0.5, 0.99), (0.3, 0.4)])
def test_closed_forms(eta, p):
    st = lossy(eta, p)
    assert chsh_exact(st) == pytest.approx(TSIRELSON * eta * p, abs=1e-12)
    assert qber_exact(st) == pytest.approx((1 - eta * p) / 2, abs=1e-12)


def test_estimate_matches_exact():
    st = lossy(0.9, 0.95)
    res = estimate_security(st, 200_000, 11, threads=2)
    assert abs(res.s_estimate - chsh_exact(st)) < 4 * res.s_stderr
    assert abs(res.q_estimate - qber_exact(st)) < 4 * res.q_stderr
    assert res.verdict is Verdict.SECURE and res.n_pairs_used == 200_000


def test_abort_below_classical_bound():
    st = lossy(1.0, 0.6)
    assert estimate_security(st, 50_000, 3).verdict is Verdict.ABORT


def test_boundary_sets_warning():
    st = lossy(1.0, 1 / math.sqrt(2))
    res = estimate_security(st, 20_000, 5)
    assert res.warn


def test_too_few_pairs():
    with pytest.raises(InsufficientSamples):
        estimate_security(SectoredTwoPhotonState.bell(), 100, 0)


def test_tally_merge_is_additive():
    rng = np.random.default_rng(0)
    sa, sb = rng.integers(0, 3, 1000), rng.integers(0, 2, 1000)
    a, b = rng.choice([-1, 1], 1000), rng.choice([-1, 1], 1000)
    whole = CheckTally.from_outcomes(sa, sb, a, b)
    parts = CheckTally.from_outcomes(sa[:400], sb[:400], a[:400], b[:400]) + CheckTally.from_outcomes(sa[400:], sb[400:], a[400:], b[400:])
    assert (whole.n == parts.n).all() and (whole.agree == parts.agree).all()
    res = result_from_tally(whole, min_cell=10)
    assert res.n_pairs_used == 1000


def test_single_pair_sampling_marginals():
    rng = np.random.default_rng(4)
    st = lossy(0.5, 1.0)
    prods = [np.prod(sample_pair_outcome(st, math.pi / 4, math.pi / 4, rng)) for _ in range(20_000)]
    assert abs(np.mean(prods) - 0.5) < 4 * math.sqrt(1 / 20_000)


def test_determinism_across_threads():
    st = lossy(0.8, 0.97)
    r1 = estimate_security(st, 300_000, 99, threads=1)
    r4 = estimate_security(st, 300_000, 99, threads=4)
    assert r1 == r4
