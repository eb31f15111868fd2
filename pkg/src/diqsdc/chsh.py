"""CHSH and QBER estimation, exact and by seeded sampling.

Settings are indexed as in :data:`quantum.ALICE_SETTINGS` (A0, A1, A2) and
:data:`quantum.BOB_SETTINGS` (B1, B2).  The CHSH polynomial uses the
``{A1, A2} x {B1, B2}`` cells and the QBER uses the ``(A0, B1)`` cell.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .errors import InsufficientSamples
from .quantum import (
    ALICE_PHASES,
    BOB_PHASES,
    I4,
    SectoredTwoPhotonState,
    correlator,
    joint_outcome_probs,
    projector,
)

TSIRELSON = 2 * math.sqrt(2)
MIN_CHECK_PAIRS = 10_000
MIN_CELL_PAIRS = 100

# (alice index, bob index, sign) for S = <a1b1> + <a1b2> + <a2b1> - <a2b2>
CHSH_TERMS = ((1, 0, 1), (1, 1, 1), (2, 0, 1), (2, 1, -1))
QBER_CELL = (0, 0)

# outcome index k of joint_outcome_probs -> (a, b)
OUTCOME_A = np.array([1, 1, -1, -1], dtype=np.int8)
OUTCOME_B = np.array([1, -1, 1, -1], dtype=np.int8)


class Verdict(enum.Enum):
    SECURE = "secure"
    ABORT = "abort"


def sample_pair_outcome(state: SectoredTwoPhotonState, phase_a: float, phase_b: float, rng: np.random.Generator):
    """Sample ``(a, b)`` for one pair; a missing photon reads a fair coin."""
    u = rng.random()
    if u < state.w_both:
        k = int(rng.choice(4, p=joint_outcome_probs(state.rho_both, phase_a, phase_b)))
        return int(OUTCOME_A[k]), int(OUTCOME_B[k])

    def coin() -> int:
        return 1 if rng.random() < 0.5 else -1

    if u < state.w_both + state.w_a_only:
        a = 1 if rng.random() < _plus_prob(state.rho_a, phase_a, "a") else -1
        return a, coin()
    if u < state.w_both + state.w_a_only + state.w_b_only:
        b = 1 if rng.random() < _plus_prob(state.rho_b, phase_b, "b") else -1
        return coin(), b
    return coin(), coin()


def _plus_prob(rho1: np.ndarray, phase: float, photon: str) -> float:
    return float(np.real(np.trace(rho1 @ projector(phase, photon, 1))))


def chsh_exact(state: SectoredTwoPhotonState) -> float:
    return sum(sign * correlator(state, ALICE_PHASES[i], BOB_PHASES[j]) for i, j, sign in CHSH_TERMS)


def qber_exact(state: SectoredTwoPhotonState) -> float:
    return (1 - correlator(state, ALICE_PHASES[QBER_CELL[0]], BOB_PHASES[QBER_CELL[1]])) / 2


def chsh_from_correlators(e: np.ndarray) -> float:
    return float(sum(sign * e[i, j] for i, j, sign in CHSH_TERMS))


@dataclass
class CheckTally:
    """Per-cell counts from a batch of check pairs; merges with ``+``."""

    n: np.ndarray = field(default_factory=lambda: np.zeros((3, 2), dtype=np.int64))
    agree: np.ndarray = field(default_factory=lambda: np.zeros((3, 2), dtype=np.int64))
    sum_a: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    sum_b: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))

    @classmethod
    def from_outcomes(cls, sa: np.ndarray, sb: np.ndarray, a: np.ndarray, b: np.ndarray) -> "CheckTally":
        cell = np.asarray(sa) * 2 + np.asarray(sb)
        n = np.bincount(cell, minlength=6).reshape(3, 2)
        agree = np.bincount(cell, weights=(np.asarray(a) == np.asarray(b)), minlength=6).reshape(3, 2)
        sum_a = np.bincount(sa, weights=a, minlength=3)
        sum_b = np.bincount(sb, weights=b, minlength=2)
        return cls(n.astype(np.int64), agree.astype(np.int64), sum_a.astype(np.int64), sum_b.astype(np.int64))

    def __add__(self, other: "CheckTally") -> "CheckTally":
        return CheckTally(self.n + other.n, self.agree + other.agree, self.sum_a + other.sum_a, self.sum_b + other.sum_b)

    @property
    def total(self) -> int:
        return int(self.n.sum())


@dataclass(frozen=True)
class SecurityCheckResult:
    s_estimate: float
    s_stderr: float
    q_estimate: float
    q_stderr: float
    n_pairs_used: int
    verdict: Verdict
    warn: bool
    correlators: tuple
    marginals_a: tuple
    marginals_b: tuple

    @property
    def secure(self) -> bool:
        return self.verdict is Verdict.SECURE

    def to_dict(self) -> dict:
        return {
            "s_estimate": self.s_estimate,
            "s_stderr": self.s_stderr,
            "q_estimate": self.q_estimate,
            "q_stderr": self.q_stderr,
            "n_pairs_used": self.n_pairs_used,
            "verdict": self.verdict.value,
            "warn": self.warn,
            "correlators": [list(r) for r in self.correlators],
            "marginals_a": list(self.marginals_a),
            "marginals_b": list(self.marginals_b),
        }


def result_from_tally(tally: CheckTally, min_cell: int = MIN_CELL_PAIRS) -> SecurityCheckResult:
    """Estimate S and Q with binomial standard errors; abort iff S <= 2."""
    if (tally.n < min_cell).any():
        raise InsufficientSamples(f"a setting cell received fewer than {min_cell} pairs: {tally.n.tolist()}")
    n = tally.n.astype(float)
    e = (2 * tally.agree - tally.n) / n
    var_e = (1 - e**2) / n
    s = chsh_from_correlators(e)
    s_err = math.sqrt(sum(var_e[i, j] for i, j, _ in CHSH_TERMS))
    nq = n[QBER_CELL]
    q = (tally.n[QBER_CELL] - tally.agree[QBER_CELL]) / nq
    q_err = math.sqrt(q * (1 - q) / nq)
    verdict = Verdict.ABORT if s <= 2 else Verdict.SECURE
    warn = bool(s - 2 < 3 * s_err)
    marg_a = tuple(float(x) for x in tally.sum_a / n.sum(axis=1))
    marg_b = tuple(float(x) for x in tally.sum_b / n.sum(axis=0))
    return SecurityCheckResult(
        s_estimate=float(s),
        s_stderr=s_err,
        q_estimate=float(q),
        q_stderr=q_err,
        n_pairs_used=tally.total,
        verdict=verdict,
        warn=warn,
        correlators=tuple(tuple(float(x) for x in row) for row in e),
        marginals_a=marg_a,
        marginals_b=marg_b,
    )


def outcome_table(rho: np.ndarray) -> np.ndarray:
    """Joint outcome probabilities for every setting pair, shape ``(3, 2, 4)``."""
    return np.array([[joint_outcome_probs(rho, pa, pb) for pb in BOB_PHASES] for pa in ALICE_PHASES])


def sample_check_block(
    tables: np.ndarray,
    cls: np.ndarray,
    has_a: np.ndarray,
    has_b: np.ndarray,
    rng: np.random.Generator,
) -> CheckTally:
    """Draw settings and outcomes for a block of check pairs.

    ``tables[c]`` is the outcome table of state class ``c``, conditioned on
    both photons present; a missing photon's outcome is replaced by a coin.
    """
    n = len(cls)
    sa = rng.integers(0, 3, n)
    sb = rng.integers(0, 2, n)
    k = parallel.sample_categorical(tables[cls, sa, sb], rng)
    a = OUTCOME_A[k].astype(np.int64)
    b = OUTCOME_B[k].astype(np.int64)
    coins = rng.integers(0, 2, (2, n)) * 2 - 1
    a = np.where(has_a, a, coins[0])
    b = np.where(has_b, b, coins[1])
    return CheckTally.from_outcomes(sa, sb, a, b)


def _source_tables(state: SectoredTwoPhotonState):
    """Sector classes of an i.i.d. source as (tables, sector weights, presence flags)."""
    both = outcome_table(state.rho_both)
    # single-photon sectors: embed the surviving photon next to a dummy partner
    a_only = outcome_table(np.kron(state.rho_a, np.eye(2) / 2))
    b_only = outcome_table(np.kron(np.eye(2) / 2, state.rho_b))
    vac = outcome_table(I4 / 4)
    tables = np.stack([both, a_only, b_only, vac])
    has_a = np.array([True, True, False, False])
    has_b = np.array([True, False, True, False])
    return tables, state.weights, has_a, has_b


def estimate_security(
    source: SectoredTwoPhotonState,
    n_check: int,
    rng: np.random.Generator | int,
    min_check: int = MIN_CHECK_PAIRS,
    threads: int | None = 1,
) -> SecurityCheckResult:
    """Run a CHSH/QBER check on ``n_check`` pairs drawn i.i.d. from ``source``."""
    if n_check < min_check:
        raise InsufficientSamples(f"n_check={n_check} is below the minimum {min_check}")
    seed = rng if isinstance(rng, (int, np.integer)) else int(rng.integers(0, 2**63))
    tables, weights, has_a, has_b = _source_tables(source)
    weights = np.clip(weights, 0, None)
    weights = weights / weights.sum()

    def block(sl: slice, r: np.random.Generator) -> CheckTally:
        cls = r.choice(4, size=sl.stop - sl.start, p=weights)
        return sample_check_block(tables, cls, has_a[cls], has_b[cls], r)

    parts = parallel.map_blocks(n_check, seed, 0, block, threads)
    return result_from_tally(sum(parts, CheckTally()))
