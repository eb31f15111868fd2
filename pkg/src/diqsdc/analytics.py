"""Closed-form security and performance figures for both protocol variants."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .channel import DEFAULT_ALPHA_DB_PER_KM, efficiency_at
from .errors import DomainError, NotViolating

SQRT2 = math.sqrt(2)
TSIRELSON = 2 * SQRT2
D_BRACKET_KM = (0.0, 500.0)
P_BRACKET = (0.5, 1.0)
ROOT_XTOL = 1e-12


class Variant(enum.Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"


@dataclass(frozen=True)
class EppSchedule:
    """Outcome of purification planning for a Werner input."""

    k: int
    per_step_success: tuple = ()
    final_fidelity: float = 1.0
    target_fidelity: float = 0.99
    initial_p: float = 1.0
    final_weights: tuple = (1.0, 0.0, 0.0, 0.0)
    rotations: tuple = ()

    @property
    def success_product(self) -> float:
        return float(np.prod(self.per_step_success)) if self.per_step_success else 1.0


def binary_entropy(x: float) -> float:
    if not 0 <= x <= 1:
        raise DomainError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def chi_bound(s: float) -> float:
    """Device-independent bound on the interception rate given CHSH value ``s``."""
    if s > TSIRELSON + 1e-12:
        raise DomainError(f"CHSH value {s} exceeds the Tsirelson bound")
    if s <= 2:
        raise NotViolating(f"S = {s} does not violate the CHSH inequality")
    s = min(s, TSIRELSON)
    return binary_entropy((1 + math.sqrt(max((s / 2) ** 2 - 1, 0.0))) / 2)


def chi_or_unbounded(s: float) -> float:
    """``chi_bound`` with the non-violating regime mapped to 1."""
    try:
        return chi_bound(s)
    except NotViolating:
        return 1.0


@dataclass(frozen=True)
class TheoryPoint:
    eta: float
    p: float
    q1: float
    s1: float
    q2: float
    s2: float
    q2p: float
    s2p: float


def theory_point(eta: float, p: float) -> TheoryPoint:
    ep = eta * p
    return TheoryPoint(
        eta=eta,
        p=p,
        q1=(1 - ep) / 2,
        s1=TSIRELSON * ep,
        q2=(1 - ep**2) / 2,
        s2=TSIRELSON * ep**2,
        q2p=(1 - p) / 2,
        s2p=TSIRELSON * p,
    )


def interception_bound(eta: float, p: float) -> float:
    """Bound on Eve's information: only first-round interceptions reveal dibits."""
    return chi_or_unbounded(theory_point(eta, p).s1)


def bracket_original(eta: float, p: float) -> float:
    t = theory_point(eta, p)
    return 1 - binary_entropy(t.q2) - chi_or_unbounded(t.s2)


def bracket_modified(p: float) -> float:
    t = theory_point(1.0, p)
    return 1 - binary_entropy(t.q2p) - chi_or_unbounded(t.s2p)


def efficiency_original(eta: float, p: float) -> float:
    return max(0.0, bracket_original(eta, p))


def modified_prefactor(eta: float, k: int, success_product: float = 1.0) -> float:
    """Pair-budget factor of the modified variant: eta^4 * prod(P_E) / 2^(k+2)."""
    return eta**4 * success_product / 2 ** (k + 2)


def efficiency_modified_from_factors(eta: float, p: float, k: int, success_product: float = 1.0) -> float:
    return max(0.0, modified_prefactor(eta, k, success_product) * bracket_modified(p))


def efficiency_modified(eta: float, p: float, schedule: EppSchedule) -> float:
    return efficiency_modified_from_factors(eta, p, schedule.k, schedule.success_product)


def bracket_qkd(eta: float, p: float) -> float:
    t = theory_point(eta, p)
    return 1 - binary_entropy(t.q1) - chi_or_unbounded(t.s1)


def di_qkd_rate(eta: float, p: float) -> float:
    """Single-round DI-QKD key rate used as the comparison baseline."""
    return max(0.0, bracket_qkd(eta, p))


def loss_error_rates(eta: float, p: float, variant: Variant | str) -> tuple[float, float]:
    if Variant(variant) is Variant.ORIGINAL:
        return 1 - eta**2, 0.75 * (1 - p**2)
    return 0.0, 0.75 * (1 - p)


def throughput(e_c: float, rep_rate_hz: float, reading_efficiency: float = 1.0) -> float:
    """Message bits per second: efficiency times source repetition rate.

    ``reading_efficiency`` is 0.5 for a linear-optics Bell analyzer.
    """
    if rep_rate_hz <= 0:
        raise DomainError("repetition rate must be positive")
    if reading_efficiency not in (0.5, 1, 1.0):
        raise DomainError(f"reading efficiency must be 0.5 or 1, got {reading_efficiency}")
    return e_c * rep_rate_hz * reading_efficiency


def _root(f, lo: float, hi: float) -> float:
    return float(bisect(f, lo, hi, xtol=ROOT_XTOL))


def threshold_p(variant: Variant | str) -> float:
    """Smallest Werner parameter giving non-negative efficiency at zero distance."""
    if Variant(variant) is Variant.ORIGINAL:
        f = lambda p: bracket_original(1.0, p)  # noqa: E731
    else:
        f = bracket_modified
    return _root(f, *P_BRACKET)


def max_distance(p: float, variant: Variant | str = Variant.ORIGINAL, alpha: float = DEFAULT_ALPHA_DB_PER_KM) -> float:
    """Distance where the efficiency bracket reaches zero (0 below threshold).

    The modified bracket does not depend on distance, so above threshold the
    modified variant has no finite limit and ``inf`` is returned.
    """
    variant = Variant(variant)
    if variant is Variant.MODIFIED:
        return math.inf if bracket_modified(p) > 0 else 0.0
    f = lambda d: bracket_original(efficiency_at(d, alpha), p)  # noqa: E731
    if f(0.0) <= 0:
        return 0.0
    return _root(f, *D_BRACKET_KM)


def di_qkd_max_distance(p: float, alpha: float = DEFAULT_ALPHA_DB_PER_KM) -> float:
    f = lambda d: bracket_qkd(efficiency_at(d, alpha), p)  # noqa: E731
    if f(0.0) <= 0:
        return 0.0
    return _root(f, *D_BRACKET_KM)
