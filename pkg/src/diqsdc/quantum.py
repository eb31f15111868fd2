"""Two-photon polarization states, Pauli encoding and measurements.

Basis ordering for two-qubit matrices is ``HH, HV, VH, VV`` with the first
qubit being photon ``a`` (Alice's message photon) and the second photon ``b``
(the checking photon sent to Bob in the first round).  ``|0> = |H>`` and
``|1> = |V>``.

Measurement convention: a setting with phase ``theta`` on photon ``a``
measures ``cos(theta) X + sin(theta) Y``; on photon ``b`` it measures the
conjugate observable ``cos(theta) X - sin(theta) Y``.  On ``|phi+>`` this
gives the correlator ``cos(theta_a - theta_b)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

ATOL = 1e-12
PSD_ATOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I4 = np.eye(4, dtype=complex)


class BellState(enum.IntEnum):
    """Bell states, valued by the dibit they carry (00, 01, 10, 11)."""

    PHI_PLUS = 0
    PHI_MINUS = 1
    PSI_PLUS = 2
    PSI_MINUS = 3

    @property
    def dibit(self) -> str:
        return format(int(self), "02b")

    @classmethod
    def from_dibit(cls, bits: str) -> "BellState":
        return cls(int(bits, 2))


_SQ = 1 / math.sqrt(2)
BELL_VECTORS = {
    BellState.PHI_PLUS: np.array([_SQ, 0, 0, _SQ], dtype=complex),
    BellState.PHI_MINUS: np.array([_SQ, 0, 0, -_SQ], dtype=complex),
    BellState.PSI_PLUS: np.array([0, _SQ, _SQ, 0], dtype=complex),
    BellState.PSI_MINUS: np.array([0, _SQ, -_SQ, 0], dtype=complex),
}
# rows are <B_k| so that BELL_BASIS @ psi gives Bell amplitudes
BELL_BASIS = np.array([BELL_VECTORS[b].conj() for b in BellState])


class Party(enum.Enum):
    ALICE = "alice"
    BOB = "bob"


@dataclass(frozen=True)
class MeasurementSetting:
    party: Party
    phase: float
    name: str = ""


A0 = MeasurementSetting(Party.ALICE, math.pi / 4, "A0")
A1 = MeasurementSetting(Party.ALICE, 0.0, "A1")
A2 = MeasurementSetting(Party.ALICE, math.pi / 2, "A2")
B1 = MeasurementSetting(Party.BOB, math.pi / 4, "B1")
B2 = MeasurementSetting(Party.BOB, -math.pi / 4, "B2")
ALICE_SETTINGS = (A0, A1, A2)
BOB_SETTINGS = (B1, B2)
ALICE_PHASES = np.array([s.phase for s in ALICE_SETTINGS])
BOB_PHASES = np.array([s.phase for s in BOB_SETTINGS])


class PhotonMissing:
    """Sentinel for Bell analysis when a photon of the pair never arrived."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "PhotonMissing"


class Unreadable:
    """Sentinel for a Bell outcome the linear-optics analyzer cannot resolve."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Unreadable"


PHOTON_MISSING = PhotonMissing()
UNREADABLE = Unreadable()


class AnalysisMode(enum.Enum):
    COMPLETE = "complete"
    LINEAR_OPTICS = "linear_optics"


# Linear optics resolves the psi pair only.
LINEAR_OPTICS_READABLE = frozenset({BellState.PSI_PLUS, BellState.PSI_MINUS})


def ket_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def bell_density(b: BellState) -> np.ndarray:
    """Rank-1 projector onto the named Bell state."""
    return ket_density(BELL_VECTORS[BellState(b)])


def werner(p: float, target: BellState = BellState.PHI_PLUS) -> np.ndarray:
    return p * bell_density(target) + (1 - p) * I4 / 4


def is_density_matrix(rho: np.ndarray, atol: float = ATOL, psd_atol: float = PSD_ATOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        return False
    if abs(np.trace(rho) - 1) > atol:
        return False
    return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -psd_atol)


def partial_trace(rho: np.ndarray, keep: str) -> np.ndarray:
    """Reduced single-photon state; ``keep`` is ``"a"`` or ``"b"``."""
    r = np.asarray(rho).reshape(2, 2, 2, 2)
    if keep == "a":
        return np.einsum("ijkj->ik", r)
    if keep == "b":
        return np.einsum("ijik->jk", r)
    raise ValueError(f"keep must be 'a' or 'b', got {keep!r}")


def fidelity_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex)
    return float(np.real(psi.conj() @ rho @ psi))


@dataclass(frozen=True, eq=False)
class SectoredTwoPhotonState:
    """Mixture over which photons of an EPR pair are still present.

    ``rho_both`` is conditioned on both photons present, ``rho_a`` on only
    photon ``a`` present, ``rho_b`` on only photon ``b`` present.
    """

    w_both: float
    rho_both: np.ndarray
    w_a_only: float = 0.0
    rho_a: np.ndarray = field(default_factory=lambda: I2 / 2)
    w_b_only: float = 0.0
    rho_b: np.ndarray = field(default_factory=lambda: I2 / 2)
    w_vac: float = 0.0

    def __post_init__(self):
        for name in ("rho_both", "rho_a", "rho_b"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=complex))

    @classmethod
    def pair(cls, rho: np.ndarray) -> "SectoredTwoPhotonState":
        return cls(1.0, rho)

    @classmethod
    def bell(cls, b: BellState = BellState.PHI_PLUS) -> "SectoredTwoPhotonState":
        return cls(1.0, bell_density(b))

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.w_both, self.w_a_only, self.w_b_only, self.w_vac])

    def is_valid(self, atol: float = ATOL) -> bool:
        w = self.weights
        if (w < -atol).any() or abs(w.sum() - 1) > atol:
            return False
        blocks = ((self.w_both, self.rho_both), (self.w_a_only, self.rho_a), (self.w_b_only, self.rho_b))
        return all(wt <= atol or is_density_matrix(r) for wt, r in blocks)

    def replace(self, **changes) -> "SectoredTwoPhotonState":
        fields = dict(
            w_both=self.w_both, rho_both=self.rho_both, w_a_only=self.w_a_only, rho_a=self.rho_a,
            w_b_only=self.w_b_only, rho_b=self.rho_b, w_vac=self.w_vac,
        )
        fields.update(changes)
        return SectoredTwoPhotonState(**fields)

    def mix(self, other: "SectoredTwoPhotonState", lam: float) -> "SectoredTwoPhotonState":
        """Convex combination ``lam * self + (1 - lam) * other``."""

        def block(w1, r1, w2, r2):
            w = lam * w1 + (1 - lam) * w2
            if w <= 0:
                return 0.0, r1
            return w, (lam * w1 * r1 + (1 - lam) * w2 * r2) / w

        wb, rb = block(self.w_both, self.rho_both, other.w_both, other.rho_both)
        wa, ra = block(self.w_a_only, self.rho_a, other.w_a_only, other.rho_a)
        wbb, rbb = block(self.w_b_only, self.rho_b, other.w_b_only, other.rho_b)
        return SectoredTwoPhotonState(wb, rb, wa, ra, wbb, rbb, lam * self.w_vac + (1 - lam) * other.w_vac)


# -- encoding -------------------------------------------------------------

ENCODING_UNITARIES = {
    0: I2,
    1: Z,
    2: X,
    # |H><V| - |V><H|, written exactly as in the encoding table
    3: np.array([[0, 1], [-1, 0]], dtype=complex),
}


def encoding_unitary(m) -> np.ndarray:
    """Single-photon unitary for a message dibit (``"10"`` or ``2``)."""
    if isinstance(m, str):
        m = int(m, 2)
    if m not in ENCODING_UNITARIES:
        raise ValueError(f"dibit must be in 0..3, got {m!r}")
    return ENCODING_UNITARIES[m]


def on_photon(u: np.ndarray, photon: str) -> np.ndarray:
    return np.kron(u, I2) if photon == "a" else np.kron(I2, u)


def conjugate(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


def apply_encoding(state: SectoredTwoPhotonState, m, photon: str = "a") -> SectoredTwoPhotonState:
    """Apply the message unitary to the encoded photon (``a`` by default).

    Sector weights are unchanged; the single-photon block of the encoded
    photon is rotated too, the partner's block is untouched.
    """
    u = encoding_unitary(m)
    changes = {"rho_both": conjugate(state.rho_both, on_photon(u, photon))}
    block = "rho_a" if photon == "a" else "rho_b"
    changes[block] = conjugate(getattr(state, block), u)
    return state.replace(**changes)


# -- measurements ----------------------------------------------------------

def observable(phase: float, photon: str) -> np.ndarray:
    if photon == "a":
        return math.cos(phase) * X + math.sin(phase) * Y
    return math.cos(phase) * X - math.sin(phase) * Y


def projector(phase: float, photon: str, outcome: int) -> np.ndarray:
    return (I2 + outcome * observable(phase, photon)) / 2


def joint_outcome_probs(rho: np.ndarray, phase_a: float, phase_b: float) -> np.ndarray:
    """Probabilities of outcomes ``(++, +-, -+, --)`` for the two photons."""
    probs = np.empty(4)
    k = 0
    for oa in (1, -1):
        pa = projector(phase_a, "a", oa)
        for ob in (1, -1):
            probs[k] = np.real(np.trace(rho @ np.kron(pa, projector(phase_b, "b", ob))))
            k += 1
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def pair_correlator(rho: np.ndarray, phase_a: float, phase_b: float) -> float:
    return float(np.real(np.trace(rho @ np.kron(observable(phase_a, "a"), observable(phase_b, "b")))))


def correlator(state: SectoredTwoPhotonState, phase_a: float, phase_b: float) -> float:
    """Expected product of the +/-1 outcomes.

    Sectors with a missing photon contribute nothing: the missing side's
    outcome is a fair coin independent of its partner.
    """
    if state.w_both == 0:
        return 0.0
    return state.w_both * pair_correlator(state.rho_both, phase_a, phase_b)


def bell_probabilities(rho: np.ndarray) -> np.ndarray:
    """Diagonal of ``rho`` in the Bell basis, ordered as ``BellState``."""
    p = np.real(np.einsum("ki,ij,kj->k", BELL_BASIS, rho, BELL_BASIS.conj()))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def bell_analysis(state: SectoredTwoPhotonState, mode: AnalysisMode, rng: np.random.Generator):
    """Sample one Bell-state analysis outcome.

    Returns a ``BellState``, ``UNREADABLE`` (linear optics, phi pair) or
    ``PHOTON_MISSING``.
    """
    if rng.random() >= state.w_both:
        return PHOTON_MISSING
    outcome = BellState(int(rng.choice(4, p=bell_probabilities(state.rho_both))))
    if AnalysisMode(mode) is AnalysisMode.LINEAR_OPTICS and outcome not in LINEAR_OPTICS_READABLE:
        return UNREADABLE
    return outcome
