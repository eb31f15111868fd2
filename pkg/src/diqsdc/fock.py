"""Minimal bosonic linear-optics simulator over polarization modes.

A pure state is a polynomial in creation operators acting on vacuum, stored
as ``{sorted tuple of mode indices: coefficient}``.  Passive elements map
each creation operator linearly onto others, so photon number is conserved
and no truncation is needed.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

H, V = 0, 1


@dataclass
class ModeSpace:
    """Spatial modes, each carrying an H and a V polarization mode."""

    spatial: list[str]
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {name: i for i, name in enumerate(self.spatial)}

    def __call__(self, name: str, pol: int) -> int:
        return 2 * self._index[name] + pol

    @property
    def size(self) -> int:
        return 2 * len(self.spatial)


State = dict  # tuple[int, ...] -> complex


def product_state(*factors: list[tuple[complex, tuple[int, ...]]]) -> State:
    """Tensor product of factors given as ``[(coef, creation modes), ...]``."""
    out: State = {(): 1.0 + 0j}
    for factor in factors:
        nxt: State = defaultdict(complex)
        for key, c in out.items():
            for coef, modes in factor:
                nxt[tuple(sorted(key + tuple(modes)))] += c * coef
        out = dict(nxt)
    return out


def apply_map(state: State, mapping: dict[int, list[tuple[int, complex]]]) -> State:
    """Apply ``a_m^dag -> sum_j u_j a_j^dag`` for the modes in ``mapping``."""
    out: State = defaultdict(complex)
    for key, c in state.items():
        partial = [((), c)]
        for m in key:
            images = mapping.get(m, [(m, 1.0)])
            partial = [(prefix + (j,), amp * u) for prefix, amp in partial for j, u in images]
        for modes, amp in partial:
            out[tuple(sorted(modes))] += amp
    return {k: v for k, v in out.items() if abs(v) > 1e-15}


def pbs(space: ModeSpace, x: str, y: str) -> dict:
    """Polarizing beam splitter: H transmitted, V reflected (swaps V modes)."""
    return {space(x, V): [(space(y, V), 1.0)], space(y, V): [(space(x, V), 1.0)]}


def waveplate(space: ModeSpace, x: str, angle: float) -> dict:
    """Half-wave plate with fast axis at ``angle``; 22.5 degrees acts as Hadamard."""
    c, s = math.cos(2 * angle), math.sin(2 * angle)
    return {space(x, H): [(space(x, H), c), (space(x, V), s)], space(x, V): [(space(x, H), s), (space(x, V), -c)]}


def hadamard_plate(space: ModeSpace, x: str) -> dict:
    return waveplate(space, x, math.pi / 8)


def hwp_swap(space: ModeSpace, x: str) -> dict:
    """Half-wave plate at 45 degrees: H <-> V."""
    return waveplate(space, x, math.pi / 4)


def merge(*maps: dict) -> dict:
    """Combine element maps acting on disjoint modes."""
    out: dict = {}
    for m in maps:
        if set(m) & set(out):
            raise ValueError("elements overlap; apply them sequentially")
        out.update(m)
    return out


def fock_amplitudes(state: State) -> dict[tuple[int, ...], complex]:
    """Normalized Fock amplitudes keyed by the sorted multiset of occupied modes."""
    amps = {}
    for key, c in state.items():
        counts = np.bincount(key) if key else np.array([], dtype=int)
        amps[key] = c * math.sqrt(float(np.prod([math.factorial(int(n)) for n in counts])))
    return amps


def norm2(state: State) -> float:
    return float(sum(abs(a) ** 2 for a in fock_amplitudes(state).values()))


def herald(state: State, stations: list[tuple[int, int]], kept: list[tuple[int, int]]):
    """Project onto exactly one photon per detection station.

    ``stations`` and ``kept`` list ``(H mode, V mode)`` pairs.  Returns
    ``{detected polarizations: kept two-qubit amplitude vector}``, where kept
    modes must then hold exactly one photon each.
    """
    detected = {m for st in stations for m in st}
    kept_modes = {m for k in kept for m in k}
    out: dict[tuple[int, ...], np.ndarray] = {}
    for key, amp in fock_amplitudes(state).items():
        det_part = [m for m in key if m in detected]
        if len(det_part) != len(stations):
            continue
        pols = []
        for st in stations:
            hits = [m for m in det_part if m in st]
            if len(hits) != 1:
                break
            pols.append(st.index(hits[0]))
        else:
            rest = [m for m in key if m not in detected]
            if set(rest) - kept_modes:
                raise ValueError(f"photon left in an unmonitored mode: {rest}")
            qubits = []
            for k in kept:
                hits = [m for m in rest if m in k]
                if len(hits) != 1:
                    raise ValueError("kept modes must end with one photon each after heralding")
                qubits.append(k.index(hits[0]))
            idx = int(np.ravel_multi_index(qubits, [2] * len(kept)))
            vec = out.setdefault(tuple(pols), np.zeros(2 ** len(kept), dtype=complex))
            vec[idx] += amp
    return out


def pair_factor(space: ModeSpace, x: str, y: str, vec: np.ndarray) -> list:
    """Two-photon polarization state ``vec`` (basis HH, HV, VH, VV) on modes x, y."""
    return [(vec[2 * px + py], (space(x, px), space(y, py))) for px in (H, V) for py in (H, V) if vec[2 * px + py] != 0]


def heralded_density(
    components: list[tuple[float, State]],
    elements: list[dict],
    stations: list[tuple[int, int]],
    kept: list[tuple[int, int]],
    correction,
) -> np.ndarray:
    """Unnormalized post-selected density matrix on the kept qubits.

    ``components`` is a mixture of pure inputs, ``elements`` the optical maps
    applied in order, and ``correction(pattern)`` the feed-forward unitary
    for a detected polarization pattern.  The trace is the success
    probability.
    """
    dim = 2 ** len(kept)
    rho = np.zeros((dim, dim), dtype=complex)
    for weight, state in components:
        if weight == 0:
            continue
        for el in elements:
            state = apply_map(state, el)
        for pattern, vec in herald(state, stations, kept).items():
            v = correction(pattern) @ vec
            rho += weight * np.outer(v, v.conj())
    return rho
