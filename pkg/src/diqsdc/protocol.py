"""Monte Carlo execution of the two-round protocol and its amplified variant.

Pairs are simulated as parallel arrays: a state class (index into a
:class:`StateRegistry` of two-qubit density matrices, conditioned on
nothing), plus presence flags for each photon.  Every channel or attack
step maps classes to classes, so per-pair work is table lookups and
uniform draws.
"""
from __future__ import annotations

import enum
import logging
import math
import threading
from dataclasses import dataclass, field, fields

import numpy as np

from . import parallel
from .analytics import EppSchedule, Variant
from .channel import ChannelParams, depolarize_matrix
from .chsh import MIN_CHECK_PAIRS, CheckTally, SecurityCheckResult, outcome_table, result_from_tally, sample_check_block
from .epp import DEFAULT_MAX_K, WEIGHT_ORDER, plan_epp
from .errors import ConfigError, InsufficientSamples
from .quantum import (
    ALICE_PHASES,
    BELL_VECTORS,
    BOB_PHASES,
    LINEAR_OPTICS_READABLE,
    AnalysisMode,
    BellState,
    bell_density,
    bell_probabilities,
    conjugate,
    encoding_unitary,
    on_photon,
    projector,
)

log = logging.getLogger(__name__)

MISSING = -1
UNREAD = -2


class Round(enum.Enum):
    ROUND1 = "round1"
    ROUND2 = "round2"


class _Stage(enum.IntEnum):
    R1_TRANSIT = 1
    SELECT = 2
    R1_CHECK = 3
    MESSAGES = 4
    SHUFFLE = 5
    R2_TRANSIT = 6
    R2_CHECK = 7
    ANALYSIS = 8
    PURIFY = 9
    R2_HERALD = 10


@dataclass(frozen=True)
class EveModel:
    """Intercept-resend eavesdropper acting at the channel entrance.

    Each photon is intercepted independently with the round's fraction and
    measured in a uniformly random setting from the receiver's set.
    """

    kind: str = "intercept_resend"
    fraction_round1: float = 0.0
    fraction_round2: float = 0.0
    basis_strategy: str = "random_protocol_basis"

    def __post_init__(self):
        if self.kind != "intercept_resend":
            raise ConfigError(f"unknown eavesdropper kind {self.kind!r}")
        if self.basis_strategy != "random_protocol_basis":
            raise ConfigError(f"unknown basis strategy {self.basis_strategy!r}")
        for name in ("fraction_round1", "fraction_round2"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class ProtocolConfig:
    n_pairs: int
    channel: ChannelParams = field(default_factory=ChannelParams)
    variant: Variant = Variant.ORIGINAL
    check_fraction: float = 0.5
    target_fidelity: float = 0.99
    max_k: int = DEFAULT_MAX_K
    eve: EveModel | None = None
    seed: int = 0
    bell_analysis_mode: AnalysisMode = AnalysisMode.COMPLETE
    min_check_pairs: int = MIN_CHECK_PAIRS
    payload: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", _enum(Variant, self.variant, "variant"))
        object.__setattr__(self, "bell_analysis_mode", _enum(AnalysisMode, self.bell_analysis_mode, "bell_analysis_mode"))
        if not isinstance(self.n_pairs, (int, np.integer)) or self.n_pairs < 1:
            raise ConfigError(f"n_pairs must be a positive integer, got {self.n_pairs!r}")
        if not 0 < self.check_fraction < 1:
            raise ConfigError(f"check_fraction must be in (0, 1), got {self.check_fraction}")
        if not 0 < self.target_fidelity <= 1:
            raise ConfigError(f"target_fidelity must be in (0, 1], got {self.target_fidelity}")
        if self.max_k < 0:
            raise ConfigError(f"max_k must be >= 0, got {self.max_k}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.min_check_pairs < 1:
            raise ConfigError("min_check_pairs must be positive")
        if self.payload is not None and (len(self.payload) % 2 or set(self.payload) - {"0", "1"}):
            raise ConfigError("payload must be a bit string of even length")
        if self.n_pairs < 10_000:
            log.warning("n_pairs=%d is below 10^4; estimates will be noisy", self.n_pairs)

    def to_dict(self) -> dict:
        return {
            "n_pairs": int(self.n_pairs),
            "channel": {f.name: getattr(self.channel, f.name) for f in fields(ChannelParams)},
            "variant": self.variant.value,
            "check_fraction": self.check_fraction,
            "target_fidelity": self.target_fidelity,
            "max_k": self.max_k,
            "eve": None if self.eve is None else {f.name: getattr(self.eve, f.name) for f in fields(EveModel)},
            "seed": int(self.seed),
            "bell_analysis_mode": self.bell_analysis_mode.value,
            "min_check_pairs": self.min_check_pairs,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        d = dict(d)
        _reject_unknown(d, {f.name for f in fields(cls)}, "config")
        if "n_pairs" not in d:
            raise ConfigError("config is missing n_pairs")
        if "channel" in d:
            ch = d["channel"]
            if not isinstance(ch, dict):
                raise ConfigError("channel must be an object")
            _reject_unknown(ch, {f.name for f in fields(ChannelParams)}, "channel")
            d["channel"] = ChannelParams(**ch)
        if d.get("eve") is not None:
            ev = d["eve"]
            if not isinstance(ev, dict):
                raise ConfigError("eve must be an object or null")
            _reject_unknown(ev, {f.name for f in fields(EveModel)}, "eve")
            d["eve"] = EveModel(**ev)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _enum(kind, value, name):
    try:
        return kind(value)
    except ValueError as exc:
        raise ConfigError(f"invalid {name}: {value!r}") from exc


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


@dataclass(eq=False)
class TranscriptStats:
    variant: Variant
    check1: SecurityCheckResult | None = None
    check2: SecurityCheckResult | None = None
    aborted_at: Round | None = None
    r_loss_empirical: float = 0.0
    r_loss_stderr: float = 0.0
    r_error_empirical: float = 0.0
    r_error_stderr: float = 0.0
    dibits_sent: int = 0
    dibits_correct: int = 0
    dibits_identified: int = 0
    dibits_unreadable: int = 0
    dibits_missing: int = 0
    eve_dibits_learned: int = 0
    n_pairs: int = 0
    counts: dict = field(default_factory=dict)
    epp_schedule: EppSchedule | None = None
    decoded_payload: str | None = None
    sent_dibits: np.ndarray | None = field(default=None, repr=False)
    decoded_dibits: np.ndarray | None = field(default=None, repr=False)

    @property
    def s1(self):
        return None if self.check1 is None else self.check1.s_estimate

    @property
    def q1(self):
        return None if self.check1 is None else self.check1.q_estimate

    @property
    def s2(self):
        return None if self.check2 is None else self.check2.s_estimate

    @property
    def q2(self):
        return None if self.check2 is None else self.check2.q_estimate

    @property
    def efficiency_empirical(self) -> float:
        """Correctly delivered dibits per initial pair."""
        return self.dibits_correct / self.n_pairs if self.n_pairs else 0.0

    def to_dict(self) -> dict:
        sched = self.epp_schedule
        return {
            "variant": self.variant.value,
            "aborted_at": None if self.aborted_at is None else self.aborted_at.value,
            "check1": None if self.check1 is None else self.check1.to_dict(),
            "check2": None if self.check2 is None else self.check2.to_dict(),
            "r_loss_empirical": self.r_loss_empirical,
            "r_loss_stderr": self.r_loss_stderr,
            "r_error_empirical": self.r_error_empirical,
            "r_error_stderr": self.r_error_stderr,
            "dibits_sent": self.dibits_sent,
            "dibits_correct": self.dibits_correct,
            "dibits_identified": self.dibits_identified,
            "dibits_unreadable": self.dibits_unreadable,
            "dibits_missing": self.dibits_missing,
            "eve_dibits_learned": self.eve_dibits_learned,
            "n_pairs": self.n_pairs,
            "efficiency_empirical": self.efficiency_empirical,
            "counts": dict(self.counts),
            "epp_schedule": None if sched is None else {
                "k": sched.k,
                "per_step_success": list(sched.per_step_success),
                "final_fidelity": sched.final_fidelity,
                "final_weights": list(sched.final_weights),
            },
            "decoded_payload": self.decoded_payload,
        }


# -- state classes ------------------------------------------------------------


class StateRegistry:
    """Interned two-qubit states with memoized transitions between them."""

    def __init__(self, initial: np.ndarray):
        self.states: list[np.ndarray] = [np.asarray(initial, dtype=complex)]
        self._children: dict = {}
        self._outcomes: list[np.ndarray] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.states)

    def _child(self, parent: int, op, make) -> int:
        key = (parent, op)
        with self._lock:
            if key not in self._children:
                self.states.append(make(self.states[parent]))
                self._children[key] = len(self.states) - 1
            return self._children[key]

    def _lookup(self, pairs: list[tuple[int, int]]) -> np.ndarray:
        out = np.arange(len(self), dtype=np.int64)
        for parent, kid in pairs:
            out[parent] = kid
        return out

    def transition(self, op, make, classes) -> np.ndarray:
        """Lookup array mapping each of ``classes`` to its child under a fixed map.

        Classes outside ``classes`` map to themselves.
        """
        return self._lookup([(int(c), self._child(int(c), op, make)) for c in classes])

    def depolarize_map(self, p: float, classes) -> np.ndarray:
        return self.transition(("depol", p), lambda r: depolarize_matrix(r, p), classes)

    def encode_maps(self, classes, photon: str = "a") -> np.ndarray:
        """``out[m, c]``: class after encoding dibit ``m`` on ``photon``."""
        pairs = []
        for m in range(4):
            u = on_photon(encoding_unitary(m), photon)
            pairs.append([(int(c), self._child(int(c), ("enc", m, photon), lambda r, u=u: conjugate(r, u))) for c in classes])
        return np.array([self._lookup(row) for row in pairs])

    def collapse_tables(self, photon: str, phases: np.ndarray, classes) -> tuple[np.ndarray, np.ndarray]:
        """Probability of +1 and resulting class for measuring ``photon``.

        Returns ``p_plus[c, s]`` and ``child[c, s, o]`` with ``o = 0`` for +1,
        filled for ``classes``.
        """
        entries = []
        for c in map(int, classes):
            rho = self.states[c]
            for s, phase in enumerate(phases):
                for o, outcome in enumerate((1, -1)):
                    proj = on_photon(projector(phase, photon, outcome), photon)
                    prob = float(np.real(np.trace(proj @ rho)))
                    kid = c
                    if prob > 1e-15:
                        post = proj @ rho @ proj / prob
                        kid = self._child(c, ("collapse", photon, float(phase), outcome), lambda _r, post=post: post)
                    entries.append((c, s, o, prob, kid))
        n = len(self)
        p_plus = np.zeros((n, len(phases)))
        child = np.repeat(np.arange(n, dtype=np.int64)[:, None, None], len(phases), axis=1).repeat(2, axis=2)
        for c, s, o, prob, kid in entries:
            if o == 0:
                p_plus[c, s] = prob
            child[c, s, o] = kid
        return np.clip(p_plus, 0, 1), child

    def outcome_tables(self) -> np.ndarray:
        while len(self._outcomes) < len(self):
            self._outcomes.append(outcome_table(self.states[len(self._outcomes)]))
        return np.array(self._outcomes)

    def bell_tables(self) -> np.ndarray:
        return np.array([bell_probabilities(r) for r in self.states])


# -- building blocks ------------------------------------------------------------


class _Runner:
    def __init__(self, cfg: ProtocolConfig, threads: int | None):
        self.cfg = cfg
        self.threads = threads

    def blocks(self, n: int, stage: _Stage, fn) -> list:
        return parallel.map_blocks(n, self.cfg.seed, int(stage), fn, self.threads)

    def rng(self, stage: _Stage) -> np.random.Generator:
        return parallel.stage_rng(self.cfg.seed, int(stage), 1 << 30)


def intercept_resend(
    registry: StateRegistry,
    cls: np.ndarray,
    photon: str,
    fraction: float,
    rng: np.random.Generator,
    tables: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Eve measures a ``fraction`` of the in-flight ``photon`` and resends.

    She picks a uniform setting from the receiver's set (Bob's for photon
    ``b``, Alice's for photon ``a``).  Returns the new classes and the
    interception mask.  Pass precomputed ``tables`` from
    :meth:`StateRegistry.collapse_tables` when calling from worker threads.
    """
    n = len(cls)
    if fraction <= 0:
        return cls, np.zeros(n, dtype=bool)
    p_plus, child = tables if tables is not None else registry.collapse_tables(photon, _receiver_phases(photon), np.unique(cls))
    setting_count = p_plus.shape[1]
    hit = rng.random(n) < fraction
    setting = rng.integers(0, setting_count, n)
    minus = (rng.random(n) >= p_plus[cls, setting]).astype(np.int64)
    return np.where(hit, child[cls, setting, minus], cls), hit


def _receiver_phases(photon: str) -> np.ndarray:
    return BOB_PHASES if photon == "b" else ALICE_PHASES


def _check_count(available: int, cfg: ProtocolConfig) -> int:
    return min(available, max(cfg.min_check_pairs, math.ceil(cfg.check_fraction * available)))


def security_check_round(
    registry: StateRegistry,
    cls: np.ndarray,
    has_a: np.ndarray,
    has_b: np.ndarray,
    seed: int,
    stage: int,
    min_check: int = MIN_CHECK_PAIRS,
    threads: int | None = 1,
) -> SecurityCheckResult:
    """CHSH and QBER check on the given pairs; abort verdict iff S <= 2."""
    n = len(cls)
    if n < min_check:
        raise InsufficientSamples(f"{n} check pairs is below the minimum {min_check}")
    tables = registry.outcome_tables()

    def block(sl, r):
        return sample_check_block(tables, cls[sl], has_a[sl], has_b[sl], r)

    parts = parallel.map_blocks(n, seed, stage, block, threads)
    return result_from_tally(sum(parts, CheckTally()))


def _message_dibits(cfg: ProtocolConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    dibits = rng.integers(0, 4, n)
    if cfg.payload:
        pay = np.array([int(cfg.payload[i : i + 2], 2) for i in range(0, len(cfg.payload), 2)])
        if len(pay) > n:
            raise ConfigError(f"payload needs {len(pay)} message pairs but only {n} are available")
        dibits[: len(pay)] = pay
    return dibits


def _analyze(registry: StateRegistry, cls, has_a, has_b, mode: AnalysisMode, runner: _Runner) -> np.ndarray:
    """Bell analysis; returns decoded dibits with MISSING / UNREAD codes."""
    table = registry.bell_tables()
    readable = np.array([BellState(i) in LINEAR_OPTICS_READABLE for i in range(4)])

    def block(sl, r):
        k = parallel.sample_categorical(table[cls[sl]], r)
        if mode is AnalysisMode.LINEAR_OPTICS:
            k = np.where(readable[k], k, UNREAD)
        return np.where(has_a[sl] & has_b[sl], k, MISSING)

    return parallel.concat(runner.blocks(len(cls), _Stage.ANALYSIS, block), dtype=np.int64)


def _fill_decoding(stats: TranscriptStats, cfg: ProtocolConfig, sent: np.ndarray, decoded: np.ndarray, n_slots: int):
    ident = decoded >= 0
    n_id = int(ident.sum())
    n_miss = int((decoded == MISSING).sum())
    correct = int((decoded[ident] == sent[ident]).sum())
    stats.dibits_sent = len(sent)
    stats.dibits_identified = n_id
    stats.dibits_missing = n_miss
    stats.dibits_unreadable = int((decoded == UNREAD).sum())
    stats.dibits_correct = correct
    stats.r_loss_empirical = n_miss / n_slots if n_slots else 0.0
    stats.r_loss_stderr = _binom_se(stats.r_loss_empirical, n_slots)
    stats.r_error_empirical = (n_id - correct) / n_id if n_id else 0.0
    stats.r_error_stderr = _binom_se(stats.r_error_empirical, n_id)
    stats.sent_dibits = sent
    stats.decoded_dibits = decoded
    if cfg.payload:
        n_pay = len(cfg.payload) // 2
        stats.decoded_payload = "".join("??" if x < 0 else format(int(x), "02b") for x in decoded[:n_pay])


def _binom_se(r: float, n: int) -> float:
    return math.sqrt(r * (1 - r) / n) if n else 0.0


def _transit(registry, cls, has, photon, fraction, p, eta, runner, stage):
    """Eve at the entrance, then depolarization and loss of ``photon``."""
    live = np.unique(cls)
    tables = registry.collapse_tables(photon, _receiver_phases(photon), live) if fraction > 0 else None

    def block(sl, r):
        c, hit = intercept_resend(registry, cls[sl], photon, fraction, r, tables)
        survive = r.random(sl.stop - sl.start) < eta
        return c, hit, survive

    parts = runner.blocks(len(cls), stage, block)
    cls = parallel.concat([x[0] for x in parts], np.int64)
    hit = parallel.concat([x[1] for x in parts], bool)
    survive = parallel.concat([x[2] for x in parts], bool)
    cls = registry.depolarize_map(p, np.unique(cls))[cls]
    return cls, hit, has & survive


# -- original variant -------------------------------------------------------------


def run_original(cfg: ProtocolConfig, threads: int | None = 1) -> TranscriptStats:
    """Both photons of each message pair cross the lossy channel once."""
    if cfg.variant is not Variant.ORIGINAL:
        raise ConfigError("run_original needs variant 'original'")
    runner = _Runner(cfg, threads)
    ch, eve = cfg.channel, cfg.eve or EveModel()
    n = int(cfg.n_pairs)
    stats = TranscriptStats(cfg.variant, n_pairs=n)
    reg = StateRegistry(bell_density(BellState.PHI_PLUS))

    cls = np.zeros(n, dtype=np.int64)
    has_a = np.ones(n, dtype=bool)
    cls, hit1, has_b = _transit(reg, cls, np.ones(n, dtype=bool), "b", eve.fraction_round1, ch.p, ch.eta, runner, _Stage.R1_TRANSIT)

    nc1 = _check_count(n, cfg)
    nc2 = _check_count(n - nc1, cfg)
    n_msg = n - nc1 - nc2
    if n_msg < 1:
        raise ConfigError(f"n_pairs={n} leaves no message pairs after checks of {nc1} and {nc2}")
    order = runner.rng(_Stage.SELECT).permutation(n)
    chk1, chk2, msg = order[:nc1], order[nc1 : nc1 + nc2], order[nc1 + nc2 :]
    stats.counts = {"check_round1": nc1, "check_round2": nc2, "message_pairs": n_msg}

    stats.check1 = security_check_round(reg, cls[chk1], has_a[chk1], has_b[chk1], cfg.seed, _Stage.R1_CHECK, cfg.min_check_pairs, threads)
    if not stats.check1.secure:
        stats.aborted_at = Round.ROUND1
        return stats

    sent = _message_dibits(cfg, n_msg, runner.rng(_Stage.MESSAGES))
    enc = reg.encode_maps(np.unique(cls[msg]), "a")
    cls[msg] = enc[sent, cls[msg]]

    # the whole remaining M sequence is shuffled, round-2 checks included
    remaining = np.concatenate([chk2, msg])
    perm = runner.rng(_Stage.SHUFFLE).permutation(len(remaining))
    in_flight = remaining[perm]
    c2, hit2, a2 = _transit(reg, cls[in_flight], has_a[in_flight], "a", eve.fraction_round2, ch.p, ch.eta, runner, _Stage.R2_TRANSIT)
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(len(perm))
    restored = in_flight[inverse]
    if not np.array_equal(restored, remaining):
        raise RuntimeError("sequence restoration failed")
    cls[remaining], has_a[remaining] = c2[inverse], a2[inverse]
    hit2_full = np.zeros(n, dtype=bool)
    hit2_full[remaining] = hit2[inverse]

    stats.check2 = security_check_round(reg, cls[chk2], has_a[chk2], has_b[chk2], cfg.seed, _Stage.R2_CHECK, cfg.min_check_pairs, threads)
    stats.eve_dibits_learned = int((hit1[msg] & hit2_full[msg]).sum())
    if not stats.check2.secure:
        stats.aborted_at = Round.ROUND2
        return stats

    decoded = _analyze(reg, cls[msg], has_a[msg], has_b[msg], cfg.bell_analysis_mode, runner)
    _fill_decoding(stats, cfg, sent, decoded, n_msg)
    return stats


# -- modified variant ----------------------------------------------------------------


def _bell_diagonal_density(weights) -> np.ndarray:
    return sum(w * np.outer(BELL_VECTORS[b], BELL_VECTORS[b].conj()) for b, w in zip(WEIGHT_ORDER, weights))


def run_modified(cfg: ProtocolConfig, threads: int | None = 1) -> TranscriptStats:
    """Amplified and purified variant.

    Round 1: the C photon is depolarized, attenuated and amplified; failed
    pairs are discarded, then survivors are purified in pairs until the
    target fidelity.  These stages only change counts, so they are sampled
    as binomials and the survivors share the purified Bell-diagonal state.
    Round 2: each M photon is amplified on arrival and a failed message is
    re-encoded on the next photon, so no message is lost.
    """
    if cfg.variant is not Variant.MODIFIED:
        raise ConfigError("run_modified needs variant 'modified'")
    eve = cfg.eve or EveModel()
    if eve.fraction_round1 > 0:
        raise ConfigError("eavesdropping in round 1 is not modelled for the modified variant")
    runner = _Runner(cfg, threads)
    ch = cfg.channel
    n = int(cfg.n_pairs)
    stats = TranscriptStats(cfg.variant, n_pairs=n)

    sched = plan_epp(ch.p, cfg.target_fidelity, cfg.max_k)
    stats.epp_schedule = sched
    r = runner.rng(_Stage.PURIFY)
    after_nla = int(r.binomial(n, ch.eta / 2))
    sizes = [after_nla]
    for ps in sched.per_step_success:
        sizes.append(int(r.binomial(sizes[-1] // 2, ps)))
    m = sizes[-1]
    stats.counts = {"after_round1_nla": after_nla, "after_epp_steps": sizes[1:]}
    reg = StateRegistry(_bell_diagonal_density(sched.final_weights))

    nc1 = _check_count(m, cfg)
    m_rem = m - nc1
    nc2 = _check_count(m_rem, cfg) if m_rem else 0
    if nc1 < cfg.min_check_pairs:
        raise InsufficientSamples(f"only {m} pairs survive purification; increase n_pairs")
    if m_rem - nc2 < 1:
        raise InsufficientSamples(f"{m} purified pairs leave no message pairs after checks")
    ones = np.ones(m, dtype=bool)
    cls = np.zeros(m, dtype=np.int64)
    stats.check1 = security_check_round(reg, cls[:nc1], ones[:nc1], ones[:nc1], cfg.seed, _Stage.R1_CHECK, cfg.min_check_pairs, threads)
    if not stats.check1.secure:
        stats.aborted_at = Round.ROUND1
        return stats

    # remaining pairs leave in a shuffled order; slot i < nc2 of the unshuffled
    # list is a round-2 check, the rest carry messages
    n2 = m_rem
    perm = runner.rng(_Stage.SHUFFLE).permutation(n2)
    is_check = perm < nc2

    def herald(sl, rr):
        k = sl.stop - sl.start
        survive = rr.random(k) < ch.eta
        return survive, survive & (rr.random(k) < 0.5)

    parts = runner.blocks(n2, _Stage.R2_HERALD, herald)
    arrived = parallel.concat([x[0] for x in parts], bool)
    ok = parallel.concat([x[1] for x in parts], bool)

    # message index carried by each message slot: the next undelivered one
    msg_slot = ~is_check
    delivered_before = np.cumsum(ok & msg_slot) - (ok & msg_slot)
    n_delivered = int((ok & msg_slot).sum())
    if n_delivered < 1:
        raise InsufficientSamples("no message survived the second amplification")
    sent = _message_dibits(cfg, n_delivered + 1, runner.rng(_Stage.MESSAGES))
    carried = np.where(msg_slot, sent[np.minimum(delivered_before, n_delivered)], 0)
    enc = reg.encode_maps([0], "a")
    cls2 = np.where(msg_slot, enc[carried, 0], 0)

    tables = reg.collapse_tables("a", ALICE_PHASES, np.unique(cls2)) if eve.fraction_round2 > 0 else None

    def attack(sl, rr):
        return intercept_resend(reg, cls2[sl], "a", eve.fraction_round2, rr, tables)

    parts = runner.blocks(n2, _Stage.R2_TRANSIT, attack)
    cls2 = parallel.concat([x[0] for x in parts], np.int64)
    cls2 = reg.depolarize_map(ch.p, np.unique(cls2))[cls2]

    chk_ok = is_check & ok
    both = np.ones(int(chk_ok.sum()), dtype=bool)
    stats.counts.update({
        "check_round1": nc1,
        "round2_sent": n2,
        "round2_arrived": int(arrived.sum()),
        "round2_heralded": int(ok.sum()),
        "check_round2": int(chk_ok.sum()),
        "message_pairs": n_delivered,
        "message_retries": int((msg_slot & ~ok).sum()),
    })
    stats.check2 = security_check_round(reg, cls2[chk_ok], both, both, cfg.seed, _Stage.R2_CHECK, cfg.min_check_pairs, threads)
    if not stats.check2.secure:
        stats.aborted_at = Round.ROUND2
        return stats

    deliv = msg_slot & ok
    k = int(deliv.sum())
    decoded = _analyze(reg, cls2[deliv], np.ones(k, bool), np.ones(k, bool), cfg.bell_analysis_mode, runner)
    _fill_decoding(stats, cfg, carried[deliv], decoded, k)
    return stats


def pair_budget(stats: TranscriptStats) -> float:
    """Heralded round-2 pairs per initial pair, corrected for round-1 checks.

    Converges to ``eta^2 * prod(P_E) / 2^(k+2)``.
    """
    c = stats.counts
    m = c["after_epp_steps"][-1] if c["after_epp_steps"] else c["after_round1_nla"]
    return m / stats.n_pairs * c["round2_heralded"] / c["round2_sent"]


def expected_pair_budget(eta: float, schedule: EppSchedule) -> float:
    return eta**2 * schedule.success_product / 2 ** (schedule.k + 2)


def run(cfg: ProtocolConfig, threads: int | None = 1) -> TranscriptStats:
    if cfg.variant is Variant.ORIGINAL:
        return run_original(cfg, threads)
    return run_modified(cfg, threads)
