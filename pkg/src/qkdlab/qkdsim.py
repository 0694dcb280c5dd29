"""Decoy-state BB84 source and receiver simulation.

Every pulse slot gets an intensity class, a BB84 basis and bit, and a chopper
fate. Photons that survive the channel are split by a 50/50 basis
beam-splitter and analysed by a polarizing beam-splitter per basis. Because a
Poisson pulse split into independent paths stays Poisson in each path, each
of the four detectors fires independently with probability
``1 - exp(-lambda_j)`` where ``lambda_j`` is its mean photon number, so
double clicks come out naturally.

Two engines share this model:

* ``generate_pulse_stream`` + ``transmit`` walk every slot (lazy blocks of a
  fixed size). Good up to a few 10^7 slots and used as the reference.
* ``simulate_link`` never materializes the slots. Within each interval of
  constant loss it draws the slot counts of every (class, fate, basis, bit)
  combination, the number of clicking slots per combination, their detector
  patterns, and then uniform click positions. Slots touched only by background
  get their transmitter record from the non-clicking population. This is the
  same distribution at a cost proportional to the number of detections.

Gains follow the per-emitted-pulse convention: detections in open chopper
slots divided by all pulses emitted in that class.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numba
import numpy as np
from scipy.special import erf

from .polcomp import BB84_LABELS, PROJECTOR_VECTORS, PROJECTORS, StokesState, ideal_states

SIGNAL, DECOY, VACUUM = 0, 1, 2
CLASS_NAMES = ("signal", "decoy", "vacuum")
Z_BASIS, X_BASIS = 0, 1
BASIS_NAMES = ("Z", "X")
OPEN, POLARIZED, BLOCKED = 0, 1, 2
FATE_NAMES = ("open", "polarized", "blocked")
CHANNELS = ("H", "V", "D", "A")

# Slots per lazily generated block; fixed so a seed always maps to the same stream.
BLOCK_SLOTS = 1 << 20

_BASIS_AXES = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class SourceConfig:
    pulse_rate: float = 8e7
    mu_signal: float = 0.495
    mu_decoy: float = 0.120
    p_signal: float = 0.62
    p_decoy: float = 0.07
    p_vacuum: float = 0.31
    duty_open: float = 0.5
    duty_polarized: float = 0.2
    duty_blocked: float = 0.3
    states: tuple = field(default_factory=lambda: tuple(ideal_states()[k] for k in BB84_LABELS))

    def __post_init__(self):
        if self.pulse_rate <= 0:
            raise ValueError("pulse_rate must be positive")
        if self.mu_decoy < 0 or not self.mu_signal > self.mu_decoy:
            raise ValueError("need mu_signal > mu_decoy >= 0")
        for group, name in ((self.class_probabilities, "class probabilities"),
                            (self.duty, "chopper duty fractions")):
            if np.any(group < 0) or abs(group.sum() - 1) > 1e-9:
                raise ValueError(f"{name} must be nonnegative and sum to 1")
        states = self.states
        if isinstance(states, dict):
            states = tuple(states[k] for k in BB84_LABELS)
        states = tuple(s if isinstance(s, StokesState) else StokesState.from_vector(s) for s in states)
        if len(states) != 4:
            raise ValueError("need four states ordered H, V, D, A")
        object.__setattr__(self, "states", states)

    @property
    def class_probabilities(self) -> np.ndarray:
        return np.array([self.p_signal, self.p_decoy, self.p_vacuum])

    @property
    def duty(self) -> np.ndarray:
        return np.array([self.duty_open, self.duty_polarized, self.duty_blocked])

    @property
    def means(self) -> np.ndarray:
        return np.array([self.mu_signal, self.mu_decoy, 0.0])

    @property
    def period_ps(self) -> float:
        return 1e12 / self.pulse_rate

    def state_vectors(self) -> np.ndarray:
        """(4, 3) Poincare vectors indexed by 2 * basis + bit."""
        return np.array([s.vector for s in self.states])


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float | tuple = 1.0
    background_rate: float = 0.0  # Hz summed over the four channels
    jitter: float = 50e-12  # seconds, Gaussian sigma
    dead_time: float = 50e-9

    def __post_init__(self):
        eff = np.broadcast_to(np.asarray(self.efficiency, dtype=float), (4,))
        if np.any((eff < 0) | (eff > 1)):
            raise ValueError("efficiency must lie in [0, 1]")
        if min(self.background_rate, self.jitter, self.dead_time) < 0:
            raise ValueError("rates and times must be nonnegative")

    @property
    def efficiencies(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.efficiency, dtype=float), (4,)).copy()


@dataclass(frozen=True, eq=False)
class PulseBlock:
    """Columnar batch of pulse records; ``projector`` is -1 unless the fate is polarized."""

    slot: np.ndarray
    cls: np.ndarray
    basis: np.ndarray
    bit: np.ndarray
    fate: np.ndarray
    projector: np.ndarray

    def __len__(self):
        return len(self.slot)

    @staticmethod
    def concatenate(blocks: Sequence["PulseBlock"]) -> "PulseBlock":
        names = ("slot", "cls", "basis", "bit", "fate", "projector")
        if not blocks:
            return PulseBlock(np.zeros(0, np.int64), *(np.zeros(0, np.uint8) for _ in range(4)),
                              np.zeros(0, np.int8))
        return PulseBlock(*(np.concatenate([getattr(b, n) for b in blocks]) for n in names))


class PulseStream:
    """Lazy sequence of pulse blocks; block ``i`` depends only on (seed, i)."""

    def __init__(self, cfg: SourceConfig, n_slots: int, seed: int):
        self.cfg, self.n_slots, self.seed = cfg, int(n_slots), int(seed)

    def __len__(self):
        return self.n_slots

    @property
    def n_blocks(self) -> int:
        return -(-self.n_slots // BLOCK_SLOTS)

    def block(self, i: int) -> PulseBlock:
        if not 0 <= i < self.n_blocks:
            raise IndexError(i)
        start = i * BLOCK_SLOTS
        n = min(BLOCK_SLOTS, self.n_slots - start)
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0, i)))
        cfg = self.cfg
        cls = rng.choice(3, size=n, p=cfg.class_probabilities).astype(np.uint8)
        basis = rng.integers(0, 2, size=n, dtype=np.uint8)
        bit = rng.integers(0, 2, size=n, dtype=np.uint8)
        fate = rng.choice(3, size=n, p=cfg.duty).astype(np.uint8)
        proj = rng.integers(0, 6, size=n, dtype=np.int8)
        proj[fate != POLARIZED] = -1
        return PulseBlock(np.arange(start, start + n, dtype=np.int64), cls, basis, bit, fate, proj)

    def __iter__(self) -> Iterator[PulseBlock]:
        for i in range(self.n_blocks):
            yield self.block(i)

    def materialize(self) -> PulseBlock:
        return PulseBlock.concatenate(list(self))


def generate_pulse_stream(cfg: SourceConfig, duration: float, seed: int) -> PulseStream:
    """One pulse record per slot for ``duration`` seconds at the configured pulse rate."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    return PulseStream(cfg, int(round(duration * cfg.pulse_rate)), seed)


def _as_blocks(pulses) -> Iterator[PulseBlock]:
    if isinstance(pulses, PulseBlock):
        yield pulses
    else:
        yield from pulses


def outcome_probabilities(state_vectors: np.ndarray) -> np.ndarray:
    """(..., 4) probability that a single photon ends up at H, V, D, A.

    Half of the photons go to each basis; inside a basis the Malus law applies.
    """
    v = np.asarray(state_vectors, dtype=float)
    z = v @ _BASIS_AXES[0]
    x = v @ _BASIS_AXES[1]
    return 0.25 * np.stack([1 + z, 1 - z, 1 + x, 1 - x], axis=-1)


def apply_intrinsic_errors(pulses, states) -> np.ndarray:
    """Per-pulse single-photon outcome distribution over H, V, D, A for open-slot pulses.

    ``states`` are the four emitted Stokes states (H, V, D, A order or a dict).
    Polarized and blocked pulses get zeros; their light is handled by ``transmit``.
    """
    if isinstance(states, dict):
        states = [states[k] for k in BB84_LABELS]
    vecs = np.array([s.vector for s in states])
    blk = PulseBlock.concatenate(list(_as_blocks(pulses)))
    probs = outcome_probabilities(vecs[2 * blk.basis.astype(int) + blk.bit])
    probs[blk.fate != OPEN] = 0.0
    return probs


def intrinsic_qber(states) -> float:
    """Sifted error probability for single photons from the four emitted states."""
    if isinstance(states, dict):
        states = [states[k] for k in BB84_LABELS]
    p = outcome_probabilities(np.array([s.vector for s in states]))
    wrong = [p[0, 1], p[1, 0], p[2, 3], p[3, 2]]
    right = [p[0, 0], p[1, 1], p[2, 2], p[3, 3]]
    return float(np.sum(wrong) / (np.sum(wrong) + np.sum(right)))


def _pulse_lambdas(cfg: SourceConfig, cls, basis, bit, fate, projector, eta) -> np.ndarray:
    """(n, 4) mean photon number arriving at each detector."""
    cls = np.asarray(cls, dtype=int)
    vecs = cfg.state_vectors()[2 * np.asarray(basis, dtype=int) + np.asarray(bit, dtype=int)]
    mean = cfg.means[cls] * np.asarray(eta, dtype=float)
    fate = np.asarray(fate)
    pol = fate == POLARIZED
    if np.any(pol):
        pvec = np.array([PROJECTOR_VECTORS[p] for p in PROJECTORS])[np.asarray(projector)[pol]]
        mean = mean.copy()
        mean[pol] *= 0.5 * (1 + np.einsum("ij,ij->i", vecs[pol], pvec))
        vecs = vecs.copy()
        vecs[pol] = pvec
    mean = np.where(fate == BLOCKED, 0.0, mean)
    return mean[:, None] * outcome_probabilities(vecs)


@dataclass(frozen=True)
class LossSeries:
    """Piecewise-constant loss in dB: ``loss_dB[i]`` applies from ``t_start[i]`` to the next start."""

    t_start: np.ndarray
    loss_dB: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_start, dtype=float)
        l = np.asarray(self.loss_dB, dtype=float)
        if t.shape != l.shape or t.ndim != 1 or t.size == 0:
            raise ValueError("t_start and loss_dB must be equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("t_start must be strictly increasing")
        if np.any(l < 0) or np.any(np.isnan(l)):
            raise ValueError("loss must be nonnegative (inf allowed)")
        object.__setattr__(self, "t_start", t)
        object.__setattr__(self, "loss_dB", l)

    @classmethod
    def constant(cls, loss_dB: float) -> "LossSeries":
        return cls(np.array([0.0]), np.array([float(loss_dB)]))

    def at(self, t) -> np.ndarray:
        idx = np.clip(np.searchsorted(self.t_start, np.asarray(t, dtype=float), side="right") - 1,
                      0, len(self.t_start) - 1)
        return self.loss_dB[idx]

    def intervals(self, duration: float) -> list[tuple[float, float, float]]:
        """(start, stop, loss) pieces covering [0, duration)."""
        edges = np.concatenate([[0.0], self.t_start[(self.t_start > 0) & (self.t_start < duration)], [duration]])
        return [(float(a), float(b), float(self.at(a))) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _as_loss(loss) -> LossSeries:
    if isinstance(loss, LossSeries):
        return loss
    if not np.isscalar(loss):
        raise TypeError("loss must be a number or a LossSeries")
    if loss < 0:
        raise ValueError("loss_dB must be nonnegative")
    return LossSeries.constant(loss)


def _transmittance(loss_dB) -> np.ndarray:
    l = np.asarray(loss_dB, dtype=float)
    return np.where(np.isinf(l), 0.0, 10.0 ** (-np.where(np.isinf(l), 0.0, l) / 10.0))


@dataclass(frozen=True, eq=False)
class DetectionLog:
    """Receiver time tags sorted by time; integer picoseconds on the receiver clock."""

    timestamp_ps: np.ndarray
    channel: np.ndarray
    pulse_rate: float
    t0_ps: int = 0
    seed: int | None = None

    def __len__(self):
        return len(self.timestamp_ps)

    def __post_init__(self):
        ts = np.asarray(self.timestamp_ps, dtype=np.int64)
        ch = np.asarray(self.channel, dtype=np.uint8)
        if ts.shape != ch.shape:
            raise ValueError("timestamp and channel arrays differ in length")
        if np.any(ch > 3):
            raise ValueError("channel must be 0..3")
        if np.any(np.diff(ts) < 0):
            raise ValueError("timestamps must be nondecreasing")
        object.__setattr__(self, "timestamp_ps", ts)
        object.__setattr__(self, "channel", ch)

    @property
    def duration(self) -> float:
        return 0.0 if len(self) == 0 else (self.timestamp_ps[-1] - self.t0_ps) * 1e-12


@numba.njit(cache=True)
def _dead_time_mask(ts, ch, dead):
    keep = np.ones(ts.size, dtype=np.bool_)
    last = np.full(4, -(1 << 62), dtype=np.int64)
    for i in range(ts.size):
        c = ch[i]
        if ts[i] - last[c] < dead:
            keep[i] = False
        else:
            last[c] = ts[i]
    return keep


def _finalize(ts: np.ndarray, ch: np.ndarray, detectors: DetectorConfig, extra=()):
    """Sort by time (ties broken by channel) and drop clicks inside a channel's dead time."""
    order = np.lexsort((ch, ts))
    ts, ch = ts[order], ch[order]
    extra = tuple(e[order] for e in extra)
    keep = _dead_time_mask(ts, ch, np.int64(round(detectors.dead_time * 1e12)))
    return ts[keep], ch[keep], tuple(e[keep] for e in extra)


def _background(rng, detectors: DetectorConfig, t_lo: float, t_hi: float):
    n = rng.poisson(detectors.background_rate * (t_hi - t_lo))
    t = rng.uniform(t_lo, t_hi, size=n)
    return t, rng.integers(0, 4, size=n).astype(np.uint8)


def _tof_seconds(tof, t) -> np.ndarray:
    if tof is None:
        return np.zeros_like(t)
    if callable(tof):
        return np.broadcast_to(np.asarray(tof(t), dtype=float), np.shape(t))
    return np.full_like(t, float(tof))


def transmit(pulses, loss_dB, detectors: DetectorConfig, tof=None, seed: int = 0) -> DetectionLog:
    """Slot-by-slot channel and detector simulation over a pulse stream.

    ``loss_dB`` is a number or a ``LossSeries``; the detector efficiencies
    multiply on top. ``tof`` maps emission time (s) to time of flight (s).
    """
    loss = _as_loss(loss_dB)
    if isinstance(pulses, PulseStream):
        cfg, blocks = pulses.cfg, iter(pulses)
        duration = len(pulses) / cfg.pulse_rate
    else:
        raise TypeError("transmit expects a PulseStream")
    eff = detectors.efficiencies
    sig_ts, sig_ch = [], []
    for i, blk in enumerate(blocks):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, i)))
        t = blk.slot / cfg.pulse_rate
        lam = _pulse_lambdas(cfg, blk.cls, blk.basis, blk.bit, blk.fate, blk.projector,
                             _transmittance(loss.at(t))) * eff
        fired = rng.random(lam.shape) < -np.expm1(-lam)
        rows, chans = np.nonzero(fired)
        te = t[rows]
        arrive = te + _tof_seconds(tof, te) + rng.normal(0.0, detectors.jitter, size=rows.size)
        sig_ts.append(np.rint(arrive * 1e12).astype(np.int64))
        sig_ch.append(chans.astype(np.uint8))
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    bt, bc = _background(rng, detectors, 0.0, duration)
    ts = np.concatenate(sig_ts + [np.rint(bt * 1e12).astype(np.int64)])
    ch = np.concatenate(sig_ch + [bc])
    ts, ch, _ = _finalize(ts, ch, detectors)
    return DetectionLog(ts, ch, cfg.pulse_rate, 0, seed)


# ---------------------------------------------------------------- sparse engine

def _combos(cfg: SourceConfig):
    """All (class, fate, projector, basis, bit) combinations with their slot probabilities."""
    rows = []
    for c in range(3):
        for fate, projs in ((OPEN, [-1]), (POLARIZED, range(6)), (BLOCKED, [-1])):
            for pr in projs:
                for b in range(2):
                    for k in range(2):
                        p = cfg.class_probabilities[c] * cfg.duty[fate] * 0.25
                        if fate == POLARIZED:
                            p /= 6.0
                        rows.append((c, fate, pr, b, k, p))
    arr = np.array(rows)
    return (arr[:, 0].astype(np.uint8), arr[:, 1].astype(np.uint8), arr[:, 2].astype(np.int8),
            arr[:, 3].astype(np.uint8), arr[:, 4].astype(np.uint8), arr[:, 5] / arr[:, 5].sum())


_PATTERNS = np.array([[(m >> j) & 1 for j in range(4)] for m in range(1, 16)], dtype=bool)


@dataclass(frozen=True, eq=False)
class TruthLog:
    """Transmitter records for every slot that could pair with a detection, sorted by slot."""

    slot: np.ndarray
    cls: np.ndarray
    basis: np.ndarray
    bit: np.ndarray
    fate: np.ndarray
    projector: np.ndarray

    def __len__(self):
        return len(self.slot)

    def lookup(self, slots) -> np.ndarray:
        """Row index of each slot, -1 when absent."""
        slots = np.asarray(slots, dtype=np.int64)
        idx = np.searchsorted(self.slot, slots)
        idx_c = np.minimum(idx, max(len(self.slot) - 1, 0))
        hit = (idx < len(self.slot)) & (self.slot[idx_c] == slots) if len(self.slot) else np.zeros(slots.shape, bool)
        return np.where(hit, idx_c, -1)


@dataclass(frozen=True, eq=False)
class LinkRun:
    events: DetectionLog
    truth: TruthLog
    emitted: np.ndarray  # (seconds, 3) pulses emitted per class in each whole second
    duration: float


def simulate_link(cfg: SourceConfig, detectors: DetectorConfig, duration: float, loss_dB,
                  tof=None, seed: int = 0) -> LinkRun:
    """Detection log plus transmitter truth without touching every slot.

    ``loss_dB`` is a number or a ``LossSeries``. Interval ``i`` of the loss
    series and whole second ``s`` split the run into pieces; each piece draws
    from its own child seed.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    loss = _as_loss(loss_dB)
    rate = cfg.pulse_rate
    n_total = int(round(duration * rate))
    cuts = sorted({0.0, duration, *np.arange(1.0, duration, 1.0)}
                  | {a for a, _, _ in loss.intervals(duration)})
    slot_cuts = np.unique(np.rint(np.array(cuts) * rate).astype(np.int64))
    slot_cuts = slot_cuts[(slot_cuts >= 0) & (slot_cuts <= n_total)]
    c_cls, c_fate, c_proj, c_basis, c_bit, c_p = _combos(cfg)
    eff = detectors.efficiencies
    n_sec = int(math.ceil(duration - 1e-9))
    emitted = np.zeros((n_sec, 3), dtype=np.int64)
    ev_ts, ev_ch, tr = [], [], []

    for piece, (s0, s1) in enumerate(zip(slot_cuts[:-1], slot_cuts[1:])):
        n = int(s1 - s0)
        if n <= 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, piece)))
        t_mid = (s0 + s1) / 2 / rate
        eta = float(_transmittance(loss.at(t_mid)))
        counts = rng.multinomial(n, c_p)
        emitted[min(int(s0 // rate), n_sec - 1)] += np.bincount(c_cls, weights=counts, minlength=3).astype(np.int64)
        lam = _pulse_lambdas(cfg, c_cls, c_basis, c_bit, c_fate, c_proj, np.full(len(c_p), eta)) * eff
        p_fire = -np.expm1(-lam)
        p_any = -np.expm1(-lam.sum(axis=1))
        clicks = rng.binomial(counts, p_any)
        k_total = int(clicks.sum())
        # which detectors fired, given at least one did
        pat_p = np.where(_PATTERNS[None, :, :], p_fire[:, None, :], 1 - p_fire[:, None, :]).prod(axis=2)
        combo_of_click = np.repeat(np.arange(len(c_p)), clicks)
        pattern = np.empty(k_total, dtype=np.int64)
        for j in np.nonzero(clicks)[0]:
            sel = combo_of_click == j
            pattern[sel] = rng.choice(15, size=int(clicks[j]), p=pat_p[j] / pat_p[j].sum())
        pos = s0 + rng.choice(n, size=k_total, replace=False) if k_total else np.zeros(0, np.int64)
        perm = rng.permutation(k_total)
        combo_of_click, pattern = combo_of_click[perm], pattern[perm]
        rows, chans = np.nonzero(_PATTERNS[pattern])
        te = pos[rows] / rate
        arrive = te + _tof_seconds(tof, te) + rng.normal(0.0, detectors.jitter, size=rows.size)
        ev_ts.append(np.rint(arrive * 1e12).astype(np.int64))
        ev_ch.append(chans.astype(np.uint8))
        tr.append((pos, combo_of_click))

        # background over the same stretch of time
        bt, bc = _background(rng, detectors, s0 / rate, s1 / rate)
        ev_ts.append(np.rint(bt * 1e12).astype(np.int64))
        ev_ch.append(bc)
        # slots a background count can be paired with (allow one slot either side)
        nominal = np.floor(bt * rate - _tof_seconds(tof, bt) * rate).astype(np.int64)
        cand = np.unique(np.concatenate([nominal - 1, nominal, nominal + 1, nominal + 2]))
        cand = cand[(cand >= s0) & (cand < s1)]
        cand = np.setdiff1d(cand, pos, assume_unique=False)
        if cand.size:
            quiet = counts - clicks
            draw = rng.multivariate_hypergeometric(quiet, cand.size)
            combos = np.repeat(np.arange(len(c_p)), draw)
            rng.shuffle(combos)
            tr.append((cand, combos))

    ts = np.concatenate(ev_ts) if ev_ts else np.zeros(0, np.int64)
    ch = np.concatenate(ev_ch) if ev_ch else np.zeros(0, np.uint8)
    ts, ch, _ = _finalize(ts, ch, detectors)

    slots = np.concatenate([p for p, _ in tr]) if tr else np.zeros(0, np.int64)
    combos = np.concatenate([c for _, c in tr]).astype(int) if tr else np.zeros(0, int)
    order = np.argsort(slots, kind="stable")
    slots, combos = slots[order], combos[order]
    truth = TruthLog(slots, c_cls[combos], c_basis[combos], c_bit[combos], c_fate[combos], c_proj[combos])
    return LinkRun(DetectionLog(ts, ch, rate, 0, seed), truth, emitted, duration)


# ---------------------------------------------------------------- closed forms

def window_acceptance(jitter: float, window: float | None) -> float:
    """Fraction of Gaussian-jittered signal clicks inside a centred window."""
    if window is None or jitter == 0:
        return 1.0
    return float(erf(window / 2 / (jitter * math.sqrt(2))))


def expected_gain(cfg: SourceConfig, detectors: DetectorConfig, loss_dB: float, cls: int = SIGNAL,
                  window: float | None = None, open_only: bool = True) -> float:
    """Probability per emitted pulse of class ``cls`` of at least one counted detection.

    Counts open-slot detections (times the open duty) when ``open_only``;
    with a coincidence window, signal clicks are thinned by the jitter
    acceptance and background by window / period. Dead time is ignored.
    """
    eta = float(_transmittance(loss_dB)) * float(np.mean(detectors.efficiencies))
    acc = window_acceptance(detectors.jitter, window)
    span = window if window is not None else 1.0 / cfg.pulse_rate
    bg = detectors.background_rate * span
    p = -math.expm1(-(cfg.means[cls] * eta * acc + bg))
    return p * (cfg.duty_open if open_only else 1.0)


def expected_qber(cfg: SourceConfig, detectors: DetectorConfig, loss_dB: float, cls: int = SIGNAL,
                  window: float | None = None) -> float:
    """Sifted QBER in open slots: intrinsic errors on signal clicks plus half of background."""
    eta = float(_transmittance(loss_dB)) * float(np.mean(detectors.efficiencies))
    acc = window_acceptance(detectors.jitter, window)
    span = window if window is not None else 1.0 / cfg.pulse_rate
    sig = cfg.means[cls] * eta * acc
    bg = detectors.background_rate * span
    if sig + bg == 0:
        return 0.5
    return (intrinsic_qber(cfg.states) * sig + 0.5 * bg) / (sig + bg)


def true_single_photon(cfg: SourceConfig, detectors: DetectorConfig, loss_dB: float,
                       window: float | None = None) -> tuple[float, float]:
    """Model values of the signal single-photon gain Q1 and error rate e1 (open-slot convention)."""
    eta = float(_transmittance(loss_dB)) * float(np.mean(detectors.efficiencies))
    acc = window_acceptance(detectors.jitter, window)
    span = window if window is not None else 1.0 / cfg.pulse_rate
    bg = detectors.background_rate * span
    y0 = -math.expm1(-bg)
    y1 = 1 - (1 - y0) * (1 - eta * acc)
    e1 = (intrinsic_qber(cfg.states) * eta * acc * (1 - y0) + 0.5 * y0) / y1
    mu = cfg.mu_signal
    return cfg.duty_open * y1 * mu * math.exp(-mu), e1


def tomography_counts(cfg: SourceConfig, rate_per_projector: float, rng: np.random.Generator,
                      integration_time: float = 1.0):
    """Chopper-polarizer counts for each emitted state over one integration period."""
    from .polcomp import sample_counts

    return {lab: sample_counts(s, rate_per_projector * integration_time, rng, integration_time)
            for lab, s in zip(BB84_LABELS, cfg.states)}
