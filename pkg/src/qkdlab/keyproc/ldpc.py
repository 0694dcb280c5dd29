"""Rate-adaptive LDPC reconciliation over the binary symmetric channel.

The transmitter sends the syndrome of a frame made of its key bits plus
``d`` filler positions. Fillers start out punctured (unknown to the
receiver); whenever belief propagation fails, a batch of filler values is
disclosed (the positions become shortened) and decoding is retried. Only the
syndrome bits not absorbed by still-punctured fillers count as leakage, plus
the disclosed filler values and the verification hash.

Codes are built by progressive edge growth from an irregular variable-degree
profile and cached per shape.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .keyrate import binary_entropy

# Edge-perspective variable degree profile (fraction of edges on degree-d nodes).
VARIABLE_EDGE_PROFILE = {2: 0.20, 3: 0.28, 7: 0.14, 14: 0.38}

HASH_BITS = 50
_MERSENNE61 = (1 << 61) - 1


@dataclass(frozen=True, eq=False)
class LDPCCode:
    n: int
    m: int
    check_ptr: np.ndarray  # CSR row pointers, length m + 1
    check_vars: np.ndarray  # variable index per edge, grouped by check

    @property
    def rate(self) -> float:
        return 1.0 - self.m / self.n

    @property
    def n_edges(self) -> int:
        return len(self.check_vars)

    def dense(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        for i in range(self.m):
            H[i, self.check_vars[self.check_ptr[i]:self.check_ptr[i + 1]]] = 1
        return H

    def syndrome(self, bits) -> np.ndarray:
        return _syndrome(self.check_ptr, self.check_vars, np.asarray(bits, dtype=np.uint8))


def variable_degrees(n: int, m: int, profile: dict[int, float] = VARIABLE_EDGE_PROFILE,
                     max_check_degree: int | None = None) -> np.ndarray:
    """Node degrees realizing an edge-perspective profile, sorted ascending."""
    degs = np.array(sorted(profile))
    lam = np.array([profile[d] for d in degs], dtype=float)
    lam /= lam.sum()
    node_frac = (lam / degs) / np.sum(lam / degs)
    counts = np.floor(node_frac * n).astype(int)
    counts[0] += n - counts.sum()
    out = np.repeat(degs, counts)
    return np.minimum(out, m)


@numba.njit(cache=True)
def _peg(n, m, vdeg, seed):
    np.random.seed(seed)
    total = 0
    for j in range(n):
        total += vdeg[j]
    maxdeg = 0
    for j in range(n):
        if vdeg[j] > maxdeg:
            maxdeg = vdeg[j]
    var_adj = -np.ones((n, maxdeg), dtype=np.int64)
    var_cnt = np.zeros(n, dtype=np.int64)
    cap = total // m + 8
    chk_adj = -np.ones((m, cap), dtype=np.int64)
    chk_cnt = np.zeros(m, dtype=np.int64)
    chk_seen = np.zeros(m, dtype=np.int64)
    var_seen = np.zeros(n, dtype=np.int64)
    stamp = 0
    frontier = np.empty(n, dtype=np.int64)
    nxt = np.empty(n, dtype=np.int64)
    cand = np.empty(m, dtype=np.int64)
    for j in range(n):
        for k in range(vdeg[j]):
            if k == 0:
                # lowest-degree check, random tie-break
                best = 1 << 60
                nc = 0
                for c in range(m):
                    if chk_cnt[c] < best:
                        best = chk_cnt[c]
                        nc = 0
                    if chk_cnt[c] == best:
                        cand[nc] = c
                        nc += 1
            else:
                # BFS from j; keep the checks unreachable at the deepest level
                stamp += 1
                var_seen[j] = stamp
                nf = 1
                frontier[0] = j
                reached = 0
                for e in range(var_cnt[j]):
                    c = var_adj[j, e]
                    if chk_seen[c] != stamp:
                        chk_seen[c] = stamp
                        reached += 1
                prev_reached = -1
                while True:
                    nn = 0
                    for fi in range(nf):
                        v = frontier[fi]
                        for e in range(var_cnt[v]):
                            c = var_adj[v, e]
                            for q in range(chk_cnt[c]):
                                u = chk_adj[c, q]
                                if var_seen[u] != stamp:
                                    var_seen[u] = stamp
                                    nxt[nn] = u
                                    nn += 1
                    snapshot = stamp
                    new_checks = 0
                    # tentatively mark checks reached from the new variable layer
                    for fi in range(nn):
                        u = nxt[fi]
                        for e in range(var_cnt[u]):
                            c = var_adj[u, e]
                            if chk_seen[c] != stamp:
                                new_checks += 1
                    if new_checks == 0 or reached + new_checks >= m or reached == prev_reached:
                        break
                    prev_reached = reached
                    for fi in range(nn):
                        u = nxt[fi]
                        for e in range(var_cnt[u]):
                            c = var_adj[u, e]
                            if chk_seen[c] != stamp:
                                chk_seen[c] = stamp
                                reached += 1
                    for fi in range(nn):
                        frontier[fi] = nxt[fi]
                    nf = nn
                    if nn == 0:
                        break
                best = 1 << 60
                nc = 0
                for c in range(m):
                    if chk_seen[c] == stamp:
                        continue
                    if chk_cnt[c] < best:
                        best = chk_cnt[c]
                        nc = 0
                    if chk_cnt[c] == best:
                        cand[nc] = c
                        nc += 1
                if nc == 0:
                    # every check reached: fall back to any unconnected check of lowest degree
                    for c in range(m):
                        dup = False
                        for e in range(var_cnt[j]):
                            if var_adj[j, e] == c:
                                dup = True
                        if dup:
                            continue
                        if chk_cnt[c] < best:
                            best = chk_cnt[c]
                            nc = 0
                        if chk_cnt[c] == best:
                            cand[nc] = c
                            nc += 1
            c = cand[np.random.randint(nc)]
            if chk_cnt[c] >= cap:
                # grow storage
                new = -np.ones((m, cap * 2), dtype=np.int64)
                new[:, :cap] = chk_adj
                chk_adj = new
                cap *= 2
            var_adj[j, var_cnt[j]] = c
            var_cnt[j] += 1
            chk_adj[c, chk_cnt[c]] = j
            chk_cnt[c] += 1
    ptr = np.zeros(m + 1, dtype=np.int64)
    for c in range(m):
        ptr[c + 1] = ptr[c] + chk_cnt[c]
    cols = np.empty(ptr[m], dtype=np.int64)
    for c in range(m):
        for q in range(chk_cnt[c]):
            cols[ptr[c] + q] = chk_adj[c, q]
    return ptr, cols


@functools.lru_cache(maxsize=32)
def build_code(n: int, m: int, seed: int = 0) -> LDPCCode:
    """PEG-constructed parity-check matrix with ``m`` checks on ``n`` variables."""
    if not 0 < m < n:
        raise ValueError("need 0 < m < n")
    vdeg = variable_degrees(n, m).astype(np.int64)
    ptr, cols = _peg(n, m, vdeg, seed)
    ptr.setflags(write=False)
    cols.setflags(write=False)
    return LDPCCode(n, m, ptr, cols)


@numba.njit(cache=True)
def _syndrome(ptr, cols, bits):
    m = len(ptr) - 1
    out = np.zeros(m, dtype=np.uint8)
    for i in range(m):
        s = 0
        for e in range(ptr[i], ptr[i + 1]):
            s ^= bits[cols[e]]
        out[i] = s
    return out


@numba.njit(cache=True)
def _decode(ptr, cols, llr_in, syndrome, max_iter, r, stall_limit):
    """Layered sum-product decoding toward a target syndrome.

    ``r`` holds check-to-variable messages and is updated in place, so a
    retry after more fillers are disclosed resumes from the previous state.
    Stops early once the count of unsatisfied checks has not improved for
    ``stall_limit`` iterations. Returns (bits, ok, iterations).
    """
    m = len(ptr) - 1
    n = len(llr_in)
    L = llr_in.copy()
    for e in range(len(cols)):
        L[cols[e]] += r[e]
    q = np.empty(len(cols))
    t = np.empty(len(cols))
    hard = np.zeros(n, dtype=np.uint8)
    best_unsat = m + 1
    since_best = 0
    for it in range(1, max_iter + 1):
        for i in range(m):
            a, b = ptr[i], ptr[i + 1]
            prod = 1.0 if syndrome[i] == 0 else -1.0
            nzero = 0
            zpos = -1
            for e in range(a, b):
                q[e] = L[cols[e]] - r[e]
                x = q[e]
                if x > 60.0:
                    x = 60.0
                elif x < -60.0:
                    x = -60.0
                tv = math.tanh(0.5 * x)
                if tv == 0.0:
                    nzero += 1
                    zpos = e
                    t[e] = 0.0
                else:
                    t[e] = tv
                    prod *= tv
            for e in range(a, b):
                if nzero == 0:
                    v = prod / t[e]
                elif nzero == 1 and e == zpos:
                    v = prod
                else:
                    v = 0.0
                if v > 0.999999999999:
                    v = 0.999999999999
                elif v < -0.999999999999:
                    v = -0.999999999999
                r[e] = 2.0 * math.atanh(v)
                L[cols[e]] = q[e] + r[e]
        for j in range(n):
            hard[j] = 1 if L[j] < 0 else 0
        unsat = 0
        for i in range(m):
            s = 0
            for e in range(ptr[i], ptr[i + 1]):
                s ^= hard[cols[e]]
            if s != syndrome[i]:
                unsat += 1
        if unsat == 0:
            return hard, True, it
        if unsat < best_unsat:
            best_unsat = unsat
            since_best = 0
        else:
            since_best += 1
            if since_best >= stall_limit:
                return hard, False, it
    return hard, False, max_iter


def decode(code: LDPCCode, llr: np.ndarray, syndrome: np.ndarray, max_iter: int = 100,
           messages: np.ndarray | None = None, stall_limit: int = 20):
    if messages is None:
        messages = np.zeros(code.n_edges)
    return _decode(code.check_ptr, code.check_vars, np.asarray(llr, dtype=np.float64),
                   np.asarray(syndrome, dtype=np.uint8), max_iter, messages, stall_limit)


def verification_hash(bits, seed: int, nbits: int = HASH_BITS) -> int:
    """Seeded polynomial hash over GF(2^61 - 1) of the bit string, truncated to ``nbits``."""
    b = np.asarray(bits, dtype=np.uint8)
    pad = (-len(b)) % 32
    words = np.packbits(np.concatenate([b, np.zeros(pad, dtype=np.uint8)]), bitorder="big")
    words = words.view(">u4") if len(words) else np.zeros(0, dtype=">u4")
    x = (seed * 0x9E3779B97F4A7C15 + 0x632BE59BD9B4E019) % _MERSENNE61 or 1
    h = len(b) % _MERSENNE61
    for w in words.tolist():
        h = (h * x + w) % _MERSENNE61
    h = (h * x) % _MERSENNE61
    return h & ((1 << nbits) - 1)


@dataclass(frozen=True)
class ReconciliationParams:
    f_start: float = 1.06  # efficiency of the first attempt (all fillers punctured)
    f_max: float = 1.30  # efficiency once every filler is disclosed
    reveal_steps: int = 16
    max_iter: int = 100
    stall_limit: int = 20  # iterations without fewer unsatisfied checks before giving up an attempt
    max_frame_bits: int = 8192  # longer blocks are split into independent frames
    target_efficiency: float = 1.15
    min_qber: float = 0.005
    seed: int = 0


@dataclass
class ReconciliationResult:
    corrected: np.ndarray
    success: bool
    leaked_bits: int
    efficiency: float
    frames: int = 1
    failed_frames: int = 0
    attempts: int = 0
    qber_observed: float = float("nan")
    discarded: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def meets_target(self) -> bool:
        return self.success


def frame_shape(k: int, qber: float, params: ReconciliationParams) -> tuple[int, int, int]:
    """(n, m, d): frame length, checks and filler count for ``k`` key bits at ``qber``."""
    h = binary_entropy(max(qber, params.min_qber))
    m = int(math.ceil(params.f_max * k * h))
    d = max(int(math.floor((params.f_max - params.f_start) * k * h)), 1)
    return k + d, m, d


def _reconcile_frame(x, y, qber, params, frame_seed):
    k = len(x)
    n, m, d = frame_shape(k, qber, params)
    code = build_code(n, m, 0)
    rng = np.random.default_rng(frame_seed)
    positions = rng.permutation(n)
    filler_pos = np.sort(positions[:d])
    key_pos = np.sort(positions[d:])
    filler = rng.integers(0, 2, d, dtype=np.uint8)

    frame_a = np.empty(n, dtype=np.uint8)
    frame_a[key_pos] = x
    frame_a[filler_pos] = filler
    syn = code.syndrome(frame_a)

    p = max(qber, params.min_qber)
    mag = math.log((1 - p) / p)
    llr = np.zeros(n)
    llr[key_pos] = mag * (1.0 - 2.0 * y.astype(float))
    order = rng.permutation(d)
    step = max(1, int(math.ceil(d / params.reveal_steps)))
    revealed = 0
    attempts = 0
    hash_seed = int(rng.integers(0, 2**62))
    target = verification_hash(x, hash_seed)
    messages = np.zeros(code.n_edges)
    while True:
        attempts += 1
        bits, ok, _ = decode(code, llr, syn, params.max_iter, messages, params.stall_limit)
        cand = bits[key_pos]
        if ok and verification_hash(cand, hash_seed) == target:
            return cand, True, m - d + revealed + HASH_BITS, attempts
        if revealed >= d:
            return y.copy(), False, m - d + revealed + HASH_BITS, attempts
        idx = filler_pos[order[revealed:revealed + step]]
        llr[idx] = 1e3 * (1.0 - 2.0 * frame_a[idx].astype(float))
        revealed = min(d, revealed + step)


def error_correct(tx_bits, rx_bits, qber_estimate: float,
                  params: ReconciliationParams = ReconciliationParams()) -> ReconciliationResult:
    """Reconcile receiver bits to transmitter bits; report leakage and realized efficiency.

    Frames that fail after every filler is disclosed are discarded (their
    receiver bits are returned unchanged and flagged in ``discarded``).
    Efficiency is leaked bits over n * H2(observed QBER) of the kept bits.
    """
    x = np.asarray(tx_bits, dtype=np.uint8)
    y = np.asarray(rx_bits, dtype=np.uint8)
    if len(x) != len(y):
        raise ValueError("bit sequences differ in length")
    if len(x) == 0:
        raise ValueError("empty block")
    if not 0 <= qber_estimate <= 0.5:
        raise ValueError("qber_estimate must lie in [0, 0.5]")
    n_total = len(x)

    if qber_estimate == 0:
        hs = params.seed
        if verification_hash(x, hs) == verification_hash(y, hs):
            return ReconciliationResult(y.copy(), True, HASH_BITS, math.inf, 1, 0, 1, 0.0,
                                        np.zeros(n_total, dtype=bool))
        qber_estimate = 0.02

    if binary_entropy(qber_estimate) * params.f_max >= 1.0:
        return ReconciliationResult(y.copy(), False, 0, math.inf, 1, 1, 0,
                                    float(np.mean(x != y)), np.ones(n_total, dtype=bool))

    nframes = max(1, int(math.ceil(n_total / params.max_frame_bits)))
    bounds = np.linspace(0, n_total, nframes + 1).astype(int)
    out = y.copy()
    discarded = np.zeros(n_total, dtype=bool)
    leaked = attempts = failed = 0
    for f_idx in range(nframes):
        a, b = bounds[f_idx], bounds[f_idx + 1]
        cand, ok, leak, att = _reconcile_frame(x[a:b], y[a:b], qber_estimate, params,
                                               (params.seed, f_idx, b - a))
        attempts += att
        leaked += leak
        if ok:
            out[a:b] = cand
        else:
            failed += 1
            discarded[a:b] = True
    kept = ~discarded
    n_kept = int(kept.sum())
    qobs = float(np.mean(x[kept] != y[kept])) if n_kept else float("nan")
    if n_kept and qobs > 0:
        eff = leaked / (n_kept * binary_entropy(qobs))
    else:
        eff = math.inf
    return ReconciliationResult(out, failed == 0, leaked, eff, nframes, failed, attempts, qobs, discarded)
