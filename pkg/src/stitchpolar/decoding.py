"""Successive-cancellation decoding over compiled schedules.

The decoder is message passing on the sequence's factor graph.  Every pair
element owns two LLR registers (a side, b side) and two hard registers.  A
schedule is the event-driven firing order: channel LLRs enter at each index's
last element, f results travel toward the decision end of the a chain, g
results toward the decision end of the b chain, decisions and partial sums
travel back toward the channel.  The order is computed once per code and
reused; executing it is a flat loop of vectorized ops over a batch of words
(SC) or over a batch times a path list (SCL).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .codes import CodeSpec, crc_check
from .sequences import CouplingSequence, validate

LLR_SAT = float(2 ** 20)

_F, _G, _XOR, _DEC = 0, 1, 2, 3
_TO_LA, _TO_LB, _TO_UA, _TO_UB, _TO_DEC, _TO_X = 0, 1, 2, 3, 4, 5


@dataclass(frozen=True)
class _Op:
    kind: int
    elem: int            # pair element for f/g/xor, bit index (0-based) for dec
    dst: tuple           # (route, idx) for f/g and dec; unused for xor
    dst_b: tuple = None  # second output of xor, (route, idx)
    live: tuple = None   # for dec ops: live register columns at this point


class DecodeSchedule:
    """Compiled op order for one coupling sequence and frozen set."""

    def __init__(self, seq, frozen_mask, ops):
        self.seq = seq
        self.n_code = seq.n_code
        self.frozen_mask = frozen_mask
        self.ops = ops

    def __len__(self):
        return len(self.ops)

    @property
    def buffer_size(self):
        """LLR registers the executor allocates (two per pair element)."""
        return 2 * len(self.seq)

    def as_tuples(self):
        """Human-readable op list: (a, b, 'f'|'g'|'xor') and (i, 'd'), 1-based."""
        names = {_F: "f", _G: "g", _XOR: "xor"}
        out = []
        pairs = self.seq.pairs
        for op in self.ops:
            if op.kind == _DEC:
                out.append((op.elem + 1, "d"))
            else:
                a, b = pairs[op.elem]
                out.append((int(a), int(b), names[op.kind]))
        return out


def compile_schedule(seq: CouplingSequence, frozen) -> DecodeSchedule:
    """Event-driven decode order for a valid sequence.

    Channel LLRs are delivered in index order; each message fires at most one
    op, and ready ops run first come first served.  The result interleaves
    the per-index chains exactly as the serial decoder must: 3n + N ops, each
    f/g/xor once per element and one decision per index.
    """
    res = validate(seq)
    if not res.valid:
        raise ValueError(f"sequence not decodable (pair {res.first_bad})")
    n_code = seq.n_code
    pairs = seq.pairs
    n_elem = pairs.shape[0]

    frozen_mask = np.zeros(n_code, dtype=bool)
    for i in frozen:
        frozen_mask[i - 1] = True

    # chains[j] = [(elem, 0 for a side | 1 for b side), ...] in listed order
    chains = [[] for _ in range(n_code)]
    for e in range(n_elem):
        chains[pairs[e, 0] - 1].append((e, 0))
        chains[pairs[e, 1] - 1].append((e, 1))

    pos_a = np.zeros(n_elem, dtype=np.int64)
    pos_b = np.zeros(n_elem, dtype=np.int64)
    for j, ch in enumerate(chains):
        for p, (e, side) in enumerate(ch):
            (pos_a if side == 0 else pos_b)[e] = p

    def up_route(j, p):
        # toward the decision end of index j's chain
        if p == 0:
            return (_TO_DEC, j)
        e, side = chains[j][p - 1]
        return (_TO_LA if side == 0 else _TO_LB, e)

    def down_route(j, p):
        # toward the channel end of index j's chain
        if p == len(chains[j]) - 1:
            return (_TO_X, j)
        e, side = chains[j][p + 1]
        return (_TO_UA if side == 0 else _TO_UB, e)

    have = np.zeros((n_elem, 4), dtype=bool)  # la, lb, ua, ub
    queue = deque()
    ops = []

    def deliver_llr(route, idx):
        if route == _TO_DEC:
            queue.append((_DEC, idx))
            return
        slot = 0 if route == _TO_LA else 1
        have[idx, slot] = True
        if have[idx, 0] and have[idx, 1]:
            queue.append((_F, idx))

    def deliver_u(route, idx):
        if route == _TO_X:
            return
        slot = 2 if route == _TO_UA else 3
        have[idx, slot] = True
        if route == _TO_UA:
            queue.append((_G, idx))
        elif have[idx, 2] and have[idx, 3]:
            queue.append((_XOR, idx))

    for j in range(n_code):
        ch = chains[j]
        if not ch:
            queue.append((_DEC, j))
            continue
        e, side = ch[-1]
        deliver_llr(_TO_LA if side == 0 else _TO_LB, e)

    while queue:
        kind, idx = queue.popleft()
        if kind == _F:
            j = int(pairs[idx, 0]) - 1
            dst = up_route(j, pos_a[idx])
            ops.append(_Op(_F, idx, dst))
            deliver_llr(*dst)
        elif kind == _G:
            j = int(pairs[idx, 1]) - 1
            dst = up_route(j, pos_b[idx])
            ops.append(_Op(_G, idx, dst))
            deliver_llr(*dst)
        elif kind == _DEC:
            ch = chains[idx]
            if ch:
                e, side = ch[0]
                dst = (_TO_UA if side == 0 else _TO_UB, e)
            else:
                dst = (_TO_X, idx)
            ops.append(_Op(_DEC, idx, dst))
            deliver_u(*dst)
        else:
            ja = int(pairs[idx, 0]) - 1
            jb = int(pairs[idx, 1]) - 1
            dst_a = down_route(ja, pos_a[idx])
            dst_b = down_route(jb, pos_b[idx])
            ops.append(_Op(_XOR, idx, dst_a, dst_b))
            deliver_u(*dst_a)
            deliver_u(*dst_b)

    if len(ops) != 3 * n_elem + n_code:
        raise ValueError("schedule stalled; sequence has a dependency cycle")
    ops = _attach_liveness(ops, pairs, n_elem, n_code)
    return DecodeSchedule(seq, frozen_mask, ops)


def _attach_liveness(ops, pairs, n_elem, n_code):
    """Record, at each decision, which register columns a path clone must copy.

    Write time -1 marks channel-seeded registers, -2 never written; a column
    is live at time t when written before t and read after t (La/Lb die at
    their g, Ua/Ub at their xor, a decision buffer at its decision).
    """
    la_w = np.full(n_elem, -2, dtype=np.int64)
    lb_w = np.full(n_elem, -2, dtype=np.int64)
    ua_w = np.full(n_elem, -2, dtype=np.int64)
    ub_w = np.full(n_elem, -2, dtype=np.int64)
    dec_w = np.full(n_code, -2, dtype=np.int64)
    sink = [(_TO_DEC, j) for j in range(n_code)]
    for e in range(n_elem):
        sink[pairs[e, 0] - 1] = (_TO_LA, e)
        sink[pairs[e, 1] - 1] = (_TO_LB, e)
    for route, idx in sink:
        (la_w if route == _TO_LA else lb_w if route == _TO_LB else dec_w)[idx] = -1
    g_t = np.full(n_elem, -1, dtype=np.int64)
    xor_t = np.full(n_elem, -1, dtype=np.int64)
    dec_t = np.full(n_code, -1, dtype=np.int64)
    writes = {_TO_LA: la_w, _TO_LB: lb_w, _TO_UA: ua_w, _TO_UB: ub_w, _TO_DEC: dec_w}
    for t, op in enumerate(ops):
        if op.kind == _G:
            g_t[op.elem] = t
        elif op.kind == _XOR:
            xor_t[op.elem] = t
        elif op.kind == _DEC:
            dec_t[op.elem] = t
        for dst in ((op.dst,) if op.kind != _XOR else (op.dst, op.dst_b)):
            route, idx = dst
            if route in writes:
                writes[route][idx] = t
    out = []
    for t, op in enumerate(ops):
        if op.kind != _DEC:
            out.append(op)
            continue
        live = (
            np.nonzero((la_w > -2) & (la_w < t) & (g_t > t))[0],
            np.nonzero((lb_w > -2) & (lb_w < t) & (g_t > t))[0],
            np.nonzero((ua_w > -2) & (ua_w < t) & (xor_t > t))[0],
            np.nonzero((ub_w > -2) & (ub_w < t) & (xor_t > t))[0],
            np.nonzero((dec_w > -2) & (dec_w < t) & (dec_t > t))[0],
        )
        out.append(_Op(_DEC, op.elem, op.dst, None, live))
    return out


@lru_cache(maxsize=128)
def _cached_schedule(seq: CouplingSequence, frozen: tuple) -> DecodeSchedule:
    return compile_schedule(seq, frozen)


def schedule_for(spec: CodeSpec) -> DecodeSchedule:
    return _cached_schedule(spec.sequence, spec.frozen)


def f_exact(la, lb):
    """2 atanh(tanh(la/2) tanh(lb/2)), in the stable max-log-plus-correction form."""
    aa = np.abs(la)
    ab = np.abs(lb)
    mag = (np.minimum(aa, ab) + np.log1p(np.exp(-(aa + ab)))
           - np.log1p(np.exp(-np.abs(aa - ab))))
    return np.sign(la) * np.sign(lb) * mag


def f_minsum(la, lb):
    return np.sign(la) * np.sign(lb) * np.minimum(np.abs(la), np.abs(lb))


_F_RULES = {"exact": f_exact, "minsum": f_minsum}


@dataclass
class ScBatchResult:
    u_hat: np.ndarray          # (B, N) input-word estimates
    x_hat: np.ndarray          # (B, N) re-encoded codewords
    decision_llrs: np.ndarray  # (B, N)
    info_positions: np.ndarray
    op_outputs: Optional[list] = None

    @property
    def info_bits(self):
        return self.u_hat[:, self.info_positions - 1]


def sc_decode_batch(spec: CodeSpec, llrs, f_mode="exact", forced_u=None,
                    capture=False) -> ScBatchResult:
    """Run SC over a (B, N) LLR batch.

    ``forced_u`` pins every decision to the given bits instead of thresholding
    (genie mode); decision LLRs are still recorded.  ``capture`` keeps each
    op's numeric output for tracing.
    """
    f_rule = _F_RULES[f_mode]
    sched = schedule_for(spec)
    llrs = np.atleast_2d(np.asarray(llrs, dtype=float))
    bsz, n = llrs.shape
    if n != spec.n_code:
        raise ValueError(f"expected {spec.n_code} LLRs, got {n}")
    n_elem = len(sched.seq)
    la = np.zeros((bsz, n_elem))
    lb = np.zeros((bsz, n_elem))
    ua = np.zeros((bsz, n_elem), dtype=np.uint8)
    ub = np.zeros((bsz, n_elem), dtype=np.uint8)
    dec = np.zeros((bsz, n))
    u_hat = np.zeros((bsz, n), dtype=np.uint8)
    x_hat = np.zeros((bsz, n), dtype=np.uint8)
    if forced_u is not None:
        forced_u = np.atleast_2d(np.asarray(forced_u, dtype=np.uint8))
    frozen = sched.frozen_mask
    pairs = sched.seq.pairs
    trace = [] if capture else None

    llr_sinks = {_TO_LA: la, _TO_LB: lb, _TO_DEC: dec}
    hard_sinks = {_TO_UA: ua, _TO_UB: ub, _TO_X: x_hat}

    for j in range(n):
        # channel LLR of index j lands at its last element (or its decision
        # buffer when no pair touches j)
        route, idx = _channel_sink(sched, j)
        llr_sinks[route][:, idx] = llrs[:, j]

    for op in sched.ops:
        e = op.elem
        if op.kind == _F:
            val = f_rule(la[:, e], lb[:, e])
            route, idx = op.dst
            llr_sinks[route][:, idx] = val
        elif op.kind == _G:
            val = np.where(ua[:, e] == 1, -la[:, e], la[:, e]) + lb[:, e]
            route, idx = op.dst
            llr_sinks[route][:, idx] = val
        elif op.kind == _DEC:
            l_i = dec[:, e]
            if forced_u is not None:
                bits = forced_u[:, e]
            elif frozen[e]:
                bits = np.zeros(bsz, dtype=np.uint8)
            else:
                bits = (l_i < 0).astype(np.uint8)
            u_hat[:, e] = bits
            val = bits
            route, idx = op.dst
            hard_sinks[route][:, idx] = bits
        else:
            va = ua[:, e] ^ ub[:, e]
            vb = ub[:, e]
            route, idx = op.dst
            hard_sinks[route][:, idx] = va
            route_b, idx_b = op.dst_b
            hard_sinks[route_b][:, idx_b] = vb
            val = va
        if capture:
            trace.append(np.array(val, copy=True))

    info_pos = np.asarray(spec.info, dtype=np.int64)
    return ScBatchResult(u_hat, x_hat, dec, info_pos, trace)


def _channel_sink(sched: DecodeSchedule, j):
    key = "_chan_sinks"
    cached = getattr(sched, key, None)
    if cached is None:
        pairs = sched.seq.pairs
        cached = [(_TO_DEC, i) for i in range(sched.n_code)]
        for e in range(pairs.shape[0]):
            cached[pairs[e, 0] - 1] = (_TO_LA, e)
            cached[pairs[e, 1] - 1] = (_TO_LB, e)
        setattr(sched, key, cached)
    return cached[j]


def sc_decode(spec: CodeSpec, llrs, f_mode="exact"):
    """Decode one word; returns (info-bit estimates, re-encoded codeword)."""
    res = sc_decode_batch(spec, llrs, f_mode=f_mode)
    return res.info_bits[0], res.x_hat[0]


def sc_trace(spec: CodeSpec, llrs, f_mode="exact"):
    """Single-word decode keeping every op output, for inspection."""
    res = sc_decode_batch(spec, llrs, f_mode=f_mode, capture=True)
    ops = schedule_for(spec).as_tuples()
    outputs = [(op, float(v[0])) for op, v in zip(ops, res.op_outputs)]
    return res, outputs


@dataclass
class SclBatchResult:
    info_bits: np.ndarray   # (B, S, |I|) ranked by path metric
    metrics: np.ndarray     # (B, S)
    selected: np.ndarray    # (B,) index of the returned path
    crc_ok: np.ndarray      # (B,) whether the selected path passed the CRC

    @property
    def chosen_bits(self):
        b = np.arange(self.info_bits.shape[0])
        return self.info_bits[b, self.selected]


def scl_decode_batch(spec: CodeSpec, llrs, list_size, f_mode="exact") -> SclBatchResult:
    """CRC-aided successive cancellation list decoding over a batch.

    Paths duplicate at information bits: candidates are all current paths
    deciding 0 followed by all deciding 1, stable-sorted by path metric, best
    ``list_size`` kept.  The metric grows by |L| whenever a decision opposes
    the LLR sign.  With a CRC configured the best checking path is selected,
    else the metric-best.
    """
    if list_size < 1:
        raise ValueError("list size must be at least 1")
    f_rule = _F_RULES[f_mode]
    sched = schedule_for(spec)
    llrs = np.atleast_2d(np.asarray(llrs, dtype=float))
    bsz, n = llrs.shape
    if n != spec.n_code:
        raise ValueError(f"expected {spec.n_code} LLRs, got {n}")
    n_elem = len(sched.seq)
    frozen = sched.frozen_mask

    # path-parallel state: axis 0 batch, axis 1 paths
    npath = 1
    la = np.zeros((bsz, 1, n_elem))
    lb = np.zeros((bsz, 1, n_elem))
    ua = np.zeros((bsz, 1, n_elem), dtype=np.uint8)
    ub = np.zeros((bsz, 1, n_elem), dtype=np.uint8)
    dec = np.zeros((bsz, 1, n))
    u_hat = np.zeros((bsz, 1, n), dtype=np.uint8)
    x_hat = np.zeros((bsz, 1, n), dtype=np.uint8)
    pm = np.zeros((bsz, 1))

    llr_sinks = {_TO_LA: la, _TO_LB: lb, _TO_DEC: dec}
    for j in range(n):
        route, idx = _channel_sink(sched, j)
        llr_sinks[route][:, :, idx] = llrs[:, None, j]

    for op in sched.ops:
        e = op.elem
        if op.kind == _F:
            val = f_rule(la[:, :, e], lb[:, :, e])
            route, idx = op.dst
            (la if route == _TO_LA else lb if route == _TO_LB else dec)[:, :, idx] = val
        elif op.kind == _G:
            val = np.where(ua[:, :, e] == 1, -la[:, :, e], la[:, :, e]) + lb[:, :, e]
            route, idx = op.dst
            (la if route == _TO_LA else lb if route == _TO_LB else dec)[:, :, idx] = val
        elif op.kind == _XOR:
            va = ua[:, :, e] ^ ub[:, :, e]
            vb = ub[:, :, e]
            for (route, idx), v in ((op.dst, va), (op.dst_b, vb)):
                (ua if route == _TO_UA else ub if route == _TO_UB else x_hat)[:, :, idx] = v
        else:
            l_i = dec[:, :, e]
            if frozen[e]:
                pm = pm + np.where(l_i < 0, -l_i, 0.0)
                bits = np.zeros((bsz, npath), dtype=np.uint8)
                u_hat[:, :, e] = bits
                route, idx = op.dst
                (ua if route == _TO_UA else ub if route == _TO_UB else x_hat)[:, :, idx] = bits
                continue
            # duplicate: candidate p decides 0, candidate npath+p decides 1
            pen0 = np.where(l_i < 0, -l_i, 0.0)
            pen1 = np.where(l_i > 0, l_i, 0.0)
            cand_pm = np.concatenate([pm + pen0, pm + pen1], axis=1)
            keep = min(2 * npath, list_size)
            order = np.argsort(cand_pm, axis=1, kind="stable")[:, :keep]
            src = order % npath
            bits = (order >= npath).astype(np.uint8)
            pm = np.take_along_axis(cand_pm, order, axis=1)
            la_l, lb_l, ua_l, ub_l, dec_l = op.live
            la = _clone(la, src, la_l, n_elem)
            lb = _clone(lb, src, lb_l, n_elem)
            ua = _clone(ua, src, ua_l, n_elem)
            ub = _clone(ub, src, ub_l, n_elem)
            dec = _clone(dec, src, dec_l, n)
            u_hat = np.take_along_axis(u_hat, src[:, :, None], axis=1)
            x_hat = np.take_along_axis(x_hat, src[:, :, None], axis=1)
            npath = keep
            u_hat[:, :, e] = bits
            route, idx = op.dst
            (ua if route == _TO_UA else ub if route == _TO_UB else x_hat)[:, :, idx] = bits

    # frozen-bit penalties after the last duplication can reorder paths
    order = np.argsort(pm, axis=1, kind="stable")
    pm = np.take_along_axis(pm, order, axis=1)
    u_hat = np.take_along_axis(u_hat, order[:, :, None], axis=1)
    info_pos = np.asarray(spec.info, dtype=np.int64) - 1
    info_bits = u_hat[:, :, info_pos]
    if spec.crc is not None:
        ok = crc_check(info_bits.reshape(-1, info_pos.size), spec.crc)
        ok = ok.reshape(bsz, npath)
        any_ok = ok.any(axis=1)
        first_ok = np.argmax(ok, axis=1)
        selected = np.where(any_ok, first_ok, 0)
        crc_ok = any_ok
    else:
        selected = np.zeros(bsz, dtype=np.int64)
        crc_ok = np.ones(bsz, dtype=bool)
    return SclBatchResult(info_bits, pm, selected, crc_ok)


def _clone(arr, src, live_cols, width):
    """Duplicate path state along axis 1, copying only still-live columns."""
    bsz, keep = src.shape
    out = np.zeros((bsz, keep, width), dtype=arr.dtype)
    if live_cols.size:
        gathered = np.take_along_axis(arr[:, :, live_cols], src[:, :, None], axis=1)
        out[:, :, live_cols] = gathered
    return out


def scl_decode(spec: CodeSpec, llrs, list_size, f_mode="exact"):
    """Decode one word with SCL; returns ranked (info bits, metric) pairs
    plus the index of the CRC-selected path."""
    res = scl_decode_batch(spec, llrs, list_size, f_mode=f_mode)
    ranked = [(res.info_bits[0, p], float(res.metrics[0, p]))
              for p in range(res.info_bits.shape[1])]
    return ranked, int(res.selected[0]), bool(res.crc_ok[0])


def rm_llrs(spec: CodeSpec, llrs):
    """Lift received LLRs from transmitted to full-length positions.

    Punctured positions get LLR 0 (nothing received); shortened positions get
    +LLR_SAT (known zero).  Without rate matching the input passes through.
    Accepts a single vector or a batch with trailing axis of kept length.
    """
    llrs = np.asarray(llrs, dtype=float)
    if spec.rate_match is None:
        if llrs.shape[-1] != spec.n_code:
            raise ValueError("llr length must equal code length")
        return llrs
    kept = spec.kept_positions() - 1
    if llrs.shape[-1] != kept.shape[0]:
        raise ValueError("llr length must equal transmitted length")
    fill = 0.0 if spec.rate_match.mode == "puncture" else LLR_SAT
    out = np.full(llrs.shape[:-1] + (spec.n_code,), fill)
    out[..., kept] = llrs
    return out
