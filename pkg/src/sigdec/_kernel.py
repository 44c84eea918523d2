"""Bit-packed Monte-Carlo kernel: 64 trials per uint64 word.

Runs whole noisy trials inside one compiled loop.  Signal bits live in
``uint64[d, d, W]`` grids (bit = trial lane), stacks in binary bit-planes
``uint64[planes, d, d, W]`` updated by ripple carries, and the noise is
drawn in-kernel from the same counter-based Philox scheme as
:mod:`sigdec.noise`, so every lane is bit-identical to a solo reference
run of the same ``(master_seed, cell, trial)``.

Residual error chains (injected errors XOR all applied corrections) are
snapshotted at the requested checkpoint rounds; final readout and
statistics happen in numpy on the packed snapshots.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_KERNEL = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    HAVE_KERNEL = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


U64 = np.uint64
_M0 = U64(0xD2E7470EE14C6C93)
_M1 = U64(0xCA5A826395121157)
_W0 = U64(0x9E3779B97F4A7C15)
_W1 = U64(0xBB67AE8584CAA73B)
_ONE = U64(1)
_ZERO = U64(0)
_FULL = U64(0xFFFFFFFFFFFFFFFF)
_LO32 = U64(0xFFFFFFFF)
_SH32 = U64(32)


@njit(inline="always")
def _mulhi64(a, b):
    ah = a >> _SH32
    al = a & _LO32
    bh = b >> _SH32
    bl = b & _LO32
    mid = ((al * bl) >> _SH32) + ((al * bh) & _LO32) + ((ah * bl) & _LO32)
    return ah * bh + ((al * bh) >> _SH32) + ((ah * bl) >> _SH32) + (mid >> _SH32)


@njit(inline="always")
def _philox_block(c0, c1, c2, c3, k0, k1):
    x0, x1, x2, x3 = c0, c1, c2, c3
    kk0, kk1 = k0, k1
    for _ in range(10):
        hi0 = _mulhi64(_M0, x0)
        lo0 = _M0 * x0
        hi1 = _mulhi64(_M1, x2)
        lo1 = _M1 * x2
        x0, x1, x2, x3 = hi1 ^ x1 ^ kk0, lo1, hi0 ^ x3 ^ kk1, lo0
        kk0 = kk0 + _W0
        kk1 = kk1 + _W1
    return x0, x1, x2, x3


@njit(inline="always")
def _draw_u64(q, bidx, b0, b1, b2, b3, rnd, trial, cell, k0, k1):
    blk = q >> 2
    if blk != bidx:
        b0, b1, b2, b3 = _philox_block(U64(blk), rnd, trial, cell, k0, k1)
        bidx = blk
    lane = q & 3
    if lane == 0:
        u = b0
    elif lane == 1:
        u = b1
    elif lane == 2:
        u = b2
    else:
        u = b3
    return u, q + 1, bidx, b0, b1, b2, b3


@njit(cache=True, nogil=True)
def _run_chunk(
    d,
    tau,
    n_lanes,
    k0,
    k1,
    cell,
    trial0,
    bound,
    planes,
    data_mode,
    data_thr,
    meas_mode,
    meas_thr,
    inject_err,
    inject_meas,
    checkpoints,
    match_prio,
    attr_type,
    attr_dir,
    track_quiescence,
    audit,
):
    dd = d * d
    W = inject_err.shape[3]
    n_data = 2 * dd
    n_cp = checkpoints.shape[0]

    lane_mask = np.zeros(W, dtype=np.uint64)
    for l in range(n_lanes):
        lane_mask[l >> 6] |= _ONE << U64(l & 63)

    defect = np.zeros((d, d, W), dtype=np.uint64)
    fwd1 = np.zeros((4, d, d, W), dtype=np.uint64)
    fwd2 = np.zeros((4, d, d, W), dtype=np.uint64)
    anti1 = np.zeros((4, d, d, W), dtype=np.uint64)
    anti2 = np.zeros((4, d, d, W), dtype=np.uint64)
    st1 = np.zeros((4, planes, d, d, W), dtype=np.uint64)
    st2 = np.zeros((4, planes, d, d, W), dtype=np.uint64)
    err = inject_err.copy()
    err_flat = err.reshape(n_data, W)

    tmp = np.zeros((d, d, W), dtype=np.uint64)
    sel = np.zeros((4, d, d, W), dtype=np.uint64)
    fire = np.zeros((4, d, d, W), dtype=np.uint64)
    moves = np.zeros((8, d, d, W), dtype=np.uint64)
    rem = np.zeros((d, d, W), dtype=np.uint64)
    chosen = np.zeros(n_data, dtype=np.int64)

    cp_err = np.zeros((n_cp, 2, d, d, W), dtype=np.uint64)
    last_active = np.zeros(64 * W, dtype=np.int64)
    max_q = 0
    max_stack = 0

    deltas_r = (-1, 0, 1, 0)
    deltas_c = (0, 1, 0, -1)
    # fwd2 travelling along dir is sourced by fwd1 in the two orthogonal dirs
    orth_a = (1, 0, 1, 0)
    orth_b = (3, 2, 3, 2)

    thr_data_rej = (_ZERO - U64(n_data)) % U64(n_data)
    thr_meas_rej = (_ZERO - U64(dd)) % U64(dd)

    cp_next = 0
    for t in range(1, tau + 1):
        rnd = U64(t - 1)

        # -- noise + step 0: defect <- boundary(err) ^ measurement flips --
        if data_mode == 2:
            for s in range(n_data):
                for w in range(W):
                    err_flat[s, w] ^= lane_mask[w]
        for r in range(d):
            for c in range(d):
                cp_ = c - 1 if c > 0 else d - 1
                rp_ = r - 1 if r > 0 else d - 1
                for w in range(W):
                    defect[r, c, w] = (
                        err[0, r, c, w]
                        ^ err[0, r, cp_, w]
                        ^ err[1, r, c, w]
                        ^ err[1, rp_, c, w]
                    )
        if t == 1:
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        defect[r, c, w] ^= inject_meas[r, c, w]
        if meas_mode == 2:
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        defect[r, c, w] ^= lane_mask[w]
        if data_mode == 1 or meas_mode == 1:
            for lane in range(n_lanes):
                trial = U64(trial0) + U64(lane)
                wrd = lane >> 6
                bit = _ONE << U64(lane & 63)
                q = 0
                bidx = -1
                b0 = b1 = b2 = b3 = _ZERO
                if data_mode == 1:
                    # data: must be sampled before defects are formed, but
                    # edge flips commute with the XOR into err, so apply here
                    # and patch the two endpoint defects.
                    u, q, bidx, b0, b1, b2, b3 = _draw_u64(
                        q, bidx, b0, b1, b2, b3, rnd, trial, cell, k0, k1
                    )
                    k = 0
                    while k < data_thr.shape[0] and data_thr[k] <= u:
                        k += 1
                    for j in range(k):
                        while True:
                            u, q, bidx, b0, b1, b2, b3 = _draw_u64(
                                q, bidx, b0, b1, b2, b3, rnd, trial, cell, k0, k1
                            )
                            lo = u * U64(n_data)
                            if lo < thr_data_rej:
                                continue
                            idx = int(_mulhi64(u, U64(n_data)))
                            fresh = True
                            for jj in range(j):
                                if chosen[jj] == idx:
                                    fresh = False
                                    break
                            if fresh:
                                break
                        chosen[j] = idx
                        err_flat[idx, wrd] ^= bit
                        o = idx // dd
                        r = (idx % dd) // d
                        c = idx % d
                        defect[r, c, wrd] ^= bit
                        if o == 0:
                            defect[r, (c + 1) % d, wrd] ^= bit
                        else:
                            defect[(r + 1) % d, c, wrd] ^= bit
                if meas_mode == 1:
                    u, q, bidx, b0, b1, b2, b3 = _draw_u64(
                        q, bidx, b0, b1, b2, b3, rnd, trial, cell, k0, k1
                    )
                    k = 0
                    while k < meas_thr.shape[0] and meas_thr[k] <= u:
                        k += 1
                    for j in range(k):
                        while True:
                            u, q, bidx, b0, b1, b2, b3 = _draw_u64(
                                q, bidx, b0, b1, b2, b3, rnd, trial, cell, k0, k1
                            )
                            lo = u * U64(dd)
                            if lo < thr_meas_rej:
                                continue
                            idx = int(_mulhi64(u, U64(dd)))
                            fresh = True
                            for jj in range(j):
                                if chosen[jj] == idx:
                                    fresh = False
                                    break
                            if fresh:
                                break
                        chosen[j] = idx
                        defect[idx // d, idx % d, wrd] ^= bit

        # -- step 1: mutual-handshake matching --
        for r in range(d):
            for c in range(d):
                for w in range(W):
                    rem[r, c, w] = defect[r, c, w]
        for p in range(4):
            dd_ = match_prio[p]
            dr = deltas_r[dd_]
            dc = deltas_c[dd_]
            for r in range(d):
                rn = (r + dr) % d
                for c in range(d):
                    cn = (c + dc) % d
                    for w in range(W):
                        s = rem[r, c, w] & defect[rn, cn, w]
                        sel[dd_, r, c, w] = s
                        rem[r, c, w] &= ~s
        for dd_ in range(4):
            dr = deltas_r[dd_]
            dc = deltas_c[dd_]
            op = (dd_ + 2) % 4
            for r in range(d):
                rn = (r + dr) % d
                for c in range(d):
                    cn = (c + dc) % d
                    for w in range(W):
                        fire[dd_, r, c, w] = sel[dd_, r, c, w] & sel[op, rn, cn, w]
        for r in range(d):
            for c in range(d):
                for w in range(W):
                    err[0, r, c, w] ^= fire[1, r, c, w]
                    err[1, r, c, w] ^= fire[2, r, c, w]
                    defect[r, c, w] &= ~(
                        fire[0, r, c, w]
                        | fire[1, r, c, w]
                        | fire[2, r, c, w]
                        | fire[3, r, c, w]
                    )

        # -- step 2: fwd1 emission (+1-stack) and propagation --
        for dd_ in range(4):
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        v = defect[r, c, w] & ~fwd1[dd_, r, c, w]
                        if v != _ZERO:
                            lt = _ZERO
                            eq = _FULL
                            for p in range(planes - 1, -1, -1):
                                pl = st1[dd_, p, r, c, w]
                                if (bound >> p) & 1:
                                    lt |= eq & ~pl
                                    eq &= pl
                                else:
                                    eq &= ~pl
                            v &= lt
                            fwd1[dd_, r, c, w] |= v
                            carry = v
                            for p in range(planes):
                                if carry == _ZERO:
                                    break
                                tt = st1[dd_, p, r, c, w] & carry
                                st1[dd_, p, r, c, w] ^= carry
                                carry = tt
        for dd_ in range(4):
            dr = deltas_r[dd_]
            dc = deltas_c[dd_]
            for r in range(d):
                rs = (r - dr) % d
                for c in range(d):
                    cs = (c - dc) % d
                    for w in range(W):
                        tmp[r, c, w] = fwd1[dd_, rs, cs, w]
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        fwd1[dd_, r, c, w] = tmp[r, c, w]

        # -- step 3: fwd2 emission (+2-stack) and propagation --
        for dd_ in range(4):
            a = orth_a[dd_]
            b = orth_b[dd_]
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        v = (
                            defect[r, c, w] | fwd1[a, r, c, w] | fwd1[b, r, c, w]
                        ) & ~fwd2[dd_, r, c, w]
                        if v != _ZERO:
                            lt = _ZERO
                            eq = _FULL
                            for p in range(planes - 1, -1, -1):
                                pl = st2[dd_, p, r, c, w]
                                if (bound >> p) & 1:
                                    lt |= eq & ~pl
                                    eq &= pl
                                else:
                                    eq &= ~pl
                            v &= lt
                            fwd2[dd_, r, c, w] |= v
                            carry = v
                            for p in range(planes):
                                if carry == _ZERO:
                                    break
                                tt = st2[dd_, p, r, c, w] & carry
                                st2[dd_, p, r, c, w] ^= carry
                                carry = tt
        for dd_ in range(4):
            dr = deltas_r[dd_]
            dc = deltas_c[dd_]
            for r in range(d):
                rs = (r - dr) % d
                for c in range(d):
                    cs = (c - dc) % d
                    for w in range(W):
                        tmp[r, c, w] = fwd2[dd_, rs, cs, w]
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        fwd2[dd_, r, c, w] = tmp[r, c, w]

        # -- step 4: attraction (moves from pre-step state, XOR toggles) --
        for r in range(d):
            for c in range(d):
                for w in range(W):
                    rem[r, c, w] = defect[r, c, w]
        for p8 in range(8):
            ktype = attr_type[p8]
            dd_ = attr_dir[p8]
            if ktype == 1:
                for r in range(d):
                    for c in range(d):
                        for w in range(W):
                            m = rem[r, c, w] & fwd1[dd_, r, c, w]
                            moves[p8, r, c, w] = m
                            rem[r, c, w] &= ~m
            else:
                for r in range(d):
                    for c in range(d):
                        for w in range(W):
                            m = rem[r, c, w] & fwd2[dd_, r, c, w]
                            moves[p8, r, c, w] = m
                            rem[r, c, w] &= ~m
        for p8 in range(8):
            dd_ = attr_dir[p8]
            mu = (dd_ + 2) % 4  # move toward the source
            dr = deltas_r[mu]
            dc = deltas_c[mu]
            for r in range(d):
                rt = (r + dr) % d
                for c in range(d):
                    ct = (c + dc) % d
                    for w in range(W):
                        m = moves[p8, r, c, w]
                        if m != _ZERO:
                            if mu == 1:
                                err[0, r, c, w] ^= m
                            elif mu == 3:
                                err[0, r, ct, w] ^= m
                            elif mu == 2:
                                err[1, r, c, w] ^= m
                            else:
                                err[1, rt, c, w] ^= m
                            defect[r, c, w] ^= m
                            defect[rt, ct, w] ^= m

        # -- step 5: anti emission, then 3 x (propagate + recombine) --
        for dd_ in range(4):
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        nz = _ZERO
                        for p in range(planes):
                            nz |= st1[dd_, p, r, c, w]
                        v = ~defect[r, c, w] & nz & ~anti1[dd_, r, c, w]
                        if v != _ZERO:
                            borrow = v
                            for p in range(planes):
                                if borrow == _ZERO:
                                    break
                                tt = ~st1[dd_, p, r, c, w] & borrow
                                st1[dd_, p, r, c, w] ^= borrow
                                borrow = tt
                            anti1[dd_, r, c, w] |= v
        for r in range(d):
            for c in range(d):
                for w in range(W):
                    tmp[r, c, w] = ~(
                        fwd1[0, r, c, w]
                        | fwd1[1, r, c, w]
                        | fwd1[2, r, c, w]
                        | fwd1[3, r, c, w]
                    ) & ~defect[r, c, w]
        for dd_ in range(4):
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        nz = _ZERO
                        for p in range(planes):
                            nz |= st2[dd_, p, r, c, w]
                        v = tmp[r, c, w] & nz & ~anti2[dd_, r, c, w]
                        if v != _ZERO:
                            borrow = v
                            for p in range(planes):
                                if borrow == _ZERO:
                                    break
                                tt = ~st2[dd_, p, r, c, w] & borrow
                                st2[dd_, p, r, c, w] ^= borrow
                                borrow = tt
                            anti2[dd_, r, c, w] |= v
        for dd_ in range(4):
            for r in range(d):
                for c in range(d):
                    for w in range(W):
                        both = fwd1[dd_, r, c, w] & anti1[dd_, r, c, w]
                        fwd1[dd_, r, c, w] &= ~both
                        anti1[dd_, r, c, w] &= ~both
                        both = fwd2[dd_, r, c, w] & anti2[dd_, r, c, w]
                        fwd2[dd_, r, c, w] &= ~both
                        anti2[dd_, r, c, w] &= ~both
        for _sub in range(3):
            for dd_ in range(4):
                dr = deltas_r[dd_]
                dc = deltas_c[dd_]
                for r in range(d):
                    rs = (r - dr) % d
                    for c in range(d):
                        cs = (c - dc) % d
                        for w in range(W):
                            tmp[r, c, w] = anti1[dd_, rs, cs, w]
                for r in range(d):
                    for c in range(d):
                        for w in range(W):
                            anti1[dd_, r, c, w] = tmp[r, c, w]
                for r in range(d):
                    rs = (r - dr) % d
                    for c in range(d):
                        cs = (c - dc) % d
                        for w in range(W):
                            tmp[r, c, w] = anti2[dd_, rs, cs, w]
                for r in range(d):
                    for c in range(d):
                        for w in range(W):
                            anti2[dd_, r, c, w] = tmp[r, c, w]
            for dd_ in range(4):
                for r in range(d):
                    for c in range(d):
                        for w in range(W):
                            both = fwd1[dd_, r, c, w] & anti1[dd_, r, c, w]
                            fwd1[dd_, r, c, w] &= ~both
                            anti1[dd_, r, c, w] &= ~both
                            both = fwd2[dd_, r, c, w] & anti2[dd_, r, c, w]
                            fwd2[dd_, r, c, w] &= ~both
                            anti2[dd_, r, c, w] &= ~both

        # -- bookkeeping --
        if cp_next < n_cp and checkpoints[cp_next] == t:
            for o in range(2):
                for r in range(d):
                    for c in range(d):
                        for w in range(W):
                            cp_err[cp_next, o, r, c, w] = err[o, r, c, w]
            cp_next += 1

        if track_quiescence:
            for w in range(W):
                act = _ZERO
                for r in range(d):
                    for c in range(d):
                        act |= defect[r, c, w]
                        for dd_ in range(4):
                            act |= fwd1[dd_, r, c, w] | fwd2[dd_, r, c, w]
                            act |= anti1[dd_, r, c, w] | anti2[dd_, r, c, w]
                            for p in range(planes):
                                act |= st1[dd_, p, r, c, w] | st2[dd_, p, r, c, w]
                if act != _ZERO:
                    for l in range(64):
                        if (act >> U64(l)) & _ONE:
                            last_active[(w << 6) + l] = t

        if audit:
            for lane in range(n_lanes):
                wrd = lane >> 6
                sh = U64(lane & 63)
                for ktype in range(2):
                    for dd_ in range(4):
                        horizontal = dd_ == 1 or dd_ == 3  # E/W: per row
                        for line in range(d):
                            q_line = 0
                            for m_ in range(d):
                                r = line if horizontal else m_
                                c = m_ if horizontal else line
                                if ktype == 0:
                                    q_line += int((fwd1[dd_, r, c, wrd] >> sh) & _ONE)
                                    q_line -= int((anti1[dd_, r, c, wrd] >> sh) & _ONE)
                                    for p in range(planes):
                                        q_line -= int(
                                            (st1[dd_, p, r, c, wrd] >> sh) & _ONE
                                        ) << p
                                else:
                                    q_line += int((fwd2[dd_, r, c, wrd] >> sh) & _ONE)
                                    q_line -= int((anti2[dd_, r, c, wrd] >> sh) & _ONE)
                                    for p in range(planes):
                                        q_line -= int(
                                            (st2[dd_, p, r, c, wrd] >> sh) & _ONE
                                        ) << p
                            if abs(q_line) > max_q:
                                max_q = abs(q_line)
            for dd_ in range(4):
                for r in range(d):
                    for c in range(d):
                        for w in range(W):
                            for lane_bit in range(64):
                                sh = U64(lane_bit)
                                v1 = 0
                                v2 = 0
                                for p in range(planes):
                                    v1 |= int((st1[dd_, p, r, c, w] >> sh) & _ONE) << p
                                    v2 |= int((st2[dd_, p, r, c, w] >> sh) & _ONE) << p
                                if v1 > max_stack:
                                    max_stack = v1
                                if v2 > max_stack:
                                    max_stack = v2

    return cp_err, last_active, max_q, max_stack
