"""Compiled inner loop for the sequential click/highlight/rerank process.

One run is a single pass over N agents. Every agent draws a signal, a
clicking type, and a highlighting type from the run's own xoshiro256++
stream, sees the current ranking of her group, clicks exactly one item with
position-biased probabilities, possibly highlights it, and the popularity
tallies and rankings of both groups are updated before the next agent
arrives.

All randomness comes from explicit uint64[8] state vectors (words 0-3 drive
the main stream, words 4-7 the per-agent benchmark stream used only in the
heterogeneous-benchmark variant, so switching that variant on does not
perturb the main stream). Runs therefore depend only on their seed state,
never on scheduling, which makes ensembles bit-reproducible under any
thread count.

Per-agent draw order from the main stream is fixed: signal normal (2
uniforms), clicking-type uniform, highlighting-type uniform, click-choice
uniform, then M tie-break keys per recomputed ranking (one ranking when
lambda = 1, two otherwise). The count never depends on outcomes, so runs
with identical seeds stay aligned across eta values, which pairs ensemble
cells for low-noise comparisons.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

ERR_OK = 0
ERR_RESAMPLE = 1

# Degenerate item sets are redrawn wholesale at most this many times.
MAX_ITEM_REDRAWS = 100

_SH11 = np.uint64(11)
_SH17 = np.uint64(17)
_ROT23 = np.uint64(23)
_ROT41 = np.uint64(41)
_ROT45 = np.uint64(45)
_ROT19 = np.uint64(19)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def _next_u64(s):
    # xoshiro256++ step on state s[0..3]
    s0 = s[0]
    s1 = s[1]
    s2 = s[2]
    s3 = s[3]
    tmp = s0 + s3
    out = ((tmp << _ROT23) | (tmp >> _ROT41)) + s0
    t = s1 << _SH17
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << _ROT45) | (s3 >> _ROT19)
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return out


@njit(cache=True, inline="always")
def _unif(s):
    # uniform double in [0, 1) from the top 53 bits
    return (_next_u64(s) >> _SH11) * _INV53


@njit(cache=True, inline="always")
def _normal(s):
    # Box-Muller, cosine branch only; always consumes exactly 2 uniforms
    u1 = 1.0 - _unif(s)  # (0, 1], keeps log finite
    u2 = _unif(s)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


@njit(cache=True, inline="always")
def _rerank(kappa_g, keys, order, ranks_g, m_items):
    # Sort items by popularity descending; ties take fresh uniform keys, so
    # every tied subset is an independent uniform shuffle. Rank 1 = most
    # popular; comparisons on kappa are exact.
    for i in range(m_items):
        kx = kappa_g[i]
        ux = keys[i]
        j = i - 1
        while j >= 0:
            o = order[j]
            ko = kappa_g[o]
            if ko > kx or (ko == kx and keys[o] < ux):
                break
            order[j + 1] = o
            j -= 1
        order[j + 1] = i
    for p in range(m_items):
        ranks_g[order[p]] = p + 1


@njit(cache=True)
def _run_core(
    state,  # uint64[8]
    m_items,
    n_agents,
    theta,
    theta_hat,
    sigma_x,
    sigma_y,
    p_c,
    p_ce,  # p_C + p_E
    gamma_c,
    gamma_e,
    gamma_i,
    beta,
    eta,
    lam,
    flat,
    p_a_const,
    alpha,
    center_truth,
    het,
    sigma_bench,
    y,  # float64[M] out
    ysign,  # int8[M] out
    ev_item,  # int32[N] out
    ev_group,  # int8[N] out
    ev_high,  # uint8[N] out
    ev_rank,  # int32[N] out
    kappa,  # float64[2, M] out
    clicks,  # int64[2, M] out
    highs,  # int64[2, M] out
    ranks,  # int64[2, M] out
):
    main = state[:4]
    bench = state[4:]

    # --- world: item signals, redrawn until both benchmark signs appear ---
    mplus = 0
    ok = False
    for _ in range(MAX_ITEM_REDRAWS + 1):
        mplus = 0
        for m in range(m_items):
            v = theta + sigma_y * _normal(main)
            y[m] = v
            if v >= theta_hat:
                mplus += 1
        if 0 < mplus < m_items:
            ok = True
            break
    if not ok:
        return ERR_RESAMPLE
    for m in range(m_items):
        ysign[m] = 1 if y[m] >= theta_hat else -1
    mminus = m_items - mplus

    betapow = np.empty(m_items, dtype=np.float64)
    betapow[0] = 1.0
    for k in range(1, m_items):
        betapow[k] = betapow[k - 1] * beta

    keys = np.empty(m_items, dtype=np.float64)
    order = np.empty(m_items, dtype=np.int64)
    w = np.empty(m_items, dtype=np.float64)
    isign = np.empty(m_items, dtype=np.int8)

    for g in range(2):
        for m in range(m_items):
            kappa[g, m] = 0.0
            clicks[g, m] = 0
            highs[g, m] = 0

    # initial rankings: uniform shuffle(s) of the all-tied zero popularity
    for m in range(m_items):
        keys[m] = _unif(main)
    _rerank(kappa[0], keys, order, ranks[0], m_items)
    if lam == 1.0:
        for m in range(m_items):
            ranks[1, m] = ranks[0, m]
    else:
        for m in range(m_items):
            keys[m] = _unif(main)
        _rerank(kappa[1], keys, order, ranks[1], m_items)

    half_sx = 0.5 * sigma_x
    inv_sx = 1.0 / sigma_x
    inv_2a = 1.0 / (2.0 * alpha)

    for n in range(n_agents):
        x = theta + sigma_x * _normal(main)
        if het:
            th_n = theta + sigma_bench * _normal(bench)
        else:
            th_n = theta_hat
        asign = 1 if x >= th_n else -1
        g = 1 if asign > 0 else 0

        u_type = _unif(main)
        if u_type < p_c:
            gam = gamma_c
        elif u_type < p_ce:
            gam = gamma_e
        else:
            gam = gamma_i

        u_act = _unif(main)
        if flat:
            p_a = p_a_const
        else:
            c = theta if center_truth else th_n
            t = (x - c) * inv_sx
            p_a = 1.0 - math.exp(-((t * t) ** alpha) * inv_2a)
        active = u_act < p_a

        if het:
            mp = 0
            for m in range(m_items):
                if y[m] >= th_n:
                    isign[m] = 1
                    mp += 1
                else:
                    isign[m] = -1
            mm = m_items - mp
            sgn = isign
        else:
            mp = mplus
            mm = mminus
            sgn = ysign

        # position-biased click distribution over items
        total = 0.0
        for m in range(m_items):
            sm = sgn[m]
            cls = mp if sm > 0 else mm
            gm = gam if sm == asign else 1.0 - gam
            wm = betapow[m_items - ranks[g, m]] * (gm / cls)
            w[m] = wm
            total += wm
        u_click = _unif(main) * total
        item = m_items - 1
        acc = 0.0
        for m in range(m_items):
            acc += w[m]
            if u_click < acc:
                item = m
                break

        hl = active and (abs(y[item] - x) <= half_sx)
        inc = 1.0 + eta if hl else 1.0
        kappa[g, item] += inc
        kappa[1 - g, item] += lam * inc
        clicks[g, item] += 1
        if hl:
            highs[g, item] += 1

        ev_item[n] = item
        ev_group[n] = g
        ev_high[n] = 1 if hl else 0
        ev_rank[n] = ranks[g, item]  # rank the agent saw

        # rerank both groups; lambda = 1 keeps one shared ranking (and one
        # shared set of tie-break draws, preserving the single-ranking
        # reduction bit for bit)
        for m in range(m_items):
            keys[m] = _unif(main)
        _rerank(kappa[0], keys, order, ranks[0], m_items)
        if lam == 1.0:
            for m in range(m_items):
                ranks[1, m] = ranks[0, m]
        else:
            for m in range(m_items):
                keys[m] = _unif(main)
            _rerank(kappa[1], keys, order, ranks[1], m_items)

    return ERR_OK


@njit(cache=True)
def run_trace(
    state,
    m_items,
    n_agents,
    theta,
    theta_hat,
    sigma_x,
    sigma_y,
    p_c,
    p_ce,
    gamma_c,
    gamma_e,
    gamma_i,
    beta,
    eta,
    lam,
    flat,
    p_a_const,
    alpha,
    center_truth,
    het,
    sigma_bench,
):
    """Run once, returning the full event trace and final state."""
    y = np.empty(m_items, dtype=np.float64)
    ysign = np.empty(m_items, dtype=np.int8)
    ev_item = np.empty(n_agents, dtype=np.int32)
    ev_group = np.empty(n_agents, dtype=np.int8)
    ev_high = np.empty(n_agents, dtype=np.uint8)
    ev_rank = np.empty(n_agents, dtype=np.int32)
    kappa = np.empty((2, m_items), dtype=np.float64)
    clicks = np.empty((2, m_items), dtype=np.int64)
    highs = np.empty((2, m_items), dtype=np.int64)
    ranks = np.empty((2, m_items), dtype=np.int64)
    err = _run_core(
        state, m_items, n_agents, theta, theta_hat, sigma_x, sigma_y,
        p_c, p_ce, gamma_c, gamma_e, gamma_i, beta, eta, lam,
        flat, p_a_const, alpha, center_truth, het, sigma_bench,
        y, ysign, ev_item, ev_group, ev_high, ev_rank,
        kappa, clicks, highs, ranks,
    )
    return err, y, ysign, ev_item, ev_group, ev_high, ev_rank, kappa, clicks, highs, ranks


@njit(cache=True, parallel=True)
def run_ensemble_kernel(
    states,  # uint64[T, 8]
    m_items,
    n_agents,
    window,
    theta,
    theta_hat,
    sigma_x,
    sigma_y,
    p_c,
    p_ce,
    gamma_c,
    gamma_e,
    gamma_i,
    beta,
    eta,
    lam,
    flat,
    p_a_const,
    alpha,
    center_truth,
    het,
    sigma_bench,
    win_item,  # int32[T, W] out
    win_group,  # int8[T, W] out
    win_high,  # uint8[T, W] out
    win_rank,  # int32[T, W] out
    ys,  # float64[T, M] out
    fin_kappa,  # float64[T, 2, M] out
    fin_clicks,  # int64[T, 2, M] out
    fin_highs,  # int64[T, 2, M] out
    fin_ranks,  # int64[T, 2, M] out
    err,  # int64[T] out
):
    """Independent runs in parallel; each run owns its seed state and output
    slots, so results do not depend on the thread count."""
    n_runs = states.shape[0]
    for t in prange(n_runs):
        y = np.empty(m_items, dtype=np.float64)
        ysign = np.empty(m_items, dtype=np.int8)
        ev_item = np.empty(n_agents, dtype=np.int32)
        ev_group = np.empty(n_agents, dtype=np.int8)
        ev_high = np.empty(n_agents, dtype=np.uint8)
        ev_rank = np.empty(n_agents, dtype=np.int32)
        kappa = np.empty((2, m_items), dtype=np.float64)
        clicks = np.empty((2, m_items), dtype=np.int64)
        highs = np.empty((2, m_items), dtype=np.int64)
        ranks = np.empty((2, m_items), dtype=np.int64)
        e = _run_core(
            states[t], m_items, n_agents, theta, theta_hat, sigma_x, sigma_y,
            p_c, p_ce, gamma_c, gamma_e, gamma_i, beta, eta, lam,
            flat, p_a_const, alpha, center_truth, het, sigma_bench,
            y, ysign, ev_item, ev_group, ev_high, ev_rank,
            kappa, clicks, highs, ranks,
        )
        err[t] = e
        if e == ERR_OK:
            base = n_agents - window
            for j in range(window):
                win_item[t, j] = ev_item[base + j]
                win_group[t, j] = ev_group[base + j]
                win_high[t, j] = ev_high[base + j]
                win_rank[t, j] = ev_rank[base + j]
            for m in range(m_items):
                ys[t, m] = y[m]
                for g in range(2):
                    fin_kappa[t, g, m] = kappa[g, m]
                    fin_clicks[t, g, m] = clicks[g, m]
                    fin_highs[t, g, m] = highs[g, m]
                    fin_ranks[t, g, m] = ranks[g, m]
