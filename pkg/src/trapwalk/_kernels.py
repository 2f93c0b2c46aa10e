"""Hot numeric kernels, written once and jitted when numba is active.

Every kernel is plain Python over int64/float64 scalars, numpy arrays, and
a counts mapping, so the same source runs interpreted under the fallback
backend.  Randomness goes through the counter leaves of _rng (seed, ctr),
which are bit-identical across backends; float accumulations may differ in
the last ulp between backends, never within one.

Layout conventions shared with the wrappers:
  - sites are packed ints (21 bits per signed coordinate, see lattice.py);
  - direction code 2a is +e_{a+1}, 2a+1 is -e_{a+1};
  - dir_delta[k] is the packed increment of direction k.
"""
from __future__ import annotations

import math

import numpy as np

from .backend import HAS_NUMBA, njit
from ._rng import rng_below, rng_uniform, site_u01

COORD_BITS = 21
COORD_MASK = (1 << COORD_BITS) - 1
COORD_OFF = 1 << 20

if HAS_NUMBA:
    from numba import types
    from numba.typed import Dict as _TypedDict

    @njit(cache=True)
    def new_counts():
        return _TypedDict.empty(key_type=types.int64, value_type=types.int64)

    @njit(cache=True)
    def new_weights():
        return _TypedDict.empty(key_type=types.int64, value_type=types.float64)

else:

    def new_counts():
        return {}

    def new_weights():
        return {}


@njit(cache=True)
def unpack_coord(packed, axis):
    return ((packed >> (COORD_BITS * axis)) & COORD_MASK) - COORD_OFF


@njit(cache=True)
def hdot(packed, d, h):
    s = 0.0
    for a in range(d):
        s += h[a] * unpack_coord(packed, a)
    return s


@njit(cache=True)
def l1_between(a, b, d):
    s = 0
    for ax in range(d):
        s += abs(unpack_coord(a, ax) - unpack_coord(b, ax))
    return s


@njit(cache=True)
def count_add(counts, key):
    """Insert one visit; 1 if the site is new to the range."""
    c = counts.get(key, 0)
    counts[key] = c + 1
    return 1 if c == 0 else 0


@njit(cache=True)
def count_remove(counts, key):
    """Remove one visit; 1 if the site left the range."""
    c = counts[key]
    if c == 1:
        counts.pop(key)
        return 1
    counts[key] = c - 1
    return 0


@njit(cache=True)
def site_occupied(packed, d, seed, p, lo, hi, over):
    """Field membership; sites outside [lo, hi] count as occupied."""
    for a in range(d):
        c = unpack_coord(packed, a)
        if c < lo[a] or c > hi[a]:
            return True
    n = len(over)
    if n > 0:
        i, j = 0, n
        while i < j:
            m = (i + j) // 2
            if over[m] < packed:
                i = m + 1
            else:
                j = m
        if i < n and over[i] == packed:
            return False
    return site_u01(seed, packed) >= p


@njit(cache=True)
def first_occupied(positions, d, seed, p, lo, hi, over):
    """First path index on an occupied site, or -1."""
    for t in range(len(positions)):
        if site_occupied(positions[t], d, seed, p, lo, hi, over):
            return t
    return -1


# ---------------------------------------------------------------------------
# free-walk sampling


@njit(cache=True)
def gen_steps(seed, ctr0, n, twod, out):
    for t in range(n):
        out[t] = rng_below(seed, ctr0 + t, twod)
    return ctr0 + n


@njit(cache=True)
def walk_range_size(seed, ctr0, n, twod, dir_delta, start_packed, buf):
    """Distinct-site count of one fresh walk; buf has length n+1."""
    pos = start_packed
    buf[0] = pos
    for t in range(n):
        pos += dir_delta[rng_below(seed, ctr0 + t, twod)]
        buf[t + 1] = pos
    buf.sort()
    r = 1
    for t in range(1, n + 1):
        if buf[t] != buf[t - 1]:
            r += 1
    return r


@njit(cache=True)
def plain_ranges(seed, nsamp, n, twod, dir_delta, start_packed, out):
    buf = np.empty(n + 1, np.int64)
    for s in range(nsamp):
        out[s] = walk_range_size(seed, s * n, n, twod, dir_delta, start_packed, buf)


@njit(cache=True)
def tilted_survival_logw(seed, nsamp, n, twod, dir_delta, start_packed, theta, logp, out):
    """Range-tilted sequential proposal for the survival weight.

    Proposal step weights: exp(theta) if the step enters a new site, else 1.
    Returns log(importance weight * p^range) per sample.
    """
    log_uni = -math.log(twod)
    et = math.exp(theta)
    for s in range(nsamp):
        visited = new_counts()
        visited[start_packed] = 1
        rng_sz = 1
        pos = start_packed
        iw = 0.0
        ctr = s * (2 * n)
        for t in range(n):
            wtot = 0.0
            for k in range(twod):
                q = pos + dir_delta[k]
                wtot += et if q not in visited else 1.0
            u = rng_uniform(seed, ctr) * wtot
            ctr += 1
            acc = 0.0
            k_sel = 0
            for k in range(twod):
                q = pos + dir_delta[k]
                acc += et if q not in visited else 1.0
                if u < acc:
                    k_sel = k
                    break
            pos += dir_delta[k_sel]
            wk = et if pos not in visited else 1.0
            iw += log_uni - math.log(wk / wtot)
            rng_sz += count_add(visited, pos)
        out[s] = iw + rng_sz * logp


@njit(cache=True)
def confined_steps(seed, n, twod, dir_delta, start_packed, center_packed, radius_sq, d, out):
    """Walk forced to stay in a Euclidean ball; used only as a chain init."""
    pos = start_packed
    ctr = 0
    for t in range(n):
        while True:
            k = rng_below(seed, ctr, twod)
            ctr += 1
            q = pos + dir_delta[k]
            sq = 0.0
            for a in range(d):
                diff = float(unpack_coord(q, a) - unpack_coord(center_packed, a))
                sq += diff * diff
            if sq <= radius_sq:
                out[t] = k
                pos = q
                break
    return pos


# ---------------------------------------------------------------------------
# exact enumeration (iterative DFS; range by linear scan over the prefix)


@njit(cache=True)
def enum_endpoint_weights(N, twod, dir_delta, start_packed, logp, h, d):
    """Sum of p^range * exp(<h, end>) per endpoint over all (2d)^N paths.

    Returned weights exclude the (2d)^-N path probability factor.
    """
    acc = new_weights()
    choice = np.zeros(N + 1, np.int64)
    pos = np.empty(N + 1, np.int64)
    isnew = np.zeros(N + 1, np.int64)
    pos[0] = start_packed
    rng_sz = 1
    t = 0
    while True:
        if t == N:
            w = math.exp(rng_sz * logp + hdot(pos[N], d, h))
            acc[pos[N]] = acc.get(pos[N], 0.0) + w
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        k = choice[t]
        if k == twod:
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        choice[t] = k + 1
        q = pos[t] + dir_delta[k]
        pos[t + 1] = q
        new = 1
        for j in range(t + 1):
            if pos[j] == q:
                new = 0
                break
        isnew[t + 1] = new
        rng_sz += new
        t += 1
        choice[t] = 0
    return acc


@njit(cache=True)
def enum_path_records(N, twod, dir_delta, start_packed, end_out, range_out):
    """Endpoint and range of every length-N path, in DFS order."""
    choice = np.zeros(N + 1, np.int64)
    pos = np.empty(N + 1, np.int64)
    isnew = np.zeros(N + 1, np.int64)
    pos[0] = start_packed
    rng_sz = 1
    t = 0
    idx = 0
    while True:
        if t == N:
            end_out[idx] = pos[N]
            range_out[idx] = rng_sz
            idx += 1
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        k = choice[t]
        if k == twod:
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        choice[t] = k + 1
        q = pos[t] + dir_delta[k]
        pos[t + 1] = q
        new = 1
        for j in range(t + 1):
            if pos[j] == q:
                new = 0
                break
        isnew[t + 1] = new
        rng_sz += new
        t += 1
        choice[t] = 0
    return idx


@njit(cache=True)
def enum_pinned_range_hist(N, twod, dir_delta, start_packed, x_packed):
    """Path-probability histogram of the range size over paths with S_N = x."""
    hist = new_weights()
    prob_leaf = math.exp(-N * math.log(twod))
    choice = np.zeros(N + 1, np.int64)
    pos = np.empty(N + 1, np.int64)
    isnew = np.zeros(N + 1, np.int64)
    pos[0] = start_packed
    rng_sz = 1
    t = 0
    while True:
        if t == N:
            if pos[N] == x_packed:
                key = rng_sz
                hist[key] = hist.get(key, 0.0) + prob_leaf
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        k = choice[t]
        if k == twod:
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        choice[t] = k + 1
        q = pos[t] + dir_delta[k]
        pos[t + 1] = q
        new = 1
        for j in range(t + 1):
            if pos[j] == q:
                new = 0
                break
        isnew[t + 1] = new
        rng_sz += new
        t += 1
        choice[t] = 0
    return hist


@njit(cache=True)
def enum_stopped_histogram(cap, Nmin, twod, dir_delta, start_packed, x_packed, logp):
    """Paths stopped at the first visit to x at time >= Nmin, depth <= cap.

    Returns (histogram, Z, hit_prob, tail_bound): histogram maps
    (tau << 32 | range) to path probability; Z accumulates
    p^range * (2d)^-tau over stopped paths; tail_bound accumulates
    p^range * (2d)^-cap over unstopped depth-cap prefixes, an exact upper
    bound on the weight the truncation discards.
    """
    hist = new_weights()
    z = 0.0
    hit_prob = 0.0
    tail_bound = 0.0
    log_uni = -math.log(twod)
    choice = np.zeros(cap + 1, np.int64)
    pos = np.empty(cap + 1, np.int64)
    isnew = np.zeros(cap + 1, np.int64)
    pos[0] = start_packed
    rng_sz = 1
    t = 0
    while True:
        stopped = t >= Nmin and pos[t] == x_packed
        if stopped or t == cap:
            if stopped:
                prob = math.exp(t * log_uni)
                key = (t << 32) | rng_sz
                hist[key] = hist.get(key, 0.0) + prob
                z += prob * math.exp(rng_sz * logp)
                hit_prob += prob
            else:
                tail_bound += math.exp(cap * log_uni + rng_sz * logp)
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        k = choice[t]
        if k == twod:
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        choice[t] = k + 1
        q = pos[t] + dir_delta[k]
        pos[t + 1] = q
        new = 1
        for j in range(t + 1):
            if pos[j] == q:
                new = 0
                break
        isnew[t + 1] = new
        rng_sz += new
        t += 1
        choice[t] = 0
    return hist, z, hit_prob, tail_bound


# ---------------------------------------------------------------------------
# crossing estimators (obstacles integrated out; range counts the origin)


@njit(cache=True)
def cross_enum(cap, twod, dir_delta, start_packed, x_packed, logp):
    """Exact E[p^range(tau_x)] over paths hitting x within cap steps.

    Returns (expectation_lower, hit_prob): both exact for the truncated
    family; the untruncated expectation exceeds the first by at most
    p^(|x|_1 + 1) * (1 - hit_prob).
    """
    expect = 0.0
    hit_prob = 0.0
    log_uni = -math.log(twod)
    choice = np.zeros(cap + 1, np.int64)
    pos = np.empty(cap + 1, np.int64)
    isnew = np.zeros(cap + 1, np.int64)
    pos[0] = start_packed
    rng_sz = 1
    t = 0
    while True:
        hit = pos[t] == x_packed and t > 0
        if hit or t == cap:
            if hit:
                prob = math.exp(t * log_uni)
                expect += prob * math.exp(rng_sz * logp)
                hit_prob += prob
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        k = choice[t]
        if k == twod:
            t -= 1
            if t < 0:
                break
            rng_sz -= isnew[t + 1]
            continue
        choice[t] = k + 1
        q = pos[t] + dir_delta[k]
        pos[t + 1] = q
        new = 1
        for j in range(t + 1):
            if pos[j] == q:
                new = 0
                break
        isnew[t + 1] = new
        rng_sz += new
        t += 1
        choice[t] = 0
    return expect, hit_prob


@njit(cache=True)
def cross_tilted(seed, nsamp, twod, dir_delta, start_packed, x_packed, logp, qw, maxlen, out):
    """Directionally tilted IS for the crossing weight; qw are the 2d
    unnormalized proposal step weights.  out[s] = 0 on no-hit within maxlen.
    """
    log_uni = -math.log(twod)
    qtot = 0.0
    for k in range(twod):
        qtot += qw[k]
    for s in range(nsamp):
        visited = new_counts()
        visited[start_packed] = 1
        rng_sz = 1
        pos = start_packed
        iw = 0.0
        val = 0.0
        ctr = s * maxlen
        for t in range(maxlen):
            u = rng_uniform(seed, ctr) * qtot
            ctr += 1
            acc = 0.0
            k_sel = 0
            for k in range(twod):
                acc += qw[k]
                if u < acc:
                    k_sel = k
                    break
            pos += dir_delta[k_sel]
            iw += log_uni - math.log(qw[k_sel] / qtot)
            rng_sz += count_add(visited, pos)
            if pos == x_packed:
                val = math.exp(iw + rng_sz * logp)
                break
        out[s] = val


@njit(cache=True)
def cross_split(seed, root_seeds, d, twod, dir_delta, start_packed, x_packed, p, maxsteps, popcap):
    """Fixed-factor-2 splitting on l1-progress levels with lazy field coins.

    Each initial replica owns a field seed; every descendant queries sites
    against its root's field, so revisits within a lineage are consistent
    with a single Bernoulli environment.  Returns (estimate, hits,
    truncated_mass): estimate is the hit-weight average per root.
    """
    n0 = len(root_seeds)
    cap = popcap
    pos = np.empty(cap, np.int64)
    root = np.empty(cap, np.int64)
    splits = np.empty(cap, np.int64)
    best = np.empty(cap, np.int64)
    steps_done = np.empty(cap, np.int64)
    stream = np.empty(cap, np.int64)
    npop = 0
    next_stream = 0
    total = 0.0
    hits = 0
    truncated = 0.0
    start_l1 = l1_between(start_packed, x_packed, d)
    for r in range(n0):
        # origin coin: the range counts the start site
        if site_u01(root_seeds[r], start_packed) >= p:
            continue
        if start_packed == x_packed:
            total += 1.0
            hits += 1
            continue
        pos[npop] = start_packed
        root[npop] = r
        splits[npop] = 0
        best[npop] = 0
        steps_done[npop] = 0
        stream[npop] = next_stream
        next_stream += 1
        npop += 1
    while npop > 0:
        i = npop - 1  # depth-first: work on the last replica
        alive = True
        while alive:
            if steps_done[i] >= maxsteps:
                truncated += 2.0 ** (-float(splits[i]))
                alive = False
                break
            ctr = stream[i] * (maxsteps + 1) + steps_done[i]
            k = rng_below(seed, ctr, twod)
            q = pos[i] + dir_delta[k]
            steps_done[i] += 1
            if site_u01(root_seeds[root[i]], q) >= p:
                alive = False
                break
            pos[i] = q
            if q == x_packed:
                total += 2.0 ** (-float(splits[i]))
                hits += 1
                alive = False
                break
            lvl = start_l1 - l1_between(q, x_packed, d)
            if lvl > best[i] and npop < cap:
                # clone: both children carry half the weight
                best[i] = lvl
                splits[i] += 1
                j = npop
                pos[j] = pos[i]
                root[j] = root[i]
                splits[j] = splits[i]
                best[j] = best[i]
                steps_done[j] = steps_done[i]
                stream[j] = next_stream
                next_stream += 1
                npop += 1
                i = j
        # drop the finished replica (it is at index i; swap-with-last)
        npop -= 1
        if i != npop:
            pos[i] = pos[npop]
            root[i] = root[npop]
            splits[i] = splits[npop]
            best[i] = best[npop]
            steps_done[i] = steps_done[npop]
            stream[i] = stream[npop]
    return total / n0, hits, truncated / n0


# ---------------------------------------------------------------------------
# killed-walk dynamic programming


@njit(cache=True)
def dp_run(f_ext, out_ext, nbr, n, inv2d):
    """n applications of the killed transition kernel.

    f_ext has one trailing zero slot that absent neighbors index into.
    Returns whichever buffer holds the result after n swaps.
    """
    ns = nbr.shape[0]
    deg = nbr.shape[1]
    a = f_ext
    b = out_ext
    for _ in range(n):
        for i in range(ns):
            s = 0.0
            for k in range(deg):
                s += a[nbr[i, k]]
            b[i] = s * inv2d
        b[ns] = 0.0
        t = a
        a = b
        b = t
    return a


# ---------------------------------------------------------------------------
# path-space Metropolis chain


@njit(cache=True)
def retrace(steps, pos, counts, dir_delta, i0):
    """Recompute pos[i0+1:] from steps, updating counts; returns the range
    delta.  Cost is O(suffix) count updates."""
    n = len(steps)
    delta = 0
    for j in range(i0 + 1, n + 1):
        delta -= count_remove(counts, pos[j])
    q = pos[i0]
    for j in range(i0 + 1, n + 1):
        q += dir_delta[steps[j - 1]]
        pos[j] = q
        delta += count_add(counts, q)
    return delta


@njit(cache=True)
def window_retrace(steps, pos, counts, dir_delta, wi, we):
    """Recompute interior positions of steps[wi:we] (net move unchanged)."""
    delta = 0
    for j in range(wi + 1, we):
        delta -= count_remove(counts, pos[j])
    q = pos[wi]
    for j in range(wi + 1, we):
        q += dir_delta[steps[j - 1]]
        pos[j] = q
        delta += count_add(counts, q)
    return delta


@njit(cache=True)
def rebuild_counts(steps, pos, counts, dir_delta):
    """Full recount after a wholesale steps rewrite; returns range size."""
    keys = np.empty(len(counts), np.int64)
    i = 0
    for k in counts:
        keys[i] = k
        i += 1
    for j in range(len(keys)):
        counts.pop(keys[j])
    q = pos[0]
    rng_sz = count_add(counts, q)
    for t in range(len(steps)):
        q += dir_delta[steps[t]]
        pos[t + 1] = q
        rng_sz += count_add(counts, q)
    return rng_sz


@njit(cache=True)
def mcmc_run(
    steps,
    pos,
    counts,
    state_i,
    dir_delta,
    h,
    d,
    logp,
    mix_cdf,
    n_moves,
    thin,
    seed,
    out_end,
    out_range,
    stats,
    scratch,
):
    """Advance the chain n_moves moves, recording every thin-th sample.

    state_i = [rng counter, range size, samples written].
    mix_cdf: cumulative probabilities over {flip, crankshaft, pivot,
    reversal}; pinned-endpoint chains zero out flip and pivot.
    stats rows: per move kind [proposed, accepted]; row 4 counts crankshaft
    fiber-sampling failures.  scratch holds old steps during proposals.
    Target density: p^range * exp(<h, endpoint>).
    """
    N = len(steps)
    twod = 2 * d
    ctr = state_i[0]
    rng_sz = state_i[1]
    nsamp = state_i[2]
    for mv in range(n_moves):
        u = rng_uniform(seed, ctr)
        ctr += 1
        if u < mix_cdf[0]:
            kind = 0
        elif u < mix_cdf[1]:
            kind = 1
        elif u < mix_cdf[2]:
            kind = 2
        else:
            kind = 3
        stats[kind, 0] += 1
        if kind == 0:
            # single-step flip; half the picks land in the last 64 steps,
            # where retrace is cheap (the proposal is state-independent,
            # hence still symmetric)
            if rng_uniform(seed, ctr) < 0.5:
                i = rng_below(seed, ctr + 1, N)
            else:
                w64 = 64 if N > 64 else N
                i = N - 1 - rng_below(seed, ctr + 1, w64)
            ctr += 2
            k_new = rng_below(seed, ctr, twod)
            ctr += 1
            k_old = steps[i]
            if k_new == k_old:
                stats[kind, 1] += 1
            else:
                hd_old = hdot(pos[N], d, h)
                steps[i] = k_new
                dr = retrace(steps, pos, counts, dir_delta, i)
                dlog = dr * logp + hdot(pos[N], d, h) - hd_old
                if dlog >= 0.0 or rng_uniform(seed, ctr) < math.exp(dlog):
                    ctr += 1
                    rng_sz += dr
                    stats[kind, 1] += 1
                else:
                    ctr += 1
                    steps[i] = k_old
                    retrace(steps, pos, counts, dir_delta, i)
        elif kind == 1:
            # crankshaft: rewrite a window keeping its net displacement
            w = 2 + rng_below(seed, ctr, 7)
            ctr += 1
            if w > N:
                w = N
            wi = rng_below(seed, ctr, N - w + 1)
            ctr += 1
            we = wi + w
            net = 0
            for j in range(wi, we):
                net += dir_delta[steps[j]]
                scratch[j] = steps[j]
            ok = False
            for _ in range(64):
                trial = 0
                for j in range(wi, we):
                    kj = rng_below(seed, ctr, twod)
                    ctr += 1
                    steps[j] = kj
                    trial += dir_delta[kj]
                if trial == net:
                    ok = True
                    break
            if not ok:
                # fiber sampling failed: stay put (a symmetric no-op)
                for j in range(wi, we):
                    steps[j] = scratch[j]
                stats[4, 0] += 1
            else:
                same = True
                for j in range(wi, we):
                    if steps[j] != scratch[j]:
                        same = False
                        break
                if same:
                    stats[kind, 1] += 1
                else:
                    dr = window_retrace(steps, pos, counts, dir_delta, wi, we)
                    dlog = dr * logp
                    if dlog >= 0.0 or rng_uniform(seed, ctr) < math.exp(dlog):
                        ctr += 1
                        rng_sz += dr
                        stats[kind, 1] += 1
                    else:
                        ctr += 1
                        for j in range(wi, we):
                            steps[j] = scratch[j]
                        window_retrace(steps, pos, counts, dir_delta, wi, we)
        elif kind == 2:
            # tail pivot: re-randomize the suffix; cut distribution mixes
            # uniform cuts with cuts in the last 64 steps (cheap, strong
            # endpoint moves), symmetric for the same reason as the flip
            if rng_uniform(seed, ctr) < 0.5:
                t0 = rng_below(seed, ctr + 1, N)
            else:
                w64 = 64 if N > 64 else N
                t0 = N - 1 - rng_below(seed, ctr + 1, w64)
            ctr += 2
            end_old = pos[N]
            hd_old = hdot(end_old, d, h)
            for j in range(t0, N):
                scratch[j] = steps[j]
                steps[j] = rng_below(seed, ctr, twod)
                ctr += 1
            dr = retrace(steps, pos, counts, dir_delta, t0)
            dlog = dr * logp + hdot(pos[N], d, h) - hd_old
            if dlog >= 0.0 or rng_uniform(seed, ctr) < math.exp(dlog):
                ctr += 1
                rng_sz += dr
                stats[kind, 1] += 1
            else:
                ctr += 1
                for j in range(t0, N):
                    steps[j] = scratch[j]
                retrace(steps, pos, counts, dir_delta, t0)
        else:
            # full reversal: endpoint and range size are both preserved
            for j in range(N):
                scratch[j] = steps[j]
            for j in range(N):
                steps[j] = scratch[N - 1 - j]
            rng_sz = rebuild_counts(steps, pos, counts, dir_delta)
            stats[kind, 1] += 1
        if thin > 0 and (mv + 1) % thin == 0:
            out_end[nsamp] = pos[N]
            out_range[nsamp] = rng_sz
            nsamp += 1
    state_i[0] = ctr
    state_i[1] = rng_sz
    state_i[2] = nsamp
