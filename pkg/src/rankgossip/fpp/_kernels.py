"""Compiled event loops for one percolated item.

All kernels seed numba's generator themselves, so a call is a pure function
of its arguments.  Exponential clocks are drawn at unit rate and divided by
the channel rate, which makes a global rate change a pathwise time change.
The deviating agent (ego) never shares a random stream with anyone else:
its clocks are either drawn unconditionally or are unit-exponential
thresholds against its integrated hazard.
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True, nogil=True)
def _push(ht, hv, size, t, v):
    i = size
    while i > 0:
        p = (i - 1) >> 1
        if ht[p] < t or (ht[p] == t and hv[p] < v):
            break
        ht[i] = ht[p]
        hv[i] = hv[p]
        i = p
    ht[i] = t
    hv[i] = v
    return size + 1


@njit(cache=True, nogil=True)
def _pop(ht, hv, size):
    size -= 1
    if size == 0:
        return 0
    t = ht[size]
    v = hv[size]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and (ht[c + 1] < ht[c] or (ht[c + 1] == ht[c] and hv[c + 1] < hv[c])):
            c += 1
        if t < ht[c] or (t == ht[c] and v < hv[c]):
            break
        ht[i] = ht[c]
        hv[i] = hv[c]
        i = c
    ht[i] = t
    hv[i] = v
    return size


@njit(cache=True, nogil=True)
def complete_run(n, theta, phi, ego, source, seed, want_ids):
    """Complete graph, everyone calls a uniform other agent at rate ``theta``.

    Exchangeability lets the non-ego agents be tracked by count; identities
    are a uniform random informing order.  Ego (``ego >= 0``) calls at rate
    ``phi`` and is informed when its integrated hazard ``phi * m / (n-1)``
    crosses a unit exponential threshold.

    Returns (times, order, event_times, n_events).
    """
    np.random.seed(seed)
    res_e = np.random.exponential()
    times = np.full(n, INF)
    order = np.empty(n, np.int64)
    evt = np.empty(n, np.float64)
    perm = np.empty(0, np.int64)
    if want_ids:
        cnt = 0
        perm = np.empty(n, np.int64)
        for a in range(n):
            if a != ego and a != source:
                perm[cnt] = a
                cnt += 1
        perm = perm[:cnt]
        np.random.shuffle(perm)
    others = n - 1 if ego >= 0 else n
    denom = n - 1.0
    t = 0.0
    q = 0
    times[source] = 0.0
    order[0] = source
    evt[0] = 0.0
    q = 1
    ego_inf = source == ego
    m = 0 if ego_inf else 1
    k = 0
    res_o = np.random.exponential()
    while m < others or (ego >= 0 and not ego_inf):
        e_flag = 1.0 if (ego >= 0 and ego_inf) else 0.0
        u = others - m
        rate_o = theta * u * (m + e_flag) / denom
        rate_e = phi * m / denom if (ego >= 0 and not ego_inf) else 0.0
        dt_o = res_o / rate_o if rate_o > 0 else INF
        dt_e = res_e / rate_e if rate_e > 0 else INF
        if dt_o == INF and dt_e == INF:
            break
        if dt_e < dt_o:
            t += dt_e
            res_o -= rate_o * dt_e
            ego_inf = True
            times[ego] = t
            order[q] = ego
            evt[q] = t
            q += 1
        else:
            t += dt_o
            res_e -= rate_e * dt_o
            m += 1
            if want_ids:
                a = perm[k]
                times[a] = t
                order[q] = a
            else:
                order[q] = -1
            k += 1
            evt[q] = t
            q += 1
            res_o = np.random.exponential()
    return times, order[:q], evt[:q], q


@njit(cache=True, nogil=True)
def complete_regular_run(n, theta, source, seed):
    """Complete graph with calls at ``U_i + k/theta`` (uniform random phase)."""
    np.random.seed(seed)
    period = 1.0 / theta
    times = np.full(n, INF)
    ht = np.empty(n, np.float64)
    hv = np.empty(n, np.int64)
    size = 0
    for a in range(n):
        ph = np.random.random() * period
        if a != source:
            size = _push(ht, hv, size, ph, a)
    times[source] = 0.0
    while size > 0:
        t = ht[0]
        a = hv[0]
        size = _pop(ht, hv, size)
        j = np.random.randint(n - 1)
        if j >= a:
            j += 1
        if times[j] < t:
            times[a] = t
        else:
            size = _push(ht, hv, size, t + period, a)
    return times


@njit(cache=True, nogil=True)
def torus_dist(u, v, N):
    ux, uy = u // N, u % N
    vx, vy = v // N, v % N
    dx = abs(ux - vx)
    dy = abs(uy - vy)
    return min(dx, N - dx) + min(dy, N - dy)


@njit(cache=True, nogil=True)
def lattice_run(N, odx, ody, oshell, rate_o, rate_e,
                fdx, fdy, far_o, far_e,
                ego, source, seed, ref, d_group, far_group,
                stop_mode, watch, t_max):
    """First-passage percolation on the N x N torus.

    Agent ``j`` pulls from each agent at offset ``(odx[k], ody[k])`` at the
    per-target rate ``rate_o[oshell[k]]`` (``rate_e`` for ego).  With
    ``far_o > 0`` or ``far_e > 0`` every agent additionally pulls from each
    agent outside the window ``(fdx, fdy)`` at that per-target rate.

    Near channels use lazily drawn exponential edge clocks in Dijkstra
    order; the far channel for non-ego agents is one aggregated clock
    redrawn after every event and its target is picked by rejection.

    ``stop_mode``: 0 run to completion, 1 stop once every ``watch`` vertex is
    informed, 2 stop at the first informed ``watch`` vertex.  Events later
    than ``t_max`` are not executed.

    Each event also gets a group index relative to ``ref``: the distance
    shell ``d - 1`` for ``1 <= d <= d_group``, ``d_group`` for farther
    vertices when ``far_group`` is set, otherwise -1.

    Returns (times, order, event_times, groups, n_events).
    """
    np.random.seed(seed)
    NN = N * N
    noff = odx.shape[0]
    nfoff = fdx.shape[0]
    has_far = far_o > 0 or far_e > 0
    res_e = np.random.exponential()

    informed = np.zeros(NN, np.bool_)
    times = np.full(NN, INF)
    best = np.full(NN, INF)
    order = np.empty(NN, np.int64)
    evt = np.empty(NN, np.float64)
    grp = np.empty(NN, np.int16)
    cap = NN * max(noff, 1) + 2
    ht = np.empty(cap, np.float64)
    hv = np.empty(cap, np.int64)
    hsize = 0

    # far-channel bookkeeping: uninformed non-ego list, informed-nearby counts
    nearcnt = np.zeros(NN, np.int64)
    ulist = np.empty(NN, np.int64)
    upos = np.full(NN, -1, np.int64)
    ulen = 0
    ssum = 0
    if has_far:
        for v in range(NN):
            if v != ego:
                ulist[ulen] = v
                upos[v] = ulen
                ulen += 1

    n_watch = 0
    for v in range(watch.shape[0]):
        if watch[v]:
            n_watch += 1
    got_watch = 0

    best[source] = 0.0
    hsize = _push(ht, hv, hsize, 0.0, source)
    q = 0
    tcur = 0.0
    ego_uninf = ego >= 0
    while True:
        while hsize > 0 and informed[hv[0]]:
            hsize = _pop(ht, hv, hsize)
        t_near = ht[0] if hsize > 0 else INF
        t_far = INF
        if has_far and q > 0:
            lam = far_o * (ulen * q - ssum)
            if lam > 0:
                t_far = tcur + np.random.exponential() / lam
        t_ego = INF
        h_e = 0.0
        if has_far and ego_uninf and far_e > 0:
            h_e = far_e * (q - nearcnt[ego])
            if h_e > 0:
                t_ego = tcur + res_e / h_e
        if t_near == INF and t_far == INF and t_ego == INF:
            break
        if t_ego < t_near and t_ego < t_far:
            v = ego
            t = t_ego
        elif t_far < t_near:
            t = t_far
            while True:
                k = np.random.randint(ulen)
                v = ulist[k]
                if np.random.random() * q < q - nearcnt[v]:
                    break
        else:
            t = t_near
            v = hv[0]
            hsize = _pop(ht, hv, hsize)
        if t > t_max:
            break
        if ego_uninf and h_e > 0:
            res_e -= h_e * (t - tcur)
        informed[v] = True
        times[v] = t
        order[q] = v
        evt[q] = t
        g = -1
        if ref >= 0:
            d = torus_dist(v, ref, N)
            if d >= 1 and d <= d_group:
                g = d - 1
            elif d > d_group and far_group:
                g = d_group
        grp[q] = g
        q += 1
        tcur = t
        if v == ego:
            ego_uninf = False

        if has_far:
            p = upos[v]
            if p >= 0:
                ssum -= nearcnt[v]
                last = ulist[ulen - 1]
                ulist[p] = last
                upos[last] = p
                upos[v] = -1
                ulen -= 1
            vx, vy = v // N, v % N
            for k in range(nfoff):
                j = ((vx + fdx[k]) % N) * N + (vy + fdy[k]) % N
                nearcnt[j] += 1
                if upos[j] >= 0:
                    ssum += 1

        if n_watch > 0 and watch[v]:
            got_watch += 1
            if stop_mode == 2 or (stop_mode == 1 and got_watch == n_watch):
                break

        vx, vy = v // N, v % N
        for k in range(noff):
            j = ((vx + odx[k]) % N) * N + (vy + ody[k]) % N
            if informed[j]:
                continue
            if j == ego:
                e = np.random.exponential()
                r = rate_e[oshell[k]]
            else:
                r = rate_o[oshell[k]]
                if r <= 0:
                    continue
                e = np.random.exponential()
            if r <= 0:
                continue
            cand = t + e / r
            if cand < best[j]:
                best[j] = cand
                hsize = _push(ht, hv, hsize, cand, j)
    return times, order[:q], evt[:q], grp[:q], q


@njit(cache=True, nogil=True)
def conditional_reward(times, groups, starts, rank0, weights, phi, rtab, want_grad):
    """Expected reward to ego given each ego-free path.

    Path ``p`` holds events ``starts[p]:starts[p+1]`` of the percolation run
    in which ego never receives; ``rank0[p]`` events precede the stored ones
    and none of them exposes ego.  After a stored event in group ``g`` ego's
    hazard rises by ``phi[g] * weights[g]``.  Ego informed in the gap after
    the ``Q``-th informed agent has rank ``Q + 1`` and earns ``rtab[Q + 1]``.

    Summation by parts gives ``rtab[first] + sum_i (rr_i - rr_{i-1}) S_i``
    with ``S_i`` ego's survival at the i-th event, so the gradient in ``phi``
    only needs the cumulative exposure at each event.
    """
    npath = starts.shape[0] - 1
    G = weights.shape[0]
    nmax = rtab.shape[0] - 1
    out = np.zeros(npath)
    grad = np.zeros((npath if want_grad else 1, G))
    cexp = np.zeros(G)
    cntw = np.zeros(G)
    for p in range(npath):
        a = starts[p]
        b = starts[p + 1]
        if b <= a:
            continue
        for g in range(G):
            cexp[g] = 0.0
            cntw[g] = 0.0
        g0 = groups[a]
        h = 0.0
        if g0 >= 0:
            cntw[g0] += weights[g0]
            h += phi[g0] * weights[g0]
        lam = 0.0
        idx = min(rank0[p] + 2, nmax)
        rr_cur = rtab[idx]
        acc = rr_cur
        for i in range(a + 1, b):
            dt = times[i] - times[i - 1]
            lam += h * dt
            for g in range(G):
                cexp[g] += cntw[g] * dt
            idx = min(rank0[p] + (i - a) + 2, nmax)
            rr_next = rtab[idx]
            diff = rr_next - rr_cur
            if diff != 0.0:
                s = np.exp(-lam)
                acc += diff * s
                if want_grad:
                    for g in range(G):
                        grad[p, g] -= diff * s * cexp[g]
            rr_cur = rr_next
            g0 = groups[i]
            if g0 >= 0:
                cntw[g0] += weights[g0]
                h += phi[g0] * weights[g0]
        out[p] = acc
    return out, grad
