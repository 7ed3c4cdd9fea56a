"""Compiled inner loop: virtual queues, slot planning, grant execution, controller.

All state lives in flat numpy arrays bundled in the ``Fabric`` namedtuple so
that numba can compile the slot loop. Packets are entries of a fixed pool;
each virtual queue (holder, destination) is a singly linked list through
``nxt``. Per-slot resource usage is tracked with stamps instead of resets:
an entry counts for the current plan only if its stamp equals the plan's.

Ports, positions and wavelengths are 1-indexed, racks 0-indexed.
"""
from collections import namedtuple

import numpy as np
from numba import njit

# dims layout
S_, P_, M_, W_, F_, FI_, TXA, RXA, TXE, RXE, PKT, CAP, DMAX = range(13)

PATH_INTRA = 0
PATH_INTER = 1

# grant row layout
G_HOLDER, G_DST, G_PATH, G_WL, G_TX, G_RECV, G_SPORT, G_DPORT, G_CLUSTER, G_PKT, G_INTER = range(11)
G_COLS = 11

# statistics layout
ST_GEN, ST_DEL, ST_DROP, ST_RELAY, ST_SUSP, ST_LATSUM, ST_WINSUM, ST_WINCNT, ST_NEV = range(9)
ST_LEN = 9

# controller layout
C_COUNTER, C_SUSP_LEFT, C_SUSPENDED, C_ENABLED, C_SI, C_RT = range(6)
C_LEN = 6
TICK_SUSPENDED, TICK_IDLE, TICK_SAMPLE = 0, 1, 2

# metric record layout
R_SLOT, R_LATSUM, R_DEL, R_WINSUM, R_WINCNT, R_LINTRA, R_LINTER, R_DROP, R_GEN, R_SUSP, R_NEV = range(11)
R_COLS = 11

# event row layout
E_SLOT, E_LINTRA, E_LINTER, E_RT = range(4)
E_COLS = 4

Fabric = namedtuple("Fabric", [
    "dims",
    # cluster assignment
    "cluster_of", "position_of", "rack_at",
    # routing tables
    "intra_route", "direct", "direct_n", "relay_c", "relay_pos",
    # virtual queues
    "head", "tail", "qlen", "act", "act_n", "act_idx",
    # packet pool
    "nxt", "p_id", "p_src", "p_dst", "p_arr", "p_hops", "free", "free_top",
    # per-rack counters
    "buffered", "accepted", "dropped", "dequeued",
    # round-robin state
    "cur_intra", "cur_direct", "cur_relay", "rack_offset", "queue_offset",
    # per-plan usage, stamped
    "stamp", "u_rack", "u_intra_tx", "u_intra_rx", "u_inter_tx", "u_inter_rx", "u_reserved",
    "u_intra_wl", "u_inter_wl", "u_inter_pair", "u_inter_pair_n", "u_intra_pair",
    "u_intra_pair_n",
    # scratch
    "w_rack", "w_wait", "w_start", "w_n", "e_dst", "e_ptr", "e_open", "buf_c", "buf_r",
    "grants",
])


def make_fabric(n_clusters, racks_per_cluster, n_wavelengths, tx_intra, rx_intra, tx_inter,
                rx_inter, packet_size, buffer_capacity):
    P, M, W = n_clusters, racks_per_cluster, n_wavelengths
    S = P * M
    F, FI = W // P, W // M
    i64 = np.int64

    intra_route = np.zeros((M + 1, M + 1, FI), dtype=i64)
    for a in range(1, M + 1):
        for b in range(1, M + 1):
            first = (b - a) % M + 1
            intra_route[a, b, :] = np.arange(first, W + 1, M)
    band = W // M
    direct_lists = {}
    dmax = 1
    relay_c = np.zeros((P + 1, P + 1, F), dtype=i64)
    relay_pos = np.zeros((P + 1, P + 1, F), dtype=i64)
    for ci in range(1, P + 1):
        for cj in range(1, P + 1):
            route = np.arange((cj - ci) % P + 1, W + 1, P)
            relay_c[ci, cj, :] = route
            relay_pos[ci, cj, :] = (route - 1) // band + 1
            for pos in range(1, M + 1):
                lo, hi = (pos - 1) * band + 1, pos * band
                hit = [int(c) for c in route if lo <= c <= hi]
                direct_lists[(ci, cj, pos)] = hit
                dmax = max(dmax, len(hit))
    direct = np.zeros((P + 1, P + 1, M + 1, dmax), dtype=i64)
    direct_n = np.zeros((P + 1, P + 1, M + 1), dtype=i64)
    for (ci, cj, pos), hit in direct_lists.items():
        direct_n[ci, cj, pos] = len(hit)
        direct[ci, cj, pos, :len(hit)] = hit

    cap_packets = buffer_capacity // packet_size if packet_size > 0 else 0
    pool = S * cap_packets + 1
    dims = np.array([S, P, M, W, F, FI, tx_intra, rx_intra, tx_inter, rx_inter,
                     packet_size, buffer_capacity, dmax], dtype=i64)
    cluster_of = np.array([r // M + 1 for r in range(S)], dtype=i64)
    position_of = np.array([r % M + 1 for r in range(S)], dtype=i64)
    rack_at = np.full((P + 1, M + 1), -1, dtype=i64)
    for r in range(S):
        rack_at[cluster_of[r], position_of[r]] = r
    gmax = S * (tx_intra + tx_inter)
    return Fabric(
        dims=dims,
        cluster_of=cluster_of, position_of=position_of, rack_at=rack_at,
        intra_route=intra_route, direct=direct, direct_n=direct_n,
        relay_c=relay_c, relay_pos=relay_pos,
        head=np.full((S, S), -1, dtype=i64), tail=np.full((S, S), -1, dtype=i64),
        qlen=np.zeros((S, S), dtype=i64), act=np.zeros((S, S), dtype=i64),
        act_n=np.zeros(S, dtype=i64), act_idx=np.full((S, S), -1, dtype=i64),
        nxt=np.full(pool, -1, dtype=i64), p_id=np.zeros(pool, dtype=i64),
        p_src=np.zeros(pool, dtype=i64), p_dst=np.zeros(pool, dtype=i64),
        p_arr=np.zeros(pool, dtype=i64), p_hops=np.zeros(pool, dtype=i64),
        free=np.arange(pool - 1, -1, -1, dtype=i64), free_top=np.array([pool], dtype=i64),
        buffered=np.zeros(S, dtype=i64), accepted=np.zeros(S, dtype=i64),
        dropped=np.zeros(S, dtype=i64), dequeued=np.zeros(S, dtype=i64),
        cur_intra=np.ones((S, M + 1, M + 1), dtype=i64),
        cur_direct=np.ones((S, P + 1, P + 1), dtype=i64),
        cur_relay=np.ones((S, P + 1, P + 1), dtype=i64),
        rack_offset=np.zeros(1, dtype=i64), queue_offset=np.zeros(S, dtype=i64),
        stamp=np.zeros(1, dtype=i64), u_rack=np.zeros(S, dtype=i64),
        u_intra_tx=np.zeros(S, dtype=i64), u_intra_rx=np.zeros(S, dtype=i64),
        u_inter_tx=np.zeros(S, dtype=i64), u_inter_rx=np.zeros(S, dtype=i64),
        u_reserved=np.zeros(S, dtype=i64),
        u_intra_wl=np.zeros((S, W + 1), dtype=i64), u_inter_wl=np.zeros((P + 1, W + 1), dtype=i64),
        u_inter_pair=np.zeros((P + 1, P + 1), dtype=i64),
        u_inter_pair_n=np.zeros((P + 1, P + 1), dtype=i64),
        u_intra_pair=np.zeros((P + 1, M + 1, M + 1), dtype=i64),
        u_intra_pair_n=np.zeros((P + 1, M + 1, M + 1), dtype=i64),
        w_rack=np.zeros(S, dtype=i64), w_wait=np.zeros(S, dtype=i64),
        w_start=np.zeros(S, dtype=i64), w_n=np.zeros(S, dtype=i64),
        e_dst=np.zeros(S * S, dtype=i64), e_ptr=np.zeros(S * S, dtype=i64),
        e_open=np.zeros(S * S, dtype=np.bool_),
        buf_c=np.zeros(max(F, FI, dmax), dtype=i64), buf_r=np.zeros(max(F, FI, dmax), dtype=i64),
        grants=np.zeros((gmax, G_COLS), dtype=i64),
    )


# -- queues -----------------------------------------------------------------
#
# Numba pays a reference-count round trip for every array handed to a
# non-inlined call, which dominates the per-packet work here. The hot paths
# (admission, planning, execution) therefore touch the Fabric arrays
# directly; the small helpers below serve the Python-facing API.

@njit(cache=True)
def q_push(fab, h, d, p):
    fab.nxt[p] = -1
    t = fab.tail[h, d]
    if t == -1:
        fab.head[h, d] = p
        n = fab.act_n[h]
        fab.act[h, n] = d
        fab.act_idx[h, d] = n
        fab.act_n[h] = n + 1
    else:
        fab.nxt[t] = p
    fab.tail[h, d] = p
    fab.qlen[h, d] += 1


@njit(cache=True)
def q_pop(fab, h, d):
    p = fab.head[h, d]
    nx = fab.nxt[p]
    fab.head[h, d] = nx
    fab.qlen[h, d] -= 1
    if nx == -1:
        fab.tail[h, d] = -1
        # keep the remaining active destinations in arrival order
        i = fab.act_idx[h, d]
        n = fab.act_n[h]
        for k in range(i, n - 1):
            moved = fab.act[h, k + 1]
            fab.act[h, k] = moved
            fab.act_idx[h, moved] = k
        fab.act_idx[h, d] = -1
        fab.act_n[h] = n - 1
    return p


@njit(cache=True)
def push_packets(fab, holders, ids, srcs, dsts, arrivals, hops, out):
    """Admit packets in order with tail drop.

    ``out[k]`` receives the pool index of packet ``k`` or -1 if it was
    dropped. Returns the number of drops.
    """
    size = fab.dims[PKT]
    cap = fab.dims[CAP]
    buffered = fab.buffered
    free = fab.free
    nxt = fab.nxt
    head = fab.head
    tail = fab.tail
    act = fab.act
    act_n = fab.act_n
    act_idx = fab.act_idx
    drops = 0
    for k in range(holders.shape[0]):
        h = holders[k]
        top = fab.free_top[0]
        if buffered[h] + size > cap or top == 0:
            fab.dropped[h] += 1
            out[k] = -1
            drops += 1
            continue
        p = free[top - 1]
        fab.free_top[0] = top - 1
        fab.p_id[p] = ids[k]
        fab.p_src[p] = srcs[k]
        d = dsts[k]
        fab.p_dst[p] = d
        fab.p_arr[p] = arrivals[k]
        fab.p_hops[p] = hops[k]
        nxt[p] = -1
        t = tail[h, d]
        if t == -1:
            head[h, d] = p
            n = act_n[h]
            act[h, n] = d
            act_idx[h, d] = n
            act_n[h] = n + 1
        else:
            nxt[t] = p
        tail[h, d] = p
        fab.qlen[h, d] += 1
        buffered[h] += size
        fab.accepted[h] += 1
        out[k] = p
    return drops


def enqueue(fab, h, pid, src, dst, arrival, hops):
    """Admit one packet into rack ``h``'s queue for ``dst``; -1 when tail-dropped."""
    one = lambda v: np.array([v], dtype=np.int64)
    out = one(0)
    push_packets(fab, one(h), one(pid), one(src), one(dst), one(arrival), one(hops), out)
    return int(out[0])


@njit(cache=True)
def _release(fab, p):
    top = fab.free_top[0]
    fab.free[top] = p
    fab.free_top[0] = top + 1


@njit(cache=True)
def dequeue(fab, h, d):
    """Remove the head of (h, d); the pool slot stays readable until reused."""
    p = q_pop(fab, h, d)
    fab.buffered[h] -= fab.dims[PKT]
    fab.dequeued[h] += 1
    _release(fab, p)
    return p


@njit(cache=True)
def queue_split(fab):
    """(L_intra, L_inter) relative to the current assignment."""
    S = fab.dims[S_]
    intra = 0
    inter = 0
    for h in range(S):
        ch = fab.cluster_of[h]
        for k in range(fab.act_n[h]):
            d = fab.act[h, k]
            if fab.cluster_of[d] == ch:
                intra += fab.qlen[h, d]
            else:
                inter += fab.qlen[h, d]
    return intra, inter


@njit(cache=True)
def resident_count(fab):
    S = fab.dims[S_]
    total = 0
    for h in range(S):
        for k in range(fab.act_n[h]):
            total += fab.qlen[h, fab.act[h, k]]
    return total


# -- round robin ------------------------------------------------------------

@njit(cache=True)
def rr_select(cands, n, cursor):
    """Index into ``cands[:n]`` (ascending) of the first entry >= cursor, cyclically."""
    for i in range(n):
        if cands[i] >= cursor:
            return i
    return 0


# -- planning ---------------------------------------------------------------

@njit(cache=True)
def plan_slot(fab, lb_threshold):
    """Fill ``fab.grants`` for one slot; returns the number of grants.

    Racks are scanned from a per-slot rotating offset and each rack's
    active queues from a per-rack rotating offset. Scanning repeats in
    rounds so a queue can be served by several transmitters; a queue
    whose head is refused is closed for the slot.
    """
    dims = fab.dims
    S = dims[S_]
    F = dims[F_]
    FI = dims[FI_]
    txa = dims[TXA]
    rxa = dims[RXA]
    txe = dims[TXE]
    rxe = dims[RXE]
    size = dims[PKT]
    cap = dims[CAP]
    cluster_of = fab.cluster_of
    position_of = fab.position_of
    rack_at = fab.rack_at
    intra_route = fab.intra_route
    direct = fab.direct
    direct_n = fab.direct_n
    relay_c = fab.relay_c
    relay_pos = fab.relay_pos
    nxt = fab.nxt
    p_hops = fab.p_hops
    buffered = fab.buffered
    cur_intra = fab.cur_intra
    cur_direct = fab.cur_direct
    cur_relay = fab.cur_relay
    u_rack = fab.u_rack
    u_intra_tx = fab.u_intra_tx
    u_intra_rx = fab.u_intra_rx
    u_inter_tx = fab.u_inter_tx
    u_inter_rx = fab.u_inter_rx
    u_reserved = fab.u_reserved
    u_intra_wl = fab.u_intra_wl
    u_inter_wl = fab.u_inter_wl
    u_inter_pair = fab.u_inter_pair
    u_inter_pair_n = fab.u_inter_pair_n
    u_intra_pair = fab.u_intra_pair
    u_intra_pair_n = fab.u_intra_pair_n
    w_rack = fab.w_rack
    w_wait = fab.w_wait
    w_start = fab.w_start
    w_n = fab.w_n
    e_dst = fab.e_dst
    e_ptr = fab.e_ptr
    e_open = fab.e_open
    buf = fab.buf_c
    bufr = fab.buf_r
    g = fab.grants

    fab.stamp[0] += 1
    stamp = fab.stamp[0]
    start = fab.rack_offset[0] % S
    fab.rack_offset[0] = (start + 1) % S
    nw = 0
    ne = 0
    for i in range(S):
        h = (start + i) % S
        n = fab.act_n[h]
        if n == 0:
            continue
        off = fab.queue_offset[h] % n
        fab.queue_offset[h] = off + 1
        ch = cluster_of[h]
        waiting = 0
        w_rack[nw] = h
        w_start[nw] = ne
        w_n[nw] = n
        for k in range(n):
            d = fab.act[h, (off + k) % n]
            if cluster_of[d] == ch:
                waiting += fab.qlen[h, d]
            e_dst[ne] = d
            e_ptr[ne] = fab.head[h, d]
            e_open[ne] = True
            ne += 1
        w_wait[nw] = waiting
        nw += 1

    ng = 0
    progress = True
    while progress:
        progress = False
        for w in range(nw):
            h = w_rack[w]
            if u_rack[h] != stamp:
                u_rack[h] = stamp
                u_intra_tx[h] = 0
                u_intra_rx[h] = 0
                u_inter_tx[h] = 0
                u_inter_rx[h] = 0
                u_reserved[h] = 0
            if u_intra_tx[h] >= txa and u_inter_tx[h] >= txe:
                continue
            ch = cluster_of[h]
            ph = position_of[h]
            waiting = w_wait[w]
            for e in range(w_start[w], w_start[w] + w_n[w]):
                if not e_open[e]:
                    continue
                p = e_ptr[e]
                d = e_dst[e]
                if u_rack[d] != stamp:
                    u_rack[d] = stamp
                    u_intra_tx[d] = 0
                    u_intra_rx[d] = 0
                    u_inter_tx[d] = 0
                    u_inter_rx[d] = 0
                    u_reserved[d] = 0
                cd = cluster_of[d]
                pd = position_of[d]
                second = -1
                if cd == ch:
                    if p_hops[p] >= 1:
                        first = PATH_INTRA
                    elif waiting < lb_threshold:
                        first = PATH_INTRA
                        second = PATH_INTER
                    else:
                        first = PATH_INTER
                        second = PATH_INTRA
                else:
                    first = PATH_INTER
                granted = False
                for attempt in range(2):
                    path = first if attempt == 0 else second
                    if path == -1:
                        break
                    if path == PATH_INTRA:
                        if u_intra_tx[h] >= txa or u_intra_rx[d] >= rxa:
                            continue
                        if u_intra_pair[ch, ph, pd] != stamp:
                            u_intra_pair[ch, ph, pd] = stamp
                            u_intra_pair_n[ch, ph, pd] = 0
                        if u_intra_pair_n[ch, ph, pd] >= FI:
                            continue
                        nf = 0
                        for k in range(FI):
                            c = intra_route[ph, pd, k]
                            if u_intra_wl[h, c] != stamp:
                                buf[nf] = c
                                nf += 1
                        if nf == 0:
                            continue
                        i = rr_select(buf, nf, cur_intra[h, ph, pd])
                        c = buf[i]
                        cur_intra[h, ph, pd] = buf[(i + 1) % nf]
                        u_intra_wl[h, c] = stamp
                        u_intra_pair_n[ch, ph, pd] += 1
                        g[ng, G_HOLDER] = h
                        g[ng, G_DST] = d
                        g[ng, G_PATH] = PATH_INTRA
                        g[ng, G_WL] = c
                        g[ng, G_TX] = u_intra_tx[h]
                        g[ng, G_RECV] = d
                        g[ng, G_SPORT] = ph
                        g[ng, G_DPORT] = pd
                        g[ng, G_CLUSTER] = ch
                        g[ng, G_PKT] = p
                        g[ng, G_INTER] = -1
                        ng += 1
                        u_intra_tx[h] += 1
                        u_intra_rx[d] += 1
                        granted = True
                        break
                    # inter AWGR: direct if possible, else through a relay
                    if u_inter_tx[h] >= txe:
                        continue
                    if u_inter_pair[ch, cd] != stamp:
                        u_inter_pair[ch, cd] = stamp
                        u_inter_pair_n[ch, cd] = 0
                    if u_inter_pair_n[ch, cd] >= F:
                        continue
                    recv = -1
                    inter = -1
                    c = 0
                    if u_inter_rx[d] < rxe:
                        nf = 0
                        for k in range(direct_n[ch, cd, pd]):
                            cc = direct[ch, cd, pd, k]
                            if u_inter_wl[ch, cc] != stamp:
                                buf[nf] = cc
                                nf += 1
                        if nf > 0:
                            i = rr_select(buf, nf, cur_direct[h, ch, cd])
                            c = buf[i]
                            cur_direct[h, ch, cd] = buf[(i + 1) % nf]
                            recv = d
                    if recv == -1:
                        nf = 0
                        for k in range(F):
                            cc = relay_c[ch, cd, k]
                            if u_inter_wl[ch, cc] == stamp:
                                continue
                            r = rack_at[cd, relay_pos[ch, cd, k]]
                            if r == d or r == h:
                                continue
                            if u_rack[r] != stamp:
                                u_rack[r] = stamp
                                u_intra_tx[r] = 0
                                u_intra_rx[r] = 0
                                u_inter_tx[r] = 0
                                u_inter_rx[r] = 0
                                u_reserved[r] = 0
                            if u_inter_rx[r] >= rxe:
                                continue
                            if buffered[r] + u_reserved[r] + size > cap:
                                continue
                            buf[nf] = cc
                            bufr[nf] = r
                            nf += 1
                        if nf == 0:
                            continue
                        i = rr_select(buf, nf, cur_relay[h, ch, cd])
                        c = buf[i]
                        recv = bufr[i]
                        inter = recv
                        cur_relay[h, ch, cd] = buf[(i + 1) % nf]
                        u_reserved[recv] += size
                    u_inter_wl[ch, c] = stamp
                    u_inter_pair_n[ch, cd] += 1
                    g[ng, G_HOLDER] = h
                    g[ng, G_DST] = d
                    g[ng, G_PATH] = PATH_INTER
                    g[ng, G_WL] = c
                    g[ng, G_TX] = u_inter_tx[h]
                    g[ng, G_RECV] = recv
                    g[ng, G_SPORT] = ch
                    g[ng, G_DPORT] = cd
                    g[ng, G_CLUSTER] = ch
                    g[ng, G_PKT] = p
                    g[ng, G_INTER] = inter
                    ng += 1
                    u_inter_tx[h] += 1
                    u_inter_rx[recv] += 1
                    granted = True
                    break
                if granted:
                    progress = True
                    nx = nxt[p]
                    e_ptr[e] = nx
                    if nx == -1:
                        e_open[e] = False
                    if u_intra_tx[h] >= txa and u_inter_tx[h] >= txe:
                        break
                else:
                    e_open[e] = False
    return ng


@njit(cache=True)
def execute_plan(fab, ng, slot, stats, hist, warm):
    """Dequeue granted packets; deliver them or move them to their relay rack.

    Relayed packets keep their pool slot and join the relay's queue only
    after every grant of the slot has left its source queue.
    """
    g = fab.grants
    done = slot + 1
    size = fab.dims[PKT]
    cap = fab.dims[CAP]
    head = fab.head
    tail = fab.tail
    nxt = fab.nxt
    qlen = fab.qlen
    act = fab.act
    act_n = fab.act_n
    act_idx = fab.act_idx
    buffered = fab.buffered
    p_dst = fab.p_dst
    free = fab.free
    relays = 0
    for k in range(ng):
        h = g[k, G_HOLDER]
        d = g[k, G_DST]
        p = head[h, d]
        nx = nxt[p]
        head[h, d] = nx
        qlen[h, d] -= 1
        if nx == -1:
            tail[h, d] = -1
            i = act_idx[h, d]
            n = act_n[h]
            for j in range(i, n - 1):
                moved = act[h, j + 1]
                act[h, j] = moved
                act_idx[h, moved] = j
            act_idx[h, d] = -1
            act_n[h] = n - 1
        buffered[h] -= size
        fab.dequeued[h] += 1
        if g[k, G_RECV] == p_dst[p]:
            lat = done - fab.p_arr[p]
            stats[ST_DEL] += 1
            stats[ST_LATSUM] += lat
            stats[ST_WINSUM] += lat
            stats[ST_WINCNT] += 1
            if warm:
                hist[lat] += 1
            top = fab.free_top[0]
            free[top] = p
            fab.free_top[0] = top + 1
        else:
            relays += 1
    if relays == 0:
        return
    for k in range(ng):
        p = g[k, G_PKT]
        r = g[k, G_RECV]
        d = p_dst[p]
        if r == d:
            continue
        stats[ST_RELAY] += 1
        if buffered[r] + size > cap:
            fab.dropped[r] += 1
            stats[ST_DROP] += 1
            top = fab.free_top[0]
            free[top] = p
            fab.free_top[0] = top + 1
            continue
        fab.p_hops[p] += 1
        nxt[p] = -1
        t = tail[r, d]
        if t == -1:
            head[r, d] = p
            n = act_n[r]
            act[r, n] = d
            act_idx[r, d] = n
            act_n[r] = n + 1
        else:
            nxt[t] = p
        tail[r, d] = p
        qlen[r, d] += 1
        buffered[r] += size
        fab.accepted[r] += 1


# -- clustering ---------------------------------------------------------------

@njit(cache=True)
def greedy_core(wm, n_clusters, cluster_size, out):
    """Greedy mutual-traffic clustering into ``out[n_clusters, cluster_size]``."""
    n = wm.shape[0]
    free = np.ones(n, dtype=np.bool_)
    score = np.zeros(n, dtype=np.float64)
    for p in range(n_clusters):
        if cluster_size == 1:
            for r in range(n):
                if free[r]:
                    out[p, 0] = r
                    free[r] = False
                    break
            continue
        best = -np.inf
        a = -1
        b = -1
        for i in range(n):
            if not free[i]:
                continue
            for j in range(i + 1, n):
                if free[j] and wm[i, j] > best:
                    best = wm[i, j]
                    a = i
                    b = j
        out[p, 0] = a
        out[p, 1] = b
        free[a] = False
        free[b] = False
        for r in range(n):
            score[r] = wm[r, a] + wm[r, b]
        for m in range(2, cluster_size):
            best = -np.inf
            pick = -1
            for r in range(n):
                if free[r] and score[r] > best:
                    best = score[r]
                    pick = r
            out[p, m] = pick
            free[pick] = False
            for r in range(n):
                score[r] += wm[r, pick]


@njit(cache=True)
def apply_clusters(fab, clusters):
    P = clusters.shape[0]
    M = clusters.shape[1]
    for c in range(P):
        for m in range(M):
            r = clusters[c, m]
            fab.cluster_of[r] = c + 1
            fab.position_of[r] = m + 1
            fab.rack_at[c + 1, m + 1] = r


@njit(cache=True)
def mutual_matrix(fab):
    S = fab.dims[S_]
    wm = np.zeros((S, S), dtype=np.float64)
    for h in range(S):
        for k in range(fab.act_n[h]):
            d = fab.act[h, k]
            q = fab.qlen[h, d]
            wm[h, d] += q
            wm[d, h] += q
    return wm


# -- controller ---------------------------------------------------------------

@njit(cache=True)
def tick(ctrl):
    """Advance the controller clock by one slot.

    Returns TICK_SUSPENDED while a reconfiguration is in progress,
    TICK_SAMPLE when the occupancy must be sampled, TICK_IDLE otherwise.
    """
    if ctrl[C_SUSP_LEFT] > 0:
        ctrl[C_SUSP_LEFT] -= 1
        ctrl[C_SUSPENDED] = 1
        return TICK_SUSPENDED
    ctrl[C_SUSPENDED] = 0
    if ctrl[C_ENABLED] == 0:
        return TICK_IDLE
    ctrl[C_COUNTER] += 1
    if ctrl[C_COUNTER] < ctrl[C_SI]:
        return TICK_IDLE
    ctrl[C_COUNTER] = 0
    return TICK_SAMPLE


@njit(cache=True)
def start_suspension(ctrl):
    rt = ctrl[C_RT]
    if rt > 0:
        ctrl[C_SUSPENDED] = 1
        ctrl[C_SUSP_LEFT] = rt - 1


@njit(cache=True)
def trigger(beta, l_intra, l_inter):
    return l_inter > 0 and beta * l_intra <= l_inter


# -- slot loop ------------------------------------------------------------------

@njit(cache=True)
def run_slots(fab, ctrl, beta, lb_threshold, stats, hist, warmup, cadence,
              arr_slot, arr_src, arr_dst, arr_id, t0, t1, events, ev_clusters, records, audit):
    """Simulate slots ``t0 .. t1-1`` with arrivals sorted by slot.

    Stops early, after completing a slot, once ``events`` is full. Returns
    ``(next_slot, arrivals_used, n_events, n_records, first_audit_failure)``;
    the last is -1 when conservation held or was not checked.
    """
    P = fab.dims[P_]
    M = fab.dims[M_]
    ne = 0
    nr = 0
    fail = -1
    ai = 0
    na = arr_slot.shape[0]
    zeros = np.zeros(na, dtype=np.int64)
    slots_out = np.empty(na, dtype=np.int64)
    clusters = np.empty((P, M), dtype=np.int64)
    slot = t0
    while slot < t1:
        aj = ai
        while aj < na and arr_slot[aj] == slot:
            aj += 1
        if aj > ai:
            stats[ST_GEN] += aj - ai
            stats[ST_DROP] += push_packets(fab, arr_src[ai:aj], arr_id[ai:aj], arr_src[ai:aj],
                                           arr_dst[ai:aj], arr_slot[ai:aj], zeros[ai:aj],
                                           slots_out[ai:aj])
            ai = aj

        code = tick(ctrl)
        if code == TICK_SAMPLE:
            l_intra, l_inter = queue_split(fab)
            if trigger(beta, l_intra, l_inter):
                wm = mutual_matrix(fab)
                greedy_core(wm, P, M, clusters)
                apply_clusters(fab, clusters)
                start_suspension(ctrl)
                events[ne, E_SLOT] = slot
                events[ne, E_LINTRA] = l_intra
                events[ne, E_LINTER] = l_inter
                events[ne, E_RT] = ctrl[C_RT]
                ev_clusters[ne] = clusters
                ne += 1
                stats[ST_NEV] += 1

        if ctrl[C_SUSPENDED] == 1:
            stats[ST_SUSP] += 1
        else:
            ng = plan_slot(fab, lb_threshold)
            execute_plan(fab, ng, slot, stats, hist, slot >= warmup)

        if audit and fail == -1:
            if stats[ST_GEN] != stats[ST_DEL] + stats[ST_DROP] + resident_count(fab):
                fail = slot

        if (slot + 1) % cadence == 0:
            l_intra, l_inter = queue_split(fab)
            records[nr, R_SLOT] = slot
            records[nr, R_LATSUM] = stats[ST_LATSUM]
            records[nr, R_DEL] = stats[ST_DEL]
            records[nr, R_WINSUM] = stats[ST_WINSUM]
            records[nr, R_WINCNT] = stats[ST_WINCNT]
            records[nr, R_LINTRA] = l_intra
            records[nr, R_LINTER] = l_inter
            records[nr, R_DROP] = stats[ST_DROP]
            records[nr, R_GEN] = stats[ST_GEN]
            records[nr, R_SUSP] = ctrl[C_SUSPENDED]
            records[nr, R_NEV] = stats[ST_NEV]
            nr += 1
            stats[ST_WINSUM] = 0
            stats[ST_WINCNT] = 0
        slot += 1
        if ne == events.shape[0]:
            break
    return slot, ai, ne, nr, fail
