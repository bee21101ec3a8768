"""Pure-numpy tree growth kernels.

Semantics contract shared with the numba backend:

- every floating-point accumulation runs in ascending input-row order
  (np.bincount / np.cumsum are sequential), so exact and histogram split
  finding agree bitwise whenever bins resolve all distinct values;
- candidate order is (feature ascending, boundary ascending); ties keep the
  earliest candidate; missing-direction ties go left;
- a node splits only when its best gamma-penalized gain is strictly positive.

Node array layout (preallocated to ``node_cap``): ``feature`` (-1 = leaf),
``threshold``, ``default_left``, ``left``/``right`` child ids, ``raw_gain``
(the gain before the gamma subtraction, for pruning), ``sum_g``/``sum_h``/
``count`` node statistics.  Kernels return
``(node_count, feature, threshold, default_left, left, right, raw_gain,
sum_g, sum_h, count, depth, node_of_row)``.
"""

from __future__ import annotations

import numpy as np

NEG_INF = -np.inf


def _seq_sum(x: np.ndarray) -> float:
    return float(np.cumsum(x)[-1]) if x.size else 0.0


def guarded_midpoints(u: np.ndarray) -> np.ndarray:
    """Midpoints m_i between consecutive distinct values, with u[i] <= m_i <
    u[i+1] enforced against rounding."""
    m = 0.5 * (u[:-1] + u[1:])
    bad = ~((u[:-1] <= m) & (m < u[1:]))
    m[bad] = u[:-1][bad]
    return m


def _alloc(cap: int):
    return (
        np.full(cap, -1, np.int32),      # feature
        np.zeros(cap, np.float64),       # threshold
        np.ones(cap, np.uint8),          # default_left
        np.full(cap, -1, np.int32),      # left
        np.full(cap, -1, np.int32),      # right
        np.zeros(cap, np.float64),       # raw_gain
        np.zeros(cap, np.float64),       # sum_g
        np.zeros(cap, np.float64),       # sum_h
        np.zeros(cap, np.int64),         # count
    )


def _eval_boundaries(GLp, HLp, CLp, Gp, Hp, Cp, Gn, Hn, Cn, lam, gamma):
    """Best-direction gain and default_left per candidate boundary.

    Present-row prefixes (GLp...) are evaluated against node totals (Gn...);
    missing statistics are the difference.  A candidate needs at least one
    present row on each side (missing rows only pick a side, they cannot
    form one).  Ties between directions go left.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        Gm = Gn - Gp
        Hm = Hn - Hp
        GRp = Gp - GLp
        HRp = Hp - HLp
        CRp = Cp - CLp
        sides = (CLp >= 1) & (CRp >= 1)
        parent = Gn * Gn / (Hn + lam)

        GL = GLp + Gm
        HL = HLp + Hm
        valid_l = sides & (HL + lam > 0.0) & (HRp + lam > 0.0)
        gain_l = 0.5 * (GL * GL / (HL + lam) + GRp * GRp / (HRp + lam) - parent) - gamma

        GR = GRp + Gm
        HR = HRp + Hm
        valid_r = sides & (HLp + lam > 0.0) & (HR + lam > 0.0)
        gain_r = 0.5 * (GLp * GLp / (HLp + lam) + GR * GR / (HR + lam) - parent) - gamma

    gain_l = np.where(valid_l, gain_l, NEG_INF)
    gain_r = np.where(valid_r, gain_r, NEG_INF)
    dl = gain_l >= gain_r
    return np.where(dl, gain_l, gain_r), dl


def _hist_node(codes_f, nb, rows, g, h):
    """Per-bin (g, h, count) sums for one node's rows (ascending order)."""
    pc = codes_f[rows]
    keep = pc >= 0
    pr = rows[keep]
    pc = pc[keep]
    hg = np.bincount(pc, weights=g[pr], minlength=nb)
    hh = np.bincount(pc, weights=h[pr], minlength=nb)
    hc = np.bincount(pc, minlength=nb)
    return hg, hh, hc


def _exact_node_scan(values_f, order_rows, g, h, Gn, Hn, Cn, lam, gamma):
    """Boundary scan over one node's present rows given in value-sorted order."""
    if order_rows.size < 2:
        return NEG_INF, 0.0, True
    sv = values_f[order_rows]
    grp_start = np.empty(sv.size, dtype=bool)
    grp_start[0] = True
    grp_start[1:] = sv[1:] != sv[:-1]
    gid = np.cumsum(grp_start) - 1
    ng = int(gid[-1]) + 1
    if ng < 2:
        return NEG_INF, 0.0, True
    gg = np.bincount(gid, weights=g[order_rows], minlength=ng)
    gh = np.bincount(gid, weights=h[order_rows], minlength=ng)
    gc = np.bincount(gid, minlength=ng)
    cg = np.cumsum(gg)
    ch = np.cumsum(gh)
    cc = np.cumsum(gc)
    gain, dl = _eval_boundaries(
        cg[:-1], ch[:-1], cc[:-1], cg[-1], ch[-1], cc[-1], Gn, Hn, Cn, lam, gamma
    )
    thr = guarded_midpoints(sv[grp_start])
    bi = int(np.argmax(gain))
    return float(gain[bi]), float(thr[bi]), bool(dl[bi])


def _route(values_like, absent_like, rows, nids, feature, per_node_cut, is_code,
           default_left, left, right, node_of_row):
    """Send ``rows`` (at internal nodes ``nids``) to their children."""
    ff = feature[nids].astype(np.int64)
    v = values_like[ff, rows]
    if is_code:
        ab = v < 0
        go_left = np.where(ab, default_left[nids].astype(bool), v <= per_node_cut[nids])
    else:
        ab = absent_like[ff, rows]
        go_left = np.where(ab, default_left[nids].astype(bool), v <= per_node_cut[nids])
    node_of_row[rows] = np.where(go_left, left[nids], right[nids]).astype(np.int32)


def _child_stats(node_of_row, g, h, first_new, node_count, sum_g, sum_h, count):
    mask = node_of_row >= first_new
    idx = node_of_row[mask] - first_new
    k = node_count - first_new
    sum_g[first_new:node_count] = np.bincount(idx, weights=g[mask], minlength=k)
    sum_h[first_new:node_count] = np.bincount(idx, weights=h[mask], minlength=k)
    count[first_new:node_count] = np.bincount(idx, minlength=k)


def _init_root(in_subset, g, h, node_cap):
    n = g.shape[0]
    arrays = _alloc(node_cap)
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = arrays
    node_of_row = np.where(in_subset != 0, 0, -1).astype(np.int32)
    rows = np.flatnonzero(in_subset != 0)
    sum_g[0] = _seq_sum(g[rows])
    sum_h[0] = _seq_sum(h[rows])
    count[0] = rows.shape[0]
    return arrays, node_of_row


def grow_depthwise_hist(codes, nbins, edges_flat, edge_off, feats, in_subset, g, h,
                        max_depth, min_samples_split, gamma, lam, node_cap):
    arrays, node_of_row = _init_root(in_subset, g, h, node_cap)
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = arrays
    n = g.shape[0]
    node_count = 1
    depth = 0
    level = [0]
    bin_of_node = np.zeros(node_cap, np.int64)

    for level_idx in range(max_depth):
        open_ids = [nid for nid in level
                    if count[nid] >= min_samples_split and count[nid] >= 2]
        if not open_ids:
            break
        open_arr = np.array(open_ids, np.int64)
        m = open_arr.shape[0]
        slot_of = np.full(node_cap, -1, np.int64)
        slot_of[open_arr] = np.arange(m)
        row_slot = np.full(n, -1, np.int64)
        sub = node_of_row >= 0
        row_slot[sub] = slot_of[node_of_row[sub]]
        sel = row_slot >= 0

        Gn = sum_g[open_arr][:, None]
        Hn = sum_h[open_arr][:, None]
        Cn = count[open_arr][:, None]
        best_gain = np.full(m, NEG_INF)
        best_feat = np.full(m, -1, np.int64)
        best_bin = np.zeros(m, np.int64)
        best_dl = np.ones(m, dtype=bool)
        ar = np.arange(m)

        for f in feats:
            nb = int(nbins[f])
            if nb < 2:
                continue
            cf = codes[f]
            present = sel & (cf >= 0)
            flat = row_slot[present] * nb + cf[present]
            hg = np.bincount(flat, weights=g[present], minlength=m * nb).reshape(m, nb)
            hh = np.bincount(flat, weights=h[present], minlength=m * nb).reshape(m, nb)
            hc = np.bincount(flat, minlength=m * nb).reshape(m, nb)
            cg = np.cumsum(hg, axis=1)
            ch = np.cumsum(hh, axis=1)
            cc = np.cumsum(hc, axis=1)
            gain, dl = _eval_boundaries(
                cg[:, :-1], ch[:, :-1], cc[:, :-1],
                cg[:, -1:], ch[:, -1:], cc[:, -1:], Gn, Hn, Cn, lam, gamma,
            )
            bi = np.argmax(gain, axis=1)
            bg = gain[ar, bi]
            upd = bg > best_gain
            best_gain[upd] = bg[upd]
            best_feat[upd] = f
            best_bin[upd] = bi[upd]
            best_dl[upd] = dl[ar, bi][upd]

        split = best_gain > 0.0
        if not split.any():
            break
        first_new = node_count
        for s in range(m):
            if not split[s]:
                continue
            nid = int(open_arr[s])
            f = int(best_feat[s])
            feature[nid] = f
            threshold[nid] = edges_flat[edge_off[f] + best_bin[s]]
            bin_of_node[nid] = best_bin[s]
            default_left[nid] = 1 if best_dl[s] else 0
            raw_gain[nid] = best_gain[s] + gamma
            left[nid] = node_count
            right[nid] = node_count + 1
            node_count += 2
        depth = level_idx + 1

        rows = np.flatnonzero(sub)
        nids = node_of_row[rows]
        moving = feature[nids] >= 0
        _route(codes, None, rows[moving], nids[moving], feature, bin_of_node, True,
               default_left, left, right, node_of_row)
        _child_stats(node_of_row, g, h, first_new, node_count, sum_g, sum_h, count)
        level = list(range(first_new, node_count))

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


def grow_leafwise_hist(codes, nbins, edges_flat, edge_off, feats, in_subset, g, h,
                       num_leaves, min_samples_split, gamma, lam, node_cap):
    arrays, node_of_row = _init_root(in_subset, g, h, node_cap)
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = arrays
    cand_gain = np.full(node_cap, NEG_INF)
    cand_feat = np.full(node_cap, -1, np.int64)
    cand_thr = np.zeros(node_cap, np.float64)
    cand_bin = np.zeros(node_cap, np.int64)
    cand_dl = np.ones(node_cap, dtype=bool)
    bin_of_node = np.zeros(node_cap, np.int64)
    node_count = 1
    node_depth = np.zeros(node_cap, np.int64)

    def compute_candidate(nid):
        cand_gain[nid] = NEG_INF
        if not (count[nid] >= min_samples_split and count[nid] >= 2):
            return
        rows = np.flatnonzero(node_of_row == nid)
        for f in feats:
            nb = int(nbins[f])
            if nb < 2:
                continue
            hg, hh, hc = _hist_node(codes[f], nb, rows, g, h)
            cg = np.cumsum(hg)
            ch = np.cumsum(hh)
            cc = np.cumsum(hc)
            gain, dl = _eval_boundaries(
                cg[:-1], ch[:-1], cc[:-1], cg[-1], ch[-1], cc[-1],
                sum_g[nid], sum_h[nid], count[nid], lam, gamma,
            )
            bi = int(np.argmax(gain))
            if gain[bi] > cand_gain[nid]:
                cand_gain[nid] = float(gain[bi])
                cand_feat[nid] = int(f)
                cand_thr[nid] = float(edges_flat[edge_off[f] + bi])
                cand_bin[nid] = bi
                cand_dl[nid] = bool(dl[bi])

    compute_candidate(0)
    leaf_count = 1
    depth = 0
    while leaf_count < num_leaves:
        lg = np.where(feature[:node_count] < 0, cand_gain[:node_count], NEG_INF)
        nid = int(np.argmax(lg))
        if not (lg[nid] > 0.0):
            break
        f = int(cand_feat[nid])
        feature[nid] = f
        threshold[nid] = cand_thr[nid]
        bin_of_node[nid] = cand_bin[nid]
        default_left[nid] = 1 if cand_dl[nid] else 0
        raw_gain[nid] = cand_gain[nid] + gamma
        lid, rid = node_count, node_count + 1
        left[nid] = lid
        right[nid] = rid
        node_count += 2
        node_depth[lid] = node_depth[rid] = node_depth[nid] + 1
        depth = max(depth, int(node_depth[lid]))

        rows = np.flatnonzero(node_of_row == nid)
        _route(codes, None, rows, node_of_row[rows], feature, bin_of_node, True,
               default_left, left, right, node_of_row)
        _child_stats(node_of_row, g, h, lid, node_count, sum_g, sum_h, count)
        compute_candidate(lid)
        compute_candidate(rid)
        leaf_count += 1

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


def grow_oblivious_hist(codes, nbins, edges_flat, edge_off, feats, in_subset, g, h,
                        max_depth, min_samples_split, gamma, lam, node_cap):
    arrays, node_of_row = _init_root(in_subset, g, h, node_cap)
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = arrays
    n = g.shape[0]
    node_count = 1
    depth = 0
    level = [0]

    for level_idx in range(max_depth):
        lv = np.array(level, np.int64)
        m = lv.shape[0]
        slot_of = np.full(node_cap, -1, np.int64)
        slot_of[lv] = np.arange(m)
        row_slot = np.full(n, -1, np.int64)
        sub = node_of_row >= 0
        row_slot[sub] = slot_of[node_of_row[sub]]
        sel = row_slot >= 0

        Gn = sum_g[lv][:, None]
        Hn = sum_h[lv][:, None]
        Cn = count[lv][:, None]
        eligible = (count[lv] >= min_samples_split) & (count[lv] >= 2)

        best_total = NEG_INF
        best_f = -1
        best_b = -1
        for f in feats:
            nb = int(nbins[f])
            if nb < 2:
                continue
            cf = codes[f]
            present = sel & (cf >= 0)
            flat = row_slot[present] * nb + cf[present]
            hg = np.bincount(flat, weights=g[present], minlength=m * nb).reshape(m, nb)
            hh = np.bincount(flat, weights=h[present], minlength=m * nb).reshape(m, nb)
            hc = np.bincount(flat, minlength=m * nb).reshape(m, nb)
            cg = np.cumsum(hg, axis=1)
            ch = np.cumsum(hh, axis=1)
            cc = np.cumsum(hc, axis=1)
            gain, _ = _eval_boundaries(
                cg[:, :-1], ch[:, :-1], cc[:, :-1],
                cg[:, -1:], ch[:, -1:], cc[:, -1:], Gn, Hn, Cn, lam, gamma,
            )
            contrib = np.where(np.isfinite(gain) & eligible[:, None], gain, 0.0)
            total = np.zeros(nb - 1, np.float64)
            for s in range(m):
                total += contrib[s]
            bt = int(np.argmax(total))
            if total[bt] > best_total:
                best_total = float(total[bt])
                best_f = f
                best_b = bt

        if not (best_total > 0.0):
            break

        # re-evaluate the winning (feature, boundary) per node for direction
        # and per-node raw gain
        nb = int(nbins[best_f])
        cf = codes[best_f]
        first_new = node_count
        for s in range(m):
            nid = int(lv[s])
            rows = np.flatnonzero(node_of_row == nid)
            hg, hh, hc = _hist_node(cf, nb, rows, g, h)
            cg = np.cumsum(hg)
            ch = np.cumsum(hh)
            cc = np.cumsum(hc)
            gain, dl = _eval_boundaries(
                cg[:-1], ch[:-1], cc[:-1], cg[-1], ch[-1], cc[-1],
                sum_g[nid], sum_h[nid], count[nid], lam, gamma,
            )
            gain_s = float(gain[best_b])
            feature[nid] = best_f
            threshold[nid] = edges_flat[edge_off[best_f] + best_b]
            default_left[nid] = 1 if bool(dl[best_b]) else 0
            if np.isfinite(gain_s) and eligible[s]:
                raw_gain[nid] = gain_s + gamma
            else:
                raw_gain[nid] = 0.0
            left[nid] = node_count
            right[nid] = node_count + 1
            node_count += 2
        depth = level_idx + 1

        rows = np.flatnonzero(sub)
        nids = node_of_row[rows]
        cut = np.zeros(node_cap, np.int64)
        cut[lv] = best_b
        _route(codes, None, rows, nids, feature, cut, True,
               default_left, left, right, node_of_row)
        _child_stats(node_of_row, g, h, first_new, node_count, sum_g, sum_h, count)
        level = list(range(first_new, node_count))

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


def grow_depthwise_exact(values, absent, order_flat, order_off, feats, in_subset,
                         g, h, max_depth, min_samples_split, gamma, lam, node_cap):
    arrays, node_of_row = _init_root(in_subset, g, h, node_cap)
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = arrays
    n = g.shape[0]
    node_count = 1
    depth = 0
    level = [0]

    for level_idx in range(max_depth):
        open_ids = [nid for nid in level
                    if count[nid] >= min_samples_split and count[nid] >= 2]
        if not open_ids:
            break
        open_arr = np.array(open_ids, np.int64)
        m = open_arr.shape[0]
        slot_of = np.full(node_cap, -1, np.int64)
        slot_of[open_arr] = np.arange(m)
        row_slot = np.full(n, -1, np.int64)
        sub = node_of_row >= 0
        row_slot[sub] = slot_of[node_of_row[sub]]

        best_gain = np.full(m, NEG_INF)
        best_feat = np.full(m, -1, np.int64)
        best_thr = np.zeros(m, np.float64)
        best_dl = np.ones(m, dtype=bool)

        for f in feats:
            of = order_flat[order_off[f] : order_off[f + 1]]
            ss = row_slot[of]
            keep = ss >= 0
            so = of[keep]
            sslot = ss[keep]
            vf = values[f]
            for s in range(m):
                srows = so[sslot == s]
                nid = int(open_arr[s])
                gain, thr, dl = _exact_node_scan(
                    vf, srows, g, h, sum_g[nid], sum_h[nid], count[nid], lam, gamma
                )
                if gain > best_gain[s]:
                    best_gain[s] = gain
                    best_feat[s] = f
                    best_thr[s] = thr
                    best_dl[s] = dl

        split = best_gain > 0.0
        if not split.any():
            break
        first_new = node_count
        for s in range(m):
            if not split[s]:
                continue
            nid = int(open_arr[s])
            feature[nid] = int(best_feat[s])
            threshold[nid] = best_thr[s]
            default_left[nid] = 1 if best_dl[s] else 0
            raw_gain[nid] = best_gain[s] + gamma
            left[nid] = node_count
            right[nid] = node_count + 1
            node_count += 2
        depth = level_idx + 1

        rows = np.flatnonzero(sub)
        nids = node_of_row[rows]
        moving = feature[nids] >= 0
        _route(values, absent, rows[moving], nids[moving], feature, threshold, False,
               default_left, left, right, node_of_row)
        _child_stats(node_of_row, g, h, first_new, node_count, sum_g, sum_h, count)
        level = list(range(first_new, node_count))

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


def grow_leafwise_exact(values, absent, order_flat, order_off, feats, in_subset,
                        g, h, num_leaves, min_samples_split, gamma, lam, node_cap):
    arrays, node_of_row = _init_root(in_subset, g, h, node_cap)
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = arrays
    cand_gain = np.full(node_cap, NEG_INF)
    cand_feat = np.full(node_cap, -1, np.int64)
    cand_thr = np.zeros(node_cap, np.float64)
    cand_dl = np.ones(node_cap, dtype=bool)
    node_count = 1
    node_depth = np.zeros(node_cap, np.int64)

    def compute_candidate(nid):
        cand_gain[nid] = NEG_INF
        if not (count[nid] >= min_samples_split and count[nid] >= 2):
            return
        member = node_of_row == nid
        for f in feats:
            of = order_flat[order_off[f] : order_off[f + 1]]
            srows = of[member[of]]
            gain, thr, dl = _exact_node_scan(
                values[f], srows, g, h, sum_g[nid], sum_h[nid], count[nid], lam, gamma
            )
            if gain > cand_gain[nid]:
                cand_gain[nid] = gain
                cand_feat[nid] = f
                cand_thr[nid] = thr
                cand_dl[nid] = dl

    compute_candidate(0)
    leaf_count = 1
    depth = 0
    while leaf_count < num_leaves:
        lg = np.where(feature[:node_count] < 0, cand_gain[:node_count], NEG_INF)
        nid = int(np.argmax(lg))
        if not (lg[nid] > 0.0):
            break
        feature[nid] = int(cand_feat[nid])
        threshold[nid] = cand_thr[nid]
        default_left[nid] = 1 if cand_dl[nid] else 0
        raw_gain[nid] = cand_gain[nid] + gamma
        lid, rid = node_count, node_count + 1
        left[nid] = lid
        right[nid] = rid
        node_count += 2
        node_depth[lid] = node_depth[rid] = node_depth[nid] + 1
        depth = max(depth, int(node_depth[lid]))

        rows = np.flatnonzero(node_of_row == nid)
        _route(values, absent, rows, node_of_row[rows], feature, threshold, False,
               default_left, left, right, node_of_row)
        _child_stats(node_of_row, g, h, lid, node_count, sum_g, sum_h, count)
        compute_candidate(lid)
        compute_candidate(rid)
        leaf_count += 1

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


def assign_leaves(feature, threshold, default_left, left, right, values, absent):
    """Route every column of (values, absent) to its leaf node id."""
    n = values.shape[1]
    node = np.zeros(n, np.int32)
    while True:
        f = feature[node]
        active = f >= 0
        if not active.any():
            break
        rows = np.flatnonzero(active)
        nd = node[rows]
        ff = f[rows].astype(np.int64)
        v = values[ff, rows]
        ab = absent[ff, rows]
        go_left = np.where(ab, default_left[nd].astype(bool), v <= threshold[nd])
        node[rows] = np.where(go_left, left[nd], right[nd])
    return node
