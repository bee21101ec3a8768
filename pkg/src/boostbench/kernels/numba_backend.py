"""Numba-compiled tree growth kernels.

Mirrors :mod:`boostbench.kernels.numpy_backend` loop for loop: identical
candidate ordering, tie rules, and floating-point accumulation order
(ascending input rows into per-bin/per-group sums, then sequential prefix
over bins/groups).  See that module for the semantics contract.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NEG_INF = -np.inf

_JIT = dict(cache=True, nogil=True)


@njit(inline="always", **_JIT)
def _mid(lo, hi):
    m = 0.5 * (lo + hi)
    if not (lo <= m and m < hi):
        m = lo
    return m


@njit(inline="always", **_JIT)
def _eval_candidate(GLp, HLp, CLp, Gp, Hp, Cp, Gn, Hn, Cn, lam, gamma):
    """Best-direction gain and default_left for one boundary (ties go left).

    Needs at least one present row on each side; missing rows only pick a
    side, they cannot form one.
    """
    Gm = Gn - Gp
    Hm = Hn - Hp
    GRp = Gp - GLp
    HRp = Hp - HLp
    CRp = Cp - CLp
    sides = CLp >= 1 and CRp >= 1

    gain_l = NEG_INF
    GL = GLp + Gm
    HL = HLp + Hm
    if sides and HL + lam > 0.0 and HRp + lam > 0.0:
        parent = Gn * Gn / (Hn + lam)
        gain_l = 0.5 * (GL * GL / (HL + lam) + GRp * GRp / (HRp + lam) - parent) - gamma

    gain_r = NEG_INF
    GR = GRp + Gm
    HR = HRp + Hm
    if sides and HLp + lam > 0.0 and HR + lam > 0.0:
        parent = Gn * Gn / (Hn + lam)
        gain_r = 0.5 * (GLp * GLp / (HLp + lam) + GR * GR / (HR + lam) - parent) - gamma

    if gain_l >= gain_r:
        return gain_l, True
    return gain_r, False


@njit(**_JIT)
def _alloc(cap):
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap, np.float64)
    default_left = np.ones(cap, np.uint8)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    raw_gain = np.zeros(cap, np.float64)
    sum_g = np.zeros(cap, np.float64)
    sum_h = np.zeros(cap, np.float64)
    count = np.zeros(cap, np.int64)
    return feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count


@njit(**_JIT)
def _init_root(in_subset, g, h, node_of_row, sum_g, sum_h, count):
    n = g.shape[0]
    gt = 0.0
    ht = 0.0
    ct = 0
    for r in range(n):
        if in_subset[r] != 0:
            node_of_row[r] = 0
            gt += g[r]
            ht += h[r]
            ct += 1
        else:
            node_of_row[r] = -1
    sum_g[0] = gt
    sum_h[0] = ht
    count[0] = ct


@njit(**_JIT)
def _child_stats(node_of_row, g, h, first_new, node_count, sum_g, sum_h, count):
    n = node_of_row.shape[0]
    for r in range(n):
        nid = node_of_row[r]
        if nid >= first_new:
            sum_g[nid] += g[r]
            sum_h[nid] += h[r]
            count[nid] += 1


@njit(**_JIT)
def grow_depthwise_hist(codes, nbins, edges_flat, edge_off, feats, in_subset, g, h,
                        max_depth, min_samples_split, gamma, lam, node_cap):
    n = g.shape[0]
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = _alloc(node_cap)
    node_of_row = np.empty(n, np.int32)
    _init_root(in_subset, g, h, node_of_row, sum_g, sum_h, count)
    node_count = 1
    depth = 0
    level = np.empty(node_cap, np.int64)
    level[0] = 0
    level_len = 1
    bin_of_node = np.zeros(node_cap, np.int64)
    slot_of = np.full(node_cap, -1, np.int64)
    row_slot = np.empty(n, np.int64)
    nfu = feats.shape[0]
    max_nb = 2
    for i in range(nbins.shape[0]):
        if nbins[i] > max_nb:
            max_nb = nbins[i]

    for level_idx in range(max_depth):
        m = 0
        open_arr = np.empty(level_len, np.int64)
        for i in range(level_len):
            nid = level[i]
            if count[nid] >= min_samples_split and count[nid] >= 2:
                open_arr[m] = nid
                m += 1
        if m == 0:
            break
        for i in range(m):
            slot_of[open_arr[i]] = i
        for r in range(n):
            nid = node_of_row[r]
            row_slot[r] = slot_of[nid] if nid >= 0 else -1

        best_gain = np.full(m, NEG_INF)
        best_feat = np.full(m, -1, np.int64)
        best_bin = np.zeros(m, np.int64)
        best_dl = np.ones(m, np.uint8)
        hg = np.empty((m, max_nb), np.float64)
        hh = np.empty((m, max_nb), np.float64)
        hc = np.empty((m, max_nb), np.int64)

        for fi in range(nfu):
            f = feats[fi]
            nb = nbins[f]
            if nb < 2:
                continue
            for s in range(m):
                for b in range(nb):
                    hg[s, b] = 0.0
                    hh[s, b] = 0.0
                    hc[s, b] = 0
            for r in range(n):
                s = row_slot[r]
                if s < 0:
                    continue
                c = codes[f, r]
                if c < 0:
                    continue
                hg[s, c] += g[r]
                hh[s, c] += h[r]
                hc[s, c] += 1
            for s in range(m):
                nid = open_arr[s]
                gp = 0.0
                hp = 0.0
                cp = 0
                for b in range(nb):
                    gp += hg[s, b]
                    hp += hh[s, b]
                    cp += hc[s, b]
                glp = 0.0
                hlp = 0.0
                clp = 0
                fb_gain = NEG_INF
                fb_bin = 0
                fb_dl = True
                for b in range(nb - 1):
                    glp += hg[s, b]
                    hlp += hh[s, b]
                    clp += hc[s, b]
                    gain, dl = _eval_candidate(
                        glp, hlp, clp, gp, hp, cp,
                        sum_g[nid], sum_h[nid], count[nid], lam, gamma,
                    )
                    if gain > fb_gain:
                        fb_gain = gain
                        fb_bin = b
                        fb_dl = dl
                if fb_gain > best_gain[s]:
                    best_gain[s] = fb_gain
                    best_feat[s] = f
                    best_bin[s] = fb_bin
                    best_dl[s] = 1 if fb_dl else 0

        any_split = False
        first_new = node_count
        for s in range(m):
            if best_gain[s] > 0.0:
                any_split = True
                nid = open_arr[s]
                f = best_feat[s]
                feature[nid] = np.int32(f)
                threshold[nid] = edges_flat[edge_off[f] + best_bin[s]]
                bin_of_node[nid] = best_bin[s]
                default_left[nid] = best_dl[s]
                raw_gain[nid] = best_gain[s] + gamma
                left[nid] = np.int32(node_count)
                right[nid] = np.int32(node_count + 1)
                node_count += 2
        for i in range(m):
            slot_of[open_arr[i]] = -1
        if not any_split:
            break
        depth = level_idx + 1

        for r in range(n):
            nid = node_of_row[r]
            if nid < 0:
                continue
            if feature[nid] < 0:
                continue
            c = codes[feature[nid], r]
            if c < 0:
                go_left = default_left[nid] == 1
            else:
                go_left = c <= bin_of_node[nid]
            node_of_row[r] = left[nid] if go_left else right[nid]
        _child_stats(node_of_row, g, h, first_new, node_count, sum_g, sum_h, count)
        level_len = node_count - first_new
        for i in range(level_len):
            level[i] = first_new + i

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


@njit(**_JIT)
def _hist_candidate(codes, nbins, edges_flat, edge_off, feats, node_of_row, nid,
                    g, h, gn, hn, cn, min_samples_split, gamma, lam):
    """Best (gain, feature, threshold, bin, default_left) for one node."""
    b_gain = NEG_INF
    b_feat = -1
    b_thr = 0.0
    b_bin = 0
    b_dl = True
    if cn < min_samples_split or cn < 2:
        return b_gain, b_feat, b_thr, b_bin, b_dl
    n = node_of_row.shape[0]
    nfu = feats.shape[0]
    max_nb = 2
    for i in range(nbins.shape[0]):
        if nbins[i] > max_nb:
            max_nb = nbins[i]
    hg = np.empty(max_nb, np.float64)
    hh = np.empty(max_nb, np.float64)
    hc = np.empty(max_nb, np.int64)
    for fi in range(nfu):
        f = feats[fi]
        nb = nbins[f]
        if nb < 2:
            continue
        for b in range(nb):
            hg[b] = 0.0
            hh[b] = 0.0
            hc[b] = 0
        for r in range(n):
            if node_of_row[r] != nid:
                continue
            c = codes[f, r]
            if c < 0:
                continue
            hg[c] += g[r]
            hh[c] += h[r]
            hc[c] += 1
        gp = 0.0
        hp = 0.0
        cp = 0
        for b in range(nb):
            gp += hg[b]
            hp += hh[b]
            cp += hc[b]
        glp = 0.0
        hlp = 0.0
        clp = 0
        fb_gain = NEG_INF
        fb_bin = 0
        fb_dl = True
        for b in range(nb - 1):
            glp += hg[b]
            hlp += hh[b]
            clp += hc[b]
            gain, dl = _eval_candidate(glp, hlp, clp, gp, hp, cp, gn, hn, cn, lam, gamma)
            if gain > fb_gain:
                fb_gain = gain
                fb_bin = b
                fb_dl = dl
        if fb_gain > b_gain:
            b_gain = fb_gain
            b_feat = f
            b_thr = edges_flat[edge_off[f] + fb_bin]
            b_bin = fb_bin
            b_dl = fb_dl
    return b_gain, b_feat, b_thr, b_bin, b_dl


@njit(**_JIT)
def grow_leafwise_hist(codes, nbins, edges_flat, edge_off, feats, in_subset, g, h,
                       num_leaves, min_samples_split, gamma, lam, node_cap):
    n = g.shape[0]
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = _alloc(node_cap)
    node_of_row = np.empty(n, np.int32)
    _init_root(in_subset, g, h, node_of_row, sum_g, sum_h, count)
    node_count = 1
    cand_gain = np.full(node_cap, NEG_INF)
    cand_feat = np.full(node_cap, -1, np.int64)
    cand_thr = np.zeros(node_cap, np.float64)
    cand_bin = np.zeros(node_cap, np.int64)
    cand_dl = np.ones(node_cap, np.uint8)
    node_depth = np.zeros(node_cap, np.int64)

    gain0, feat0, thr0, bin0, dl0 = _hist_candidate(
        codes, nbins, edges_flat, edge_off, feats, node_of_row, 0, g, h,
        sum_g[0], sum_h[0], count[0], min_samples_split, gamma, lam,
    )
    cand_gain[0] = gain0
    cand_feat[0] = feat0
    cand_thr[0] = thr0
    cand_bin[0] = bin0
    cand_dl[0] = 1 if dl0 else 0

    leaf_count = 1
    depth = 0
    while leaf_count < num_leaves:
        nid = -1
        best = NEG_INF
        for i in range(node_count):
            if feature[i] < 0 and cand_gain[i] > best:
                best = cand_gain[i]
                nid = i
        if nid < 0 or not (best > 0.0):
            break
        f = cand_feat[nid]
        feature[nid] = np.int32(f)
        threshold[nid] = cand_thr[nid]
        default_left[nid] = cand_dl[nid]
        raw_gain[nid] = cand_gain[nid] + gamma
        lid = node_count
        rid = node_count + 1
        left[nid] = np.int32(lid)
        right[nid] = np.int32(rid)
        node_count += 2
        node_depth[lid] = node_depth[nid] + 1
        node_depth[rid] = node_depth[nid] + 1
        if node_depth[lid] > depth:
            depth = node_depth[lid]

        cb = cand_bin[nid]
        for r in range(n):
            if node_of_row[r] != nid:
                continue
            c = codes[f, r]
            if c < 0:
                go_left = default_left[nid] == 1
            else:
                go_left = c <= cb
            node_of_row[r] = np.int32(lid) if go_left else np.int32(rid)
        _child_stats(node_of_row, g, h, lid, node_count, sum_g, sum_h, count)

        for child in (lid, rid):
            gain_c, feat_c, thr_c, bin_c, dl_c = _hist_candidate(
                codes, nbins, edges_flat, edge_off, feats, node_of_row, child, g, h,
                sum_g[child], sum_h[child], count[child], min_samples_split, gamma, lam,
            )
            cand_gain[child] = gain_c
            cand_feat[child] = feat_c
            cand_thr[child] = thr_c
            cand_bin[child] = bin_c
            cand_dl[child] = 1 if dl_c else 0
        leaf_count += 1

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


@njit(**_JIT)
def grow_oblivious_hist(codes, nbins, edges_flat, edge_off, feats, in_subset, g, h,
                        max_depth, min_samples_split, gamma, lam, node_cap):
    n = g.shape[0]
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = _alloc(node_cap)
    node_of_row = np.empty(n, np.int32)
    _init_root(in_subset, g, h, node_of_row, sum_g, sum_h, count)
    node_count = 1
    depth = 0
    level = np.empty(node_cap, np.int64)
    level[0] = 0
    level_len = 1
    slot_of = np.full(node_cap, -1, np.int64)
    row_slot = np.empty(n, np.int64)
    nfu = feats.shape[0]
    max_nb = 2
    for i in range(nbins.shape[0]):
        if nbins[i] > max_nb:
            max_nb = nbins[i]

    for level_idx in range(max_depth):
        m = level_len
        for i in range(m):
            slot_of[level[i]] = i
        for r in range(n):
            nid = node_of_row[r]
            row_slot[r] = slot_of[nid] if nid >= 0 else -1

        hg = np.empty((m, max_nb), np.float64)
        hh = np.empty((m, max_nb), np.float64)
        hc = np.empty((m, max_nb), np.int64)
        total = np.empty(max_nb, np.float64)
        best_total = NEG_INF
        best_f = -1
        best_b = -1

        for fi in range(nfu):
            f = feats[fi]
            nb = nbins[f]
            if nb < 2:
                continue
            for s in range(m):
                for b in range(nb):
                    hg[s, b] = 0.0
                    hh[s, b] = 0.0
                    hc[s, b] = 0
            for r in range(n):
                s = row_slot[r]
                if s < 0:
                    continue
                c = codes[f, r]
                if c < 0:
                    continue
                hg[s, c] += g[r]
                hh[s, c] += h[r]
                hc[s, c] += 1
            for b in range(nb - 1):
                total[b] = 0.0
            for s in range(m):
                nid = level[s]
                eligible = count[nid] >= min_samples_split and count[nid] >= 2
                if not eligible:
                    continue
                gp = 0.0
                hp = 0.0
                cp = 0
                for b in range(nb):
                    gp += hg[s, b]
                    hp += hh[s, b]
                    cp += hc[s, b]
                glp = 0.0
                hlp = 0.0
                clp = 0
                for b in range(nb - 1):
                    glp += hg[s, b]
                    hlp += hh[s, b]
                    clp += hc[s, b]
                    gain, _ = _eval_candidate(
                        glp, hlp, clp, gp, hp, cp,
                        sum_g[nid], sum_h[nid], count[nid], lam, gamma,
                    )
                    if np.isfinite(gain):
                        total[b] += gain
            for b in range(nb - 1):
                if total[b] > best_total:
                    best_total = total[b]
                    best_f = f
                    best_b = b

        for i in range(m):
            slot_of[level[i]] = -1
        if not (best_total > 0.0):
            break

        nb = nbins[best_f]
        first_new = node_count
        for s in range(m):
            nid = level[s]
            gp = 0.0
            hp = 0.0
            cp = 0
            hgb = np.zeros(nb, np.float64)
            hhb = np.zeros(nb, np.float64)
            hcb = np.zeros(nb, np.int64)
            for r in range(n):
                if node_of_row[r] != nid:
                    continue
                c = codes[best_f, r]
                if c < 0:
                    continue
                hgb[c] += g[r]
                hhb[c] += h[r]
                hcb[c] += 1
            for b in range(nb):
                gp += hgb[b]
                hp += hhb[b]
                cp += hcb[b]
            glp = 0.0
            hlp = 0.0
            clp = 0
            for b in range(best_b + 1):
                glp += hgb[b]
                hlp += hhb[b]
                clp += hcb[b]
            gain_s, dl_s = _eval_candidate(
                glp, hlp, clp, gp, hp, cp,
                sum_g[nid], sum_h[nid], count[nid], lam, gamma,
            )
            eligible = count[nid] >= min_samples_split and count[nid] >= 2
            feature[nid] = np.int32(best_f)
            threshold[nid] = edges_flat[edge_off[best_f] + best_b]
            default_left[nid] = 1 if dl_s else 0
            if np.isfinite(gain_s) and eligible:
                raw_gain[nid] = gain_s + gamma
            else:
                raw_gain[nid] = 0.0
            left[nid] = np.int32(node_count)
            right[nid] = np.int32(node_count + 1)
            node_count += 2
        depth = level_idx + 1

        for r in range(n):
            nid = node_of_row[r]
            if nid < 0:
                continue
            c = codes[best_f, r]
            if c < 0:
                go_left = default_left[nid] == 1
            else:
                go_left = c <= best_b
            node_of_row[r] = left[nid] if go_left else right[nid]
        _child_stats(node_of_row, g, h, first_new, node_count, sum_g, sum_h, count)
        level_len = node_count - first_new
        for i in range(level_len):
            level[i] = first_new + i

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


@njit(**_JIT)
def _exact_level_scan(values, order_flat, o0, o1, f, row_slot, g, h, m,
                      node_g, node_h, node_c, open_arr, lam, gamma,
                      fb_gain, fb_thr, fb_dl):
    """Boundary scan of one feature over all open slots (two passes).

    Group sums accumulate in value-then-row order and prefixes add one
    finished group at a time, matching the numpy backend's bincount+cumsum.
    """
    gp = np.zeros(m, np.float64)
    hp = np.zeros(m, np.float64)
    cp = np.zeros(m, np.int64)
    ggrp = np.zeros(m, np.float64)
    hgrp = np.zeros(m, np.float64)
    cgrp = np.zeros(m, np.int64)
    last = np.zeros(m, np.float64)
    has = np.zeros(m, np.uint8)

    for idx in range(o0, o1):
        r = order_flat[idx]
        s = row_slot[r]
        if s < 0:
            continue
        v = values[f, r]
        if has[s] == 1 and v != last[s]:
            gp[s] += ggrp[s]
            hp[s] += hgrp[s]
            cp[s] += cgrp[s]
            ggrp[s] = 0.0
            hgrp[s] = 0.0
            cgrp[s] = 0
        ggrp[s] += g[r]
        hgrp[s] += h[r]
        cgrp[s] += 1
        last[s] = v
        has[s] = 1
    for s in range(m):
        if has[s] == 1:
            gp[s] += ggrp[s]
            hp[s] += hgrp[s]
            cp[s] += cgrp[s]

    glp = np.zeros(m, np.float64)
    hlp = np.zeros(m, np.float64)
    clp = np.zeros(m, np.int64)
    for s in range(m):
        ggrp[s] = 0.0
        hgrp[s] = 0.0
        cgrp[s] = 0
        has[s] = 0
        fb_gain[s] = NEG_INF
        fb_thr[s] = 0.0
        fb_dl[s] = 1

    for idx in range(o0, o1):
        r = order_flat[idx]
        s = row_slot[r]
        if s < 0:
            continue
        v = values[f, r]
        if has[s] == 1 and v != last[s]:
            glp[s] += ggrp[s]
            hlp[s] += hgrp[s]
            clp[s] += cgrp[s]
            ggrp[s] = 0.0
            hgrp[s] = 0.0
            cgrp[s] = 0
            nid = open_arr[s]
            gain, dl = _eval_candidate(
                glp[s], hlp[s], clp[s], gp[s], hp[s], cp[s],
                node_g[nid], node_h[nid], node_c[nid], lam, gamma,
            )
            if gain > fb_gain[s]:
                fb_gain[s] = gain
                fb_thr[s] = _mid(last[s], v)
                fb_dl[s] = 1 if dl else 0
        ggrp[s] += g[r]
        hgrp[s] += h[r]
        cgrp[s] += 1
        last[s] = v
        has[s] = 1


@njit(**_JIT)
def grow_depthwise_exact(values, absent, order_flat, order_off, feats, in_subset,
                         g, h, max_depth, min_samples_split, gamma, lam, node_cap):
    n = g.shape[0]
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = _alloc(node_cap)
    node_of_row = np.empty(n, np.int32)
    _init_root(in_subset, g, h, node_of_row, sum_g, sum_h, count)
    node_count = 1
    depth = 0
    level = np.empty(node_cap, np.int64)
    level[0] = 0
    level_len = 1
    slot_of = np.full(node_cap, -1, np.int64)
    row_slot = np.empty(n, np.int64)
    nfu = feats.shape[0]

    for level_idx in range(max_depth):
        m = 0
        open_arr = np.empty(level_len, np.int64)
        for i in range(level_len):
            nid = level[i]
            if count[nid] >= min_samples_split and count[nid] >= 2:
                open_arr[m] = nid
                m += 1
        if m == 0:
            break
        for i in range(m):
            slot_of[open_arr[i]] = i
        for r in range(n):
            nid = node_of_row[r]
            row_slot[r] = slot_of[nid] if nid >= 0 else -1

        best_gain = np.full(m, NEG_INF)
        best_feat = np.full(m, -1, np.int64)
        best_thr = np.zeros(m, np.float64)
        best_dl = np.ones(m, np.uint8)
        fb_gain = np.empty(m, np.float64)
        fb_thr = np.empty(m, np.float64)
        fb_dl = np.empty(m, np.uint8)

        for fi in range(nfu):
            f = feats[fi]
            _exact_level_scan(values, order_flat, order_off[f], order_off[f + 1], f,
                              row_slot, g, h, m, sum_g, sum_h, count, open_arr,
                              lam, gamma, fb_gain, fb_thr, fb_dl)
            for s in range(m):
                if fb_gain[s] > best_gain[s]:
                    best_gain[s] = fb_gain[s]
                    best_feat[s] = f
                    best_thr[s] = fb_thr[s]
                    best_dl[s] = fb_dl[s]

        any_split = False
        first_new = node_count
        for s in range(m):
            if best_gain[s] > 0.0:
                any_split = True
                nid = open_arr[s]
                feature[nid] = np.int32(best_feat[s])
                threshold[nid] = best_thr[s]
                default_left[nid] = best_dl[s]
                raw_gain[nid] = best_gain[s] + gamma
                left[nid] = np.int32(node_count)
                right[nid] = np.int32(node_count + 1)
                node_count += 2
        for i in range(m):
            slot_of[open_arr[i]] = -1
        if not any_split:
            break
        depth = level_idx + 1

        for r in range(n):
            nid = node_of_row[r]
            if nid < 0:
                continue
            if feature[nid] < 0:
                continue
            f = feature[nid]
            if absent[f, r] != 0:
                go_left = default_left[nid] == 1
            else:
                go_left = values[f, r] <= threshold[nid]
            node_of_row[r] = left[nid] if go_left else right[nid]
        _child_stats(node_of_row, g, h, first_new, node_count, sum_g, sum_h, count)
        level_len = node_count - first_new
        for i in range(level_len):
            level[i] = first_new + i

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


@njit(**_JIT)
def _exact_candidate(values, absent, order_flat, order_off, feats, node_of_row, nid,
                     g, h, gn, hn, cn, min_samples_split, gamma, lam):
    """Best (gain, feature, threshold, default_left) for one node, exact scan."""
    b_gain = NEG_INF
    b_feat = -1
    b_thr = 0.0
    b_dl = True
    if cn < min_samples_split or cn < 2:
        return b_gain, b_feat, b_thr, b_dl
    nfu = feats.shape[0]
    for fi in range(nfu):
        f = feats[fi]
        gp = 0.0
        hp = 0.0
        cp = 0
        ggrp = 0.0
        hgrp = 0.0
        cgrp = 0
        last = 0.0
        has = False
        for idx in range(order_off[f], order_off[f + 1]):
            r = order_flat[idx]
            if node_of_row[r] != nid:
                continue
            v = values[f, r]
            if has and v != last:
                gp += ggrp
                hp += hgrp
                cp += cgrp
                ggrp = 0.0
                hgrp = 0.0
                cgrp = 0
            ggrp += g[r]
            hgrp += h[r]
            cgrp += 1
            last = v
            has = True
        if has:
            gp += ggrp
            hp += hgrp
            cp += cgrp

        glp = 0.0
        hlp = 0.0
        clp = 0
        ggrp = 0.0
        hgrp = 0.0
        cgrp = 0
        has = False
        f_gain = NEG_INF
        f_thr = 0.0
        f_dl = True
        for idx in range(order_off[f], order_off[f + 1]):
            r = order_flat[idx]
            if node_of_row[r] != nid:
                continue
            v = values[f, r]
            if has and v != last:
                glp += ggrp
                hlp += hgrp
                clp += cgrp
                ggrp = 0.0
                hgrp = 0.0
                cgrp = 0
                gain, dl = _eval_candidate(glp, hlp, clp, gp, hp, cp, gn, hn, cn,
                                           lam, gamma)
                if gain > f_gain:
                    f_gain = gain
                    f_thr = _mid(last, v)
                    f_dl = dl
            ggrp += g[r]
            hgrp += h[r]
            cgrp += 1
            last = v
            has = True
        if f_gain > b_gain:
            b_gain = f_gain
            b_feat = f
            b_thr = f_thr
            b_dl = f_dl
    return b_gain, b_feat, b_thr, b_dl


@njit(**_JIT)
def grow_leafwise_exact(values, absent, order_flat, order_off, feats, in_subset,
                        g, h, num_leaves, min_samples_split, gamma, lam, node_cap):
    n = g.shape[0]
    feature, threshold, default_left, left, right, raw_gain, sum_g, sum_h, count = _alloc(node_cap)
    node_of_row = np.empty(n, np.int32)
    _init_root(in_subset, g, h, node_of_row, sum_g, sum_h, count)
    node_count = 1
    cand_gain = np.full(node_cap, NEG_INF)
    cand_feat = np.full(node_cap, -1, np.int64)
    cand_thr = np.zeros(node_cap, np.float64)
    cand_dl = np.ones(node_cap, np.uint8)
    node_depth = np.zeros(node_cap, np.int64)

    gain0, feat0, thr0, dl0 = _exact_candidate(
        values, absent, order_flat, order_off, feats, node_of_row, 0, g, h,
        sum_g[0], sum_h[0], count[0], min_samples_split, gamma, lam,
    )
    cand_gain[0] = gain0
    cand_feat[0] = feat0
    cand_thr[0] = thr0
    cand_dl[0] = 1 if dl0 else 0

    leaf_count = 1
    depth = 0
    while leaf_count < num_leaves:
        nid = -1
        best = NEG_INF
        for i in range(node_count):
            if feature[i] < 0 and cand_gain[i] > best:
                best = cand_gain[i]
                nid = i
        if nid < 0 or not (best > 0.0):
            break
        f = cand_feat[nid]
        feature[nid] = np.int32(f)
        threshold[nid] = cand_thr[nid]
        default_left[nid] = cand_dl[nid]
        raw_gain[nid] = cand_gain[nid] + gamma
        lid = node_count
        rid = node_count + 1
        left[nid] = np.int32(lid)
        right[nid] = np.int32(rid)
        node_count += 2
        node_depth[lid] = node_depth[nid] + 1
        node_depth[rid] = node_depth[nid] + 1
        if node_depth[lid] > depth:
            depth = node_depth[lid]

        for r in range(n):
            if node_of_row[r] != nid:
                continue
            if absent[f, r] != 0:
                go_left = default_left[nid] == 1
            else:
                go_left = values[f, r] <= threshold[nid]
            node_of_row[r] = np.int32(lid) if go_left else np.int32(rid)
        _child_stats(node_of_row, g, h, lid, node_count, sum_g, sum_h, count)

        for child in (lid, rid):
            gain_c, feat_c, thr_c, dl_c = _exact_candidate(
                values, absent, order_flat, order_off, feats, node_of_row, child,
                g, h, sum_g[child], sum_h[child], count[child],
                min_samples_split, gamma, lam,
            )
            cand_gain[child] = gain_c
            cand_feat[child] = feat_c
            cand_thr[child] = thr_c
            cand_dl[child] = 1 if dl_c else 0
        leaf_count += 1

    return (node_count, feature, threshold, default_left, left, right, raw_gain,
            sum_g, sum_h, count, depth, node_of_row)


@njit(**_JIT)
def assign_leaves(feature, threshold, default_left, left, right, values, absent):
    n = values.shape[1]
    out = np.empty(n, np.int32)
    for r in range(n):
        nid = 0
        while feature[nid] >= 0:
            f = feature[nid]
            if absent[f, r] != 0:
                go_left = default_left[nid] == 1
            else:
                go_left = values[f, r] <= threshold[nid]
            nid = left[nid] if go_left else right[nid]
        out[r] = nid
    return out
