"""Hot kernels with selectable backend.

RECBENCH_BACKEND=auto|numba|numpy picks the implementation at import
time. The numba path wraps plain loop kernels in @njit; the numpy path
uses vectorized equivalents. Both compute the same results (floats may
differ in the last ulp because accumulation order differs).

All randomness stays outside these kernels: callers pre-draw with
numpy Generators and pass arrays in, so streams are identical on both
backends.
"""

import math
import os

import numpy as np

_requested = os.environ.get("RECBENCH_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"RECBENCH_BACKEND must be auto, numba or numpy, got {_requested!r}"
    )

if _requested == "numpy":
    NUMBA_ENABLED = False
elif _requested == "numba":
    from numba import njit  # noqa: F401  hard requirement when forced

    NUMBA_ENABLED = True
else:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def _jit(fn):
    if NUMBA_ENABLED:
        return njit(cache=True, nogil=True)(fn)
    return fn


# --- BPR epoch sweep ---

def _bpr_epoch_loops(users, pos_items, neg_items, user_f, item_f, lr, reg):
    # Sequential SGD over rows; returns the summed regularized loss
    # measured at pre-update parameters.
    n = users.shape[0]
    d = user_f.shape[1]
    total = 0.0
    for r in range(n):
        u = users[r]
        i = pos_items[r]
        j = neg_items[r]
        x = 0.0
        for k in range(d):
            x += user_f[u, k] * (item_f[i, k] - item_f[j, k])
        # stable -ln(sigmoid(x)) and sigmoid(-x)
        if x >= 0.0:
            e = math.exp(-x)
            loss = math.log1p(e)
            g = e / (1.0 + e)
        else:
            e = math.exp(x)
            loss = -x + math.log1p(e)
            g = 1.0 / (1.0 + e)
        sq = 0.0
        for k in range(d):
            sq += (
                user_f[u, k] * user_f[u, k]
                + item_f[i, k] * item_f[i, k]
                + item_f[j, k] * item_f[j, k]
            )
        total += loss + reg * sq
        for k in range(d):
            pu = user_f[u, k]
            qi = item_f[i, k]
            qj = item_f[j, k]
            user_f[u, k] = pu + lr * (g * (qi - qj) - 2.0 * reg * pu)
            item_f[i, k] = qi + lr * (g * pu - 2.0 * reg * qi)
            item_f[j, k] = qj + lr * (-g * pu - 2.0 * reg * qj)
    return total


_bpr_epoch_jit = _jit(_bpr_epoch_loops)


def _bpr_epoch_numpy(users, pos_items, neg_items, user_f, item_f, lr, reg):
    n = users.shape[0]
    total = 0.0
    for r in range(n):
        u = users[r]
        i = pos_items[r]
        j = neg_items[r]
        pu = user_f[u].copy()
        qi = item_f[i].copy()
        qj = item_f[j].copy()
        x = float(pu @ (qi - qj))
        if x >= 0.0:
            e = math.exp(-x)
            loss = math.log1p(e)
            g = e / (1.0 + e)
        else:
            e = math.exp(x)
            loss = -x + math.log1p(e)
            g = 1.0 / (1.0 + e)
        total += loss + reg * float(pu @ pu + qi @ qi + qj @ qj)
        user_f[u] = pu + lr * (g * (qi - qj) - 2.0 * reg * pu)
        item_f[i] = qi + lr * (g * pu - 2.0 * reg * qi)
        item_f[j] = qj + lr * (-g * pu - 2.0 * reg * qj)
    return total


def bpr_epoch(users, pos_items, neg_items, user_f, item_f, lr, reg):
    """One in-place SGD sweep over (user, pos, neg) triples."""
    if NUMBA_ENABLED:
        return _bpr_epoch_jit(users, pos_items, neg_items, user_f, item_f,
                              float(lr), float(reg))
    return _bpr_epoch_numpy(users, pos_items, neg_items, user_f, item_f,
                            float(lr), float(reg))


# --- interaction k-core ---

def _k_core_mask_loops(u_idx, i_idx, n_users, n_items, k_user, k_item):
    # Worklist pruning: degree counters plus a stack of freshly dead
    # vertices; each edge is touched O(1) times.
    n = u_idx.shape[0]
    user_deg = np.zeros(n_users, np.int64)
    item_deg = np.zeros(n_items, np.int64)
    for r in range(n):
        user_deg[u_idx[r]] += 1
        item_deg[i_idx[r]] += 1

    u_ptr = np.zeros(n_users + 1, np.int64)
    i_ptr = np.zeros(n_items + 1, np.int64)
    for r in range(n):
        u_ptr[u_idx[r] + 1] += 1
        i_ptr[i_idx[r] + 1] += 1
    for v in range(n_users):
        u_ptr[v + 1] += u_ptr[v]
    for v in range(n_items):
        i_ptr[v + 1] += i_ptr[v]
    u_rows = np.empty(n, np.int64)
    i_rows = np.empty(n, np.int64)
    u_fill = u_ptr[:n_users].copy()
    i_fill = i_ptr[:n_items].copy()
    for r in range(n):
        u = u_idx[r]
        u_rows[u_fill[u]] = r
        u_fill[u] += 1
        it = i_idx[r]
        i_rows[i_fill[it]] = r
        i_fill[it] += 1

    alive = np.ones(n, np.bool_)
    user_alive = np.ones(n_users, np.bool_)
    item_alive = np.ones(n_items, np.bool_)
    stack_kind = np.empty(n_users + n_items, np.int8)
    stack_id = np.empty(n_users + n_items, np.int64)
    top = 0
    for v in range(n_users):
        if user_deg[v] < k_user:
            user_alive[v] = False
            stack_kind[top] = 0
            stack_id[top] = v
            top += 1
    for v in range(n_items):
        if item_deg[v] < k_item:
            item_alive[v] = False
            stack_kind[top] = 1
            stack_id[top] = v
            top += 1

    while top > 0:
        top -= 1
        kind = stack_kind[top]
        v = stack_id[top]
        if kind == 0:
            for p in range(u_ptr[v], u_ptr[v + 1]):
                r = u_rows[p]
                if alive[r]:
                    alive[r] = False
                    it = i_idx[r]
                    item_deg[it] -= 1
                    if item_alive[it] and item_deg[it] < k_item:
                        item_alive[it] = False
                        stack_kind[top] = 1
                        stack_id[top] = it
                        top += 1
        else:
            for p in range(i_ptr[v], i_ptr[v + 1]):
                r = i_rows[p]
                if alive[r]:
                    alive[r] = False
                    u = u_idx[r]
                    user_deg[u] -= 1
                    if user_alive[u] and user_deg[u] < k_user:
                        user_alive[u] = False
                        stack_kind[top] = 0
                        stack_id[top] = u
                        top += 1
    return alive


_k_core_mask_jit = _jit(_k_core_mask_loops)


def _k_core_mask_numpy(u_idx, i_idx, n_users, n_items, k_user, k_item):
    alive = np.ones(u_idx.shape[0], bool)
    n_alive = alive.sum()
    while True:
        user_deg = np.bincount(u_idx[alive], minlength=n_users)
        keep = alive & (user_deg[u_idx] >= k_user)
        item_deg = np.bincount(i_idx[keep], minlength=n_items)
        keep &= item_deg[i_idx] >= k_item
        n_keep = keep.sum()
        if n_keep == n_alive:
            return keep
        alive = keep
        n_alive = n_keep


def k_core_mask(u_idx, i_idx, n_users, n_items, k_user, k_item):
    """Row-survival mask of the maximal (k_user, k_item)-core."""
    u_idx = np.ascontiguousarray(u_idx, np.int64)
    i_idx = np.ascontiguousarray(i_idx, np.int64)
    if u_idx.shape[0] == 0:
        return np.zeros(0, bool)
    if NUMBA_ENABLED:
        return _k_core_mask_jit(u_idx, i_idx, int(n_users), int(n_items),
                                int(k_user), int(k_item))
    return _k_core_mask_numpy(u_idx, i_idx, int(n_users), int(n_items),
                              int(k_user), int(k_item))


# --- knowledge-graph k-core ---

def _kg_core_mask_loops(h_idx, r_idx, t_idx, n_entities, n_relations, k):
    # Entity degree counts triple membership (a self-loop counts once);
    # relation degree counts labeled triples.
    n = h_idx.shape[0]
    ent_deg = np.zeros(n_entities, np.int64)
    rel_deg = np.zeros(n_relations, np.int64)
    for r in range(n):
        ent_deg[h_idx[r]] += 1
        if t_idx[r] != h_idx[r]:
            ent_deg[t_idx[r]] += 1
        rel_deg[r_idx[r]] += 1

    # adjacency: each triple listed under its head and (if distinct) tail
    e_ptr = np.zeros(n_entities + 1, np.int64)
    r_ptr = np.zeros(n_relations + 1, np.int64)
    for r in range(n):
        e_ptr[h_idx[r] + 1] += 1
        if t_idx[r] != h_idx[r]:
            e_ptr[t_idx[r] + 1] += 1
        r_ptr[r_idx[r] + 1] += 1
    for v in range(n_entities):
        e_ptr[v + 1] += e_ptr[v]
    for v in range(n_relations):
        r_ptr[v + 1] += r_ptr[v]
    e_rows = np.empty(e_ptr[n_entities], np.int64)
    r_rows = np.empty(n, np.int64)
    e_fill = e_ptr[:n_entities].copy()
    r_fill = r_ptr[:n_relations].copy()
    for r in range(n):
        h = h_idx[r]
        e_rows[e_fill[h]] = r
        e_fill[h] += 1
        if t_idx[r] != h:
            t = t_idx[r]
            e_rows[e_fill[t]] = r
            e_fill[t] += 1
        rel = r_idx[r]
        r_rows[r_fill[rel]] = r
        r_fill[rel] += 1

    alive = np.ones(n, np.bool_)
    ent_alive = np.ones(n_entities, np.bool_)
    rel_alive = np.ones(n_relations, np.bool_)
    stack_kind = np.empty(n_entities + n_relations, np.int8)
    stack_id = np.empty(n_entities + n_relations, np.int64)
    top = 0
    for v in range(n_entities):
        if ent_deg[v] < k:
            ent_alive[v] = False
            stack_kind[top] = 0
            stack_id[top] = v
            top += 1
    for v in range(n_relations):
        if rel_deg[v] < k:
            rel_alive[v] = False
            stack_kind[top] = 1
            stack_id[top] = v
            top += 1

    while top > 0:
        top -= 1
        kind = stack_kind[top]
        v = stack_id[top]
        if kind == 0:
            lo = e_ptr[v]
            hi = e_ptr[v + 1]
        else:
            lo = r_ptr[v]
            hi = r_ptr[v + 1]
        for p in range(lo, hi):
            r = e_rows[p] if kind == 0 else r_rows[p]
            if not alive[r]:
                continue
            alive[r] = False
            h = h_idx[r]
            t = t_idx[r]
            rel = r_idx[r]
            ent_deg[h] -= 1
            if t != h:
                ent_deg[t] -= 1
            rel_deg[rel] -= 1
            if ent_alive[h] and ent_deg[h] < k:
                ent_alive[h] = False
                stack_kind[top] = 0
                stack_id[top] = h
                top += 1
            if t != h and ent_alive[t] and ent_deg[t] < k:
                ent_alive[t] = False
                stack_kind[top] = 0
                stack_id[top] = t
                top += 1
            if rel_alive[rel] and rel_deg[rel] < k:
                rel_alive[rel] = False
                stack_kind[top] = 1
                stack_id[top] = rel
                top += 1
    return alive


_kg_core_mask_jit = _jit(_kg_core_mask_loops)


def _kg_core_mask_numpy(h_idx, r_idx, t_idx, n_entities, n_relations, k):
    alive = np.ones(h_idx.shape[0], bool)
    n_alive = alive.sum()
    while True:
        head_deg = np.bincount(h_idx[alive], minlength=n_entities)
        tail_deg = np.bincount(t_idx[alive], minlength=n_entities)
        dup = np.bincount(h_idx[alive & (h_idx == t_idx)],
                          minlength=n_entities)
        ent_deg = head_deg + tail_deg - dup
        keep = alive & (ent_deg[h_idx] >= k) & (ent_deg[t_idx] >= k)
        rel_deg = np.bincount(r_idx[keep], minlength=n_relations)
        keep &= rel_deg[r_idx] >= k
        n_keep = keep.sum()
        if n_keep == n_alive:
            return keep
        alive = keep
        n_alive = n_keep


def kg_core_mask(h_idx, r_idx, t_idx, n_entities, n_relations, k):
    """Triple-survival mask of the maximal entity/relation k-core."""
    h_idx = np.ascontiguousarray(h_idx, np.int64)
    r_idx = np.ascontiguousarray(r_idx, np.int64)
    t_idx = np.ascontiguousarray(t_idx, np.int64)
    if h_idx.shape[0] == 0:
        return np.zeros(0, bool)
    if NUMBA_ENABLED:
        return _kg_core_mask_jit(h_idx, r_idx, t_idx, int(n_entities),
                                 int(n_relations), int(k))
    return _kg_core_mask_numpy(h_idx, r_idx, t_idx, int(n_entities),
                               int(n_relations), int(k))
