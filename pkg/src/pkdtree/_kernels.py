"""Compiled inner loops.

Every kernel is ``nogil`` so the fork-join layer in :mod:`pkdtree.parallel`
can run them concurrently on disjoint slices.  Kernels are specialised per
coordinate dtype (int64 / float64) by numba's dispatcher.
"""

import numpy as np
from numba import njit, types
from numba.extending import overload

KIND_INTERIOR = 0
KIND_LEAF = 1
KIND_HEAVY = 2


def _stretch(lo, hi):
    return hi - lo


@overload(_stretch)
def _ol_stretch(lo, hi):
    if isinstance(lo, types.Integer):
        # exact for any int64 pair with lo <= hi
        return lambda lo, hi: np.uint64(hi) - np.uint64(lo)
    return lambda lo, hi: hi - lo


def _midpoint(lo, hi):
    return lo + (hi - lo) / 2


@overload(_midpoint)
def _ol_midpoint(lo, hi):
    if isinstance(lo, types.Integer):
        return lambda lo, hi: np.int64(
            np.uint64(lo) + ((np.uint64(hi) - np.uint64(lo)) >> np.uint64(1))
        )
    return lambda lo, hi: lo + (hi - lo) / 2


@njit(nogil=True, cache=True)
def _dim_order(blo, bhi, order):
    # dimensions by decreasing stretch, ties by index (stable insertion sort)
    D = len(blo)
    for i in range(D):
        order[i] = i
    for i in range(1, D):
        cur = order[i]
        w = _stretch(blo[cur], bhi[cur])
        j = i - 1
        while j >= 0 and _stretch(blo[order[j]], bhi[order[j]]) < w:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = cur


@njit(nogil=True, cache=True)
def _select(a, k):
    """k-th smallest of ``a`` (reorders ``a`` in place)."""
    lo = 0
    hi = len(a) - 1
    while hi > lo:
        mid = (lo + hi) >> 1
        if a[mid] < a[lo]:
            a[mid], a[lo] = a[lo], a[mid]
        if a[hi] < a[lo]:
            a[hi], a[lo] = a[lo], a[hi]
        if a[hi] < a[mid]:
            a[hi], a[mid] = a[mid], a[hi]
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                a[i], a[j] = a[j], a[i]
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            return a[k]
    return a[k]


@njit(nogil=True, cache=True)
def _partition_rows(pts, lo, hi, d, c):
    """Move rows with ``pts[:, d] < c`` to the front of ``[lo, hi)``."""
    D = pts.shape[1]
    i = lo
    j = hi - 1
    while True:
        while i <= j and pts[i, d] < c:
            i += 1
        while i <= j and pts[j, d] >= c:
            j -= 1
        if i >= j:
            break
        for t in range(D):
            tmp = pts[i, t]
            pts[i, t] = pts[j, t]
            pts[j, t] = tmp
        i += 1
        j -= 1
    return i


@njit(nogil=True, cache=True)
def _swap_rows(pts, i, j):
    for t in range(pts.shape[1]):
        tmp = pts[i, t]
        pts[i, t] = pts[j, t]
        pts[j, t] = tmp


@njit(nogil=True, cache=True)
def _nth_rows(pts, lo, hi, k, d):
    """Quickselect on rows by column ``d`` so row ``k`` holds the k-th value."""
    hi -= 1
    while hi > lo:
        mid = (lo + hi) >> 1
        if pts[mid, d] < pts[lo, d]:
            _swap_rows(pts, mid, lo)
        if pts[hi, d] < pts[lo, d]:
            _swap_rows(pts, hi, lo)
        if pts[hi, d] < pts[mid, d]:
            _swap_rows(pts, hi, mid)
        pivot = pts[mid, d]
        i = lo
        j = hi
        while i <= j:
            while pts[i, d] < pivot:
                i += 1
            while pts[j, d] > pivot:
                j -= 1
            if i <= j:
                if i != j:
                    _swap_rows(pts, i, j)
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            return
    return


@njit(nogil=True, cache=True)
def _median_split(pts, lo, hi, blo, bhi, order):
    """Exact-median split of rows ``[lo, hi)``; rows end up partitioned.

    Tries the widest subspace dimension first and uses the value of rank
    ``n // 2``.  When that value is also the minimum (ties would leave the
    left side empty) the next larger distinct value is used instead; a
    constant dimension falls through to the next widest one.  Returns
    ``(dim, coord, mid)`` with rows ``[lo, mid)`` strictly below ``coord``,
    or ``dim == -1`` when all rows are identical.
    """
    n = hi - lo
    D = pts.shape[1]
    _dim_order(blo, bhi, order)
    k = lo + n // 2
    for t in range(D):
        d = order[t]
        _nth_rows(pts, lo, hi, k, d)
        m = pts[k, d]
        # rows [lo, k) are <= m; push the ties to the back of that range
        mid = _partition_rows(pts, lo, k, d, m)
        if mid > lo:
            return d, m, mid
        has_greater = False
        nxt = m
        for i in range(k + 1, hi):
            v = pts[i, d]
            if v > m and (not has_greater or v < nxt):
                nxt = v
                has_greater = True
        if has_greater:
            mid = _partition_rows(pts, lo, hi, d, nxt)
            return d, nxt, mid
    return -1, pts[lo, 0], lo


@njit(nogil=True, cache=True)
def split_once(pts, blo, bhi):
    """One exact-median partition of all rows; returns ``(dim, coord, mid)``."""
    order = np.empty(pts.shape[1], np.int64)
    return _median_split(pts, 0, pts.shape[0], blo, bhi, order)


@njit(nogil=True, cache=True)
def _plain_into(pts, lo0, hi0, blo, bhi, phi, kind, ndim, ncoord, nleft, nright,
                nstart, ncount, nn, st_lo, st_hi, st_node, st_box, box, order):
    st_lo[0] = lo0
    st_hi[0] = hi0
    st_node[0] = nn
    st_box[0, 0, :] = blo
    st_box[0, 1, :] = bhi
    sp = 1
    nn += 1
    while sp > 0:
        sp -= 1
        lo = st_lo[sp]
        hi = st_hi[sp]
        node = st_node[sp]
        size = hi - lo
        nstart[node] = lo
        ncount[node] = size
        if size <= phi:
            kind[node] = KIND_LEAF
            continue
        box[:, :] = st_box[sp]
        d, c, mid = _median_split(pts, lo, hi, box[0], box[1], order)
        if d < 0:
            kind[node] = KIND_HEAVY
            continue
        kind[node] = KIND_INTERIOR
        ndim[node] = d
        ncoord[node] = c
        left = nn
        right = nn + 1
        nn += 2
        nleft[node] = left
        nright[node] = right
        # right child below left on the stack so the left side runs first
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_node[sp] = right
        st_box[sp, 0, :] = box[0]
        st_box[sp, 1, :] = box[1]
        if c > st_box[sp, 0, d]:
            st_box[sp, 0, d] = c
        sp += 1
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_node[sp] = left
        st_box[sp, 0, :] = box[0]
        st_box[sp, 1, :] = box[1]
        if c < st_box[sp, 1, d]:
            st_box[sp, 1, d] = c
        sp += 1
    return nn


@njit(nogil=True, cache=True)
def plain_build(pts, tlo, thi, tbox, phi, kind, ndim, ncoord, nleft, nright, nstart, ncount, roots):
    """Sequential exact-median construction of a forest.

    Task ``t`` builds a subtree over rows ``[tlo[t], thi[t])`` inside the
    subspace ``tbox[t]``; rows are permuted in place so every leaf is a
    contiguous slice.  Children always get larger ids than their parent and
    ``roots[t]`` receives each task's root id.  Output arrays need room for
    ``2 * rows + tasks`` nodes.  Returns the node count.
    """
    D = pts.shape[1]
    biggest = 0
    for t in range(len(tlo)):
        biggest = max(biggest, thi[t] - tlo[t])
    cap = biggest + 1
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_node = np.empty(cap, np.int64)
    st_box = np.empty((cap, 2, D), pts.dtype)
    box = np.empty((2, D), pts.dtype)
    order = np.empty(D, np.int64)
    nn = 0
    for t in range(len(tlo)):
        roots[t] = nn
        nn = _plain_into(pts, tlo[t], thi[t], tbox[t, 0], tbox[t, 1], phi, kind, ndim,
                         ncoord, nleft, nright, nstart, ncount, nn, st_lo, st_hi,
                         st_node, st_box, box, order)
    return nn


@njit(nogil=True, cache=True)
def build_skeleton(samples, blo, bhi, lam, dims, coords):
    """First ``lam`` levels of an exact-median kd-tree on ``samples``.

    Heap layout: entry ``e`` has children ``2e+1`` and ``2e+2``; the
    ``2**lam`` external positions are the buckets, left to right.  Entries
    that receive no samples split their subspace at the midpoint of its
    widest dimension.  ``samples`` is reordered in place.
    """
    m = samples.shape[0]
    D = samples.shape[1]
    ne = (1 << lam) - 1
    ra = np.empty(ne, np.int64)
    rb = np.empty(ne, np.int64)
    boxes = np.empty((ne, 2, D), samples.dtype)
    keys = np.empty(max(m, 1), samples.dtype)
    order = np.empty(D, np.int64)
    ra[0] = 0
    rb[0] = m
    boxes[0, 0, :] = blo
    boxes[0, 1, :] = bhi
    for e in range(ne):
        a = ra[e]
        b = rb[e]
        n = b - a
        _dim_order(boxes[e, 0], boxes[e, 1], order)
        d = order[0]
        if n == 0:
            c = _midpoint(boxes[e, 0, d], boxes[e, 1, d])
            split = a
        else:
            for i in range(n):
                keys[i] = samples[a + i, d]
            c = _select(keys[:n], n // 2)
            split = _partition_rows(samples, a, b, d, c)
        dims[e] = d
        coords[e] = c
        l = 2 * e + 1
        if l < ne:
            r = l + 1
            ra[l] = a
            rb[l] = split
            ra[r] = split
            rb[r] = b
            boxes[l] = boxes[e]
            boxes[r] = boxes[e]
            if c < boxes[l, 1, d]:
                boxes[l, 1, d] = c
            if c > boxes[r, 0, d]:
                boxes[r, 0, d] = c


@njit(nogil=True, cache=True)
def lookup(p, root, sk_dim, sk_coord, sk_left, sk_right):
    i = root
    while i >= 0:
        if p[sk_dim[i]] < sk_coord[i]:
            i = sk_left[i]
        else:
            i = sk_right[i]
    return -i - 1


@njit(nogil=True, cache=True)
def lookup_all(pts, root, sk_dim, sk_coord, sk_left, sk_right, out):
    for k in range(pts.shape[0]):
        out[k] = lookup(pts[k], root, sk_dim, sk_coord, sk_left, sk_right)


@njit(nogil=True, cache=True)
def sieve_count(pts, c0, c1, chunk, root, sk_dim, sk_coord, sk_left, sk_right, A):
    """Per-chunk bucket counts for chunks ``[c0, c1)``.

    Returns ``(comparisons, max_comparisons_per_point)``.
    """
    n = pts.shape[0]
    comps = 0
    worst = 0
    for ci in range(c0, c1):
        start = ci * chunk
        stop = min(start + chunk, n)
        for k in range(start, stop):
            i = root
            steps = 0
            while i >= 0:
                steps += 1
                if pts[k, sk_dim[i]] < sk_coord[i]:
                    i = sk_left[i]
                else:
                    i = sk_right[i]
            A[ci, -i - 1] += 1
            comps += steps
            if steps > worst:
                worst = steps
    return comps, worst


@njit(nogil=True, cache=True)
def sieve_distribute(pts, out, c0, c1, chunk, root, sk_dim, sk_coord, sk_left, sk_right, B):
    """Scatter chunks ``[c0, c1)`` to ``out`` using ``B`` as running cursors."""
    n = pts.shape[0]
    D = pts.shape[1]
    for ci in range(c0, c1):
        start = ci * chunk
        stop = min(start + chunk, n)
        for k in range(start, stop):
            i = root
            while i >= 0:
                if pts[k, sk_dim[i]] < sk_coord[i]:
                    i = sk_left[i]
                else:
                    i = sk_right[i]
            j = -i - 1
            dst = B[ci, j]
            for t in range(D):
                out[dst, t] = pts[k, t]
            B[ci, j] = dst + 1


@njit(nogil=True, cache=True)
def varden_walk(out, start, restart_u, restart_prob, steps, jumps, lo, hi):
    n = out.shape[0]
    D = out.shape[1]
    if n == 0:
        return
    pos = start.copy()
    jidx = 0
    for i in range(n):
        if i > 0:
            if restart_u[i] < restart_prob:
                pos[:] = jumps[jidx]
                jidx += 1
            else:
                for t in range(D):
                    v = pos[t] + steps[i, t]
                    if v < lo:
                        v = lo
                    elif v > hi:
                        v = hi
                    pos[t] = v
        out[i] = pos


@njit(nogil=True, cache=True)
def bbox(pts, lo, hi):
    n = pts.shape[0]
    D = pts.shape[1]
    for t in range(D):
        lo[t] = pts[0, t]
        hi[t] = pts[0, t]
    for i in range(1, n):
        for t in range(D):
            v = pts[i, t]
            if v < lo[t]:
                lo[t] = v
            elif v > hi[t]:
                hi[t] = v


@njit(nogil=True, cache=True)
def column_scan(A, B):
    """Exclusive prefix sum of ``A`` read column by column, written to ``B``."""
    nr, nc = A.shape
    cursor = np.zeros(nc, A.dtype)
    # column totals, then their exclusive scan, then one row-major sweep
    for i in range(nr):
        for j in range(nc):
            cursor[j] += A[i, j]
    acc = 0
    for j in range(nc):
        c = cursor[j]
        cursor[j] = acc
        acc += c
    for i in range(nr):
        for j in range(nc):
            B[i, j] = cursor[j]
            cursor[j] += A[i, j]
