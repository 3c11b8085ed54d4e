"""numba-compiled kernels; same signatures and outputs as ``_numpy``."""
import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _C1
    z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _key(seed, stream, path):
    """Hash state after the (seed, stream, path) words; reused across a replica."""
    h = _mix(np.uint64(seed) + _GOLDEN * (np.uint64(stream) + np.uint64(1)))
    return _mix(h ^ (np.uint64(path) + _GOLDEN))


@njit(cache=True, nogil=True)
def _draw_keyed(h, level, index, coord, modulus):
    h = _mix(h ^ (np.uint64(level) + _GOLDEN))
    h = _mix(h ^ (np.uint64(index) + _GOLDEN))
    h = _mix(h ^ (np.uint64(coord) + _GOLDEN))
    m = np.uint64(modulus)
    if m & (m - np.uint64(1)) == np.uint64(0):  # p = 2: mask instead of divide
        return np.int64(h & (m - np.uint64(1)))
    return np.int64(h % m)


@njit(cache=True, nogil=True)
def _draw(seed, stream, path, level, index, coord, modulus):
    return _draw_keyed(_key(seed, stream, path), level, index, coord, modulus)


@njit(cache=True, nogil=True)
def _add(a, b, p, prec, mod, carry):
    if carry:
        return (a + b) % mod
    out = 0
    pw = 1
    for _ in range(prec):
        out += (((a // pw) % p + (b // pw) % p) % p) * pw
        pw *= p
    return out


@njit(cache=True, nogil=True)
def _add_reduced(a, b, p, prec, mod, carry):
    """``_add`` for operands already in ``[0, mod)``; avoids a division when carrying."""
    if carry:
        s = a + b
        return s - mod if s >= mod else s
    return _add(a, b, p, prec, mod, carry)


@njit(cache=True, nogil=True)
def _powers(p, count):
    pw = np.empty(count, dtype=np.int64)
    pw[0] = 1
    for i in range(1, count):
        pw[i] = pw[i - 1] * p
    return pw


@njit(cache=True, nogil=True)
def _draw_flat(seed, stream, path, level, index, coord, modulus):
    out = np.empty(path.shape[0], dtype=np.int64)
    for i in range(path.shape[0]):
        out[i] = _draw(seed, stream, path[i], level[i], index[i], coord[i], modulus[i])
    return out


def draw_uniform(seed, stream, path, level, index, coord, modulus):
    """Keyed uniform integers in ``[0, modulus)``; arguments broadcast."""
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=np.int64)
                                 for a in (path, level, index, coord, modulus)))
    shape = arrs[0].shape
    flat = [np.ascontiguousarray(a).ravel() for a in arrs]
    return _draw_flat(np.int64(seed), np.int64(stream), *flat).reshape(shape)


@njit(cache=True, nogil=True)
def _add_flat(a, b, p, prec, carry):
    mod = p ** prec
    out = np.empty(a.shape[0], dtype=np.int64)
    for i in range(a.shape[0]):
        out[i] = _add(a[i], b[i], p, prec, mod, carry)
    return out


def add_mod(a, b, p, prec, carry):
    """Sum in ``Z/p^prec``: ordinary carries, or digit-wise mod p when ``carry`` is false."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))
    shape = a.shape
    out = _add_flat(np.ascontiguousarray(a).ravel(), np.ascontiguousarray(b).ravel(),
                    p, prec, bool(carry))
    return out.reshape(shape)


@njit(cache=True, nogil=True)
def _tree_sums(seed, stream, paths, alt, p, N, d, n, prec, carry, split):
    R = paths.shape[0]
    fan = p ** N
    total = fan ** n
    mod = p ** prec
    pw = _powers(p, max(n, prec) + 2)
    out = np.empty((R, total, d), dtype=np.int64)
    prev = np.empty((total, d), dtype=np.int64)
    cur = np.empty((total, d), dtype=np.int64)
    for r in range(R):
        count = 1
        for k in range(n + 1):
            key = _key(seed, stream, alt[r] if (split >= 0 and k >= split) else paths[r])
            for idx in range(count):
                parent = idx // fan
                for c in range(d):
                    z = 0
                    if k < prec:
                        z = _draw_keyed(key, k, idx, c, pw[prec - k]) * pw[k]
                    if k == 0:
                        cur[idx, c] = z
                    else:
                        cur[idx, c] = _add_reduced(prev[parent, c], z, p, prec, mod, carry)
            prev, cur = cur, prev
            count *= fan
        out[r] = prev
    return out


def tree_sums(seed, stream, paths, p, N, d, n, prec, carry, split=-1, alt_paths=None):
    """Partial sums of the ball weights down to level ``n``, one row per level-n ball."""
    paths = np.ascontiguousarray(paths, dtype=np.int64)
    alt = paths if alt_paths is None else np.ascontiguousarray(alt_paths, dtype=np.int64)
    return _tree_sums(np.int64(seed), np.int64(stream), paths, alt, p, N, d, n, prec,
                      bool(carry), split)


@njit(cache=True, nogil=True)
def _eval_points(seed, stream, paths, p, N, d, depth, prec, carry, points):
    R = paths.shape[0]
    P = points.shape[0]
    fan = p ** N
    mod = p ** prec
    pw = _powers(p, max(depth, prec) + 2)
    # tree index of every point at every level, shared by all replicas
    idx = np.zeros((P, depth + 1), dtype=np.int64)
    for q in range(P):
        cur = 0
        for k in range(1, depth + 1):
            group = 0
            for i in range(N):
                group = group * p + (points[q, i] // pw[k - 1]) % p
            cur = cur * fan + group
            idx[q, k] = cur
    out = np.zeros((R, P, d), dtype=np.int64)
    top = min(depth + 1, prec)
    for r in range(R):
        key = _key(seed, stream, paths[r])
        for q in range(P):
            for c in range(d):
                acc = 0
                for k in range(top):
                    z = _draw_keyed(key, k, idx[q, k], c, pw[prec - k]) * pw[k]
                    acc = _add_reduced(acc, z, p, prec, mod, carry)
                out[r, q, c] = acc
    return out


def eval_points(seed, stream, paths, p, N, d, depth, prec, carry, points):
    """Values of the level-``depth`` partial sum at explicit index points."""
    return _eval_points(np.int64(seed), np.int64(stream),
                        np.ascontiguousarray(paths, dtype=np.int64), p, N, d, depth, prec,
                        bool(carry), np.ascontiguousarray(points, dtype=np.int64))


@njit(cache=True, nogil=True)
def _grow(a, size):
    if size <= a.shape[0]:
        return a
    cap = a.shape[0]
    while cap < size:
        cap *= 2
    b = np.empty((cap,) + a.shape[1:], dtype=a.dtype)
    b[:a.shape[0]] = a
    return b


@njit(cache=True, nogil=True)
def _candidate_walk(seed, stream, paths, p, N, d, m, carry):
    R = paths.shape[0]
    fan = p ** N
    prec = m + 1
    mod = p ** prec
    cand = np.zeros((R, m + 1), dtype=np.int64)
    surv = np.zeros((R, m + 1), dtype=np.int64)
    offspring = np.zeros((R, max(m, 1), fan + 1), dtype=np.int64)
    pw = _powers(p, prec + 2)
    idx = np.empty(64, dtype=np.int64)
    par = np.empty(64, dtype=np.int64)
    val = np.empty((64, d), dtype=np.int64)
    start = np.empty(m + 2, dtype=np.int64)
    zbuf = np.empty(d, dtype=np.int64)
    for r in range(R):
        key = _key(seed, stream, paths[r])
        ok = True
        for c in range(d):
            val[0, c] = _draw_keyed(key, 0, 0, c, mod)
            if val[0, c] % p != 0:
                ok = False
        if not ok:
            continue
        idx[0] = 0
        par[0] = -1
        start[0] = 0
        start[1] = 1
        size = 1
        for k in range(m):
            lo = start[k]
            hi = start[k + 1]
            step = pw[k + 2]
            for j in range(lo, hi):
                for ch in range(fan):
                    cidx = idx[j] * fan + ch
                    good = True
                    for c in range(d):
                        z = _draw_keyed(key, k + 1, cidx, c, pw[prec - k - 1]) * pw[k + 1]
                        zbuf[c] = _add_reduced(val[j, c], z, p, prec, mod, carry)
                        if zbuf[c] % step != 0:
                            good = False
                    if good:
                        idx = _grow(idx, size + 1)
                        par = _grow(par, size + 1)
                        val = _grow(val, size + 1)
                        idx[size] = cidx
                        par[size] = j
                        for c in range(d):
                            val[size, c] = zbuf[c]
                        size += 1
            start[k + 2] = size
        for k in range(m + 1):
            cand[r, k] = start[k + 1] - start[k]
        nchild = np.zeros(size, dtype=np.int64)
        alive = np.zeros(size, dtype=np.bool_)
        for j in range(start[m], start[m + 1]):
            alive[j] = True
        surv[r, m] = start[m + 1] - start[m]
        for k in range(m - 1, -1, -1):
            for j in range(start[k + 1], start[k + 2]):
                if alive[j]:
                    nchild[par[j]] += 1
            for j in range(start[k], start[k + 1]):
                if nchild[j] > 0:
                    alive[j] = True
                    surv[r, k] += 1
                    offspring[r, k, nchild[j]] += 1
    return cand, surv, offspring


def candidate_walk(seed, stream, paths, p, N, d, m, carry):
    """Descend the candidate balls down to level m; see the numpy twin for outputs."""
    return _candidate_walk(np.int64(seed), np.int64(stream),
                           np.ascontiguousarray(paths, dtype=np.int64), p, N, d, m, bool(carry))
