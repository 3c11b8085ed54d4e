"""Pure-numpy kernels.

Reference implementation of every hot loop.  The numba module mirrors these
functions one for one and must produce bit-identical integers.
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_ONE = np.uint64(1)


def _mix(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def _u64(a):
    return np.asarray(a, dtype=np.int64).astype(np.uint64)


def draw_uniform(seed, stream, path, level, index, coord, modulus):
    """Keyed uniform integers in ``[0, modulus)``; arguments broadcast."""
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        h = _mix(_u64(seed) + GOLDEN * (_u64(stream) + _ONE))
        for word in (path, level, index, coord):
            h = _mix(h ^ (_u64(word) + GOLDEN))
    return (h % _u64(modulus)).astype(np.int64)


def add_mod(a, b, p, prec, carry):
    """Sum in ``Z/p^prec``: ordinary carries, or digit-wise mod p when ``carry`` is false."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if carry:
        return (a + b) % (p ** prec)
    out = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    pw = 1
    for _ in range(prec):
        out += (((a // pw) % p + (b // pw) % p) % p) * pw
        pw *= p
    return out


def _weights(seed, stream, paths, k, count, d, p, prec):
    if k >= prec:
        return np.zeros((paths.shape[0], count, d), dtype=np.int64)
    idx = np.arange(count, dtype=np.int64)
    u = draw_uniform(seed, stream, paths[:, None, None], k, idx[None, :, None],
                     np.arange(d)[None, None, :], p ** (prec - k))
    return u * p ** k


def tree_sums(seed, stream, paths, p, N, d, n, prec, carry, split=-1, alt_paths=None):
    """Partial sums of the ball weights down to level ``n``, one row per level-n ball.

    Balls are indexed in tree order (parent index = child index // p**N).
    Weights at levels ``k >= split`` are keyed by ``alt_paths`` instead of
    ``paths``; ``split < 0`` disables the substitution.
    """
    paths = np.asarray(paths, dtype=np.int64)
    alt = paths if alt_paths is None else np.asarray(alt_paths, dtype=np.int64)
    fan = p ** N
    acc = None
    for k in range(n + 1):
        keys = alt if 0 <= split <= k else paths
        z = _weights(seed, stream, keys, k, fan ** k, d, p, prec)
        acc = z if acc is None else add_mod(np.repeat(acc, fan, axis=1), z, p, prec, carry)
    return acc


def eval_points(seed, stream, paths, p, N, d, depth, prec, carry, points):
    """Values of the level-``depth`` partial sum at explicit index points.

    ``points`` holds coordinate residues modulo at least ``p**depth``; the
    result has shape ``(len(paths), len(points), d)``.
    """
    paths = np.asarray(paths, dtype=np.int64)
    points = np.asarray(points, dtype=np.int64)
    fan = p ** N
    idx = np.zeros(points.shape[0], dtype=np.int64)
    acc = np.zeros((paths.shape[0], points.shape[0], d), dtype=np.int64)
    coords = np.arange(d)[None, None, :]
    for k in range(depth + 1):
        if k > 0:
            group = np.zeros(points.shape[0], dtype=np.int64)
            for i in range(N):
                group += ((points[:, i] // p ** (k - 1)) % p) * p ** (N - 1 - i)
            idx = idx * fan + group
        if k >= prec:
            continue
        u = draw_uniform(seed, stream, paths[:, None, None], k, idx[None, :, None],
                         coords, p ** (prec - k))
        acc = add_mod(acc, u * p ** k, p, prec, carry)
    return acc


def candidate_walk(seed, stream, paths, p, N, d, m, carry):
    """Descend the candidate balls (|partial sum| <= p^-(level+1)) down to level m.

    Returns ``(cand, surv, offspring)``: candidate counts per level, counts of
    balls per level that contain a level-m candidate, and for each level k < m
    the histogram of the number of such children of those balls.
    """
    paths = np.asarray(paths, dtype=np.int64)
    R = paths.shape[0]
    fan = p ** N
    prec = m + 1
    cand = np.zeros((R, m + 1), dtype=np.int64)
    surv = np.zeros((R, m + 1), dtype=np.int64)
    offspring = np.zeros((R, max(m, 1), fan + 1), dtype=np.int64)

    A = _weights(seed, stream, paths, 0, 1, d, p, prec)[:, 0, :]
    keep = np.all(A % p == 0, axis=1)
    fpath = np.nonzero(keep)[0]
    fidx = np.zeros(fpath.shape[0], dtype=np.int64)
    fA = A[keep]
    parents = [None]
    owners = [fpath]
    cand[:, 0] = np.bincount(fpath, minlength=R)
    coords = np.arange(d)[None, :]
    for k in range(m):
        F = fpath.shape[0]
        cpath = np.repeat(fpath, fan)
        cidx = np.repeat(fidx, fan) * fan + np.tile(np.arange(fan, dtype=np.int64), F)
        cpar = np.repeat(np.arange(F, dtype=np.int64), fan)
        u = draw_uniform(seed, stream, paths[cpath][:, None], k + 1, cidx[:, None],
                         coords, p ** (prec - k - 1))
        cA = add_mod(np.repeat(fA, fan, axis=0), u * p ** (k + 1), p, prec, carry)
        keep = np.all(cA % p ** (k + 2) == 0, axis=1)
        fpath, fidx, fA = cpath[keep], cidx[keep], cA[keep]
        parents.append(cpar[keep])
        owners.append(fpath)
        cand[:, k + 1] = np.bincount(fpath, minlength=R)

    alive = np.ones(owners[m].shape[0], dtype=bool)
    surv[:, m] = np.bincount(owners[m], minlength=R)
    for k in range(m - 1, -1, -1):
        nchild = np.bincount(parents[k + 1][alive], minlength=owners[k].shape[0])
        alive = nchild > 0
        surv[:, k] = np.bincount(owners[k][alive], minlength=R)
        np.add.at(offspring[:, k, :], (owners[k][alive], nchild[alive]), 1)
    return cand, surv, offspring
