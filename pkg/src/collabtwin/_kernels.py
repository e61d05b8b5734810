"""Hot loops: all-sources BFS (distances + betweenness) and itemset support counting.

Each kernel has a numba ``@njit`` version and a pure-numpy version.  The numba
path is used when numba imports and ``COLLABTWIN_DISABLE_NUMBA`` is unset (or
0/false).  Both paths return identical distances and path counts; betweenness
sums may differ in the last ulp because the reduction order differs.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _env_disabled() -> bool:
    return os.environ.get("COLLABTWIN_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def backend_name(backend: str | None = None) -> str:
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    return backend


def to_csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR adjacency of a simple digraph; self-loops and duplicate arcs removed."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    keep = src != dst
    src, dst = src[keep], dst[keep]
    if len(src):
        key = np.unique(src * n + dst)
        src, dst = key // n, key % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int64)


# --------------------------------------------------------------------------
# all-sources BFS
# --------------------------------------------------------------------------

def _bfs_all_numpy(indptr, indices, n):
    dist = np.full((n, n), -1, dtype=np.int64)
    bc = np.zeros(n, dtype=np.float64)
    if n == 0:
        return dist, bc
    adj = np.zeros((n, n), dtype=np.float64)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    adj[rows, indices] = 1.0

    # row s holds the BFS from source s; all sources advance one level per step
    sigma = np.eye(n)
    np.fill_diagonal(dist, 0)
    level = 0
    while True:
        frontier = np.where(dist == level, sigma, 0.0)
        reach = frontier @ adj
        new = (dist == -1) & (reach > 0)
        if not new.any():
            break
        level += 1
        dist[new] = level
        sigma[new] = reach[new]

    delta = np.zeros((n, n))
    for d in range(level - 1, -1, -1):
        nxt = dist == d + 1
        coeff = np.zeros((n, n))
        coeff[nxt] = (1.0 + delta[nxt]) / sigma[nxt]
        back = coeff @ adj.T
        cur = dist == d
        delta[cur] = sigma[cur] * back[cur]
    np.fill_diagonal(delta, 0.0)
    bc = delta.sum(axis=0)
    return dist, bc


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _bfs_all_numba(indptr, indices, n):
        dist = np.full((n, n), -1, dtype=np.int64)
        bc = np.zeros(n, dtype=np.float64)
        sigma = np.zeros(n, dtype=np.float64)
        delta = np.zeros(n, dtype=np.float64)
        order = np.empty(n, dtype=np.int64)
        for s in range(n):
            row = dist[s]
            for v in range(n):
                sigma[v] = 0.0
                delta[v] = 0.0
            row[s] = 0
            sigma[s] = 1.0
            order[0] = s
            head = 0
            tail = 1
            while head < tail:
                v = order[head]
                head += 1
                dv = row[v]
                for k in range(indptr[v], indptr[v + 1]):
                    w = indices[k]
                    if row[w] < 0:
                        row[w] = dv + 1
                        order[tail] = w
                        tail += 1
                    if row[w] == dv + 1:
                        sigma[w] += sigma[v]
            # reverse BFS order: every successor on a shortest path is done first
            for i in range(tail - 1, -1, -1):
                v = order[i]
                dv = row[v]
                acc = 0.0
                for k in range(indptr[v], indptr[v + 1]):
                    w = indices[k]
                    if row[w] == dv + 1:
                        acc += (1.0 + delta[w]) / sigma[w]
                delta[v] = sigma[v] * acc
                if v != s:
                    bc[v] += delta[v]
        return dist, bc

    @numba.njit(cache=True)
    def _count_supports_numba(cols, cands):
        # cols is item-major (n_items, n_t) so each candidate scans contiguous rows
        n_t = cols.shape[1]
        n_c, k = cands.shape
        counts = np.zeros(n_c, dtype=np.int64)
        buf = np.empty(n_t, dtype=np.uint8)
        for c in range(n_c):
            # branch-free AND over contiguous columns vectorises well
            first = cols[cands[c, 0]]
            for t in range(n_t):
                buf[t] = first[t]
            for j in range(1, k):
                col = cols[cands[c, j]]
                for t in range(n_t):
                    buf[t] &= col[t]
            total = 0
            for t in range(n_t):
                total += buf[t]
            counts[c] = total
        return counts


def bfs_all(indptr, indices, n: int, backend: str | None = None):
    """Hop distances from every source plus unnormalized directed betweenness.

    Returns ``(dist, bc)`` where ``dist[s, v]`` is -1 for unreachable pairs.
    """
    backend = backend_name(backend)
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    if backend == "numba":
        return _bfs_all_numba(indptr, indices, n)
    return _bfs_all_numpy(indptr, indices, n)


# --------------------------------------------------------------------------
# support counting
# --------------------------------------------------------------------------

def _count_supports_numpy(tx, cands, chunk_cells=4_000_000):
    n_t = tx.shape[0]
    n_c, k = cands.shape
    counts = np.zeros(n_c, dtype=np.int64)
    if n_t == 0 or n_c == 0:
        return counts
    step = max(1, chunk_cells // max(1, n_t * k))
    txb = tx.astype(bool)
    for lo in range(0, n_c, step):
        block = cands[lo:lo + step]
        counts[lo:lo + step] = txb[:, block].all(axis=2).sum(axis=0)
    return counts


def count_supports(tx: np.ndarray, cands: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Number of transactions (rows of the 0/1 matrix ``tx``) containing each candidate.

    ``cands`` is an ``(n_candidates, k)`` array of item column indices.
    """
    backend = backend_name(backend)
    tx = np.ascontiguousarray(tx, dtype=np.uint8)
    cands = np.ascontiguousarray(cands, dtype=np.int64)
    if cands.ndim != 2:
        raise ValueError("cands must be 2-D")
    if backend == "numba":
        if cands.shape[1] == 0:
            return np.full(cands.shape[0], tx.shape[0], dtype=np.int64)
        return _count_supports_numba(np.ascontiguousarray(tx.T), cands)
    return _count_supports_numpy(tx, cands)
