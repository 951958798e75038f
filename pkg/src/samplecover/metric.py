"""Orbit distances and the shortest-path pseudometric they induce."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .data import DistanceMatrix, Sample, as_matrix
from .transforms import TransformSpec, materialize_orbit

ZERO_CLAMP = 1e-12
BLOCK = 32


def materialize_orbits(sample: Sample, spec: TransformSpec, seed: int,
                       workers: int = 1, indices=None) -> np.ndarray:
    """Stack every orbit as ``(n, K, D)`` float32.

    ``indices`` are the point ids used for random streams and precomputed
    orbit lookup (default ``0..n-1``); pass the original dataset indices
    when ``sample`` is a subset.  Orbits shorter than the longest are padded
    with copies of their identity member, which leaves every orbit minimum
    unchanged.
    """
    ids = np.arange(len(sample)) if indices is None else np.asarray(indices, dtype=np.int64)
    if ids.shape != (len(sample),):
        raise ValueError("one point id per sample point is required")

    def one(i):
        return materialize_orbit(sample.images[i], spec, seed, int(ids[i])).members.reshape(
            -1, sample.shape.size)

    idx = range(len(sample))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            orbits = list(ex.map(one, idx))
    else:
        orbits = [one(i) for i in idx]
    kmax = max(o.shape[0] for o in orbits)
    out = np.empty((len(orbits), kmax, sample.shape.size), dtype=np.float32)
    for i, o in enumerate(orbits):
        out[i, :o.shape[0]] = o
        out[i, o.shape[0]:] = o[0]
    return out


def pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise ``||a_r - b_r||`` accumulated in float64."""
    diff = a.astype(np.float64) - b.astype(np.float64)
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _block_pairs(n: int, block: int):
    starts = range(0, n, block)
    return [(i, j) for i in starts for j in starts if j >= i]


def orbit_distance_matrix(orbits: np.ndarray, workers: int = 1, block: int = BLOCK) -> np.ndarray:
    """Minimum member-to-member distance for every pair of stacked orbits.

    Candidates are ranked with a float64 Gram expansion; the winning pair
    and the identity pair are then recomputed directly, and the smaller of
    the two is kept.  The identity pair guarantees the result never exceeds
    the plain Euclidean distance computed by :func:`pair_distances`.
    """
    n, k, dim = orbits.shape
    sq_norms = np.einsum("ikd,ikd->ik", orbits.astype(np.float64), orbits.astype(np.float64))
    out = np.zeros((n, n), dtype=np.float64)

    def work(pair):
        i0, j0 = pair
        i1, j1 = min(i0 + block, n), min(j0 + block, n)
        xi = orbits[i0:i1].reshape(-1, dim).astype(np.float64)
        xj = orbits[j0:j1].reshape(-1, dim).astype(np.float64)
        sq = sq_norms[i0:i1].reshape(-1, 1) + sq_norms[j0:j1].reshape(1, -1) - 2.0 * (xi @ xj.T)
        bi, bj = i1 - i0, j1 - j0
        sq = sq.reshape(bi, k, bj, k).transpose(0, 2, 1, 3).reshape(bi, bj, k * k)
        best = np.argmin(sq, axis=2)
        ii, jj = np.meshgrid(np.arange(bi), np.arange(bj), indexing="ij")
        ii, jj, best = ii.ravel(), jj.ravel(), best.ravel()
        if i0 == j0:
            keep = ii < jj
            ii, jj, best = ii[keep], jj[keep], best[keep]
        ma, mb = np.divmod(best, k)
        gi, gj = ii + i0, jj + j0
        found = pair_distances(orbits[gi, ma], orbits[gj, mb])
        plain = pair_distances(orbits[gi, 0], orbits[gj, 0])
        return gi, gj, np.minimum(found, plain)

    pairs = _block_pairs(n, block)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(work, pairs))
    else:
        results = [work(p) for p in pairs]
    for gi, gj, vals in results:
        out[gi, gj] = vals
        out[gj, gi] = vals
    return out


def direct_orbit_distances(sample: Sample, spec: TransformSpec, seed: int = 0,
                           workers: int = 1, block: int = BLOCK, indices=None) -> DistanceMatrix:
    """``d_G(x_i, x_j) = min ||g1(x_i) - g2(x_j)||`` over the materialized orbits.

    Exact for finite transformation sets; for sampled continuous ones it is
    an upper bound on the infimum over the whole set.
    """
    orbits = materialize_orbits(sample, spec, seed, workers, indices)
    return DistanceMatrix(orbit_distance_matrix(orbits, workers, block))


def euclidean_distances(sample: Sample, block: int = BLOCK) -> DistanceMatrix:
    flat = sample.flat()[:, None, :]
    return DistanceMatrix(orbit_distance_matrix(flat, 1, block))


def _dijkstra_rows(w: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """Dense Dijkstra from several sources at once (one row per source)."""
    n = w.shape[0]
    m = sources.size
    rows = np.arange(m)
    dist = np.full((m, n), np.inf)
    dist[rows, sources] = 0.0
    done = np.zeros((m, n), dtype=bool)
    for _ in range(n):
        u = np.argmin(np.where(done, np.inf, dist), axis=1)
        done[rows, u] = True
        np.minimum(dist, dist[rows, u][:, None] + w[u], out=dist)
    return dist


def shortest_path_metric(d, workers: int = 1, block: int = 256) -> DistanceMatrix:
    """All-pairs shortest paths on the complete graph weighted by ``d``.

    Edges shorter than ``1e-12`` are treated as zero-cost.  Each row is a
    dense single-source Dijkstra (``O(n^2)``), ``O(n^3)`` overall.  The result
    is symmetrized with an entrywise minimum, so it is exactly symmetric and
    never exceeds ``d``.
    """
    w = np.array(as_matrix(d), dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("distance matrix must be square")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("edge costs must be finite and nonnegative")
    w[w < ZERO_CLAMP] = 0.0
    n = w.shape[0]
    chunks = [np.arange(s, min(s + block, n)) for s in range(0, n, block)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda c: _dijkstra_rows(w, c), chunks))
    else:
        parts = [_dijkstra_rows(w, c) for c in chunks]
    rho = np.vstack(parts)
    rho = np.minimum(rho, rho.T)
    np.fill_diagonal(rho, 0.0)
    return DistanceMatrix(rho)


def pseudometric(sample: Sample, spec: TransformSpec, seed: int = 0, workers: int = 1,
                 indices=None) -> tuple[DistanceMatrix, DistanceMatrix]:
    """Convenience: ``(d_G, rho_G)`` for a sample."""
    d = direct_orbit_distances(sample, spec, seed, workers, indices=indices)
    return d, shortest_path_metric(d, workers)
