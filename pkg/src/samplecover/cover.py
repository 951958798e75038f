"""Sample covers and estimates of the sample covering number ``N(eps, S, rho)``.

Three estimators share one contract, ``(count, SampleCover)``:

* :func:`scn_kmedoids` -- scan over k: medoids plus the points they fail to cover;
* :func:`scn_greedy` -- classic greedy set cover over the radius-``eps`` balls;
* :func:`scn_exact` -- subset enumeration, the oracle for ``n <= 20``.

Every returned cover is a valid ``eps``-cover, so the heuristic counts are
upper bounds on the true covering number.  Ties are broken by lowest index.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .data import as_matrix

ALGORITHMS = ("kmedoids", "greedy", "exact")
EXACT_MAX_N = 20
FULL_SCAN_MAX_N = 200


@dataclass(frozen=True)
class SampleCover:
    epsilon: float
    center_indices: tuple[int, ...]
    assignment: np.ndarray

    @property
    def count(self) -> int:
        return len(self.center_indices)


@dataclass(frozen=True)
class CoverCheck:
    """Outcome of :func:`verify_cover`; truthy when the centers form a cover.

    ``uncovered`` maps each uncovered index to its distance from the
    nearest center.
    """

    valid: bool
    cover: SampleCover | None
    uncovered: dict[int, float] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.valid


def _square(rho) -> np.ndarray:
    m = as_matrix(rho)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError("expected a nonempty square distance matrix")
    return m


def nearest_centers(rho, centers) -> tuple[np.ndarray, np.ndarray]:
    """Assign each point to its nearest center (centers keep themselves)."""
    m = _square(rho)
    centers = np.asarray(sorted(set(int(c) for c in centers)), dtype=np.int64)
    sub = m[:, centers]
    pick = np.argmin(sub, axis=1)
    assignment = centers[pick]
    dist = sub[np.arange(m.shape[0]), pick]
    assignment[centers] = centers
    dist[centers] = 0.0
    return assignment, dist


def verify_cover(rho, epsilon: float, centers) -> CoverCheck:
    m = _square(rho)
    centers = list(centers)
    if not centers:
        raise ValueError("centers must be nonempty")
    n = m.shape[0]
    bad = [c for c in centers if not 0 <= int(c) < n]
    if bad:
        raise ValueError(f"center indices out of range [0, {n}): {bad}")
    assignment, dist = nearest_centers(m, centers)
    over = np.flatnonzero(dist > epsilon)
    if over.size:
        return CoverCheck(False, None, {int(i): float(dist[i]) for i in over})
    cover = SampleCover(float(epsilon), tuple(sorted(set(int(c) for c in centers))), assignment)
    return CoverCheck(True, cover, {})


def _cover_from_centers(m, epsilon, centers) -> SampleCover:
    check = verify_cover(m, epsilon, centers)
    if not check:
        raise AssertionError(f"internal error: centers do not cover {sorted(check.uncovered)}")
    return check.cover


# ---------------------------------------------------------------------------
# k-medoids

def park_jun_init(m: np.ndarray, k: int) -> np.ndarray:
    """The ``k`` points with the smallest sum of row-normalized distances."""
    row = m.sum(axis=1)
    safe = np.where(row > 0, row, 1.0)
    v = (m / safe[:, None]).sum(axis=0)
    return np.sort(np.argsort(v, kind="stable")[:k])


def kmedoids(m, k: int, init=None, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Alternating k-medoids on a precomputed distance matrix.

    Each round assigns points to their nearest medoid, then moves every
    medoid to the cluster member with the smallest within-cluster distance
    sum (the current medoid wins ties, then the lowest index).  Returns the
    sorted medoid indices and, for every point, the index of its medoid.
    """
    m = _square(m)
    n = m.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    medoids = park_jun_init(m, k) if init is None else np.sort(np.asarray(init, dtype=np.int64))
    if medoids.size != k or np.unique(medoids).size != k:
        raise ValueError("initial medoids must be k distinct indices")
    idx = np.arange(n)
    for _ in range(max_iter):
        labels = np.argmin(m[:, medoids], axis=1)
        labels[medoids] = np.arange(k)
        same = labels[:, None] == labels[None, :]
        cost = np.where(same, m, 0.0).sum(axis=0)
        not_current = np.ones(n, dtype=bool)
        not_current[medoids] = False
        order = np.lexsort((idx, not_current, cost, labels))
        first = np.flatnonzero(np.r_[True, np.diff(labels[order]) != 0])
        new = np.sort(order[first])
        if np.array_equal(new, medoids):
            break
        medoids = new
    labels = np.argmin(m[:, medoids], axis=1)
    labels[medoids] = np.arange(k)
    return medoids, medoids[labels]


def default_schedule(n: int, faithful: bool = False, ratio: float = 0.85) -> list[int]:
    """Every ``k`` in ``1..n`` when faithful or small, else a geometric grid."""
    if faithful or n <= FULL_SCAN_MAX_N:
        return list(range(1, n + 1))
    ks = {n, 1}
    k = float(n)
    while k > 1:
        ks.add(int(round(k)))
        k *= ratio
    return sorted(ks)


def _kmedoids_count(m, k, epsilon, init, max_iter):
    medoids, owner = kmedoids(m, k, init, max_iter)
    far = m[np.arange(m.shape[0]), owner] > epsilon
    return k + int(far.sum()), medoids, np.flatnonzero(far)


def scn_kmedoids(rho, epsilon: float, seed: int = 0, k_schedule=None, faithful: bool = False,
                 restarts: int = 1, max_iter: int = 100) -> tuple[int, SampleCover]:
    """k-medoids estimate: ``min_k (k + #{points farther than eps from their medoid})``.

    Points left farther than ``eps`` from their medoid become centers of
    their own, so the returned cover realizes the count.  Because the count
    for a given ``k`` is at least ``k``, schedule entries at or above the
    running minimum are skipped; this never changes the minimum.  Without an
    explicit ``k_schedule`` the whole range ``1..n`` is scanned for
    ``n <= 200`` or when ``faithful``; larger problems use a geometric grid
    refined around its best entry.
    """
    m = _square(rho)
    n = m.shape[0]
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    explicit = k_schedule is not None
    schedule = sorted(set(int(k) for k in (k_schedule if explicit else default_schedule(n, faithful))))
    if not schedule:
        raise ValueError("empty k schedule")
    if schedule[0] < 1 or schedule[-1] > n:
        raise ValueError(f"k schedule must lie in [1, {n}]")

    best = (n + 1, None, None)
    tried = {}

    def run(k):
        nonlocal best
        if k in tried or k >= best[0]:
            return
        for r in range(max(restarts, 1)):
            init = None
            if r:
                rng = np.random.default_rng([seed, k, r])
                init = rng.choice(n, size=k, replace=False)
            count, medoids, far = _kmedoids_count(m, k, epsilon, init, max_iter)
            tried[k] = min(tried.get(k, count), count)
            if count < best[0]:
                best = (count, medoids, far)

    for k in schedule:
        run(k)
    if not explicit and not faithful and n > FULL_SCAN_MAX_N:
        grid = schedule
        kb = min(tried, key=lambda k: (tried[k], k))
        pos = grid.index(kb)
        lo = grid[pos - 1] if pos > 0 else 1
        hi = grid[pos + 1] if pos + 1 < len(grid) else n
        for k in range(lo, hi + 1):
            run(k)
    if best[1] is None:
        # every k in the schedule was >= n + 1, impossible for valid input
        raise AssertionError("k-medoids scan produced no estimate")
    count, medoids, far = best
    cover = _cover_from_centers(m, epsilon, np.concatenate([medoids, far]))
    assert cover.count == count
    return count, cover


# ---------------------------------------------------------------------------
# greedy and exact

def balls(rho, epsilon: float) -> np.ndarray:
    """``B[i, j]`` is true when ``rho(i, j) <= eps``."""
    return _square(rho) <= epsilon


def scn_greedy(rho, epsilon: float) -> tuple[int, SampleCover]:
    m = _square(rho)
    b = balls(m, epsilon)
    n = m.shape[0]
    uncovered = np.ones(n, dtype=bool)
    gains = b.sum(axis=1).astype(np.int64)
    picks = []
    while uncovered.any():
        p = int(np.argmax(gains))
        picks.append(p)
        newly = uncovered & b[p]
        uncovered &= ~newly
        gains -= b[:, newly].sum(axis=1)
    cover = _cover_from_centers(m, epsilon, picks)
    return cover.count, cover


def scn_exact(rho, epsilon: float) -> tuple[int, SampleCover]:
    """Minimum cover by enumerating subsets in increasing size (``n <= 20``)."""
    m = _square(rho)
    n = m.shape[0]
    if n > EXACT_MAX_N:
        raise ValueError(f"exact enumeration is limited to n <= {EXACT_MAX_N}, got n={n}")
    b = balls(m, epsilon)
    masks = (b.astype(np.int64) << np.arange(n, dtype=np.int64)).sum(axis=1)
    full = (1 << n) - 1
    for size in range(1, n + 1):
        combos = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), size)),
                             dtype=np.int64).reshape(-1, size)
        union = np.bitwise_or.reduce(masks[combos], axis=1)
        hit = np.flatnonzero(union == full)
        if hit.size:
            cover = _cover_from_centers(m, epsilon, combos[hit[0]])
            return cover.count, cover
    raise AssertionError("the full sample always covers itself")


def estimate(rho, epsilon: float, algorithm: str = "kmedoids", seed: int = 0,
             faithful: bool = False) -> tuple[int, SampleCover]:
    if algorithm == "kmedoids":
        return scn_kmedoids(rho, epsilon, seed, faithful=faithful)
    if algorithm == "greedy":
        return scn_greedy(rho, epsilon)
    if algorithm == "exact":
        return scn_exact(rho, epsilon)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


# ---------------------------------------------------------------------------
# curves

@dataclass(frozen=True)
class ScnRecord:
    epsilon: float
    count: int
    algorithm: str
    seed: int
    tag: str = ""


@dataclass
class ScnCurve:
    records: list[ScnRecord]

    @property
    def epsilons(self) -> list[float]:
        return [r.epsilon for r in self.records]

    @property
    def counts(self) -> list[int]:
        return [r.count for r in self.records]

    def to_csv(self, fh=None) -> str | None:
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "count", "algorithm", "seed", "transform"])
        for r in self.records:
            w.writerow([f"{r.epsilon:.9g}", r.count, r.algorithm, r.seed, r.tag])
        return fh.getvalue() if own else None


def scn_curve(rho, epsilons, algorithm: str = "kmedoids", seed: int = 0,
              faithful: bool = False, tag: str = "") -> ScnCurve:
    eps = [float(e) for e in epsilons]
    if not eps:
        raise ValueError("empty epsilon grid")
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon grid must be ascending")
    m = _square(rho)
    return ScnCurve([ScnRecord(e, estimate(m, e, algorithm, seed, faithful)[0], algorithm, seed, tag)
                     for e in eps])


# ---------------------------------------------------------------------------
# normalization by minimum inter-class distance

def min_interclass_distance(d, labels) -> float:
    m = _square(d)
    labels = np.asarray(labels)
    if labels.shape != (m.shape[0],):
        raise ValueError("one label per row is required")
    other = labels[:, None] != labels[None, :]
    if not other.any():
        raise ValueError("min inter-class distance needs at least two classes")
    return float(m[other].min())


@dataclass(frozen=True)
class NormalizedScn:
    count: int
    ratio: float
    scaled_epsilon: float
    reliable: bool
    cover: SampleCover


def normalized_scn(rho, d_base, labels, epsilon: float, algorithm: str = "kmedoids",
                   seed: int = 0, d_orbit=None, faithful: bool = False) -> NormalizedScn:
    """Covering number at the resolution rescaled by the inter-class ratio.

    ``ratio = min_interclass(d_orbit) / min_interclass(d_base)`` where
    ``d_orbit`` defaults to ``rho``; the estimate is taken at
    ``ratio * epsilon``.  A zero or undefined ratio is flagged unreliable.
    """
    after = min_interclass_distance(rho if d_orbit is None else d_orbit, labels)
    before = min_interclass_distance(d_base, labels)
    if before > 0:
        ratio = after / before
    else:
        ratio = math.nan
    reliable = math.isfinite(ratio) and ratio > 0
    scaled = ratio * epsilon if math.isfinite(ratio) else epsilon
    count, cover = estimate(rho, scaled, algorithm, seed, faithful)
    return NormalizedScn(count, ratio, scaled, reliable, cover)
