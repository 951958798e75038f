"""Closed-form complexity and generalization bounds, plus orbit-loss aggregation.

These are plain formula evaluators: cover sizes come from :mod:`.cover`,
complexity values from :mod:`.complexity`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .transforms import TransformSpec, compose, preset

MAX_POWERSET_L = 16


def _check_counts(m, n):
    if n < 1:
        raise ValueError("n must be at least 1")
    if m < 0 or m > n:
        raise ValueError(f"cover size m={m} must lie in [0, n={n}]")


def global_complexity_bound(B: float, m: int, n: int) -> float:
    """Global complexity bound ``24 B sqrt(m / n)`` from an ``m``-point zero-radius cover."""
    if B < 0:
        raise ValueError("B must be nonnegative")
    _check_counts(m, n)
    # sqrt(m) / sqrt(n) rounds once less than sqrt(m / n) for perfect squares
    return 24.0 * B * math.sqrt(m) / math.sqrt(n)


def covering_number_model(tau: float, B: float, m: int) -> float:
    """``(2B / tau)^m`` for ``tau < B`` and 1 otherwise."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return (2.0 * B / tau) ** m if tau < B else 1.0


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-6, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth + 1))

    if b == a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)


# beyond this the tail of s^2 exp(-s^2) is below 1e-19
_S_MAX = 7.0


def entropy_integral(B: float, m: int, n: int, alpha: float, tol: float = 1e-6) -> float:
    """``int_alpha^B sqrt(m log(2B / tau) / n) dtau``.

    With ``tau = 2B exp(-s^2)`` the integrand becomes ``4B s^2 exp(-s^2)``,
    which is smooth and bounded, so Simpson's rule converges quickly even
    for ``alpha = 0``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha > B:
        raise ValueError(f"alpha={alpha} exceeds B={B}")
    if m == 0 or B == 0 or alpha == B:
        return 0.0
    lo = math.sqrt(math.log(2.0))
    hi = _S_MAX if alpha == 0 else min(_S_MAX, math.sqrt(math.log(2.0 * B / alpha)))
    if hi <= lo:
        return 0.0

    def g(s):
        return 2.0 * s * s * math.exp(-s * s)

    # a coarse composite rule turns the relative tolerance into an absolute one
    grid = np.linspace(lo, hi, 65)
    vals = 2.0 * grid ** 2 * np.exp(-grid ** 2)
    coarse = (hi - lo) / 192.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum()
                                  + 2.0 * vals[2:-1:2].sum())
    unit = adaptive_simpson(g, lo, hi, 0.1 * tol * abs(coarse))
    return 2.0 * B * math.sqrt(m / n) * unit


def refined_complexity_bound(B: float, kappa: float, epsilon: float, m: int, n: int,
                   alpha: float = 0.0, tol: float = 1e-6) -> float:
    """``4 kappa eps sqrt(1 - m/n) + 4 alpha + 12 int_alpha^B sqrt(m log(2B/tau) / n) dtau``."""
    if min(B, kappa, epsilon) < 0:
        raise ValueError("B, kappa and epsilon must be nonnegative")
    _check_counts(m, n)
    first = 4.0 * kappa * epsilon * math.sqrt(max(0.0, 1.0 - m / n))
    return first + 4.0 * alpha + 12.0 * entropy_integral(B, m, n, alpha, tol)


@dataclass(frozen=True)
class AdversarialLoss:
    maxima: np.ndarray
    mean: float


def _loss_table(table) -> np.ndarray:
    t = np.asarray(table, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    if t.ndim != 2 or t.size == 0:
        raise ValueError("loss table must be a nonempty (n, K) array")
    if not np.all(np.isfinite(t)) or t.min() < 0 or t.max() > 1:
        raise ValueError("loss values must lie in [0, 1]")
    return t


def adversarial_loss(table) -> AdversarialLoss:
    """Worst loss over each example's orbit members and the mean of those maxima."""
    t = _loss_table(table)
    maxima = t.max(axis=1)
    return AdversarialLoss(maxima, float(maxima.mean()))


def load_loss_table(path) -> np.ndarray:
    """CSV with one row per example and one column per orbit member."""
    path = Path(path)
    try:
        t = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None
    return _loss_table(t)


def selection_bound(empirical_adv_mean: float, rademacher_value: float, k: int, n: int,
                 delta: float) -> float:
    """Model-selection bound over a family of transformation sets indexed by ``k``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return (empirical_adv_mean + 4.0 * rademacher_value + math.sqrt(math.log(k) / n)
            + 3.0 * math.sqrt(math.log(4.0 / delta) / (2.0 * n)))


def powerset_subsets(L: int) -> list[tuple[int, ...]]:
    """Subsets of ``{1..L}`` in binary order: index ``k`` holds ``i`` iff bit ``i-1`` is set."""
    if not 0 <= L <= MAX_POWERSET_L:
        raise ValueError(f"L must lie in [0, {MAX_POWERSET_L}]")
    return [tuple(i + 1 for i in range(L) if k >> i & 1) for k in range(2 ** L)]


def powerset_index(subset, L: int) -> int:
    """Position of ``subset`` (1-based members) in :func:`powerset_subsets`."""
    k = 0
    for i in set(subset):
        if not 1 <= i <= L:
            raise ValueError(f"element {i} outside 1..{L}")
        k |= 1 << (i - 1)
    return k


def transform_powerset(specs) -> list[TransformSpec]:
    """One composite spec per subset of ``specs``; the empty subset is the identity."""
    specs = list(specs)
    out = []
    for subset in powerset_subsets(len(specs)):
        chosen = [specs[i - 1] for i in subset]
        if not chosen:
            out.append(preset("identity"))
        elif len(chosen) == 1:
            out.append(chosen[0])
        else:
            out.append(compose(chosen))
    return out
