"""Rademacher complexity of norm-bounded linear classes and their invariant subclasses.

For ``H = {x -> <w, x> : ||w||_p <= W}`` and ``u_sigma = sum_i sigma_i x_i``:

* general class: ``(W / n) E ||u_sigma||_q`` (``q`` the dual exponent of ``p``);
* ``A``-invariant class: ``(W / n) E inf_eta ||u_sigma + (A - I) eta||_q``;
* for ``p = q = 2`` the infimum is ``||P u_sigma||_2`` with the orthogonal
  projector ``P = I - (A - I)(A - I)^+``.

All estimators draw the sign vectors from the same per-draw streams, so
estimates taken with the same seed can be compared draw for draw.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Sample


@dataclass(frozen=True)
class ComplexityEstimate:
    value: float
    std_error: float
    draws: int
    per_draw: np.ndarray
    unconverged: tuple[int, ...] = ()

    @classmethod
    def from_draws(cls, per_draw, unconverged=()) -> "ComplexityEstimate":
        per_draw = np.asarray(per_draw, dtype=np.float64)
        k = per_draw.size
        if k == 0:
            raise ValueError("no draws")
        se = float(per_draw.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        return cls(float(per_draw.mean()), se, k, per_draw, tuple(unconverged))

    def __str__(self) -> str:
        return f"{self.value:.6g} +/- {self.std_error:.2g} ({self.draws} draws)"


@dataclass(frozen=True)
class Projector:
    matrix: np.ndarray
    rank: int

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __matmul__(self, other):
        return self.matrix @ other


def _data_matrix(sample) -> np.ndarray:
    x = sample.flat() if isinstance(sample, Sample) else np.asarray(sample, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("expected a nonempty (n, d) sample")
    return x.astype(np.float64)


def _square_matrix(A) -> np.ndarray:
    a = np.asarray(A, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"transform matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("transform matrix has non-finite entries")
    return a


def pinv(m: np.ndarray) -> np.ndarray:
    """Moore-Penrose inverse via SVD, cutoff ``max(shape) * eps * s_max``."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    cutoff = max(m.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def invariance_projector(A) -> Projector:
    """``P = I - (A - I)(A - I)^+``: projector onto the null space of ``(A - I)^T``.

    With ``A - I = U S V^T`` this is ``I - U_r U_r^T``; when ``A - I`` has
    full rank the null space is trivial and ``P`` is exactly zero.
    """
    a = _square_matrix(A)
    d = a.shape[0]
    m = a - np.eye(d)
    u, s, _ = np.linalg.svd(m)
    cutoff = d * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    r = int(np.count_nonzero(s > cutoff))
    if r == d:
        return Projector(np.zeros((d, d)), 0)
    p = np.eye(d) - u[:, :r] @ u[:, :r].T
    p = 0.5 * (p + p.T)
    return Projector(p, d - r)


def sign_draws(n: int, draws: int, seed: int) -> np.ndarray:
    """``(draws, n)`` Rademacher signs; row ``t`` depends only on ``(seed, t)``."""
    if draws < 1:
        raise ValueError("draws must be at least 1")
    out = np.empty((draws, n))
    for t in range(draws):
        out[t] = 2.0 * np.random.default_rng([seed, t]).integers(0, 2, size=n) - 1.0
    return out


def weighted_sums(sample, draws: int, seed: int) -> np.ndarray:
    """Rows ``u_sigma = sum_i sigma_i x_i`` for each draw."""
    x = _data_matrix(sample)
    return sign_draws(x.shape[0], draws, seed) @ x


def rademacher_general(sample, W: float = 1.0, q: float = 2.0, draws: int = 1000,
                       seed: int = 0) -> ComplexityEstimate:
    if not q >= 1:
        raise ValueError("q must lie in [1, inf]")
    x = _data_matrix(sample)
    u = weighted_sums(x, draws, seed)
    return ComplexityEstimate.from_draws(W / x.shape[0] * np.linalg.norm(u, ord=q, axis=1))


def rademacher_invariant_l2(sample, A, W: float = 1.0, draws: int = 1000,
                            seed: int = 0) -> ComplexityEstimate:
    x = _data_matrix(sample)
    a = _square_matrix(A)
    if a.shape[0] != x.shape[1]:
        raise ValueError(f"transform is {a.shape[0]}-dimensional but the data are {x.shape[1]}-dimensional")
    p = invariance_projector(a).matrix
    u = weighted_sums(x, draws, seed)
    # eta = 0 is feasible, so never report more than the unconstrained norm
    vals = np.minimum(np.linalg.norm(u @ p, axis=1), np.linalg.norm(u, axis=1))
    return ComplexityEstimate.from_draws(W / x.shape[0] * vals)


# ---------------------------------------------------------------------------
# numeric infimum for general q

def qnorm_grad(v: np.ndarray, q: float) -> tuple[float, np.ndarray]:
    """``(||v||_q, grad)``; the gradient is zero at ``v = 0``."""
    f = float(np.linalg.norm(v, ord=q))
    if f == 0.0:
        return 0.0, np.zeros_like(v)
    return f, np.sign(v) * (np.abs(v) / f) ** (q - 1)


def objective_and_grad(eta: np.ndarray, u: np.ndarray, M: np.ndarray, q: float,
                       mu: float = 0.0):
    """``f(eta) = ||u + M eta||_q`` and its gradient ``M^T grad||.||_q``.

    With ``mu > 0`` each ``|v_i|`` is replaced by ``sqrt(v_i^2 + mu^2)``, a
    smooth upper bound within ``mu * d^(1/q)`` of the exact value.
    """
    v = u + M @ eta
    if mu == 0.0:
        f, g = qnorm_grad(v, q)
        return f, M.T @ g
    r = v * v + mu * mu
    total = float(np.sum(r ** (q / 2)))
    f = total ** (1.0 / q)
    g = v * r ** (q / 2 - 1) * total ** (1.0 / q - 1)
    return f, M.T @ g


def dual_lower_bound(v: np.ndarray, Q: np.ndarray, q: float, mu: float = 0.0) -> float:
    """Lower bound on ``min_z ||v + Q z||_q`` from a feasible dual point.

    The gradient at ``v`` of the (optionally ``mu``-smoothed) q-norm is
    projected onto the orthogonal complement of ``span(Q)`` and rescaled to
    unit dual norm; its inner product with ``v`` cannot exceed the minimum.
    Near a minimizer with zero coordinates the smoothed gradient gives the
    tighter certificate.
    """
    if mu == 0.0:
        _, g = qnorm_grad(v, q)
    else:
        g = v * (v * v + mu * mu) ** (q / 2 - 1)
    w = g - Q @ (Q.T @ g)
    # a residual at rounding level carries no direction information
    noise = 64 * v.size * np.finfo(float).eps * float(np.linalg.norm(g))
    if Q.shape[1] >= v.size or float(np.linalg.norm(w)) <= noise:
        return 0.0
    nw = float(np.linalg.norm(w, ord=q / (q - 1)))
    return float(w @ v) / nw


def range_basis(M: np.ndarray, rtol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the column space of ``M`` (pivoted Gram-Schmidt)."""
    M = np.array(M, dtype=np.float64)
    d, k = M.shape
    rtol = max(d, k) * np.finfo(np.float64).eps if rtol is None else rtol
    scale = np.linalg.norm(M, axis=0).max() if M.size else 0.0
    basis = []
    work = M.copy()
    for _ in range(min(d, k)):
        norms = np.linalg.norm(work, axis=0)
        j = int(np.argmax(norms))
        if norms[j] <= rtol * scale or scale == 0:
            break
        v = work[:, j] / norms[j]
        for b in basis:  # second pass keeps the basis orthogonal to working precision
            v -= (b @ v) * b
        v /= np.linalg.norm(v)
        basis.append(v)
        work -= np.outer(v, v @ work)
    return np.array(basis).T if basis else np.zeros((d, 0))


SMOOTHING = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-10, 1e-12, 0.0)


def _descend(z, u, Q, q, mu, tol, budget, certified=None, every=10):
    """Barzilai-Borwein gradient descent with Armijo backtracking.

    Stops at gradient norm ``tol``, after ``budget`` steps, or when
    ``certified(z)`` (checked every ``every`` steps) returns true.
    """
    f, g = objective_and_grad(z, u, Q, q, mu)
    step = 1.0
    used = 0
    while used < budget:
        used += 1
        gn = float(g @ g)
        if math.sqrt(gn) <= tol:
            break
        if certified is not None and used % every == 0 and certified(z):
            break
        a = step
        while True:
            z_new = z - a * g
            f_new, g_new = objective_and_grad(z_new, u, Q, q, mu)
            if f_new <= f - 1e-4 * a * gn or a < 1e-20:
                break
            a *= 0.5
        if f_new > f:
            break
        s, y = z_new - z, g_new - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 1e-3
        z, f, g = z_new, f_new, g_new
    return z, used


def minimize_qnorm(u: np.ndarray, Q: np.ndarray, q: float, tol: float = 1e-10,
                   max_iter: int = 5000) -> tuple[float, bool]:
    """``min_z ||u + Q z||_q`` for ``Q`` with orthonormal columns.

    Starting from the least-squares solution, gradient descent runs on a
    sequence of smoothed objectives, warm starting each from the last.  The
    exact objective is compared periodically with the best of a few
    :func:`dual_lower_bound` certificates, and the solve stops once the gap
    or the exact gradient norm is at most ``tol`` (the problem is rescaled
    so ``||u||_q = 1``).  ``max_iter`` caps the total number of descent
    steps.  Returns ``(minimum, converged)``.
    """
    scale = float(np.linalg.norm(u, ord=q))
    if scale == 0.0 or Q.shape[1] == 0:
        return scale, True
    u = u / scale
    outside = u - Q @ (Q.T @ u)
    if np.linalg.norm(outside) <= 1e-13 * np.linalg.norm(u):
        # u lies in the span: exact cancellation
        return 0.0, True
    z = -(Q.T @ u)  # least-squares start: the q = 2 minimizer
    left = max_iter

    def done(z, mu):
        v = u + Q @ z
        f, g = qnorm_grad(v, q)
        if float(np.linalg.norm(Q.T @ g)) <= tol:
            return f, True
        lower = max(dual_lower_bound(v, Q, q, m) for m in {0.0, mu, 0.1 * mu})
        return f, f - lower <= tol

    f, ok = done(z, 0.0)
    for mu in SMOOTHING:
        if ok or left <= 0:
            break
        # intermediate stages only need to be as accurate as their smoothing
        z, used = _descend(z, u, Q, q, mu, max(tol, mu), left,
                           certified=lambda z, mu=mu: done(z, mu)[1])
        left -= used
        f, ok = done(z, mu)
    return f * scale, ok


def rademacher_invariant_inf(sample, A, W: float = 1.0, q: float = 2.0, draws: int = 1000,
                             seed: int = 0, tol: float = 1e-10,
                             max_iter: int = 5000) -> ComplexityEstimate:
    """Per draw, ``inf_eta ||u_sigma + (A - I) eta||_q`` found numerically.

    The descent runs on coordinates of an orthonormal basis of the column
    space of ``A - I``, which spans exactly the same set of shifts as
    ``(A - I) eta``.  Draws whose duality gap is still above ``tol`` after
    ``max_iter`` steps are listed in ``unconverged`` and a warning is issued.
    """
    if not 1 < q < math.inf:
        raise ValueError("numeric infimum supports 1 < q < inf")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = _data_matrix(sample)
    a = _square_matrix(A)
    if a.shape[0] != x.shape[1]:
        raise ValueError(f"transform is {a.shape[0]}-dimensional but the data are {x.shape[1]}-dimensional")
    Q = range_basis(a - np.eye(a.shape[0]))
    u = weighted_sums(x, draws, seed)
    vals = np.empty(draws)
    bad = []
    for t in range(draws):
        vals[t], ok = minimize_qnorm(u[t], Q, q, tol, max_iter)
        if not ok:
            bad.append(t)
    vals = np.minimum(vals, np.linalg.norm(u, ord=q, axis=1))
    if bad:
        warnings.warn(f"q-norm descent did not converge for {len(bad)} draw(s): {bad[:10]}",
                      RuntimeWarning, stacklevel=2)
    return ComplexityEstimate.from_draws(W / x.shape[0] * vals, bad)


# ---------------------------------------------------------------------------
# Gaussian example: general vs flip-invariant vs circular-translation-invariant

def reversal_matrix(d: int) -> np.ndarray:
    return np.eye(d)[::-1]


def cyclic_shift_matrix(d: int) -> np.ndarray:
    return np.roll(np.eye(d), 1, axis=0)


@dataclass(frozen=True)
class ComparisonRow:
    model_class: str
    estimate: ComplexityEstimate
    stated_bound: float


@dataclass(frozen=True)
class GaussianComparison:
    d: int
    n: int
    sigma: float
    W: float
    rows: tuple[ComparisonRow, ...]

    def __getitem__(self, name: str) -> ComparisonRow:
        for r in self.rows:
            if r.model_class == name:
                return r
        raise KeyError(name)

    def __str__(self) -> str:
        lines = [f"Gaussian data N(0, {self.sigma:g}^2 I), d={self.d}, n={self.n}, W={self.W:g}",
                 f"{'class':<24}{'estimate':>12}{'std err':>12}{'stated bound':>14}"]
        for r in self.rows:
            lines.append(f"{r.model_class:<24}{r.estimate.value:>12.6g}"
                         f"{r.estimate.std_error:>12.2g}{r.stated_bound:>14.6g}")
        return "\n".join(lines)


def gaussian_comparison(d: int, n: int, sigma: float = 1.0, W: float = 1.0,
                        draws: int = 1000, seed: int = 0) -> GaussianComparison:
    """Monte-Carlo estimates beside the closed-form bounds quoted for this setting.

    The quoted bounds are printed for comparison only; the estimates are
    not expected to sit below them for every ``(d, n)``.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    x = np.random.default_rng([seed, 0x6A55]).normal(0.0, sigma, size=(n, d))
    rows = (
        ComparisonRow("general", rademacher_general(x, W, 2.0, draws, seed),
                      math.sqrt(d) * W * sigma / math.sqrt(n)),
        ComparisonRow("flip-invariant",
                      rademacher_invariant_l2(x, reversal_matrix(d), W, draws, seed),
                      math.sqrt(math.ceil(d / 2)) * W * sigma / (2 * math.sqrt(n))),
        ComparisonRow("translation-invariant",
                      rademacher_invariant_l2(x, cyclic_shift_matrix(d), W, draws, seed),
                      W * sigma / n),
    )
    return GaussianComparison(d, n, sigma, W, rows)
