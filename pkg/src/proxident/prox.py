"""Structure-reporting proximal operators.

Every operator here returns, next to the minimizer of

    g(y) + ||y - u||^2 / (2*gamma),

the exact membership pattern of the output with respect to the regularizer's
structure collection. The pattern is read off the branch taken inside the
computation (which coordinates were thresholded, which segments were merged,
how many singular values survived), never from a numeric tolerance test.

Supported regularizers g = lam * r:

=========  ====================================  =========================
kind       r(x)                                  structure collection
=========  ====================================  =========================
l1         sum_i |x_i|                           coordinate zeros
l0         #{i : x_i != 0}                       coordinate zeros
tv1d       sum_i |x_i - x_{i-1}|                 adjacent equalities
potts1d    #{i : x_i != x_{i-1}}                 adjacent equalities
nuclear    sum_i sigma_i(X)                      rank levels
rank       rank(X)                               rank levels
=========  ====================================  =========================

Hard-thresholding boundaries: minimizing gamma*lam*||y||_0 + ||y-u||^2/2
coordinate-wise keeps u_i iff |u_i| > sqrt(2*gamma*lam); ties go to the zero
branch (more structure). The same rule applies to singular values for the
rank regularizer.
"""

from dataclasses import dataclass

import numpy as np

from .manifolds import (
    ManifoldCollection,
    SparsityPattern,
    adjacent_pairs,
    coordinate_zeros,
    rank_levels,
)

__all__ = [
    "ProxResult",
    "Regularizer",
    "prox_l1",
    "prox_l0",
    "prox_tv1d",
    "prox_potts1d",
    "prox_nuclear",
    "prox_rank",
    "prox_optimality_residual",
]

CONVEX_KINDS = ("l1", "tv1d", "nuclear")
NONCONVEX_KINDS = ("l0", "potts1d", "rank")

_KIND_COLLECTION = {
    "l1": "coordinate",
    "l0": "coordinate",
    "tv1d": "adjacent",
    "potts1d": "adjacent",
    "nuclear": "rank",
    "rank": "rank",
}


@dataclass
class ProxResult:
    """Prox output plus its exact structure pattern.

    objective_residual is an optional diagnostic (see
    prox_optimality_residual); it is not computed by default.
    """

    point: np.ndarray
    pattern: SparsityPattern
    objective_residual: float | None = None


def _check_input(u, gamma):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("prox input must be finite")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return u


def prox_l1(u, gamma, lam=1.0) -> ProxResult:
    """Soft thresholding at gamma*lam.

    Coordinate-wise: 0 on [-gamma*lam, gamma*lam] (boundary included),
    u_i -+ gamma*lam outside. Pattern bit i is 0 iff the zero branch fired.
    """
    u = _check_input(u, gamma)
    t = gamma * lam
    keep = np.abs(u) > t
    x = np.where(keep, u - t * np.sign(u), 0.0)
    return ProxResult(x, SparsityPattern(keep.astype(np.uint8)))


def prox_l0(u, gamma, lam=1.0) -> ProxResult:
    """Hard thresholding: keep u_i iff |u_i| > sqrt(2*gamma*lam)."""
    u = _check_input(u, gamma)
    thr = np.sqrt(2.0 * gamma * lam)
    keep = np.abs(u) > thr
    x = np.where(keep, u, 0.0)
    return ProxResult(x, SparsityPattern(keep.astype(np.uint8)))


# ---------------------------------------------------------------------------
# 1-D total variation: exact taut-string construction.
#
# With running sums r_k = sum_{i<=k} u_i, the prox of step*TV is the discrete
# derivative of the shortest path ("taut string") from (0, 0) to (n, r_n)
# that passes within +-step of r_k at every interior k. Each linear piece of
# the string is one constant segment of the output, so the segment structure
# is a byproduct of the construction.
# ---------------------------------------------------------------------------


def _tv1d_segments(y, step):
    """Segments (start, end, value) of the exact TV prox, end exclusive."""
    n = y.size
    if n == 1:
        return [(0, 1, float(y[0]))]
    r = np.cumsum(y)
    segs = []
    a = 0  # anchor: string position, value s_a
    s_a = 0.0
    while a < n:
        m_hi = np.inf
        m_lo = -np.inf
        k_hi = k_lo = a
        j = a + 1
        while True:
            if j == n:
                up = lo = (r[n - 1] - s_a) / (j - a)
            else:
                up = (r[j - 1] + step - s_a) / (j - a)
                lo = (r[j - 1] - step - s_a) / (j - a)
            if lo > m_hi:
                # no straight line fits: the string bends at the upper bound
                segs.append((a, k_hi, m_hi))
                s_a = r[k_hi - 1] + step
                a = k_hi
                break
            if up < m_lo:
                segs.append((a, k_lo, m_lo))
                s_a = r[k_lo - 1] - step
                a = k_lo
                break
            if up <= m_hi:
                m_hi, k_hi = up, j
            if lo >= m_lo:
                m_lo, k_lo = lo, j
            if j == n:
                segs.append((a, n, up))
                a = n
                break
            j += 1
    return segs


def _segments_to_result(segs, n):
    x = np.empty(n)
    bits = np.ones(n - 1, dtype=np.uint8)
    for start, end, value in segs:
        x[start:end] = value
        bits[start:end - 1] = 0
    # same-valued neighbours across a segment boundary are still members
    for i in range(1, n):
        if x[i] == x[i - 1]:
            bits[i - 1] = 0
    return ProxResult(x, SparsityPattern(bits))


def prox_tv1d(u, gamma, lam=1.0) -> ProxResult:
    """Exact prox of the 1-D total variation, with exact segment flags."""
    u = _check_input(u, gamma)
    if u.ndim != 1 or u.size < 2:
        raise ValueError("tv1d needs a vector of length >= 2")
    segs = _tv1d_segments(u, gamma * lam)
    return _segments_to_result(segs, u.size)


def _potts_segments(y, step):
    """Optimal segmentation for step*(#jumps) + 0.5*||y - x||^2.

    O(n^2) dynamic program over the last breakpoint; per-segment values are
    the segment means. Ties prefer fewer segments.
    """
    n = y.size
    c1 = np.concatenate(([0.0], np.cumsum(y)))
    c2 = np.concatenate(([0.0], np.cumsum(y * y)))
    best = np.empty(n + 1)
    best[0] = 0.0
    nseg = np.zeros(n + 1, dtype=np.int64)
    back = np.zeros(n + 1, dtype=np.int64)
    for r in range(1, n + 1):
        ls = np.arange(r)
        length = r - ls
        seg_cost = 0.5 * ((c2[r] - c2[ls]) - (c1[r] - c1[ls]) ** 2 / length)
        total = best[:r] + seg_cost + step * (ls > 0)
        tied = np.flatnonzero(total == total.min())
        l = tied[np.argmin(nseg[tied])]
        best[r] = total[l]
        nseg[r] = nseg[l] + 1
        back[r] = l
    segs = []
    r = n
    while r > 0:
        l = int(back[r])
        segs.append((l, r, (c1[r] - c1[l]) / (r - l)))
        r = l
    segs.reverse()
    return segs


def prox_potts1d(u, gamma, lam=1.0) -> ProxResult:
    """Exact prox of the jump-count penalty (piecewise-constant fits)."""
    u = _check_input(u, gamma)
    if u.ndim != 1 or u.size < 2:
        raise ValueError("potts1d needs a vector of length >= 2")
    segs = _potts_segments(u, gamma * lam)
    return _segments_to_result(segs, u.size)


def _svd_fixed_signs(a):
    """SVD with a deterministic sign convention: the largest-magnitude entry
    of each left singular vector is nonnegative."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            vt[j, :] = -vt[j, :]
    return u, s, vt


def _rank_pattern(rows, cols, rank):
    bits = np.ones(min(rows, cols) + 1, dtype=np.uint8)
    bits[rank] = 0
    return SparsityPattern(bits)


def prox_nuclear(u, gamma, lam=1.0) -> ProxResult:
    """Soft thresholding of the singular values at gamma*lam.

    The output rank is the number of singular values that survive the
    threshold, which is known exactly from the shrinkage branch.
    """
    u = _check_input(u, gamma)
    if u.ndim != 2:
        raise ValueError("nuclear prox expects a matrix")
    w, s, vt = _svd_fixed_signs(u)
    t = gamma * lam
    kept = s > t
    s_new = np.where(kept, s - t, 0.0)
    x = (w * s_new) @ vt
    return ProxResult(x, _rank_pattern(*u.shape, rank=int(kept.sum())))


def prox_rank(u, gamma, lam=1.0) -> ProxResult:
    """Hard thresholding of the singular values at sqrt(2*gamma*lam)."""
    u = _check_input(u, gamma)
    if u.ndim != 2:
        raise ValueError("rank prox expects a matrix")
    w, s, vt = _svd_fixed_signs(u)
    thr = np.sqrt(2.0 * gamma * lam)
    kept = s > thr
    s_new = np.where(kept, s, 0.0)
    x = (w * s_new) @ vt
    return ProxResult(x, _rank_pattern(*u.shape, rank=int(kept.sum())))


class Regularizer:
    """A weighted structure-inducing function g = lam * r with its collection.

    Construct through the classmethods so that the collection always matches
    the kind (coordinate zeros for l1/l0, adjacent equalities for
    tv1d/potts1d, rank levels for nuclear/rank).
    """

    def __init__(self, kind: str, lam: float, collection: ManifoldCollection):
        if kind not in _KIND_COLLECTION:
            raise ValueError(f"unknown regularizer kind {kind!r}")
        if not lam > 0:
            raise ValueError("lam must be positive")
        family = _KIND_COLLECTION[kind]
        kinds = {s.kind for s in collection.specs}
        expected = {
            "coordinate": {"coordinate_zero"},
            "adjacent": {"adjacent_equal"},
            "rank": {"rank_level"},
        }[family]
        if kinds != expected:
            raise ValueError(f"collection kinds {kinds} do not match {kind!r}")
        self.kind = kind
        self.lam = float(lam)
        self.collection = collection

    @classmethod
    def l1(cls, n, lam=1.0):
        return cls("l1", lam, coordinate_zeros(n))

    @classmethod
    def l0(cls, n, lam=1.0):
        return cls("l0", lam, coordinate_zeros(n))

    @classmethod
    def tv1d(cls, n, lam=1.0):
        return cls("tv1d", lam, adjacent_pairs(n))

    @classmethod
    def potts1d(cls, n, lam=1.0):
        return cls("potts1d", lam, adjacent_pairs(n))

    @classmethod
    def nuclear(cls, rows, cols, lam=1.0):
        return cls("nuclear", lam, rank_levels(rows, cols))

    @classmethod
    def rank(cls, rows, cols, lam=1.0):
        return cls("rank", lam, rank_levels(rows, cols))

    @property
    def is_convex(self) -> bool:
        return self.kind in CONVEX_KINDS

    def value(self, x) -> float:
        """g(x) = lam * r(x). Counting kinds (l0, potts1d) use exact zero
        tests; the rank value uses a relative singular-value cutoff."""
        x = np.asarray(x, dtype=float)
        if self.kind == "l1":
            return self.lam * float(np.abs(x).sum())
        if self.kind == "l0":
            return self.lam * float(np.count_nonzero(x))
        if self.kind == "tv1d":
            return self.lam * float(np.abs(np.diff(x)).sum())
        if self.kind == "potts1d":
            return self.lam * float(np.count_nonzero(np.diff(x)))
        s = np.linalg.svd(x, compute_uv=False)
        if self.kind == "nuclear":
            return self.lam * float(s.sum())
        cut = 1e-10 * (s[0] if s.size else 0.0)
        return self.lam * float(np.sum(s > cut))

    def prox(self, u, gamma) -> ProxResult:
        fn = {
            "l1": prox_l1,
            "l0": prox_l0,
            "tv1d": prox_tv1d,
            "potts1d": prox_potts1d,
            "nuclear": prox_nuclear,
            "rank": prox_rank,
        }[self.kind]
        return fn(u, gamma, self.lam)


def prox_optimality_residual(reg: Regularizer, u, gamma, x) -> float:
    """Distance of -(x - u)/gamma from the subdifferential of g at x.

    Zero (up to roundoff) exactly when x = prox_{gamma*g}(u). Only defined
    for the convex kinds; the subdifferential structure used is:

    * l1: +-lam on nonzero coordinates, [-lam, lam] on zeros.
    * tv1d: lam * D^T v with v_i in sign([Dx]_i) (interval at zero jumps);
      v is recovered by prefix sums, and the component of the target outside
      range(D^T) (its mean) is charged to the residual.
    * nuclear: lam * (U V^T + W) with W orthogonal to the row/column spaces
      and spectral norm at most lam.
    """
    if reg.kind not in CONVEX_KINDS:
        raise ValueError(f"residual undefined for nonconvex kind {reg.kind!r}")
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    lam = reg.lam
    grad = (u - x) / gamma  # must lie in the subdifferential of g at x

    if reg.kind == "l1":
        on = x != 0.0
        err = np.where(
            on,
            np.abs(grad - lam * np.sign(x)),
            np.maximum(np.abs(grad) - lam, 0.0),
        )
        return float(np.linalg.norm(err))

    if reg.kind == "tv1d":
        n = x.size
        mean_defect = abs(grad.sum()) / np.sqrt(n)
        v = -np.cumsum(grad)[:-1] / lam
        d = np.diff(x)
        err = np.where(
            d != 0.0, np.abs(v - np.sign(d)), np.maximum(np.abs(v) - 1.0, 0.0)
        )
        return float(np.hypot(mean_defect, lam * np.linalg.norm(err)))

    # nuclear
    w, s, vt = np.linalg.svd(x, full_matrices=False)
    cut = 1e-12 * (s[0] if s.size else 0.0)
    r = int(np.sum(s > cut))
    wr, vtr = w[:, :r], vt[:r, :]
    inner = grad - (grad - wr @ (wr.T @ grad)) @ (
        np.eye(x.shape[1]) - vtr.T @ vtr
    )
    tangential = np.linalg.norm(inner - lam * (wr @ vtr))
    outer = (grad - wr @ (wr.T @ grad)) @ (np.eye(x.shape[1]) - vtr.T @ vtr)
    sig = np.linalg.svd(outer, compute_uv=False)
    excess = np.linalg.norm(np.maximum(sig - lam, 0.0))
    return float(np.hypot(tangential, excess))
