"""Composite problems: smooth oracles, finite sums, and seeded generators.

A composite problem is min f(x) + g(x) with f smooth (value/gradient,
Lipschitz gradient constant, strong convexity modulus, optional finite-sum
components) and g a structure-inducing regularizer from the prox catalog.
Generators can attach a certified optimal pair (xstar, ustar) so that
identification claims can be checked against ground truth.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .prox import Regularizer, prox_nuclear

__all__ = [
    "SmoothOracle",
    "LeastSquaresOracle",
    "MatrixLSOracle",
    "CompositeProblem",
    "least_squares_oracle",
    "matrix_ls_oracle",
    "gen_lasso",
    "gen_qc_lasso",
    "gen_lowrank_matrix_problem",
    "power_lam_max",
]

_POWER_SEED = 0x5EED  # fixed so spectral estimates are reproducible


def power_lam_max(gram_matvec, dim, tol=1e-10, max_iter=10_000):
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Stops when the Rayleigh quotient changes by at most tol (relative),
    capped at max_iter applications of the operator.
    """
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = gram_matvec(v)
        lam_new = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


class SmoothOracle:
    """Smooth term f: value, gradient, and the constants solvers need.

    components, when present, is a list of oracles f^j with
    f = (1/m) * sum_j f^j (checked by the test suite on random points).
    """

    def __init__(self, value, gradient, lipschitz, strong_convexity=0.0,
                 components=None):
        self._value = value
        self._gradient = gradient
        self.lipschitz = float(lipschitz)
        self.strong_convexity = float(strong_convexity)
        self.components = components

    def value(self, x) -> float:
        return float(self._value(x))

    def gradient(self, x):
        return self._gradient(x)

    def prox(self, v, gamma):
        raise NotImplementedError("this smooth term has no proximal operator")

    @property
    def has_prox(self) -> bool:
        return type(self).prox is not SmoothOracle.prox


class LeastSquaresOracle(SmoothOracle):
    """f(x) = 0.5 * ||A x - b||^2 with cached Gram matrix.

    The gradient Lipschitz constant is the top eigenvalue of A^T A from
    power iteration; the strong convexity modulus comes from power iteration
    on the deflated operator lam_max * I - A^T A (clamped to 0 when the
    matrix is numerically rank deficient).

    prox solves (I + gamma A^T A) x = v + gamma A^T b via a Cholesky
    factorization cached per gamma.
    """

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.size:
            raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
        self.A = A
        self.b = b
        self.gram = A.T @ A
        self.Atb = A.T @ b
        n = A.shape[1]
        lam_max = power_lam_max(lambda v: self.gram @ v, n)
        deflated = power_lam_max(lambda v: lam_max * v - self.gram @ v, n)
        mu = lam_max - deflated
        # the deflated iteration stalls at ~1e-8 relative accuracy, so treat
        # anything below that as numerical rank deficiency
        if mu <= 1e-7 * max(lam_max, 1.0):
            mu = 0.0
        super().__init__(self._ls_value, self._ls_gradient, lam_max, mu)
        self._prox_cache = {}

    def _ls_value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def _ls_gradient(self, x):
        return self.gram @ x - self.Atb

    def prox(self, v, gamma):
        key = float(gamma)
        if key not in self._prox_cache:
            n = self.gram.shape[0]
            self._prox_cache[key] = scipy.linalg.cho_factor(
                np.eye(n) + key * self.gram
            )
        return scipy.linalg.cho_solve(self._prox_cache[key], v + gamma * self.Atb)

    def split(self, n_components):
        """Row-partition into k blocks f^j with f = (1/k) sum_j f^j.

        Each block is itself a least-squares oracle on sqrt(k)-scaled data so
        that averaging the components reproduces f exactly.
        """
        m = self.A.shape[0]
        if not 1 <= n_components <= m:
            raise ValueError("component count must be in 1..m")
        scale = np.sqrt(n_components)
        rows = np.array_split(np.arange(m), n_components)
        return [
            LeastSquaresOracle(scale * self.A[idx], scale * self.b[idx])
            for idx in rows
        ]


def least_squares_oracle(A, b, components=None) -> LeastSquaresOracle:
    """Least-squares smooth term, optionally with row-partitioned components."""
    oracle = LeastSquaresOracle(A, b)
    if components is not None:
        oracle.components = oracle.split(components)
    return oracle


class MatrixLSOracle(SmoothOracle):
    """f(X) = 0.5 * ||mask * (X - target)||_F^2 (identity map when mask=None).

    The mask is entrywise 0/1; unobserved entries do not contribute. The
    gradient Lipschitz constant is 1 (0/1 mask); strong convexity is 1 for
    the identity map and 0 otherwise.
    """

    def __init__(self, target, mask=None):
        target = np.asarray(target, dtype=float)
        if target.ndim != 2:
            raise ValueError("target must be a matrix")
        if mask is not None:
            mask = np.asarray(mask, dtype=float)
            if mask.shape != target.shape:
                raise ValueError(
                    f"mask shape {mask.shape} != target shape {target.shape}"
                )
            if not np.all((mask == 0) | (mask == 1)):
                raise ValueError("mask entries must be 0 or 1")
        self.target = target
        self.mask = mask
        full = mask is None or bool(np.all(mask == 1))
        super().__init__(
            self._mls_value, self._mls_gradient, 1.0, 1.0 if full else 0.0
        )

    def _residual(self, x):
        r = x - self.target
        if self.mask is not None:
            r = self.mask * r
        return r

    def _mls_value(self, x):
        r = self._residual(x)
        return 0.5 * float(np.sum(r * r))

    def _mls_gradient(self, x):
        return self._residual(x)

    def prox(self, v, gamma):
        m = 1.0 if self.mask is None else self.mask
        return (v + gamma * m * self.target) / (1.0 + gamma * m)


def matrix_ls_oracle(target, mask=None) -> MatrixLSOracle:
    return MatrixLSOracle(target, mask)


@dataclass
class CompositeProblem:
    """min f(x) + g(x), optionally with a certified optimal pair.

    When ground truth is present, xstar = prox_{cert_gamma * g}(ustar) with
    ustar = xstar - cert_gamma * grad f(xstar), and delta records the
    interiority margin of the generator's dual certificate.
    """

    smooth: SmoothOracle
    reg: Regularizer
    xstar: np.ndarray | None = None
    ustar: np.ndarray | None = None
    cert_gamma: float | None = None
    delta: float | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def objective(self, x) -> float:
        return self.smooth.value(x) + self.reg.value(x)

    def zero_point(self) -> np.ndarray:
        ambient = self.reg.collection.ambient
        return np.zeros(ambient if isinstance(ambient, tuple) else int(ambient))

    @property
    def has_ground_truth(self) -> bool:
        return self.xstar is not None and self.ustar is not None


def gen_lasso(m, n, seed, density=0.1, noise=0.1, lam=None, components=10):
    """Random lasso instance: Gaussian design, sparse planted signal.

    lam defaults to 0.1 * ||A^T b||_inf. components row-partitions the rows
    for the finite-sum solvers (clipped to m).
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    s = max(1, int(round(density * n)))
    support = rng.choice(n, size=s, replace=False)
    x_true = np.zeros(n)
    x_true[support] = rng.uniform(1.0, 2.0, size=s) * rng.choice([-1.0, 1.0], size=s)
    b = A @ x_true + noise * rng.standard_normal(m)
    if lam is None:
        lam = 0.1 * float(np.abs(A.T @ b).max())
    oracle = least_squares_oracle(A, b, components=min(components, m))
    return CompositeProblem(
        smooth=oracle,
        reg=Regularizer.l1(n, lam),
        seed=int(seed),
        meta={"kind": "lasso", "x_true": x_true},
    )


def gen_qc_lasso(n, s, delta, seed, m=None, lam=1.0, components=10,
                 degenerate=False):
    """Lasso instance with a certified solution of exact support size s.

    The solution xstar is planted (signs and magnitudes in [1, 2]); the
    right-hand side is chosen so that -grad f(xstar) equals lam * sign on the
    support and stays inside (1 - delta) * lam off the support, which makes
    the support stable over a computable ball around ustar. With
    degenerate=True one off-support certificate entry is forced exactly onto
    the boundary, so no stability margin exists.

    Requires m >= n (unique minimizer through a full-column-rank design).
    """
    if m is None:
        m = 2 * n
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if s > min(m, n) or s < 1:
        raise ValueError("support size must be in 1..min(m, n)")
    if m < n:
        raise ValueError("need m >= n so the minimizer is unique")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    support = np.sort(rng.choice(n, size=s, replace=False))
    xstar = np.zeros(n)
    xstar[support] = rng.uniform(1.0, 2.0, size=s) * rng.choice(
        [-1.0, 1.0], size=s
    )
    # target value of -grad f(xstar): lam*sign on the support, strictly
    # interior off it
    v = np.zeros(n)
    v[support] = lam * np.sign(xstar[support])
    off = np.setdiff1d(np.arange(n), support)
    v[off] = (1.0 - delta) * lam * rng.uniform(-1.0, 1.0, size=off.size)
    if degenerate and off.size:
        v[off[0]] = lam
    # least-norm residual r with A^T r = -v, then b = A xstar - r
    r = -A @ np.linalg.solve(A.T @ A, v)
    b = A @ xstar - r
    oracle = least_squares_oracle(A, b, components=min(components, m))
    gamma = 1.0 / oracle.lipschitz
    ustar = xstar - gamma * oracle.gradient(xstar)
    return CompositeProblem(
        smooth=oracle,
        reg=Regularizer.l1(n, lam),
        xstar=xstar,
        ustar=ustar,
        cert_gamma=gamma,
        delta=float(delta),
        seed=int(seed),
        meta={"kind": "qc-lasso", "support": support, "degenerate": degenerate},
    )


def gen_lowrank_matrix_problem(size=20, rank=4, degenerate=False, seed=0,
                               lam=1.0):
    """Nuclear-norm-regularized matrix denoising with a known-rank solution.

    The target B has orthogonally invariant factors with leading singular
    values well above lam (they survive the shrinkage) and a tail well below
    (it is removed), so the minimizer prox_{lam*||.||_*}(B) has exactly the
    requested rank. The degenerate variant instead places four tail values in
    a narrow band straddling lam, so the optimal rank is >= the planted one
    and membership of each near-threshold value is decided by a hair.
    """
    if rank > size:
        raise ValueError("rank cannot exceed the matrix size")
    rng = np.random.default_rng(seed)
    qu, _ = np.linalg.qr(rng.standard_normal((size, size)))
    qv, _ = np.linalg.qr(rng.standard_normal((size, size)))
    sigma = np.zeros(size)
    sigma[:rank] = lam * rng.uniform(2.0, 4.0, size=rank)
    tail = size - rank
    if degenerate:
        near = min(4, tail)
        sigma[rank:rank + near] = lam * rng.uniform(0.95, 1.05, size=near)
        sigma[rank + near:] = lam * rng.uniform(0.1, 0.5, size=tail - near)
    else:
        sigma[rank:] = lam * rng.uniform(0.1, 0.5, size=tail)
    sigma = np.sort(sigma)[::-1]
    target = (qu * sigma) @ qv.T
    oracle = matrix_ls_oracle(target)
    reg = Regularizer.nuclear(size, size, lam)
    # gamma = 1 makes the problem's minimizer exactly prox_{lam*||.||_*}(B)
    xres = prox_nuclear(target, 1.0, lam)
    expected_rank = int(np.sum(sigma > lam))
    return CompositeProblem(
        smooth=oracle,
        reg=reg,
        xstar=xres.point,
        ustar=target.copy(),
        cert_gamma=1.0,
        seed=int(seed),
        meta={
            "kind": "lowrank",
            "rank": rank,
            "degenerate": degenerate,
            "expected_rank": expected_rank,
        },
    )
