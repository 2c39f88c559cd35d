"""Turning identified structure into computational gains.

Three mechanisms, all driven by the exact patterns the prox reports:

* sparse key-value messages, for storing or shipping structured iterates;
* inertial acceleration that backs off whenever the accelerated candidate
  would leave structure the iterate currently holds;
* updates restricted to the identified subspace, either deterministically
  with interleaved full steps (predictor-corrector) or by randomly relaxing
  identified constraints with a debiased projection (random subspace
  descent).
"""

from dataclasses import dataclass

import numpy as np

from .manifolds import COORDINATE_ZERO, RANK_LEVEL, project
from .solvers import SolverConfig, _Tracer, _resolve_gamma, _start_point

__all__ = [
    "SparseMessage",
    "sparse_encode",
    "sparse_decode",
    "SubspaceSamplerConfig",
    "run_pg_adaptive_inertia",
    "run_predictor_corrector",
    "run_random_subspace",
    "estimate_projection_diagonal",
]


@dataclass
class SparseMessage:
    """(index, value) encoding of a vector; cost = number of entries."""

    entries: list
    ambient: int

    @property
    def cost(self) -> int:
        return len(self.entries)


def sparse_encode(x) -> SparseMessage:
    x = np.asarray(x, dtype=float)
    idx = np.flatnonzero(x != 0.0)
    return SparseMessage(
        entries=[(int(i), float(x[i])) for i in idx], ambient=int(x.size)
    )


def sparse_decode(msg: SparseMessage) -> np.ndarray:
    x = np.zeros(msg.ambient)
    for i, v in msg.entries:
        x[i] = v
    return x


def _lost_bits(current, candidate) -> bool:
    """True when the candidate leaves a set the current iterate is in."""
    return bool(np.any((current.bits == 0) & (candidate.bits == 1)))


def run_pg_adaptive_inertia(problem, config=None, x0=None):
    """Accelerated proximal gradient that only accelerates while the
    structure is preserved.

    Each iteration forms the inertial candidate; if its pattern drops any
    set the current iterate belongs to, the candidate is discarded, a plain
    proximal gradient step is taken instead, and the momentum schedule
    restarts from zero. The accel_active trace flag is 1 exactly on accepted
    inertial steps, so accepted steps never lose structure by construction.
    """
    config = config or SolverConfig()
    f, g = problem.smooth, problem.reg
    gamma = _resolve_gamma(
        config, 1.0 / f.lipschitz, 0.0, 1.0 / f.lipschitz, True,
        "pg-adaptive"
    )
    x = _start_point(problem, x0)
    x_prev = x
    u_prev = x
    momentum = 1  # local iteration index for the momentum schedule
    pattern = None
    tracer = _Tracer(problem, config, gamma)
    converged = False
    for k in range(1, config.max_iter + 1):
        alpha = (momentum - 1.0) / (momentum + 3.0)
        y = x + alpha * (x - x_prev)
        u = y - gamma * f.gradient(y)
        res = g.prox(u, gamma)
        if alpha > 0.0 and _lost_bits(pattern, res.pattern):
            u = x - gamma * f.gradient(x)
            res = g.prox(u, gamma)
            momentum = 1
            accel = 0
        else:
            accel = 1 if alpha > 0.0 else 0
            momentum += 1
        x_prev, x, pattern = x, res.point, res.pattern
        u_step = float(np.linalg.norm(u - u_prev))
        u_prev = u
        tracer.record(k, x, pattern, u, u_step, accel=accel, enforced=0)
        if k > 1 and u_step <= config.stop_tol:
            converged = True
            break
    return tracer.finish(x, pattern, converged)


def run_predictor_corrector(problem, config=None, full_step_every=5, x0=None):
    """Gradient steps projected onto the identified flat, with periodic
    full-space steps.

    Between full steps the gradient is projected onto the intersection of
    the currently identified sets (a linear subspace for coordinate and
    adjacent-equality collections, where the tangent projection is the
    projection itself), so iterates stay on the identified flat. The first
    iteration and every full_step_every-th one after it are plain proximal
    gradient steps, which keep the identification honest.
    """
    config = config or SolverConfig()
    f, g = problem.smooth, problem.reg
    collection = g.collection
    if any(s.kind == RANK_LEVEL for s in collection.specs):
        raise ValueError("predictor-corrector needs linear (vector) sets")
    if full_step_every < 1:
        raise ValueError("full_step_every must be >= 1")
    gamma = _resolve_gamma(
        config, 1.0 / f.lipschitz, 0.0, 2.0 / f.lipschitz, False,
        "predictor-corrector"
    )
    x = _start_point(problem, x0)
    u_prev = x
    pattern = None
    tracer = _Tracer(problem, config, gamma)
    converged = False
    for k in range(1, config.max_iter + 1):
        full = (k - 1) % full_step_every == 0
        grad = f.gradient(x)
        if full or pattern is None:
            enforced = 0
            u = x - gamma * grad
        else:
            identified = np.flatnonzero(pattern.bits == 0)
            enforced = int(identified.size)
            if enforced:
                grad = project(collection, identified, grad)
            u = x - gamma * grad
        res = g.prox(u, gamma)
        x_step = float(np.linalg.norm(res.point - x))
        x, pattern = res.point, res.pattern
        u_step = float(np.linalg.norm(u - u_prev))
        u_prev = u
        tracer.record(k, x, pattern, u, u_step, accel=0, enforced=enforced)
        # u flips between the subspace and full-space limits, so the u-step
        # does not vanish; on a full step the x-step is exactly the proximal
        # gradient fixed-point residual of the previous iterate
        if k > 1 and full and x_step <= config.stop_tol:
            converged = True
            break
    return tracer.finish(x, pattern, converged)


@dataclass
class SubspaceSamplerConfig:
    """Bernoulli sampling of identified coordinate constraints.

    keep_probability is the probability that an identified zero coordinate
    is actually enforced in a given iteration; it must be strictly inside
    (0, 1) so every direction keeps a nonzero exploration probability.
    refresh_wait is the initial waiting period (in iterations) before the
    frozen identified collection is refreshed; the wait doubles when the
    pattern changed since the last refresh and halves (floored at the
    initial value) when it did not.
    """

    keep_probability: float = 0.5
    refresh_wait: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.keep_probability < 1.0:
            raise ValueError("keep_probability must be strictly inside (0, 1)")
        if self.refresh_wait < 1:
            raise ValueError("refresh_wait must be positive")


def estimate_projection_diagonal(n, candidates, p_b, n_draws, seed=0):
    """Monte Carlo estimate of the mean subspace projection diagonal.

    Enforcing each candidate constraint independently with probability p_b
    zeroes that coordinate, so the exact mean is 1 - p_b on candidates and 1
    elsewhere; this estimator exists to check that claim empirically.
    """
    candidates = np.asarray(sorted(candidates), dtype=int)
    rng = np.random.default_rng(seed)
    diag = np.ones(n)
    if candidates.size:
        enforced = rng.random((n_draws, candidates.size)) < p_b
        diag[candidates] = 1.0 - enforced.mean(axis=0)
    return diag


def run_random_subspace(problem, config=None, sampler=None, x0=None):
    """Proximal gradient updating a random subset of the free coordinates.

    Keeps a frozen set of identified zero coordinates; each iteration draws
    which of them to enforce (Bernoulli keep_probability per constraint),
    zeroes those gradient directions, and debiases with the inverse square
    root of the mean projection so the update direction is unbiased. The
    frozen set is refreshed on the sampler's adaptive schedule.

    Because the stale u-coordinates are rescaled on every enforced draw, the
    u-sequence keeps oscillating at the solution; termination is therefore
    declared on the proximal-gradient fixed-point residual at x_k instead of
    the u-step (which is still traced).
    """
    config = config or SolverConfig()
    sampler = sampler or SubspaceSamplerConfig()
    f, g = problem.smooth, problem.reg
    if g.kind != "l1" or any(
        s.kind != COORDINATE_ZERO for s in g.collection.specs
    ):
        raise ValueError("random subspace descent needs an l1 regularizer")
    gamma = _resolve_gamma(
        config, 1.0 / f.lipschitz, 0.0, 2.0 / f.lipschitz, False,
        "random-subspace"
    )
    rng = np.random.default_rng(sampler.seed)
    p_b = sampler.keep_probability
    q_on = (1.0 - p_b) ** -0.5

    x = _start_point(problem, x0)
    u_prev = x.copy()
    frozen = np.zeros(x.size, dtype=bool)  # identified candidate coordinates
    pattern = None
    pattern_at_refresh = None
    wait = sampler.refresh_wait
    since_refresh = 0
    tracer = _Tracer(problem, config, gamma)
    converged = False
    for k in range(1, config.max_iter + 1):
        if pattern is not None and since_refresh >= wait:
            changed = not (
                pattern_at_refresh is not None and pattern == pattern_at_refresh
            )
            wait = 2 * wait if changed else max(sampler.refresh_wait, wait // 2)
            frozen = np.asarray(pattern.bits) == 0
            pattern_at_refresh = pattern
            since_refresh = 0
        enforced = frozen & (rng.random(x.size) < p_b)
        y = x - gamma * f.gradient(x)
        u = np.where(enforced, u_prev / q_on, y)
        res = g.prox(u, gamma)
        x, pattern = res.point, res.pattern
        u_step = float(np.linalg.norm(u - u_prev))
        u_prev = u
        since_refresh += 1
        tracer.record(
            k, x, pattern, u, u_step, accel=0, enforced=int(enforced.sum())
        )
        residual = x - g.prox(x - gamma * f.gradient(x), gamma).point
        if k > 1 and float(np.linalg.norm(residual)) <= config.stop_tol:
            converged = True
            break
    return tracer.finish(x, pattern, converged)
