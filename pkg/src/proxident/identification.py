"""Identification monitoring: pattern stability, ball bounds, screening.

Iterates of a converging proximal method eventually carry at least the
structure of the limit point and at most the structure reachable by the prox
from a ball around the limit's pre-image u*. The helpers here analyze traces
for stability, evaluate the ball bound (closed form for the l1 geometry,
sampled estimate otherwise), test the stability condition that makes
identification exact, and screen coordinates that are provably zero at the
optimum given a certified region.
"""

import math
from dataclasses import dataclass

import numpy as np

from .manifolds import SparsityPattern
from .prox import Regularizer

__all__ = [
    "IdentificationReport",
    "analyze_trace",
    "enlarged_bound_l1",
    "enlarged_bound_sampled",
    "qc_check",
    "safe_screen_l1",
    "identification_time_estimate",
    "report_text",
]


@dataclass
class IdentificationReport:
    """Summary of the pattern sequence of one trace.

    first_stable_iter is the 0-based position in the trace from which the
    pattern no longer changes (0 for a constant trace). monotone records
    whether the nnz/rank statistic was nonincreasing; oscillation_count is
    the number of adjacent pattern changes.
    """

    first_stable_iter: int
    pattern_final: SparsityPattern
    monotone: bool
    oscillation_count: int


def _patterns_and_counts(trace):
    patterns, counts = [], []
    for item in trace:
        if isinstance(item, SparsityPattern):
            patterns.append(item)
            counts.append(item.count_ones())
        else:
            patterns.append(item.pattern)
            counts.append(item.nnz)
    return patterns, counts


def analyze_trace(trace) -> IdentificationReport:
    """Fold a trace (records or raw patterns) into a stability report."""
    patterns, counts = _patterns_and_counts(trace)
    if not patterns:
        raise ValueError("empty trace")
    oscillations = sum(
        1 for a, b in zip(patterns, patterns[1:]) if not a == b
    )
    stable = len(patterns) - 1
    while stable > 0 and patterns[stable - 1] == patterns[-1]:
        stable -= 1
    monotone = all(a >= b for a, b in zip(counts, counts[1:]))
    return IdentificationReport(
        first_stable_iter=stable,
        pattern_final=patterns[-1],
        monotone=monotone,
        oscillation_count=oscillations,
    )


def enlarged_bound_l1(ustar, step, eps) -> SparsityPattern:
    """Largest pattern the l1 prox can produce on the eps-ball around ustar.

    Closed form: coordinate i can be nonzero for some u with
    ||u - ustar|| <= eps exactly when |ustar_i| + eps > step (= gamma*lam).
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    ustar = np.asarray(ustar, dtype=float)
    bits = (np.abs(ustar) + eps > step).astype(np.uint8)
    return SparsityPattern(bits)


def _ball_sample(rng, center, eps):
    direction = rng.standard_normal(center.shape)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return center.copy()
    radius = eps * rng.uniform() ** (1.0 / center.size)
    return center + (radius / norm) * direction


def enlarged_bound_sampled(reg: Regularizer, ustar, gamma, eps,
                           n_samples=1000, seed=0) -> SparsityPattern:
    """Sampled (lower) estimate of the ball bound for any regularizer.

    Takes the coordinate-wise max of the prox pattern over uniform draws in
    the eps-ball. Sampling can only under-cover the ball, so the result is a
    lower estimate of the true bound, never an over-estimate; use
    enlarged_bound_l1 whenever the closed form applies.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    ustar = np.asarray(ustar, dtype=float)
    base = reg.prox(ustar, gamma).pattern
    if eps == 0:
        return base
    rng = np.random.default_rng(seed)
    bits = np.array(base.bits)
    for _ in range(n_samples):
        u = _ball_sample(rng, ustar, eps)
        bits = np.maximum(bits, reg.prox(u, gamma).pattern.bits)
    return SparsityPattern(bits)


def qc_check(problem, eps, n_samples=1000, seed=0) -> bool:
    """Is the prox pattern constant over the eps-ball around ustar?

    True guarantees that any method whose u-iterates enter that ball produces
    iterates with exactly the optimal pattern. Closed form for l1; for other
    kinds a sampled check (all draws reproducing the optimal pattern), which
    can only over-accept.
    """
    if not problem.has_ground_truth:
        raise ValueError("qc_check needs a problem with ground truth")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    reg = problem.reg
    gamma = problem.cert_gamma
    ustar = np.asarray(problem.ustar, dtype=float)
    if reg.kind == "l1":
        step = gamma * reg.lam
        zero = np.asarray(problem.xstar) == 0.0
        ok_zero = np.all(np.abs(ustar[zero]) + eps <= step)
        ok_nonzero = np.all(np.abs(ustar[~zero]) - eps > step)
        return bool(ok_zero and ok_nonzero)
    target = reg.prox(ustar, gamma).pattern
    rng = np.random.default_rng(seed)
    for _ in range(n_samples):
        u = _ball_sample(rng, ustar, eps)
        if not reg.prox(u, gamma).pattern == target:
            return False
    return True


def safe_screen_l1(center, radius, step) -> set:
    """Coordinates provably zero at the optimum, given a certified region.

    The caller guarantees ustar lies in the ball(center, radius); then every
    coordinate with |center_i| + radius <= step (= gamma*lam) is mapped to
    zero by the prox for all candidate u, hence zero at the optimum.
    Region construction (e.g. from duality gaps) is the caller's business.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    center = np.asarray(center, dtype=float)
    return set(np.flatnonzero(np.abs(center) + radius <= step).tolist())


def identification_time_estimate(c, eps, kind="inverse", rho=None) -> int:
    """Heuristic iteration count after which the pattern should be optimal.

    kind="inverse": smallest k with c/k <= eps (rate O(1/k)).
    kind="linear":  smallest k with c * rho**k <= eps (linear rate rho).
    Floored at 1.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if c <= 0:
        raise ValueError("rate constant must be positive")
    if kind == "inverse":
        return max(1, math.ceil(c / eps))
    if kind == "linear":
        if rho is None or not 0 < rho < 1:
            raise ValueError("linear kind needs rho in (0, 1)")
        return max(1, math.ceil(math.log(eps / c) / math.log(rho)))
    raise ValueError(f"unknown rate kind {kind!r}")


def report_text(report: IdentificationReport) -> str:
    """Key=value rendering of a report (stable interface for the CLI)."""
    return (
        f"first_stable_iter={report.first_stable_iter}\n"
        f"oscillation_count={report.oscillation_count}\n"
        f"monotone={int(report.monotone)}\n"
        f"pattern_hash={report.pattern_final.packed_hex()}\n"
    )
