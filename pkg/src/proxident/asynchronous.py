"""Simulated asynchronous proximal gradient (DAve-PG) over worker oracles.

The solver runs a deterministic single-threaded discrete-event simulation
instead of real threads so that traces are exactly reproducible. Worker j
repeatedly computes its contribution

    c_j = x - gamma * grad f^j(x)

at the iterate x it last received; the master keeps u = mean_j c_j, and on
each completion event ingests the fresh contribution, applies the prox, and
sends the new iterate back to the finishing worker.

Task durations are 1 + d simulated seconds with d drawn from the delay
model. Completions sharing the same timestamp are ingested as one batch with
a single prox applied afterwards; with constant delays all workers stay in
lockstep and the iterate sequence reduces exactly to the synchronous
proximal gradient with the averaged gradient. Continuous delay models never
produce ties, so every batch is a single arrival, i.e. one iteration per
worker completion.

Contributions are initialized at the starting point (a synchronous round
zero): the master's table starts at c_j(x_0) and every worker begins its
first task there.

Communication accounting counts the coordinates of the iterates the master
sends to workers (the messages whose size the encoding changes): n per
message for the dense encoding, the number of nonzero entries for the
sparse key-value encoding. The initial broadcast of x_0 to the m workers is
included. comm_coords in the trace is cumulative; the wallclock column holds
the simulated event time.
"""

import heapq
from dataclasses import dataclass

import numpy as np

from .solvers import SolverConfig, _Tracer, _resolve_gamma, _start_point

__all__ = ["DelayModel", "run_dave_pg"]


@dataclass(frozen=True)
class DelayModel:
    """Extra task delay on top of the unit compute time.

    kinds: constant(d), uniform(low, high) (continuous), geometric(q)
    (integer, support {0, 1, ...}). All have finite mean, so every worker
    completes infinitely often.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0

    @classmethod
    def constant(cls, d):
        if not (np.isfinite(d) and d >= 0):
            raise ValueError("constant delay must be finite and >= 0")
        return cls("constant", float(d))

    @classmethod
    def uniform(cls, low, high):
        if not (np.isfinite(low) and np.isfinite(high) and 0 <= low <= high):
            raise ValueError("uniform delay needs finite 0 <= low <= high")
        return cls("uniform", float(low), float(high))

    @classmethod
    def geometric(cls, q):
        if not 0 < q <= 1:
            raise ValueError("geometric delay needs q in (0, 1]")
        return cls("geometric", float(q))

    @classmethod
    def parse(cls, text):
        """Parse 'constant:2', 'uniform:0:3', or 'geometric:0.5'."""
        parts = str(text).split(":")
        try:
            if parts[0] == "constant" and len(parts) == 2:
                return cls.constant(float(parts[1]))
            if parts[0] == "uniform" and len(parts) == 3:
                return cls.uniform(float(parts[1]), float(parts[2]))
            if parts[0] == "geometric" and len(parts) == 2:
                return cls.geometric(float(parts[1]))
        except ValueError as exc:
            raise ValueError(f"bad delay model {text!r}: {exc}") from exc
        raise ValueError(f"bad delay model {text!r}")

    def sample(self, rng) -> float:
        if self.kind == "constant":
            return self.a
        if self.kind == "uniform":
            return float(rng.uniform(self.a, self.b))
        return float(rng.geometric(self.a) - 1)


def run_dave_pg(problem, config=None, workers=None,
                delay_model=DelayModel.constant(0.0), encoding="dense",
                x0=None):
    """Asynchronous proximal gradient over the problem's components.

    workers defaults to the number of components and must match it when
    given (the generators create the row partition). Requires a strongly
    convex aggregate oracle (mu > 0); the default stepsize is the upper end
    of the admissible range, gamma = 2/(mu + L).
    """
    config = config or SolverConfig()
    f, g = problem.smooth, problem.reg
    comps = f.components
    if not comps:
        raise ValueError("dave-pg needs an oracle with finite-sum components")
    m = len(comps)
    if workers is not None and workers != m:
        raise ValueError(
            f"workers={workers} but the oracle has {m} components; "
            "regenerate the problem with the desired partition"
        )
    mu = f.strong_convexity
    if mu <= 0:
        raise ValueError("dave-pg requires a strongly convex smooth term")
    if encoding not in ("dense", "sparse"):
        raise ValueError("encoding must be 'dense' or 'sparse'")
    top = 2.0 / (mu + f.lipschitz)
    gamma = _resolve_gamma(config, top, 0.0, top, True, "dave-pg")
    rng = np.random.default_rng(config.seed)

    x = _start_point(problem, x0)
    n = x.size

    def msg_cost(vec):
        return n if encoding == "dense" else int(np.count_nonzero(vec))

    # synchronous round zero: contributions at x0, x0 broadcast to everyone
    contrib = [x - gamma * comps[j].gradient(x) for j in range(m)]
    base = [x.copy() for _ in range(m)]
    comm = m * msg_cost(x)
    events = []
    seq = 0
    for j in range(m):
        heapq.heappush(events, (1.0 + delay_model.sample(rng), seq, j))
        seq += 1

    u_prev = np.mean(contrib, axis=0)
    tracer = _Tracer(problem, config, gamma)
    pattern = None
    converged = False
    quiet = 0  # consecutive batches with a small u-step
    deliveries = np.zeros(m, dtype=np.int64)
    for k in range(1, config.max_iter + 1):
        t, _, j = heapq.heappop(events)
        batch = [j]
        while events and events[0][0] == t:
            batch.append(heapq.heappop(events)[2])
        for j in batch:
            contrib[j] = base[j] - gamma * comps[j].gradient(base[j])
            deliveries[j] += 1
        u = np.mean(contrib, axis=0)
        res = g.prox(u, gamma)
        x, pattern = res.point, res.pattern
        for j in batch:
            base[j] = x
            comm += msg_cost(x)
            heapq.heappush(events, (t + 1.0 + delay_model.sample(rng), seq, j))
            seq += 1
        u_step = float(np.linalg.norm(u - u_prev))
        u_prev = u
        tracer.record(k, x, pattern, u, u_step, comm=comm, clock=t)
        # a single small arrival can be a coincidence (the first deliveries
        # repeat the round-zero contributions exactly): require one quiet
        # sweep over the workers, all of which must have re-reported since
        # receiving a post-round-zero iterate
        quiet = quiet + 1 if u_step <= config.stop_tol else 0
        if quiet >= m and int(deliveries.min()) >= 2:
            converged = True
            break
    return tracer.finish(x, pattern, converged)
