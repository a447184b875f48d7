"""Stochastic incremental ADMM, its coded variant, and gossip baselines.

A single token ``z`` walks a fixed cycle over the agents. At each hop the
holder (unless it is only relaying) asks its K ECNs for mini-batch gradients,
takes a linearised proximal x-step, a damped dual step, and folds the change
into ``z`` before forwarding it. The uncoded algorithm is the coded one run
with the identity code, which is why both share :func:`iterate`.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import coding, simkernel
from ._rng import streams
from .data import AgentShard, select_batch
from .errors import BadMixingMatrix, CsiAdmmError, EmptyBatch, IndivisibleBatch
from .metrics import Reference, relative_accuracy, test_error

log = logging.getLogger(__name__)

CSV_COLUMNS = ("iteration", "cycle", "active_agent", "accuracy", "test_error",
               "comm_units", "sim_time_s")


@dataclass(frozen=True)
class HyperParams:
    rho: float
    c_tau: float
    c_gamma: float
    M: int
    M_bar: int | None = None
    mu_estimate: float | None = None
    iterations: int = 1000

    def __post_init__(self):
        if self.rho <= 0:
            raise CsiAdmmError("rho must be > 0")
        if self.c_tau <= 0 or self.c_gamma <= 0:
            raise CsiAdmmError("schedule constants must be > 0")
        if self.M < 1:
            raise CsiAdmmError("batch size M must be >= 1")
        if self.iterations < 0:
            raise CsiAdmmError("iterations must be >= 0")


@dataclass
class ConsensusState:
    x: np.ndarray  # (N, p, d)
    y: np.ndarray  # (N, p, d)
    z: np.ndarray  # (p, d)
    k: int = 0  # hops taken
    updates: int = 0  # hops that updated an agent
    m: int = 0
    active: int = 0  # agent id at the last hop, 1-based
    last_gradient: np.ndarray | None = None

    @classmethod
    def zeros(cls, N, p, d):
        return cls(np.zeros((N, p, d)), np.zeros((N, p, d)), np.zeros((p, d)))

    def z_identity_gap(self, rho):
        """``||z - mean_i(x_i - y_i / rho)||``; zero in exact arithmetic."""
        return float(np.linalg.norm(self.z - np.mean(self.x - self.y / rho, axis=0)))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cycle: int
    active_agent: int
    accuracy: float
    test_error: float
    comm_units: int
    sim_time_s: float


@dataclass
class Trace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path):
        write_csv(path, [[getattr(r, c) for c in CSV_COLUMNS] for r in self.records])


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# --- local computations -----------------------------------------------------

def local_gradient(x, batch, ds):
    """Mean least-squares gradient ``(1/|B|) sum_j o_j (x^T o_j - t_j)^T`` over ``batch``."""
    batch = np.asarray(batch, dtype=np.intp)
    if batch.size == 0:
        raise EmptyBatch("gradient batch is empty")
    O = ds.inputs[batch]
    return O.T @ (O @ x - ds.targets[batch]) / batch.size


def batch_loss(x, batch, ds):
    batch = np.asarray(batch, dtype=np.intp)
    r = ds.inputs[batch] @ x - ds.targets[batch]
    return float(np.sum(r * r) / (2 * batch.size))


def x_update(x, y, z, G, rho, tau):
    """Closed-form minimiser of the linearised proximal augmented Lagrangian."""
    if rho + tau <= 0:
        raise CsiAdmmError("rho + tau must be > 0")
    return (rho * z + tau * x + y - G) / (rho + tau)


def x_objective(x_new, x, y, z, G, rho, tau):
    """Objective minimised by :func:`x_update`, evaluated at ``x_new``."""
    return (np.sum(G * (x_new - x)) + np.sum(y * (z - x_new))
            + rho / 2 * np.sum((z - x_new) ** 2) + tau / 2 * np.sum((x_new - x) ** 2))


def y_update(y, z, x_new, rho, gamma):
    return y + rho * gamma * (z - x_new)


def z_update(z, dx, dy, N, rho):
    if N < 1 or rho <= 0:
        raise CsiAdmmError("need N >= 1 and rho > 0")
    return z + (dx - dy / rho) / N


def schedules(k, c_tau, c_gamma):
    """``(c_tau * sqrt(k), c_gamma / sqrt(k))`` for update count ``k >= 1``."""
    if k < 1:
        raise CsiAdmmError("schedules start at k = 1")
    r = np.sqrt(k)
    return c_tau * r, c_gamma / r


def effective_batch(M, S):
    """Distinct samples per coded iteration, ``M / (S + 1)``."""
    if S < 0:
        raise CsiAdmmError("S must be >= 0")
    if M % (S + 1):
        raise IndivisibleBatch(f"M={M} is not divisible by S+1={S + 1}")
    return M // (S + 1)


def estimate_mu(shards):
    """Smallest eigenvalue over agents of the empirical covariance ``(1/b) O^T O``."""
    mus = []
    for s in shards:
        ds = s.data if isinstance(s, AgentShard) else s
        mus.append(np.linalg.eigvalsh(ds.inputs.T @ ds.inputs / len(ds))[0])
    mu = float(min(mus))
    if mu <= 1e-12:
        log.warning("local losses are not strongly convex (mu=%g); step constraints unverifiable", mu)
    return mu


def validate_params(hp: HyperParams, N: int):
    """Return the violated convergence constraints (empty list when all hold).

    Checked: ``mu > 3 rho``, ``c_tau > 2 / ((N+1) N)`` and
    ``1/(mu - 3 rho) < c_gamma < 1/rho``.
    """
    out = []
    mu, rho = hp.mu_estimate, hp.rho
    if mu is None:
        out.append("mu_estimate unknown: strong-convexity constraints unverifiable")
    elif not mu > 3 * rho:
        out.append(f"mu > 3*rho fails: mu={mu:g}, 3*rho={3 * rho:g}")
    bound = 2 / ((N + 1) * N)
    if not hp.c_tau > bound:
        out.append(f"c_tau > 2/((N+1)N) fails: c_tau={hp.c_tau:g}, bound={bound:g}")
    if not hp.c_gamma < 1 / rho:
        out.append(f"c_gamma < 1/rho fails: c_gamma={hp.c_gamma:g}, 1/rho={1 / rho:g}")
    if mu is not None and mu > 3 * rho and not hp.c_gamma > 1 / (mu - 3 * rho):
        out.append(f"c_gamma > 1/(mu-3rho) fails: c_gamma={hp.c_gamma:g}, "
                   f"bound={1 / (mu - 3 * rho):g}")
    return out


# --- incremental loop ---------------------------------------------------------

def identity_plan(K):
    return coding.EncodingPlan("uncoded", K, 0, np.eye(K))


def iterate(cycle, shards, hp: HyperParams, plan=None, sim=None, seed=0,
            reference: Reference | None = None, test=None, graph=None):
    """Run the token loop, yielding ``(record, state)`` after every hop.

    ``shards[i-1]`` is agent ``i``'s allocation. Without ``plan`` the uncoded
    algorithm runs (identity code, wait for all K ECNs, batch M); with a plan
    the agent waits for the ``K - S`` fastest ECNs and uses batch M-bar. The
    state object is updated in place and shared across yields.
    """
    if graph is not None:
        cycle.validate(graph)
    N = len(shards)
    K = shards[0].K
    if plan is None:
        plan = identity_plan(K)
        M_eff = hp.M
    else:
        M_eff = hp.M_bar if hp.M_bar is not None else effective_batch(hp.M, plan.S)
        if plan.K != K:
            raise CsiAdmmError(f"plan has K={plan.K} but shards have K={K}")
        if any(s.ecn_partitions != plan.support for s in shards if plan.S):
            raise CsiAdmmError("shard allocation does not match the encoding plan")
    sim = simkernel.LatencyModel() if sim is None else sim
    rngs = streams(seed)
    stragglers = (sim.fixed_stragglers(N, K, rngs["stragglers"])
                  if sim.policy == "fixed" else {i: None for i in range(1, N + 1)})
    compute_rng, comm_rng = rngs["compute"], rngs["comm"]

    p, d = shards[0].data.p, shards[0].data.d
    state = ConsensusState.zeros(N, p, d)
    x1 = state.x.copy()
    ledger = simkernel.TimingLedger()
    L = len(cycle)

    def evaluate():
        acc = relative_accuracy(state.x, x1, reference) if reference is not None else float("nan")
        err = test_error(state.z, test) if test is not None else float("nan")
        return acc, err

    for k in range(1, hp.iterations + 1):
        pos = (k - 1) % L
        agent = cycle.order[pos]
        m = (k - 1) // L
        elapsed = 0.0
        if cycle.active[pos]:
            state.updates += 1
            tau, gamma = schedules(state.updates, hp.c_tau, hp.c_gamma)
            i = agent - 1
            shard = shards[i]
            batch = select_batch(m, shard, M_eff)
            xi = state.x[i]
            part_grads = {l: local_gradient(xi, sub, shard.data)
                          for l, sub in enumerate(batch.sub_batches)}
            times = simkernel.sample_ecn_times(sim, K, compute_rng, stragglers[agent])
            responses = [coding.encode(plan, j, part_grads)
                         for j in simkernel.arrival_order(times)]
            G = coding.decode(plan, responses)
            elapsed += simkernel.iteration_response_time(times, plan.R)

            x_new = x_update(xi, state.y[i], state.z, G, hp.rho, tau)
            y_new = y_update(state.y[i], state.z, x_new, hp.rho, gamma)
            state.z = z_update(state.z, x_new - xi, y_new - state.y[i], N, hp.rho)
            state.x[i] = x_new
            state.y[i] = y_new
            state.last_gradient = G
        elapsed += simkernel.sample_link_time(comm_rng, sim)
        ledger.charge(1, elapsed)
        state.k, state.m, state.active = k, m, agent
        acc, err = evaluate()
        yield IterationRecord(k, m, agent, acc, err, ledger.comm_units, ledger.sim_time), state


def run_si_admm(graph, cycle, shards, hp, sim=None, seed=0, reference=None, test=None) -> Trace:
    """Uncoded stochastic incremental ADMM; ``shards`` must be uncoded allocations."""
    if any(s.coded for s in shards):
        raise CsiAdmmError("uncoded run needs uncoded shards")
    return Trace([rec for rec, _ in iterate(cycle, shards, hp, None, sim, seed,
                                            reference, test, graph)])


def run_csi_admm(graph, cycle, shards, hp, plan, sim=None, seed=0, reference=None,
                 test=None) -> Trace:
    """Coded variant: decode from the ``K - S`` fastest ECNs each iteration."""
    return Trace([rec for rec, _ in iterate(cycle, shards, hp, plan, sim, seed,
                                            reference, test, graph)])


# --- gossip baselines -----------------------------------------------------------

def metropolis_weights(graph):
    """Metropolis-Hastings mixing matrix, ``W_ij = 1 / (1 + max(deg_i, deg_j))`` on edges."""
    n = graph.n
    deg = {v: len(nb) for v, nb in graph.adjacency.items()}
    W = np.zeros((n, n))
    for u, v in graph.edges:
        w = 1.0 / (1 + max(deg[u], deg[v]))
        W[u - 1, v - 1] = W[v - 1, u - 1] = w
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return W


def check_mixing(W, graph=None, tol=1e-12):
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise BadMixingMatrix("mixing matrix must be square")
    if (np.abs(W.sum(axis=0) - 1).max() > tol or np.abs(W.sum(axis=1) - 1).max() > tol):
        raise BadMixingMatrix("mixing matrix is not doubly stochastic")
    if graph is not None:
        if graph.n != n:
            raise BadMixingMatrix("mixing matrix size differs from agent count")
        for a in range(n):
            for b in range(n):
                if a != b and W[a, b] != 0 and not graph.has_edge(a + 1, b + 1):
                    raise BadMixingMatrix(f"weight on non-edge ({a + 1}, {b + 1})")
    return W


def _mix(W, X):
    return np.einsum("ij,jpd->ipd", W, X)


def dgd_step(states, graph, W, alpha, gradients):
    """``x_i <- sum_j W_ij x_j - alpha * grad_i``; ``states`` is (N, p, d)."""
    W = check_mixing(W, graph)
    return _mix(W, states) - alpha * gradients


def extra_step(states, W, W_tilde, alpha, gradients, prev=None):
    """One EXTRA step.

    ``prev`` is ``(x_prev, grad_prev)`` from the step before, or None on the
    first step, which is plain DGD.
    """
    W = check_mixing(W)
    if prev is None:
        return _mix(W, states) - alpha * gradients
    x_prev, g_prev = prev
    W_tilde = check_mixing(W_tilde)
    return (states + _mix(W, states) - _mix(W_tilde, x_prev)
            - alpha * (gradients - g_prev))


def _full_gradients(X, normal):
    return np.stack([A @ x - c for x, (A, c) in zip(X, normal)])


def _run_gossip(kind, graph, shards, alpha, iterations, sim=None, seed=0,
                reference=None, test=None, K=1):
    datasets = [s.data if isinstance(s, AgentShard) else s for s in shards]
    N = len(datasets)
    normal = [(ds.inputs.T @ ds.inputs / len(ds), ds.inputs.T @ ds.targets / len(ds))
              for ds in datasets]
    W = check_mixing(metropolis_weights(graph), graph)
    W_tilde = (np.eye(N) + W) / 2
    sim = simkernel.LatencyModel() if sim is None else sim
    rngs = streams(seed)
    stragglers = (sim.fixed_stragglers(N, K, rngs["stragglers"])
                  if sim.policy == "fixed" else {i: None for i in range(1, N + 1)})
    p, d = datasets[0].p, datasets[0].d
    X = np.zeros((N, p, d))
    x1 = X.copy()
    prev = None
    units = 2 * graph.n_edges
    ledger = simkernel.TimingLedger()
    trace = Trace()
    for k in range(1, iterations + 1):
        grads = _full_gradients(X, normal)
        if kind == "dgd":
            X_new = _mix(W, X) - alpha * grads
        else:
            X_new = extra_step(X, W, W_tilde, alpha, grads, prev)
            prev = (X, grads)
        X = X_new
        # agents compute in parallel, then all unicasts happen in parallel
        compute = max(simkernel.iteration_response_time(
            simkernel.sample_ecn_times(sim, K, rngs["compute"], stragglers[i]))
            for i in range(1, N + 1))
        link = max(simkernel.sample_link_time(rngs["comm"], sim) for _ in range(units))
        ledger.charge(units, compute + link)
        acc = relative_accuracy(X, x1, reference) if reference is not None else float("nan")
        err = test_error(X.mean(axis=0), test) if test is not None else float("nan")
        trace.records.append(IterationRecord(k, k - 1, 0, acc, err,
                                             ledger.comm_units, ledger.sim_time))
    return trace


def run_dgd(graph, shards, alpha, iterations, sim=None, seed=0, reference=None, test=None, K=1):
    """Decentralised gradient descent with Metropolis weights and full local gradients."""
    return _run_gossip("dgd", graph, shards, alpha, iterations, sim, seed, reference, test, K)


def run_extra(graph, shards, alpha, iterations, sim=None, seed=0, reference=None, test=None, K=1):
    return _run_gossip("extra", graph, shards, alpha, iterations, sim, seed, reference, test, K)


__all__ = [
    "CSV_COLUMNS", "ConsensusState", "HyperParams", "IterationRecord", "Trace",
    "batch_loss", "check_mixing", "dgd_step", "effective_batch", "estimate_mu",
    "extra_step", "identity_plan", "iterate", "local_gradient", "metropolis_weights",
    "run_csi_admm", "run_dgd", "run_extra", "run_si_admm", "schedules",
    "validate_params", "write_csv", "x_objective", "x_update", "y_update", "z_update",
]
