"""Config-driven runs: wire a graph, data, code and latency model together.

A run config is flat ``key = value`` text (``#`` starts a comment); see
``CONFIG_KEYS`` for the accepted keys. Each run writes one CSV trace per seed,
an averaged CSV when ``repeats > 1``, and a JSON manifest that can be fed back
to :func:`parse_config` to reproduce the traces exactly.
"""

from __future__ import annotations

import configparser
import dataclasses
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import admm, coding, data, metrics, simkernel, topology
from ._rng import stream_seeds
from .errors import ConfigError, MissingRequired, TypeMismatch, UnknownKey

ALGORITHMS = ("si-admm", "csi-admm", "dgd", "extra")
DATASETS = ("synthetic", "libsvm")
CYCLES = ("hamiltonian", "shortest-path")


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    n_agents: int
    dataset: str
    # data
    n_samples: int = 50400
    n_test: int = 5040
    sigma: float = 0.0
    data_path: str = ""
    test_path: str = ""
    n_features: int = 0
    # network
    eta: float = 0.5
    cycle: str = "hamiltonian"
    # edge computing and coding
    K: int = 2
    S: int = 0
    scheme: str = "cyclic"
    M: int = 40
    # optimiser
    rho: float = 0.2
    c_tau: float = 0.5
    c_gamma: float = 4.5
    alpha: float = 0.5
    ridge: float = 0.0
    iterations: int = 1000
    # latency
    epsilon: float = 0.0
    n_stragglers: int = 0
    straggler_policy: str = "fixed"
    straggler_delay: float = math.inf
    compute_mean: float = 1e-3
    compute_jitter: float = 5e-4
    # bookkeeping
    seed: int = 0
    repeats: int = 1
    output: str = "runs"

    @property
    def coded(self):
        return self.algorithm == "csi-admm"

    @property
    def batch(self):
        """Per-iteration distinct-sample batch: M, or M/(S+1) when coded."""
        return self.M // (self.S + 1) if self.coded else self.M

    def validate(self):
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(key, msg)

        need(self.algorithm in ALGORITHMS, "algorithm", f"must be one of {ALGORITHMS}")
        need(self.dataset in DATASETS, "dataset", f"must be one of {DATASETS}")
        need(self.cycle in CYCLES, "cycle", f"must be one of {CYCLES}")
        need(self.scheme in coding.SCHEMES, "scheme", f"must be one of {coding.SCHEMES}")
        need(self.n_agents >= 2, "n_agents", "need at least 2 agents")
        need(0 < self.eta <= 1, "eta", "must lie in (0, 1]")
        if self.cycle == "hamiltonian" and self.n_agents > 2:
            # a Hamiltonian cycle needs at least n edges
            need(topology.target_edge_count(self.n_agents, self.eta) >= self.n_agents, "eta",
                 "too few edges for a Hamiltonian cycle; raise eta or use shortest-path")
        need(self.K >= 1, "K", "must be >= 1")
        need(self.S >= 0, "S", "must be >= 0")
        need(self.S < self.K, "S", "S must be < K")
        if self.coded and self.scheme == "fractional":
            need(self.K % (self.S + 1) == 0, "S", "(S+1) must divide K")
        if self.coded:
            need(self.M % (self.S + 1) == 0, "M", "(S+1) must divide M")
        need(self.batch >= 1 and self.batch % self.K == 0, "M",
             f"K must divide the effective batch size {self.batch}")
        need(self.rho > 0, "rho", "must be > 0")
        need(self.c_tau > 0, "c_tau", "must be > 0")
        need(self.c_gamma > 0, "c_gamma", "must be > 0")
        need(self.iterations >= 0, "iterations", "must be >= 0")
        need(self.repeats >= 1, "repeats", "must be >= 1")
        need(self.epsilon >= 0, "epsilon", "must be >= 0")
        need(0 <= self.n_stragglers <= self.K, "n_stragglers", "must lie in [0, K]")
        need(self.straggler_policy in ("fixed", "random"), "straggler_policy",
             "must be 'fixed' or 'random'")
        if self.dataset == "libsvm":
            need(bool(self.data_path), "data_path", "required for libsvm datasets")
        else:
            need(self.n_samples >= self.n_agents, "n_samples", "fewer samples than agents")
            need(0 <= self.n_test, "n_test", "must be >= 0")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes).validate()


CONFIG_KEYS = {f.name: f for f in dataclasses.fields(RunConfig)}
REQUIRED_KEYS = ("algorithm", "n_agents", "dataset")
_TYPES = {"int": int, "float": float, "str": str}


def _convert(key, raw):
    kind = _TYPES[CONFIG_KEYS[key].type]
    if isinstance(raw, str):
        raw = raw.strip()
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
            raw = raw[1:-1]
    try:
        if kind is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(raw) if not isinstance(raw, str) else int(raw, 10)
        if kind is float:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise TypeMismatch(key, f"expected {kind.__name__}, got {raw!r}") from None


def config_from_mapping(values) -> RunConfig:
    unknown = [k for k in values if k not in CONFIG_KEYS]
    if unknown:
        raise UnknownKey(unknown[0])
    for key in REQUIRED_KEYS:
        if key not in values:
            raise MissingRequired(key)
    return RunConfig(**{k: _convert(k, v) for k, v in values.items()}).validate()


def parse_config(path) -> RunConfig:
    """Load a ``key = value`` config file, or the config inside a run manifest (``.json``)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return config_from_mapping(json.loads(text)["config"])
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    # keys before any section header land in an implicit top-level section
    text = "[__top__]\n" + text
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None
    values = {}
    for section in parser.sections():
        values.update(parser.items(section))
    return config_from_mapping(values)


def config_to_dict(cfg: RunConfig):
    return {k: (str(v) if isinstance(v, float) and not math.isfinite(v) else v)
            for k, v in dataclasses.asdict(cfg).items()}


@dataclass
class Setup:
    """Everything a single seeded run needs, built from a :class:`RunConfig`."""

    cfg: RunConfig
    seed: int
    graph: topology.Graph
    cycle: topology.Cycle
    train: data.Dataset
    test: data.Dataset | None
    parts: list
    shards: list
    plan: coding.EncodingPlan | None
    hp: admm.HyperParams
    sim: simkernel.LatencyModel
    reference: metrics.Reference

    def run(self) -> admm.Trace:
        c = self.cfg
        if c.algorithm == "si-admm":
            return admm.run_si_admm(self.graph, self.cycle, self.shards, self.hp, self.sim,
                                    self.seed, self.reference, self.test)
        if c.algorithm == "csi-admm":
            return admm.run_csi_admm(self.graph, self.cycle, self.shards, self.hp, self.plan,
                                     self.sim, self.seed, self.reference, self.test)
        run = admm.run_dgd if c.algorithm == "dgd" else admm.run_extra
        return run(self.graph, self.parts, c.alpha, c.iterations, self.sim, self.seed,
                   self.reference, self.test, K=c.K)

    def violations(self):
        return admm.validate_params(self.hp, self.cfg.n_agents)


def _load_data(cfg, data_seed):
    if cfg.dataset == "synthetic":
        ds, _ = data.synthesize_least_squares(cfg.n_samples + cfg.n_test, cfg.sigma, data_seed)
        train, test = data.train_test_split(ds, cfg.n_test)
        return train, (test if cfg.n_test else None)
    n_features = cfg.n_features or None
    train = data.parse_libsvm(cfg.data_path, n_features)
    classes = None
    if train.d > 1:
        raw = data.parse_libsvm(cfg.data_path, n_features, regression=True).targets[:, 0]
        classes = np.unique(raw)
    test = None
    if cfg.test_path:
        test = data.parse_libsvm(cfg.test_path, n_features or train.p, classes=classes)
    return train, test


def build_setup(cfg: RunConfig, seed: int | None = None) -> Setup:
    seed = cfg.seed if seed is None else seed
    seeds = stream_seeds(seed)
    train, test = _load_data(cfg, seeds["data"])
    accept = topology.has_hamiltonian_cycle if cfg.cycle == "hamiltonian" else None
    graph = topology.generate_graph(cfg.n_agents, cfg.eta, seeds["graph"], accept=accept)
    cycle = topology.make_cycle(graph, cfg.cycle, seeds["cycle"])
    parts = data.split_across_agents(train, cfg.n_agents, seeds["shuffle"])
    plan = (coding.build_encoding_matrix(cfg.K, cfg.S, cfg.scheme, seeds["coding"])
            if cfg.coded else None)
    shards = [data.allocate(p, cfg.K, cfg.S if cfg.coded else 0, cfg.coded, cfg.scheme,
                            agent=i + 1) for i, p in enumerate(parts)]
    hp = admm.HyperParams(cfg.rho, cfg.c_tau, cfg.c_gamma, cfg.M,
                          M_bar=cfg.batch if cfg.coded else None,
                          mu_estimate=admm.estimate_mu(parts), iterations=cfg.iterations)
    sim = simkernel.LatencyModel(cfg.compute_mean, cfg.compute_jitter, cfg.n_stragglers,
                                 cfg.straggler_policy, cfg.epsilon, cfg.straggler_delay)
    reference = metrics.solve_reference(parts, cfg.ridge)
    return Setup(cfg, seed, graph, cycle, train, test, parts, shards, plan, hp, sim, reference)


def _mean_rows(traces):
    cols = [np.stack([t.column(c) for t in traces]) for c in admm.CSV_COLUMNS]
    first = traces[0]
    rows = []
    for r in range(len(first)):
        rows.append([first[r].iteration, first[r].cycle, first[r].active_agent]
                    + [float(col[:, r].mean()) for col in cols[3:]])
    return rows


def run_experiment(cfg: RunConfig, output=None):
    """Run ``cfg.repeats`` seeds and write traces plus ``manifest.json``.

    Returns the list of written paths.
    """
    cfg.validate()
    out = Path(cfg.output if output is None else output)
    out.mkdir(parents=True, exist_ok=True)
    written, traces, runs = [], [], []
    for r in range(cfg.repeats):
        seed = cfg.seed + r
        setup = build_setup(cfg, seed)
        trace = setup.run()
        path = out / f"trace_seed{seed}.csv"
        trace.to_csv(path)
        written.append(path)
        traces.append(trace)
        runs.append({
            "seed": seed,
            "trace": path.name,
            "graph_edges": [list(e) for e in setup.graph.edge_list()],
            "cycle": {"kind": setup.cycle.kind, "order": list(setup.cycle.order),
                      "active": list(setup.cycle.active)},
            "encoding_plan": setup.plan.to_dict() if setup.plan is not None else None,
            "mu_estimate": setup.hp.mu_estimate,
            "validate_params": setup.violations(),
        })
    if cfg.repeats > 1:
        path = out / "trace_mean.csv"
        admm.write_csv(path, _mean_rows(traces) if cfg.iterations else [])
        written.append(path)
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"config": config_to_dict(cfg), "runs": runs}, indent=2) + "\n",
                        encoding="utf-8")
    written.append(manifest)
    return written


def parse_vary(text):
    """``"key=v1,v2"`` -> ``("key", ["v1", "v2"])``."""
    key, sep, values = text.partition("=")
    key = key.strip()
    if not sep or not values:
        raise ConfigError(key or "<vary>", "expected key=v1,v2,...")
    if key not in CONFIG_KEYS:
        raise UnknownKey(key)
    return key, [v.strip() for v in values.split(",")]


def sweep(cfg: RunConfig, vary, output=None):
    """Cartesian sweep over ``vary`` (list of ``(key, values)``); one sub-directory per point."""
    base = Path(cfg.output if output is None else output)
    results = {}
    keys = [k for k, _ in vary]
    for combo in itertools.product(*(vals for _, vals in vary)):
        changes = {k: _convert(k, v) for k, v in zip(keys, combo)}
        point = cfg.replace(**changes)
        name = "_".join(f"{k}={v}" for k, v in zip(keys, combo))
        results[name] = run_experiment(point, base / name)
    return results
