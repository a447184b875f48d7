"""Datasets, agent shards, ECN allocation and batch rotation.

Partitions and ECNs are indexed from 0. Each partition is cut into contiguous
sub-batches of ``M_eff // K`` samples, and a batch id selects the same
sub-batch in every partition, so replicas of a partition on different ECNs
always see identical samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import coding
from .errors import (BatchTooLarge, CsiAdmmError, EmptyFile, IndivisibleBatch,
                     InvalidStragglerCount, MalformedLine, TooFewSamples)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (n, p)
    targets: np.ndarray  # (n, d)

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float)
        if targets.ndim == 1:
            targets = targets[:, None]
        if inputs.shape[0] != targets.shape[0]:
            raise CsiAdmmError(
                f"{inputs.shape[0]} inputs but {targets.shape[0]} targets")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def p(self):
        return self.inputs.shape[1]

    @property
    def d(self):
        return self.targets.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.inputs[idx], self.targets[idx])


def synthesize_least_squares(n_samples, sigma=0.0, seed=0, p=3, d=1):
    """Gaussian linear model ``t = x_o^T o + sigma * e``.

    Returns ``(dataset, x_o)`` with ``x_o`` of shape ``(p, d)``. The parameter,
    inputs and noise come from separate sub-streams, so changing ``sigma``
    leaves the inputs untouched.
    """
    if n_samples < 1:
        raise CsiAdmmError("n_samples must be >= 1")
    if sigma < 0:
        raise CsiAdmmError("sigma must be >= 0")
    param_rng, input_rng, noise_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    x_o = param_rng.standard_normal((p, d))
    inputs = input_rng.standard_normal((n_samples, p))
    noise = noise_rng.standard_normal((n_samples, d))
    targets = inputs @ x_o + sigma * noise
    return Dataset(inputs, targets), x_o


def train_test_split(ds: Dataset, n_test: int):
    """Last ``n_test`` samples become the test set."""
    if not 0 <= n_test < len(ds):
        raise CsiAdmmError(f"cannot hold out {n_test} of {len(ds)} samples")
    cut = len(ds) - n_test
    return ds.subset(np.arange(cut)), ds.subset(np.arange(cut, len(ds)))


def parse_libsvm(path, n_features=None, classes=None, regression=False) -> Dataset:
    """Read a LIBSVM text file into a dense :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
    n_features : int, optional
        Declared input dimension; defaults to the largest index seen.
    classes : sequence of float, optional
        Label set used for one-hot encoding (sorted ascending). Pass the
        training label set when reading a test file so columns line up.
        Defaults to the labels present in the file.
    regression : bool
        Keep labels as scalar targets instead of one-hot encoding.

    With more than one class, targets are one-hot rows in sorted label order;
    a single-class file gives scalar targets.
    """
    labels, rows = [], []
    max_index = 0
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                label = float(tokens[0])
            except ValueError:
                raise MalformedLine(lineno, f"bad label {tokens[0]!r}") from None
            feats = {}
            last = 0
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    i, v = int(idx), float(val)
                except ValueError:
                    raise MalformedLine(lineno, f"bad feature {tok!r}") from None
                if not sep or i <= last:
                    raise MalformedLine(lineno, f"indices must be 1-based ascending at {tok!r}")
                feats[i] = v
                last = i
            max_index = max(max_index, last)
            labels.append(label)
            rows.append(feats)
    if not rows:
        raise EmptyFile(f"{path} holds no samples")

    p = max_index if n_features is None else n_features
    if max_index > p:
        raise CsiAdmmError(f"feature index {max_index} exceeds declared dimension {p}")
    inputs = np.zeros((len(rows), p))
    for r, feats in enumerate(rows):
        for i, v in feats.items():
            inputs[r, i - 1] = v

    labels = np.asarray(labels)
    if regression:
        return Dataset(inputs, labels[:, None])
    label_set = np.unique(labels) if classes is None else np.sort(np.asarray(classes, dtype=float))
    if len(label_set) == 1:
        return Dataset(inputs, labels[:, None])
    col = np.searchsorted(label_set, labels)
    if np.any(col >= len(label_set)) or np.any(label_set[np.minimum(col, len(label_set) - 1)] != labels):
        raise CsiAdmmError("file holds labels outside the given class set")
    targets = np.zeros((len(rows), len(label_set)))
    targets[np.arange(len(rows)), col] = 1.0
    return Dataset(inputs, targets)


def split_across_agents(ds: Dataset, n_agents: int, seed: int):
    """Shuffle once, then cut into contiguous shards; remainder goes to the lowest ids."""
    if n_agents < 1:
        raise CsiAdmmError("n_agents must be >= 1")
    if len(ds) < n_agents:
        raise TooFewSamples(f"{len(ds)} samples cannot feed {n_agents} agents")
    perm = np.random.default_rng(seed).permutation(len(ds))
    return [ds.subset(idx) for idx in np.array_split(perm, n_agents)]


@dataclass(frozen=True)
class AgentShard:
    agent: int
    data: Dataset
    partitions: tuple  # K index arrays into data
    ecn_partitions: tuple  # per ECN, the partition ids it holds
    coded: bool
    S: int

    @property
    def K(self):
        return len(self.partitions)

    def ecn_size(self, j):
        return sum(len(self.partitions[l]) for l in self.ecn_partitions[j])


def allocate(shard: Dataset, K: int, S: int = 0, coded: bool = False,
             scheme: str = "cyclic", agent: int = 1) -> AgentShard:
    """Split a shard into K disjoint partitions and assign them to ECNs.

    Uncoded: ECN j holds partition j. Coded: ECN j holds the S+1 partitions of
    row j's support under the chosen repetition scheme.
    """
    if K < 1:
        raise CsiAdmmError("K must be >= 1")
    if not 0 <= S < K:
        raise InvalidStragglerCount(f"S={S} must satisfy 0 <= S < K={K}")
    if len(shard) < K:
        raise TooFewSamples(f"{len(shard)} samples cannot fill {K} partitions")
    if not coded and S:
        raise InvalidStragglerCount("uncoded allocation tolerates no stragglers; use S=0")
    partitions = tuple(np.array_split(np.arange(len(shard)), K))
    if coded:
        ecn_partitions = coding.assignment(K, S, scheme)
    else:
        ecn_partitions = tuple((j,) for j in range(K))
    return AgentShard(agent, shard, partitions, ecn_partitions, coded, S)


def batch_count(ecn_size, K, M_eff, S=0):
    """Batches available to one ECN: ``floor(|xi| * K / ((S+1) * M_eff))``."""
    return (ecn_size * K) // ((S + 1) * M_eff)


@dataclass(frozen=True)
class BatchIndex:
    m: int
    batch_ids: tuple  # per ECN
    sub_batches: tuple  # per partition, index array into the shard data


def select_batch(m: int, shard: AgentShard, M_eff: int, coded: bool | None = None) -> BatchIndex:
    """Batch for cycle ``m``: ``I = m mod floor(|xi_j| K / ((S+1) M_eff))``.

    ``M_eff`` is M for uncoded shards and M-bar for coded ones. ECNs with
    uneven data would disagree on the modulus; the smallest count is used for
    all of them so replicas stay aligned (equal to the formula whenever the
    shard splits evenly).
    """
    coded = shard.coded if coded is None else coded
    K = shard.K
    S = shard.S if coded else 0
    if M_eff < 1 or M_eff % K:
        raise IndivisibleBatch(f"batch size {M_eff} must be a positive multiple of K={K}")
    sub = M_eff // K
    counts = [batch_count(shard.ecn_size(j), K, M_eff, S) for j in range(K)]
    n_batches = min(counts)
    if n_batches < 1:
        raise BatchTooLarge(f"batch size {M_eff} exceeds what the shard of {len(shard.data)} holds")
    assert all(len(part) >= n_batches * sub for part in shard.partitions)
    I = m % n_batches
    subs = tuple(part[I * sub:(I + 1) * sub] for part in shard.partitions)
    return BatchIndex(m, (I,) * K, subs)
