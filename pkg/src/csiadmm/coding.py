"""Gradient coding over the reals: repetition-scheme encoding matrices.

Row ``j`` of the K x K matrix ``B`` holds ECN ``j``'s coefficients over the K
partition gradients. A plan tolerating S stragglers lets the agent recover
the sum of all partition gradients from any ``K - S`` rows.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (CsiAdmmError, DecodabilityFailure, IndivisibleGroups,
                     InsufficientResponses, InvalidStragglerCount,
                     MissingPartitionGradient, SingularDecode)

SCHEMES = ("fractional", "cyclic")
EXHAUSTIVE_MAX_K = 12
SAMPLED_SUBSETS = 1000
MAX_CODING_TRIES = 100
DECODE_TOL = 1e-8
# guards the 1e-9 relative decode accuracy; well above this the solve loses digits
MAX_SUBSET_COND = 1e5


def assignment(K, S, scheme):
    """Partition ids held by each ECN (0-based), in ascending order."""
    _check_ks(K, S)
    if scheme == "fractional":
        if K % (S + 1):
            raise IndivisibleGroups(f"(S+1)={S + 1} must divide K={K} for fractional repetition")
        blocks = K // (S + 1)
        return tuple(tuple(range((j % blocks) * (S + 1), (j % blocks + 1) * (S + 1)))
                     for j in range(K))
    if scheme == "cyclic":
        return tuple(tuple(sorted((j + t) % K for t in range(S + 1))) for j in range(K))
    raise CsiAdmmError(f"unknown coding scheme {scheme!r}")


def _check_ks(K, S):
    if K < 1:
        raise CsiAdmmError("K must be >= 1")
    if not 0 <= S < K:
        raise InvalidStragglerCount(f"S={S} must satisfy 0 <= S < K={K}")


@dataclass(frozen=True)
class EncodingPlan:
    scheme: str
    K: int
    S: int
    B: np.ndarray

    @property
    def R(self):
        """Responses needed to decode."""
        return self.K - self.S

    @property
    def support(self):
        return tuple(tuple(np.flatnonzero(row).tolist()) for row in self.B)

    def to_dict(self):
        return {"scheme": self.scheme, "K": self.K, "S": self.S, "B": self.B.tolist()}


@dataclass(frozen=True)
class CodedGradient:
    ecn: int
    payload: np.ndarray


def preset_k3_s1():
    """Hand-built cyclic code for three ECNs and one straggler."""
    B = np.array([[0.5, 1.0, 0.0],
                  [0.0, 1.0, -1.0],
                  [0.5, 0.0, 1.0]])
    return EncodingPlan("cyclic", 3, 1, B)


def decoding_subsets(K, S, rng=None):
    """All (K-S)-subsets of ECNs, or a random sample of them when K is large."""
    R = K - S
    if K <= EXHAUSTIVE_MAX_K:
        yield from itertools.combinations(range(K), R)
        return
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(SAMPLED_SUBSETS):
        yield tuple(sorted(rng.choice(K, size=R, replace=False)))


def check_decodable(plan: EncodingPlan, rng=None):
    """True if the all-ones vector is in the row span of every (K-S)-subset of rows."""
    ones = np.ones(plan.K)
    for F in decoding_subsets(plan.K, plan.S, rng):
        rows = plan.B[list(F)]
        a, *_ = np.linalg.lstsq(rows.T, ones, rcond=None)
        if np.linalg.norm(rows.T @ a - ones) > DECODE_TOL:
            return False
        if plan.scheme == "cyclic" and np.linalg.cond(rows) > MAX_SUBSET_COND:
            return False
    return True


def _cyclic_matrix(K, S, rng):
    # Rows live in the null space of a random H with H @ 1 = 0, which has
    # dimension K - S and contains the all-ones vector; any K - S generic rows
    # then span it.
    H = rng.uniform(-1.0, 1.0, size=(S, K))
    H -= H.mean(axis=1, keepdims=True)
    B = np.zeros((K, K))
    for j in range(K):
        rest = [(j + t) % K for t in range(1, S + 1)]
        B[j, j] = 1.0
        B[j, rest] = np.linalg.solve(H[:, rest], -H[:, j])
    return B


def build_encoding_matrix(K: int, S: int, scheme: str = "cyclic", seed: int = 0) -> EncodingPlan:
    _check_ks(K, S)
    if scheme not in SCHEMES:
        raise CsiAdmmError(f"unknown coding scheme {scheme!r}")
    if scheme == "fractional" and K % (S + 1):
        raise IndivisibleGroups(f"(S+1)={S + 1} must divide K={K} for fractional repetition")
    if S == 0:
        return EncodingPlan(scheme, K, S, np.eye(K))

    if scheme == "fractional":
        B = np.zeros((K, K))
        for j, parts in enumerate(assignment(K, S, scheme)):
            B[j, list(parts)] = 1.0
        plan = EncodingPlan(scheme, K, S, B)
        if not check_decodable(plan):
            raise DecodabilityFailure("fractional repetition plan failed verification")
        return plan

    for attempt in range(MAX_CODING_TRIES):
        rng = np.random.default_rng((seed, attempt))
        try:
            B = _cyclic_matrix(K, S, rng)
        except np.linalg.LinAlgError:
            continue
        plan = EncodingPlan(scheme, K, S, B)
        if check_decodable(plan, np.random.default_rng((seed, attempt, 1))):
            return plan
    raise DecodabilityFailure(f"no decodable cyclic plan for K={K}, S={S} in {MAX_CODING_TRIES} tries")


def encode(plan: EncodingPlan, ecn: int, partition_gradients) -> CodedGradient:
    """Combine the partition gradients on ECN ``ecn``'s support with its row of B."""
    support = np.flatnonzero(plan.B[ecn])
    missing = [int(l) for l in support if l not in partition_gradients]
    if missing:
        raise MissingPartitionGradient(f"ECN {ecn} lacks partition gradients {missing}")
    payload = None
    for l in support:
        term = plan.B[ecn, l] * partition_gradients[l]
        payload = term if payload is None else payload + term
    if payload is None:
        raise CsiAdmmError(f"ECN {ecn} has an empty support")
    return CodedGradient(ecn, payload)


def decoding_weights(plan: EncodingPlan, ecns):
    """Weights ``a`` with ``a @ B[ecns] = 1``; ``ecns`` is in arrival order."""
    K, ecns = plan.K, list(ecns)
    if plan.S == 0:
        return np.ones(len(ecns))
    if plan.scheme == "fractional":
        a = np.zeros(len(ecns))
        covered = set()
        for pos, j in enumerate(ecns):
            block = tuple(np.flatnonzero(plan.B[j]))
            if block not in covered:
                covered.add(block)
                a[pos] = 1.0
        if sum(len(b) for b in covered) != K:
            raise SingularDecode("responding ECNs miss a replica group")
        return a
    rows = plan.B[ecns]
    a, *_ = np.linalg.lstsq(rows.T, np.ones(K), rcond=None)
    if np.linalg.norm(rows.T @ a - 1.0) > DECODE_TOL:
        raise SingularDecode(f"ECNs {ecns} cannot recover the gradient sum")
    return a


def decode(plan: EncodingPlan, responses, average: bool = True) -> np.ndarray:
    """Recover the partition-gradient sum from the first K-S responses.

    ``responses`` is a sequence of :class:`CodedGradient` in arrival order.
    Payloads are accumulated in ascending ECN id so the result does not
    depend on floating-point summation order. With ``average`` the sum is
    divided by K, giving the mini-batch mean gradient.
    """
    responses = list(responses)
    if len(responses) < plan.R:
        raise InsufficientResponses(f"{len(responses)} responses, need {plan.R}")
    first = responses[:plan.R]
    a = decoding_weights(plan, [r.ecn for r in first])
    total = None
    for pos in sorted(range(len(first)), key=lambda q: first[q].ecn):
        if a[pos] == 0.0:
            continue
        term = a[pos] * first[pos].payload
        total = term if total is None else total + term
    return total / plan.K if average else total
