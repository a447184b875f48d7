import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csiadmm.coding import (CodedGradient, assignment, build_encoding_matrix, check_decodable,
                            decode, decoding_weights, encode, preset_k3_s1)
from csiadmm.errors import (IndivisibleGroups, InsufficientResponses, InvalidStragglerCount,
                            MissingPartitionGradient, SingularDecode)

ADMISSIBLE = [(K, S, scheme) for K in range(2, 9) for S in range(K)
              for scheme in ("fractional", "cyclic")
              if scheme == "cyclic" or K % (S + 1) == 0]


def grads(K, rng, shape=(3, 2)):
    return {l: rng.standard_normal(shape) for l in range(K)}


@pytest.mark.parametrize("scheme", ["fractional", "cyclic"])
def test_no_redundancy_is_identity(scheme):
    np.testing.assert_array_equal(build_encoding_matrix(3, 0, scheme).B, np.eye(3))


def test_preset_rows():
    plan = preset_k3_s1()
    np.testing.assert_array_equal(plan.B, [[0.5, 1, 0], [0, 1, -1], [0.5, 0, 1]])
    assert [set(s) for s in plan.support] == [{0, 1}, {1, 2}, {0, 2}]
    assert check_decodable(plan)


def test_fractional_k4_s1_layout():
    plan = build_encoding_matrix(4, 1, "fractional")
    np.testing.assert_array_equal(plan.B, [[1, 1, 0, 0], [0, 0, 1, 1],
                                           [1, 1, 0, 0], [0, 0, 1, 1]])


@pytest.mark.parametrize("K,S,scheme", ADMISSIBLE)
def test_plan_structure(K, S, scheme):
    plan = build_encoding_matrix(K, S, scheme, seed=K * 10 + S)
    support = plan.support
    assert all(len(s) == S + 1 for s in support)
    assert [tuple(sorted(s)) for s in support] == [tuple(p) for p in assignment(K, S, scheme)]
    if scheme == "cyclic":
        for j, s in enumerate(support):
            assert set(s) == {(j + t) % K for t in range(S + 1)}
    else:
        groups = K // (S + 1)
        for j in range(K):
            np.testing.assert_array_equal(plan.B[j], plan.B[j % groups])
        np.testing.assert_array_equal(plan.B[:groups].sum(axis=0), np.ones(K))
    # decodability oracle: rank test instead of the least-squares residual used inside
    for F in itertools.combinations(range(K), K - S):
        rows = plan.B[list(F)]
        aug = np.vstack([rows, np.ones(K)])
        assert np.linalg.matrix_rank(aug) == np.linalg.matrix_rank(rows)


def test_fractional_needs_divisibility():
    with pytest.raises(IndivisibleGroups):
        build_encoding_matrix(5, 1, "fractional")


def test_straggler_count_bounds():
    with pytest.raises(InvalidStragglerCount):
        build_encoding_matrix(3, 3, "cyclic")


def test_cyclic_construction_is_seeded():
    a = build_encoding_matrix(6, 2, "cyclic", seed=4)
    b = build_encoding_matrix(6, 2, "cyclic", seed=4)
    c = build_encoding_matrix(6, 2, "cyclic", seed=5)
    np.testing.assert_array_equal(a.B, b.B)
    assert not np.array_equal(a.B, c.B)


def test_encode_identity():
    rng = np.random.default_rng(0)
    g = grads(3, rng)
    plan = build_encoding_matrix(3, 0)
    for j in range(3):
        np.testing.assert_array_equal(encode(plan, j, g).payload, g[j])


def test_encode_preset_first_row():
    rng = np.random.default_rng(1)
    g = grads(3, rng)
    np.testing.assert_allclose(encode(preset_k3_s1(), 0, g).payload, 0.5 * g[0] + g[1])


def test_encode_zero_gradients():
    plan = build_encoding_matrix(5, 2, "cyclic", seed=1)
    g = {l: np.zeros((2, 2)) for l in range(5)}
    for j in range(5):
        assert not encode(plan, j, g).payload.any()


def test_encode_only_needs_own_partitions():
    plan = preset_k3_s1()
    payload = encode(plan, 1, {1: np.ones((1, 1)), 2: np.ones((1, 1))}).payload
    np.testing.assert_array_equal(payload, [[0.0]])
    with pytest.raises(MissingPartitionGradient):
        encode(plan, 0, {1: np.ones((1, 1))})


@settings(max_examples=40, deadline=None)
@given(K=st.integers(2, 7), S=st.integers(0, 6), alpha=st.floats(-3, 3), beta=st.floats(-3, 3),
       seed=st.integers(0, 1000))
def test_encode_is_linear(K, S, alpha, beta, seed):
    S = S % K
    plan = build_encoding_matrix(K, S, "cyclic", seed=seed)
    rng = np.random.default_rng(seed)
    g, h = grads(K, rng), grads(K, rng)
    mix = {l: alpha * g[l] + beta * h[l] for l in range(K)}
    for j in range(K):
        lhs = encode(plan, j, mix).payload
        rhs = alpha * encode(plan, j, g).payload + beta * encode(plan, j, h).payload
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def preset_responses(g, ecns):
    plan = preset_k3_s1()
    return [encode(plan, j, g) for j in ecns]


def test_preset_decode_weights():
    plan = preset_k3_s1()
    np.testing.assert_allclose(decoding_weights(plan, [0, 1]), [2, -1], atol=1e-12)
    np.testing.assert_allclose(decoding_weights(plan, [0, 2]), [1, 1], atol=1e-12)
    np.testing.assert_allclose(decoding_weights(plan, [1, 2]), [1, 2], atol=1e-12)


@pytest.mark.parametrize("ecns", [(0, 1), (1, 0), (0, 2), (2, 1)])
def test_preset_decode_recovers_sum(ecns):
    g = grads(3, np.random.default_rng(2))
    total = g[0] + g[1] + g[2]
    out = decode(preset_k3_s1(), preset_responses(g, ecns), average=False)
    np.testing.assert_allclose(out, total, atol=1e-12)
    np.testing.assert_allclose(decode(preset_k3_s1(), preset_responses(g, ecns)), total / 3,
                               atol=1e-12)


def test_decode_uses_first_arrivals_only():
    g = grads(3, np.random.default_rng(3))
    resp = preset_responses(g, (2, 0))
    bogus = CodedGradient(1, np.full((3, 2), 1e6))
    out = decode(preset_k3_s1(), resp + [bogus], average=False)
    np.testing.assert_allclose(out, sum(g.values()), atol=1e-12)


def test_decode_no_redundancy_is_plain_sum():
    g = grads(4, np.random.default_rng(4))
    plan = build_encoding_matrix(4, 0)
    resp = [encode(plan, j, g) for j in (3, 1, 0, 2)]
    np.testing.assert_array_equal(decode(plan, resp, average=False), ((g[0] + g[1]) + g[2]) + g[3])


def test_decode_too_few_responses():
    g = grads(3, np.random.default_rng(5))
    with pytest.raises(InsufficientResponses):
        decode(preset_k3_s1(), preset_responses(g, (0,)))


def test_corrupt_plan_is_singular():
    from csiadmm.coding import EncodingPlan
    plan = EncodingPlan("cyclic", 3, 1, np.array([[1.0, 1, 0], [2.0, 2, 0], [0, 1, 1]]))
    g = grads(3, np.random.default_rng(6))
    resp = [encode(plan, j, g) for j in (0, 1)]
    with pytest.raises(SingularDecode):
        decode(plan, resp)


@pytest.mark.parametrize("K,S,scheme", ADMISSIBLE)
def test_decode_invariant_to_responders(K, S, scheme):
    plan = build_encoding_matrix(K, S, scheme, seed=7)
    rng = np.random.default_rng(K + 31 * S)
    g = grads(K, rng)
    direct = sum(g[l] for l in range(K))
    payloads = [encode(plan, j, g) for j in range(K)]
    for F in itertools.combinations(range(K), K - S):
        order = rng.permutation(list(F))
        out = decode(plan, [payloads[j] for j in order], average=False)
        assert np.linalg.norm(out - direct) <= 1e-9 * np.linalg.norm(direct)
