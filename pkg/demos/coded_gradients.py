"""
Gradient coding against slow edge nodes
=======================================

Each agent splits its mini-batch over K edge compute nodes (ECNs). With S
redundant partitions per ECN the agent can decode the full gradient from any
K - S replies and simply ignore the slowest S.
"""

import numpy as np

from csiadmm import coding

rng = np.random.default_rng(0)

###############################################################################
# The three-node, one-straggler code. Row j says how ECN j mixes the partition
# gradients before replying.

plan = coding.preset_k3_s1()
print(plan.B)

partial = {l: rng.standard_normal((3, 1)) for l in range(3)}
total = sum(partial.values())
replies = [coding.encode(plan, j, partial) for j in range(3)]

for pair in [(0, 1), (0, 2), (1, 2)]:
    decoded = coding.decode(plan, [replies[j] for j in pair], average=False)
    print(pair, "max error", np.abs(decoded - total).max())

###############################################################################
# Larger cyclic codes are drawn at random and checked for decodability over
# every responder set before use.

plan = coding.build_encoding_matrix(6, 2, "cyclic", seed=3)
print("support per ECN:", plan.support)
partial = {l: rng.standard_normal((3, 1)) for l in range(6)}
replies = [coding.encode(plan, j, partial) for j in range(6)]
fastest = rng.permutation(6)[:4].tolist()
decoded = coding.decode(plan, [replies[j] for j in fastest], average=False)
print("decoded from ECNs", sorted(fastest), "error",
      np.linalg.norm(decoded - sum(partial.values())))
