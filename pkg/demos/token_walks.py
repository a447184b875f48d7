"""
Token walks over random agent networks
======================================

Draw a random connected network, find a closed walk for the token and count
what one full traversal costs in unicasts.
"""

from csiadmm import topology

# ten agents, half of the 45 possible links; redraw until a Hamiltonian
# cycle exists
graph = topology.generate_graph(10, 0.5, seed=1, accept=topology.has_hamiltonian_cycle)
print(f"{graph.n} agents, {graph.n_edges} links, connected: {graph.is_connected()}")

###############################################################################
# A Hamiltonian cycle visits every agent once, so a traversal costs n units.
# The search backtracks from agent 1 and tries neighbours in ascending order.

ham = topology.hamiltonian_cycle(graph)
print("hamiltonian:", " -> ".join(map(str, ham.order)), f"({len(ham)} hops)")

###############################################################################
# When no such cycle exists the token follows concatenated shortest paths.
# Agents reached only to pass the token on are relays: they cost a unicast
# but do not update.

star = topology.Graph.from_edges(4, [(1, 2), (1, 3), (1, 4)])
walk = topology.shortest_path_cycle(star)
for agent, active in zip(walk.order, walk.active):
    print(f"  agent {agent}{'' if active else '  (relay)'}")
print(f"star walk: {len(walk)} hops for {walk.n_updates} updates")
