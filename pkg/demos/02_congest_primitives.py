"""The round engine: BFS tree, broadcast and convergecast with bandwidth accounting.

Run:  python demos/02_congest_primitives.py
"""
import io

from mixtime.congest import CongestLedger, broadcast, flood_echo, upcast_sum
from mixtime.graphcore import generate, parse_family, stationary_distribution

g = generate(parse_family("lollipop:4,4"))
ledger = CongestLedger()

# Flood from the end of the path; the echo tells the root the tree is done
# and, on the way back, how many nodes and edges there are.
echo = flood_echo(g, 7, ledger)
tree = echo.tree
print("parents:", tree.parent)
print("depths: ", tree.depth, "height", tree.height)
print(f"rounds {echo.rounds}; root learned n={echo.node_count}, 2m={echo.degree_sum}")

# Broadcast a large integer in 12-bit chunks; every node decodes it.
values, rounds = broadcast(g, tree, [2**40 + 5], ledger, payload_bits=12)
print("broadcast rounds:", rounds, "every node got it:", all(v == [2**40 + 5] for v in values))

# Convergecast the stationary distribution: exact rational sum, one number
# per tree edge per round.
total, rounds = upcast_sum(g, tree, list(stationary_distribution(g)), ledger, denominator=2 * g.m)
print("sum of pi:", total, "in", rounds, "rounds")

print("busiest edge-round carried", ledger.max_messages_per_edge(), "message(s)")
buf = io.StringIO()
ledger.write_csv(buf)
print("\n".join(buf.getvalue().splitlines()[:6]), "\n...")
