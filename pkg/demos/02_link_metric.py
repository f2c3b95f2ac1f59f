"""The ELP link cost and what each of its three factors contributes.

Cost = loss ratio term x interference term x capacity term. The loss term
weights the data direction more heavily than the ACK direction, the
interference term grows with the contention domain's busy fraction, and
the capacity term makes slow links expensive. Hop count treats all of
these links as equal, which is exactly its problem.
"""

from meshsim import ElpParams, LinkStats, elp_link, elp_path, hop_count_metric
from meshsim.metrics import record_probe

params = ElpParams(w=0.75, ref_rate=12e6)

print("link variants, one factor degraded at a time:")
cases = [
    ("clean, fast, idle     ", LinkStats(d_f=1.0, d_r=1.0, busy=0.0, capacity=12e6)),
    ("50% forward loss      ", LinkStats(d_f=0.5, d_r=1.0, busy=0.0, capacity=12e6)),
    ("50% reverse loss      ", LinkStats(d_f=1.0, d_r=0.5, busy=0.0, capacity=12e6)),
    ("half the channel busy ", LinkStats(d_f=1.0, d_r=1.0, busy=0.5, capacity=12e6)),
    ("half-rate radio       ", LinkStats(d_f=1.0, d_r=1.0, busy=0.0, capacity=6e6)),
    ("all three at once     ", LinkStats(d_f=0.5, d_r=1.0, busy=0.5, capacity=6e6)),
]
for name, stats in cases:
    print(f"  {name} cost {elp_link(stats, params):7.3f}   "
          f"hop count {hop_count_metric():.0f}")

print("\nforward loss hurts more than reverse loss: data frames need many")
print("retransmissions, ACKs are small. The asymmetry exponent w=0.75")
print("encodes that.")

# path comparison the routing layer faces constantly: a lossy shortcut
# against a clean dogleg
shortcut = elp_link(LinkStats(d_f=0.5, d_r=1.0, busy=0.5, capacity=6e6), params)
clean = elp_link(LinkStats(d_f=0.98, d_r=0.98, busy=0.0, capacity=12e6), params)
print(f"\n1-hop lossy shortcut : cost {elp_path([shortcut]):.3f}")
print(f"2-hop clean path     : cost {elp_path([clean, clean]):.3f}")
print("ELP picks the 2-hop path; hop count would pick the shortcut (1 < 2)")

# link estimation in motion: EWMA over probe outcomes
stats = LinkStats(d_f=1.0, d_r=1.0, capacity=12e6)
print("\nprobe smoothing (alpha 0.1), link degrades to 50% halfway:")
for i in range(40):
    received = True if i < 20 else (i % 2 == 0)
    record_probe(stats, "fwd", received, alpha=0.1)
    if i % 10 == 9:
        print(f"  after probe {i + 1:2d}: d_f = {stats.d_f:.3f}")
