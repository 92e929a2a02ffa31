"""Centralized vs decentralized over a loss/latency grid with several seeds."""
import argparse
import collections

from swarmfollow.config import Scenario
from swarmfollow.harness import compare_architectures, write_report

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seeds", type=int, default=5)
ap.add_argument("--out", default="runs/sweep_report.csv")
args = ap.parse_args()

rows = compare_architectures(Scenario(), [0.0, 0.25, 0.5], [0.0, 0.1, 0.2], range(args.seeds))
write_report(rows, args.out)
table = collections.defaultdict(list)
for r in rows:
    table[(r["mode"], r["loss"], r["latency_s"])].append(r["rms_tracking_error"])
print(f"{'mode':14s} {'loss':>5s} {'lat':>5s} {'mean rms [m]':>13s}")
for (mode, loss, lat), v in sorted(table.items()):
    print(f"{mode:14s} {loss:5.2f} {lat:5.2f} {sum(v) / len(v):13.4f}")
