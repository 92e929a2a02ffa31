"""Run the default follow scenario in decentralized mode and write its outputs."""
import argparse
import json

from swarmfollow.config import Scenario, load_scenario_file
from swarmfollow.harness import run_scenario, write_outputs

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--config")
ap.add_argument("--out", default="runs/default")
ap.add_argument("--dump-frames", action="store_true")
args = ap.parse_args()

s = load_scenario_file(args.config) if args.config else Scenario()
res = run_scenario(s, dump_dir=f"{args.out}/frames" if args.dump_frames else None)
write_outputs(res, args.out)
print(json.dumps(res.summary, indent=2))
