"""Isolated trials for every behavior, one table row each.

    python3 scripts/run_trials.py --n 100 --noise noiseless --out trials.json
"""
import argparse
import json
import time

from behavnav.bench import NOISE_PROFILES, TRIAL_BEHAVIORS, pretrained_memory, run_behavior_trials
from behavnav.worldsim import DescriptorLibrary


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--maps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", default="noiseless", choices=sorted(NOISE_PROFILES))
    ap.add_argument("--behaviors", nargs="*", default=list(TRIAL_BEHAVIORS))
    ap.add_argument("--out", help="write all reports as JSON")
    args = ap.parse_args()

    library = DescriptorLibrary()
    base = pretrained_memory(library) if "lmpd" in args.behaviors else None
    reports = {}
    print(f"{'behavior':<9}{'success':>9}{'rate':>8}{'time':>8}")
    for b in args.behaviors:
        t0 = time.perf_counter()
        rep = run_behavior_trials(b, args.n, seed=args.seed, noise=args.noise, n_maps=args.maps,
                                  base_memory=base, library=library)
        d = rep.to_dict()
        reports[b] = d
        print(f"{b:<9}{d['successes']:>5}/{args.n:<3}{d['successes'] / args.n:>8.3f}{time.perf_counter() - t0:>7.1f}s",
              flush=True)
    if args.out:
        with open(args.out, "w") as f:
            json.dump(reports, f, sort_keys=True, indent=1)


if __name__ == "__main__":
    main()
