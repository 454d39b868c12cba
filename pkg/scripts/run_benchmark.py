"""Mission benchmark under one or more noise profiles.

    python3 scripts/run_benchmark.py --maps 100 --missions 10 --noise paper-like raised
"""
import argparse
import sys

from behavnav.bench import NOISE_PROFILES, BenchConfig, pretrained_memory, run_benchmark
from behavnav.worldsim import DescriptorLibrary


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--maps", type=int, default=100)
    ap.add_argument("--missions", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--noise", nargs="+", default=["paper-like"], choices=sorted(NOISE_PROFILES))
    ap.add_argument("--report-prefix", help="write <prefix>-<noise>.json per profile")
    args = ap.parse_args()

    library = DescriptorLibrary()
    base = pretrained_memory(library)
    for noise in args.noise:
        cfg = BenchConfig(n_maps=args.maps, missions_per_map=args.missions, seed=args.seed,
                          noise=noise, workers=args.workers)
        rep = run_benchmark(cfg, base_memory=base, library=library,
                            progress=lambda i, n, _: print(f"\r{noise}: map {i}/{n}", end="", file=sys.stderr))
        print(file=sys.stderr)
        fails = ", ".join(f"{k} {v}" for k, v in sorted(rep.failures.items()))
        print(f"{noise:<11} success {rep.success_rate:.3f}  behaviors {rep.mean_behaviors:.2f}  "
              f"[{fails}]  {rep.wall_clock:.0f}s")
        if args.report_prefix:
            with open(f"{args.report_prefix}-{noise}.json", "w") as f:
                f.write(rep.to_json())


if __name__ == "__main__":
    main()
