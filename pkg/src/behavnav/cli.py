"""Command-line entry point: ``behavnav <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

import numpy as np

from . import bench
from .expert import generate_expert_dataset, write_dataset
from .floorplan import CELL_CHARS, Cell, GenConfig, generate_floorplan, load_map, reference_floorplan, save_map, to_ascii
from .lmmemory import save_memory
from .semgraph import extract_graph, graph_to_text, plan_route
from .worldsim import DescriptorLibrary


def _gen_config(path: str | None) -> GenConfig:
    if not path:
        return GenConfig()
    with open(path) as fh:
        raw = json.load(fh)
    known = {f.name for f in fields(GenConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown GenConfig keys: {sorted(unknown)}")
    for key in ("office_width", "office_depth"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return GenConfig(**raw)


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _load_plan(arg: str):
    return reference_floorplan() if arg == "reference" else load_map(arg)


def cmd_gen_map(args) -> int:
    plan = generate_floorplan(args.seed, _gen_config(args.config))
    if args.out:
        save_map(plan, args.out)
        print(f"wrote {args.out} and {args.out}.meta ({plan.width}x{plan.height}, "
              f"{len(plan.offices())} offices, {len(plan.landmarks)} landmarks)")
    else:
        sys.stdout.write(to_ascii(plan))
    return 0


def cmd_gen_graph(args) -> int:
    graph = extract_graph(_load_plan(args.map))
    _write(graph_to_text(graph), args.out)
    return 0


def cmd_gen_dataset(args) -> int:
    plan = _load_plan(args.map)
    graph = extract_graph(plan)
    recs = generate_expert_dataset(plan, graph, args.behavior, args.paths, rng_seed=args.seed)
    manifest = write_dataset(recs, args.out, {"map_seed": plan.seed, "behavior": args.behavior,
                                              "paths": args.paths, "seed": args.seed})
    print(f"wrote {manifest['records']} records to {args.out}")
    return 0


def cmd_train_memory(args) -> int:
    from .lmmemory import memory_for_plan
    plan = _load_plan(args.map)
    library = DescriptorLibrary()
    base = bench.pretrained_memory(library)
    mem = memory_for_plan(plan, library, base, seed=args.seed)
    save_memory(mem, args.out)
    print(f"wrote memory with {mem.n} landmarks (alpha_unk={mem.alpha_unk:.4f}) to {args.out}")
    return 0


def cmd_trial(args) -> int:
    library = DescriptorLibrary()
    base = bench.pretrained_memory(library) if args.behavior == "lmpd" else None
    rep = bench.run_behavior_trials(args.behavior, args.n, seed=args.seed, noise=args.noise,
                                    n_maps=args.maps, base_memory=base, library=library)
    print(json.dumps(rep.to_dict(), sort_keys=True, indent=1))
    return 0


def cmd_bench(args) -> int:
    cfg = bench.BenchConfig(n_maps=args.maps, missions_per_map=args.missions, seed=args.seed,
                            noise=args.noise, workers=args.workers)

    def progress(i, n, recs):
        if not args.quiet:
            ok = sum(r.success for r in recs)
            print(f"map {i}/{n}: {ok}/{len(recs)} missions", file=sys.stderr, flush=True)

    rep = bench.run_benchmark(cfg, progress=progress)
    if args.report:
        _write(rep.to_json(), args.report)
    summary = {k: v for k, v in rep.to_dict().items() if k not in ("missions", "seeds")}
    print(json.dumps(summary, sort_keys=True))
    print(f"wall clock {rep.wall_clock:.1f}s", file=sys.stderr)
    return 0


def render(plan, route=None) -> str:
    """ASCII map; landmarks as '*', plan places numbered in visiting order."""
    lut = np.array([CELL_CHARS[Cell(i)] for i in range(len(Cell))])
    canvas = lut[plan.kinds].astype("<U1")
    for lm in plan.landmarks:
        # the wall cell carrying the landmark sits behind its face, against the normal
        cx = int(np.floor(lm.x - 0.5 * lm.nx))
        cy = int(np.floor(lm.y - 0.5 * lm.ny))
        canvas[cy, cx] = "*"
    legend = []
    if route is not None:
        graph_meta = extract_graph(plan).meta
        places = [route.start] + [t.to for t in route.triplets]
        for i, place in enumerate(places):
            mark = "0123456789abcdefghijklmnopqrstuvwxyz"[i % 36]
            x, y = _place_xy(plan, graph_meta, place)
            canvas[int(y), int(x)] = mark
            legend.append(f"{mark}={place}")
    rows = ["".join(r) for r in canvas[::-1]]
    out = "\n".join(rows) + "\n"
    if legend:
        out += " ".join(legend) + "\n"
    return out


def _place_xy(plan, meta, place):
    if place in plan.rooms:
        return plan.rooms[place].center
    info = meta.get(place, {})
    if "anchor" in info:
        return info["anchor"]
    return plan.rooms[place.rstrip("lr")].center


def cmd_render(args) -> int:
    plan = _load_plan(args.map)
    route = None
    if args.start or args.goal:
        if not (args.start and args.goal):
            raise ValueError("--start and --goal go together")
        route = plan_route(extract_graph(plan), args.start, args.goal)
    _write(render(plan, route), args.out)
    if route is not None and args.out:
        sys.stdout.write(route.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="behavnav", description="behavior-graph navigation simulator")
    p.add_argument("--seed", type=int, default=0, help="controls all randomness")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("gen-map", help="generate a floor plan")
    s.add_argument("--config", help="JSON file of generator settings")
    s.add_argument("--out", help="map path; a .meta sidecar is written next to it")
    s.set_defaults(func=cmd_gen_map)

    s = sub.add_parser("gen-graph", help="extract the semantic graph of a map")
    s.add_argument("--map", required=True, help="map path or 'reference'")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen_graph)

    s = sub.add_parser("gen-dataset", help="expert demonstrations for one behavior code")
    s.add_argument("--map", required=True)
    s.add_argument("--behavior", required=True, help="behavior code, e.g. cf or iol")
    s.add_argument("--paths", type=int, default=10)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_dataset)

    s = sub.add_parser("train-memory", help="landmark memory for a map")
    s.add_argument("--map", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_memory)

    s = sub.add_parser("trial", help="isolated behavior trials")
    s.add_argument("--behavior", required=True, choices=bench.TRIAL_BEHAVIORS)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--maps", type=int, default=10)
    s.add_argument("--noise", default="noiseless", choices=sorted(bench.NOISE_PROFILES))
    s.set_defaults(func=cmd_trial)

    s = sub.add_parser("bench", help="multi-map mission benchmark")
    s.add_argument("--maps", type=int, default=100)
    s.add_argument("--missions", type=int, default=10)
    s.add_argument("--noise", default="paper-like", choices=sorted(bench.NOISE_PROFILES))
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--report", help="write the full report here")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("render", help="ASCII map with landmarks and an optional plan")
    s.add_argument("--map", required=True)
    s.add_argument("--start")
    s.add_argument("--goal")
    s.add_argument("--out")
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, LookupError, RuntimeError) as exc:
        print(f"behavnav {args.cmd}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
