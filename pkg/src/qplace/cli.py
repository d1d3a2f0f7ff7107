"""Command line front end: ``qplace generate | place | eval | render``.

Exit codes: 0 success, 1 validation or legality failure, 2 solver or
infrastructure failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .expansion import ExpansionConfig, InfeasibleError, IterationRecord, run
from .fpga import (
    CellType,
    FpgaArchitecture,
    LegalityOracle,
    Netlist,
    NetlistError,
    build_distance_matrix,
    build_flow_matrix,
    fictional_arch,
    generate_instance,
    load_architecture,
    load_netlist,
    placement_from_json,
    placement_to_json,
    save_netlist,
)
from .solvers import Backend, SolverConfig, SolverError

log = logging.getLogger("qplace")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2

SOLVER_NAMES = {"sa": Backend.SIMULATED_ANNEALING, "exhaustive": Backend.EXHAUSTIVE, "external": Backend.EXTERNAL}
CSV_HEADER = ["iter", "cost", "inner_rounds", "qubo_dim", "ms"]

TYPE_COLORS = {CellType.IO: "#f4a261", CellType.BRAM: "#2a9d8f", CellType.LUT: "#e9ecef"}
CELL_PX = 20


def default_seed() -> int:
    return int(os.environ.get("QPLACE_SEED", "0"))


def _arch(name: str) -> FpgaArchitecture:
    return fictional_arch() if name == "fictional" else load_architecture(name)


def _fmt(x: float) -> str:
    return f"{x:.0f}" if float(x).is_integer() else repr(float(x))


# ---------------------------------------------------------------- generate


def cmd_generate(args) -> int:
    arch = _arch(args.arch)
    rng = np.random.default_rng(args.seed)
    netlist = generate_instance(arch, args.m, rng, mean_degree=args.mean_degree, fix_io=args.fix_io)
    if args.output:
        save_netlist(netlist, args.output)
    else:
        save_netlist(netlist, sys.stdout)
    counts = netlist.type_counts()
    summary = ", ".join(f"{t.value}={counts[t]}" for t in CellType)
    print(f"{netlist.m} blocks ({summary}), {len(netlist.nets)} nets", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- place


def _manifest_from_args(args) -> dict:
    return {
        "tool_version": __version__,
        "instance": str(Path(args.instance).resolve()),
        "arch": args.arch if args.arch == "fictional" else str(Path(args.arch).resolve()),
        "out_dir": str(args.out),
        "render": bool(args.render),
        "timing": not args.no_timing,
        "expansion": {
            "k": args.k,
            "k_u": args.ku,
            "index_strategy": args.index_strategy,
            "max_outer_iters": args.iters,
            "rel_improvement_eps": args.eps,
            "seed": args.seed,
            "inner_mode": args.inner_mode,
            "inner_rounds": args.inner_rounds,
        },
        "solver": {
            "backend": SOLVER_NAMES[args.solver].value,
            "num_reads": args.reads,
            "sa_sweeps": args.sweeps,
            "sa_beta_range": list(args.beta_range) if args.beta_range else None,
            "external_cmd": args.external_cmd,
            "time_limit_ms": args.time_limit_ms,
        },
    }


def config_from_manifest(manifest: dict) -> ExpansionConfig:
    sc = dict(manifest["solver"])
    if sc.get("sa_beta_range"):
        sc["sa_beta_range"] = tuple(sc["sa_beta_range"])
    solver = SolverConfig(**sc)
    return ExpansionConfig(solver=solver, **manifest["expansion"])


def write_convergence(records: list[IterationRecord], fp, timing: bool = True) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.outer_iter, _fmt(r.qap_cost), r.inner_rounds, r.qubo_dim, r.wall_time_ms if timing else 0])


def execute_manifest(manifest: dict, out_dir: Path | None = None, debug_events: bool = False) -> float:
    """Run the placement described by ``manifest``; returns the final cost."""
    out = Path(out_dir or manifest["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    netlist = load_netlist(manifest["instance"])
    arch = _arch(manifest["arch"])
    cfg = config_from_manifest(manifest)
    F = build_flow_matrix(netlist)
    D = build_distance_matrix(arch)
    legal = LegalityOracle.from_netlist(arch, netlist)
    if netlist.m > arch.n:
        raise NetlistError(f"{netlist.m} blocks do not fit on {arch.n} cells")

    events = open(out / "events.jsonl", "w", encoding="utf-8") if debug_events else None

    def on_record(rec: IterationRecord) -> None:
        log.info("iter %d cost %s rounds %d dim %d", rec.outer_iter, _fmt(rec.qap_cost), rec.inner_rounds, rec.qubo_dim)

    def on_round(ev: dict) -> None:
        events.write(json.dumps(ev) + "\n")

    try:
        P, records = run(F, D, legal, cfg, on_record=on_record, on_round=on_round if events else None)
    finally:
        if events:
            events.close()
    (out / "placement.json").write_text(
        json.dumps(placement_to_json(netlist, arch, P), indent=1) + "\n", encoding="utf-8"
    )
    with open(out / "convergence.csv", "w", encoding="utf-8", newline="") as fh:
        write_convergence(records, fh, timing=manifest.get("timing", True))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    if manifest.get("render"):
        (out / "placement.svg").write_text(render_svg(arch, placement_to_json(netlist, arch, P), netlist), encoding="utf-8")
    return records[-1].qap_cost


def _run_one(manifest: dict) -> float:
    return execute_manifest(manifest)


def cmd_place(args) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        if args.out:
            manifest["out_dir"] = str(args.out)
        cost = execute_manifest(manifest, debug_events=args.debug_events)
        print(f"final cost {_fmt(cost)}")
        return EXIT_OK
    missing = [flag for flag, v in (("--instance", args.instance), ("--k", args.k)) if v is None]
    if missing:
        raise NetlistError(f"place needs {' and '.join(missing)} (or --manifest)")
    if args.out is None:
        args.out = Path("run")
    if args.ku is None:
        args.ku = 0
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
        manifests = []
        for s in seeds:
            args.seed = s
            mf = _manifest_from_args(args)
            mf["out_dir"] = str(Path(args.out) / f"seed_{s}")
            config_from_manifest(mf)
            manifests.append(mf)
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                costs = list(pool.map(_run_one, manifests))
        else:
            costs = [_run_one(mf) for mf in manifests]
        for s, c in zip(seeds, costs):
            print(f"seed {s}: final cost {_fmt(c)}")
        return EXIT_OK
    manifest = _manifest_from_args(args)
    config_from_manifest(manifest)  # validate before running
    cost = execute_manifest(manifest, debug_events=args.debug_events)
    print(f"final cost {_fmt(cost)}")
    return EXIT_OK


# ---------------------------------------------------------------- eval


def evaluate(netlist: Netlist, arch: FpgaArchitecture, placement: dict) -> tuple[dict, list[str]]:
    """Cost report and a list of violations (empty when legal)."""
    locs = placement_from_json(placement, netlist, arch)
    problems = []
    ids = netlist.ids()
    owner: dict[int, str] = {}
    for b, loc in zip(ids, locs):
        if int(loc) in owner:
            r, c = arch.coords(loc)
            problems.append(f"injectivity violation: {owner[int(loc)]!r} and {b!r} both at ({r}, {c})")
        else:
            owner[int(loc)] = b
    legal = LegalityOracle.from_netlist(arch, netlist)
    for f, (b, t) in enumerate(netlist.blocks):
        loc = int(locs[f])
        if not legal(f, loc):
            r, c = arch.coords(loc)
            cell = arch.cell_type(loc).value
            if t.value != cell:
                problems.append(f"legality violation: {t.value} block {b!r} on {cell} cell ({r}, {c})")
            else:
                problems.append(f"legality violation: pinned block {b!r} moved to ({r}, {c})")
    F = build_flow_matrix(netlist)
    D = build_distance_matrix(arch)
    a = locs
    report = {
        "cost": float((F * D[np.ix_(a, a)]).sum()),
        "counts": {t.value: sum(1 for _, bt in netlist.blocks if bt is t) for t in CellType},
        "legal": not problems,
    }
    return report, problems


def cmd_eval(args) -> int:
    netlist = load_netlist(args.instance)
    arch = _arch(args.arch)
    placement = json.loads(Path(args.placement).read_text(encoding="utf-8"))
    report, problems = evaluate(netlist, arch, placement)
    print(f"cost {_fmt(report['cost'])}")
    print("placed " + ", ".join(f"{k}={v}" for k, v in report["counts"].items()))
    if problems:
        print("ILLEGAL")
        for p in problems:
            print(f"  {p}")
        return EXIT_INVALID
    print("legal")
    return EXIT_OK


# ---------------------------------------------------------------- render


def render_svg(arch: FpgaArchitecture, placement: dict, netlist: Netlist | None = None) -> str:
    """Grid coloured by cell type, placed blocks as dots, nets as straight edges."""
    w, h = arch.width * CELL_PX, arch.height * CELL_PX
    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n')
    out.write('<g class="grid" stroke="#ffffff" stroke-width="1">\n')
    for r in range(arch.height):
        for c in range(arch.width):
            color = TYPE_COLORS[arch.cells[r][c]]
            out.write(f'<rect x="{c * CELL_PX}" y="{r * CELL_PX}" width="{CELL_PX}" height="{CELL_PX}" fill="{color}"/>\n')
    out.write("</g>\n")

    def center(bid: str) -> tuple[float, float]:
        p = placement[bid]
        return p["col"] * CELL_PX + CELL_PX / 2, p["row"] * CELL_PX + CELL_PX / 2

    if netlist is not None:
        out.write('<g class="nets" stroke="#264653" stroke-width="1" stroke-opacity="0.7">\n')
        drawn = set()
        for i, net in enumerate(netlist.nets):
            for b in net:
                if b not in placement:
                    raise NetlistError(f"net {i} references unplaced block {b!r}")
            members = sorted(set(net))
            for x in range(len(members)):
                for y in range(x + 1, len(members)):
                    key = (members[x], members[y])
                    if key in drawn:
                        continue
                    drawn.add(key)
                    (x1, y1), (x2, y2) = center(key[0]), center(key[1])
                    out.write(f'<line class="net" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>\n')
        out.write("</g>\n")
    out.write('<g class="blocks" fill="#e76f51">\n')
    for bid in sorted(placement):
        x, y = center(bid)
        out.write(f'<circle cx="{x}" cy="{y}" r="{CELL_PX / 4}"><title>{bid}</title></circle>\n')
    out.write("</g>\n</svg>\n")
    return out.getvalue()


def cmd_render(args) -> int:
    arch = _arch(args.arch)
    placement = json.loads(Path(args.placement).read_text(encoding="utf-8")) if args.placement else {}
    netlist = load_netlist(args.instance) if args.instance else None
    if netlist is not None and placement:
        placement_from_json(placement, netlist, arch)
    svg = render_svg(arch, placement, netlist)
    if args.output:
        Path(args.output).write_text(svg, encoding="utf-8")
    else:
        sys.stdout.write(svg)
    return EXIT_OK


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qplace", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random benchmark netlist")
    g.add_argument("--m", type=int, required=True, help="number of blocks")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--arch", default="fictional")
    g.add_argument("--mean-degree", type=float, default=3.0)
    g.add_argument("--fix-io", action="store_true", help="pin the two IO blocks to the border")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    pl = sub.add_parser("place", help="run cyclic expansion on an instance")
    pl.add_argument("--instance")
    pl.add_argument("--arch", default="fictional")
    pl.add_argument("--manifest", help="replay a previous run's manifest.json")
    pl.add_argument("--k", type=int)
    pl.add_argument("--ku", type=int)
    pl.add_argument("--iters", type=int, default=50)
    pl.add_argument("--eps", type=float, default=0.0, help="stop when relative improvement drops below this")
    pl.add_argument("--index-strategy", choices=["random", "worst"], default="random")
    pl.add_argument("--inner-mode", choices=["coverage", "fixed"], default="coverage")
    pl.add_argument("--inner-rounds", type=int, default=1, help="rounds per iteration for --inner-mode fixed")
    pl.add_argument("--solver", choices=sorted(SOLVER_NAMES), default="sa")
    pl.add_argument("--reads", type=int, default=100)
    pl.add_argument("--sweeps", type=int, default=1000)
    pl.add_argument("--beta-range", type=float, nargs=2, metavar=("LOW", "HIGH"))
    pl.add_argument("--external-cmd")
    pl.add_argument("--time-limit-ms", type=int)
    pl.add_argument("--seed", type=int, default=None)
    pl.add_argument("--seeds", help="comma-separated seeds for a sweep; outputs go to OUT/seed_<s>")
    pl.add_argument("--jobs", type=int, default=1)
    pl.add_argument("-o", "--out", type=Path)
    pl.add_argument("--render", action="store_true", help="also write placement.svg")
    pl.add_argument("--no-timing", action="store_true", help="write 0 in the ms column for byte-stable logs")
    pl.add_argument("--debug-events", action="store_true", help="write per-round events.jsonl")
    pl.set_defaults(func=cmd_place)

    e = sub.add_parser("eval", help="cost and legality of a placement")
    e.add_argument("--instance", required=True)
    e.add_argument("--arch", default="fictional")
    e.add_argument("--placement", required=True)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("render", help="draw a placement as SVG")
    r.add_argument("--arch", default="fictional")
    r.add_argument("--placement")
    r.add_argument("--instance")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "seed", 0) is None:
        args.seed = default_seed()
    try:
        return args.func(args)
    except (NetlistError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
