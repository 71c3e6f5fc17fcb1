"""Command-line front end.

One binary, subcommand style: tps, gen, sim, roofline, util, space,
fp-check, fp-render.  Exit codes: 0 success, 1 domain failure (infeasible
tiling, deadlock, floorplan violations), 2 usage.  All randomness sits
behind --seed (default 0, which also selects in-order DMA completion), so
every output is reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from itertools import product

import numpy as np

from .analysis import (area_proxy, design_space_table, roofline_chart,
                       roofline_point, utilization_timeline)
from .codegen import (GenOptions, gen_alu_layer_stream, gen_conv_stream,
                      load_stream, save_stream, stage_alu_data,
                      stage_conv_data)
from .config import AccelConfig, load_config, load_config_file
from .engine import run as sim_run
from .errors import AcclabError, WorkloadError
from .floorplan import check as fp_check, load_floorplan, render_svg
from .tps import ranking_csv, search
from .workload import ConvLayer, load_workload_file, pad_channels

_CONFIG_SCHEMA = """\
config JSON: flat object of AccelConfig fields, all optional
  (batch, block_in, block_out, *_elem_bits, *_spad_bytes, axi_data_bits,
  dram_latency_cycles, vme_max_inflight, gemm_ii, alu_ii_imm, alu_ii_two,
  pipeline depths, queue depths, instruction field-width knobs)."""

_WORKLOAD_SCHEMA = """\
workload JSON: list of layer objects
  {"kind": conv|dense|depthwise|maxpool|avgpool, "b","h","w","kh","kw",
   "fi","fo","ph","pw","sh","sw","name"}."""

_GRID_SCHEMA = """\
grid JSON: {"base": {config fields}, "sweep": {field: [values, ...]}};
one simulated row per point of the cartesian product."""

_FP_SCHEMA = """\
floorplan JSON: node tree {"name","kind":hierarchy|macro|array,
  "width","height" um (or "cell" looked up in the tech table),
  "orientation": R0|R90|R180|R270|MX|MY|MX90|MY90,
  "children":[{"node":{...},"x":um,"y":um}], "bound":[x0,y0,x1,y1],
  array: "proto","rows","cols","pitch_x","pitch_y","name_pattern"}.
tech JSON: {"cell_name": [width_um, height_um]}."""


def _load_cfg(path) -> AccelConfig:
    return load_config_file(path) if path else AccelConfig()


def _select_layers(layers, names) -> list:
    if not names:
        return layers
    by = {l.name: l for l in layers}
    out = []
    for nm in names.split(","):
        nm = nm.strip()
        if nm not in by:
            raise WorkloadError(
                f"layer {nm!r} not in workload (have: {', '.join(by) or 'none'})")
        out.append(by[nm])
    return out


def _prep_layer(layer: ConvLayer, cfg: AccelConfig) -> ConvLayer:
    """Pad channels up to the machine block sizes; ALU-mapped layers keep
    fi == fo by padding both to block_out."""
    if layer.kind in ("conv", "dense"):
        return pad_channels(layer, cfg.block_in, cfg.block_out)
    return pad_channels(layer, cfg.block_out, cfg.block_out)


def _build_stream(layer: ConvLayer, cfg: AccelConfig, opts=GenOptions()):
    padded = _prep_layer(layer, cfg)
    if padded.kind in ("conv", "dense"):
        tiling = search(padded, cfg).params
        return gen_conv_stream(padded, cfg, tiling, opts)
    return gen_alu_layer_stream(padded, cfg, opts)


def _stage_random(stream, seed):
    """Fill the stream's DRAM image with seeded operand data."""
    rng = np.random.default_rng(seed)
    layer = ConvLayer(**stream.meta["layer"])
    if stream.meta["generator"] == "conv":
        inp = rng.integers(-128, 128, size=(layer.b, layer.fi, layer.h, layer.w),
                           dtype=np.int8)
        wgt = rng.integers(-128, 128,
                           size=(layer.fo, layer.fi, layer.kh, layer.kw),
                           dtype=np.int8)
        return stage_conv_data(stream, inp, wgt)
    inp = rng.integers(-512, 512, size=(layer.b, layer.fo, layer.h, layer.w),
                       dtype=np.int32)
    wgt = None
    if layer.kind == "depthwise":
        wgt = rng.integers(-8, 8, size=(layer.fo, layer.kh, layer.kw),
                           dtype=np.int32)
    return stage_alu_data(stream, inp, wgt)


def _demo_stream(name: str, seed=0):
    """Built-in example streams for `sim --demo`."""
    cfg = AccelConfig()
    layer = ConvLayer(kind="conv", b=1, h=8, w=8, kh=3, kw=3, fi=16, fo=16,
                      ph=1, pw=1, sh=1, sw=1, name="small-conv")
    stream = _build_stream(layer, cfg, GenOptions(requant_shift=4, clip_max=127))
    stream.dram = _stage_random(stream, seed)
    if name == "small-conv":
        return stream
    if name == "deadlock":
        bad = copy.deepcopy(stream)
        # Drop the last store's token back to compute: the FINISH pop that
        # expects it then blocks forever.
        store = [i for i in bad.instrs if i.op.name == "STORE"][-1]
        store.push_prev = False
        bad.meta = dict(bad.meta)
        bad.meta["generator"] = "demo-deadlock"
        return bad
    raise AcclabError(f"no demo named {name!r} (have: small-conv, deadlock)")


def _write(path, text_or_bytes):
    mode = "wb" if isinstance(text_or_bytes, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(text_or_bytes)
    print(f"wrote {path}")


# ---------------------------------------------------------------- commands


def _cmd_tps(args):
    cfg = _load_cfg(args.config)
    layers = load_workload_file(args.workload)
    (layer,) = _select_layers(layers, args.layer) if args.layer else layers[:1]
    padded = _prep_layer(layer, cfg)
    search(padded, cfg)  # raise the infeasibility diagnosis before writing
    text = ranking_csv(padded, cfg, top=args.top)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_gen(args):
    cfg = _load_cfg(args.config)
    layers = load_workload_file(args.workload)
    (layer,) = _select_layers(layers, args.layer) if args.layer else layers[:1]
    opts = GenOptions(requant_shift=args.requant_shift, clip_max=args.clip_max,
                      dedup_loads=args.dedup)
    stream = _build_stream(layer, cfg, opts)
    if args.stage == "random":
        stream.dram = _stage_random(stream, args.seed)
    for path in save_stream(stream, args.out):
        print(f"wrote {path}")
    return 0


def _summarize(report):
    print(f"mode={report.mode} seed={report.seed} "
          f"cycles={report.total_cycles} instructions={report.instr_count}")
    rd = ", ".join(f"{k}={v}" for k, v in sorted(report.dram_read_bytes.items()) if v)
    print(f"dram: read {{{rd}}} B, written {report.dram_write_bytes} B, "
          f"total {report.dram_total_bytes} B, {report.bus_pulses} bus pulses")
    busy = {m: report.busy_cycles(m) for m in ("load", "compute", "store")}
    gemm = report.busy_cycles("compute", labels=("gemm",))
    alu = report.busy_cycles("compute", labels=("alu",))
    print(f"busy cycles: load={busy['load']} "
          f"compute={busy['compute']} (gemm={gemm}, alu={alu}) "
          f"store={busy['store']}")
    if report.hazards:
        print(f"HAZARDS: {len(report.hazards)}")
        for h in report.hazards[:10]:
            print(f"  {h}")


def _cmd_sim(args):
    if args.demo:
        stream = _demo_stream(args.demo, seed=args.seed)
    else:
        stream = load_stream(args.stream)
    report = sim_run(stream, mode=args.mode, seed=args.seed)
    if report.deadlock is not None:
        print("deadlock:", file=sys.stderr)
        print(json.dumps(report.deadlock, indent=2), file=sys.stderr)
        return 1
    _summarize(report)
    if args.out:
        _write(args.out + ".report.json", report.to_json())
        _write(args.out + ".intervals.csv", report.intervals_csv())
    return 0


def _cmd_roofline(args):
    cfg = _load_cfg(args.config)
    layers = _select_layers(load_workload_file(args.workload), args.layers)
    points = []
    for layer in layers:
        stream = _build_stream(layer, cfg)
        report = sim_run(stream, seed=args.seed, trace=False)
        if report.deadlock is not None:
            print(json.dumps(report.deadlock, indent=2), file=sys.stderr)
            return 1
        points.append(roofline_point(report, stream, cfg))
        print(f"{points[-1].label}: {points[-1].ops_per_byte:.3f} ops/B, "
              f"{points[-1].ops_per_cycle:.3f} ops/cycle")
    svg, text = roofline_chart(points, [cfg])
    _write(args.out + ".svg", svg)
    _write(args.out + ".csv", text)
    return 0


def _cmd_util(args):
    if args.demo:
        stream = _demo_stream(args.demo, seed=args.seed)
    else:
        stream = load_stream(args.stream)
    report = sim_run(stream, seed=args.seed)
    if report.deadlock is not None:
        print(json.dumps(report.deadlock, indent=2), file=sys.stderr)
        return 1
    svg, text = utilization_timeline(report)
    _write(args.out + ".svg", svg)
    _write(args.out + ".csv", text)
    return 0


def _cmd_space(args):
    with open(args.grid) as fh:
        grid = json.load(fh)
    base = grid.get("base", {})
    sweep = grid.get("sweep", {})
    fields = sorted(sweep)
    layers = _select_layers(load_workload_file(args.workload), args.layers)
    entries = []
    for combo in product(*(sweep[f] for f in fields)):
        cfg = load_config({**base, **dict(zip(fields, combo))})
        total = 0
        for layer in layers:
            report = sim_run(_build_stream(layer, cfg), seed=args.seed,
                             trace=False)
            if report.deadlock is not None:
                print(json.dumps(report.deadlock, indent=2), file=sys.stderr)
                return 1
            total += report.total_cycles
        entries.append((cfg, total, area_proxy(cfg, args.alpha, args.beta)))
        print(f"{cfg.batch}x{cfg.block_in}x{cfg.block_out} "
              f"axi={cfg.axi_data_bits}: {total} cycles")
    text = design_space_table(entries)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _load_fp(args):
    return load_floorplan(args.floorplan, args.tech)


def _cmd_fp_check(args):
    root = _load_fp(args)
    violations = fp_check(root, args.min_spacing)
    for v in violations:
        print(v)
    print(f"{len(violations)} violation(s)")
    return 1 if violations else 0


def _cmd_fp_render(args):
    root = _load_fp(args)
    violations = fp_check(root, args.min_spacing) if args.highlight else ()
    _write(args.out, render_svg(root, violations))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="acclab",
        description="Performance laboratory for a load-compute-store tensor accelerator.",
        epilog="\n\n".join((_CONFIG_SCHEMA, _WORKLOAD_SCHEMA, _GRID_SCHEMA, _FP_SCHEMA)),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, help_, schema=""):
        sp = sub.add_parser(name, help=help_, description=help_, epilog=schema,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("tps", _cmd_tps, "Rank tiling schedules for one layer into a CSV.",
             _CONFIG_SCHEMA + "\n\n" + _WORKLOAD_SCHEMA)
    sp.add_argument("--config", help="config JSON (default: built-in 1x16x16)")
    sp.add_argument("--workload", required=True, help="workload JSON")
    sp.add_argument("--layer", help="layer name (default: first layer)")
    sp.add_argument("--top", type=int, default=0, help="keep only the best N rows")
    sp.add_argument("--out", help="output CSV path (default: stdout)")

    sp = add("gen", _cmd_gen, "Generate an instruction stream "
             "(<out>.jsonl/.bin/.dram.bin/.meta.json).",
             _CONFIG_SCHEMA + "\n\n" + _WORKLOAD_SCHEMA)
    sp.add_argument("--config")
    sp.add_argument("--workload", required=True)
    sp.add_argument("--layer")
    sp.add_argument("--out", required=True, help="output path prefix")
    sp.add_argument("--requant-shift", type=int, default=-1,
                    help="right-shift the accumulator before store (-1: off)")
    sp.add_argument("--clip-max", type=int, default=-1,
                    help="clip to [0, N] after the shift (-1: off)")
    sp.add_argument("--dedup", action="store_true",
                    help="skip reloading chunks already resident")
    sp.add_argument("--stage", choices=("random", "zeros"), default="random",
                    help="operand data written into the DRAM image")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("sim", _cmd_sim, "Simulate a stream; report cycles, bytes, and activity.")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--stream", help="prefix written by gen")
    g.add_argument("--demo", choices=("small-conv", "deadlock"),
                   help="run a built-in example instead of --stream")
    sp.add_argument("--mode", choices=("timing", "functional"), default="timing")
    sp.add_argument("--seed", type=int, default=0,
                    help="DMA completion order (0 = in-order)")
    sp.add_argument("--out", help="also write <out>.report.json and <out>.intervals.csv")

    sp = add("roofline", _cmd_roofline, "Simulate layers and plot them against "
             "the machine roofs (<out>.svg/.csv).")
    sp.add_argument("--config")
    sp.add_argument("--workload", required=True)
    sp.add_argument("--layers", help="comma-separated layer names (default: all)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("util", _cmd_util, "Per-module activity timeline of one run "
             "(<out>.svg/.csv).")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--stream")
    g.add_argument("--demo", choices=("small-conv", "deadlock"))
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("space", _cmd_space, "Sweep a config grid over a workload into a "
             "design-space CSV.", _GRID_SCHEMA)
    sp.add_argument("--grid", required=True, help="grid JSON")
    sp.add_argument("--workload", required=True)
    sp.add_argument("--layers")
    sp.add_argument("--out", help="output CSV path (default: stdout)")
    sp.add_argument("--alpha", type=float, default=1.0, help="area per MAC")
    sp.add_argument("--beta", type=float, default=0.05, help="area per scratchpad bit")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("fp-check", _cmd_fp_check, "Check a floorplan for overlap, spacing, "
             "duplicate-name, and bound violations.", _FP_SCHEMA)
    sp.add_argument("--floorplan", required=True, help="floorplan JSON")
    sp.add_argument("--tech", help="tech table JSON (macro dims)")
    sp.add_argument("--min-spacing", type=float, default=0.0,
                    help="required macro spacing in um")

    sp = add("fp-render", _cmd_fp_render, "Render a floorplan to SVG.", _FP_SCHEMA)
    sp.add_argument("--floorplan", required=True)
    sp.add_argument("--tech")
    sp.add_argument("--out", required=True, help="output SVG path")
    sp.add_argument("--highlight", action="store_true",
                    help="outline violating macros in red")
    sp.add_argument("--min-spacing", type=float, default=0.0)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (AcclabError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
