"""Command-line entry point.

Exit codes: 0 success, 1 infeasible, 2 I/O or parse error, 3 assertion or ordering failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from sysacc.archspec import DEVICES, PRESETS, XCZU7EV, ArchError, load_arch, load_device, preset, validate
from sysacc.bench.resources import estimate_resources
from sysacc.bench.suite import (
    REFERENCE_FPS,
    STRATEGY_FOR,
    efficiency,
    ordering_failures,
    run_suite,
    to_csv,
    to_svg,
)
from sysacc.fxp import AccumulatorOverflow
from sysacc.nnir import build_resnet20, load_model, random_blob, reference_forward, save_model
from sysacc.nnir.graph import GraphError
from sysacc.scheduler import Infeasible, Strategy, choose_strategy, dump
from sysacc.vm.cost import CostModel, run_inference_loop, simulate_cost
from sysacc.vm.emit import compile_model
from sysacc.vm.isa import Program
from sysacc.vm.machine import MachineError, run

OK, INFEASIBLE, IO_ERROR, CHECK_FAILED = 0, 1, 2, 3


class CheckFailed(Exception):
    pass


def _arch(args):
    if getattr(args, "arch", None):
        return load_arch(args.arch)
    return preset(args.preset or "baseline")


def _device(args):
    if getattr(args, "device", None):
        if args.device in DEVICES:
            return DEVICES[args.device]
        return load_device(args.device)
    return XCZU7EV


def _strategy(args, g, cfg) -> Strategy:
    s = getattr(args, "strategy", None)
    if s == "auto":
        return choose_strategy(g, cfg)
    if s:
        return Strategy(s)
    if getattr(args, "preset", None) and not getattr(args, "arch", None):
        return STRATEGY_FOR[args.preset]
    return Strategy.PARTITIONED_WEIGHT_STATIONARY


def _model(args):
    """Load ``--model``/``--weights`` or synthesise ResNet20 from ``--seed``."""
    manifest = getattr(args, "model", None)
    if manifest:
        blob = args.weights or str(Path(manifest).with_suffix(".bin"))
        return load_model(manifest, blob)
    g = build_resnet20(10)
    if getattr(args, "weights", None):
        from sysacc.nnir.io import check_blob

        blob = Path(args.weights).read_bytes()
        check_blob(g, blob)
        return g, blob
    return g, random_blob(g, args.seed)


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- subcommands -------------------------------------------------------------

def cmd_gen_model(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = build_resnet20(args.classes)
    save_model(g, random_blob(g, args.seed), out / "resnet20.json", out / "resnet20.bin")
    print(f"wrote {out / 'resnet20.json'} and {out / 'resnet20.bin'} "
          f"({len(g.nodes)} nodes, {len(g.weighted())} weighted layers)")
    return OK


def cmd_compile(args):
    cfg = _arch(args)
    g, blob = _model(args)
    strategy = _strategy(args, g, cfg)
    schedules, program = compile_model(g, blob, cfg, strategy)
    program.save(args.output)
    if args.report:
        _write(args.report, dump(schedules, cfg))
    print(f"{args.output}: {len(program.instructions)} instructions, strategy {strategy.value}")
    return OK


def cmd_exec(args):
    cfg = _arch(args)
    program = Program.load(args.program)
    shape = tuple(program.input.shape)
    if args.input:
        x = np.load(args.input).astype(np.float32).reshape(shape)
    else:
        x = np.random.default_rng(args.seed).uniform(0.0, 1.0, shape).astype(np.float32)
    y, st = run(program, cfg, x)
    if args.output:
        np.save(args.output, y)
    print("output:", " ".join(f"{v:.6f}" for v in y.ravel()))
    print(f"argmax {int(np.argmax(y))}")
    if args.model:
        g, blob = _model(args)
        ref = reference_forward(g, blob, x)
        diff = float(np.abs(y - ref).max())
        print(f"oracle argmax {int(np.argmax(ref))} max |diff| {diff:.6f}")
        if args.tolerance is not None and diff > args.tolerance:
            raise CheckFailed(f"max |diff| {diff} exceeds tolerance {args.tolerance}")
    return OK


def cmd_simulate(args):
    cfg = _arch(args)
    program = Program.load(args.program)
    cost = CostModel.from_arch(cfg, args.overhead, args.port_parallel)
    rep = simulate_cost(program, cost)
    _write(args.output, rep.to_csv())
    return OK


def cmd_bench(args):
    g, blob = _model(args)
    dev = _device(args)
    rows = run_suite(g, blob, dev)
    csv_text = to_csv(rows, args.power_watts)
    _write(args.csv, csv_text)
    if args.svg:
        Path(args.svg).write_text(to_svg(rows))
    if args.csv not in (None, "-"):
        for r in rows:
            fps = f"{float(r.fps):.2f}" if r.ok else r.error
            print(f"{r.preset:14s} {r.strategy:30s} fps {fps} (reference {REFERENCE_FPS[r.preset]})")
    if args.power_watts is not None:
        print(f"efficiency uses supplied power {args.power_watts} W; "
              f"reference check 21.12 GOP/s / 5.21 W = {float(efficiency(21.12, 5.21)):.2f} GOP/s/W")
    if args.cifar:
        from sysacc.nnir.cifar import iter_test_set

        name = "uram_strategy"
        cfg = preset(name)
        _, program = compile_model(g, blob, cfg, STRATEGY_FOR[name])
        res = run_inference_loop(program, cfg, iter_test_set(args.cifar, args.limit), log=print)
        print(f"cifar: {res.images} images, accuracy {float(res.accuracy):.4f}, "
              f"mean fps {float(res.mean_fps):.2f}")
    fails = ordering_failures(rows)
    if fails:
        raise CheckFailed("; ".join(fails))
    return OK


def cmd_resources(args):
    cfg, dev = _arch(args), _device(args)
    rep = estimate_resources(cfg, dev)
    print(f"device {dev.name}")
    for name, used in rep.rows():
        cap = {"dsp": dev.dsp_slices, "bram36": dev.bram36_blocks, "uram": dev.uram_blocks,
               "lut": dev.luts}[name]
        print(f"{name:7s} {used:8d} / {cap}")
    print(f"fits {rep.fits}")
    return OK if rep.fits else INFEASIBLE


def cmd_validate(args):
    cfg = load_arch(args.file) if args.file else _arch(args)
    problems = validate(cfg, _device(args))
    for p in problems:
        print(p)
    if not problems:
        print("ok")
    return INFEASIBLE if problems else OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sysacc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def arch_flags(sp):
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--arch", help="architecture file (flat JSON)")

    def model_flags(sp):
        sp.add_argument("--model", help="model manifest (JSON)")
        sp.add_argument("--weights", help="weight blob; defaults to the manifest path with .bin")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("gen-model", help="write a random-weight ResNet20 manifest and blob")
    sp.add_argument("-o", "--out", default=".")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--classes", type=int, default=10)
    sp.set_defaults(fn=cmd_gen_model)

    sp = sub.add_parser("compile", help="schedule and emit a program")
    arch_flags(sp)
    model_flags(sp)
    sp.add_argument("--strategy", choices=[s.value for s in Strategy] + ["auto"])
    sp.add_argument("-o", "--output", default="program.bin")
    sp.add_argument("--report", help="write the schedule tree here ('-' for stdout)")
    sp.set_defaults(fn=cmd_compile)

    sp = sub.add_parser("exec", help="run a program on one input")
    sp.add_argument("program")
    arch_flags(sp)
    model_flags(sp)
    sp.add_argument("--input", help=".npy NHWC tensor; random uniform [0,1) from --seed otherwise")
    sp.add_argument("-o", "--output", help="write the output tensor (.npy)")
    sp.add_argument("--tolerance", type=float, help="fail (exit 3) when the oracle diff exceeds this")
    sp.set_defaults(fn=cmd_exec)

    sp = sub.add_parser("simulate", help="cycle-approximate cost report (CSV)")
    sp.add_argument("program")
    arch_flags(sp)
    sp.add_argument("--overhead", type=int, default=4, help="cycles per instruction")
    sp.add_argument("--port-parallel", action="store_true")
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("bench", help="four-preset suite")
    model_flags(sp)
    sp.add_argument("--device")
    sp.add_argument("--power-watts", type=float)
    sp.add_argument("--csv", help="CSV path ('-' or omitted: stdout)")
    sp.add_argument("--svg")
    sp.add_argument("--cifar", help="directory holding the CIFAR-10 binary test batch")
    sp.add_argument("--limit", type=int)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("resources", help="FPGA resource estimate")
    arch_flags(sp)
    sp.add_argument("--device")
    sp.set_defaults(fn=cmd_resources)

    sp = sub.add_parser("validate", help="lint an architecture file against a device")
    sp.add_argument("file", nargs="?")
    arch_flags(sp)
    sp.add_argument("--device")
    sp.set_defaults(fn=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Infeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return INFEASIBLE
    except (CheckFailed, AssertionError, AccumulatorOverflow, MachineError) as e:
        print(f"check failed: {e}", file=sys.stderr)
        return CHECK_FAILED
    except (OSError, ArchError, GraphError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
