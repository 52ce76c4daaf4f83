"""Four-preset throughput comparison: CSV and SVG chart, plus per-layer cost breakdowns."""

import argparse
from pathlib import Path

from sysacc.archspec import preset
from sysacc.bench import ordering_failures, run_suite, to_csv, to_svg
from sysacc.bench.suite import STRATEGY_FOR, SUITE
from sysacc.nnir import build_resnet20, random_blob
from sysacc.vm import CostModel, compile_model, simulate_cost


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results")
    ap.add_argument("--power-watts", type=float)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = build_resnet20(10)
    blob = random_blob(g, args.seed)
    rows = run_suite(g, blob)
    (out / "throughput.csv").write_text(to_csv(rows, args.power_watts))
    (out / "throughput.svg").write_text(to_svg(rows))
    for name in SUITE:
        cfg = preset(name)
        _, prog = compile_model(g, blob, cfg, STRATEGY_FOR[name])
        (out / f"layers_{name}.csv").write_text(simulate_cost(prog, CostModel.from_arch(cfg)).to_csv())
    print(to_csv(rows, args.power_watts), end="")
    fails = ordering_failures(rows)
    print("ordering:", "ok" if not fails else "; ".join(fails))


if __name__ == "__main__":
    main()
