"""Stream the CIFAR-10 binary test set through the fixed-point model and report accuracy and FPS."""

import argparse

from sysacc.archspec import preset
from sysacc.bench.suite import STRATEGY_FOR
from sysacc.nnir import load_model
from sysacc.nnir.cifar import iter_test_set
from sysacc.vm import compile_model, run_inference_loop


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("model", help="model manifest (JSON)")
    ap.add_argument("weights", help="float32 weight blob matching the manifest")
    ap.add_argument("cifar", help="directory with test_batch.bin, or the file itself")
    ap.add_argument("--preset", default="uram_strategy")
    ap.add_argument("--limit", type=int)
    args = ap.parse_args()
    g, blob = load_model(args.model, args.weights)
    cfg = preset(args.preset)
    _, prog = compile_model(g, blob, cfg, STRATEGY_FOR[args.preset])
    res = run_inference_loop(prog, cfg, iter_test_set(args.cifar, args.limit), log=print)
    print(f"{res.images} images  accuracy {float(res.accuracy):.4f}  mean fps {float(res.mean_fps):.2f}")


if __name__ == "__main__":
    main()
