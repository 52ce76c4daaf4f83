"""Fixed-point vs float agreement on random inputs, for grid-aligned and raw random weights."""

import argparse

import numpy as np

from sysacc.archspec import preset
from sysacc.fxp import dot_error_bound
from sysacc.nnir import build_resnet20, random_blob, reference_forward
from sysacc.vm import compile_model, run


def measure(g, blob, cfg, n, seed):
    _, prog = compile_model(g, blob, cfg)
    rng = np.random.default_rng(seed)
    agree, errs = 0, []
    for _ in range(n):
        x = rng.uniform(0, 1, (1, 32, 32, 3)).astype(np.float32)
        ref = reference_forward(g, blob, x)
        y, _ = run(prog, cfg, x)
        agree += int(np.argmax(y) == np.argmax(ref))
        errs.append(float(np.abs(y - ref).max()))
    return agree, max(errs), float(np.mean(errs))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--inputs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--weights-seed", type=int, default=0)
    args = ap.parse_args()
    cfg = preset("baseline")
    g = build_resnet20(10)
    bound = dot_error_bound(g.nodes[-1].weights.shape[0], cfg.fmt)
    print(f"bound for the final layer: {bound:.5f}")
    for label, grid in (("grid-aligned", 8), ("raw", None)):
        blob = random_blob(g, args.weights_seed, grid_bits=grid)
        agree, worst, mean = measure(g, blob, cfg, args.inputs, args.seed)
        print(f"{label:13s} agreement {agree}/{args.inputs}  max |diff| {worst:.5f}  mean {mean:.5f}")


if __name__ == "__main__":
    main()
