"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--size 128] [--repeat 3] [--json out.json]

Inputs come from a synthetic two-plane light field so the line counts and
point densities match what the pipeline sees.
"""
import argparse
import json
import math
import timeit

import numpy as np

from lfdepth import epi_edges, kernels, refine, synth
from lfdepth.lightfield import epi_stack


def make_inputs(size):
    lf, _ = synth.render(synth.two_plane_scene(w=size, h=size), 0)
    bank = epi_edges.FilterBank()
    ls = epi_edges.detect_all(lf, bank, axes=("horizontal",))
    stack = epi_stack(lf, "horizontal").astype(np.float64)
    gx, gy = epi_edges._epi_gradients(stack)
    L = np.ascontiguousarray(stack[..., 0])
    table = refine.entropy_table(L.shape[1])
    iters = 10
    props = refine._proposals(0, np.arange(len(ls)), iters)
    radii = refine.search_radii(0.15, 0.88, iters)
    pts = refine.project_to_central(epi_edges.collect_sparse_lines(lf, bank), lf)
    return {
        "line_alignment": (gx, gy, ls.slice_index, ls.x_top, ls.x_bottom,
                           math.cos(math.pi / 13), math.cos(math.pi / 10)),
        "line_entropy": (L, ls.slice_index, ls.x_top, ls.x_bottom, 32, table),
        "anneal_lines": (L, ls.slice_index, ls.x_top, ls.x_bottom, props, radii, 32, table),
        "trilateral": (pts.ps, pts.pd, pts.pc, 10.0, 0.1, 0.5, 30.0),
    }, len(ls), len(pts)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args()

    inputs, n_lines, n_pts = make_inputs(args.size)
    impls = kernels.backends()
    print(f"{args.size}x{args.size}, 9x9 views: {n_lines} lines, {n_pts} points")
    print(f"{'kernel':16s}" + "".join(f"{name:>12s}" for name in impls) + f"{'speedup':>10s}")
    results = {}
    for kname, kargs in inputs.items():
        row = {}
        for bname, mod in impls.items():
            fn = getattr(mod, kname)
            fn(*kargs)  # warm up
            row[bname] = min(timeit.repeat(lambda: fn(*kargs), number=1, repeat=args.repeat))
        results[kname] = row
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{kname:16s}" + "".join(f"{row[b] * 1e3:10.2f}ms" for b in impls) + f"{speed:9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"size": args.size, "lines": n_lines, "points": n_pts, "seconds": results}, fh,
                      indent=2)


if __name__ == "__main__":
    main()
