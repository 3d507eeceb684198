"""Command line interface: ``lfdepth {depth,eval,synth,epi-dump}``.

Exit codes: 0 success, 2 usage, 3 configuration error, 4 input/output error,
5 pipeline error (e.g. no usable EPI edges).
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import tomli_w
from PIL import Image, ImageDraw

from . import __version__, epi_edges, evaluate, io, pipeline, synth
from .config import PipelineConfig
from .diffusion import SolverConfig
from .lightfield import (DimensionMismatchError, GridLayout, LightFieldError, MissingViewError,
                         ParameterError, epi_stack, load_light_field, save_light_field, tomllib)

log = logging.getLogger("lfdepth")

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_PIPELINE = 5


def _load_lf(args):
    path = Path(args.layout) if args.layout else Path(args.input) / "layout.toml"
    layout = GridLayout.from_file(path) if args.layout or path.is_file() else None
    return load_light_field(args.input, layout)


def _read_mapping(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    return json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)


def build_config(args) -> PipelineConfig:
    """Config file (if any) overridden by explicit command line flags."""
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    d = cfg.to_dict()
    flags = {"dmax": "d_max", "seed": "seed", "refine_iters": "refine_iters",
             "sigma_s": "sigma_s", "sigma_d": "sigma_d", "sigma_c": "sigma_c",
             "bank_size": "bank_size"}
    for flag, key in flags.items():
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    solver = dict(d["solver"])
    if args.solver_tol is not None:
        solver["residual_tol"] = args.solver_tol
    if args.solver_max_iters is not None:
        solver["max_iters"] = args.solver_max_iters
    if args.preconditioner is not None:
        solver["preconditioner"] = args.preconditioner
    try:
        d["solver"] = SolverConfig(**solver)
    except TypeError as e:
        raise ParameterError(f"bad solver settings: {e}") from None
    d["workers"] = args.workers if args.workers is not None else (os.cpu_count() or 1)
    return PipelineConfig(**d)


def _write_json(path: Path, data) -> None:
    io.write_bytes_atomic(path, (json.dumps(data, indent=2, sort_keys=True) + "\n").encode())


def _write_csv(path: Path, header, rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    io.write_bytes_atomic(path, buf.getvalue().encode())


def cmd_depth(args) -> int:
    cfg = build_config(args)
    lf = _load_lf(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    mode = "naive" if args.naive else args.mode
    log.info("light field %dx%d views of %dx%d, mode %s", lf.n_t, lf.n_s, lf.w, lf.h, mode)
    res = pipeline.estimate_depth(lf, cfg, mode=mode)
    d = res.disparity.values
    io.write_pfm(out / "disparity.pfm", d)
    io.write_png(out / "preview.png", d, -cfg.d_max, cfg.d_max)
    if args.dump_confidence and res.weights is not None:
        io.write_png(out / "confidence.png", np.log10(res.weights.lambda_s))
    if args.dump_directional and res.D_f is not None:
        io.write_pfm(out / "D_f.pfm", res.D_f.values)
        io.write_pfm(out / "D_b.pfm", res.D_b.values)
    if args.dump_points:
        P = res.points
        lam = res.lambda_e if res.lambda_e is not None else np.zeros(len(P))
        sg = res.signs if res.signs is not None else np.zeros(len(P))
        rows = [(f"{P.ps[i, 0]:.4f}", f"{P.ps[i, 1]:.4f}", f"{P.pd[i]:.6f}", f"{P.grad[i, 0]:.4f}",
                 f"{P.grad[i, 1]:.4f}", int(P.degenerate[i]), int(P.flagged[i]), f"{lam[i]:.4f}",
                 int(sg[i])) for i in range(len(P))]
        _write_csv(out / "points.csv", ["x", "y", "disparity", "grad_x", "grad_y", "degenerate",
                                        "flagged", "lambda_e", "sign"], rows)
    diag = dict(res.diagnostics, version=__version__, config=cfg.to_dict(),
                paper_deviations=cfg.deviations())
    _write_json(out / "diag.json", diag)
    for stage, sec in diag["stage_seconds"].items():
        log.info("stage %-18s %.3fs", stage, sec)
    log.info("wrote %s", out / "disparity.pfm")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = io.read_pfm(args.pred)
    gt = io.read_pfm(args.gt)
    tol = tuple(int(t) for t in args.tolerances.split(",")) if args.tolerances else evaluate.DEFAULT_TOLERANCES
    rep = evaluate.compute_metrics(pred, gt, tol, args.edge_threshold)
    data = rep.to_dict()
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "metrics.json", data)
        io.write_png(out / "error.png", evaluate.error_image(rep, args.error_vmax), 0.0, 1.0)
        io.write_png(out / "normals.png", evaluate.normal_map(pred), 0.0, 1.0)
    print(json.dumps(data, sort_keys=True))
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.spec:
        spec = synth.SceneSpec.from_dict(_read_mapping(Path(args.spec)))
    else:
        spec = synth.preset(args.preset)
    lf, gt = synth.render(spec, args.seed)
    out = Path(args.output)
    layout = save_light_field(lf, out)
    io.write_pfm(out / "gt_disparity.pfm", gt.values)
    io.write_bytes_atomic(out / "layout.toml", tomli_w.dumps({"layout": layout.__dict__}).encode())
    io.write_bytes_atomic(out / "scene.toml", tomli_w.dumps({"scene": spec.to_dict()}).encode())
    log.info("rendered %dx%d views into %s", lf.n_t, lf.n_s, out)
    return EXIT_OK


def _draw_epi(pixels: np.ndarray, lines, scale: int) -> Image.Image:
    n, w = pixels.shape[:2]
    img = Image.fromarray(io.to_uint8(pixels, 0.0, 1.0)).resize((w * scale, n * scale), Image.NEAREST)
    img = img.convert("RGB")
    draw = ImageDraw.Draw(img)
    for ln in lines:
        colour = (255, 40, 40) if ln["visible"] else (60, 200, 60) if ln["kept"] else (120, 120, 255)
        y0, y1 = scale / 2, (n - 0.5) * scale
        draw.line([((ln["x_top"] + 0.5) * scale, y0), ((ln["x_bottom"] + 0.5) * scale, y1)],
                  fill=colour, width=1)
    return img


def cmd_epi_dump(args) -> int:
    cfg = build_config(args)
    lf = _load_lf(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    bank = epi_edges.FilterBank(cfg.d_max, cfg.bank_size)
    axes = epi_edges.AXES if args.axis == "both" else (args.axis,)
    ls = epi_edges.detect_all(lf, bank, cfg.tau_f, cfg.c, cfg.tau_v, cfg.response_threshold,
                              cfg.nms_radius, axes=axes)
    rows = [(epi_edges.AXES[int(ls.axis[i])], int(ls.slice_index[i]), f"{ls.x_top[i]:.4f}",
             f"{ls.x_bottom[i]:.4f}", f"{ls.disparity[i]:.6f}", f"{ls.strength[i]:.6f}",
             int(ls.kept[i]), int(ls.visible[i])) for i in range(len(ls))]
    _write_csv(out / "lines.csv", ["axis", "slice", "x_top", "x_bottom", "disparity", "strength",
                                   "kept", "visible"], rows)
    for axis in axes:
        rgb = epi_stack(lf, axis, space="rgb")
        code = epi_edges.AXES.index(axis)
        slices = args.slices if args.slices else [rgb.shape[0] // 2]
        for sl in slices:
            if not 0 <= sl < rgb.shape[0]:
                raise ParameterError(f"{axis} slice {sl} outside [0, {rgb.shape[0]})")
            sel = (ls.axis == code) & (ls.slice_index == sl)
            lines = [dict(x_top=ls.x_top[i], x_bottom=ls.x_bottom[i], kept=ls.kept[i],
                          visible=ls.visible[i]) for i in np.flatnonzero(sel)]
            img = _draw_epi(rgb[sl], lines, args.scale)
            with io.atomic_path(out / f"epi_{axis}_{sl:04d}.png") as tmp:
                img.save(tmp, format="PNG")
    log.info("%d candidate lines (%d visible) written to %s", len(ls), int(ls.visible.sum()), out)
    return EXIT_OK


def _add_input(p):
    p.add_argument("--input", "-i", required=True, help="directory holding the view grid")
    p.add_argument("--layout", help="TOML/JSON file describing the grid file names "
                                    "(default: layout.toml in the input directory, if present)")


def _add_pipeline_flags(p):
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", help="TOML/JSON pipeline config ([paper_defaults] / [pipeline] tables)")
    g.add_argument("--dmax", type=float, help="largest |disparity| searched by the filter bank")
    g.add_argument("--bank-size", type=int, help="number of filter-bank orientations (odd)")
    g.add_argument("--seed", type=int, help="seed of the refinement random search")
    g.add_argument("--refine-iters", type=int, help="random-search iterations per line")
    g.add_argument("--sigma-s", type=float, help="trilateral spatial sigma (px)")
    g.add_argument("--sigma-d", type=float, help="trilateral disparity sigma")
    g.add_argument("--sigma-c", type=float, help="trilateral colour sigma (LAB / 100)")
    g.add_argument("--solver-tol", type=float, help="relative residual tolerance")
    g.add_argument("--solver-max-iters", type=int, help="iteration cap of the CG solver")
    g.add_argument("--preconditioner", choices=("jacobi", "multigrid", "none"))
    g.add_argument("--workers", type=int,
                   help="threads for the two directional solves (default: logical cores, 1 = serial)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfdepth", description=__doc__.splitlines()[0],
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("depth", help="estimate central-view disparity",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_input(p)
    p.add_argument("--output", "-o", default="out", help="output directory")
    _add_pipeline_flags(p)
    p.add_argument("--naive", action="store_true", help="diffuse labels in place (ablation)")
    p.add_argument("--mode", choices=pipeline.MODES, default="bidirectional",
                   help="offset rule for the final solve")
    p.add_argument("--dump-confidence", action="store_true", help="write log10 smoothness weights PNG")
    p.add_argument("--dump-directional", action="store_true", help="write the D_f / D_b PFMs")
    p.add_argument("--dump-points", action="store_true", help="write the sparse labels as CSV")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("eval", help="compare a disparity PFM with ground truth",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--output", "-o", help="directory for metrics.json, error.png and normals.png")
    p.add_argument("--tolerances", help="comma separated boundary-recall tolerances in px")
    p.add_argument("--edge-threshold", type=float, default=evaluate.GT_EDGE_THRESHOLD)
    p.add_argument("--error-vmax", type=float, default=None, help="error mapped to white")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic light field with ground truth",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="scene TOML/JSON")
    src.add_argument("--preset", choices=sorted(synth.PRESETS))
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("epi-dump", help="write detected EPI lines as CSV and annotated PNGs",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_input(p)
    p.add_argument("--output", "-o", default="epi", help="output directory")
    p.add_argument("--axis", choices=("horizontal", "vertical", "both"), default="both")
    p.add_argument("--slices", type=int, nargs="*", help="EPI indices to draw (default: middle)")
    p.add_argument("--scale", type=int, default=4, help="PNG magnification")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_epi_dump)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    log.setLevel(logging.DEBUG if args.verbose > 1 else logging.INFO)
    try:
        return args.func(args)
    except pipeline.TexturelessError as e:
        log.error("pipeline: %s", e)
        return EXIT_PIPELINE
    except (ParameterError, tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        log.error("config: %s", e)
        return EXIT_CONFIG
    except (MissingViewError, DimensionMismatchError, io.PFMError, OSError) as e:
        log.error("io: %s", e)
        return EXIT_IO
    except LightFieldError as e:
        log.error("pipeline: %s", e)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
