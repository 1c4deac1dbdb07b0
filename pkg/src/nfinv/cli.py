"""Command-line entry points.

Verbs: make-scenario, simulate, invert, svd, render, report.
Exit codes: 0 success, 2 manifest/schema violation (the offending field
path is printed), 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from nfinv.errors import ManifestError, SolverError


def _add_common_overrides(p: argparse.ArgumentParser):
    p.add_argument("--method", choices=["nfs", "conventional"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)


def _apply_overrides(man: dict, args) -> dict:
    if getattr(args, "method", None) is not None:
        man["method"] = args.method
    if getattr(args, "seed", None) is not None:
        man["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        man["epochs"] = args.epochs
    return man


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfinv",
        description="Neural-field reparameterized 2D geophysical inversion")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("make-scenario",
                       help="write a fully resolved default manifest")
    p.add_argument("--case", type=int, required=True, choices=[1, 2, 3, 4])
    p.add_argument("--method", choices=["nfs", "conventional"],
                   default="nfs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full", action="store_true",
                   help="full-scale configuration (default desk scale)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate",
                       help="forward-model a manifest: truth + data files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("invert", help="run an inversion end to end")
    p.add_argument("--manifest", required=True)
    _add_common_overrides(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("svd",
                       help="weight-Jacobian SVD of a saved checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--mode", choices=["auto", "exact", "randomized"],
                   default="auto")
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="render a grid CSV to a PNG heatmap")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vmin", type=float, default=None)
    p.add_argument("--vmax", type=float, default=None)
    p.add_argument("--scale", type=int, default=8)

    p = sub.add_parser("report", help="print metrics of finished runs")
    p.add_argument("dirs", nargs="+")
    return parser


def _verb_make_scenario(args) -> int:
    from nfinv.manifest import default_manifest, save_manifest
    man = default_manifest(args.case, method=args.method, seed=args.seed,
                           desk_scale=not args.full)
    save_manifest(man, args.out)
    print(f"wrote {args.out}")
    return 0


def _verb_simulate(args) -> int:
    from nfinv.manifest import load_manifest
    from nfinv.runner import simulate_case
    man = load_manifest(args.manifest)
    if args.seed is not None:
        man["seed"] = args.seed
    info = simulate_case(man, args.out)
    print(f"simulated {info['n_data']} data into {info['out_dir']}")
    return 0


def _verb_invert(args) -> int:
    from nfinv.manifest import load_manifest
    from nfinv.runner import run_case
    man = _apply_overrides(load_manifest(args.manifest), args)
    metrics = run_case(man, args.out)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return 0


def _verb_svd(args) -> int:
    from nfinv.encoding import EncodingConfig, encode
    from nfinv.manifest import load_manifest, sub_seed
    from nfinv.neural_field import load_checkpoint
    from nfinv.runner import assemble
    from nfinv.svd_analysis import analyze_trained_network
    from nfinv.mesh import normalized_centers

    man = load_manifest(args.manifest)
    asm = assemble(man)
    enc_cfg = man["encoding"]
    lo, hi = enc_cfg["coord_range"]
    grid = normalized_centers(asm.mesh, lo, hi)
    config = EncodingConfig(
        kind=enc_cfg["kind"], m=enc_cfg.get("m", 8),
        b_rows=enc_cfg.get("b_rows", 128), b_std=enc_cfg.get("b_std", 0.5),
        seed=enc_cfg.get("seed", sub_seed(man["seed"], "encoding")))
    Z = encode(config, grid)
    mlp, _ = load_checkpoint(args.checkpoint)
    result = analyze_trained_network(
        mlp, Z, k=args.k, grid_shape=(asm.mesh.nx_core, asm.mesh.nz_core),
        out_dir=args.out, mode=args.mode,
        seed=sub_seed(man["seed"], "sketch"),
        dx=asm.mesh.dx_core, dz=asm.mesh.dz_core)
    print(f"top singular values: {[round(float(v), 6) for v in result.values[:10]]}")
    return 0


def _verb_render(args) -> int:
    from nfinv.render import render_heatmap
    render_heatmap(args.grid, args.out, vmin=args.vmin, vmax=args.vmax,
                   scale=args.scale)
    print(f"wrote {args.out}")
    return 0


def _verb_report(args) -> int:
    rows = []
    for d in args.dirs:
        path = os.path.join(d, "metrics.json")
        with open(path) as f:
            m = json.load(f)
        rows.append((d, m))
    print(f"{'run':<28} {'case':>4} {'method':>12} {'rmse':>12} "
          f"{'chi2':>10} {'epochs':>7}")
    for d, m in rows:
        print(f"{d:<28} {m['case']:>4} {m['method']:>12} "
              f"{m['rmse']:>12.5g} {m['chi2_per_datum']:>10.4g} "
              f"{m['epochs_run']:>7}")
    return 0


_VERBS = {
    "make-scenario": _verb_make_scenario,
    "simulate": _verb_simulate,
    "invert": _verb_invert,
    "svd": _verb_svd,
    "render": _verb_render,
    "report": _verb_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _VERBS[args.verb](args)
    except ManifestError as exc:
        print(f"manifest error at {exc.field}: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
