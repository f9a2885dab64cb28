"""Command-line surface.

Subcommands: synth, decompose, unroll, init-bundle, metrics, selftest.
Exit codes: 0 success, 2 argument or validation error, 3 I/O or parse
error, 4 numerical failure, 5 selftest violation; every failure prints a
one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .admm import ModelParams, StoppingRule, admm_solve
from .errors import NumericalError, ParseError
from .imageio import read_image, read_manifest, write_manifest, write_pfm
from .metrics import acc, auc, confusion, cross_entropy, mcc
from .ops import make_diff_bank
from .pipeline import ChannelPlan, RunConfig, decompose_multichannel
from .selftest import run_selftest
from .synth import make_squares_scene
from .unroll import init_default, load_bundle, save_bundle


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError as exc:
        raise ValueError(f"--size must look like HxW, got {text!r}") from exc


def _parse_kernels(text: str) -> tuple[int, int]:
    family, _, rest = text.partition(":")
    if family != "diff":
        raise ValueError(f"unknown kernel family {family!r} (only 'diff:M,R')")
    try:
        m_str, r_str = rest.split(",")
        return int(m_str), int(r_str)
    except ValueError as exc:
        raise ValueError(f"--kernels must look like diff:M,R, got {text!r}") from exc


def _parse_channel_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok != "")


def _write_trace_csv(path, result) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("iteration,objective,primal_p,primal_q,dual\n")
        for i in range(result.iterations_run):
            fh.write(",".join([
                str(i + 1),
                _fmt(result.objective_trace[i]),
                _fmt(result.primal_residual_p[i]),
                _fmt(result.primal_residual_q[i]),
                _fmt(result.dual_residual[i]),
            ]) + "\n")


def _cmd_synth(args) -> int:
    h, w = _parse_size(args.size)
    scene = make_squares_scene(args.seed, h, w, args.squares, args.impulses,
                               args.amplitude)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, grid in (("image", scene.image), ("background", scene.background),
                       ("impulse_map", scene.impulse_map),
                       ("impulse_mask", scene.impulse_mask)):
        write_pfm(out / f"{name}.pfm", grid)
        entries.append((f"{name}.pfm", name, len(entries)))
    write_manifest(out, entries, h, w)
    print(f"wrote scene ({h}x{w}, {args.squares} squares, "
          f"{args.impulses} impulses) to {out}")
    return 0


def _load_alphas(args, M: int) -> np.ndarray:
    if not args.alpha:
        return np.full(M, 1.5 / M)
    if len(args.alpha) == 1:
        return np.full(M, args.alpha[0])
    if len(args.alpha) != M:
        raise ValueError(
            f"got {len(args.alpha)} --alpha values for {M} kernels (give 1 or {M})"
        )
    return np.asarray(args.alpha)


def _cmd_decompose(args) -> int:
    f = read_image(args.input)
    M, R = _parse_kernels(args.kernels)
    bank = make_diff_bank(M, R)
    params = ModelParams(
        alphas=_load_alphas(args, M), beta=args.beta,
        r_p=args.rp, r_q=args.rq,
        e2_mode="paper" if args.paper_e2 else "corrected",
    )
    result = admm_solve(f, bank, params, StoppingRule(args.iters, args.tol))
    if args.out_u:
        write_pfm(args.out_u, result.u)
    if args.out_v:
        write_pfm(args.out_v, result.v)
    if args.trace_csv:
        _write_trace_csv(args.trace_csv, result)
    k = result.kkt
    print(f"iterations={result.iterations_run} "
          f"objective={_fmt(result.objective_trace[-1])} "
          f"feasibility_p={_fmt(k.feasibility_p)} "
          f"feasibility_q={_fmt(k.feasibility_q)}")
    return 0


def _read_stack(path) -> tuple[np.ndarray, bool]:
    """Return (stack, is_multichannel) for an image file or manifest."""
    p = Path(path)
    if p.is_dir() or p.name == "manifest.json":
        stack, _ = read_manifest(p)
        return stack, True
    return read_image(p)[np.newaxis], False


def _cmd_unroll(args) -> int:
    bundle = load_bundle(args.bundle)
    stack, multi = _read_stack(args.input)
    n = stack.shape[0]
    if args.channels is not None:
        decompose_idx = _parse_channel_list(args.channels)
    else:
        passthrough = _parse_channel_list(args.passthrough or "")
        decompose_idx = tuple(i for i in range(n) if i not in passthrough)
    passthrough_idx = (_parse_channel_list(args.passthrough)
                       if args.passthrough is not None else ())
    plan = ChannelPlan(decompose_channels=decompose_idx,
                       passthrough_channels=passthrough_idx,
                       log_domain=args.log_domain)
    config = RunConfig(mode="unroll", bundle=bundle)
    U, V, stacked = decompose_multichannel(stack, plan, config)

    if not multi and (args.out_u or args.out_v):
        if args.out_u:
            write_pfm(args.out_u, U[0])
        if args.out_v:
            write_pfm(args.out_v, V[0])
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, k in enumerate(plan.decompose_channels):
            write_pfm(out / f"u_{k:03d}.pfm", U[i])
            entries.append((f"u_{k:03d}.pfm", "u", len(entries)))
        for i, k in enumerate(plan.decompose_channels):
            write_pfm(out / f"v_{k:03d}.pfm", V[i])
            entries.append((f"v_{k:03d}.pfm", "v", len(entries)))
        for k in plan.passthrough_channels:
            write_pfm(out / f"pass_{k:03d}.pfm", stack[k])
            entries.append((f"pass_{k:03d}.pfm", "passthrough", len(entries)))
        write_manifest(out, entries, stack.shape[1], stack.shape[2])
    print(f"decomposed {len(plan.decompose_channels)} channel(s) "
          f"through {bundle.L} layers; stacked width {stacked.shape[0]}")
    return 0


def _cmd_init_bundle(args) -> int:
    bundle = init_default(args.width, args.depth, args.radius)
    if args.paper_e2:
        from dataclasses import replace

        bundle = replace(bundle, e2_mode="paper")
    save_bundle(bundle, args.out)
    print(f"wrote bundle (M={args.width}, L={args.depth}, R={args.radius}) "
          f"to {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    scores = read_image(args.scores)
    truth = read_image(args.truth)
    region = read_image(args.region) if args.region else None
    pred = (scores >= args.threshold).astype(float)
    counts = confusion(pred, truth, region)
    row = [
        auc(scores, truth, region),
        acc(counts),
        mcc(counts),
        cross_entropy(scores, truth, region),
    ]
    print("auc,acc,mcc,cross_entropy")
    print(",".join(_fmt(x) for x in row))
    return 0


def _cmd_selftest(args) -> int:
    failures = 0
    for name, passed, detail in run_selftest():
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        failures += 0 if passed else 1
    if failures:
        print(f"error: selftest failed {failures} check(s)", file=sys.stderr)
        return 5
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsedecomp",
        description="Sparse-layer image decomposition toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--size", default="16x16", help="image size HxW")
    p.add_argument("--squares", type=int, default=3)
    p.add_argument("--impulses", type=int, default=8)
    p.add_argument("--amplitude", type=float, default=0.6)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("decompose", help="run the iterative solver on an image")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, action="append",
                   help="kernel weight; repeat per kernel or give one for all")
    p.add_argument("--beta", type=float, default=0.07)
    p.add_argument("--rp", type=float, default=0.07)
    p.add_argument("--rq", type=float, default=0.07)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--kernels", default="diff:2,1", help="kernel bank, diff:M,R")
    p.add_argument("--paper-e2", action="store_true",
                   help="use the uncorrected v-block operator (comparison mode)")
    p.add_argument("--trace-csv", default=None)
    p.add_argument("--out-u", default=None)
    p.add_argument("--out-v", default=None)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("unroll", help="run the unrolled forward pass")
    p.add_argument("input", help="image file, or a manifest/directory for stacks")
    p.add_argument("--bundle", required=True)
    p.add_argument("--log-domain", action="store_true")
    p.add_argument("--channels", default=None,
                   help="comma-separated channel indices to decompose")
    p.add_argument("--passthrough", default=None,
                   help="comma-separated channel indices to pass through")
    p.add_argument("--out-u", default=None)
    p.add_argument("--out-v", default=None)
    p.add_argument("--out-dir", default=None,
                   help="directory for the stacked multichannel result")
    p.set_defaults(func=_cmd_unroll)

    p = sub.add_parser("init-bundle", help="write a default parameter bundle")
    p.add_argument("--width", type=int, default=4, help="kernels per layer (M)")
    p.add_argument("--depth", type=int, default=16, help="layer count (L)")
    p.add_argument("--radius", type=int, default=2, help="kernel radius (R)")
    p.add_argument("--paper-e2", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_init_bundle)

    p = sub.add_parser("metrics", help="score a prediction against ground truth")
    p.add_argument("--scores", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--region", default=None)
    p.add_argument("--threshold", type=float, default=0.5,
                   help="binarization threshold for ACC/MCC")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("selftest", help="run the built-in oracle suite")
    p.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
