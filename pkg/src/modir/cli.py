"""Command line interface.

Subcommands: synth, train-mo, train-grid, genmed, evaluate, export.
Exit codes: 0 success, 1 usage error, 2 runtime error, 3 bundle integrity
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_INTEGRITY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _on_off(value: str) -> bool:
    v = value.lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError("expected on|off, got %r" % value)


def _ref_tuple(value: str) -> tuple[float, ...]:
    try:
        parts = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated floats, got %r" % value)
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("reference point needs 2 or 3 components")
    return parts


def build_parser() -> _Parser:
    parser = _Parser(prog="modir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_train=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if with_train:
            p.add_argument("--p", type=int, default=27, help="number of solutions")
            p.add_argument("--iters", type=int, default=2000)
            p.add_argument("--lr", type=float, default=1e-4)
            p.add_argument("--ref", type=_ref_tuple, action="append", default=None,
                           help="reference point x,y[,z]; genmed accepts it repeatedly")
            p.add_argument("--guidance", type=_on_off, default=True, metavar="on|off")
            p.add_argument("--share-encoder", type=_on_off, default=True, metavar="on|off")
            p.add_argument("--data", type=Path, default=None,
                           help="dataset directory written by `modir synth`")

    p_synth = sub.add_parser("synth", help="generate and save a synthetic dataset")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", type=Path, required=True)
    p_synth.add_argument("--count", type=int, default=10)
    p_synth.add_argument("--size", type=int, default=64)
    p_synth.add_argument("--organs", type=int, default=2)
    p_synth.add_argument("--magnitude", type=float, default=4.0)
    p_synth.add_argument("--noise", type=float, default=0.005)
    p_synth.add_argument("--conflict", type=_on_off, default=True, metavar="on|off")

    common(sub.add_parser("train-mo", help="hypervolume-weighted multi-objective training"))
    common(sub.add_parser("train-grid", help="fixed weight-grid baseline training"))

    p_gen = sub.add_parser("genmed", help="analytic benchmark run")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", type=Path, required=True)
    p_gen.add_argument("--p", type=int, default=25)
    p_gen.add_argument("--iters", type=int, default=10000)
    p_gen.add_argument("--lr", type=float, default=1e-4)
    p_gen.add_argument("--ref", type=_ref_tuple, action="append", default=None)

    p_eval = sub.add_parser("evaluate", help="recompute metrics from a bundle")
    p_eval.add_argument("bundle", type=Path)
    p_eval.add_argument("--out", type=Path, default=None, help="write the report JSON here")

    p_export = sub.add_parser("export", help="re-render UI-facing assets from a bundle")
    p_export.add_argument("bundle", type=Path)
    p_export.add_argument("--out", type=Path, default=None,
                          help="directory for re-rendered assets (default: in place)")
    return parser


def _dataset_config(args):
    from modir.synth import SynthConfig

    return SynthConfig(
        seed=args.seed,
        size=getattr(args, "size", 64),
        organs=getattr(args, "organs", 2),
        magnitude=getattr(args, "magnitude", 4.0),
        noise=getattr(args, "noise", 0.005),
        conflict=1.0 if getattr(args, "conflict", True) else 0.0,
    )


def cmd_synth(args) -> int:
    from modir.bundle import BundleWriter
    from modir.synth import dataset

    config = _dataset_config(args)
    pairs, train_idx, eval_idx = dataset(config, args.count)
    writer = BundleWriter(args.out)
    for i, pair in enumerate(pairs):
        pd = "pairs/pair_%03d" % i
        writer.write_png(f"{pd}/source.png", pair.source_image)
        writer.write_png(f"{pd}/target.png", pair.target_image)
        for k in range(pair.source_mask.shape[1]):
            writer.write_png(f"{pd}/source_mask_{k}.png", pair.source_mask[0, k])
            writer.write_png(f"{pd}/target_mask_{k}.png", pair.target_mask[0, k])
        writer.write_json(
            f"{pd}/landmarks.json",
            {"target": pair.target_landmarks.tolist(), "source": pair.source_landmarks.tolist()},
        )
        writer.write_dvf(f"{pd}/gt_dvf.dvf", pair.gt_dvf)
    writer.seal(
        {
            "mode": "dataset",
            "count": args.count,
            "train_indices": train_idx,
            "eval_indices": eval_idx,
            "generator": {
                "seed": config.seed,
                "size": config.size,
                "organs": config.organs,
                "magnitude": config.magnitude,
                "noise": config.noise,
                "conflict": config.conflict,
            },
        }
    )
    print("dataset with %d pairs written to %s" % (args.count, args.out))
    return EXIT_OK


def _load_training_data(args):
    from modir.bundle import Bundle
    from modir.synth import SynthConfig, dataset

    if args.data is not None:
        b = Bundle(args.data)
        if b.manifest.get("mode") != "dataset":
            raise ValueError("%s is not a dataset bundle" % args.data)
        gen = b.manifest["generator"]
        config = SynthConfig(
            seed=gen["seed"],
            size=gen["size"],
            organs=gen["organs"],
            magnitude=gen["magnitude"],
            noise=gen["noise"],
            conflict=gen["conflict"],
        )
        pairs, train_idx, eval_idx = dataset(config, b.manifest["count"])
    else:
        pairs, train_idx, eval_idx = dataset(SynthConfig(seed=args.seed), 10)
    return [pairs[i] for i in train_idx], [pairs[i] for i in eval_idx]


def _train_config(args):
    from modir.training import TrainConfig

    refs = args.ref
    if refs is not None and len(refs) > 1:
        raise ValueError("training accepts a single --ref")
    ref = refs[0] if refs else ((1.0, 1.0, 1.0) if args.guidance else (1.0, 1.0))
    return TrainConfig(
        p=args.p,
        iterations=args.iters,
        lr=args.lr,
        ref_point=ref,
        guidance=args.guidance,
        share_encoder=args.share_encoder,
        seed=args.seed,
    )


def cmd_train(args, mode: str) -> int:
    from modir.bundle import write_run_bundle
    from modir.training import train_grid, train_mo

    config = _train_config(args)
    train_pairs, eval_pairs = _load_training_data(args)
    trainer = train_mo if mode == "mo" else train_grid
    params, trace = trainer(config, train_pairs, eval_pairs)
    manifest = write_run_bundle(params, trace, eval_pairs, args.out)
    print(
        "%s run complete: %d solutions, HV %.6f, bundle at %s"
        % (mode, config.p, trace.records[-1].hv, args.out)
    )
    return EXIT_OK


def cmd_genmed(args) -> int:
    from modir.bundle import write_genmed_bundle
    from modir.training import train_genmed

    refs = args.ref or [(10.0, 10.0, 10.0), (2.2, 2.2, 2.2)]
    for r in refs:
        if len(r) != 3:
            raise ValueError("genmed reference points need 3 components")
    traces = train_genmed(p=args.p, iterations=args.iters, lr=args.lr, ref_points=refs, seed=args.seed)
    write_genmed_bundle(traces, args.out)
    print("genmed run complete: %d traces written to %s" % (len(traces), args.out))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from modir.bundle import Bundle, load_pair
    from modir.metrics import dice_score, folding_percent, tre
    from modir.synth import warp_numpy

    b = Bundle(args.bundle)
    if b.manifest.get("mode") not in ("mo", "grid"):
        raise ValueError("evaluate expects a training-run bundle")
    report = {"bundle": str(args.bundle), "pairs": []}
    for pd in b.manifest["pairs"]:
        pair = load_pair(b, pd)
        rows = []
        for j in range(b.manifest["p"]):
            sd = "%s/solutions/sol_%02d" % (pd, j)
            u = b.dvf(f"{sd}/dvf.dvf")
            warped_mask = warp_numpy(pair.source_mask, u)
            rows.append(
                {
                    "id": j,
                    "tre": tre(u, pair.target_landmarks, pair.source_landmarks).mean,
                    "folding_pct": folding_percent(u),
                    "dice_pct": dice_score(warped_mask, pair.target_mask).mean,
                }
            )
        report["pairs"].append({"pair": pd, "solutions": rows})
    text = json.dumps(report, indent=1)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_export(args) -> int:
    from modir.bundle import Bundle, BundleWriter, save_image_png, _save_rgb
    from modir.render import overlay_quiver

    b = Bundle(args.bundle)
    if b.manifest.get("mode") not in ("mo", "grid"):
        raise ValueError("export expects a training-run bundle")
    outdir = args.out or args.bundle
    writer = BundleWriter(Path(outdir))
    for pd in b.manifest["pairs"]:
        source = b.image(f"{pd}/source.png")
        for j in range(b.manifest["p"]):
            sd = "%s/solutions/sol_%02d" % (pd, j)
            u = b.dvf(f"{sd}/dvf.dvf")
            _save_rgb(writer.path(f"{sd}/overlay.png"), overlay_quiver(source, u))
    print("assets re-rendered under %s" % outdir)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    from modir.bundle import IntegrityError, SchemaVersionError

    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "train-mo":
            return cmd_train(args, "mo")
        if args.command == "train-grid":
            return cmd_train(args, "grid")
        if args.command == "genmed":
            return cmd_genmed(args)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        if args.command == "export":
            return cmd_export(args)
        return EXIT_USAGE
    except (IntegrityError, SchemaVersionError) as exc:
        print("integrity error: %s" % exc, file=sys.stderr)
        return EXIT_INTEGRITY
    except (ValueError, OSError, RuntimeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
