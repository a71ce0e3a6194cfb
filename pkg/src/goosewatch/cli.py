"""Command-line surface for the detection pipeline.

Subcommands map one-to-one onto file-based pipeline stages::

    goosewatch synth    scenario.json out_dir/        -> capture.pcap + labels.csv
    goosewatch extract  capture.pcap -o features.csv  [--labels labels.csv]
    goosewatch train    features.csv -o profile.json
    goosewatch detect   profile.json features.csv out_dir/
    goosewatch eval     verdicts.csv -o report.csv
    goosewatch latent   profile.json features.csv -o latent.csv

Exit codes: 0 ok, 2 configuration error, 3 training-purity violation,
4 schema mismatch, 5 I/O failure. Every command is deterministic given
identical inputs and seeds; GOOSEWATCH_SEED provides the default seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from goosewatch import __version__, detector, evt, features, pcapio, synth, windows
from goosewatch import autoencoder as ae
from goosewatch.provenance import config_hash, header_line

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PURITY = 3
EXIT_SCHEMA = 4
EXIT_IO = 5

DEFAULT_T_W = 1.0
DEFAULT_U_QUANTILE = 0.98
DEFAULT_RISK = 1e-3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _default_seed() -> int:
    return int(os.environ.get("GOOSEWATCH_SEED", "0"))


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise CliError(f"bad layer dims {text!r}", EXIT_CONFIG) from None
    if len(dims) < 3:
        raise CliError("need at least input,bottleneck,output dims", EXIT_CONFIG)
    return dims


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    try:
        scenario = synth.load_scenario(args.scenario)
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CliError(
            f"{args.scenario}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}",
            EXIT_CONFIG,
        ) from exc
    except synth.ScenarioError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc

    try:
        frames, labels = synth.run_scenario(scenario)
    except synth.ScenarioError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pcap_path = out_dir / "capture.pcap"
    labels_path = out_dir / "labels.csv"
    meta = pcapio.write_pcap(frames, pcap_path)
    windows.save_intervals(labels, labels_path, [header_line(scenario)])
    print(f"wrote {meta.frame_count} frames to {pcap_path} "
          f"and {len(labels)} intervals to {labels_path}")
    return EXIT_OK


def cmd_extract(args) -> int:
    config = {
        "command": "extract",
        "t_w": args.tw,
        "stride": args.stride,
        "scope": args.scope,
    }
    try:
        frames, meta = pcapio.read_goose(args.pcap)
    except (pcapio.BadMagic, pcapio.BadLinkType) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    try:
        wins = windows.build_windows(frames, args.tw, args.stride)
        if args.labels:
            intervals = windows.load_intervals(args.labels)
            wins = windows.label_windows(wins, intervals)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    fm = features.assemble(wins, scope=args.scope)
    features.save_matrix(fm, args.out, [header_line(config)])
    print(f"{meta.goose_count}/{meta.frame_count} GOOSE frames, "
          f"{len(fm)} windows -> {args.out}")
    return EXIT_OK


def _train_view(fm: features.FeatureMatrix, view: str, dims, args, seed: int):
    X = fm.view_slice(view)
    config = ae.TrainConfig(
        dims=dims,
        lr=args.lr,
        epochs=args.epochs,
        batch=args.batch,
        seed=seed,
        val_frac=args.val_frac,
    )
    model = ae.train(X, view, config)
    errors = model.reconstruction_errors(X)
    threshold = evt.calibrate(errors, q=args.risk, u_quantile=args.u_quantile,
                              view=view)
    return model, threshold


def _load_features(path):
    try:
        return features.load_matrix(path)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_SCHEMA) from exc


def cmd_train(args) -> int:
    fm = _load_features(args.features)
    attack_rows = sorted({l for l in fm.label if l in windows.ATTACK_KINDS})
    if attack_rows:
        raise CliError(
            f"training input contains attack-labeled rows ({', '.join(attack_rows)}); "
            "train on normal traffic only",
            EXIT_PURITY,
        )
    if len(fm) == 0:
        raise CliError("training input has no rows", EXIT_CONFIG)

    seed = args.seed if args.seed is not None else _default_seed()
    t_w_values = set(float(v) for v in fm.t_w)
    if len(t_w_values) != 1:
        raise CliError(f"features mix window lengths {sorted(t_w_values)}",
                       EXIT_CONFIG)
    t_w = t_w_values.pop()

    dims = {
        "seq": _parse_dims(args.seq_dims) if args.seq_dims else ae.DEFAULT_DIMS["seq"],
        "temp": (_parse_dims(args.temp_dims) if args.temp_dims
                 else ae.DEFAULT_DIMS["temp"]),
    }
    view_list = ("seq", "temp") if args.view == "both" else (args.view,)

    config = {
        "command": "train",
        "view": args.view,
        "dims": {v: list(dims[v]) for v in view_list},
        "lr": args.lr,
        "epochs": args.epochs,
        "batch": args.batch,
        "seed": seed,
        "val_frac": args.val_frac,
        "u_quantile": args.u_quantile,
        "risk": args.risk,
        "t_w": t_w,
    }

    seed_children = np.random.SeedSequence(seed).spawn(2)
    models, thresholds = {}, {}
    for child, view in zip(seed_children, ("seq", "temp")):
        if view not in view_list:
            continue
        view_seed = int(child.generate_state(1)[0])
        try:
            models[view], thresholds[view] = _train_view(fm, view, dims[view],
                                                         args, view_seed)
        except (evt.TooFewExceedances, ae.Diverged, ae.EmptyInput,
                ae.DimensionMismatch, ValueError) as exc:
            raise CliError(f"{view}: {exc}", EXIT_CONFIG) from exc
        print(f"{view}: dims={dims[view]} epochs_run="
              f"{models[view].train_meta['epochs_run']} "
              f"final_loss={models[view].train_meta['final_loss']:.3e} "
              f"z*={thresholds[view].z_star:.6g}")

    detector.save_profile(models, thresholds, t_w, args.out,
                          provenance={"tool": f"goosewatch {__version__}",
                                      "config_hash": config_hash(config)})
    print(f"profile -> {args.out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    try:
        models, thresholds, t_w = detector.load_profile(args.profile)
    except (ValueError, KeyError) as exc:
        raise CliError(f"profile: {exc}", EXIT_SCHEMA) from exc
    if set(models) != {"seq", "temp"}:
        raise CliError("profile must contain both views", EXIT_SCHEMA)
    fm = _load_features(args.features)
    if len(fm) and t_w is not None:
        got = set(float(v) for v in fm.t_w)
        if got != {float(t_w)}:
            raise CliError(
                f"profile was trained at t_w={t_w}, features use {sorted(got)}",
                EXIT_SCHEMA,
            )
    try:
        verdicts = detector.score(models, thresholds, fm)
    except detector.SchemaMismatch as exc:
        raise CliError(str(exc), EXIT_SCHEMA) from exc

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = {"command": "detect", "t_w": t_w}
    header = [header_line(config)]
    detector.save_verdicts(verdicts, out_dir / "verdicts.csv", header)
    detector.save_attributions(verdicts, out_dir / "attributions.csv", header)
    n_anom = sum(v.anomalous for v in verdicts)
    print(f"{n_anom}/{len(verdicts)} windows flagged -> {out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        verdicts = detector.load_verdicts(args.verdicts)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_SCHEMA) from exc
    try:
        report = detector.full_report(verdicts)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    detector.save_report(report, args.out,
                         [header_line({"command": "eval"})])
    print(detector.format_report(report))
    for row in report.rows:
        if row.no_positives:
            print(f"note: no {row.attack} windows in input (NoPositives)")
            break
    return EXIT_OK


def cmd_latent(args) -> int:
    try:
        models, _thresholds, _t_w = detector.load_profile(args.profile)
    except (ValueError, KeyError) as exc:
        raise CliError(f"profile: {exc}", EXIT_SCHEMA) from exc
    fm = _load_features(args.features)
    cols = []
    zs = []
    for view in ("seq", "temp"):
        model = models[view]
        z = model.latent(fm.view_slice(view)) if len(fm) else np.empty((0, 0))
        d = model.dims[len(model.dims) // 2]
        cols += [f"{view}_z{i + 1}" for i in range(d)]
        zs.append(z.reshape(len(fm), d))
    Z = np.hstack(zs) if len(fm) else np.empty((0, len(cols)))

    with open(args.out, "w", newline="") as fh:
        fh.write(header_line({"command": "latent"}) + "\n")
        writer = csv.writer(fh)
        writer.writerow(list(features.META_COLUMNS) + cols)
        for i in range(len(fm)):
            row = [fm.flow[i], repr(float(fm.t_start[i])),
                   repr(float(fm.t_w[i])), fm.label[i]]
            row += [repr(float(v)) for v in Z[i]]
            writer.writerow(row)
    print(f"{len(fm)} latent rows -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goosewatch",
        description="Multi-view anomaly detection for IEC 61850 GOOSE traffic",
    )
    parser.add_argument("--version", action="version",
                        version=f"goosewatch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic capture from a scenario")
    p.add_argument("scenario")
    p.add_argument("out_dir")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("extract", help="pcap -> windowed feature matrix CSV")
    p.add_argument("pcap")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--tw", type=float, default=DEFAULT_T_W,
                   help="window length in seconds (default %(default)s)")
    p.add_argument("--stride", type=float, default=None,
                   help="window stride in seconds (default: tumbling)")
    p.add_argument("--labels", default=None,
                   help="attack interval sidecar CSV (start_s,end_s,kind)")
    p.add_argument("--scope", choices=("train", "infer"), default="infer")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", help="fit both view models and EVT thresholds")
    p.add_argument("features")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--view", choices=("seq", "temp", "both"), default="both")
    p.add_argument("--seq-dims", default=None,
                   help="comma-separated layer sizes for the sequence view")
    p.add_argument("--temp-dims", default=None,
                   help="comma-separated layer sizes for the temporal view")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None,
                   help="default from GOOSEWATCH_SEED, else 0")
    p.add_argument("--u-quantile", type=float, default=DEFAULT_U_QUANTILE)
    p.add_argument("--risk", type=float, default=DEFAULT_RISK,
                   help="EVT target risk q (default %(default)s)")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("detect", help="score features against a profile")
    p.add_argument("profile")
    p.add_argument("features")
    p.add_argument("out_dir")
    p.set_defaults(handler=cmd_detect)

    p = sub.add_parser("eval", help="confusion metrics from labeled verdicts")
    p.add_argument("verdicts")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("latent", help="dump bottleneck coordinates per window")
    p.add_argument("profile")
    p.add_argument("features")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(handler=cmd_latent)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"goosewatch {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (pcapio.IoError, OSError) as exc:
        print(f"goosewatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
