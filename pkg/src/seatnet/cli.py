"""Command-line surface: gen-synth, split, train, eval, predict, inspect.

Exit codes are a stable CI contract:
    0 success, 1 usage, 2 data/manifest, 3 training divergence,
    4 weight-format/validation.

Machine-readable output (JSON config echo, one JSON stats line per epoch,
key=value summaries) goes to stdout; human progress goes to stderr. With a
fixed seed every command's file outputs are byte-identical across re-runs
(the wall-time field in the stats stream excepted).
"""

import argparse
import configparser
import json
import os
import sys

import numpy as np

from seatnet import imgops
from seatnet import swt
from seatnet.data import preprocess_image
from seatnet.data import SynthSpec, load_manifest, load_split, save_split, split_by_car, synth_generate
from seatnet.errors import (
    ConfigError,
    DataError,
    NameSetError,
    SeatnetError,
    TrainingDivergedError,
    WeightFormatError,
)
from seatnet.metrics import classify, evaluate, write_report
from seatnet.model import (
    ModelConfig,
    expected_shapes,
    extractor_forward,
    forward_infer,
    new_model,
)
from seatnet.pnm import decode_pnm
from seatnet.train import TrainConfig, train


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# config file + flag merging


def _read_ini(path):
    cfg = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cfg.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from None
    return cfg


_MODEL_KEYS = {
    "profile": str,
    "input_size": int,
    "width_multiplier": float,
    "head_conv1_channels": int,
    "head_conv2_channels": int,
    "head_conv2_padding": str,
    "dropout1_rate": float,
    "dropout2_rate": float,
    "freeze_extractor": bool,
    "rescale_short_side": int,
}

_TRAIN_KEYS = {
    "learning_rate": float,
    "momentum": float,
    "patience": int,
    "batch_size": int,
    "max_epochs": int,
    "seed": int,
    "stop_mode": str,
    "rotation_augmentation": bool,
    "freeze_extractor": bool,
    "positive_class_weight": float,
    "threshold": float,
}


def _section_values(cfg, section, casts):
    out = {}
    if cfg is None or not cfg.has_section(section):
        return out
    for key in cfg.options(section):
        if key not in casts:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        if casts[key] is bool:
            out[key] = cfg.getboolean(section, key)
        else:
            out[key] = casts[key](cfg.get(section, key))
    return out


def _add_model_flags(parser):
    parser.add_argument("--profile", choices=["default", "reduced"])
    parser.add_argument("--input-size", type=int, dest="input_size")
    parser.add_argument("--width", type=float, dest="width_multiplier")
    parser.add_argument("--head-conv1", type=int, dest="head_conv1_channels")
    parser.add_argument("--head-conv2", type=int, dest="head_conv2_channels")
    parser.add_argument(
        "--head-conv2-padding", choices=["valid", "same"], dest="head_conv2_padding"
    )
    parser.add_argument("--dropout1", type=float, dest="dropout1_rate")
    parser.add_argument("--dropout2", type=float, dest="dropout2_rate")
    parser.add_argument("--rescale-short-side", type=int, dest="rescale_short_side")
    parser.add_argument(
        "--freeze-extractor", action="store_const", const=True, dest="freeze_extractor"
    )


def _model_config(args, cfg=None):
    values = _section_values(cfg, "model", _MODEL_KEYS)
    for key in _MODEL_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    profile = values.pop("profile", "default")
    if profile == "reduced":
        return ModelConfig.reduced(**values), {"profile": "reduced", **values}
    if profile != "default":
        raise ConfigError(f"unknown profile {profile!r}")
    return ModelConfig(**values), {"profile": "default", **values}


def _train_config(args, cfg=None):
    values = _section_values(cfg, "train", _TRAIN_KEYS)
    for key in _TRAIN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return TrainConfig(**values), values


def _echo_config(command, model_echo=None, extra=None):
    payload = {"command": command}
    if model_echo:
        payload["model"] = model_echo
    if extra:
        payload.update(extra)
    print(json.dumps({"config": payload}, sort_keys=True))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_synth(args):
    spec = SynthSpec(
        count=args.count,
        driver_fraction=args.driver_fraction,
        image_size=args.image_size,
        noise_level=args.noise,
        seed=args.seed,
    )
    manifest = synth_generate(spec, args.out)
    drivers, _ = manifest.label_counts()
    print(
        f"manifest={os.path.join(args.out, 'manifest.csv')} "
        f"images={len(manifest)} drivers={drivers}"
    )
    return 0


def _cmd_split(args):
    manifest = load_manifest(args.manifest)
    ratios = tuple(args.ratios)
    split = split_by_car(manifest, ratios, args.seed)
    provenance = [
        f"manifest={args.manifest}",
        f"ratios={ratios[0]!r},{ratios[1]!r},{ratios[2]!r}",
        f"seed={args.seed}",
    ]
    save_split(split, args.out, provenance)
    tr, dv, te = split.car_counts()
    print(f"cars={len(split.assignment)} train={tr} dev={dv} test={te}")
    return 0


def _split_records(manifest, split, subset):
    if subset == "all":
        return list(manifest)
    missing = [r.car_id for r in manifest if r.car_id not in split.assignment]
    if missing:
        raise DataError(
            f"split file lacks assignments for cars {sorted(set(missing))[:5]}"
        )
    return split.records(manifest, subset)


def _cmd_train(args):
    cfg = _read_ini(args.config) if args.config else None
    model_cfg, model_echo = _model_config(args, cfg)
    train_cfg, train_echo = _train_config(args, cfg)
    manifest = load_manifest(args.manifest)
    split = load_split(args.split)
    train_records = _split_records(manifest, split, "train")
    dev_records = _split_records(manifest, split, "dev")
    os.makedirs(args.out_dir, exist_ok=True)

    weights = new_model(model_cfg, train_cfg.seed)
    if args.init_weights:
        _merge_initial_weights(weights, model_cfg, args.init_weights)

    _echo_config(
        "train",
        model_echo,
        {
            "train": train_echo,
            "paths": {
                "manifest": args.manifest,
                "split": args.split,
                "out_dir": args.out_dir,
                "init_weights": args.init_weights or "",
            },
        },
    )

    def on_epoch(stats):
        print(
            json.dumps(
                {
                    "epoch": stats.epoch,
                    "train_loss": round(stats.train_loss, 6),
                    "dev_accuracy": round(stats.dev_accuracy, 6),
                    "wall_time_s": round(stats.wall_time_s, 3),
                }
            ),
            flush=True,
        )
        print(
            f"epoch {stats.epoch}: loss={stats.train_loss:.4f} "
            f"dev_acc={stats.dev_accuracy:.4f}",
            file=sys.stderr,
        )

    _, stats = train(
        model_cfg,
        weights,
        train_records,
        dev_records,
        train_cfg,
        checkpoint_dir=args.out_dir,
        on_epoch=on_epoch,
    )
    best = max(stats, key=lambda s: s.dev_accuracy)
    print(f"best_epoch={best.epoch} best_dev_accuracy={best.dev_accuracy:.6f}")
    return 0


def _merge_initial_weights(weights, model_cfg, path):
    """Overlay a full or extractor-only SWT checkpoint onto fresh weights."""
    expected = expected_shapes(model_cfg)
    loaded = swt.load_swt(path)
    for name, arr in loaded.items():
        if name not in expected:
            raise WeightFormatError("unknown_tensor", name)
        if arr.shape != tuple(expected[name]):
            raise WeightFormatError(
                "shape_mismatch",
                f"{name}: file has {arr.shape}, expected {tuple(expected[name])}",
            )
        weights[name][...] = arr


def _cmd_eval(args):
    cfg = _read_ini(args.config) if args.config else None
    model_cfg, model_echo = _model_config(args, cfg)
    weights = swt.load_swt(args.weights, expected=expected_shapes(model_cfg))
    manifest = load_manifest(args.manifest)
    if args.subset == "all":
        records = list(manifest)
    else:
        if not args.split:
            raise _UsageError("--split is required unless --subset all")
        records = _split_records(manifest, load_split(args.split), args.subset)
    if not records:
        raise DataError(f"subset {args.subset!r} selects no records")
    result = evaluate(
        model_cfg, weights, records, threshold=args.threshold, group_by=args.group_by
    )
    provenance = [
        ("command", "eval"),
        ("weights", args.weights),
        ("manifest", args.manifest),
        ("subset", args.subset),
        ("threshold", repr(args.threshold)),
        ("model", json.dumps(model_echo, sort_keys=True)),
    ]
    if args.report:
        write_report(args.report, result, provenance)
    c = result.counts
    print(
        f"accuracy={c.accuracy:.4f} total={c.total} "
        f"tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn} threshold={args.threshold}"
    )
    return 0


def _cmd_predict(args):
    cfg = _read_ini(args.config) if args.config else None
    model_cfg, _ = _model_config(args, cfg)
    weights = swt.load_swt(args.weights, expected=expected_shapes(model_cfg))
    img = decode_pnm(args.image)
    x = preprocess_image(
        img,
        "eval",
        input_size=model_cfg.input_size,
        rescale_target=model_cfg.rescale_short_side,
    )
    prob = float(forward_infer(model_cfg, weights, x[None])[0])
    print(f"probability={prob:.6f} class={classify(prob, args.threshold)}")
    return 0


def _cmd_inspect(args):
    cfg = _read_ini(args.config) if args.config else None
    model_cfg, _ = _model_config(args, cfg)
    expected = None
    if args.expect == "model":
        expected = expected_shapes(model_cfg)
    elif args.expect == "extractor":
        expected = expected_shapes(model_cfg, extractor_only=True)
    weights = swt.load_swt(args.weights, expected=expected)
    for name, arr in weights.items():
        print(f"{name} {'x'.join(str(d) for d in arr.shape)}")
    print(f"tensors={len(weights)} crc=ok")
    if args.forward:
        img = decode_pnm(args.forward)
        s = model_cfg.input_size
        if img.shape[1:] != (s, s):
            raise DataError(
                f"--forward expects an image already sized {s}x{s}, "
                f"got {img.shape[1]}x{img.shape[2]}"
            )
        if img.shape[0] == 3:
            img = imgops.to_grayscale(img)
        x = (2.0 * imgops.replicate_gray(img) - 1.0).astype(np.float32)
        feats = extractor_forward(model_cfg, weights, x[None])
        if args.features_out:
            swt.save_swt({"features": feats}, args.features_out)
        print(
            f"features_shape={'x'.join(str(d) for d in feats.shape)} "
            f"features_out={args.features_out or ''}"
        )
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser():
    parser = _Parser(prog="seatnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate the synthetic PGM corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--driver-fraction", type=float, default=0.31, dest="driver_fraction")
    p.add_argument("--image-size", type=int, default=112, dest="image_size")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("split", help="assign cars to train/dev/test")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", type=float, nargs=3, default=[0.76, 0.10, 0.14])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="train and write best/final checkpoints")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--init-weights", dest="init_weights")
    p.add_argument("--config")
    _add_model_flags(p)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--momentum", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--seed", type=int)
    p.add_argument("--stop-mode", choices=["best_patience", "monotone_decrease"],
                   dest="stop_mode")
    p.add_argument("--rotation-augmentation", action="store_const", const=True,
                   dest="rotation_augmentation")
    p.add_argument("--positive-class-weight", type=float, dest="positive_class_weight")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint and write a report")
    p.add_argument("--weights", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split")
    p.add_argument("--subset", choices=["train", "dev", "test", "all"], default="test")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--report")
    p.add_argument("--group-by", action="append", default=[], dest="group_by")
    p.add_argument("--config")
    _add_model_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="probability and class for one image")
    p.add_argument("--weights", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--config")
    _add_model_flags(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("inspect", help="validate an SWT file; optional feature dump")
    p.add_argument("weights")
    p.add_argument("--expect", choices=["model", "extractor"])
    p.add_argument("--forward", help="image (already input-sized) to run the extractor on")
    p.add_argument("--features-out", dest="features_out")
    p.add_argument("--config")
    _add_model_flags(p)
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (WeightFormatError, NameSetError) as exc:
        print(f"weight error: {exc}", file=sys.stderr)
        return 4
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SeatnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
