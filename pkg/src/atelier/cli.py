"""Command-line entry point.

Subcommands cover the whole pipeline: entropy, tile, synth, train,
classify, map, ensemble, gradcam. Every run echoes its resolved
configuration to stderr, and identical flags + inputs produce
byte-identical output files. Exit codes: 0 success, 1 usage error,
2 data error, 3 internal error.
"""

from __future__ import annotations

import os

# Pin BLAS pools before numpy loads so results do not depend on core count.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import sys
from pathlib import Path

import numpy as np

from . import aggregate, cnn, probmap, synthgen, tiler
from .dataset import build_dataset, read_manifest
from .errors import AtelierError, DataError, ManifestError
from .imaging import ImageBuffer, image_entropy, load_image, save_png, to_luma
from .tiler import TileSpec


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the exit-code contract wants 1
    def error(self, message):
        raise UsageError(message)


def _tile_spec(size: int, stride: int | None) -> TileSpec:
    if stride is None:
        stride = max(1, size // 2)
    try:
        return TileSpec(size=size, stride=stride)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_conv(text: str) -> tuple[tuple[int, int, bool], ...]:
    """Parse conv stage flags like `8x3:max,16x3:max` into (filters, kernel, pool)."""
    stages = []
    for part in text.split(","):
        body, _, suffix = part.strip().partition(":")
        if suffix not in ("", "max"):
            raise UsageError(f"bad conv stage {part!r}: suffix must be :max or absent")
        pieces = body.split("x")
        if len(pieces) != 2:
            raise UsageError(f"bad conv stage {part!r}: expected FILTERSxKERNEL")
        try:
            filters, kernel = int(pieces[0]), int(pieces[1])
        except ValueError as exc:
            raise UsageError(f"bad conv stage {part!r}: {exc}") from exc
        stages.append((filters, kernel, suffix == "max"))
    if not stages:
        raise UsageError("at least one conv stage is required")
    return tuple(stages)


def _read_labels(path) -> dict[str, str]:
    """Map painting ids to labels from a 2-column file or a 4-column manifest."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 2:
            painting_id, label = parts
        elif len(parts) == 4:
            _, label, painting_id, _ = parts
        else:
            raise ManifestError(f"{path}:{lineno}: expected 2 or 4 fields, got {len(parts)}")
        if label not in ("pos", "neg"):
            raise ManifestError(f"{path}:{lineno}: label must be pos or neg, got {label!r}")
        mapping[painting_id.strip()] = label
    if not mapping:
        raise ManifestError(f"labels file {path} has no rows")
    return mapping


def _inject_config_file(argv: list[str]) -> list[str]:
    """Expand a --config file of `key = value` lines into flags.

    Injected flags land right after the subcommand so explicit
    command-line flags override them (argparse keeps the last value).
    """
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
            break
        if token.startswith("--config="):
            path = token.partition("=")[2]
            break
    if path is None:
        return argv
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    injected = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected `key = value`")
        injected.append(f"--{key.strip().replace('_', '-')}")
        injected.append(value.strip())
    return argv[:1] + injected + argv[1:]


def _log_config(args: argparse.Namespace) -> None:
    skip = {"func"}
    fields = " ".join(
        f"{k}={v}" for k, v in sorted(vars(args).items()) if k not in skip
    )
    print(f"# config: {fields}", file=sys.stderr)


# --- subcommands ------------------------------------------------------------


def cmd_entropy(args) -> int:
    luma = to_luma(load_image(args.image))
    print(f"{image_entropy(luma):.6f}")
    return 0


def cmd_tile(args) -> int:
    spec = _tile_spec(args.size, args.stride)
    img = load_image(args.image)
    tiles = tiler.sieve(to_luma(img), tiler.grid_tiles(img, spec))
    tiler.write_tile_table(tiles, args.out)
    kept = sum(1 for t in tiles if t.kept)
    print(f"{len(tiles)} tiles, {kept} kept -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    style_a, style_b = synthgen.default_styles(args.seed)
    manifest = synthgen.generate_corpus(
        style_a, style_b, args.n, (args.width, args.height), args.out_dir
    )
    print(str(manifest))
    return 0


def cmd_train(args) -> int:
    spec = _tile_spec(args.size, args.stride)
    config = cnn.CnnConfig(
        input_size=args.size,
        input_channels=args.channels,
        conv_layers=_parse_conv(args.conv),
        dense_units=args.dense,
        seed=args.seed,
        learning_rate=args.lr,
        momentum=args.momentum,
        epochs=args.epochs,
        batch_size=args.batch_size,
    )
    entries = read_manifest(args.manifest)
    train_ds = build_dataset(entries, spec, splits=("train",))
    val_ds = build_dataset(entries, spec, splits=("val",))
    for painting_id in train_ds.warnings + val_ds.warnings:
        print(f"# warning: painting {painting_id} contributed no tiles", file=sys.stderr)
    model, history = cnn.train(
        cnn.init_model(config),
        train_ds.tiles, train_ds.labels,
        val_ds.tiles, val_ds.labels,
    )
    cnn.save_model(model, args.out)
    metrics_path = args.metrics or f"{args.out}.metrics.tsv"
    lines = ["# epoch\ttrain_loss\tval_accuracy"]
    lines += [f"{e}\t{loss:.6f}\t{acc:.6f}" for e, loss, acc in history]
    Path(metrics_path).write_text("\n".join(lines) + "\n")
    best = next((acc for e, _, acc in history if e == model.trained_epochs), float("nan"))
    print(
        f"model -> {args.out} (epoch {model.trained_epochs} of {args.epochs}, "
        f"val accuracy {best:.4f})"
    )
    return 0


def _load_model_and_spec(args) -> tuple[cnn.CnnModel, TileSpec]:
    model = cnn.load_model(args.model)
    return model, _tile_spec(model.config.input_size, args.stride)


def cmd_classify(args) -> int:
    model, spec = _load_model_and_spec(args)
    labels = _read_labels(args.labels) if args.labels else {}
    results = []
    for image_path in args.images:
        painting_id = Path(image_path).stem
        results.append(
            aggregate.classify_painting(
                model,
                load_image(image_path),
                spec,
                painting_id=painting_id,
                true_label=labels.get(painting_id),
                threads=args.threads,
            )
        )
    text = aggregate.format_results_table(results)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def cmd_map(args) -> int:
    if not 0.0 <= args.alpha <= 1.0:
        raise UsageError(f"--alpha must be in [0, 1], got {args.alpha}")
    model, spec = _load_model_and_spec(args)
    img = load_image(args.image)
    result = aggregate.classify_painting(
        model, img, spec,
        painting_id=Path(args.image).stem,
        threads=args.threads,
    )
    pmap = probmap.accumulate((img.width, img.height), list(result.tiles))
    save_png(probmap.render(pmap, source=img, alpha=args.alpha), args.out)
    probmap.write_raw_map(pmap, f"{args.out}.raw.tsv")
    probmap.write_legend(f"{args.out}.legend.tsv")
    sys.stdout.write(aggregate.format_results_table([result]))
    return 0


def cmd_ensemble(args) -> int:
    results_a = aggregate.read_results_table(args.results_a)
    results_b = aggregate.read_results_table(args.results_b)
    by_id_b = {r.painting_id: r for r in results_b}
    if set(r.painting_id for r in results_a) != set(by_id_b):
        raise DataError("the two results tables cover different paintings")
    labels = _read_labels(args.labels) if args.labels else {}
    triples = []
    combined_rows = []
    for ra in results_a:
        rb = by_id_b[ra.painting_id]
        label = labels.get(ra.painting_id) or ra.true_label or rb.true_label
        if label is None:
            raise DataError(f"painting {ra.painting_id} has no true label")
        triples.append((ra.mean_prob, rb.mean_prob, label))
    weights = aggregate.optimize_weights(triples)
    for ra, (prob_a, prob_b, label) in zip(results_a, triples):
        rb = by_id_b[ra.painting_id]
        p = aggregate.combine(prob_a, prob_b, weights.weight)
        combined_rows.append(
            aggregate.PaintingResult(
                painting_id=ra.painting_id,
                mean_prob=p,
                predicted=aggregate.verdict(p),
                true_label=label,
                n_tiles_kept=ra.n_tiles_kept + rb.n_tiles_kept,
                n_tiles_total=ra.n_tiles_total + rb.n_tiles_total,
            )
        )
    print(f"weight\t{weights.weight:.2f}")
    print(f"achieved_error\t{weights.achieved_error:.6f}")
    text = aggregate.format_results_table(combined_rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gradcam(args) -> int:
    if not 0.0 <= args.alpha <= 1.0:
        raise UsageError(f"--alpha must be in [0, 1], got {args.alpha}")
    model = cnn.load_model(args.model)
    cfg = model.config
    img = load_image(args.tile)
    if (img.width, img.height) != (cfg.input_size, cfg.input_size):
        raise DataError(
            f"tile image is {img.width}x{img.height}; the model expects "
            f"{cfg.input_size}x{cfg.input_size}"
        )
    if img.channels != cfg.input_channels:
        raise DataError(
            f"tile image has {img.channels} channels; the model expects "
            f"{cfg.input_channels}"
        )
    cam = cnn.gradcam(model, img.data.astype(np.float64) / 255.0)
    gray = np.floor(cam * 255.0 + 0.5).astype(np.uint8)[:, :, np.newaxis]
    save_png(ImageBuffer.from_array(gray), args.out)
    if args.overlay:
        heat = np.zeros((cfg.input_size, cfg.input_size, 3))
        heat[:, :, 0] = cam * 255.0
        src = img.data.astype(np.float64)
        if img.channels == 1:
            src = np.repeat(src, 3, axis=2)
        blend = np.floor(args.alpha * heat + (1.0 - args.alpha) * src + 0.5)
        save_png(ImageBuffer.from_array(blend.astype(np.uint8)), args.overlay)
    print(f"gradcam -> {args.out}")
    return 0


# --- wiring -----------------------------------------------------------------


def _add_common(sub, *, threads=False, seed=False):
    sub.add_argument("--config", help="file of key = value lines pre-seeding flags")
    if threads:
        sub.add_argument("--threads", type=int, default=1,
                         help="inference thread cap; results are identical for any value")
    if seed:
        sub.add_argument("--seed", type=int, default=42, help="root seed (default 42)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="atelier", description=__doc__)
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser("entropy", help="print an image's luma entropy in bits")
    p.add_argument("image")
    _add_common(p)
    p.set_defaults(func=cmd_entropy)

    p = subs.add_parser("tile", help="write the sieved tile table for an image")
    p.add_argument("image")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--stride", type=int, default=None, help="default size//2")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_tile)

    p = subs.add_parser("synth", help="generate the synthetic two-artist corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n", type=int, default=10, help="paintings per class")
    p.add_argument("--width", type=int, default=600)
    p.add_argument("--height", type=int, default=600)
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="train a tile model from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--stride", type=int, default=None, help="default size//2")
    p.add_argument("--channels", type=int, default=3, choices=(1, 3))
    p.add_argument("--conv", default="8x3:max,16x3:max",
                   help="conv stages, e.g. 8x3:max,16x3:max")
    p.add_argument("--dense", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", default=None, help="default OUT.metrics.tsv")
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("classify", help="classify whole paintings with a model")
    p.add_argument("images", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--stride", type=int, default=None, help="default model size//2")
    p.add_argument("--labels", default=None,
                   help="painting_id/label file (or manifest) for verdict checking")
    p.add_argument("--out", default=None)
    _add_common(p, threads=True)
    p.set_defaults(func=cmd_classify)

    p = subs.add_parser("map", help="render a per-pixel probability map")
    p.add_argument("image")
    p.add_argument("--model", required=True)
    p.add_argument("--stride", type=int, default=None, help="default model size//2")
    p.add_argument("--alpha", type=float, default=probmap.DEFAULT_ALPHA)
    p.add_argument("--out", required=True)
    _add_common(p, threads=True)
    p.set_defaults(func=cmd_map)

    p = subs.add_parser("ensemble", help="fit the two-scale blend weight")
    p.add_argument("--results-a", required=True)
    p.add_argument("--results-b", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ensemble)

    p = subs.add_parser("gradcam", help="write a tile's activation heat map")
    p.add_argument("tile", help="an image exactly the model's input size")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--overlay", default=None, help="also write heat blended over the tile")
    p.add_argument("--alpha", type=float, default=probmap.DEFAULT_ALPHA)
    _add_common(p)
    p.set_defaults(func=cmd_gradcam)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _inject_config_file(argv)
        args = build_parser().parse_args(argv)
        _log_config(args)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (AtelierError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit:
        raise
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
