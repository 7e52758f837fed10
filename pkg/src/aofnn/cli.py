"""Command-line entry point: ``aofnn <subcommand> [options]``.

Every run writes its outputs plus one ``manifest.json`` into ``--out``.
Values given on the command line override those read from ``--config``.
Failures print a single JSON line on stderr and exit with status 1.
"""
import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import datasets_io, filters, perf_model
from .field_math import tile_capacity, tile_images, untile_images
from .fine_tune import accuracy_vs_samples, collect_pairs, finetune_fc1
from .fourier_cnn import (FourierCNN, TrainConfig, accuracy_from_features, conv_features,
                          evaluate, train)
from .metrics import agreement, ssim
from .optics import calibrate_exposure, make_hardware_surrogate, nominal_config, propagate_4f

log = logging.getLogger("aofnn")


class RunManifest:
    def __init__(self, subcommand, args):
        self.subcommand = subcommand
        self.args = {k: v for k, v in vars(args).items() if k != "func"}
        self.started = time.time()
        self.inputs = []
        self.outputs = []
        self.config = None

    def add_input(self, path):
        self.inputs.append(Path(path))

    def write(self, out_dir, path, data):
        path = Path(out_dir) / path
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data)
        self.outputs.append(str(path))
        return path

    def input_hash(self):
        h = hashlib.sha256()
        # The output location is not an input.
        args = {k: v for k, v in self.args.items() if k != "out"}
        h.update(json.dumps(args, sort_keys=True, default=str).encode())
        h.update(json.dumps(self.config, sort_keys=True, default=str).encode())
        for p in sorted(self.inputs):
            files = sorted(p.rglob("*")) if p.is_dir() else [p]
            for f in files:
                if f.is_file():
                    h.update(f.name.encode())
                    h.update(f.read_bytes())
        return h.hexdigest()

    def finish(self, out_dir):
        doc = dict(subcommand=self.subcommand, args=self.args, config=self.config,
                   seed=self.args.get("seed"), started=self.started, finished=time.time(),
                   inputs=[str(p) for p in self.inputs], outputs=self.outputs,
                   input_sha256=self.input_hash())
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str))
        return path


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _system_config(args, subpixel):
    if args.config:
        cfg = datasets_io.load_config(args.config, "system")
        if subpixel is not None:
            cfg = dataclasses.replace(
                cfg, dmd1=dataclasses.replace(cfg.dmd1, subpixel_factor=subpixel),
                dmd2=dataclasses.replace(cfg.dmd2, subpixel_factor=subpixel))
        return cfg
    return None


def _load_input(spec):
    if spec.startswith("builtin:"):
        corpus = filters.filter_corpus()
        name = spec.split(":", 1)[1]
        if name not in corpus:
            raise ValueError(f"unknown builtin image {name!r}; choose from {sorted(corpus)}")
        return corpus[name]
    return datasets_io.read_image(spec)


def _save_image(manifest, out, stem, img):
    manifest.write(out, f"{stem}.pgm", datasets_io.encode_pgm(img))
    manifest.write(out, f"{stem}.aoff", datasets_io.encode_raster(img))


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    return str(o)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_filter(args, manifest):
    out = _out_dir(args)
    image = _load_input(args.input)
    if not args.input.startswith("builtin:"):
        manifest.add_input(args.input)
    rows, cols = image.shape
    if args.mask:
        mask = datasets_io.read_image(args.mask)
        manifest.add_input(args.mask)
        if mask.shape != image.shape:
            raise ValueError(f"mask {mask.shape} does not match input {image.shape}")
    else:
        mask = filters.mask_preset(args.mask_preset, rows, cols, args.cutoff)
    cfg = _system_config(args, args.subpixel) or filters.filter_bench_config(args.subpixel or 17)
    manifest.config = dataclasses.asdict(cfg)
    rng = np.random.default_rng(args.seed)
    physical = propagate_4f(image, mask, cfg, rng=rng)
    _save_image(manifest, out, "filtered", physical)
    result = {"shape": [rows, cols]}
    if args.ideal:
        ideal = filters.normalise_peak(filters.ideal_filter(image, mask))
        _save_image(manifest, out, "ideal", ideal)
        result["agreement"] = agreement(physical, ideal).to_dict()
        manifest.write(out, "report.json", _dump(result["agreement"]))
    return result


def cmd_hybrid(args, manifest):
    out = _out_dir(args)
    a, b = _load_input(args.input_low), _load_input(args.input_high)
    for spec in (args.input_low, args.input_high):
        if not spec.startswith("builtin:"):
            manifest.add_input(spec)
    if a.shape != b.shape:
        raise ValueError(f"inputs differ in size: {a.shape} vs {b.shape}")
    hybrid, (low, high) = filters.compose_hybrid(a, b, args.cutoff)
    cfg = _system_config(args, args.subpixel)
    if cfg is None and not args.ideal_bench:
        cfg = nominal_config(subpixel_factor=args.subpixel or 4)
    manifest.config = dataclasses.asdict(cfg) if cfg is not None else "ideal"
    rec_low, rec_high = filters.separate_hybrid(hybrid, args.cutoff, cfg)
    _save_image(manifest, out, "hybrid", hybrid)
    _save_image(manifest, out, "recovered_low", filters.normalise_peak(rec_low))
    _save_image(manifest, out, "recovered_high", filters.normalise_peak(rec_high))
    report = {"ssim_low": ssim(filters.normalise_peak(rec_low), filters.normalise_peak(np.abs(low))),
              "ssim_high": ssim(filters.normalise_peak(rec_high), filters.normalise_peak(np.abs(high)))}
    manifest.write(out, "report.json", _dump(report))
    return report


def _train_config(args):
    base = datasets_io.load_config(args.config, "train") if args.config else TrainConfig()
    over = {}
    for key, attr in (("bits", "quant_bits"), ("kernel_size", "kernel_size"),
                      ("epochs", "epochs"), ("batch_size", "batch_size"), ("seed", "seed")):
        val = getattr(args, key, None)
        if val is not None:
            over[attr] = val
    if "epochs" not in over and args.config is None:
        over["epochs"] = 10 if args.dataset == "mnist" else 15
    return dataclasses.replace(base, **over)


def cmd_train(args, manifest):
    out = _out_dir(args)
    cfg = _train_config(args)
    manifest.config = dataclasses.asdict(cfg)
    data = datasets_io.load_dataset(args.dataset, args.data_dir)
    manifest.add_input(datasets_io.default_data_dir(args.dataset) if args.data_dir is None else args.data_dir)
    if args.train_subset:
        data = data.subset(args.train_subset, seed=cfg.seed)
    model, history = train(data, cfg)
    model.save(out / "checkpoint", dataset=args.dataset, seed=cfg.seed,
               epoch=int(np.argmax([h["val_acc"] for h in history])) + 1)
    manifest.outputs.append(str(out / "checkpoint"))
    manifest.write(out, "history.json", _dump({"config": cfg, "history": history}))
    best = max(h["val_acc"] for h in history)
    print(f"validation accuracy {best:.4f}")
    return {"val_acc": best}


def _eval_setup(args, manifest):
    model, meta = FourierCNN.load(args.checkpoint)
    manifest.add_input(args.checkpoint)
    dataset = args.dataset or meta.get("dataset", "mnist")
    data = datasets_io.load_dataset(dataset, args.data_dir)
    if args.limit:
        data = dataclasses.replace(data, test_x=data.test_x[:args.limit], test_y=data.test_y[:args.limit])
    cfg = _system_config(args, args.subpixel) or nominal_config(subpixel_factor=args.subpixel or 2)
    # The network was trained on the ideal intensity scale; calibrate the
    # camera exposure on the bench before any perturbation is applied.
    return model, data, calibrate_exposure(cfg)


def cmd_eval(args, manifest):
    out = _out_dir(args)
    model, data, cfg = _eval_setup(args, manifest)
    mode = args.mode
    if args.surrogate_seed is not None:
        cfg = make_hardware_surrogate(cfg, args.surrogate_seed)
        mode = "physical"
    manifest.config = dataclasses.asdict(cfg) if mode == "physical" else "ideal"
    acc, conf = evaluate(model, data.test_x, data.test_y, mode, cfg, seed=args.seed)
    report = {"mode": mode, "accuracy": acc, "confusion": conf}
    manifest.write(out, "eval.json", _dump(report))
    print(json.dumps({"mode": mode, "accuracy": acc}))
    return report


def cmd_finetune(args, manifest):
    out = _out_dir(args)
    model, data, cfg = _eval_setup(args, manifest)
    hw = make_hardware_surrogate(cfg, args.surrogate_seed)
    manifest.config = dataclasses.asdict(hw)
    test_feats = conv_features(model, data.test_x, "physical", hw, seed=args.seed + 1)
    before = accuracy_from_features(model, test_feats, data.test_y)
    pairs = collect_pairs(model, None, hw, data, args.pairs, seed=args.seed)
    tuned, losses = finetune_fc1(model, pairs, epochs=args.epochs, seed=args.seed)
    after = accuracy_from_features(tuned, test_feats, data.test_y)
    tuned.save(out / "checkpoint", dataset=data.name, seed=args.seed, finetuned_pairs=args.pairs,
               surrogate_seed=args.surrogate_seed)
    manifest.outputs.append(str(out / "checkpoint"))
    report = {"accuracy_before": before, "accuracy_after": after, "loss": losses,
              "pairs": args.pairs}
    if args.sweep:
        grid = [int(v) for v in args.sweep.split(",")]
        report["sweep"] = accuracy_vs_samples(model, None, hw, data, grid, seed=args.seed,
                                              epochs=args.epochs, test_features=test_feats)
    manifest.write(out, "finetune.json", _dump(report))
    print(json.dumps({"accuracy_before": before, "accuracy_after": after}))
    return report


def cmd_tile(args, manifest):
    out = _out_dir(args)
    paths = sorted(p for p in Path(args.inputs).iterdir() if p.is_file())
    manifest.add_input(args.inputs)
    tiles = [datasets_io.read_image(p) for p in paths]
    cfg = _system_config(args, args.subpixel) or filters.filter_bench_config(args.subpixel or 1)
    manifest.config = dataclasses.asdict(cfg)
    rows, cols = cfg.dmd1.rows, cfg.dmd1.cols
    if tiles and len(tiles) > tile_capacity(tiles[0].shape, rows, cols):
        raise ValueError(
            f"{len(tiles)} tiles exceed the grid capacity "
            f"{tile_capacity(tiles[0].shape, rows, cols)} of a {cols}x{rows} DMD "
            f"(46 is sometimes quoted for this layout; only whole tiles fit)")
    canvas, placements = tile_images(tiles, rows, cols)
    if args.mask:
        mask = datasets_io.read_image(args.mask)
        manifest.add_input(args.mask)
    else:
        mask = filters.mask_preset(args.mask_preset, rows, cols, args.cutoff)
    frame = propagate_4f(canvas, mask, cfg, rng=np.random.default_rng(args.seed))
    outs = untile_images(frame, placements, tiles[0].shape)
    _save_image(manifest, out, "canvas_out", frame)
    per_tile = []
    for n, (tile, got) in enumerate(zip(tiles, outs)):
        # Reference: the same tile alone on the canvas through the ideal oracle.
        alone, _ = tile_images([tile], rows, cols)
        alone = np.roll(alone, (placements[n].row, placements[n].col), axis=(0, 1))
        ref = untile_images(filters.ideal_filter(alone, mask), [placements[n]], tile.shape)[0]
        score = ssim(filters.normalise_peak(got), filters.normalise_peak(ref))
        per_tile.append({"tile": paths[n].name, "ssim_vs_individual": score})
        _save_image(manifest, out, f"tile_{n:03d}", got)
    report = {"tiles": len(tiles), "capacity": tile_capacity(tiles[0].shape, rows, cols),
              "per_tile": per_tile,
              "min_ssim": min(t["ssim_vs_individual"] for t in per_tile)}
    manifest.write(out, "report.json", _dump(report))
    return report


def _parse_resolutions(text):
    out = []
    for item in text.split(","):
        item = item.strip().lower()
        if "x" in item:
            w, h = item.split("x")
            out.append(int(w) * int(h))
        else:
            out.append(int(item))
    return out


def cmd_perf(args, manifest):
    out = _out_dir(args)
    if args.devices:
        timings, techs, bases = perf_model.load_device_table(args.devices)
        manifest.add_input(args.devices)
    else:
        timings, techs, bases = perf_model.TIMING_PRESETS, perf_model.TECHNOLOGY_TABLE, perf_model.DEFAULT_BASELINES
    report = perf_model.perf_report(timings, techs, bases)
    manifest.config = report["timings"]
    resolutions = _parse_resolutions(args.resolutions)
    rows = []
    for name, t in timings.items():
        rows += [(r, v, f"{name}:{c}") for r, v, c in perf_model.latency_table(t, resolutions, bases)]
    manifest.write(out, "perf.json", _dump(report))
    manifest.write(out, "latency.csv", perf_model.rows_to_csv(rows))
    return report


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="aofnn", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def out_arg(sp):
        sp.add_argument("--out", required=True, help="output directory")

    f = sub.add_parser("filter", help="Fourier-plane filtering of one image")
    f.add_argument("--input", required=True, help="PGM/raster/.npy file or builtin:<name>")
    g = f.add_mutually_exclusive_group(required=True)
    g.add_argument("--mask")
    g.add_argument("--mask-preset", choices=filters.PRESETS)
    f.add_argument("--cutoff", type=float, default=0.15)
    f.add_argument("--subpixel", type=int)
    f.add_argument("--ideal", action="store_true", help="also compare against the ideal oracle")
    out_arg(f)
    f.set_defaults(func=cmd_filter)

    h = sub.add_parser("hybrid", help="compose and optically separate a hybrid image")
    h.add_argument("--input-low", required=True)
    h.add_argument("--input-high", required=True)
    h.add_argument("--cutoff", type=float, default=0.1)
    h.add_argument("--subpixel", type=int)
    h.add_argument("--ideal-bench", action="store_true", help="separate with the ideal oracle")
    out_arg(h)
    h.set_defaults(func=cmd_hybrid)

    t = sub.add_parser("train", help="train the Fourier CNN on the ideal path")
    t.add_argument("--dataset", choices=("mnist", "cifar10"), default="mnist")
    t.add_argument("--data-dir")
    t.add_argument("--bits", type=int, choices=(1, 2, 32))
    t.add_argument("--kernel-size", type=int, choices=(208, 32))
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--train-subset", type=int, help="use only this many training images")
    out_arg(t)
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "evaluate a checkpoint"),
                                 ("finetune", cmd_finetune, "fine-tune FC1 on surrogate outputs")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--checkpoint", required=True)
        e.add_argument("--dataset", choices=("mnist", "cifar10"))
        e.add_argument("--data-dir")
        e.add_argument("--subpixel", type=int, help="bench sub-pixel factor (default 2)")
        e.add_argument("--limit", type=int, help="evaluate on the first N test images")
        if name == "eval":
            e.add_argument("--mode", choices=("ideal", "physical"), default="ideal")
            e.add_argument("--surrogate-seed", type=int)
        else:
            e.add_argument("--pairs", type=int, default=5000)
            e.add_argument("--surrogate-seed", type=int, default=0)
            e.add_argument("--epochs", type=int, default=20)
            e.add_argument("--sweep", help="comma-separated sample counts")
        out_arg(e)
        e.set_defaults(func=func)

    ti = sub.add_parser("tile", help="filter many tiles in one bench frame")
    ti.add_argument("--inputs", required=True, help="directory of equally sized images")
    g = ti.add_mutually_exclusive_group(required=True)
    g.add_argument("--mask")
    g.add_argument("--mask-preset", choices=filters.PRESETS)
    ti.add_argument("--cutoff", type=float, default=0.15)
    ti.add_argument("--subpixel", type=int)
    out_arg(ti)
    ti.set_defaults(func=cmd_tile)

    pf = sub.add_parser("perf", help="latency and throughput reports")
    pf.add_argument("--devices", help="JSON device table")
    pf.add_argument("--resolutions", default="1920x1080,3840x2160")
    out_arg(pf)
    pf.set_defaults(func=cmd_perf)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    manifest = RunManifest(args.command, args)
    try:
        with sfft.set_workers(max(1, args.threads)):
            args.func(args, manifest)
        manifest.finish(args.out)
    except Exception as exc:  # noqa: BLE001 - reported as one JSON line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc),
                          "subcommand": args.command}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
