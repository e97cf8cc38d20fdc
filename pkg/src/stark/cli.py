"""Command-line entry point: ``stark <subcommand> [flags]``.

Exit status is 0 on success, 2 when an input fails validation and 1 when a
numerical stage fails.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import io
from .errors import NumericalError
from .experiments import RunConfig, denoise, provenance, run_test
from .metrics import MetricConfig, evaluate_all, knn_classify, shared_pca_scores
from .simulate import (
    downsample_counts,
    make_synthetic,
    row_normalize,
    sample_counts,
    sample_reads,
)
from .solver import autotune, simplex_threshold

logger = logging.getLogger("stark")

COMMANDS = ("denoise", "simulate", "downsample", "evaluate", "denoise-test", "interp-test", "autotune")


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"stage '{stage}': {exc}")
        self.stage = stage
        self.original = exc


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except (ValueError, OSError, NumericalError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stark", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON (or TOML on Python >= 3.11) file of flag values")
        p.add_argument("--out", help="output directory (created if missing)")
        p.add_argument("--seed", type=int)
        return p

    def data_flags(p, labels=True):
        p.add_argument("--counts", help="counts matrix (.mtx or headered .csv)")
        p.add_argument("--coords", help="CSV with x,y columns")
        if labels:
            p.add_argument("--labels", help="single-column CSV of labels")

    def fit_flags(p):
        p.add_argument("--variant", choices=("adaptive", "spatial", "oracle"))
        p.add_argument("--iters", type=_positive_int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--omega-rel", type=float)
        p.add_argument("--p-target", type=float)

    def read_flags(p):
        p.add_argument("--reads-total", type=int)
        p.add_argument("--reads-per-pixel-target", type=float)

    p = add("denoise", "denoise a counts matrix")
    data_flags(p)
    fit_flags(p)
    p.add_argument("--reads", help="single-column CSV of per-pixel reads (default: row sums)")
    p.add_argument("--truth", help="reference matrix (.mtx) for the oracle variant")
    p.add_argument("--plot", action="store_true")

    p = add("simulate", "generate a synthetic image and noisy counts")
    read_flags(p)
    p.add_argument("--grid", type=int, nargs=2, metavar=("W", "H"))
    p.add_argument("--genes", type=_positive_int)
    p.add_argument("--regions", type=_positive_int)
    p.add_argument("--sharpness", type=float)
    p.add_argument("--family", choices=("multinomial", "poisson"))
    p.add_argument("--plot", action="store_true")

    p = add("downsample", "keep a random subset of reads")
    p.add_argument("--counts")
    read_flags(p)

    p = add("evaluate", "score a denoised matrix against a reference")
    data_flags(p)
    p.add_argument("--denoised", help="denoised matrix (.mtx)")
    p.add_argument("--plot", action="store_true")

    for name in ("denoise-test", "interp-test"):
        p = add(name, f"{name.split('-')[0]} test on a deep counts matrix")
        data_flags(p)
        fit_flags(p)
        read_flags(p)
        p.add_argument("--repeats", type=_positive_int)
        p.add_argument("--workers", type=_positive_int)
        p.add_argument("--plot", action="store_true")
        if name == "interp-test":
            p.add_argument("--pixels-keep", type=float, help="fraction (<= 1) or count of pixels")

    p = add("autotune", "print the resolved hyperparameters")
    data_flags(p, labels=False)
    fit_flags(p)
    p.add_argument("--reads")
    return parser


def _load_config_file(path):
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:
            raise ValueError("TOML config files need Python >= 3.11; use JSON") from None
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    return {k.replace("-", "_"): v for k, v in data.items()}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = _load_config_file(args.config)
        except (OSError, ValueError) as exc:
            parser.exit(2, f"stark: error: config {args.config}: {exc}\n")
        for key, value in values.items():
            if not hasattr(args, key):
                parser.exit(2, f"stark: error: config key {key!r} is not a flag of {args.command}\n")
            if getattr(args, key) is None:
                setattr(args, key, value)
    return args


def _get(args, name, default=None):
    v = getattr(args, name, None)
    return default if v is None else v


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ValueError("missing required flag(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _out_dir(args) -> Path:
    out = Path(_get(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_inputs(args, need_coords=True):
    with stage("load"):
        _require(args, "counts", *(["coords"] if need_coords else []))
        C = io.load_counts(args.counts)
        P = io.load_coordinates(args.coords) if need_coords else None
        labels = io.load_labels(args.labels) if getattr(args, "labels", None) else None
        if P is not None:
            io.check_dimensions(C, P, labels)
    return C, P, labels


def _run_config(args) -> RunConfig:
    return RunConfig(
        variant=_get(args, "variant", "adaptive"),
        reads_total=_get(args, "reads_total"),
        reads_per_pixel_target=_get(args, "reads_per_pixel_target"),
        pixels_keep=_get(args, "pixels_keep"),
        n_iter=_get(args, "iters", 7),
        alpha=_get(args, "alpha"),
        omega_rel=_get(args, "omega_rel", 6.0),
        p_target=_get(args, "p_target", 0.7),
        seed=_get(args, "seed", 0),
        repeats=_get(args, "repeats", 1),
        workers=_get(args, "workers", 1),
        metrics=MetricConfig(),
    )


def cmd_denoise(args) -> dict:
    C, P, labels = _load_inputs(args)
    with stage("load"):
        reads = io.load_reads(args.reads) if args.reads else np.asarray(C.sum(axis=1)).ravel()
        io.check_dimensions(C, P, reads=reads)
        F_star = io.load_matrix(args.truth) if args.truth else None
        cfg = _run_config(args)
        if cfg.variant == "oracle" and F_star is None:
            raise ValueError("--variant oracle needs --truth")
    Y = np.asarray(row_normalize(C).toarray())
    with stage("denoise"):
        model = denoise(Y, reads, P, cfg, F_star=F_star)
        F_bar, n_deg = simplex_threshold(model.fitted, return_count=True)
    out = _out_dir(args)
    with stage("write"):
        io.write_matrix(out / "denoised.mtx", F_bar)
        report = {
            "kind": "denoise",
            "config": cfg.to_dict(),
            "hyperparameters": model.hyperparameters.to_dict(),
            "trace": model.trace.to_dict(),
            "degenerate_rows": n_deg,
            "provenance": provenance(cfg),
        }
        io.write_report(out / "report.json", report)
        if args.plot and labels is not None:
            Z, Zb = shared_pca_scores(Y, F_bar, cfg.metrics)
            pred = knn_classify(Z, labels, Zb, cfg.metrics.classifier_k)
            io.write_label_svg(out / "labels_denoised.svg", P, pred, title="transferred labels")
    return report


def cmd_simulate(args) -> dict:
    with stage("simulate"):
        w, h = _get(args, "grid", (20, 20))
        d = _get(args, "genes", 20)
        seed = _get(args, "seed", 0)
        img = make_synthetic(w, h, d, _get(args, "regions", 2), _get(args, "sharpness", 2.0), seed=(seed, 0))
        m = img.pixels.shape[0]
        if args.reads_total is not None:
            R = args.reads_total
        else:
            R = int(round(_get(args, "reads_per_pixel_target", 100.0) * m))
        family = _get(args, "family", "multinomial")
        reads = sample_reads(R, m=m, family=family, seed=(seed, 1))
        C = sample_counts(img.F_star, reads, seed=(seed, 2))
    out = _out_dir(args)
    with stage("write"):
        io.write_counts(out / "counts.mtx", sp.csr_matrix(C))
        io.write_coordinates(out / "coords.csv", img.pixels)
        io.write_column(out / "labels.csv", "label", img.labels)
        io.write_column(out / "reads.csv", "reads", reads)
        io.write_matrix(out / "truth.mtx", img.F_star)
        report = {
            "kind": "simulate",
            "grid": [w, h],
            "genes": d,
            "reads_total": int(R),
            "family": family,
            "provenance": {"prng": provenance(RunConfig(seed=seed))["prng"], "master_seed": seed},
        }
        io.write_report(out / "report.json", report)
        if args.plot:
            io.write_label_svg(out / "labels.svg", img.pixels, img.labels, title="ground truth")
    return report


def cmd_downsample(args) -> dict:
    C, _, _ = _load_inputs(args, need_coords=False)
    with stage("downsample"):
        cfg = RunConfig(
            reads_total=args.reads_total,
            reads_per_pixel_target=args.reads_per_pixel_target,
            seed=_get(args, "seed", 0),
        )
        R = cfg.resolve_reads(C.shape[0], int(C.sum()))
        C_ds = downsample_counts(C, R, seed=(cfg.seed, 0, 0))
    out = _out_dir(args)
    with stage("write"):
        io.write_counts(out / "counts.mtx", C_ds)
    return {"kind": "downsample", "reads_total": R}


def cmd_evaluate(args) -> dict:
    C, P, labels = _load_inputs(args, need_coords=bool(args.coords))
    with stage("load"):
        _require(args, "denoised")
        F_bar = io.load_matrix(args.denoised)
    with stage("evaluate"):
        F0 = np.asarray(row_normalize(C).toarray())
        cfg = MetricConfig()
        report = {"kind": "evaluate", "metrics": evaluate_all(F0, F_bar, labels, cfg).to_dict(),
                  "metric_config": vars(cfg).copy()}
    out = _out_dir(args)
    with stage("write"):
        io.write_report(out / "report.json", report)
        if args.plot and labels is not None and P is not None:
            Z, Zb = shared_pca_scores(F0, F_bar, cfg)
            pred = knn_classify(Z, labels, Zb, cfg.classifier_k)
            io.write_label_svg(out / "labels_transferred.svg", P, pred)
    return report


def _cmd_test(args, kind) -> dict:
    C, P, labels = _load_inputs(args)
    with stage(f"{kind}-test"):
        cfg = _run_config(args)
        report, F_bar = run_test(C, P, labels, cfg, kind=kind)
    out = _out_dir(args)
    with stage("write"):
        io.write_report(out / "report.json", report)
        io.write_matrix(out / "denoised.mtx", F_bar)
        if args.plot and labels is not None:
            F0 = np.asarray(row_normalize(C).toarray())
            Z, Zb = shared_pca_scores(F0, F_bar, cfg.metrics)
            pred = knn_classify(Z, labels, Zb, cfg.metrics.classifier_k)
            io.write_label_svg(out / "labels_truth.svg", P, labels, title="reference labels")
            io.write_label_svg(out / "labels_denoised.svg", P, pred, title="transferred labels")
    return report


def cmd_denoise_test(args) -> dict:
    return _cmd_test(args, "denoise")


def cmd_interp_test(args) -> dict:
    return _cmd_test(args, "interp")


def cmd_autotune(args) -> dict:
    C, P, _ = _load_inputs(args)
    with stage("autotune"):
        reads = io.load_reads(args.reads) if args.reads else np.asarray(C.sum(axis=1)).ravel()
        io.check_dimensions(C, P, reads=reads)
        Y = np.asarray(row_normalize(C).toarray())
        hp = autotune(
            Y, reads, P,
            alpha=_get(args, "alpha"), omega_rel=_get(args, "omega_rel", 6.0),
            p_target=_get(args, "p_target", 0.7), n_iter=_get(args, "iters", 7),
        )
    report = {"kind": "autotune", "hyperparameters": hp.to_dict()}
    if args.out:
        io.write_report(_out_dir(args) / "hyperparameters.json", report)
    else:
        sys.stdout.write(io.dump_report(report))
    return report


HANDLERS = {
    "denoise": cmd_denoise,
    "simulate": cmd_simulate,
    "downsample": cmd_downsample,
    "evaluate": cmd_evaluate,
    "denoise-test": cmd_denoise_test,
    "interp-test": cmd_interp_test,
    "autotune": cmd_autotune,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        HANDLERS[args.command](args)
    except StageError as exc:
        print(f"stark {args.command}: {exc}", file=sys.stderr)
        numerical = isinstance(exc.original, (NumericalError, np.linalg.LinAlgError))
        return 1 if numerical else 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
