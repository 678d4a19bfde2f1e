"""Command-line surface for the writing-style classification pipeline.

Commands: gen-dataset, train, evaluate, predict, segment, ablation-dwt,
block-transfer, bench.  Exit codes: 0 success, 1 usage error, 2 data
error, 3 solver convergence failure.

Every command is deterministic for fixed flags and seed (bench timings
excepted), and commands that fan out work across pages or grid cells
produce identical outputs for any ``--jobs`` value: workers only map a
pure function over an ordered task list.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, fields

from .exceptions import ConvergenceError, DataError, TexwaveError
from .experiments import (
    NO_TEXT_LABEL,
    format_label_grid,
    grid_table_text,
    json_text,
    report_to_json,
    run_ablation,
    run_bench,
    run_block_transfer,
    run_evaluate,
    run_predict,
    run_segment,
    run_train,
)
from .imagecore import load_pgm
from .preprocess import BlockGridConfig
from .svm import KernelParams, load_model, save_model
from .synth import NoiseSpec, default_styles, emphasis_variants, gen_dataset

__all__ = ["RunConfig", "UsageError", "main"]

_DEFAULT_TRANSFER_SIZES = (96, 144, 192, 240, 288, 336)
_DEFAULT_BENCH_SIZES = (128, 256, 512)


class UsageError(Exception):
    """Flag combination or value outside the documented ranges."""


class _Parser(argparse.ArgumentParser):
    """argparse parser whose errors map to exit code 1, not argparse's 2."""

    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one command invocation.

    Defaults reproduce the canonical pipeline settings: 3 decomposition
    levels, the complex transform, 10 folds, 96x96 blocks.
    """

    command: str
    manifest: str = None
    model: str = None
    image: str = None
    truth: str = None
    out: str = None
    block_w: int = 96
    block_h: int = 96
    stride_x: int = None
    stride_y: int = None
    ink_threshold: float = 0.05
    transform: str = "dtcwt"
    levels: int = 3
    folds: int = 10
    seed: int = 0
    jobs: int = 1
    svm_c: float = 10.0
    svm_gamma: float = 0.1
    c_grid: tuple = None
    gamma_grid: tuple = None
    styles: int = 8
    pages: int = 4
    noise: str = "none"
    emphasis: bool = False
    page_w: int = 384
    page_h: int = 384
    sizes: tuple = None
    runs: int = 20

    def __post_init__(self):
        checks = [
            (self.block_w >= 16 and self.block_h >= 16,
             "block size must be >= 16"),
            (self.stride_x is None or self.stride_x >= 1,
             "stride-x must be >= 1"),
            (self.stride_y is None or self.stride_y >= 1,
             "stride-y must be >= 1"),
            (0.0 < self.ink_threshold < 1.0,
             "ink-threshold must be in (0, 1)"),
            (self.transform in ("dtcwt", "dwt"),
             "transform must be dtcwt or dwt"),
            (1 <= self.levels <= 6, "levels must be in 1..6"),
            (self.folds >= 2, "folds must be >= 2"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.jobs >= 1, "jobs must be >= 1"),
            (self.svm_c > 0.0, "svm-c must be > 0"),
            (self.svm_gamma > 0.0, "svm-gamma must be > 0"),
            (self.styles >= 2, "styles must be >= 2"),
            (self.pages >= 1, "pages must be >= 1"),
            (self.noise in ("none", "low", "high"),
             "noise must be none, low, or high"),
            (self.page_w >= 192 and self.page_h >= 192,
             "page size must be >= 192"),
            (self.runs >= 1, "runs must be >= 1"),
        ]
        if self.c_grid is not None:
            checks.append((all(1.0 <= c <= 1e6 for c in self.c_grid),
                           "c-grid values must be in [1, 1e6]"))
        if self.gamma_grid is not None:
            checks.append((all(1e-6 <= g <= 1.0 for g in self.gamma_grid),
                           "gamma-grid values must be in [1e-6, 1]"))
        if self.sizes is not None:
            checks.append((len(self.sizes) >= 1
                           and all(s >= 16 for s in self.sizes),
                           "sizes must be >= 16"))
        for ok, message in checks:
            if not ok:
                raise UsageError(message)

    def grid_config(self):
        return BlockGridConfig(
            block_width=self.block_w,
            block_height=self.block_h,
            stride_x=self.stride_x,
            stride_y=self.stride_y,
            ink_ratio_threshold=self.ink_threshold,
        )

    def echo(self):
        """Config dict embedded in reports.

        Excludes ``jobs`` and ``out``: worker count must never change
        report content, and the report's own location is not part of it.
        """
        skip = {"jobs", "out"}
        payload = {}
        for spec in fields(self):
            if spec.name in skip:
                continue
            value = getattr(self, spec.name)
            if value is None:
                continue
            payload[spec.name] = list(value) if isinstance(value, tuple) \
                else value
        return payload


@contextmanager
def _pool_mapper(jobs):
    """Order-preserving map, parallel when more than one worker is asked."""
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool.map


def _load_image(path):
    try:
        with open(path, "rb") as handle:
            return load_pgm(handle.read())
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def cmd_gen_dataset(cfg):
    styles = default_styles(cfg.styles)
    if cfg.emphasis:
        styles = [v for base in styles for v in emphasis_variants(base)]
    manifest = gen_dataset(styles, cfg.pages, NoiseSpec(regime=cfg.noise),
                           cfg.seed, cfg.out, cfg.page_w, cfg.page_h)
    print(f"wrote {len(styles) * cfg.pages} pages and {manifest}")
    return 0


def cmd_train(cfg):
    with _pool_mapper(cfg.jobs) as mapper:
        model, best, table, self_test = run_train(
            cfg.manifest, cfg.grid_config(), cfg.levels, cfg.transform,
            cfg.c_grid, cfg.gamma_grid, cfg.folds, cfg.seed, mapper,
        )
    save_model(model, cfg.out)
    grid_path = cfg.out + ".grid.csv"
    _write_text(grid_path, grid_table_text(table))
    print(f"best c={best.c:.10g} gamma={best.gamma:.10g}")
    print(f"self-test accuracy {self_test:.6f}")
    print(f"wrote {cfg.out} and {grid_path}")
    return 0


def cmd_evaluate(cfg):
    params = KernelParams(c=cfg.svm_c, gamma=cfg.svm_gamma)
    with _pool_mapper(cfg.jobs) as mapper:
        report = run_evaluate(
            cfg.manifest, cfg.grid_config(), cfg.levels, cfg.transform,
            params, cfg.folds, cfg.seed, mapper, cfg.echo(),
        )
    _write_text(cfg.out, report_to_json(report))
    print(f"mean accuracy {report.mean_accuracy:.6f}")
    print(f"wrote {cfg.out}")
    return 0


def cmd_predict(cfg):
    model = load_model(cfg.model)
    img = _load_image(cfg.image)
    rows, majority = run_predict(model, img, cfg.grid_config(), cfg.levels,
                                 cfg.transform)
    text = format_label_grid(rows) + f"majority {majority}\n"
    sys.stdout.write(text)
    if cfg.out:
        _write_text(cfg.out, text)
    return 0


def cmd_segment(cfg):
    model = load_model(cfg.model)
    img = _load_image(cfg.image)
    truth_text = None
    if cfg.truth:
        try:
            with open(cfg.truth, "r", encoding="utf-8") as handle:
                truth_text = handle.read()
        except OSError as exc:
            raise DataError(f"{cfg.truth}: {exc}") from exc
    rows, accuracy, scored = run_segment(model, img, cfg.grid_config(),
                                         cfg.levels, cfg.transform,
                                         truth_text)
    _write_text(cfg.out, format_label_grid(rows))
    print(f"wrote {cfg.out}")
    if accuracy is not None:
        print(f"accuracy {accuracy:.6f} over {scored} scored blocks")
    return 0


def cmd_ablation_dwt(cfg):
    params = KernelParams(c=cfg.svm_c, gamma=cfg.svm_gamma)
    with _pool_mapper(cfg.jobs) as mapper, \
            tempfile.TemporaryDirectory() as workdir:
        payload = run_ablation(workdir, cfg.grid_config(), cfg.levels,
                               params, cfg.pages, cfg.folds, cfg.seed,
                               mapper, cfg.echo())
    _write_text(cfg.out, json_text(payload))
    for transform in ("dtcwt", "dwt"):
        part = payload[transform]
        style_cell = part["font_style_percent"]["correct_font_wrong_style"]
        print(f"{transform}: accuracy {part['mean_accuracy']:.6f} "
              f"style-confusion {style_cell:.4f}%")
    print(f"wrote {cfg.out}")
    return 0


def cmd_block_transfer(cfg):
    model = load_model(cfg.model)
    sizes = cfg.sizes or _DEFAULT_TRANSFER_SIZES
    with _pool_mapper(cfg.jobs) as mapper:
        payload = run_block_transfer(model, cfg.manifest, sizes, cfg.levels,
                                     cfg.transform, cfg.ink_threshold,
                                     mapper, cfg.echo())
    _write_text(cfg.out, json_text(payload))
    for row in payload["rows"]:
        print(f"{row['block_size']:4d} accuracy {row['accuracy']:.6f} "
              f"({row['n_blocks']} blocks)")
    print(f"wrote {cfg.out}")
    return 0


def cmd_bench(cfg):
    sizes = cfg.sizes or _DEFAULT_BENCH_SIZES
    payload = run_bench(sizes, cfg.runs, cfg.levels, cfg.transform, cfg.seed)
    _write_text(cfg.out, json_text(payload))
    for key, value in payload["ratios"].items():
        print(f"ratio {key} = {value:.3f}")
    print(f"wrote {cfg.out}")
    return 0


def _int_list(text):
    return tuple(int(token) for token in text.split(",") if token)


def _float_list(text):
    return tuple(float(token) for token in text.split(",") if token)


def _add_block_flags(parser):
    parser.add_argument("--block-w", type=int, default=96,
                        help="block width in pixels, >= 16 (default 96)")
    parser.add_argument("--block-h", type=int, default=96,
                        help="block height in pixels, >= 16 (default 96)")
    parser.add_argument("--stride-x", type=int, default=None,
                        help="horizontal stride (default: block width)")
    parser.add_argument("--stride-y", type=int, default=None,
                        help="vertical stride (default: block height)")
    parser.add_argument("--ink-threshold", type=float, default=0.05,
                        help="ink/background ratio below which a block is "
                             "empty, in (0, 1) (default 0.05)")


def _add_feature_flags(parser):
    parser.add_argument("--transform", choices=("dtcwt", "dwt"),
                        default="dtcwt",
                        help="feature transform (default dtcwt)")
    parser.add_argument("--levels", type=int, default=3,
                        help="decomposition levels, 1..6 (default 3)")


def _add_seed_flag(parser):
    parser.add_argument("--seed", type=int, default=0,
                        help="base seed, >= 0 (default 0)")


def _add_jobs_flag(parser):
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes, >= 1; results are "
                             "identical for any value (default 1)")


def build_parser():
    parser = _Parser(prog="texwave",
                     description="Texture-based writing-style classification")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    p = sub.add_parser("gen-dataset", help="generate a synthetic page set")
    p.add_argument("--styles", type=int, default=8,
                   help="number of base styles, >= 2 (default 8)")
    p.add_argument("--pages", type=int, default=4,
                   help="pages per class, >= 1 (default 4)")
    p.add_argument("--noise", choices=("none", "low", "high"),
                   default="none", help="noise regime (default none)")
    p.add_argument("--emphasis", action="store_true",
                   help="expand each style into regular/italic/bold/"
                        "bold-italic variants")
    p.add_argument("--page-w", type=int, default=384,
                   help="page width, >= 192 (default 384)")
    p.add_argument("--page-h", type=int, default=384,
                   help="page height, >= 192 (default 384)")
    _add_seed_flag(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train",
                       help="grid-search and train a model on a manifest")
    p.add_argument("--manifest", required=True)
    _add_block_flags(p)
    _add_feature_flags(p)
    p.add_argument("--folds", type=int, default=10,
                   help="cross-validation folds, >= 2 (default 10)")
    _add_seed_flag(p)
    _add_jobs_flag(p)
    p.add_argument("--c-grid", type=_float_list, default=None,
                   help="comma-separated C values in [1, 1e6] "
                        "(default: 10^0..10^6)")
    p.add_argument("--gamma-grid", type=_float_list, default=None,
                   help="comma-separated gamma values in [1e-6, 1] "
                        "(default: 10^-6..10^0)")
    p.add_argument("--out", required=True,
                   help="model file path; the grid table lands at "
                        "<out>.grid.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate",
                       help="page-level cross-validation of the pipeline")
    p.add_argument("--manifest", required=True)
    _add_block_flags(p)
    _add_feature_flags(p)
    p.add_argument("--folds", type=int, default=10,
                   help="cross-validation folds, >= 2 (default 10)")
    _add_seed_flag(p)
    _add_jobs_flag(p)
    p.add_argument("--svm-c", type=float, default=10.0,
                   help="fixed C for evaluation, > 0 (default 10)")
    p.add_argument("--svm-gamma", type=float, default=0.1,
                   help="fixed gamma for evaluation, > 0 (default 0.1)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict",
                       help="per-block labels and page majority for an image")
    p.add_argument("--model", required=True)
    p.add_argument("image", help="PGM page to classify")
    _add_block_flags(p)
    _add_feature_flags(p)
    p.add_argument("--out", default=None,
                   help="also write the printed grid to this file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("segment",
                       help="label map of a collage, scored against truth")
    p.add_argument("--model", required=True)
    p.add_argument("image", help="PGM collage page")
    p.add_argument("--truth", default=None,
                   help="ground-truth label grid; cells ending in * are "
                        "boundary blocks excluded from scoring")
    _add_block_flags(p)
    _add_feature_flags(p)
    p.add_argument("--out", required=True, help="label map output path")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("ablation-dwt",
                       help="complex-vs-real transform ablation on the "
                            "emphasis set")
    _add_block_flags(p)
    p.add_argument("--levels", type=int, default=3,
                   help="decomposition levels, 1..6 (default 3)")
    p.add_argument("--pages", type=int, default=4,
                   help="pages per class, >= 1 (default 4)")
    p.add_argument("--folds", type=int, default=10,
                   help="cross-validation folds, >= 2 (default 10)")
    _add_seed_flag(p)
    _add_jobs_flag(p)
    p.add_argument("--svm-c", type=float, default=10.0,
                   help="fixed C, > 0 (default 10)")
    p.add_argument("--svm-gamma", type=float, default=0.1,
                   help="fixed gamma, > 0 (default 0.1)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_ablation_dwt)

    p = sub.add_parser("block-transfer",
                       help="accuracy of one model across test block sizes")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--sizes", type=_int_list, default=None,
                   help="comma-separated test block sizes "
                        "(default 96,144,192,240,288,336)")
    p.add_argument("--ink-threshold", type=float, default=0.05,
                   help="ink/background emptiness threshold (default 0.05)")
    _add_feature_flags(p)
    _add_jobs_flag(p)
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_block_transfer)

    p = sub.add_parser("bench",
                       help="feature-extraction scaling benchmark")
    p.add_argument("--sizes", type=_int_list, default=None,
                   help="comma-separated block sizes (default 128,256,512)")
    p.add_argument("--runs", type=int, default=20,
                   help="timed repetitions per size, >= 1 (default 20)")
    _add_feature_flags(p)
    _add_seed_flag(p)
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_bench)

    return parser


def _config_from_args(args):
    values = {spec.name: getattr(args, spec.name)
              for spec in fields(RunConfig) if hasattr(args, spec.name)}
    return RunConfig(**values)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = _config_from_args(args)
        return args.func(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 3
    except (TexwaveError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
