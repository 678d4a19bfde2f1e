"""End-to-end pipeline runners shared by the command-line tools.

Each runner turns inputs (manifests, images, models) into plain data
structures; the CLI layer only parses flags, calls a runner, and formats
output.  All runners are deterministic for fixed inputs and seed, and the
ones that fan out over pages or grid cells accept an order-preserving
``mapper`` (e.g. ``ProcessPoolExecutor.map``) so worker count never
changes results.

Report schema
-------------
Reports serialize as JSON with sorted keys, two-space indentation, and a
trailing newline, so identical runs produce identical bytes.  An
evaluation report object holds:

* ``classes``: sorted class labels.
* ``per_class_accuracy``: label -> fraction of that class's held-out
  blocks predicted correctly.
* ``mean_accuracy``: pooled accuracy over all held-out blocks
  (trace of the confusion matrix / total).
* ``fold_accuracies``: accuracy of each fold separately.
* ``confusion``: counts, rows = true class, columns = predicted class,
  in ``classes`` order.
* ``config``: echo of the run configuration (worker count and output
  paths excluded: they must not affect report content).
* ``tree_b_rule``: the second-tree filter derivation rule in effect.
"""

from __future__ import annotations

import json
import os
import statistics
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, DegenerateImageError
from .features import DTCWT_LAYOUT, DWT_LAYOUT, extract_features
from .imagecore import GrayImage, load_pgm
from .preprocess import (
    BlockGridConfig,
    binarize,
    is_empty,
    otsu_threshold,
    partition_blocks,
)
from .svm import KernelParams, cross_validate, grid_search, train_multiclass
from .synth import NoiseSpec, ablation_styles, gen_dataset, read_manifest, \
    mix_seed, uniform_field
from .wavelet import make_filter_bank

__all__ = [
    "EMPTY_LABEL",
    "NO_TEXT_LABEL",
    "EvalReport",
    "FeatureTable",
    "manifest_features",
    "layout_for",
    "feature_dim",
    "check_model_compatible",
    "report_to_json",
    "report_from_json",
    "json_text",
    "run_train",
    "run_evaluate",
    "run_predict",
    "run_segment",
    "run_ablation",
    "run_block_transfer",
    "run_bench",
    "font_of",
    "style_of",
    "font_style_cells",
    "format_label_grid",
    "parse_label_grid",
    "truth_grid_lines",
    "grid_table_text",
]

EMPTY_LABEL = "EMPTY"
NO_TEXT_LABEL = "NO_TEXT"

_BOUNDARY_MARK = "*"

# Solver settings for full-size training runs.  The iteration budget is
# generous because desk-scale problems converge in well under a second;
# hitting it raises ConvergenceError rather than returning silently.
_TRAIN_TOL = 1e-3
_TRAIN_MAX_PASSES = 100000


def layout_for(transform):
    """Feature layout tag produced by a transform choice."""
    if transform == "dtcwt":
        return DTCWT_LAYOUT
    if transform == "dwt":
        return DWT_LAYOUT
    raise ValueError(f"unknown transform {transform!r}")


def feature_dim(transform, levels):
    """Feature vector length for a transform at a decomposition depth."""
    per_level = 12 if transform == "dtcwt" else 6
    layout_for(transform)  # validates the transform name
    return per_level * levels


def check_model_compatible(model, transform, levels):
    """Reject feature settings that do not match a loaded model.

    Raises DataError naming both sides, e.g. when a DWT-trained model is
    asked to consume DT-CWT features.
    """
    want_layout = layout_for(transform)
    if model.layout != want_layout:
        raise DataError(
            f"model was trained on layout {model.layout!r} but transform "
            f"{transform!r} produces {want_layout!r}"
        )
    want_dim = feature_dim(transform, levels)
    have_dim = int(model.standardizer.mean.shape[0])
    if have_dim != want_dim:
        raise DataError(
            f"model expects {have_dim}-dimensional features but transform "
            f"{transform!r} at {levels} levels produces {want_dim}"
        )


# ---------------------------------------------------------------------------
# Manifest loading


@dataclass(frozen=True)
class FeatureTable:
    """Block features for a whole manifest.

    ``groups`` holds the manifest-relative page path of each row, so
    cross-validation can split by page.
    """

    matrix: np.ndarray
    labels: tuple
    groups: tuple
    layout: str


def _page_features_task(task):
    """Features of one page's occupied blocks; module-level for pickling.

    Returns (values-or-None, error-message-or-None); all failure modes
    are reported through the message so a pool can finish the batch and
    the caller can name every bad file at once.
    """
    abs_path, rel, cfg, levels, transform = task
    try:
        with open(abs_path, "rb") as handle:
            img = load_pgm(handle.read())
        blocks = _occupied_blocks_or_empty(img, cfg)
        if not blocks:
            raise DataError(
                f"no occupied {cfg.block_width}x{cfg.block_height} blocks"
            )
        values = [
            extract_features(b.pixels, levels=levels, transform=transform).values
            for b in blocks
        ]
    except (OSError, ValueError) as exc:
        return None, f"{rel}: {exc}"
    return np.asarray(values), None


def _occupied_blocks_or_empty(img, cfg):
    """Occupied blocks of a page; a constant page has none by definition."""
    try:
        threshold = otsu_threshold(img)
    except DegenerateImageError:
        return []
    mask = binarize(img, threshold)
    kept = []
    for block in partition_blocks(img, cfg):
        piece = mask.data[
            block.origin_y:block.origin_y + block.height,
            block.origin_x:block.origin_x + block.width,
        ]
        if not is_empty(block, type(mask)(piece), cfg.ink_ratio_threshold):
            kept.append(block)
    return kept


def manifest_features(manifest_path, cfg=None, levels=3, transform="dtcwt",
                      mapper=None):
    """Extract block features for every page listed in a manifest.

    Raises DataError listing every unreadable or degenerate (zero
    occupied blocks) page.
    """
    cfg = cfg if cfg is not None else BlockGridConfig()
    layout_for(transform)
    rows = read_manifest(manifest_path)
    if not rows:
        raise DataError(f"{manifest_path}: manifest is empty")
    base = os.path.dirname(os.path.abspath(manifest_path))
    tasks = [(os.path.join(base, rel), rel, cfg, levels, transform)
             for rel, _ in rows]
    results = list((mapper or map)(_page_features_task, tasks))
    errors = [err for _, err in results if err]
    if errors:
        raise DataError("unusable pages: " + "; ".join(errors))
    matrices, labels, groups = [], [], []
    for (rel, label), (values, _) in zip(rows, results):
        matrices.append(values)
        labels.extend([label] * len(values))
        groups.extend([rel] * len(values))
    return FeatureTable(
        matrix=np.vstack(matrices),
        labels=tuple(labels),
        groups=tuple(groups),
        layout=layout_for(transform),
    )


# ---------------------------------------------------------------------------
# Evaluation report


@dataclass(frozen=True)
class EvalReport:
    """Cross-validation outcome plus enough context to reproduce it."""

    classes: tuple
    per_class_accuracy: dict
    mean_accuracy: float
    fold_accuracies: tuple
    confusion: tuple           # tuple of tuples of int counts
    config: dict
    tree_b_rule: str


def json_text(payload):
    """Canonical JSON bytes-stable serialization used by every report."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_to_json(report):
    return json_text({
        "classes": list(report.classes),
        "per_class_accuracy": report.per_class_accuracy,
        "mean_accuracy": report.mean_accuracy,
        "fold_accuracies": list(report.fold_accuracies),
        "confusion": [list(row) for row in report.confusion],
        "config": report.config,
        "tree_b_rule": report.tree_b_rule,
    })


def report_from_json(text):
    payload = json.loads(text)
    return EvalReport(
        classes=tuple(payload["classes"]),
        per_class_accuracy=dict(payload["per_class_accuracy"]),
        mean_accuracy=payload["mean_accuracy"],
        fold_accuracies=tuple(payload["fold_accuracies"]),
        confusion=tuple(tuple(row) for row in payload["confusion"]),
        config=dict(payload["config"]),
        tree_b_rule=payload["tree_b_rule"],
    )


def _build_report(cv, config):
    per_class = {}
    confusion = np.asarray(cv.confusion)
    for i, label in enumerate(cv.classes):
        row_total = int(confusion[i].sum())
        per_class[label] = (float(confusion[i, i]) / row_total
                            if row_total else 0.0)
    return EvalReport(
        classes=tuple(cv.classes),
        per_class_accuracy=per_class,
        mean_accuracy=float(cv.mean_accuracy),
        fold_accuracies=tuple(float(a) for a in cv.fold_accuracies),
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        config=dict(config),
        tree_b_rule=make_filter_bank().tree_b_rule,
    )


def _require_multiclass(table):
    distinct = sorted(set(table.labels))
    if len(distinct) < 2:
        raise DataError(
            f"cross-validation needs at least 2 classes; manifest has "
            f"{distinct}"
        )


# ---------------------------------------------------------------------------
# Command runners


def run_evaluate(manifest_path, cfg, levels, transform, params, folds, seed,
                 mapper=None, config_echo=None):
    """Page-level stratified k-fold CV over a manifest at fixed params."""
    table = manifest_features(manifest_path, cfg, levels, transform, mapper)
    _require_multiclass(table)
    cv = cross_validate(table.matrix, list(table.labels), params, folds=folds,
                        seed=seed, groups=list(table.groups))
    return _build_report(cv, config_echo or {})


def grid_table_text(table):
    """CSV text of grid-search rows: header plus c,gamma,cv_accuracy."""
    lines = ["c,gamma,cv_accuracy"]
    for c, gamma, acc in table:
        lines.append(f"{c:.10g},{gamma:.10g},{acc:.17g}")
    return "\n".join(lines) + "\n"


def run_train(manifest_path, cfg, levels, transform, c_grid, gamma_grid,
              folds, seed, mapper=None):
    """Grid search, then train the final model on all data at the best cell.

    Returns (model, best_params, grid_table, self_test_accuracy).
    """
    table = manifest_features(manifest_path, cfg, levels, transform, mapper)
    _require_multiclass(table)
    best, grid_table = grid_search(
        table.matrix, list(table.labels), c_grid, gamma_grid,
        folds=folds, seed=seed, groups=list(table.groups), mapper=mapper,
    )
    model = train_multiclass(table.matrix, list(table.labels), best,
                             layout=table.layout, tol=_TRAIN_TOL,
                             max_passes=_TRAIN_MAX_PASSES)
    predictions = model.predict(table.matrix)
    hits = sum(p == t for p, t in zip(predictions, table.labels))
    self_test = hits / len(table.labels)
    return model, best, grid_table, self_test


def _block_label_grid(model, img, cfg, levels, transform):
    """Per-block predicted labels over the full page grid.

    Returns a list of rows (top to bottom) of labels; blocks below the
    ink-ratio threshold get EMPTY_LABEL.
    """
    check_model_compatible(model, transform, levels)
    blocks = partition_blocks(img, cfg)
    try:
        threshold = otsu_threshold(img)
        mask = binarize(img, threshold)
    except DegenerateImageError:
        mask = None  # constant page: every block is empty
    n_cols = (img.width - cfg.block_width) // cfg.stride_x + 1
    n_rows = (img.height - cfg.block_height) // cfg.stride_y + 1
    occupied = []
    flags = []
    for block in blocks:
        if mask is None:
            flags.append(False)
            continue
        piece = mask.data[
            block.origin_y:block.origin_y + block.height,
            block.origin_x:block.origin_x + block.width,
        ]
        empty = is_empty(block, type(mask)(piece), cfg.ink_ratio_threshold)
        flags.append(not empty)
        if not empty:
            occupied.append(block)
    if occupied:
        matrix = np.asarray([
            extract_features(b.pixels, levels=levels, transform=transform).values
            for b in occupied
        ])
        predicted = iter(model.predict(matrix))
    else:
        predicted = iter(())
    labels = [next(predicted) if flag else EMPTY_LABEL for flag in flags]
    assert len(labels) == n_rows * n_cols
    return [labels[r * n_cols:(r + 1) * n_cols] for r in range(n_rows)]


def run_predict(model, img, cfg, levels, transform):
    """Per-block labels plus the page-level majority.

    EMPTY blocks never vote; an all-empty page yields NO_TEXT_LABEL.
    Ties resolve to the lexicographically smallest label.
    """
    rows = _block_label_grid(model, img, cfg, levels, transform)
    votes = Counter(label for row in rows for label in row
                    if label != EMPTY_LABEL)
    if not votes:
        return rows, NO_TEXT_LABEL
    top = max(votes.values())
    majority = min(label for label, count in votes.items() if count == top)
    return rows, majority


def format_label_grid(rows):
    """Text form of a label grid: one line per block row, space-separated."""
    return "\n".join(" ".join(row) for row in rows) + "\n"


def parse_label_grid(text):
    """Inverse of format_label_grid (cells keep any boundary marks)."""
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if not rows:
        raise DataError("label grid is empty")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise DataError("label grid rows have unequal lengths")
    return rows


def truth_grid_lines(region_map, page_width, page_height, cfg):
    """Ground-truth label grid for a collage, boundary blocks starred.

    Cells are the region label owning each block's center; blocks that
    straddle a region boundary carry a trailing ``*`` so scoring can
    exclude them.
    """
    entries = region_map.block_truth(page_width, page_height, cfg)
    n_cols = (page_width - cfg.block_width) // cfg.stride_x + 1
    cells = [label + (_BOUNDARY_MARK if straddles else "")
             for _, _, label, straddles in entries]
    return [" ".join(cells[r * n_cols:(r + 1) * n_cols])
            for r in range(len(cells) // n_cols)]


def run_segment(model, img, cfg, levels, transform, truth_text=None):
    """Label map for a collage page, scored against optional ground truth.

    Returns (rows, accuracy, scored_blocks); accuracy is None without
    truth.  Scoring skips truth cells marked with ``*`` (boundary
    straddlers) and blocks predicted EMPTY.  A truth grid whose shape
    differs from the computed block grid raises DataError.
    """
    rows = _block_label_grid(model, img, cfg, levels, transform)
    if truth_text is None:
        return rows, None, 0
    truth_rows = parse_label_grid(truth_text)
    if (len(truth_rows) != len(rows)
            or len(truth_rows[0]) != len(rows[0])):
        raise DataError(
            f"truth grid is {len(truth_rows)}x{len(truth_rows[0])} but the "
            f"block grid is {len(rows)}x{len(rows[0])}"
        )
    hits = scored = 0
    for pred_row, truth_row in zip(rows, truth_rows):
        for pred, truth in zip(pred_row, truth_row):
            if truth.endswith(_BOUNDARY_MARK) or pred == EMPTY_LABEL:
                continue
            scored += 1
            hits += (pred == truth)
    accuracy = hits / scored if scored else 0.0
    return rows, accuracy, scored


# ---------------------------------------------------------------------------
# Ablation: complex transform vs real separable baseline


def font_of(label):
    """Base-font part of a class label (strips emphasis suffixes)."""
    for suffix in ("_bi", "_b", "_i"):
        if label.endswith(suffix):
            return label[:-len(suffix)]
    return label


def style_of(label):
    """Emphasis part of a class label: regular, i, b, or bi."""
    for suffix in ("_bi", "_b", "_i"):
        if label.endswith(suffix):
            return suffix[1:]
    return "regular"


def font_style_cells(classes, confusion):
    """2x2 correct/wrong font-by-style percentages of a confusion matrix.

    Cell keys: correct_font_correct_style (the diagonal plus any pair
    agreeing on both axes), correct_font_wrong_style, and so on.  Values
    are percentages of all counted blocks and sum to 100.
    """
    confusion = np.asarray(confusion, dtype=float)
    total = confusion.sum()
    cells = {
        "correct_font_correct_style": 0.0,
        "correct_font_wrong_style": 0.0,
        "wrong_font_correct_style": 0.0,
        "wrong_font_wrong_style": 0.0,
    }
    for i, true_label in enumerate(classes):
        for j, pred_label in enumerate(classes):
            font_ok = font_of(true_label) == font_of(pred_label)
            style_ok = style_of(true_label) == style_of(pred_label)
            key = (f"{'correct' if font_ok else 'wrong'}_font_"
                   f"{'correct' if style_ok else 'wrong'}_style")
            cells[key] += confusion[i, j]
    return {key: 100.0 * value / total for key, value in cells.items()}


def run_ablation(workdir, cfg, levels, params, pages, folds, seed,
                 mapper=None, config_echo=None):
    """Identical CV with both transforms on the emphasis-variant set.

    Generates the two-font x four-emphasis dataset into ``workdir``,
    then cross-validates with DT-CWT features and with DWT features on
    the same pages and folds.  Returns a JSON-ready dict with, per
    transform, the mean accuracy, full confusion matrix, and the 2x2
    font-by-style percentage table.
    """
    manifest = gen_dataset(ablation_styles(), pages, NoiseSpec(regime="none"),
                           seed, workdir)
    payload = {"config": dict(config_echo or {}),
               "tree_b_rule": make_filter_bank().tree_b_rule}
    for transform in ("dtcwt", "dwt"):
        table = manifest_features(manifest, cfg, levels, transform, mapper)
        cv = cross_validate(table.matrix, list(table.labels), params,
                            folds=folds, seed=seed,
                            groups=list(table.groups))
        payload[transform] = {
            "classes": list(cv.classes),
            "mean_accuracy": float(cv.mean_accuracy),
            "confusion": [[int(v) for v in row] for row in cv.confusion],
            "font_style_percent": font_style_cells(cv.classes, cv.confusion),
        }
    return payload


# ---------------------------------------------------------------------------
# Block-size transfer


def run_block_transfer(model, manifest_path, sizes, levels, transform,
                       ink_threshold, mapper=None, config_echo=None):
    """Accuracy of one trained model on re-partitions at several block sizes.

    Each size re-cuts the test pages into size x size blocks (stride =
    size) and scores the model per block.  Returns a JSON-ready dict
    whose ``rows`` hold, per size, the accuracy, block count, confusion
    counts, and confusion percentages (cells summing to 100).
    """
    check_model_compatible(model, transform, levels)
    classes = list(model.classes)
    index = {label: k for k, label in enumerate(classes)}
    rows = []
    for size in sizes:
        cfg = BlockGridConfig(block_width=size, block_height=size,
                              ink_ratio_threshold=ink_threshold)
        table = manifest_features(manifest_path, cfg, levels, transform,
                                  mapper)
        unknown = sorted(set(table.labels) - set(classes))
        if unknown:
            raise DataError(
                f"manifest labels {unknown} are not classes of the model"
            )
        predicted = model.predict(table.matrix)
        confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for true_label, pred_label in zip(table.labels, predicted):
            confusion[index[true_label], index[pred_label]] += 1
        total = int(confusion.sum())
        rows.append({
            "block_size": int(size),
            "n_blocks": total,
            "accuracy": float(np.trace(confusion)) / total,
            "confusion": [[int(v) for v in row] for row in confusion],
            "confusion_percent": [
                [100.0 * int(v) / total for v in row] for row in confusion
            ],
        })
    return {
        "classes": classes,
        "rows": rows,
        "config": dict(config_echo or {}),
    }


# ---------------------------------------------------------------------------
# Scaling benchmark


def run_bench(sizes=(128, 256, 512), runs=20, levels=3, transform="dtcwt",
              seed=0):
    """Median feature-extraction time per block size, plus pairwise ratios.

    Blocks are seeded uniform-noise images, so reruns time identical
    inputs; the timings themselves naturally vary.  Runs are interleaved
    across sizes (round-robin) so clock-speed drift during the sweep
    slows every size equally instead of penalizing whichever size is
    timed last.  Ratio keys read "bigger/smaller" for consecutive sizes.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    layout_for(transform)
    ordered = [int(s) for s in sizes]
    images = {
        size: GrayImage(uniform_field(mix_seed(seed, size), (size, size)))
        for size in ordered
    }
    times = {size: [] for size in ordered}
    for size in ordered:  # warm-up
        extract_features(images[size], levels=levels, transform=transform)
    for _ in range(runs):
        for size in ordered:
            start = time.perf_counter()
            extract_features(images[size], levels=levels,
                             transform=transform)
            times[size].append(time.perf_counter() - start)
    medians = {size: statistics.median(times[size]) for size in ordered}
    ratios = {}
    for small, big in zip(ordered, ordered[1:]):
        ratios[f"{big}/{small}"] = medians[big] / medians[small]
    return {
        "schema": "texwave-bench v1",
        "transform": transform,
        "levels": int(levels),
        "runs": int(runs),
        "sizes": ordered,
        "median_seconds": {str(size): medians[size] for size in ordered},
        "ratios": ratios,
    }
