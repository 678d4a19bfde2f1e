"""RBF-kernel support-vector classification with an SMO solver.

The binary solver optimizes the standard soft-margin dual

    max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C,   sum_i a_i y_i = 0

by sequential minimal optimization with maximal-violating-pair working-set
selection: at each step the most KKT-violating pair (one index from the
"can increase" set, one from the "can decrease" set) is optimized in closed
form.  Convergence is declared when the maximal violation drops to ``tol``.

Multiclass problems are handled one-vs-one: one binary machine per class
pair, majority vote at prediction time, ties resolved toward the earliest
class in the model's ordered class list.

Kernel rows are served through a least-recently-used cache keyed by sample
index, so memory stays bounded for large training sets while small problems
effectively enjoy a full Gram matrix.
"""

from __future__ import annotations

import itertools
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import ConvergenceError, ModelFormatError, SizeError
from .features import (
    FeatureVector,
    Standardizer,
    standardizer_from_matrix,
)

_DEFAULT_C_GRID = tuple(10.0 ** k for k in range(0, 7))
_DEFAULT_GAMMA_GRID = tuple(10.0 ** k for k in range(-6, 1))

_MODEL_HEADER = "TEXWAVE-SVM v1"

# Tolerance (relative to max(1, C)) for treating an alpha as sitting on a
# box bound; absorbs float rounding in the coupled pair updates.
_BOUND_EPS = 1e-12


@dataclass(frozen=True)
class KernelParams:
    """RBF kernel and regularization parameters: k(x,y)=exp(-gamma*||x-y||^2)."""

    c: float
    gamma: float

    def __post_init__(self):
        if not (self.c > 0.0 and np.isfinite(self.c)):
            raise ValueError(f"c must be finite and > 0, got {self.c}")
        if not (self.gamma > 0.0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")


def _as_matrix(x):
    """Coerce FeatureVector / 1-D / 2-D input to a float64 (n, d) matrix."""
    if isinstance(x, FeatureVector):
        x = x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise SizeError(f"expected 1-D or 2-D data, got ndim={arr.ndim}")
    return arr


def rbf_kernel(x, y, gamma):
    """Evaluate exp(-gamma * ||x - y||^2) for a single pair of vectors."""
    if isinstance(x, FeatureVector) and isinstance(y, FeatureVector):
        if x.layout != y.layout:
            raise SizeError(
                f"layout mismatch: {x.layout!r} vs {y.layout!r}"
            )
    xv = np.asarray(x.values if isinstance(x, FeatureVector) else x, float)
    yv = np.asarray(y.values if isinstance(y, FeatureVector) else y, float)
    if xv.shape != yv.shape:
        raise SizeError(f"shape mismatch: {xv.shape} vs {yv.shape}")
    diff = xv - yv
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_matrix(a, b, gamma):
    """Pairwise RBF kernel matrix between the rows of two (n, d) arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sq = (
        (a * a).sum(axis=1)[:, np.newaxis]
        + (b * b).sum(axis=1)[np.newaxis, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class _RowCache:
    """LRU cache of kernel rows keyed by training-sample index."""

    def __init__(self, data, gamma, capacity):
        self._data = data
        self._gamma = gamma
        self._norms = (data * data).sum(axis=1)
        self._capacity = max(1, int(capacity))
        self._rows = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i):
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        sq = self._norms + self._norms[i] - 2.0 * (self._data @ self._data[i])
        np.maximum(sq, 0.0, out=sq)
        row = np.exp(-self._gamma * sq)
        row[i] = 1.0
        if len(self._rows) >= self._capacity:
            self._rows.popitem(last=False)
        self._rows[i] = row
        return row


@dataclass(frozen=True)
class BinarySvm:
    """A trained two-class machine: f(x) = sum_k coef_k K(sv_k, x) + bias."""

    support_vectors: np.ndarray  # (m, d)
    dual_coef: np.ndarray        # (m,), values alpha_k * y_k
    bias: float
    params: KernelParams
    sv_index: np.ndarray         # (m,) indices into the training set
    n_iter: int

    def decision_function(self, x):
        """Signed decision values for each row of x."""
        x = _as_matrix(x)
        k = rbf_matrix(self.support_vectors, x, self.params.gamma)
        return self.dual_coef @ k + self.bias


def _selection_sets(alpha, y, c, eps):
    """Masks of indices whose alpha can move up (I_up) or down (I_low).

    ``eps`` (relative to C) absorbs float rounding so an alpha a few ulps
    off a box bound still counts as bounded.
    """
    at_lower = alpha <= eps
    at_upper = alpha >= c - eps
    pos = y > 0
    up = (pos & ~at_upper) | (~pos & ~at_lower)
    low = (~pos & ~at_upper) | (pos & ~at_lower)
    return up, low


def train_binary(data, labels, params, tol=1e-3, max_passes=100,
                 cache_size=4096):
    """Train a soft-margin RBF SVM on labels in {-1, +1} via SMO.

    Runs maximal-violating-pair SMO until the largest KKT violation is at
    most ``tol``.  The bias is the mean of ``y_k - f(x_k)`` over unbounded
    support vectors (0 < alpha < C), or the midpoint of the feasible KKT
    interval when every alpha sits at a bound.

    Raises
    ------
    ValueError
        If labels are not drawn from {-1, +1} or only one class is present.
    ConvergenceError
        If more than ``max_passes * n`` pair updates occur; the error
        carries the worst remaining KKT violation.
    """
    data = _as_matrix(data)
    y = np.asarray(labels, dtype=np.float64).ravel()
    n = y.shape[0]
    if data.shape[0] != n:
        raise SizeError(f"{data.shape[0]} rows vs {n} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.all(y > 0) or np.all(y < 0):
        raise ValueError("training requires both classes present")

    c = float(params.c)
    eps = _BOUND_EPS * max(1.0, c)
    cache = _RowCache(data, params.gamma, cache_size)
    alpha = np.zeros(n)
    f = np.zeros(n)  # f_i = sum_j alpha_j y_j K_ij (bias-free)
    sum_ay = 0.0
    max_iter = int(max_passes) * n
    iterations = 0
    stalls = 0

    while True:
        up, low = _selection_sets(alpha, y, c, eps)
        err = f - y
        if not (up.any() and low.any()):
            break
        up_err = np.where(up, err, np.inf)
        low_err = np.where(low, err, -np.inf)
        i = int(np.argmin(up_err))
        j = int(np.argmax(low_err))
        violation = float(low_err[j] - up_err[i])
        if violation <= tol:
            break
        if iterations >= max_iter:
            raise ConvergenceError(
                f"no convergence after {max_iter} pair updates "
                f"(worst KKT violation {violation:.6g})",
                worst_violation=violation,
            )
        iterations += 1

        ki = cache.row(i)
        kj = cache.row(j)
        eta = ki[i] + kj[j] - 2.0 * ki[j]
        if eta <= 0.0:
            eta = 1e-12
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c, c + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - c)
            hi = min(c, alpha[i] + alpha[j])
        aj_new = alpha[j] + y[j] * (err[i] - err[j]) / eta
        aj_new = min(hi, max(lo, aj_new))
        delta_j = aj_new - alpha[j]
        if abs(delta_j) < 1e-15 * max(1.0, c):
            stalls += 1
            if stalls > n:
                raise ConvergenceError(
                    f"solver stalled with KKT violation {violation:.6g}",
                    worst_violation=violation,
                )
            continue
        stalls = 0
        # Deriving delta_i from the rounded delta_j keeps the equality
        # constraint sum(alpha_i * y_i) = 0 exact in floating point.
        delta_i = -y[i] * y[j] * delta_j
        alpha[j] = aj_new
        alpha[i] = min(c, max(0.0, alpha[i] + delta_i))
        f += (y[i] * delta_i) * ki + (y[j] * delta_j) * kj
        sum_ay += y[i] * delta_i + y[j] * delta_j
        if __debug__:
            assert abs(sum_ay) <= 1e-9, f"equality constraint drift {sum_ay}"

    free = (alpha > eps) & (alpha < c - eps)
    if free.any():
        bias = float(np.mean(y[free] - f[free]))
    else:
        up, low = _selection_sets(alpha, y, c, eps)
        err = f - y
        up_min = float(np.min(np.where(up, err, np.inf)))
        low_max = float(np.max(np.where(low, err, -np.inf)))
        bias = -0.5 * (up_min + low_max)

    sv = alpha > eps
    sv_index = np.flatnonzero(sv)
    return BinarySvm(
        support_vectors=data[sv].copy(),
        dual_coef=(alpha * y)[sv].copy(),
        bias=bias,
        params=params,
        sv_index=sv_index,
        n_iter=iterations,
    )


def dual_objective(machine, data, labels):
    """Dual objective value sum(a) - 1/2 a^T (y y^T * K) a of a solution."""
    data = _as_matrix(data)
    y = np.asarray(labels, dtype=np.float64).ravel()
    alpha = np.zeros(y.shape[0])
    alpha[machine.sv_index] = np.abs(machine.dual_coef)
    gram = rbf_matrix(data, data, machine.params.gamma)
    q = (y[:, np.newaxis] * y[np.newaxis, :]) * gram
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


@dataclass(frozen=True)
class SvmModel:
    """One-vs-one multiclass model over standardized feature vectors."""

    classes: tuple             # ordered class labels
    machines: tuple            # BinarySvm per (i, j) pair, i < j, in
                               # itertools.combinations order
    standardizer: Standardizer
    layout: str

    def standardize(self, x):
        if isinstance(x, FeatureVector) and x.layout != self.layout:
            raise SizeError(
                f"layout mismatch: vector has {x.layout!r}, "
                f"model expects {self.layout!r}"
            )
        x = _as_matrix(x)
        if x.shape[1] != self.standardizer.mean.shape[0]:
            raise SizeError(
                f"expected {self.standardizer.mean.shape[0]} features, "
                f"got {x.shape[1]}"
            )
        return (x - self.standardizer.mean) / self.standardizer.std

    def decision_values(self, x):
        """(n_samples, n_machines) decision values on standardized input."""
        z = self.standardize(x)
        return np.stack([m.decision_function(z) for m in self.machines],
                        axis=1)

    def predict(self, x):
        """Majority-vote labels; ties go to the earliest class in order."""
        z = self.standardize(x)
        n = z.shape[0]
        k = len(self.classes)
        votes = np.zeros((n, k), dtype=np.int64)
        for (i, j), machine in zip(
                itertools.combinations(range(k), 2), self.machines):
            dec = machine.decision_function(z)
            votes[dec > 0.0, i] += 1
            votes[dec <= 0.0, j] += 1
        winners = np.argmax(votes, axis=1)  # first maximum = earliest class
        return [self.classes[w] for w in winners]


def train_multiclass(data, labels, params, layout, tol=1e-3, max_passes=100):
    """Standardize the training data and fit one-vs-one RBF machines.

    Classes are ordered by sorted label.  The machine for pair (i, j)
    treats class i as +1 and class j as -1.
    """
    data = _as_matrix(data)
    labels = list(labels)
    if data.shape[0] != len(labels):
        raise SizeError(f"{data.shape[0]} rows vs {len(labels)} labels")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("training requires at least two classes")
    std = standardizer_from_matrix(data, layout)
    z = (data - std.mean) / std.std
    label_arr = np.asarray(labels, dtype=object)
    machines = []
    for i, j in itertools.combinations(range(len(classes)), 2):
        mask = (label_arr == classes[i]) | (label_arr == classes[j])
        y = np.where(label_arr[mask] == classes[i], 1.0, -1.0)
        machines.append(train_binary(z[mask], y, params, tol=tol,
                                     max_passes=max_passes))
    return SvmModel(classes=classes, machines=tuple(machines),
                    standardizer=std, layout=layout)


def predict(model, x):
    """Predict the label of one FeatureVector, or labels for matrix rows."""
    if isinstance(x, FeatureVector):
        return model.predict(x)[0]
    return model.predict(x)


def kkt_violations(machine, data, labels):
    """Per-point KKT violation magnitudes for a trained binary machine.

    For each training point, with f the full decision function and
    a = alpha (recovered as |dual coefficient|):
      a = 0      -> violation = max(0, 1 - y f)
      0 < a < C  -> violation = |y f - 1|
      a = C      -> violation = max(0, y f - 1)
    A machine satisfies the KKT certificate at tolerance t when the
    largest violation is at most t.
    """
    data = _as_matrix(data)
    y = np.asarray(labels, dtype=np.float64).ravel()
    n = y.shape[0]
    c = machine.params.c
    eps = _BOUND_EPS * max(1.0, c)
    alpha = np.zeros(n)
    alpha[machine.sv_index] = np.abs(machine.dual_coef)
    yf = y * machine.decision_function(data)
    out = np.empty(n)
    at_zero = alpha <= eps
    at_c = alpha >= c - eps
    free = ~at_zero & ~at_c
    out[at_zero] = np.maximum(0.0, 1.0 - yf[at_zero])
    out[free] = np.abs(yf[free] - 1.0)
    out[at_c] = np.maximum(0.0, yf[at_c] - 1.0)
    return out


@dataclass(frozen=True)
class CvReport:
    """Cross-validation outcome.

    ``mean_accuracy`` is pooled over all held-out predictions
    (trace(confusion) / total), so it equals the confusion-matrix accuracy
    by construction; ``fold_accuracies`` reports each fold separately.
    """

    classes: tuple
    fold_accuracies: tuple
    mean_accuracy: float
    confusion: np.ndarray  # (k, k), rows = true class, cols = predicted


def make_folds(labels, folds, seed, groups=None):
    """Assign each sample a fold id with per-class stratification.

    Without groups, each class's samples are shuffled (seeded) and dealt
    round-robin across folds; every class must have at least ``folds``
    samples.

    With groups (e.g. page ids), whole groups are dealt instead, so no
    group straddles a fold boundary and a group may not span classes.
    Groups are dealt through one global round-robin counter (classes in
    sorted order, groups shuffled within each class), which reduces to
    classic per-class stratification when every class has a multiple of
    ``folds`` groups and stays well-defined when a class has fewer groups
    than folds.  Each class needs at least 2 groups (otherwise it could
    never appear in both a training and a test fold) and the total group
    count must be at least ``folds`` (otherwise some fold would be empty).

    Raises
    ------
    SizeError
        If a stratification precondition above fails or if a group
        contains more than one class.
    """
    labels = np.asarray(list(labels), dtype=object)
    n = labels.shape[0]
    folds = int(folds)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    rng = np.random.default_rng(seed)
    fold_of = np.full(n, -1, dtype=np.int64)
    classes = sorted(set(labels.tolist()))
    if groups is not None:
        groups = np.asarray(list(groups), dtype=object)
        if groups.shape[0] != n:
            raise SizeError(f"{groups.shape[0]} groups vs {n} labels")
    counter = 0
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        if groups is None:
            if idx.shape[0] < folds:
                raise SizeError(
                    f"class {cls!r} has {idx.shape[0]} samples, "
                    f"fewer than {folds} folds"
                )
            perm = rng.permutation(idx)
            fold_of[perm] = np.arange(perm.shape[0]) % folds
        else:
            cls_groups = sorted(set(groups[idx].tolist()))
            if len(cls_groups) < 2:
                raise SizeError(
                    f"class {cls!r} has {len(cls_groups)} group(s); "
                    f"cross-validation needs at least 2"
                )
            order = rng.permutation(len(cls_groups))
            for gi in order:
                members = idx[groups[idx] == cls_groups[gi]]
                fold_of[members] = counter % folds
                counter += 1
    if groups is not None:
        if counter < folds:
            raise SizeError(
                f"only {counter} groups for {folds} folds; some folds "
                f"would be empty"
            )
        for g in set(groups.tolist()):
            member_folds = set(fold_of[groups == g].tolist())
            member_classes = set(labels[groups == g].tolist())
            if len(member_classes) > 1:
                raise SizeError(f"group {g!r} spans classes {member_classes}")
            assert len(member_folds) == 1
    return fold_of


def _default_trainer(data, labels, params):
    model = train_multiclass(data, labels, params, layout="raw")
    return model.predict


def cross_validate(data, labels, params, folds=10, seed=0, groups=None,
                   trainer=None, fold_ids=None):
    """Seeded stratified k-fold cross-validation.

    ``trainer(train_x, train_labels, params)`` must return a callable
    mapping a test matrix to predicted labels; the default trains the
    one-vs-one RBF model (which standardizes on the training fold only).
    ``fold_ids`` may supply a precomputed assignment from make_folds so
    several parameter settings share identical folds.
    """
    data = _as_matrix(data)
    labels = list(labels)
    if trainer is None:
        trainer = _default_trainer
    if fold_ids is None:
        fold_ids = make_folds(labels, folds, seed, groups=groups)
    else:
        fold_ids = np.asarray(fold_ids, dtype=np.int64)
        folds = int(fold_ids.max()) + 1
    label_arr = np.asarray(labels, dtype=object)
    classes = tuple(sorted(set(labels)))
    index = {cls: i for i, cls in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    fold_accuracies = []
    for f in range(folds):
        test = fold_ids == f
        train = ~test
        predict_fn = trainer(data[train], label_arr[train].tolist(), params)
        predicted = predict_fn(data[test])
        actual = label_arr[test].tolist()
        hits = 0
        for truth, guess in zip(actual, predicted):
            confusion[index[truth], index[guess]] += 1
            hits += truth == guess
        fold_accuracies.append(hits / max(1, len(actual)))
    total = int(confusion.sum())
    mean_accuracy = float(np.trace(confusion)) / max(1, total)
    return CvReport(
        classes=classes,
        fold_accuracies=tuple(fold_accuracies),
        mean_accuracy=mean_accuracy,
        confusion=confusion,
    )


def _grid_cell(task):
    """Cross-validated accuracy of one (c, gamma) cell; picklable for pools."""
    data, labels, fold_ids, c, gamma, trainer = task
    report = cross_validate(data, labels, KernelParams(c=c, gamma=gamma),
                            trainer=trainer, fold_ids=fold_ids)
    return report.mean_accuracy


def grid_search(data, labels, c_grid=None, gamma_grid=None, folds=10, seed=0,
                groups=None, trainer=None, mapper=None):
    """Exhaustive (C, gamma) search by cross-validated accuracy.

    Grids default to seven log-spaced values each: C in 10^0..10^6 and
    gamma in 10^-6..10^0.  Every cell reuses one fold assignment built
    from ``seed``.  Ties prefer smaller C, then smaller gamma.  Returns
    ``(best_params, table)`` where table rows are (c, gamma, accuracy)
    in scan order (C-major, gamma-minor, both ascending).

    ``mapper`` (default: the built-in ``map``) evaluates the cells; an
    order-preserving pool map parallelizes them without changing the
    result, since cells are independent and selection happens after all
    accuracies are collected.
    """
    c_grid = _DEFAULT_C_GRID if c_grid is None else tuple(c_grid)
    gamma_grid = (_DEFAULT_GAMMA_GRID if gamma_grid is None
                  else tuple(gamma_grid))
    if not c_grid or not gamma_grid:
        raise ValueError("grid_search requires non-empty parameter grids")
    for c in c_grid:
        if not 1.0 - 1e-9 <= c <= 1e6 * (1 + 1e-9):
            raise ValueError(f"c={c} outside the supported range [1, 1e6]")
    for g in gamma_grid:
        if not 1e-6 * (1 - 1e-9) <= g <= 1.0 + 1e-9:
            raise ValueError(
                f"gamma={g} outside the supported range [1e-6, 1]"
            )
    data = _as_matrix(data)
    labels = list(labels)
    fold_ids = make_folds(labels, folds, seed, groups=groups)
    cells = [(float(c), float(gamma))
             for c in sorted(c_grid) for gamma in sorted(gamma_grid)]
    tasks = [(data, labels, fold_ids, c, gamma, trainer) for c, gamma in cells]
    accuracies = list((mapper or map)(_grid_cell, tasks))
    table = [(c, gamma, acc) for (c, gamma), acc in zip(cells, accuracies)]
    best = None
    best_acc = -1.0
    for c, gamma, acc in table:
        if acc > best_acc:
            best_acc = acc
            best = KernelParams(c=c, gamma=gamma)
    return best, table


def _fmt(x):
    """Decimal text with 17 significant digits (round-trips float64)."""
    return format(float(x), ".17g")


def save_model(model, path):
    """Write a model as a line-oriented text file (TEXWAVE-SVM v1).

    Layout: header line; ``layout`` tag; ``tree_b_rule`` metadata;
    ``classes <k>`` followed by one label per line; ``standardizer <d>``
    followed by the mean line and stddev line; ``machines <m>`` followed
    by one block per machine (class-index pair, params, bias, sv count,
    then one line per support vector: dual coefficient then features).
    All numbers use 17 significant digits.
    """
    lines = [
        _MODEL_HEADER,
        f"layout {model.layout}",
        "tree_b_rule reverse",
        f"classes {len(model.classes)}",
    ]
    for cls in model.classes:
        text = str(cls)
        if "\n" in text:
            raise ValueError(f"class label {text!r} contains a newline")
        lines.append(text)
    d = model.standardizer.mean.shape[0]
    lines.append(f"standardizer {d}")
    lines.append(" ".join(_fmt(v) for v in model.standardizer.mean))
    lines.append(" ".join(_fmt(v) for v in model.standardizer.std))
    lines.append(f"machines {len(model.machines)}")
    pairs = itertools.combinations(range(len(model.classes)), 2)
    for (i, j), machine in zip(pairs, model.machines):
        lines.append(f"machine {i} {j}")
        lines.append(
            f"params c {_fmt(machine.params.c)} "
            f"gamma {_fmt(machine.params.gamma)}"
        )
        lines.append(f"bias {_fmt(machine.bias)}")
        lines.append(f"sv_count {machine.dual_coef.shape[0]}")
        for coef, row in zip(machine.dual_coef, machine.support_vectors):
            lines.append(" ".join([_fmt(coef)] + [_fmt(v) for v in row]))
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, text, path):
        self._lines = text.split("\n")
        self._pos = 0
        self._path = path

    def next(self):
        while self._pos < len(self._lines):
            line = self._lines[self._pos]
            self._pos += 1
            if line or self._pos < len(self._lines):
                return line
        raise ModelFormatError(f"{self._path}: unexpected end of model file")

    def expect_prefix(self, prefix):
        line = self.next()
        if not line.startswith(prefix):
            raise ModelFormatError(
                f"{self._path}: expected {prefix!r}, got {line!r}"
            )
        return line[len(prefix):].strip()


def load_model(path):
    """Read a TEXWAVE-SVM v1 model file written by save_model.

    Raises a parse error on version/format mismatch.  Decision values of
    the reloaded model are bit-identical to the saved model's because the
    17-significant-digit decimal text round-trips every float64 exactly.
    """
    with open(path, "r", encoding="ascii") as handle:
        text = handle.read()
    reader = _LineReader(text, str(path))
    header = reader.next()
    if header != _MODEL_HEADER:
        raise ModelFormatError(
            f"{path}: unsupported model header {header!r} "
            f"(expected {_MODEL_HEADER!r})"
        )
    layout = reader.expect_prefix("layout ")
    rule = reader.expect_prefix("tree_b_rule ")
    if rule != "reverse":
        raise ModelFormatError(f"{path}: unsupported tree_b_rule {rule!r}")
    k = int(reader.expect_prefix("classes "))
    classes = tuple(reader.next() for _ in range(k))
    d = int(reader.expect_prefix("standardizer "))
    mean = np.array([float(v) for v in reader.next().split()])
    std = np.array([float(v) for v in reader.next().split()])
    if mean.shape[0] != d or std.shape[0] != d:
        raise ModelFormatError(f"{path}: standardizer length != {d}")
    std_obj = Standardizer(mean=mean, std=std, layout=layout)
    m = int(reader.expect_prefix("machines "))
    expected_pairs = list(itertools.combinations(range(k), 2))
    if m != len(expected_pairs):
        raise ModelFormatError(
            f"{path}: {m} machines for {k} classes "
            f"(expected {len(expected_pairs)})"
        )
    machines = []
    for i, j in expected_pairs:
        pair = reader.expect_prefix("machine ")
        if pair.split() != [str(i), str(j)]:
            raise ModelFormatError(
                f"{path}: machine pair {pair!r}, expected '{i} {j}'"
            )
        parts = reader.expect_prefix("params ").split()
        if parts[0] != "c" or parts[2] != "gamma":
            raise ModelFormatError(f"{path}: malformed params line")
        params = KernelParams(c=float(parts[1]), gamma=float(parts[3]))
        bias = float(reader.expect_prefix("bias "))
        count = int(reader.expect_prefix("sv_count "))
        coefs = np.empty(count)
        vectors = np.empty((count, d))
        for row in range(count):
            values = [float(v) for v in reader.next().split()]
            if len(values) != d + 1:
                raise ModelFormatError(
                    f"{path}: support vector row has {len(values)} values, "
                    f"expected {d + 1}"
                )
            coefs[row] = values[0]
            vectors[row] = values[1:]
        machines.append(BinarySvm(
            support_vectors=vectors,
            dual_coef=coefs,
            bias=bias,
            params=params,
            sv_index=np.arange(count),
            n_iter=0,
        ))
    return SvmModel(classes=classes, machines=tuple(machines),
                    standardizer=std_obj, layout=layout)


class RbfSvmClassifier(ClassifierMixin, BaseEstimator):
    """Estimator-style wrapper around the one-vs-one RBF SVM.

    Parameters
    ----------
    c, gamma : float
        Soft-margin penalty and RBF width.
    tol : float
        KKT tolerance for the SMO solver.
    max_passes : int
        Iteration budget multiplier (cap is max_passes * n updates).
    """

    def __init__(self, c=10.0, gamma=0.1, tol=1e-3, max_passes=100):
        self.c = c
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes

    def fit(self, X, y):
        params = KernelParams(c=self.c, gamma=self.gamma)
        self.model_ = train_multiclass(
            X, list(y), params, layout="raw",
            tol=self.tol, max_passes=self.max_passes,
        )
        self.classes_ = np.asarray(self.model_.classes, dtype=object)
        self.n_features_in_ = _as_matrix(X).shape[1]
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise ValueError("classifier is not fitted")
        return np.asarray(self.model_.predict(X), dtype=object)
