"""Brute-force QP oracles for checking the SMO solver.

These maximize the C-SVC dual objective

    W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)

subject to 0 <= a_i <= C and sum_i a_i y_i = 0, by exhaustive grid scans
over the feasible region (with iterative zoom for the 4-point case), fully
independently of the solver under test.
"""

import numpy as np

from texwave.svm import rbf_matrix


def dual_value(alpha, q):
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def two_point_optimum(x1, x2, y1, y2, c, gamma, step=1e-3):
    """Exhaustive scan of the 2-variable dual on a fixed-step grid.

    With two points of opposite label the equality constraint forces
    a1 = a2, so feasible points form a line scanned at ``step``.
    """
    x = np.array([x1, x2], dtype=float).reshape(2, -1)
    y = np.array([y1, y2], dtype=float)
    k = rbf_matrix(x, x, gamma)
    q = (y[:, None] * y[None, :]) * k
    if y1 == y2:
        raise ValueError("oracle expects opposite labels")
    grid = np.arange(0.0, c + step / 2, step)
    best = -np.inf
    for a in grid:
        alpha = np.array([a, a])
        best = max(best, dual_value(alpha, q))
    return best


def four_point_optimum(data, labels, c, gamma, grids=48, zooms=8):
    """Grid-zoom scan of the 4-variable dual.

    Three alphas are scanned on a mesh; the fourth is pinned by the
    equality constraint.  The mesh zooms onto the best cell; since the
    dual is concave, iterative refinement converges to the global
    optimum.  Returns the best objective value found.
    """
    data = np.asarray(data, dtype=float)
    y = np.asarray(labels, dtype=float)
    k = rbf_matrix(data, data, gamma)
    q = (y[:, None] * y[None, :]) * k
    best = -np.inf
    lo = np.zeros(3)
    hi = np.full(3, c)
    for _ in range(zooms):
        axes = [np.linspace(lo[d], hi[d], grids) for d in range(3)]
        a0, a1, a2 = np.meshgrid(*axes, indexing="ij")
        a3 = -(a0 * y[0] + a1 * y[1] + a2 * y[2]) * y[3]
        feasible = (a3 >= -1e-12) & (a3 <= c + 1e-12)
        alpha = np.stack([a0, a1, a2, np.clip(a3, 0.0, c)], axis=-1)
        obj = alpha.sum(-1) - 0.5 * np.einsum(
            "...i,ij,...j->...", alpha, q, alpha)
        obj = np.where(feasible, obj, -np.inf)
        idx = np.unravel_index(np.argmax(obj), obj.shape)
        best = max(best, float(obj[idx]))
        center = np.array([axes[d][idx[d]] for d in range(3)])
        span = (hi - lo) / (grids - 1) * 2.0
        lo = np.maximum(0.0, center - span)
        hi = np.minimum(c, center + span)
    return best


def random_four_point_problem(rng):
    """One seeded random 4-point binary problem (data, labels, params)."""
    data = rng.normal(size=(4, 3)) * rng.uniform(0.5, 2.0)
    labels = np.array([1.0, 1.0, -1.0, -1.0])
    rng.shuffle(labels)
    c = float(10.0 ** rng.uniform(0, 3))
    gamma = float(10.0 ** rng.uniform(-2, 0.5))
    return data, labels, c, gamma
