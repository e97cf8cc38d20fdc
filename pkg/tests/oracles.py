"""Independent reference computations used only by the tests."""

import math

import numpy as np


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - (css - 1) / k > 0)[0][-1]
    theta = (css[rho] - 1) / (rho + 1)
    return np.maximum(v - theta, 0.0)


def w_row_objective(w, a, d2, s1, s2):
    """Row-i part of the weight block, up to the positive factor omega / 2m."""
    return float(np.dot(w, a) + s1**2 * np.sum(w * (np.log(w) - 1)) + (s1**2 / s2**2) * np.dot(w, d2))


def projected_gradient_row(a, d2, s1, s2, iters=200000, tol=1e-15):
    """Minimise a row of the weight block over the simplex by projected gradient
    with backtracking line search."""
    n = a.size
    w = np.full(n, 1.0 / n)
    f = w_row_objective(w, a, d2, s1, s2)
    step = 1.0
    for _ in range(iters):
        g = a + s1**2 * np.log(w) + (s1**2 / s2**2) * d2
        while True:
            w_new = project_simplex(w - step * g)
            if np.all(w_new > 0):
                f_new = w_row_objective(w_new, a, d2, s1, s2)
                if f_new <= f - 1e-4 * np.dot(g, w - w_new) or np.max(np.abs(w_new - w)) < tol:
                    break
            step *= 0.5
        done = np.max(np.abs(w_new - w)) < tol
        w, f = w_new, f_new
        step *= 2.0
        if done:
            break
    return w


def laplacian_double_sum(Wd, F):
    m = Wd.shape[0]
    total = 0.0
    for i in range(m):
        for k in range(m):
            diff = F[k] - F[i]
            total += Wd[i, k] * float(diff @ diff)
    return total / (2 * m)


def entropy_fsum(values, sqdist, s1, s2, m):
    terms = []
    for w, d2 in zip(values, sqdist):
        xlogx = 0.0 if w == 0 else w * math.log(w)
        terms.append(s1**2 * (xlogx - w) + (s1**2 / s2**2) * w * d2)
    return math.fsum(terms) / (2 * m)


def knn_exhaustive(points, queries, k, exclude_self):
    out = []
    for qi, q in enumerate(queries):
        cand = [(float(np.sqrt(np.sum((p - q) ** 2))), j) for j, p in enumerate(points)
                if not (exclude_self and j == qi)]
        cand.sort()
        out.append([j for _, j in cand[:k]])
    return np.array(out)
