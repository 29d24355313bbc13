"""Independent brute-force reference implementations used by the test suite.

Everything here is deliberately written with plain Python loops, separate from
the vectorized library code it checks.
"""

import math

import numpy as np


def conv_reference(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, dilation: int) -> np.ndarray:
    """y[t] = sum_r x[t - r*d] @ w[r] + b with zero padding, by direct loops."""
    T = x.shape[0]
    K, _, c_out = kernel.shape
    y = np.zeros((T, c_out))
    for t in range(T):
        for r in range(K):
            src = t - r * dilation
            if src >= 0:
                y[t] += x[src] @ kernel[r]
        y[t] += bias
    return y


def topsis_reference(x):
    """Min-max scaling, entropy weights, and TOPSIS scores via scalar loops.

    Returns (weights, scores) as plain lists.
    """
    n, m = len(x), len(x[0])
    z = [[0.0] * m for _ in range(n)]
    for j in range(m):
        col = [x[i][j] for i in range(n)]
        lo, hi = min(col), max(col)
        for i in range(n):
            z[i][j] = 0.0 if hi == lo else (x[i][j] - lo) / (hi - lo)

    e = [1.0] * m
    for j in range(m):
        total = sum(z[i][j] for i in range(n))
        if total <= 0.0:
            continue
        acc = 0.0
        for i in range(n):
            p = z[i][j] / total
            if p > 0.0:
                acc += p * math.log(p)
        e[j] = -acc / math.log(n)
    d = [1.0 - ej for ej in e]
    if sum(d) <= 0.0:
        w = [1.0 / m] * m
    else:
        w = [dj / sum(d) for dj in d]

    v = [[w[j] * z[i][j] for j in range(m)] for i in range(n)]
    best = [max(v[i][j] for i in range(n)) for j in range(m)]
    worst = [min(v[i][j] for i in range(n)) for j in range(m)]
    scores = []
    for i in range(n):
        d_plus = math.sqrt(sum((best[j] - v[i][j]) ** 2 for j in range(m)))
        d_minus = math.sqrt(sum((worst[j] - v[i][j]) ** 2 for j in range(m)))
        scores.append(0.5 if d_plus + d_minus == 0.0 else d_minus / (d_plus + d_minus))
    return w, scores


def single_product_grid_optimum(cost=2.0, intercept_weekly=10.0, slope_weekly=-1.0,
                                price_step=0.01, alloc_step=0.01):
    """Brute-force 2-d grid search of weekly profit for one product."""
    prices = np.arange(price_step, intercept_weekly / -slope_weekly, price_step)
    allocs = np.arange(alloc_step, intercept_weekly * 1.2, alloc_step)
    p, a = np.meshgrid(prices, allocs, indexing="ij")
    demand = np.maximum(0.0, intercept_weekly + slope_weekly * p)
    profit = p * np.minimum(a, demand) - cost * a
    i = np.unravel_index(np.argmax(profit), profit.shape)
    return float(prices[i[0]]), float(allocs[i[1]]), float(profit[i])
