"""Shared brute-force oracles for the solver and selection tests."""

import itertools

import numpy as np


def fused_lasso_objective(z, v, fusion, sparsity):
    """0.5||z-v||^2 + sparsity*sum|z| + fusion*sum_{a<b}|z_a - z_b|."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    v = np.asarray(v, dtype=float)
    total = 0.5 * np.sum((z - v) ** 2, axis=1) + sparsity * np.sum(np.abs(z), axis=1)
    k = v.size
    for a in range(k):
        for b in range(a + 1, k):
            total = total + fusion * np.abs(z[:, a] - z[:, b])
    return total if total.size > 1 else float(total[0])


def fused_prox_enumeration(v, fusion, sparsity):
    """Exact minimizer of the K-point fused lasso by candidate enumeration.

    The minimizer is constant on contiguous blocks of the sorted input; each
    block value is the block mean shifted by fusion*(below - above) and by
    -s*sparsity for a sign s in {-1, 0, +1} (0 meaning the block is pinned at
    zero). Enumerating every contiguous partition and sign pattern and keeping
    the candidate with the smallest true objective recovers the solution.
    """
    v = np.asarray(v, dtype=float)
    k = v.size
    order = np.argsort(v, kind="stable")
    vs = v[order]

    candidates = [v.copy(), np.zeros(k)]
    for cuts in itertools.product([False, True], repeat=k - 1):
        blocks = []
        start = 0
        for i, cut in enumerate(cuts):
            if cut:
                blocks.append((start, i + 1))
                start = i + 1
        blocks.append((start, k))
        base = np.empty(k)
        for lo, hi in blocks:
            base[lo:hi] = vs[lo:hi].mean() - fusion * (lo - (k - hi))
        for signs in itertools.product((-1.0, 0.0, 1.0), repeat=len(blocks)):
            z_sorted = base.copy()
            for (lo, hi), s in zip(blocks, signs):
                z_sorted[lo:hi] = 0.0 if s == 0.0 else base[lo:hi] - sparsity * s
            z = np.empty(k)
            z[order] = z_sorted
            candidates.append(z)

    stack = np.array(candidates)
    objs = fused_lasso_objective(stack, v, fusion, sparsity)
    return stack[int(np.argmin(np.atleast_1d(objs)))]
