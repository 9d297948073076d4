"""Backward-sweep kernels for the 1D scalar fast path.

One sweep advances the conditional-expectation field one time level: for
every space node j it averages the next level's field at the propagated
sample points

    x' = base[j] + scale[j] * incr[j, p] + big[j, p]

over the particle index p, then applies the zero-order weight and adds the
source.  The next level is evaluated either through its cubic-spline
coefficients (piecewise c0 u^3 + c1 u^2 + c2 u + c3 on each cell, u the
offset from the left knot) or by linear interpolation, with nearest-node
constant extension outside the box.

Accumulation is sequential per node (prange over nodes only), so results are
bit-deterministic regardless of thread count.
"""

from __future__ import annotations

import numpy as np
import numba
from numba import njit, prange

# omp is present everywhere we run; avoids probing the (older) TBB runtime
numba.config.THREADING_LAYER = "omp"


@njit(parallel=True, cache=True)
def sweep_cubic(c0, c1, c2, c3, xknots, lo, h, vlo, vhi, base, scale, incr,
                big, has_big, fdt, weight, sig2next, want_sigma):
    nn, npart = incr.shape
    ncell = xknots.shape[0] - 1
    out = np.empty(nn)
    var = np.empty(nn)
    sig2 = np.zeros(nn)
    exits = np.zeros(nn, dtype=np.int64)
    inv_h = 1.0 / h
    for j in prange(nn):
        acc = 0.0
        acc2 = 0.0
        accs = 0.0
        nexit = 0
        bj = base[j]
        sj = scale[j]
        for p in range(npart):
            x = bj + sj * incr[j, p]
            if has_big:
                x += big[j, p]
            s = (x - lo) * inv_h
            if s <= 0.0:
                val = vlo
                nexit += 1
                if want_sigma:
                    accs += sig2next[0]
            elif s >= ncell:
                val = vhi
                nexit += 1
                if want_sigma:
                    accs += sig2next[ncell]
            else:
                k = int(s)
                if k >= ncell:
                    k = ncell - 1
                u = x - xknots[k]
                val = ((c0[k] * u + c1[k]) * u + c2[k]) * u + c3[k]
                if want_sigma:
                    w = s - k
                    accs += (1.0 - w) * sig2next[k] + w * sig2next[k + 1]
            acc += val
            acc2 += val * val
        m = acc / npart
        w2 = weight[j] * weight[j]
        out[j] = weight[j] * m + fdt[j]
        var[j] = max((acc2 - npart * m * m) / max(npart - 1, 1), 0.0)
        if want_sigma:
            sig2[j] = w2 * (var[j] / npart + accs / npart)
        exits[j] = nexit
    return out, var, sig2, exits


@njit(parallel=True, cache=True)
def sweep_linear(vnext, xknots, lo, h, base, scale, incr, big, has_big, fdt,
                 weight, sig2next, want_sigma):
    nn, npart = incr.shape
    nlast = xknots.shape[0] - 1
    out = np.empty(nn)
    var = np.empty(nn)
    sig2 = np.zeros(nn)
    exits = np.zeros(nn, dtype=np.int64)
    inv_h = 1.0 / h
    for j in prange(nn):
        acc = 0.0
        acc2 = 0.0
        accs = 0.0
        nexit = 0
        bj = base[j]
        sj = scale[j]
        for p in range(npart):
            x = bj + sj * incr[j, p]
            if has_big:
                x += big[j, p]
            s = (x - lo) * inv_h
            if s <= 0.0:
                val = vnext[0]
                nexit += 1
                if want_sigma:
                    accs += sig2next[0]
            elif s >= nlast:
                val = vnext[nlast]
                nexit += 1
                if want_sigma:
                    accs += sig2next[nlast]
            else:
                k = int(s)
                w = s - k
                val = (1.0 - w) * vnext[k] + w * vnext[k + 1]
                if want_sigma:
                    accs += (1.0 - w) * sig2next[k] + w * sig2next[k + 1]
            acc += val
            acc2 += val * val
        m = acc / npart
        w2 = weight[j] * weight[j]
        out[j] = weight[j] * m + fdt[j]
        var[j] = max((acc2 - npart * m * m) / max(npart - 1, 1), 0.0)
        if want_sigma:
            sig2[j] = w2 * (var[j] / npart + accs / npart)
        exits[j] = nexit
    return out, var, sig2, exits
