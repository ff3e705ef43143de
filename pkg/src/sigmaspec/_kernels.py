"""Compiled inner loops for the evolution hot path.

These mirror ``_Scheme.rhs``/``enforce`` and the Gram-Schmidt pass in
:mod:`sigmaspec.spectra` element by element; the numpy versions remain the
reference and the tests compare the two.
"""
import math

import numpy as np
from numba import njit

OK, UNSTABLE, DEGENERATE = 0, 1, 2


@njit(cache=True)
def _value(U, l, c, j):
    # reflected ghosts: u1, u2 odd, u3 even
    if j >= 0:
        return U[l, c, j]
    if c == 2:
        return U[l, c, -j]
    return -U[l, c, -j]


@njit(cache=True)
def _point(U, out, l, i, inv, N, co):
    a2, b2 = _value(U, l, 1, i - 2), _value(U, l, 1, i - 1)
    a3, b3 = _value(U, l, 2, i - 2), _value(U, l, 2, i - 1)
    c2 = U[l, 1, i]
    c3 = U[l, 2, i]
    l2 = (3.0 * c2 - 4.0 * b2 + a2) * inv
    l3 = (3.0 * c3 - 4.0 * b3 + a3) * inv
    if i < N:
        r2 = (-3.0 * c2 + 4.0 * U[l, 1, i + 1] - U[l, 1, i + 2]) * inv
        r3 = (-3.0 * c3 + 4.0 * U[l, 2, i + 1] - U[l, 2, i + 2]) * inv
    else:
        r2 = l2
        r3 = l3
    if i == 0:
        out[l, 0, i] = 0.0
        out[l, 1, i] = 0.0
    else:
        out[l, 0, i] = c2
        out[l, 1, i] = (co[0, i] * l2 + co[1, i] * l3 + co[4, i] * r2 + co[5, i] * r3
                        - c2 + co[8, i] * c3 + co[9, i] * U[l, 0, i])
    out[l, 2, i] = co[2, i] * l2 + co[3, i] * l3 + co[6, i] * r2 + co[7, i] * r3


@njit(cache=True)
def rhs(U, out, h, N, co):
    """Semi-discrete operator for stacked levels ``U[l, c, i]``.

    ``co`` rows: m11, m12, m21, m22, p11, p12, p21, p22, c_u3, c_u1.
    """
    L, _, M = U.shape
    inv = 0.5 / h
    for l in range(L):
        u1, u2, u3 = U[l, 0], U[l, 1], U[l, 2]
        o1, o2, o3 = out[l, 0], out[l, 1], out[l, 2]
        # interior: both stencils stay on the grid, no branches
        for i in range(2, N):
            l2 = (3.0 * u2[i] - 4.0 * u2[i - 1] + u2[i - 2]) * inv
            l3 = (3.0 * u3[i] - 4.0 * u3[i - 1] + u3[i - 2]) * inv
            r2 = (-3.0 * u2[i] + 4.0 * u2[i + 1] - u2[i + 2]) * inv
            r3 = (-3.0 * u3[i] + 4.0 * u3[i + 1] - u3[i + 2]) * inv
            o1[i] = u2[i]
            o2[i] = (co[0, i] * l2 + co[1, i] * l3 + co[4, i] * r2 + co[5, i] * r3
                     - u2[i] + co[8, i] * u3[i] + co[9, i] * u1[i])
            o3[i] = co[2, i] * l2 + co[3, i] * l3 + co[6, i] * r2 + co[7, i] * r3
        for i in (0, 1, N, N + 1):
            _point(U, out, l, i, inv, N, co)


@njit(cache=True)
def enforce(U, h, reconstruct):
    L, _, M = U.shape
    for l in range(L):
        U[l, 0, 0] = 0.0
        U[l, 1, 0] = 0.0
        if reconstruct:
            acc = 0.0
            for i in range(1, M):
                acc += 0.5 * h * (U[l, 2, i] + U[l, 2, i - 1])
                U[l, 0, i] = acc


@njit(cache=True)
def heun(U, dt, h, N, co, reconstruct, k1, U1):
    """One Heun step of ``U`` in place; ``k1`` and ``U1`` are work arrays."""
    L, C, M = U.shape
    rhs(U, k1, h, N, co)
    for l in range(L):
        for c in range(C):
            for i in range(M):
                U1[l, c, i] = U[l, c, i] + dt * k1[l, c, i]
    enforce(U1, h, reconstruct)
    rhs(U1, k1, h, N, co)
    for l in range(L):
        for c in range(C):
            for i in range(M):
                U[l, c, i] = 0.5 * (U[l, c, i] + U1[l, c, i] + dt * k1[l, c, i])
    enforce(U, h, reconstruct)


@njit(cache=True, fastmath=True)
def _dot(U, j, k, w):
    s = 0.0
    for c in range(3):
        for i in range(U.shape[2]):
            s += w[i] * U[j, c, i] * U[k, c, i]
    return s


@njit(cache=True)
def filter_pass(U, w, unit, logs, ratio, before):
    """Modified Gram-Schmidt over levels; returns the first collapsed level or -1.

    ``before`` receives each level's norm prior to projection and ``after``
    the norm afterwards (overwritten in place).
    """
    L, C, M = U.shape
    for j in range(L):
        before[j] = math.sqrt(_dot(U, j, j, w))
        for k in range(j):
            coef = _dot(U, j, k, w)
            if not unit:
                coef /= _dot(U, k, k, w)
            for c in range(C):
                for i in range(M):
                    U[j, c, i] -= coef * U[k, c, i]
        after = math.sqrt(_dot(U, j, j, w))
        if not after > ratio * before[j]:
            return j
        if unit:
            inv = 1.0 / after
            for c in range(C):
                for i in range(M):
                    U[j, c, i] *= inv
            logs[j] += math.log(after)
    return -1


@njit(cache=True)
def norms2(U, h):
    L, C, M = U.shape
    out = np.zeros(L)
    for l in range(L):
        s = 0.0
        for c in range(C):
            for i in range(M):
                s += U[l, c, i] * U[l, c, i]
        out[l] = s * h
    return out


@njit(cache=True)
def filtered_run(U, dt, steps, stride, h, N, co, reconstruct, w, unit, ratio, growth_limit, logs):
    """Filtered co-evolution loop.

    Returns ``(series, status, step)``: ``series[k]`` is the log-norm row at
    the ``k``-th sample (initial sample included); ``status`` is ``OK``,
    ``UNSTABLE`` or ``DEGENERATE`` with the offending step (or level for
    a degeneracy) in ``step``.
    """
    L = U.shape[0]
    k1 = np.empty_like(U)
    U1 = np.empty_like(U)
    count = 1 + steps // stride + (1 if steps % stride else 0)
    series = np.zeros((count, L))
    limit = math.exp(2.0 * growth_limit * dt)

    before = np.zeros(L)
    j = filter_pass(U, w, unit, logs, ratio, before)
    if j >= 0:
        return series[:0], DEGENERATE, j
    row = 0

    def record(r):
        if unit:
            for l in range(L):
                series[r, l] = logs[l]
        else:
            for l in range(L):
                series[r, l] = 0.5 * math.log(_dot(U, l, l, w))

    record(row)
    row += 1
    prev = np.ones(L)
    for l in range(L):
        prev[l] = math.sqrt(_dot(U, l, l, w))
    for k in range(1, steps + 1):
        heun(U, dt, h, N, co, reconstruct, k1, U1)
        j = filter_pass(U, w, unit, logs, ratio, before)
        # growth check on the pre-projection norms: components along lower
        # levels grow no faster than the dominant mode
        for l in range(L):
            if not math.isfinite(before[l]) or (prev[l] > 0 and before[l] ** 2 > prev[l] ** 2 * limit):
                return series[:row], UNSTABLE, k
        if j >= 0:
            return series[:row], DEGENERATE, j
        for l in range(L):
            prev[l] = 1.0 if unit else math.sqrt(_dot(U, l, l, w))
        if k % stride == 0 or k == steps:
            record(row)
            row += 1
    return series[:row], OK, steps
