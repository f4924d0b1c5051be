"""Finite-difference kernels on uniform grids.

Weight generation (Fornberg recursion), fourth-order derivative application
with one-sided closures, and a fourth-order cumulative quadrature. Everything
here operates on plain numpy arrays; grid semantics live in ``grid``.
"""

import numpy as np

from .errors import GridError

# Centered window sizes giving fourth-order accuracy for d^m/ds^m.
_CENTER_POINTS = {1: 5, 2: 5, 3: 7, 4: 7}


def fd_weights(offsets, x0, m):
    """Weights for the m-th derivative at ``x0`` from nodes at ``offsets``.

    Fornberg's recursion; exact for polynomials of degree < len(offsets).
    """
    nodes = np.asarray(offsets, dtype=float)
    n = nodes.size
    if m >= n:
        raise ValueError(f"need more than {m} nodes for derivative order {m}")
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _check_size(n, m):
    need = max(_CENTER_POINTS[m], m + 4)
    if n < need + 2:
        raise GridError(f"grid with {n} nodes too small for order-{m} stencil")


def boundary_rows(n, m):
    """(row, start, weights) for the one-sided rows of d^m/ds^m, h = 1.

    The centered window does not fit within ``half`` nodes of either edge;
    those rows get shifted (m+4)-point stencils of the same order.
    """
    _check_size(n, m)
    half = _CENTER_POINTS[m] // 2
    span = m + 4
    rows = []
    for i in range(half):
        rows.append((i, 0, fd_weights(np.arange(span), float(i), m)))
    for i in range(n - half, n):
        start = n - span
        rows.append((i, start, fd_weights(np.arange(span), float(i - start), m)))
    return rows


def center_weights(m):
    """Centered fourth-order weights for d^m/ds^m, h = 1."""
    p = _CENTER_POINTS[m]
    half = p // 2
    return fd_weights(np.arange(-half, half + 1), 0.0, m)


def apply_derivative(values, m, h):
    """Fourth-order d^m/ds^m of uniformly sampled values, m in 1..4."""
    if m not in _CENTER_POINTS:
        raise ValueError(f"derivative order {m} not in 1..4")
    values = np.asarray(values, dtype=float)
    n = values.size
    _check_size(n, m)
    w = center_weights(m)
    half = len(w) // 2
    out = np.empty(n)
    out[half:n - half] = np.correlate(values, w, mode="valid")
    for i, start, bw in boundary_rows(n, m):
        out[i] = bw @ values[start:start + len(bw)]
    out /= h**m
    return out


def cumulative_integral(values, h):
    """Fourth-order cumulative integral from the first node (value 0 there).

    Per-interval Newton-Cotes weights of the local cubic interpolant; the two
    end intervals use the one-sided cubic.
    """
    y = np.asarray(values, dtype=float)
    n = y.size
    if n < 4:
        raise GridError("cumulative integral needs at least 4 nodes")
    inc = np.empty(n - 1)
    inc[0] = (9 * y[0] + 19 * y[1] - 5 * y[2] + y[3]) / 24.0
    inc[1:n - 2] = (-y[0:n - 3] + 13 * y[1:n - 2] + 13 * y[2:n - 1] - y[3:n]) / 24.0
    inc[n - 2] = (y[n - 4] - 5 * y[n - 3] + 19 * y[n - 2] + 9 * y[n - 1]) / 24.0
    out = np.empty(n)
    out[0] = 0.0
    np.cumsum(inc, out=out[1:])
    out[1:] *= h
    return out


def trapezoid(values, h):
    """Composite trapezoid rule on a uniform grid."""
    y = np.asarray(values, dtype=float)
    return h * (y.sum() - 0.5 * (y[0] + y[-1]))
