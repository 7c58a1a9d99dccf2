"""Discrete calculus on the pixel grid.

Images are 2-D float arrays of shape ``(height, width)``. Jet fields are
3-D arrays of shape ``(K, height, width)`` holding, per pixel, the stacked
h-fold partial differences for h = 1..d.

Axis 1 of the multi-index is the horizontal direction (numpy axis 1, the
column index ``j``), axis 2 is the vertical direction (numpy axis 0, the
row index ``i``). Forward differences use a replicate (Neumann) boundary,
so the last difference along each axis is zero and constants lie in the
kernel of every order.
"""

from itertools import product

import numpy as np

MAX_ORDER = 3
N_AXES = 2

# multi-index axis -> numpy axis
_NP_AXIS = (1, 0)


def n_channels(d):
    """Channel count ``K = 2 + 4 + ... + 2**d`` of an order-``d`` jet field."""
    _check_order(d)
    return sum(N_AXES**h for h in range(1, d + 1))


def multi_indices(d):
    """Channel labels in storage order: h-blocks by increasing h, each lexicographic."""
    _check_order(d)
    out = []
    for h in range(1, d + 1):
        out.extend(product(range(N_AXES), repeat=h))
    return out


def block_slices(d):
    """Slices of the channel axis for the h-blocks, h = 1..d."""
    _check_order(d)
    slices, start = [], 0
    for h in range(1, d + 1):
        stop = start + N_AXES**h
        slices.append(slice(start, stop))
        start = stop
    return slices


def check_image(img, name="image"):
    """Return ``img`` as a float64 array after validating shape and finiteness."""
    u = np.asarray(img, dtype=np.float64)
    if u.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {u.shape}")
    if u.shape[0] < 2 or u.shape[1] < 2:
        raise ValueError(f"{name} needs at least 2x2 pixels, got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} contains non-finite values")
    return u


def check_field(field, d=None, name="field"):
    v = np.asarray(field, dtype=np.float64)
    if v.ndim != 3:
        raise ValueError(f"{name} must have shape (K, height, width), got {v.shape}")
    if d is not None and v.shape[0] != n_channels(d):
        raise ValueError(
            f"{name} has {v.shape[0]} channels, order {d} needs {n_channels(d)}"
        )
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def _check_order(d):
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise TypeError(f"order must be an integer, got {d!r}")
    if d < 1 or d > MAX_ORDER:
        raise ValueError(f"unsupported order d={d}; expected 1 <= d <= {MAX_ORDER}")


def forward_diff(u, axis):
    """Forward difference along multi-index ``axis`` (0 or 1), zero on the last line."""
    ax = _NP_AXIS[axis]
    out = np.zeros_like(u)
    if ax == 1:
        out[:, :-1] = u[:, 1:] - u[:, :-1]
    else:
        out[:-1, :] = u[1:, :] - u[:-1, :]
    return out


def forward_diff_adjoint(g, axis):
    """Exact transpose of :func:`forward_diff` (a negative divergence)."""
    ax = _NP_AXIS[axis]
    out = np.zeros_like(g)
    if ax == 1:
        out[:, :-1] -= g[:, :-1]
        out[:, 1:] += g[:, :-1]
    else:
        out[:-1, :] -= g[:-1, :]
        out[1:, :] += g[:-1, :]
    return out


def hessian_stack(img, d):
    """Stack all h-fold forward differences of ``img`` for h = 1..d.

    Parameters
    ----------
    img : array_like, shape (height, width)
    d : int
        Highest order, 1 <= d <= 3.

    Returns
    -------
    ndarray, shape (K, height, width)
        Channel order follows :func:`multi_indices`.
    """
    _check_order(d)
    return stack_unchecked(check_image(img), d)


def hessian_adjoint(field, d):
    """Transpose of :func:`hessian_stack` under the plain Euclidean inner product."""
    _check_order(d)
    return adjoint_unchecked(check_field(field, d), d)


# Validation-free kernels for solver inner loops.


def stack_unchecked(u, d):
    channels = []
    prev = {(): u}
    for h in range(1, d + 1):
        cur = {}
        for idx in product(range(N_AXES), repeat=h):
            cur[idx] = forward_diff(prev[idx[1:]], idx[0])
            channels.append(cur[idx])
        prev = cur
    return np.stack(channels)


def adjoint_unchecked(v, d):
    out = np.zeros(v.shape[1:])
    for c, idx in enumerate(multi_indices(d)):
        w = v[c]
        # (D_a1 D_a2 ... D_ah)^T = D_ah^T ... D_a1^T, so D_a1^T acts first
        for a in idx:
            w = forward_diff_adjoint(w, a)
        out += w
    return out
