"""Slow, independent reference implementations used to validate the fast paths.

Nothing here shares code with the stencil kernels: the operator is assembled
as an explicit matrix from Kronecker products of 1-D difference matrices,
dual-ball projections are done pixel by pixel, and the denoising problem is
solved through its dual by plain projected gradient.

The dual of ``min_u |u - f|^2 + alpha * sum_x |(B u)(x)|_p`` is

    max_v <f, B^T v> - |B^T v|^2 / 4   s.t.  |v(x)|_q <= alpha,

with ``q`` conjugate to ``p``. First-order optimality in ``u`` gives the
recovery formula ``u = f - B^T v / 2``.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

MAX_PIXELS = 256
MAX_SOLVE_SIDE = 16


@dataclass(frozen=True)
class OracleParams:
    max_iterations: int = 100_000
    tolerance: float = 1e-10
    # multiple of 1/|B|^2; the gradient of the dual is |B|^2/2-Lipschitz
    step: float = 1.0

    def __post_init__(self):
        if self.max_iterations <= 0 or self.tolerance <= 0 or self.step <= 0:
            raise ValueError("oracle parameters must be positive")


def _diff_matrix(n):
    m = np.zeros((n, n))
    for k in range(n - 1):
        m[k, k] = -1.0
        m[k, k + 1] = 1.0
    return m


def dense_assemble(spec, width, height):
    """Explicit ``(K*H*W, H*W)`` matrix of ``u -> B u`` (row-major flattening)."""
    if width * height > MAX_PIXELS:
        raise ValueError(f"dense oracle capped at {MAX_PIXELS} pixels")
    eye_w, eye_h = np.eye(width), np.eye(height)
    # axis 0 differences along columns (x), axis 1 along rows (y)
    partial = (np.kron(eye_h, _diff_matrix(width)), np.kron(_diff_matrix(height), eye_w))
    npix = width * height
    rows = []
    for h, block in enumerate(spec.blocks, start=1):
        stack = []
        for idx in product(range(2), repeat=h):
            m = np.eye(npix)
            for a in idx:
                m = partial[a] @ m
            stack.append(m)
        rows.append(np.kron(block, np.eye(npix)) @ np.vstack(stack))
    return np.vstack(rows)


def _project_field(v, radius, p, K):
    # Pixelwise projection onto the radius-ball of the norm conjugate to p.
    w = v.reshape(K, -1)
    if p == 2:
        n = np.sqrt(np.sum(w * w, axis=0))
        return (w * np.where(n > radius, radius / np.where(n > 0, n, 1.0), 1.0)).ravel()
    if p == 1:
        return np.minimum(np.maximum(w, -radius), radius).ravel()
    a = np.abs(w)
    inside = np.sum(a, axis=0) <= radius
    # bisection on the soft threshold t with sum(max(|w| - t, 0)) = radius
    lo = np.zeros(w.shape[1])
    hi = np.max(a, axis=0)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        over = np.sum(np.maximum(a - mid, 0.0), axis=0) > radius
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    shrunk = np.sign(w) * np.maximum(a - hi, 0.0)
    return np.where(inside, w, shrunk).ravel()


def dual_reference_solve(u_eta, alpha, spec, norm=2, oparams=None):
    """Reference minimiser of ``|u - u_eta|^2 + alpha * PV_B(u)`` for small images."""
    from .regularizer import check_norm

    oparams = oparams or OracleParams()
    p = check_norm(norm)
    f = np.asarray(u_eta, dtype=np.float64)
    height, width = f.shape
    if max(height, width) > MAX_SOLVE_SIDE:
        raise ValueError(f"oracle solve capped at {MAX_SOLVE_SIDE}x{MAX_SOLVE_SIDE}")
    if not alpha > 0:
        raise ValueError("oracle needs alpha > 0")
    M = dense_assemble(spec, width, height)
    smax = np.linalg.svd(M, compute_uv=False)[0]
    fv = f.ravel()
    if smax == 0.0:
        return f.copy()
    step = oparams.step / smax**2
    Mf = M @ fv
    v = np.zeros(M.shape[0])
    for _ in range(oparams.max_iterations):
        grad = Mf - 0.5 * (M @ (M.T @ v))
        new = _project_field(v + step * grad, alpha, p, spec.K)
        change = np.max(np.abs(new - v))
        v = new
        if change <= oparams.tolerance:
            break
    return (fv - 0.5 * (M.T @ v)).reshape(height, width)


def randomized_pv_lower_bound(spec, img, norm=2, draws=1000, seed=0, include_optimal=False):
    """Max of ``<img, B^T v>`` over random fields ``v`` in the dual unit ball.

    Each draw is ``B u + noise`` rescaled pixelwise onto the ball, with a
    noise level drawn log-uniformly over six decades of the typical
    ``|B u|`` magnitude, so the bound tightens as ``draws`` grows. With
    ``include_optimal`` the analytic maximiser is added as an extra draw, and
    the bound then equals ``pv`` up to rounding. ``draws = 0`` uses only
    that analytic field.
    """
    from .regularizer import check_norm, optimal_certificate

    if draws < 0:
        raise ValueError("draws must be >= 0")
    p = check_norm(norm)
    u = np.asarray(img, dtype=np.float64)
    height, width = u.shape
    M = dense_assemble(spec, width, height)
    # <u, B^T v> evaluated as <B u, v>; exact zero on the kernel
    bu = M @ u.ravel()
    best = -np.inf
    if include_optimal or draws == 0:
        best = float(bu @ optimal_certificate(spec, u, p).ravel())
    rng = np.random.default_rng(seed)
    scale = max(float(np.mean(np.abs(bu))), 1e-300)
    for _ in range(draws):
        noise = scale * 10.0 ** rng.uniform(-3, 3)
        v = _normalise(bu + noise * rng.standard_normal(bu.size), p, spec.K)
        best = max(best, float(bu @ v))
    return best


def _normalise(v, p, K):
    # Scale every pixel onto the boundary of the dual unit ball.
    w = v.reshape(K, -1)
    if p == 2:
        n = np.sqrt(np.sum(w * w, axis=0))
    elif p == 1:
        n = np.max(np.abs(w), axis=0)
    else:
        n = np.sum(np.abs(w), axis=0)
    return (w / np.where(n > 0, n, 1.0)).ravel()
