"""The discrete PV seminorm, its dual certificates and dual-ball projections.

``pv(spec, u, p)`` is the sum over pixels of ``|(B u)(x)|_p`` where the
pointwise norm runs over all ``K`` channels. Dual fields live in the unit
ball of the conjugate norm: l2 for p = 2, l-infinity for p = 1 and l1 for
p = inf.
"""

import numpy as np

from .grid import check_field, check_image
from .operator import adjoint_apply_unchecked, apply_unchecked

NORMS = (1, 2, np.inf)


def check_norm(p):
    """Normalise a norm choice to one of ``1``, ``2`` or ``np.inf``."""
    if isinstance(p, str):
        key = p.strip().lower()
        if key in ("inf", "infinity", "linf"):
            return np.inf
        try:
            p = float(key)
        except ValueError:
            raise ValueError(f"unsupported norm {p!r}; choose 1, 2 or inf") from None
    if p == 1:
        return 1
    if p == 2:
        return 2
    if p == np.inf:
        return np.inf
    raise ValueError(f"unsupported norm {p!r}; choose 1, 2 or inf")


def pointwise_norm(field, p):
    """Per-pixel ``|field(x)|_p`` over the channel axis."""
    if p == 2:
        return np.sqrt(np.sum(field * field, axis=0))
    if p == 1:
        return np.sum(np.abs(field), axis=0)
    return np.max(np.abs(field), axis=0)


def pointwise_dual_norm(field, p):
    """Per-pixel norm conjugate to ``|.|_p``."""
    return pointwise_norm(field, {1: np.inf, 2: 2, np.inf: 1}[p])


def pv_unchecked(spec, u, p):
    return float(np.sum(pointwise_norm(apply_unchecked(spec, u), p)))


def pv(spec, img, norm=2):
    """Discrete PV seminorm of ``img`` for operator ``spec``.

    Examples
    --------
    >>> from pvtrain.operator import identity_spec
    >>> pv(identity_spec(1), [[0.0, 1.0], [0.0, 1.0]])
    2.0
    """
    return pv_unchecked(spec, check_image(img), check_norm(norm))


def dual_certificate(spec, img, field, norm=2):
    """Lower bound ``<img, B* field>`` on ``pv(spec, img)`` for a feasible field.

    Raises ``ValueError`` if some pixel of ``field`` has dual norm above
    ``1 + 1e-9``.
    """
    p = check_norm(norm)
    u = check_image(img)
    v = check_field(field, spec.d)
    worst = float(np.max(pointwise_dual_norm(v, p)))
    if worst > 1.0 + 1e-9:
        raise ValueError(f"field leaves the dual unit ball (max dual norm {worst:.3g})")
    return float(np.sum(u * adjoint_apply_unchecked(spec, v)))


def optimal_certificate(spec, img, norm=2):
    """Dual field attaining ``pv``: the normalised direction of ``B u`` per pixel."""
    p = check_norm(norm)
    w = apply_unchecked(spec, check_image(img))
    if p == 1:
        return np.sign(w)
    if p == 2:
        n = pointwise_norm(w, 2)
        safe = np.where(n > 0, n, 1.0)
        return np.where(n > 0, w / safe, 0.0)
    # p = inf: unit mass on the largest component
    k = np.argmax(np.abs(w), axis=0)
    out = np.zeros_like(w)
    np.put_along_axis(out, k[None], np.take_along_axis(np.sign(w), k[None], 0), 0)
    return out


def _project_l1(v, radius):
    # Sort-based exact projection onto the l1 ball, vectorised over pixels.
    a = np.abs(v)
    outside = np.sum(a, axis=0) > radius
    if not np.any(outside):
        return v.copy()
    if radius == 0:
        return np.where(outside[None], 0.0, v)
    mu = -np.sort(-a, axis=0)
    css = np.cumsum(mu, axis=0)
    j = np.arange(1, v.shape[0] + 1).reshape((-1,) + (1,) * (v.ndim - 1))
    cond = mu - (css - radius) / j > 0
    cond[0] = True  # exact for j = 1; rounding can lose it when radius is tiny
    rho = v.shape[0] - 1 - np.argmax(cond[::-1], axis=0)
    shift = (np.take_along_axis(css, rho[None], 0)[0] - radius) / (rho + 1)
    proj = np.sign(v) * np.maximum(a - shift, 0.0)
    return np.where(outside[None], proj, v)


def project_unchecked(v, radius, p):
    if p == 2:
        n = pointwise_norm(v, 2)
        scale = np.where(n > radius, radius / np.where(n > 0, n, 1.0), 1.0)
        return v * scale
    if p == 1:
        return np.clip(v, -radius, radius)
    return _project_l1(v, radius)


def dual_ball_project(field, radius, norm=2):
    """Project every pixel vector onto the dual-norm ball of ``radius``."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    return project_unchecked(check_field(field), float(radius), check_norm(norm))


def kernel_project_gradient(img):
    """L2 projection onto constants, the kernel of the discrete gradient."""
    u = check_image(img)
    return np.full_like(u, np.mean(u))
