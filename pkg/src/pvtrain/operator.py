"""Mixed-order differential operators ``B = sum_h B^h H^h``.

An :class:`OperatorSpec` holds one square coefficient block per order
``h = 1..d``; block ``h`` acts on the ``2**h`` channels of the h-th
difference stack at every pixel. Families of operators are affine maps
from a parameter box into specs, which covers the identity, the shear
families used for training, and user-declared variants.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import (
    MAX_ORDER,
    N_AXES,
    adjoint_unchecked,
    block_slices,
    check_field,
    check_image,
    n_channels,
    stack_unchecked,
)

FAMILY_LABELS = ("identity", "upper-shear", "full-shear", "custom-affine")


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Coefficient blocks ``B^1 .. B^d`` of a differential operator."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(np.array(b, dtype=np.float64) for b in self.blocks)
        if not 1 <= len(blocks) <= MAX_ORDER:
            raise ValueError(f"need 1..{MAX_ORDER} blocks, got {len(blocks)}")
        for h, b in enumerate(blocks, start=1):
            n = N_AXES**h
            if b.shape != (n, n):
                raise ValueError(f"block {h} must be {n}x{n}, got {b.shape}")
            if not np.all(np.isfinite(b)):
                raise ValueError(f"block {h} has non-finite entries")
            b.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def d(self):
        return len(self.blocks)

    @property
    def K(self):
        return n_channels(self.d)

    def __eq__(self, other):
        if not isinstance(other, OperatorSpec) or other.d != self.d:
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.blocks, other.blocks))

    def __repr__(self):
        rows = [b.tolist() for b in self.blocks]
        return f"OperatorSpec(d={self.d}, blocks={rows})"

    def to_dict(self):
        return {"d": self.d, "blocks": [b.tolist() for b in self.blocks]}

    @classmethod
    def from_dict(cls, data):
        spec = cls(tuple(data["blocks"]))
        if "d" in data and int(data["d"]) != spec.d:
            raise ValueError(f"declared d={data['d']} but {spec.d} blocks given")
        return spec


def identity_spec(d=1):
    """Operator with identity blocks; for ``d = 1`` this is the discrete gradient."""
    return OperatorSpec(tuple(np.eye(N_AXES**h) for h in range(1, d + 1)))


def shear_spec(s, t=0.0):
    """First-order operator with coefficient matrix ``[[1, s], [t, 1]]``."""
    return OperatorSpec(([[1.0, s], [t, 1.0]],))


def _mix(blocks, field, transpose=False):
    # Per-pixel block products as explicit sums; no BLAS so results do not
    # depend on thread count.
    out = np.empty_like(field)
    for b, sl in zip(blocks, block_slices(len(blocks))):
        m = b.T if transpose else b
        src = field[sl]
        dst = out[sl]
        for r in range(m.shape[0]):
            acc = m[r, 0] * src[0]
            for c in range(1, m.shape[1]):
                acc = acc + m[r, c] * src[c]
            dst[r] = acc
    return out


def apply_unchecked(spec, u):
    return _mix(spec.blocks, stack_unchecked(u, spec.d))


def adjoint_apply_unchecked(spec, v):
    return adjoint_unchecked(_mix(spec.blocks, v, transpose=True), spec.d)


def apply(spec, img):
    """Evaluate ``B u``: returns a ``(K, height, width)`` jet field."""
    return apply_unchecked(spec, check_image(img))


def adjoint(spec, field):
    """Evaluate ``B* v = sum_h (H^h)^T ((B^h)^T v_h)``."""
    v = check_field(field, spec.d)
    return adjoint_apply_unchecked(spec, v)


def linf_distance(a, b):
    """Sum over orders of the max-abs entry of ``B^h_a - B^h_b``."""
    if a.d != b.d:
        raise ValueError(f"order mismatch: {a.d} vs {b.d}")
    return float(sum(np.max(np.abs(x - y)) for x, y in zip(a.blocks, b.blocks)))


def _inverse(block):
    scale = np.max(np.abs(block))
    n = block.shape[0]
    if scale == 0.0:
        return None
    det = np.linalg.det(block)
    if abs(det) < 1e-12 * scale**n:
        return None
    return np.linalg.inv(block)


def inverse_bound(spec):
    """Largest max-abs entry over the block inverses; ``inf`` if any block is singular."""
    worst = 0.0
    for b in spec.blocks:
        inv = _inverse(b)
        if inv is None:
            return np.inf
        worst = max(worst, float(np.max(np.abs(inv))))
    return worst


def sigma_p_admissible(spec, P):
    """True iff every block is invertible with inverse entries bounded by ``P``."""
    if not P > 0:
        raise ValueError(f"P must be positive, got {P}")
    return inverse_bound(spec) <= P


def continuity_modulus(a, b, P):
    """Constant ``c = d sqrt(K) P |a - b|`` bounding the relative change of PV.

    For specs in the inverse-bounded class with constant ``P``,
    ``|PV_a(u) - PV_b(u)| <= c * min(PV_a(u), PV_b(u))``.
    """
    if a.d != b.d:
        raise ValueError(f"order mismatch: {a.d} vs {b.d}")
    for name, s in (("a", a), ("b", b)):
        if not sigma_p_admissible(s, P):
            raise ValueError(f"operator {name} is not admissible for P={P}")
    return a.d * np.sqrt(a.K) * P * linf_distance(a, b)


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """Affine family ``theta -> base + sum_i theta_i * directions[i]`` over a box.

    Parameters
    ----------
    label : str
        One of ``identity``, ``upper-shear``, ``full-shear``, ``custom-affine``.
    base : OperatorSpec
    directions : tuple of OperatorSpec
        One per parameter; all share the base order.
    box : tuple of (lo, hi)
        Closed parameter interval per direction.
    """

    label: str
    base: OperatorSpec
    directions: tuple = ()
    box: tuple = ()

    def __post_init__(self):
        if self.label not in FAMILY_LABELS:
            raise ValueError(f"unknown family label {self.label!r}")
        directions = tuple(self.directions)
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if len(directions) != len(box):
            raise ValueError("need one box interval per direction")
        for lo, hi in box:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"bad parameter interval [{lo}, {hi}]")
        for s in directions:
            if s.d != self.base.d:
                raise ValueError("directions must share the base order")
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "box", box)
        self._warn_normalization()

    @property
    def parameter_dim(self):
        return len(self.box)

    @property
    def d(self):
        return self.base.d

    @property
    def K(self):
        return self.base.K

    def materialize(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if theta.shape != (self.parameter_dim,):
            if self.parameter_dim == 0 and theta.size == 0:
                return self.base
            raise ValueError(f"expected {self.parameter_dim} parameters, got {theta.shape}")
        for x, (lo, hi) in zip(theta, self.box):
            if not lo - 1e-12 <= x <= hi + 1e-12:
                raise ValueError(f"parameter {x} outside [{lo}, {hi}]")
        blocks = []
        for h in range(self.d):
            b = self.base.blocks[h].copy()
            for x, s in zip(theta, self.directions):
                b = b + x * s.blocks[h]
            blocks.append(b)
        return OperatorSpec(tuple(blocks))

    def lattice(self, per_axis):
        """Regular lattice with ``per_axis`` points on every non-degenerate axis."""
        axes = [
            np.array([lo]) if lo == hi else np.linspace(lo, hi, per_axis)
            for lo, hi in self.box
        ]
        if not axes:
            return [()]
        mesh = np.meshgrid(*axes, indexing="ij")
        return [tuple(float(x) for x in p) for p in zip(*(m.ravel() for m in mesh))]

    def inverse_bound(self, per_axis=21):
        """Max inverse-entry bound over a lattice of the box (corners included).

        Exact for the built-in shear families, whose bound peaks at a corner.
        """
        return max(inverse_bound(self.materialize(t)) for t in self.lattice(per_axis))

    def _warn_normalization(self):
        worst = max(
            max(float(np.max(np.abs(b))) for b in self.materialize(t).blocks)
            for t in self.lattice(3)
        )
        if worst > 1.0 + 1e-12:
            warnings.warn(
                f"family {self.label!r} has coefficient entries up to {worst:g} > 1",
                stacklevel=3,
            )

    def to_dict(self):
        out = {"label": self.label, "box": [list(b) for b in self.box]}
        if self.label == "custom-affine":
            out["base"] = self.base.to_dict()
            out["directions"] = [s.to_dict() for s in self.directions]
        return out


def _unit(i, j):
    m = np.zeros((2, 2))
    m[i, j] = 1.0
    return OperatorSpec((m,))


def identity_family(d=1):
    return OperatorFamily("identity", identity_spec(d))


def upper_shear_family(box=((-0.5, 0.5),)):
    """``s -> [[1, s], [0, 1]]``."""
    return OperatorFamily("upper-shear", identity_spec(1), (_unit(0, 1),), box)


def full_shear_family(box=((-0.5, 0.5), (-0.5, 0.5))):
    """``(s, t) -> [[1, s], [t, 1]]``."""
    return OperatorFamily(
        "full-shear", identity_spec(1), (_unit(0, 1), _unit(1, 0)), box
    )


def family_from_dict(data):
    label = data.get("label")
    box = data.get("box")
    if label == "identity":
        return identity_family(int(data.get("d", 1)))
    if label == "upper-shear":
        return upper_shear_family(box if box is not None else ((-0.5, 0.5),))
    if label == "full-shear":
        return full_shear_family(box if box is not None else ((-0.5, 0.5),) * 2)
    if label == "custom-affine":
        base = OperatorSpec.from_dict(data["base"])
        dirs = tuple(OperatorSpec.from_dict(s) for s in data.get("directions", ()))
        return OperatorFamily("custom-affine", base, dirs, box or ())
    raise ValueError(f"unknown family label {label!r}; expected one of {FAMILY_LABELS}")
