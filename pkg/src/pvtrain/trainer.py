"""Bilevel training of the weight ``alpha`` and the operator ``B`` by exhaustive search.

The upper level minimises the assessment ``A(alpha, B) = |u_{alpha,B} - u_c|^2``
over a finite training ground: ``l + 1`` equally spaced weights in
``[0, P]`` times a greedy packing of the operator family's parameter box.
Because ``A`` is not convex, every point of the ground is evaluated and the
minimiser set is returned together with an a-priori bound on the gap to the
continuous optimum.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .grid import check_image, stack_unchecked
from .operator import OperatorFamily
from .regularizer import check_norm
from .solver import SolverParams, denoise, operator_norm

TIE_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class TrainingPair:
    clean: np.ndarray
    noisy: np.ndarray

    def __post_init__(self):
        clean = check_image(self.clean, "clean")
        noisy = check_image(self.noisy, "noisy")
        if clean.shape != noisy.shape:
            raise ValueError(f"image sizes differ: {clean.shape} vs {noisy.shape}")
        object.__setattr__(self, "clean", clean)
        object.__setattr__(self, "noisy", noisy)


@dataclass(frozen=True)
class FiniteGround:
    P: float
    l: int
    delta_l: float
    alpha_samples: tuple
    family: OperatorFamily
    Delta_l: float
    operator_samples: tuple  # of theta tuples

    def __len__(self):
        return len(self.alpha_samples) * len(self.operator_samples)

    def describe(self):
        return {
            "P": self.P,
            "l": self.l,
            "delta_l": self.delta_l,
            "Delta_l": self.Delta_l,
            "alpha_samples": list(self.alpha_samples),
            "family": self.family.to_dict(),
            "operator_samples": [list(t) for t in self.operator_samples],
        }


@dataclass(frozen=True)
class AssessmentRecord:
    alpha: float
    theta: tuple
    assessment: float
    pv_value: float
    iterations: int
    converged: bool
    gap: float = 0.0

    def key(self):
        return (self.alpha, self.theta)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "theta": list(self.theta),
            "assessment": self.assessment,
            "pv_value": self.pv_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "gap": self.gap,
        }


class SearchResult(NamedTuple):
    winners: list
    records: list


@dataclass
class WorkflowResult:
    winner: AssessmentRecord
    l_used: int
    bound: float
    certified: bool
    heuristic: bool
    search: SearchResult = field(repr=False)
    ground: FiniteGround = field(repr=False)


def _lattice_axis(lo, hi, step):
    # Anchored at the box point nearest 0 so the minimal-norm point is a
    # candidate; box endpoints are always included.
    if hi == lo:
        return np.array([lo])
    anchor = min(max(0.0, lo), hi)
    down = int(np.floor((anchor - lo) / step + 1e-9))
    up = int(np.floor((hi - anchor) / step + 1e-9))
    pts = np.round(anchor + step * np.arange(-down, up + 1), 12)
    pts = np.unique(np.concatenate([[lo], np.clip(pts, lo, hi), [hi]]))
    return pts


def greedy_packing(box, Delta):
    """Greedy minimal-norm packing of ``box`` with ell-infinity separation ``Delta``.

    Candidates are the lattice of step ``Delta / 2`` through the box point
    nearest the origin, plus the box endpoints on every axis. Each
    round picks the remaining candidate of smallest ell-infinity norm (ties:
    lexicographically smallest) and discards every candidate closer than
    ``Delta`` to it.
    """
    if not box:
        return [()]
    if Delta <= 0:
        return [tuple(float(lo) for lo, _ in box)]
    axes = [_lattice_axis(lo, hi, Delta / 2) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    cand = np.stack([m.ravel() for m in mesh], axis=1)
    # exact ordering: norm rounded against float noise, then coordinates
    norms = np.round(np.max(np.abs(cand), axis=1), 12)
    order = np.lexsort(tuple(cand[:, k] for k in reversed(range(cand.shape[1]))) + (norms,))
    cand = cand[order]
    alive = np.ones(len(cand), dtype=bool)
    picked = []
    tol = 1e-9 * Delta
    for i in range(len(cand)):
        if not alive[i]:
            continue
        picked.append(tuple(float(x) for x in cand[i]))
        near = np.max(np.abs(cand - cand[i]), axis=1) < Delta - tol
        alive &= ~near
    return picked


def build_ground(P, l, family):
    """Finite training ground at refinement level ``l``.

    Weights ``{i P / l : i = 0..l}``; operators from :func:`greedy_packing`
    with ``Delta_l = (largest box side) / l``.
    """
    if not P > 0:
        raise ValueError(f"P must be positive, got {P}")
    if int(l) != l or l < 1:
        raise ValueError(f"l must be a positive integer, got {l}")
    l = int(l)
    delta = P / l
    alphas = tuple(float(i * P / l) for i in range(l + 1))
    side = max((hi - lo for lo, hi in family.box), default=0.0)
    Delta = side / l
    thetas = tuple(greedy_packing(family.box, Delta))
    return FiniteGround(float(P), l, delta, alphas, family, Delta, thetas)


def assessment_value(u, clean):
    r = u - clean
    return float(np.sum(r * r))


def assess(pair, alpha, spec, norm=2, params=None, op_norm=None, theta=()):
    """Denoise ``pair.noisy`` at ``(alpha, spec)`` and score it against ``pair.clean``."""
    res = denoise(pair.noisy, alpha, spec, norm, params, op_norm=op_norm)
    return AssessmentRecord(
        alpha=float(alpha),
        theta=tuple(float(x) for x in theta),
        assessment=assessment_value(res.u, pair.clean),
        pv_value=res.pv_value,
        iterations=res.iterations,
        converged=res.converged,
        gap=res.gap,
    )


# Worker state for process pools; set once per worker by _init_worker.
_WORKER = {}


def _init_worker(pair, family, norm, params):
    _WORKER.update(pair=pair, family=family, norm=norm, params=params)


def _evaluate_operator(theta, alphas):
    pair, family = _WORKER["pair"], _WORKER["family"]
    spec = family.materialize(theta)
    h, w = pair.noisy.shape
    L = operator_norm(spec, w, h)
    return [
        assess(pair, a, spec, _WORKER["norm"], _WORKER["params"], op_norm=L, theta=theta)
        for a in alphas
    ]


def evaluate_points(pair, family, alphas, thetas, norm=2, params=None, jobs=1):
    """Assess every ``(alpha, theta)``; records come back sorted by ``(alpha, theta)``.

    The work is split by operator so each operator norm is estimated once.
    Results do not depend on ``jobs``: each solve is deterministic and the
    fold below is a sort on the key.
    """
    norm = check_norm(norm)
    params = params or SolverParams()
    alphas = tuple(float(a) for a in alphas)
    thetas = [tuple(float(x) for x in t) for t in thetas]
    jobs = max(1, int(jobs or 1))
    if jobs == 1 or len(thetas) == 1:
        _init_worker(pair, family, norm, params)
        try:
            chunks = [_evaluate_operator(t, alphas) for t in thetas]
        finally:
            _WORKER.clear()
    else:
        with ProcessPoolExecutor(
            max_workers=min(jobs, len(thetas)),
            initializer=_init_worker,
            initargs=(pair, family, norm, params),
        ) as pool:
            chunks = list(pool.map(_evaluate_operator, thetas, [alphas] * len(thetas)))
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=AssessmentRecord.key)
    return records


def select_winners(records, tie_tolerance=TIE_TOLERANCE):
    """All records within ``tie_tolerance`` of the minimum; canonical winner first."""
    if not records:
        raise ValueError("no records to select from")
    best = min(r.assessment for r in records)
    winners = [r for r in records if r.assessment <= best + tie_tolerance]
    winners.sort(key=AssessmentRecord.key)
    return winners


def grid_search(pair, ground, norm=2, params=None, jobs=1):
    """Evaluate the assessment over the whole ground and return the minimiser set.

    Returns
    -------
    SearchResult
        ``winners`` holds every record within the tie tolerance of the minimum,
        smallest ``alpha`` then lexicographic ``theta`` first; ``records``
        holds all evaluations in the same key order.
    """
    records = evaluate_points(
        pair, ground.family, ground.alpha_samples, ground.operator_samples, norm, params, jobs
    )
    return SearchResult(select_winners(records), records)


def sobolev_norm(img, d):
    """Discrete ``W^{d,1}`` norm: ``sum_{h=0..d} |H^h img|_1``."""
    u = check_image(img)
    if d < 1 or d > 3:
        raise ValueError(f"unsupported order d={d}")
    return float(np.sum(np.abs(u)) + np.sum(np.abs(stack_unchecked(u, d))))


def error_bound(l, P, K, d, delta, sobolev):
    """A-priori bound on ``A(level-l winner) - A(global winner)``.

    ``4 K P [d sqrt(K) P (P / l) + 1 / l]^(1/2) sobolev^(1/2) / delta^d + delta / 2``
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if l < 1 or not P > 0 or K < 1 or d < 1 or sobolev < 0:
        raise ValueError("error_bound needs l >= 1, P > 0, K >= 1, d >= 1, sobolev >= 0")
    bracket = d * np.sqrt(K) * P * (P / l) + 1.0 / l
    return float(4 * K * P * np.sqrt(bracket) * np.sqrt(sobolev) / delta**d + delta / 2)


def family_certified(family, P):
    """True if the whole family lies in the class with inverse entries bounded by ``P``."""
    return family.inverse_bound() <= P


def run_workflow(pair, epsilon, P, family, norm=2, params=None, l_max=64, jobs=1):
    """Pick the coarsest level whose a-priori error fits ``epsilon``, then search it.

    With ``delta = epsilon / 2`` the level doubles from ``l = 1`` until
    ``error_bound <= epsilon / 2`` or ``l_max`` is reached; the search at that
    level then yields a winner within ``epsilon`` of the continuous optimum.
    ``certified`` is False when the cap stopped the refinement, and
    ``heuristic`` is True when the family is not inverse-bounded by ``P``,
    in which case the bound's continuity constant is not justified.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    delta = epsilon / 2
    sob = sobolev_norm(pair.noisy, family.d)
    l = 1
    while True:
        bound = error_bound(l, P, family.K, family.d, delta, sob)
        if bound <= epsilon / 2 or 2 * l > l_max:
            break
        l *= 2
    certified = bound <= epsilon / 2
    ground = build_ground(P, l, family)
    search = grid_search(pair, ground, norm, params, jobs)
    return WorkflowResult(
        winner=search.winners[0],
        l_used=l,
        bound=bound,
        certified=certified,
        heuristic=not family_certified(family, P),
        search=search,
        ground=ground,
    )


def landscape(pair, alpha_fixed, family, grid_per_axis, norm=2, params=None, jobs=1):
    """Assessment at fixed ``alpha`` over a regular lattice of the family box.

    Returns a list of ``(theta, assessment)`` rows in lattice order.
    """
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be >= 2")
    if family.parameter_dim > 2:
        raise ValueError("landscape supports at most two family parameters")
    thetas = family.lattice(grid_per_axis)
    records = evaluate_points(pair, family, (alpha_fixed,), thetas, norm, params, jobs)
    by_theta = {r.theta: r.assessment for r in records}
    return [(t, by_theta[t]) for t in thetas]
