"""Best-approximation projections onto simple closed convex sets in lp.

Set kinds: coordinate boxes, equal-coordinate affine subspaces (optionally
with pinned coordinates), lp balls and halfspaces.  The metric projection
minimises ||x - y||_p over the set; for p in (1, inf) it is unique.

Solvers per kind:

* ``Box`` clamps coordinatewise (p-independent),
* ``AffineEqual`` minimises sum_i |x_i - a|^p per group by bisection on the
  strictly increasing derivative (mean shortcut for p = 2),
* ``Ball``: the multiplier equation forces a uniform shrink of every
  coordinate gap, so the projection is the radial contraction to the sphere,
* ``Halfspace``: the optimality system moves x along sign(a)|a|^(q-1),
  q = p/(p-1), by the step that makes the constraint active.

For p = 2 these projections are nonexpansive; for p != 2 they are not in
general, and nothing here relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import SpaceParams, lp_norm, norm_pow

__all__ = [
    "Box",
    "AffineEqual",
    "Ball",
    "Halfspace",
    "project",
    "membership_residual",
    "is_member",
    "sample_points",
    "projection_inequality_residual",
    "projection_pair_residual",
    "set_to_json",
    "set_from_json",
]

BISECTION_BUDGET = 200
FEASIBILITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Box:
    """Coordinatewise bounds; scalars broadcast, infinities allowed."""

    lower: object
    upper: object

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        if np.any(lo > up):
            raise ValueError("Box requires lower <= upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)


@dataclass(frozen=True)
class AffineEqual:
    """Coordinates equal within each group, plus optionally pinned coords.

    ``groups`` is a tuple of disjoint index tuples; ``fixed`` a tuple of
    (index, value) pairs disjoint from the groups.  With no constraints the
    set is the whole space.
    """

    groups: tuple = ()
    fixed: tuple = ()

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(i) for i in g)) for g in self.groups)
        fixed = tuple(sorted((int(i), float(v)) for i, v in self.fixed))
        seen = set()
        for g in groups:
            if len(g) < 2:
                raise ValueError("equal-coordinate groups need >= 2 indices")
            if any(i < 0 for i in g) or len(set(g)) != len(g):
                raise ValueError(f"bad index group {g}")
            if seen & set(g):
                raise ValueError("groups must be disjoint")
            seen |= set(g)
        for i, v in fixed:
            if i < 0 or i in seen:
                raise ValueError("fixed coordinates must be disjoint from groups")
            if not np.isfinite(v):
                raise ValueError("fixed coordinate values must be finite")
            seen.add(i)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "fixed", fixed)

    def min_dim(self) -> int:
        idx = [i for g in self.groups for i in g] + [i for i, _ in self.fixed]
        return max(idx) + 1 if idx else 1


@dataclass(frozen=True, eq=False)
class Ball:
    """lp ball {y : ||y - center||_p <= radius}."""

    center: object
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("Ball radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True, eq=False)
class Halfspace:
    """{y : <normal, y> <= offset}."""

    normal: object
    offset: float

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        if a.ndim != 1 or not np.any(a != 0.0):
            raise ValueError("Halfspace normal must be a nonzero vector")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))


def _group_minimizer(vals: np.ndarray, p: float) -> np.ndarray:
    """argmin_a sum_i |a - vals_i|^p along the last axis (batched).

    The derivative sum_i sign(a - v_i)|a - v_i|^(p-1) is strictly increasing
    in a, with a root bracketed by [min vals, max vals].
    """
    if p == 2.0:
        return vals.mean(axis=-1)
    lo = vals.min(axis=-1)
    hi = vals.max(axis=-1)
    for _ in range(BISECTION_BUDGET):
        mid = 0.5 * (lo + hi)
        gap = mid[..., None] - vals
        deriv = np.sum(np.sign(gap) * np.abs(gap) ** (p - 1.0), axis=-1)
        below = deriv < 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        span = hi - lo
        if np.all(span <= 1e-15 * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))):
            break
    return 0.5 * (lo + hi)


def project(C, x, sp: SpaceParams, tol: float = 1e-12) -> np.ndarray:
    """Metric projection of x (batched along leading axes) onto C."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("project: input contains NaN or Inf")
    p = sp.p
    if isinstance(C, Box):
        return np.clip(x, C.lower, C.upper)
    if isinstance(C, AffineEqual):
        if x.shape[-1] < C.min_dim():
            raise ValueError("vector dimension too small for the constraint set")
        out = np.array(x, copy=True)
        for g in C.groups:
            a = _group_minimizer(x[..., list(g)], p)
            out[..., list(g)] = a[..., None]
        for i, v in C.fixed:
            out[..., i] = v
        return out
    if isinstance(C, Ball):
        gap = x - C.center
        dist = lp_norm(gap, p)
        factor = np.where(dist > C.radius, C.radius / np.where(dist == 0.0, 1.0, dist), 1.0)
        return C.center + factor[..., None] * gap
    if isinstance(C, Halfspace):
        a = C.normal
        if x.shape[-1] != a.size:
            raise ValueError("vector dimension does not match the halfspace normal")
        q = p / (p - 1.0)
        direction = np.sign(a) * np.abs(a) ** (q - 1.0)
        violation = np.maximum(x @ a - C.offset, 0.0)
        step = violation / np.sum(np.abs(a) ** q)
        return x - step[..., None] * direction
    raise TypeError(f"unknown convex set kind: {type(C).__name__}")


def membership_residual(C, x, p: float):
    """Max constraint violation of x w.r.t. C (0 on the set); batched."""
    x = np.asarray(x, dtype=float)
    if isinstance(C, Box):
        viol = np.maximum(np.maximum(C.lower - x, x - C.upper), 0.0)
        return viol.max(axis=-1)
    if isinstance(C, AffineEqual):
        res = np.zeros(x.shape[:-1])
        for g in C.groups:
            vals = x[..., list(g)]
            res = np.maximum(res, vals.max(axis=-1) - vals.min(axis=-1))
        for i, v in C.fixed:
            res = np.maximum(res, np.abs(x[..., i] - v))
        return res
    if isinstance(C, Ball):
        return np.maximum(lp_norm(x - C.center, p) - C.radius, 0.0)
    if isinstance(C, Halfspace):
        return np.maximum(x @ C.normal - C.offset, 0.0)
    raise TypeError(f"unknown convex set kind: {type(C).__name__}")


def is_member(C, x, p: float, tol: float = FEASIBILITY_TOL) -> bool:
    return bool(np.all(membership_residual(C, x, p) <= tol))


def sample_points(
    C, rng: np.random.Generator, n: int, dim: int, scale: float = 10.0, p: float = 2.0
) -> np.ndarray:
    """Draw n exact members of C inside a coordinate window of half-width
    scale; ``p`` matters only for ball membership."""
    if isinstance(C, Box):
        lo = np.broadcast_to(np.maximum(C.lower, -scale), (dim,))
        up = np.broadcast_to(np.minimum(C.upper, scale), (dim,))
        if np.any(lo > up):
            raise ValueError("sampling window does not intersect the box")
        return rng.uniform(lo, up, size=(n, dim))
    if isinstance(C, AffineEqual):
        if dim < C.min_dim():
            raise ValueError("dim too small for the constraint set")
        pts = rng.uniform(-scale, scale, size=(n, dim))
        for g in C.groups:
            pts[:, list(g)] = rng.uniform(-scale, scale, size=(n, 1))
        for i, v in C.fixed:
            pts[:, i] = v
        return pts
    if isinstance(C, Ball):
        raw = rng.uniform(-1.0, 1.0, size=(n, dim))
        radii = C.radius * rng.uniform(0.0, 1.0, size=n)
        norms = np.maximum(lp_norm(raw, p), 1e-300)
        return C.center + raw * (radii / norms)[:, None]
    if isinstance(C, Halfspace):
        pts = rng.uniform(-scale, scale, size=(n, dim))
        viol = pts @ C.normal - C.offset
        bad = viol > 0.0
        if np.any(bad):
            # reflect strictly into the halfspace through the boundary
            shift = (2.0 * viol[bad] / (C.normal @ C.normal))[:, None] * C.normal
            pts[bad] = pts[bad] - shift
        return pts
    raise TypeError(f"unknown convex set kind: {type(C).__name__}")


def projection_inequality_residual(C, x, y, sp: SpaceParams, feas_tol: float = FEASIBILITY_TOL):
    """Slack of ||x - P_C x||^r + (c_r/2)||P_C x - y||^r <= ||x - y||^r for y in C."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(membership_residual(C, y, sp.p) > feas_tol):
        raise ValueError("y must lie in C (within the feasibility tolerance)")
    px = project(C, x, sp)
    return norm_pow(x - y, sp) - norm_pow(x - px, sp) - 0.5 * sp.c_r * norm_pow(px - y, sp)


def projection_pair_residual(C, x, y, sp: SpaceParams):
    """Slack of the two-point projection inequality

    ||P_C x - P_C y||^r <= (1/c_r)(||x - P_C y||^r + ||y - P_C x||^r
                                   - ||x - P_C x||^r - ||y - P_C y||^r).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    px = project(C, x, sp)
    py = project(C, y, sp)
    rhs = (
        norm_pow(x - py, sp)
        + norm_pow(y - px, sp)
        - norm_pow(x - px, sp)
        - norm_pow(y - py, sp)
    ) / sp.c_r
    return rhs - norm_pow(px - py, sp)


def set_to_json(C) -> dict:
    if isinstance(C, Box):
        return {
            "kind": "box",
            "lower": np.asarray(C.lower).tolist(),
            "upper": np.asarray(C.upper).tolist(),
        }
    if isinstance(C, AffineEqual):
        return {
            "kind": "affine_equal",
            "groups": [list(g) for g in C.groups],
            "fixed": [[i, v] for i, v in C.fixed],
        }
    if isinstance(C, Ball):
        return {"kind": "ball", "center": np.asarray(C.center).tolist(), "radius": C.radius}
    if isinstance(C, Halfspace):
        return {"kind": "halfspace", "normal": C.normal.tolist(), "offset": C.offset}
    raise TypeError(f"unknown convex set kind: {type(C).__name__}")


def set_from_json(doc: dict):
    kind = doc.get("kind")
    if kind == "box":
        return Box(doc["lower"], doc["upper"])
    if kind == "affine_equal":
        return AffineEqual(
            groups=tuple(tuple(g) for g in doc.get("groups", ())),
            fixed=tuple((i, v) for i, v in doc.get("fixed", ())),
        )
    if kind == "ball":
        return Ball(doc["center"], doc["radius"])
    if kind == "halfspace":
        return Halfspace(doc["normal"], doc["offset"])
    raise ValueError(f"unknown convex set kind in document: {kind!r}")
