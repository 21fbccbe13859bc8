"""Sampled falsification of operator inequalities.

A certification run draws deterministic sample pairs, evaluates an
inequality residual on every pair and reports the worst residual relative
to its scale, together with the witnessing pair.  A pass means "no
counterexample found at this tolerance on these samples"; it is a
falsifier, not a proof, since the properties quantify over the whole space.

Residual scales follow the package convention max(||x - y||^r, 1) (plain
norm instead of its r-th power for the nonexpansiveness and Bruck checks),
so tolerances are scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .projections import sample_points
from .space import SpaceParams, lp_norm, norm_pow

__all__ = [
    "Sampler",
    "CertReport",
    "firm_residual",
    "certify_alpha_firm",
    "certify_quasi_alpha_firm",
    "certify_nonexpansive",
    "bruck_phi",
    "certify_bruck_firm",
    "report_to_json",
    "DEFAULT_TOL",
    "DEFAULT_W_GRID",
]

DEFAULT_TOL = 1e-9
DEFAULT_W_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99)


@dataclass
class Sampler:
    """Deterministic point cloud generator.

    ``dist`` is "uniform" (coordinates in [low, high]) or "gaussian"
    (centred, standard deviation ``scale``).  ``constraint`` restricts the
    draw to exact members of a convex set; ``min_norm`` rescales points to
    lp norm >= min_norm (for certification on restricted outer regions).
    Draws are reproducible: the generator is reseeded on every call.
    """

    seed: int
    dim: int
    dist: str = "uniform"
    low: float = -10.0
    high: float = 10.0
    scale: float = 1.0
    constraint: object | None = None
    min_norm: float | None = None

    def draw(self, n: int, p: float = 2.0) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.constraint is not None:
            pts = sample_points(
                self.constraint, rng, n, self.dim,
                scale=max(abs(self.low), abs(self.high)), p=p,
            )
        elif self.dist == "uniform":
            pts = rng.uniform(self.low, self.high, size=(n, self.dim))
        elif self.dist == "gaussian":
            pts = self.scale * rng.standard_normal(size=(n, self.dim))
        else:
            raise ValueError(f"unknown sampling distribution {self.dist!r}")
        if self.min_norm is not None:
            norms = lp_norm(pts, p)
            dead = norms == 0.0
            if np.any(dead):
                pts[dead, 0] = 1.0
                norms = lp_norm(pts, p)
            factor = np.maximum(1.0, (self.min_norm / norms) * (1.0 + 1e-9))
            pts = pts * factor[:, None]
        return pts


@dataclass
class CertReport:
    """Outcome of one sampled certification."""

    property: str
    samples: int
    worst_residual: float  # relative to the per-pair scale
    witness: tuple | None
    estimated_min_alpha: float | None
    passed: bool
    degenerate_pairs: int = 0
    details: dict = field(default_factory=dict)


def report_to_json(report: CertReport) -> dict:
    doc = {
        "property": report.property,
        "samples": report.samples,
        "worst_residual": report.worst_residual,
        "witness": None,
        "estimated_min_alpha": report.estimated_min_alpha,
        "passed": report.passed,
        "degenerate_pairs": report.degenerate_pairs,
        "details": report.details,
    }
    if report.witness is not None:
        doc["witness"] = {
            "x": np.asarray(report.witness[0]).tolist(),
            "y": np.asarray(report.witness[1]).tolist(),
        }
    return doc


def firm_residual(T, x, y, alpha: float, sp: SpaceParams):
    """Slack of the firm inequality at one constant alpha:

    ||x-y||^r - (c_r/2)((1-alpha)/alpha)||(Id-T)x - (Id-T)y||^r - ||Tx-Ty||^r.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tx, ty = T(x), T(y)
    coeff = 0.5 * sp.c_r * (1.0 - alpha) / alpha
    return norm_pow(x - y, sp) - coeff * norm_pow((x - tx) - (y - ty), sp) - norm_pow(tx - ty, sp)


def _min_alpha_estimate(gain: np.ndarray, disp: np.ndarray, c_r: float):
    """Smallest alpha certified by the sampled pairs.

    Solving the firm inequality for alpha pairwise gives
    alpha >= 1/(1 + beta), beta = 2 gain / (c_r disp); pairs with zero
    displacement are alpha-independent and skipped.  Returns (estimate,
    number of degenerate pairs); the estimate is absent when some pair
    admits no alpha in (0, 1).
    """
    active = disp > 0.0
    degenerate = int(np.size(disp) - np.count_nonzero(active))
    if not np.any(active):
        return None, degenerate
    beta = 2.0 * gain[active] / (c_r * disp[active])
    if np.any(beta <= 0.0):
        return None, degenerate
    return float(np.max(1.0 / (1.0 + beta))), degenerate


def certify_alpha_firm(
    T,
    alpha: float,
    sp: SpaceParams,
    samplers: tuple[Sampler, Sampler],
    n: int = 10_000,
    tol: float = DEFAULT_TOL,
) -> CertReport:
    """Check the firm inequality at alpha on n sampled pairs (x from the
    first sampler, y from the second); estimates the minimal certified alpha."""
    if n < 1:
        raise ValueError("need at least one sample")
    d_sampler, e_sampler = samplers
    x = d_sampler.draw(n, sp.p)
    y = e_sampler.draw(n, sp.p)
    tx, ty = T(x), T(y)
    sep = norm_pow(x - y, sp)
    out = norm_pow(tx - ty, sp)
    disp = norm_pow((x - tx) - (y - ty), sp)
    coeff = 0.5 * sp.c_r * (1.0 - alpha) / alpha
    rel = (sep - coeff * disp - out) / np.maximum(sep, 1.0)
    worst = int(np.argmin(rel))
    est, degenerate = _min_alpha_estimate(sep - out, disp, sp.c_r)
    return CertReport(
        property="alpha_firm",
        samples=n,
        worst_residual=float(rel[worst]),
        witness=(x[worst].copy(), y[worst].copy()),
        estimated_min_alpha=est,
        passed=bool(rel[worst] >= -tol),
        degenerate_pairs=degenerate,
        details={"alpha": alpha, "p": sp.p, "r": sp.r, "c_r": sp.c_r, "tol": tol},
    )


def certify_quasi_alpha_firm(
    T,
    alpha: float,
    sp: SpaceParams,
    fix_sampler: Sampler | None,
    x_sampler: Sampler,
    n: int = 10_000,
    tol: float = DEFAULT_TOL,
) -> CertReport:
    """Check the quasi-firm inequality: y drawn from Fix T, x anywhere.

    When ``fix_sampler`` is None it is derived from the operator's
    fixed-point metadata; sampled y values are verified to be fixed.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    if fix_sampler is None:
        fixed_set = getattr(getattr(T, "meta", None), "fixed_points", None)
        if fixed_set is None:
            raise ValueError(
                "operator carries no fixed-point metadata; pass an explicit fix_sampler"
            )
        fix_sampler = Sampler(
            seed=x_sampler.seed + 1,
            dim=x_sampler.dim,
            low=x_sampler.low,
            high=x_sampler.high,
            constraint=fixed_set,
        )
    x = x_sampler.draw(n, sp.p)
    y = fix_sampler.draw(n, sp.p)
    ty = T(y)
    fix_err = lp_norm(ty - y, sp.p)
    if np.any(fix_err > 1e-8 * np.maximum(lp_norm(y, sp.p), 1.0)):
        raise ValueError("sampled y points are not fixed by T; bad fixed-point data")
    tx = T(x)
    sep = norm_pow(x - y, sp)
    out = norm_pow(tx - y, sp)
    disp = norm_pow(tx - x, sp)
    coeff = 0.5 * sp.c_r * (1.0 - alpha) / alpha
    rel = (sep - coeff * disp - out) / np.maximum(sep, 1.0)
    worst = int(np.argmin(rel))
    est, degenerate = _min_alpha_estimate(sep - out, disp, sp.c_r)
    return CertReport(
        property="quasi_alpha_firm",
        samples=n,
        worst_residual=float(rel[worst]),
        witness=(x[worst].copy(), y[worst].copy()),
        estimated_min_alpha=est,
        passed=bool(rel[worst] >= -tol),
        degenerate_pairs=degenerate,
        details={"alpha": alpha, "p": sp.p, "r": sp.r, "c_r": sp.c_r, "tol": tol},
    )


def certify_nonexpansive(
    T,
    p: float,
    sampler: Sampler,
    n: int = 10_000,
    tol: float = DEFAULT_TOL,
) -> CertReport:
    """Check ||Tx - Ty|| <= ||x - y|| on sampled pairs."""
    if n < 1:
        raise ValueError("need at least one sample")
    pts = sampler.draw(2 * n, p)
    x, y = pts[:n], pts[n:]
    sep = lp_norm(x - y, p)
    out = lp_norm(T(x) - T(y), p)
    rel = (sep - out) / np.maximum(sep, 1.0)
    worst = int(np.argmin(rel))
    return CertReport(
        property="nonexpansive",
        samples=n,
        worst_residual=float(rel[worst]),
        witness=(x[worst].copy(), y[worst].copy()),
        estimated_min_alpha=None,
        passed=bool(rel[worst] >= -tol),
        details={"p": p, "tol": tol},
    )


def bruck_phi(T, x, y, w: float, p: float = 2.0):
    """phi(w) = ||(1-w)x + wTx - ((1-w)y + wTy)||_p; phi(0) = ||x - y||,
    phi(1) = ||Tx - Ty||."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = (1.0 - w) * (x - y) + w * (T(x) - T(y))
    return lp_norm(diff, p)


def certify_bruck_firm(
    T,
    sp: SpaceParams,
    sampler: Sampler,
    w_grid=None,
    n: int = 10_000,
    tol: float = DEFAULT_TOL,
) -> CertReport:
    """Check phi(1) <= phi(w) over a weight grid on sampled pairs.

    On pass the report lists the firm constants 1/(1+w) implied by each
    grid point and stores the strongest one as ``estimated_min_alpha``.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    w_grid = tuple(DEFAULT_W_GRID if w_grid is None else w_grid)
    if not w_grid:
        raise ValueError("w_grid must be nonempty")
    if any(not 0.0 <= w < 1.0 for w in w_grid):
        raise ValueError("grid weights must lie in [0, 1)")
    pts = sampler.draw(2 * n, sp.p)
    x, y = pts[:n], pts[n:]
    dxy = x - y
    dtxy = T(x) - T(y)
    phi1 = lp_norm(dtxy, sp.p)
    scale = np.maximum(lp_norm(dxy, sp.p), 1.0)
    worst_val = np.inf
    worst_idx = 0
    worst_w = w_grid[0]
    for w in w_grid:
        rel = (lp_norm((1.0 - w) * dxy + w * dtxy, sp.p) - phi1) / scale
        i = int(np.argmin(rel))
        if rel[i] < worst_val:
            worst_val, worst_idx, worst_w = float(rel[i]), i, w
    passed = bool(worst_val >= -tol)
    implied = {w: 1.0 / (1.0 + w) for w in w_grid} if passed else {}
    return CertReport(
        property="bruck_firm",
        samples=n,
        worst_residual=worst_val,
        witness=(x[worst_idx].copy(), y[worst_idx].copy()),
        estimated_min_alpha=(1.0 / (1.0 + max(w_grid))) if passed else None,
        passed=passed,
        details={
            "p": sp.p,
            "tol": tol,
            "w_grid": list(w_grid),
            "worst_w": worst_w,
            "implied_alphas": {str(w): a for w, a in implied.items()},
        },
    )
