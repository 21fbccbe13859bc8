"""Fixed-point iteration with convergence monitors, resolvents, semigroups.

``picard_iterate`` runs x_{n+1} = T x_n until the step norm drops below a
tolerance, recording the distance to tracked fixed points (these distances
are nonincreasing for quasi-nonexpansive maps) and optionally the metric
projections of the iterates onto the fixed set.  In this finite truncation
the convergence asserted by the monitors is plain norm convergence.

``asymptotic_regularity_report`` checks that step norms vanish and that
they obey the telescoping bound

    sum_n ||x_{n+1} - x_n||^r <= 2 alpha / (c_r (1 - alpha))
                                 * (||x_0 - y||^r - ||x_N - y||^r)

for each tracked fixed point y, which is what the quasi-firm inequality
gives after summing consecutive steps.

Resolvents are computed by iterating the contraction
y -> x/(1+lam) + (lam/(1+lam)) F y; n-fold products of resolvents at
parameter t/n approximate the semigroup generated by F, with firm constant
n^(r-1)/(n^(r-1)+1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import OperatorExpr, Resolvent, Scale, compose, resolvent_operator
from .projections import project
from .space import SpaceParams, lp_norm, norm_pow

__all__ = [
    "StopRule",
    "MonitorConfig",
    "Trajectory",
    "DivergenceError",
    "picard_iterate",
    "AsymptoticRegularityReport",
    "asymptotic_regularity_report",
    "resolvent_apply",
    "resolvent_operator",
    "semigroup_product",
    "SemigroupEstimate",
    "semigroup_limit_estimate",
    "trajectory_to_csv",
]

OVERFLOW_FACTOR = 1e12


@dataclass(frozen=True)
class StopRule:
    step_tol: float = 1e-10
    max_iter: int = 100_000

    def __post_init__(self):
        if not self.step_tol > 0:
            raise ValueError("step_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class MonitorConfig:
    """Which channels to record along an iteration.

    ``fejer_points`` is an (m, d) array of fixed points to track; with
    ``auto_fejer`` > 0 and fixed-point metadata on the operator, that many
    points are sampled from the fixed set instead.  ``track_fix_projections``
    records the metric projection of every iterate onto the fixed set.
    """

    sp: SpaceParams
    fejer_points: np.ndarray | None = None
    auto_fejer: int = 0
    seed: int = 0
    track_fix_projections: bool = False


@dataclass
class Trajectory:
    """Iterates with per-step monitor channels.

    ``step_norms[i]`` is ||iterates[i+1] - iterates[i]||; ``final_residual``
    is the displacement of the last iterate under one more application of
    the operator (the quantity the stop rule tested).
    """

    iterates: np.ndarray
    step_norms: np.ndarray
    final_residual: float
    converged: bool
    stop_reason: str  # "step_tol" | "max_iter" | "divergence"
    stop: StopRule
    fejer_points: np.ndarray | None = None
    fejer_distances: np.ndarray | None = None
    fix_projections: np.ndarray | None = None

    @property
    def limit(self) -> np.ndarray:
        return self.iterates[-1]


class DivergenceError(RuntimeError):
    """Iterates left the overflow guard region; carries the partial run."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def _attach_monitors(traj: Trajectory, T, monitors: MonitorConfig | None) -> Trajectory:
    if monitors is None:
        return traj
    sp = monitors.sp
    fixed_set = getattr(getattr(T, "meta", None), "fixed_points", None)
    pts = monitors.fejer_points
    if pts is None and monitors.auto_fejer > 0 and fixed_set is not None:
        from .projections import sample_points

        rng = np.random.default_rng(monitors.seed)
        pts = sample_points(
            fixed_set, rng, monitors.auto_fejer, traj.iterates.shape[1], p=sp.p
        )
    if pts is not None:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        traj.fejer_points = pts
        traj.fejer_distances = lp_norm(
            traj.iterates[:, None, :] - pts[None, :, :], sp.p
        )
    if monitors.track_fix_projections and fixed_set is not None:
        traj.fix_projections = project(fixed_set, traj.iterates, sp)
    return traj


def picard_iterate(
    T: OperatorExpr,
    x0,
    stop: StopRule,
    monitors: MonitorConfig,
) -> Trajectory:
    """Iterate x_{n+1} = T x_n until the step norm is below stop.step_tol
    or max_iter is reached.

    Step norms are measured in the lp norm of ``monitors.sp``.  The
    sub-tolerance final application is not appended (it moves the state by
    less than the tolerance); its displacement is kept as
    ``final_residual``.  Iterates exceeding the overflow guard raise
    ``DivergenceError`` carrying the partial trajectory.
    """
    stop = stop or StopRule()
    p = monitors.sp.p
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1:
        raise ValueError("x0 must be a single vector")
    guard = OVERFLOW_FACTOR * (1.0 + float(lp_norm(x, p)))
    iterates = [x]
    steps: list[float] = []
    converged = False
    reason = "max_iter"
    final_residual = np.inf
    while True:
        x_next = T(x)
        step = float(lp_norm(x_next - x, p))
        if step < stop.step_tol:
            converged = True
            reason = "step_tol"
            final_residual = step
            break
        if float(lp_norm(x_next, p)) > guard:
            traj = Trajectory(
                iterates=np.asarray(iterates),
                step_norms=np.asarray(steps),
                final_residual=step,
                converged=False,
                stop_reason="divergence",
                stop=stop,
            )
            _attach_monitors(traj, T, monitors)
            raise DivergenceError(
                f"iterate norm exceeded the overflow guard after {len(steps)} steps",
                traj,
            )
        iterates.append(x_next)
        steps.append(step)
        x = x_next
        if len(steps) >= stop.max_iter:
            final_residual = step
            break
    traj = Trajectory(
        iterates=np.asarray(iterates),
        step_norms=np.asarray(steps),
        final_residual=final_residual,
        converged=converged,
        stop_reason=reason,
        stop=stop,
    )
    return _attach_monitors(traj, T, monitors)


@dataclass
class AsymptoticRegularityReport:
    """Step-norm decay and telescoping-bound verdicts for one trajectory."""

    step_norms: np.ndarray
    final_residual: float
    final_below_tol: bool
    bound_checked: bool
    bound_ok: bool | None
    per_point: list = field(default_factory=list)  # (lhs, rhs, margin) per tracked y
    note: str = ""


def asymptotic_regularity_report(
    traj: Trajectory,
    T_meta,
    sp: SpaceParams,
    slack: float = 1e-9,
) -> AsymptoticRegularityReport:
    """Check step-norm decay and the telescoping step bound.

    The bound needs a firm constant from the operator metadata; without one
    the check is skipped and flagged in ``note``.  Tracked fixed points come
    from the trajectory's monitor channel.
    """
    alpha = getattr(T_meta, "alpha_firm", None)
    final_ok = bool(traj.final_residual < traj.stop.step_tol)
    if alpha is None:
        return AsymptoticRegularityReport(
            step_norms=traj.step_norms,
            final_residual=traj.final_residual,
            final_below_tol=final_ok,
            bound_checked=False,
            bound_ok=None,
            note="no firm constant in metadata; telescoping bound skipped",
        )
    if traj.fejer_points is None or len(traj.fejer_points) == 0:
        return AsymptoticRegularityReport(
            step_norms=traj.step_norms,
            final_residual=traj.final_residual,
            final_below_tol=final_ok,
            bound_checked=False,
            bound_ok=None,
            note="no tracked fixed points; telescoping bound skipped",
        )
    const = 2.0 * alpha / (sp.c_r * (1.0 - alpha))
    lhs = float(np.sum(traj.step_norms**sp.r))
    per_point = []
    ok = True
    for y in traj.fejer_points:
        d0 = float(norm_pow(traj.iterates[0] - y, sp))
        dN = float(norm_pow(traj.iterates[-1] - y, sp))
        rhs = const * (d0 - dN)
        margin = rhs - lhs + slack * max(d0, 1.0)
        per_point.append((lhs, rhs, margin))
        ok = ok and margin >= 0.0
    return AsymptoticRegularityReport(
        step_norms=traj.step_norms,
        final_residual=traj.final_residual,
        final_below_tol=final_ok,
        bound_checked=True,
        bound_ok=ok,
        per_point=per_point,
    )


def resolvent_apply(F: OperatorExpr, lam: float, x, sp: SpaceParams, tol: float = 1e-12):
    """Evaluate the resolvent of F at parameter lam >= 0 (lam = 0 is the
    identity); the result y satisfies ||y - (x/(1+lam) + lam/(1+lam) Fy)|| <= tol."""
    return Resolvent(F, lam, p=sp.p, tol=tol)._apply(np.asarray(x, dtype=float))


def semigroup_product(F: OperatorExpr, t: float, n: int, sp: SpaceParams) -> OperatorExpr:
    """n-fold product of resolvents at parameter t/n; firm constant
    n^(r-1)/(n^(r-1)+1)."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    step = resolvent_operator(F, t / n, sp)
    return compose([step] * n, sp)


@dataclass
class SemigroupEstimate:
    """Semigroup product values along an n-schedule, with Cauchy diagnostics
    and, for scaling generators, closed-form errors and axiom checks."""

    schedule: tuple
    values: np.ndarray  # (len(schedule), d)
    diffs: np.ndarray  # successive value gaps
    cauchy_ok: bool
    value: np.ndarray  # last evaluation
    closed_form_limit: np.ndarray | None = None
    closed_form_errors: np.ndarray | None = None
    axiom_checks: dict | None = None


def semigroup_limit_estimate(
    F: OperatorExpr,
    t: float,
    x,
    n_schedule,
    sp: SpaceParams,
    tol: float = 1e-8,
) -> SemigroupEstimate:
    """Evaluate the n-fold resolvent products along an increasing schedule.

    For a scaling generator F = c*Id the limit e^{-(1-c)t} x is exact, so
    errors against it and the semigroup axioms (identity at t -> 0,
    additivity, nonexpansiveness) are reported as well.
    """
    schedule = tuple(int(n) for n in n_schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("n_schedule must be strictly increasing")
    x = np.asarray(x, dtype=float)
    values = np.asarray([semigroup_product(F, t, n, sp)(x) for n in schedule])
    diffs = lp_norm(np.diff(values, axis=0), sp.p) if len(schedule) > 1 else np.zeros(0)
    if diffs.size == 0:
        cauchy_ok = True
    else:
        cauchy_ok = bool(diffs[-1] <= tol or np.all(diffs[1:] <= 0.95 * diffs[:-1]))
    est = SemigroupEstimate(
        schedule=schedule,
        values=values,
        diffs=diffs,
        cauchy_ok=cauchy_ok,
        value=values[-1],
    )
    if isinstance(F, Scale):
        rate = 1.0 - F.factor
        limit = np.exp(-rate * t) * x
        est.closed_form_limit = limit
        est.closed_form_errors = lp_norm(values - limit, sp.p)
        n_big = schedule[-1]
        t_small = min(t, 1e-3) if t > 0 else 1e-3
        near_id = semigroup_product(F, t_small, n_big, sp)(x)
        half = semigroup_product(F, t / 2.0, n_big, sp) if t > 0 else None
        axioms = {
            "identity_at_zero": float(lp_norm(near_id - x, sp.p)),
            "identity_at_zero_bound": abs(rate) * t_small * float(lp_norm(x, sp.p)) * 1.01,
        }
        if half is not None:
            additivity_gap = lp_norm(half(half(x)) - est.value, sp.p)
            axioms["additivity"] = float(additivity_gap)
            # composing two n-products at t/2 equals the 2n-product at t, so
            # the gap is the schedule refinement error, O(t^2/n) here
            axioms["additivity_bound"] = (
                2.0 * rate**2 * t**2 / n_big * float(lp_norm(x, sp.p)) + 1e-12
            )
        est.axiom_checks = axioms
    return est


def trajectory_to_csv(traj: Trajectory, fh) -> None:
    """Write the trajectory in CSV form: n, coordinates, step norm into the
    iterate, tracked distances, projection coordinates when present.
    Numbers carry 17 significant digits (round-trip exact)."""
    d = traj.iterates.shape[1]
    cols = ["n"] + [f"x_{i+1}" for i in range(d)] + ["step_norm"]
    m = 0 if traj.fejer_distances is None else traj.fejer_distances.shape[1]
    cols += [f"fejer_dist_{k+1}" for k in range(m)]
    if traj.fix_projections is not None:
        cols += [f"proj_x_{i+1}" for i in range(d)]
    fh.write(",".join(cols) + "\n")

    def fmt(v: float) -> str:
        return format(float(v), ".17g")

    for i, xi in enumerate(traj.iterates):
        row = [str(i)] + [fmt(v) for v in xi]
        row.append("" if i == 0 else fmt(traj.step_norms[i - 1]))
        if m:
            row += [fmt(v) for v in traj.fejer_distances[i]]
        if traj.fix_projections is not None:
            row += [fmt(v) for v in traj.fix_projections[i]]
        fh.write(",".join(row) + "\n")
