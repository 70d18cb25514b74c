"""Monotone fixed-point iteration of the frozen-nonlinearity solution map.

T(u) = w  where  -Lap_p w - Lap_q w = g(u) = lam f(u) / u^beta,  w = 0 on the boundary.

Iterating T upward from a subsolution gives the minimal solution above it;
iterating downward from a supersolution gives the maximal solution below it.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InadmissibleLambda, MaxIterExceeded
from .fem import ExponentSet, ScalarField
from .inner import PQSolver, SolverConfig
from .mesh import Mesh
from .nonlinearity import NonlinearitySpec, g_eval
from .subsuper import (
    Eigenpair,
    build_subsolution_psi,
    build_supersolution_ball,
    lower_distance_constant,
    pick_r_exponent,
    principal_eigenpair,
    solve_global_supersolution,
    verify_weak_subsolution,
    verify_weak_supersolution,
)

log = logging.getLogger(__name__)

ORDER_SLACK = 1e-10
POSITIVITY_MARGIN = 1e-8


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    NO_POSITIVE_SOLUTION = "NoPositiveSolution"
    MAX_ITER_EXCEEDED = "MaxIterExceeded"
    MONOTONICITY_VIOLATED = "MonotonicityViolated"


class Direction(str, enum.Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"


@dataclass
class ProblemInstance:
    """One member of the family -Lap_p u - Lap_q u = lam f(u)/u^beta on ``mesh``."""

    mesh: Mesh
    nonlinearity: NonlinearitySpec
    lam: float
    cfg: SolverConfig | None = None
    r_exponent: float | None = None
    _solver: PQSolver | None = field(default=None, repr=False)
    _eig: Eigenpair | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.cfg is None:
            self.cfg = SolverConfig.for_mesh(self.mesh)

    @property
    def exp(self) -> ExponentSet:
        return self.nonlinearity.exp

    @property
    def solver(self) -> PQSolver:
        if self._solver is None:
            self._solver = PQSolver(self.mesh, self.exp, 1.0, self.cfg)
        return self._solver

    @property
    def eigenpair(self) -> Eigenpair:
        if self._eig is None:
            self._eig = principal_eigenpair(self.mesh)
        return self._eig

    def with_lambda(self, lam: float) -> "ProblemInstance":
        """Same mesh and nonlinearity; shares the cached solver and eigenpair."""
        return ProblemInstance(self.mesh, self.nonlinearity, lam, self.cfg, self.r_exponent,
                               self._solver, self._eig)

    def g_load(self, u: ScalarField) -> np.ndarray:
        """Nodal load g(u) at interior nodes (zero on the boundary)."""
        idx = self.mesh.interior
        load = np.zeros(self.mesh.n_nodes)
        load[idx] = g_eval(self.nonlinearity, self.lam, u.values[idx])
        return load

    def residual(self, u: ScalarField) -> tuple[float, float]:
        """Sup-norm weak residual of u against g(u), and the matching tolerance (10 tol_inner)."""
        res, tol = self.solver.full_residual(u.values, self.g_load(u))
        return res, max(tol, 10 * self.cfg.tol_inner)

    def psi(self) -> ScalarField:
        r = self.r_exponent if self.r_exponent is not None else pick_r_exponent(self.exp)
        return build_subsolution_psi(self.eigenpair, self.lam, r, self.exp.beta)


@dataclass
class HistoryEntry:
    change: float
    min_interior: float
    residual: float


@dataclass
class IterationReport:
    status: Status
    direction: Direction
    n_outer: int
    final: ScalarField | None
    history: list[HistoryEntry] = field(default_factory=list)
    residual: float = math.nan
    c_lower: float = math.nan
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def apply_T(u: ScalarField, instance: ProblemInstance, lower: ScalarField | None = None) -> ScalarField:
    """One application of the solution map.

    If ``lower`` (a subsolution) is given, ``u >= lower`` is required and the
    image is checked to stay above it.
    """
    if lower is not None and np.any(u.values < lower.values - ORDER_SLACK):
        raise ValueError("u lies below the subsolution; T is only defined above it")
    w = instance.solver.solve(instance.g_load(u), warm_start=u if u.is_dirichlet else None)
    if lower is not None and np.any(w.values < lower.values - ORDER_SLACK):
        log.warning("T(u) dropped below the subsolution by %.3e", float(np.max(lower.values - w.values)))
    return w


def _order_slack(u: ScalarField, instance: ProblemInstance) -> float:
    # Inner solves are exact only to tol_inner; nodal noise is far below this.
    return ORDER_SLACK * max(1.0, u.sup())


def monotone_iterate(start: ScalarField, direction: Direction | str, instance: ProblemInstance,
                     cfg: SolverConfig | None = None, check_start: bool = True) -> IterationReport:
    """Iterate T from ``start`` until the relative sup change is below
    tol_outer and the full weak residual is below 10 tol_inner.

    Ascending runs must start from a subsolution, descending runs from a
    supersolution (verified hat-wise unless ``check_start`` is False).
    """
    direction = Direction(direction)
    cfg = cfg or instance.cfg
    mesh = instance.mesh
    idx = mesh.interior
    report = IterationReport(Status.MAX_ITER_EXCEEDED, direction, 0, None)

    if np.min(start.values[idx]) <= 0:
        report.status = Status.NO_POSITIVE_SOLUTION
        report.message = "start is not positive at interior nodes"
        return report
    if check_start:
        check = verify_weak_subsolution if direction is Direction.ASCENDING else verify_weak_supersolution
        rep = check(start, instance.g_load(start), instance.exp)
        if not rep.passed:
            kind = "sub" if direction is Direction.ASCENDING else "super"
            raise ValueError(f"start is not a discrete {kind}solution "
                             f"(violation {rep.max_violation:.3e} > slack {rep.slack:.3e})")

    u = start
    for k in range(1, cfg.max_outer_iters + 1):
        try:
            w = apply_T(u, instance)
        except MaxIterExceeded as exc:
            report.status, report.n_outer, report.message = Status.MAX_ITER_EXCEEDED, k, str(exc)
            return report
        change = float(np.abs(w.values - u.values).max() / max(w.sup(), 1e-300))
        wmin = float(np.min(w.values[idx]))
        res = instance.residual(w)[0] if wmin > 0 else math.nan
        report.history.append(HistoryEntry(change, wmin, res))
        report.n_outer = k
        slack = _order_slack(u, instance)
        if direction is Direction.ASCENDING:
            bad = np.any(w.values[idx] < u.values[idx] - slack)
        else:
            bad = np.any(w.values[idx] > u.values[idx] + slack)
        if bad:
            report.status = Status.MONOTONICITY_VIOLATED
            report.final = w
            report.message = f"iterate {k} broke {direction.value} ordering"
            return report
        if wmin <= 0:
            report.status = Status.NO_POSITIVE_SOLUTION
            report.message = f"iterate {k} has min interior value {wmin:.3e} <= 0"
            return report
        u = w
        if change <= cfg.tol_outer:
            res, tol = instance.residual(u)
            if res <= tol:
                break
    else:
        report.final = u
        report.message = f"no convergence after {cfg.max_outer_iters} outer iterations"
        return report

    report.final = u
    report.residual = instance.residual(u)[0]
    report.c_lower = lower_distance_constant(u)
    if report.c_lower < POSITIVITY_MARGIN:
        report.status = Status.NO_POSITIVE_SOLUTION
        report.message = f"limit fails the positivity margin: min(u/d) = {report.c_lower:.3e}"
    else:
        report.status = Status.CONVERGED
    return report


def solve_extremal(instance: ProblemInstance, which: str = "maximal", cfg: SolverConfig | None = None,
                   supersolution: str | None = None) -> IterationReport:
    """Maximal or minimal solution between psi and a supersolution.

    ``supersolution`` is ``"global"`` (Phi_lam, needs sigma < q - 1 and the
    shifted power f) or ``"ball"`` (m(lam) e); the default picks ``global``
    whenever it applies.

    maximal: descend from the supersolution.  With the global
    supersolution every positive solution lies below it, so a positive
    limit is the global maximal solution; a loss of positivity proves
    nonexistence.  The psi checks are reported in ``extra``.

    minimal: psi must be a verified subsolution ordered below the
    supersolution, otherwise :class:`InadmissibleLambda` is raised.
    """
    if which not in ("minimal", "maximal"):
        raise ValueError("which must be 'minimal' or 'maximal'")
    cfg = cfg or instance.cfg
    exp = instance.exp
    mesh = instance.mesh
    if supersolution is None:
        global_ok = instance.nonlinearity.kind == "power_shifted" and 0 < exp.sigma < exp.q - 1
        supersolution = "global" if global_ok else "ball"

    psi = instance.psi()
    if supersolution == "global":
        exp.require_maximal_regime()
        if instance.nonlinearity.kind != "power_shifted":
            raise ValueError("the global supersolution is tied to f(s) = s^(sigma+beta) - 1")
        G = solve_global_supersolution(mesh, exp, instance.lam, cfg, eig=instance.eigenpair, solver=instance.solver)
        upper = G.field
    elif supersolution == "ball":
        exp.require_subsuper_regime()
        upper, _ = build_supersolution_ball(mesh, exp, instance.lam, psi)
    else:
        raise ValueError(f"unknown supersolution {supersolution!r}")

    ordering_ok = bool(np.all(psi.values <= upper.values + ORDER_SLACK))
    sub_report = verify_weak_subsolution(psi, instance.g_load(psi), exp)
    extra = {
        "supersolution": supersolution,
        "ordering_ok": ordering_ok,
        "psi_subsolution_ok": sub_report.passed,
        "psi_max_violation": sub_report.max_violation,
        "psi_slack": sub_report.slack,
        "psi_c_lower": lower_distance_constant(psi),
        "upper_sup": upper.sup(),
    }

    if which == "maximal":
        report = monotone_iterate(upper, Direction.DESCENDING, instance, cfg, check_start=False)
    else:
        if not sub_report.passed:
            raise InadmissibleLambda(
                f"psi is not a subsolution at lambda={instance.lam:g} "
                f"(violation {sub_report.max_violation:.3e} > slack {sub_report.slack:.3e})")
        if not ordering_ok:
            raise InadmissibleLambda(f"psi exceeds the supersolution at lambda={instance.lam:g}")
        report = monotone_iterate(psi, Direction.ASCENDING, instance, cfg, check_start=False)
    report.extra.update(extra)
    report.extra["upper"] = upper
    report.extra["psi"] = psi
    return report


@dataclass
class ThresholdResult:
    bracket: tuple[float, float] | None
    samples: list[tuple[float, bool]]
    monotone: bool
    message: str = ""

    @property
    def relative_width(self) -> float:
        if self.bracket is None:
            return math.nan
        lo, hi = self.bracket
        return (hi - lo) / hi


def existence_predicate(instance: ProblemInstance, cfg: SolverConfig | None = None) -> bool:
    try:
        return solve_extremal(instance, "maximal", cfg).converged
    except MaxIterExceeded:
        return False


def existence_threshold(family: Callable[[float], ProblemInstance], lambda_lo: float, lambda_hi: float,
                        tol_lambda: float = 0.05, cfg: SolverConfig | None = None) -> ThresholdResult:
    """Geometric bisection on lam for 'the maximal solution exists'.

    Stops when (hi - lo) <= tol_lambda * hi.  Requires nonexistence at
    ``lambda_lo`` and existence at ``lambda_hi``; monotonicity of the
    predicate is checked on every sampled point.
    """
    if not 0 < lambda_lo < lambda_hi:
        raise ValueError("need 0 < lambda_lo < lambda_hi")
    samples: list[tuple[float, bool]] = []

    def pred(lam):
        val = existence_predicate(family(lam), cfg)
        samples.append((lam, val))
        return val

    if pred(lambda_lo):
        return ThresholdResult(None, samples, True, f"solution exists already at lambda_lo={lambda_lo:g}")
    if not pred(lambda_hi):
        return ThresholdResult(None, samples, True, f"no positive solution at lambda_hi={lambda_hi:g}")
    lo, hi = lambda_lo, lambda_hi
    while hi - lo > tol_lambda * hi:
        mid = math.sqrt(lo * hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    ordered = sorted(samples)
    flags = [v for _, v in ordered]
    monotone = all(not a or b for a, b in zip(flags, flags[1:]))
    if not monotone:
        return ThresholdResult(None, samples, False, "existence predicate is not monotone in lambda on the samples")
    return ThresholdResult((lo, hi), samples, True)
