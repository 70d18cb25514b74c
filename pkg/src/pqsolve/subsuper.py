"""Explicit sub- and supersolutions and their discrete verification.

Constructions:

* principal Dirichlet eigenpair of -Laplace (inverse power iteration),
* psi = lam^r (phi1 + phi1^(2/(1+beta))),
* the radial supersolution m(lam) e with -Lap_p e = 1 on an enclosing ball,
* xi = eps lam^(1/(p-1-sigma)) (phi1 + phi1^alpha),
* the global supersolution Phi_lam solving -Lap_p z - Lap_q z = lam z^sigma.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import MaxIterExceeded, PQSolveError
from .fem import ExponentSet, ScalarField, laplace_stiffness, operator_action
from .inner import PQSolver, SolverConfig
from .mesh import Mesh

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Eigenpair:
    lambda1: float
    phi1: ScalarField
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class SubSuperPair:
    psi: ScalarField
    phi_super: ScalarField
    c_lower: float
    ordering_ok: bool


@dataclass(frozen=True)
class ViolationReport:
    """Hat-wise check of a weak differential inequality.

    ``violations[i]`` is the signed amount by which the inequality fails
    when tested against the hat function of interior node ``i``.
    """

    passed: bool
    max_violation: float
    slack: float
    argmax_node: int
    violations: np.ndarray


def principal_eigenpair(mesh: Mesh, tol: float = 1e-13, vec_tol: float = 1e-12,
                        max_iter: int = 10_000) -> Eigenpair:
    """Inverse power iteration for K x = lam M x with lumped mass M.

    Stops once the eigenvalue changes by at most ``tol`` (relative) and the
    sup-normalized vector by at most ``vec_tol``.  The returned eigenvalue is the Rayleigh quotient of the returned vector;
    phi1 is positive and normalized to nodal sup 1.
    """
    K = laplace_stiffness(mesh).tocsc()
    M = mesh.lumped_mass[mesh.interior]
    lu = spla.splu(K)
    x = np.ones(K.shape[0])
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        x_old = x
        x = lu.solve(M * x)
        x /= np.abs(x).max()
        lam = float(x @ (K @ x)) / float(x @ (M * x))
        if abs(lam - lam_old) <= tol * lam and np.abs(x - x_old).max() <= vec_tol:
            break
        lam_old = lam
    else:
        raise MaxIterExceeded("eigenvalue iteration did not converge", iterations=max_iter)
    if x.sum() < 0:
        x = -x
    x = x / x.max()
    if np.any(x <= 0):
        raise PQSolveError("principal eigenvector is not positive at all interior nodes")
    lam = float(x @ (K @ x)) / float(x @ (M * x))
    return Eigenpair(lam, ScalarField.from_interior(mesh, x), it)


def pick_r_exponent(exp: ExponentSet) -> float:
    """Midpoint of the admissible interval 1/(p-1+beta) < r < 1/(p-1+beta-sigma)."""
    if not exp.sigma > 0:
        raise ValueError("sigma must be positive for a nonempty r-interval")
    lo = 1.0 / (exp.p - 1 + exp.beta)
    denom = exp.p - 1 + exp.beta - exp.sigma
    if denom <= 0:
        raise ValueError("sigma >= p - 1 + beta: upper end of the r-interval is unbounded")
    return 0.5 * (lo + 1.0 / denom)


def r_interval(exp: ExponentSet) -> tuple[float, float]:
    return 1.0 / (exp.p - 1 + exp.beta), 1.0 / (exp.p - 1 + exp.beta - exp.sigma)


def build_subsolution_psi(eig: Eigenpair, lam: float, r: float, beta: float) -> ScalarField:
    phi = eig.phi1.values
    return ScalarField(eig.phi1.mesh, lam**r * (phi + phi ** (2.0 / (1.0 + beta))))


def lower_distance_constant(u: ScalarField) -> float:
    """min over interior nodes of u / d (the c in u >= c d)."""
    idx = u.mesh.interior
    return float(np.min(u.values[idx] / u.mesh.node_distance[idx]))


def radial_profile_e(r, p: float, N: int, R: float):
    """Exact solution of -Lap_p e = 1 on B_R in R^N with e = 0 on the sphere."""
    pc = p / (p - 1)
    return N ** (-1.0 / (p - 1)) * (R**pc - np.asarray(r, dtype=float) ** pc) / pc


def supersolution_ball_geometry(mesh: Mesh) -> tuple[np.ndarray, float]:
    center, circ = mesh.enclosing_ball
    return center, 1.05 * circ


def m_lambda(exp: ExponentSet, lam: float, e_sup: float) -> float:
    """Smallest m with m^(p-1+beta-gamma) >= lam B e_sup^(gamma-beta)."""
    expo = exp.p - 1 + exp.beta - exp.gamma_growth
    if expo <= 0:
        raise ValueError("gamma_growth >= p - 1 + beta: no admissible m(lambda)")
    return (lam * exp.B * e_sup ** (exp.gamma_growth - exp.beta)) ** (1.0 / expo)


def build_supersolution_ball(mesh: Mesh, exp: ExponentSet, lam: float,
                             psi: ScalarField | None = None, max_doublings: int = 200) -> tuple[ScalarField, float]:
    """m(lam) e restricted to the mesh nodes.

    ``e`` lives on a ball strictly containing the domain, so the field is
    positive on the boundary.  If ``psi`` is given, m is doubled until
    psi <= m e nodewise.  Returns the field and the final m.
    """
    center, R = supersolution_ball_geometry(mesh)
    N = mesh.dim
    r = np.linalg.norm(mesh.nodes - center, axis=1)
    e = radial_profile_e(r, exp.p, N, R)
    e_sup = float(radial_profile_e(0.0, exp.p, N, R))
    m = m_lambda(exp, lam, e_sup)
    if psi is not None:
        for _ in range(max_doublings):
            if np.all(psi.values <= m * e):
                break
            m *= 2.0
        else:
            raise PQSolveError("could not order the radial supersolution above psi")
    return ScalarField(mesh, m * e), m


def build_subsolution_xi(eig: Eigenpair, exp: ExponentSet, lam: float, epsilon: float,
                         alpha: float = 1.5) -> ScalarField:
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not exp.sigma < exp.p - 1:
        raise ValueError("need sigma < p - 1")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    phi = eig.phi1.values
    return ScalarField(eig.phi1.mesh, epsilon * lam ** (1.0 / (exp.p - 1 - exp.sigma)) * (phi + phi**alpha))


def _hat_inequality(u: ScalarField, rhs, exp, coeff_q: float, sign: float) -> ViolationReport:
    mesh = u.mesh
    idx = mesh.interior
    rhs = np.asarray(rhs, dtype=float)
    rhs_i = rhs[idx] if rhs.shape == (mesh.n_nodes,) else rhs
    lhs = operator_action(mesh, u.values, exp.p, exp.q, coeff_q)[idx]
    viol = sign * (lhs - rhs_i * mesh.lumped_mass[idx])
    slack = 0.1 * mesh.h_max * float(np.max(np.abs(rhs_i), initial=0.0))
    k = int(np.argmax(viol))
    vmax = float(viol[k])
    return ViolationReport(vmax <= slack, vmax, slack, int(idx[k]), viol)


def verify_weak_subsolution(u: ScalarField, rhs, exp, coeff_q: float = 1.0) -> ViolationReport:
    """Check  -Lap_p u - c Lap_q u <= rhs  against every interior hat.

    Nonnegative discrete test functions are conic combinations of hats, so
    the hat-wise check is equivalent to the full weak inequality.
    ``rhs`` is given per node (or per interior node).
    """
    return _hat_inequality(u, rhs, exp, coeff_q, +1.0)


def verify_weak_supersolution(u: ScalarField, rhs, exp, coeff_q: float = 1.0) -> ViolationReport:
    """Mirror of :func:`verify_weak_subsolution` for  -Lap_p u - c Lap_q u >= rhs."""
    return _hat_inequality(u, rhs, exp, coeff_q, -1.0)


def power_rhs(u: ScalarField, lam: float, sigma: float) -> np.ndarray:
    return lam * np.maximum(u.values, 0.0) ** sigma


def choose_xi(eig: Eigenpair, exp: ExponentSet, lam: float, alpha: float = 1.5,
              epsilon: float = 0.5, coeff_q: float = 1.0, max_halvings: int = 60) -> tuple[ScalarField, float]:
    """Halve epsilon until xi is a discrete subsolution of -Lap_p z - Lap_q z = lam z^sigma."""
    for _ in range(max_halvings):
        xi = build_subsolution_xi(eig, exp, lam, epsilon, alpha)
        if verify_weak_subsolution(xi, power_rhs(xi, lam, exp.sigma), exp, coeff_q).passed:
            return xi, epsilon
        epsilon *= 0.5
    raise PQSolveError("no epsilon found that makes xi a subsolution")


@dataclass(frozen=True, eq=False)
class GlobalSupersolution:
    field: ScalarField
    ascending: ScalarField
    descending: ScalarField
    xi: ScalarField
    epsilon: float
    iterations: tuple[int, int]
    agreement: float


def _power_iteration(solver: PQSolver, start: ScalarField, lam: float, sigma: float,
                     cfg: SolverConfig, direction: str) -> tuple[ScalarField, int]:
    """Iterate z <- solve(lam z^sigma) until the relative change is below
    tol_outer and the fixed-point residual is below tol_inner."""
    z = start
    for k in range(1, cfg.max_outer_iters + 1):
        z_new = solver.solve(power_rhs(z, lam, sigma), warm_start=z if z.is_dirichlet else None)
        if np.min(z_new.interior_values) <= 0:
            raise PQSolveError("positone iteration lost positivity")
        change = np.abs(z_new.values - z.values).max() / z_new.sup()
        z = z_new
        if change <= cfg.tol_outer:
            res, tol = solver.full_residual(z.values, power_rhs(z, lam, sigma))
            if res <= tol:
                return z, k
    raise MaxIterExceeded(f"{direction} iteration for the global supersolution did not converge",
                          iterations=cfg.max_outer_iters)


def solve_global_supersolution(mesh: Mesh, exp: ExponentSet, lam: float, cfg: SolverConfig | None = None,
                               eig: Eigenpair | None = None, coeff_q: float = 1.0,
                               solver: PQSolver | None = None) -> GlobalSupersolution:
    """Unique positive solution of -Lap_p z - c Lap_q z = lam z^sigma.

    Computed twice by monotone iteration z <- solve(lam z^sigma): upward
    from the subsolution xi and downward from a constant-load supersolution.
    The descending limit is returned; both limits are kept for inspection.
    """
    if not 0 < exp.sigma < exp.q - 1:
        raise ValueError("the global supersolution needs 0 < sigma < q - 1")
    cfg = cfg or SolverConfig.for_mesh(mesh)
    solver = solver or PQSolver(mesh, exp, coeff_q, cfg)
    eig = eig or principal_eigenpair(mesh)
    xi, eps = choose_xi(eig, exp, lam, coeff_q=coeff_q)

    # Constant load C whose solution W satisfies lam * sup(W)^sigma <= C.
    C = max(1.0, lam)
    for _ in range(200):
        W = solver.solve(np.full(mesh.n_nodes, C))
        if lam * W.sup() ** exp.sigma <= C:
            break
        C *= 2.0
    else:
        raise PQSolveError("no constant-load supersolution found")

    up, k_up = _power_iteration(solver, xi, lam, exp.sigma, cfg, "ascending")
    down, k_down = _power_iteration(solver, W, lam, exp.sigma, cfg, "descending")
    agreement = float(np.abs(up.values - down.values).max() / down.sup())
    if agreement > 2 * cfg.tol_outer:
        log.warning("ascending/descending limits differ by %.3e (relative)", agreement)
    return GlobalSupersolution(down, up, down, xi, eps, (k_up, k_down), agreement)
