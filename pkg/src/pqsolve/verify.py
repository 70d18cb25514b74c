"""Independent oracles and claim checkers.

* ``radial_shoot``: ODE shooting for radial (p,q)-Laplace problems on balls,
  integrating the flux variable so the degenerate operator is never
  differentiated.
* pointwise Picone and Lindqvist inequalities on P1 pairs,
* discrete comparison, lambda-scaling sweep and boundary-ratio profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .fem import ExponentSet, ScalarField, element_gradients
from .inner import PQSolver, SolverConfig
from .mesh import Mesh, build_interval_mesh
from .subsuper import (
    Eigenpair,
    principal_eigenpair,
    solve_global_supersolution,
    verify_weak_subsolution,
    verify_weak_supersolution,
)


# ---------------------------------------------------------------------------
# radial shooting

def invert_flux(y: float, p: float, q: float, coeff_q: float) -> float:
    """Solve |s|^(p-2) s + c |s|^(q-2) s = y for s."""
    if y == 0.0:
        return 0.0
    Y = abs(y)
    if coeff_q == 0.0:
        return math.copysign(Y ** (1.0 / (p - 1)), y)
    # Newton on the convex increasing map x -> log(e^{(p-1)x} + c e^{(q-1)x}) - log Y,
    # started to the right of the root so the iterates decrease monotonically.
    x = min(math.log(Y) / (p - 1), (math.log(Y) - math.log(coeff_q)) / (q - 1))
    logY = math.log(Y)
    for _ in range(100):
        a = math.exp((p - 1) * x)
        b = coeff_q * math.exp((q - 1) * x)
        F = math.log(a + b) - logY
        dF = ((p - 1) * a + (q - 1) * b) / (a + b)
        step = F / dF
        x -= step
        if abs(step) < 1e-15 * max(1.0, abs(x)):
            break
    return math.copysign(math.exp(x), y)


@dataclass
class RadialProfile:
    r_grid: np.ndarray
    values: np.ndarray
    N_dim: int
    R: float
    u0: float
    _sol: object = field(default=None, repr=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self._sol.sol(np.clip(r, 0.0, self.R))[0]


def _integrate(u0, p, q, coeff_q, reaction, R, N, rtol, dense=False):
    def rhs(r, y):
        u, Q = y
        if r == 0.0:
            return [0.0, 0.0]
        flux = Q / r ** (N - 1)
        return [invert_flux(flux, p, q, coeff_q), -(r ** (N - 1)) * reaction(max(u, 0.0))]

    return solve_ivp(rhs, (0.0, R), [u0, 0.0], method="DOP853", rtol=rtol, atol=1e-14 * max(1.0, u0),
                     dense_output=dense)


def radial_shoot(exp, coeff_q: float, reaction: Callable[[float], float], R: float, N_dim: int,
                 tol: float = 1e-10, rtol: float = 1e-11, n_grid: int = 401) -> RadialProfile:
    """Radial solution of -(r^(N-1)(|u'|^(p-2)u' + c|u'|^(q-2)u'))' = r^(N-1) reaction(u).

    u'(0) = 0, u(R) = 0.  Shoots on u(0) with Brent's method until
    |u(R)| <= tol.  The state is (u, Q) with Q = r^(N-1) * flux; the
    reaction is evaluated at max(u, 0) so overshooting shots stay finite.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    p, q = exp.p, exp.q

    def end_value(u0):
        sol = _integrate(u0, p, q, coeff_q, reaction, R, N_dim, rtol)
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            raise RuntimeError(f"radial integration failed for u0={u0:g}: {sol.message}")
        return float(sol.y[0, -1])

    hi = 1.0
    for _ in range(200):
        if end_value(hi) > 0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("no shooting bracket: u(R) stays negative")
    lo = hi / 2.0
    for _ in range(200):
        if end_value(lo) < 0:
            break
        lo /= 2.0
    else:
        raise RuntimeError("no shooting bracket: u(R) stays positive")
    u0 = brentq(end_value, lo, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=200)
    sol = _integrate(u0, p, q, coeff_q, reaction, R, N_dim, rtol, dense=True)
    if abs(sol.y[0, -1]) > tol * max(1.0, u0):
        raise RuntimeError(f"shooting did not reach |u(R)| <= tol (got {sol.y[0, -1]:.3e})")
    grid = np.linspace(0.0, R, n_grid)
    vals = sol.sol(grid)[0]
    return RadialProfile(grid, vals, N_dim, R, u0, sol)


def radial_on_mesh(profile: RadialProfile, mesh: Mesh, center=None) -> np.ndarray:
    """Evaluate a radial profile at the mesh nodes (distance from ``center``)."""
    center = mesh.enclosing_ball[0] if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(mesh.nodes - center, axis=1)
    vals = profile(r)
    vals[mesh.boundary_flags] = 0.0
    return vals



def half_length_1d(exp, lam: float, u0: float, coeff_q: float = 1.0, t_max: float = 100.0) -> float:
    """Time map of -(|u'|^(p-2)u' + c|u'|^(q-2)u')' = lam (u^sigma - u^-beta) in 1D.

    Starts at a symmetric maximum u(0) = u0 with zero flux and returns the
    distance at which u reaches zero, or ``inf`` if the trajectory turns
    back up first.  A positive solution on an interval of half-length L
    exists iff L is attained by some u0.
    """
    if not u0 > 0:
        raise ValueError("u0 must be positive")
    p, q, sig, beta = exp.p, exp.q, exp.sigma, exp.beta

    def rhs(t, y):
        u = max(y[0], 1e-300)
        return [invert_flux(y[1], p, q, coeff_q), -lam * (u**sig - u ** (-beta))]

    def hits_zero(t, y):
        return y[0] - 1e-10 * u0

    def turns_up(t, y):
        return y[1]

    hits_zero.terminal = True
    turns_up.terminal, turns_up.direction = True, 1
    sol = solve_ivp(rhs, (0.0, t_max), [u0, 0.0], method="DOP853", rtol=1e-10, atol=1e-13,
                    events=[hits_zero, turns_up])
    if sol.t_events[0].size:
        return float(sol.t_events[0][0])
    return math.inf

# ---------------------------------------------------------------------------
# pointwise inequalities

def _barycentric(u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    mesh = u.mesh
    vals = u.values[mesh.elements].mean(axis=1)
    return vals, element_gradients(mesh, u.values)


def _positive_pair(u1: ScalarField, u2: ScalarField):
    idx = u1.mesh.interior
    if np.any(u1.values[idx] <= 0) or np.any(u2.values[idx] <= 0):
        raise ValueError("fields must be positive at interior nodes")
    a, ga = _barycentric(u1)
    b, gb = _barycentric(u2)
    return a, ga, b, gb


def picone_terms(u1: ScalarField, u2: ScalarField, p: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise (LHS, RHS) of
    |grad u1|^(p-2) grad u1 . grad(u2^q / u1^(q-1)) <= q/p |grad u2|^p + (p-q)/p |grad u1|^p,
    with values at barycenters and constant P1 gradients (chain rule for the quotient)."""
    a, ga, b, gb = _positive_pair(u1, u2)
    na = np.linalg.norm(ga, axis=1)
    nb = np.linalg.norm(gb, axis=1)
    grad_quot = (q * (b / a) ** (q - 1))[:, None] * gb - ((q - 1) * (b / a) ** q)[:, None] * ga
    lhs = na ** (p - 2) * np.einsum("ed,ed->e", ga, grad_quot)
    rhs = q / p * nb**p + (p - q) / p * na**p
    return lhs, rhs


def picone_pointwise_check(u1: ScalarField, u2: ScalarField, exp) -> float:
    """max over elements of LHS - RHS (<= 0 when the inequality holds)."""
    if exp.q > exp.p:
        raise ValueError("Picone inequality needs q <= p")
    lhs, rhs = picone_terms(u1, u2, exp.p, exp.q)
    return float(np.max(lhs - rhs))


def lindqvist_terms(u1: ScalarField, u2: ScalarField, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise (LHS, RHS) of the q-term estimate from the comparison proof:

    LHS = |grad u1|^(q-2) grad u1 . grad w1 - |grad u2|^(q-2) grad u2 . grad w2
    with w1 = (u1^q - u2^q)/u1^(q-1), w2 = (u1^q - u2^q)/u2^(q-1), and
    RHS = |u1 grad u2 - u2 grad u1|^q / ((2^(q-1) - 1)(u1^q + u2^q)).

    The positive part in w1, w2 is dropped: the algebraic inequality holds
    for every positive pair, and on {u1 > u2} the expressions coincide.
    """
    a, ga, b, gb = _positive_pair(u1, u2)
    na = np.linalg.norm(ga, axis=1)
    nb = np.linalg.norm(gb, axis=1)
    t = b / a
    grad_w1 = (1 + (q - 1) * t**q)[:, None] * ga - (q * t ** (q - 1))[:, None] * gb
    s = a / b
    grad_w2 = (q * s ** (q - 1))[:, None] * ga - (1 + (q - 1) * s**q)[:, None] * gb
    lhs = na ** (q - 2) * np.einsum("ed,ed->e", ga, grad_w1) - nb ** (q - 2) * np.einsum("ed,ed->e", gb, grad_w2)
    cross = np.linalg.norm(a[:, None] * gb - b[:, None] * ga, axis=1)
    rhs = cross**q / ((2 ** (q - 1) - 1) * (a**q + b**q))
    return lhs, rhs


def lindqvist_term_check(u1: ScalarField, u2: ScalarField, q: float, slack: float = 1e-10) -> tuple[bool, float]:
    """(passed, max(RHS - LHS)).  Needs q >= 2."""
    if q < 2:
        raise ValueError("the estimate needs q >= 2")
    lhs, rhs = lindqvist_terms(u1, u2, q)
    worst = float(np.max(rhs - lhs))
    return worst <= slack, worst


# ---------------------------------------------------------------------------
# comparison principle

@dataclass
class ComparisonReport:
    passed: bool
    max_excess: float
    slack: float
    sub_ok: bool
    super_ok: bool
    reaction_ok: bool


def reaction_quotient_nonincreasing(reaction: Callable, q: float, grid=np.logspace(-6, 6, 200)) -> bool:
    """Sampled check that f(s) s^(1-q) is nonincreasing on (0, inf)."""
    vals = np.array([reaction(s) for s in grid]) * grid ** (1 - q)
    return bool(np.all(np.diff(vals) <= 1e-12 * np.maximum(1.0, np.abs(vals[:-1]))))


def comparison_test(u1: ScalarField, u2: ScalarField, reaction: Callable, exp, coeff_q: float = 1.0,
                    rel_slack: float = 1e-8) -> ComparisonReport:
    """Discrete comparison: u1 (subsolution) <= u2 (supersolution) + slack nodewise.

    ``reaction`` maps an array of nodal values to nodal reaction values.
    """
    r1 = np.asarray(reaction(np.maximum(u1.values, 0.0)), dtype=float)
    r2 = np.asarray(reaction(np.maximum(u2.values, 0.0)), dtype=float)
    sub_ok = verify_weak_subsolution(u1, r1, exp, coeff_q).passed
    super_ok = verify_weak_supersolution(u2, r2, exp, coeff_q).passed
    reaction_ok = reaction_quotient_nonincreasing(lambda s: float(reaction(np.array([s]))[0]), exp.q)
    slack = rel_slack * u2.sup()
    idx = u1.mesh.interior
    excess = float(np.max(u1.values[idx] - u2.values[idx]))
    return ComparisonReport(excess <= slack, excess, slack, sub_ok, super_ok, reaction_ok)


# ---------------------------------------------------------------------------
# scaling in lambda

@dataclass
class ScalingReport:
    lambdas: list
    sup_values: list
    slope_fit: float
    expected: float
    gamma_scales: list
    linf_rescaled: list
    ratio_min: list
    ratio_max: list
    monotone_in_lambda: bool
    fields: list = field(default_factory=list, repr=False)
    error: str | None = None

    @property
    def rescaled_spread(self) -> float:
        return max(self.linf_rescaled) / min(self.linf_rescaled)


def scaling_sweep(mesh: Mesh, exp: ExponentSet, lambdas: Sequence[float], cfg: SolverConfig | None = None,
                  eig: Eigenpair | None = None) -> ScalingReport:
    """Phi_lam for each lam; slope of log sup Phi vs log lam over the top half of the range."""
    lambdas = [float(v) for v in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be strictly increasing")
    if lambdas[0] < 1:
        raise ValueError("the sweep starts at lambda >= 1")
    if len(lambdas) < 5 or lambdas[-1] / lambdas[0] < 100:
        raise ValueError("need at least 5 values spanning two decades")
    r0 = 1.0 / (exp.p - 1 - exp.sigma)
    eig = eig or principal_eigenpair(mesh)
    idx = mesh.interior
    rep = ScalingReport(lambdas, [], math.nan, r0, [lam ** ((exp.q - exp.p) * r0) for lam in lambdas],
                        [], [], [], True)
    for lam in lambdas:
        try:
            phi = solve_global_supersolution(mesh, exp, lam, cfg, eig=eig).field
        except Exception as exc:  # partial report on any solve failure
            rep.error = f"lambda={lam:g}: {exc}"
            return rep
        rep.fields.append(phi)
        rep.sup_values.append(phi.sup())
        rep.linf_rescaled.append(lam ** (-r0) * phi.sup())
        ratio = phi.values[idx] / (lam**r0 * mesh.node_distance[idx])
        rep.ratio_min.append(float(ratio.min()))
        rep.ratio_max.append(float(ratio.max()))
    for a, b in zip(rep.fields, rep.fields[1:]):
        if np.any(a.values > b.values + 1e-10 * max(1.0, b.sup())):
            rep.monotone_in_lambda = False
    half = len(lambdas) // 2
    rep.slope_fit = float(np.polyfit(np.log(lambdas[half:]), np.log(rep.sup_values[half:]), 1)[0])
    return rep


def boundary_ratio_profile(u: ScalarField, band: float) -> tuple[float, float]:
    """(min, max) of u/d over interior nodes with d <= band."""
    mesh = u.mesh
    if not 0 < band < 0.5 * mesh.inradius:
        raise ValueError("band must lie in (0, inradius/2)")
    idx = mesh.interior
    sel = idx[mesh.node_distance[idx] <= band]
    if sel.size == 0:
        raise ValueError("no interior nodes within the band")
    ratio = u.values[sel] / mesh.node_distance[sel]
    return float(ratio.min()), float(ratio.max())


def xi_phi_pair(mesh: Mesh, exp: ExponentSet, lam: float, cfg: SolverConfig | None = None,
                eig: Eigenpair | None = None):
    """(xi, Phi) pair for the comparison test, with the reaction lam s^sigma."""
    eig = eig or principal_eigenpair(mesh)
    G = solve_global_supersolution(mesh, exp, lam, cfg, eig=eig)
    reaction = lambda s: lam * np.maximum(s, 0.0) ** exp.sigma
    return G.xi, G.field, reaction


def random_positive_pair(mesh: Mesh, rng: np.random.Generator, n_modes: int = 4) -> tuple[ScalarField, ScalarField]:
    """Two positive Dirichlet fields: d times a random positive trigonometric factor."""
    x = mesh.nodes[:, 0]
    fields = []
    for _ in range(2):
        amp = rng.uniform(-0.3, 0.3, n_modes) / np.arange(1, n_modes + 1)
        factor = rng.uniform(0.5, 2.0) * (1.0 + sum(a * np.sin((k + 1) * np.pi * x) for k, a in enumerate(amp)))
        fields.append(ScalarField(mesh, mesh.node_distance * factor))
    return fields[0], fields[1]


def comparison_suite(exp: ExponentSet, seed: int, n_pairs: int = 100, n: int = 32,
                     lambdas=(1.0, 10.0, 100.0)) -> dict:
    """Randomized monotonicity of the solver, Picone/Lindqvist on random pairs,
    and the comparison test for (xi, Phi) at each lambda."""
    rng = np.random.default_rng(seed)
    mesh = build_interval_mesh(0.0, 1.0, n)
    solver = PQSolver(mesh, exp, 1.0, SolverConfig.for_mesh(mesh, tol_inner=1e-12))
    worst_order = -np.inf
    for _ in range(n_pairs):
        h1 = rng.uniform(-2.0, 2.0, mesh.n_nodes)
        h2 = h1 + rng.uniform(0.0, 1.0, mesh.n_nodes) * (rng.uniform(size=mesh.n_nodes) < 0.5)
        w1, w2 = solver.solve(h1), solver.solve(h2)
        worst_order = max(worst_order, float(np.max(w1.interior_values - w2.interior_values)))
    worst_picone, worst_lind = -np.inf, -np.inf
    for _ in range(n_pairs):
        u1, u2 = random_positive_pair(mesh, rng)
        worst_picone = max(worst_picone, picone_pointwise_check(u1, u2, exp))
        worst_lind = max(worst_lind, lindqvist_term_check(u1, u2, exp.q)[1])
    comp = {}
    mesh_c = build_interval_mesh(0.0, 1.0, 256)
    eig = principal_eigenpair(mesh_c)
    for lam in lambdas:
        G = solve_global_supersolution(mesh_c, exp, lam, eig=eig)
        reaction = lambda s, lam=lam: lam * np.maximum(s, 0.0) ** exp.sigma
        r = comparison_test(G.xi, G.field, reaction, exp)
        comp[f"{lam:g}"] = {"passed": r.passed and r.sub_ok and r.super_ok and r.reaction_ok,
                            "max_excess": r.max_excess}
    return {
        "solver_order_max_excess": worst_order,
        "solver_order_ok": worst_order <= 1e-10,
        "picone_max_violation": worst_picone,
        "picone_ok": worst_picone <= 1e-10,
        "lindqvist_max_violation": worst_lind,
        "lindqvist_ok": worst_lind <= 1e-10,
        "comparison": comp,
    }

__all__ = [
    "ComparisonReport", "comparison_suite", "half_length_1d", "random_positive_pair", "RadialProfile", "ScalingReport", "boundary_ratio_profile", "comparison_test",
    "invert_flux", "lindqvist_term_check", "lindqvist_terms", "picone_pointwise_check", "picone_terms",
    "radial_on_mesh", "radial_shoot", "reaction_quotient_nonincreasing", "scaling_sweep", "xi_phi_pair",
]
