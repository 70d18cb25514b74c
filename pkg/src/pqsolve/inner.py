"""Solve -Lap_p w - c Lap_q w = h, w = 0 on the boundary, by energy minimization."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import MaxIterExceeded
from .fem import (
    ScalarField,
    _check_load,
    gradient_energy_density,
    hessian,
    laplace_stiffness,
    operator_action,
)
from .mesh import Mesh

log = logging.getLogger(__name__)

# Residual entries are sums of O(flux) terms; below this multiple of their
# absolute scale the residual is pure roundoff.
ROUNDOFF_FACTOR = 1e-13


@dataclass(frozen=True)
class SolverConfig:
    tol_inner: float = 1e-9
    tol_outer: float = 1e-6
    max_inner_iters: int = 500
    max_outer_iters: int = 300
    eps_reg: float = 1e-7
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5

    def __post_init__(self):
        if not (self.tol_inner > 0 and self.tol_outer > 0 and self.eps_reg >= 0):
            raise ValueError("tolerances must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration limits must be at least 1")
        if self.eps_reg > 1e-6:
            raise ValueError("eps_reg must not exceed 1e-6")
        if not (0 < self.armijo_c < 1 and 0 < self.backtrack_factor < 1):
            raise ValueError("armijo_c and backtrack_factor must lie in (0, 1)")

    @classmethod
    def for_mesh(cls, mesh: Mesh, **overrides) -> "SolverConfig":
        """Defaults: tol_inner 1e-9 in 1D, 1e-8 in 2D."""
        base = cls(tol_inner=1e-9 if mesh.dim == 1 else 1e-8)
        return replace(base, **overrides)


@dataclass
class InnerStats:
    iterations: int = 0
    residual: float = float("nan")
    tolerance: float = float("nan")
    energies: list = field(default_factory=list)
    step_kinds: list = field(default_factory=list)  # "armijo" | "roundoff" | "gradient"


class PQSolver:
    """Minimizer of the discrete (p,q) energy on a fixed mesh.

    The Laplace stiffness factorization is cached for the initial guess
    and the gradient fallback, so one instance should be reused across
    many loads on the same mesh.
    """

    def __init__(self, mesh: Mesh, exp, coeff_q: float = 1.0, cfg: SolverConfig | None = None):
        if coeff_q < 0:
            raise ValueError("coeff_q must be nonnegative")
        if not exp.p >= exp.q > 1:
            raise ValueError("need p >= q > 1")
        self.mesh = mesh
        self.exp = exp
        self.coeff_q = coeff_q
        self.cfg = cfg or SolverConfig.for_mesh(mesh)
        self._lu = spla.splu(laplace_stiffness(mesh).tocsc())
        self.last_stats = InnerStats()

    # energy and gradient restricted to interior unknowns
    def _full(self, x):
        v = np.zeros(self.mesh.n_nodes)
        v[self.mesh.interior] = x
        return v

    def _energy(self, x, b):
        return float(gradient_energy_density(self.mesh, self._full(x), self.exp.p, self.exp.q, self.coeff_q).sum() - b @ x)

    def _grad(self, x, b):
        return operator_action(self.mesh, self._full(x), self.exp.p, self.exp.q, self.coeff_q)[self.mesh.interior] - b

    def _tolerance(self, x, b):
        return self.residual_tolerance(self._full(x), b)

    def residual_tolerance(self, values, b, tol: float | None = None) -> float:
        """``tol`` (default tol_inner), raised to the roundoff floor of the residual at ``values``.

        ``b`` is the interior load already multiplied by the lumped mass.
        """
        idx = self.mesh.interior
        scale = operator_action(self.mesh, values, self.exp.p, self.exp.q, self.coeff_q, absolute=True)
        scale = max(float(scale[idx].max(initial=0.0)), float(np.abs(b).max(initial=0.0)))
        tol = self.cfg.tol_inner if tol is None else tol
        # For loads below unit size the absolute tolerance becomes relative.
        load_size = float(np.abs(b).max(initial=0.0)) / float(self.mesh.lumped_mass[idx].max(initial=1.0))
        tol *= min(1.0, load_size) if load_size > 0 else 1.0
        return max(tol, ROUNDOFF_FACTOR * scale)

    def full_residual(self, values, load) -> tuple[float, float]:
        """Sup-norm of the weak residual of ``values`` against ``load`` and its tolerance."""
        idx = self.mesh.interior
        b = np.asarray(load, dtype=float)[idx] * self.mesh.lumped_mass[idx]
        r = operator_action(self.mesh, values, self.exp.p, self.exp.q, self.coeff_q)[idx] - b
        return float(np.abs(r).max(initial=0.0)), self.residual_tolerance(values, b)

    def _initial_guess(self, b):
        """Minimize the energy along the ray through the Poisson solution."""
        x0 = self._lu.solve(b)
        if not np.any(x0):
            return x0

        def slope(c):
            return float(self._grad(c * x0, b) @ x0)

        hi = 1.0
        while slope(hi) < 0:
            hi *= 2.0
        lo = 0.0 if slope(0.0) < 0 else hi
        if lo == hi:
            return hi * x0
        return brentq(slope, lo, hi, xtol=1e-14 * hi) * x0

    def solve(self, load, warm_start: ScalarField | None = None) -> ScalarField:
        mesh, cfg = self.mesh, self.cfg
        load = _check_load(mesh, load)
        idx = mesh.interior
        b = load[idx] * mesh.lumped_mass[idx]
        if warm_start is not None:
            x = np.array(warm_start.values[idx], dtype=float)
        else:
            x = self._initial_guess(b)
        stats = InnerStats()
        E = self._energy(x, b)
        stats.energies.append(E)
        rel_drop = np.inf
        for it in range(cfg.max_inner_iters + 1):
            r = self._grad(x, b)
            res = float(np.abs(r).max(initial=0.0))
            tol = self._tolerance(x, b)
            stats.iterations, stats.residual, stats.tolerance = it, res, tol
            if res <= tol and (rel_drop <= cfg.tol_inner or res <= 0.1 * tol):
                break
            if it == cfg.max_inner_iters:
                self.last_stats = stats
                raise MaxIterExceeded(
                    f"inner solve did not converge: residual {res:.3e} > {tol:.3e}",
                    iterations=it, residual=res,
                )
            d, kind = self._direction(x, r)
            x_new, E_new, kind = self._line_search(x, b, E, r, d, kind, res)
            if x_new is None:
                # Newton failed to make progress; retry along the preconditioned gradient once.
                d = -self._lu.solve(r)
                x_new, E_new, kind = self._line_search(x, b, E, r, d, "gradient", res)
                if x_new is None:
                    self.last_stats = stats
                    raise MaxIterExceeded(
                        f"line search stalled at residual {res:.3e} (tolerance {tol:.3e})",
                        iterations=it, residual=res,
                    )
            rel_drop = abs(E - E_new) / max(1.0, abs(E))
            x, E = x_new, E_new
            stats.energies.append(E)
            stats.step_kinds.append(kind)
        self.last_stats = stats
        return ScalarField.from_interior(mesh, x)

    def _direction(self, x, r):
        H = hessian(self.mesh, self._full(x), self.exp.p, self.exp.q, self.coeff_q, self.cfg.eps_reg)
        try:
            d = spla.spsolve(H.tocsc(), -r)
        except RuntimeError:
            d = None
        if d is None or not np.all(np.isfinite(d)) or r @ d >= 0:
            return -self._lu.solve(r), "gradient"
        return d, "armijo"

    def _line_search(self, x, b, E, r, d, kind, res):
        cfg = self.cfg
        slope = float(r @ d)
        t = 1.0
        while t > 1e-12:
            xt = x + t * d
            Et = self._energy(xt, b)
            if Et < E + cfg.armijo_c * t * slope:
                return xt, Et, kind
            # At roundoff level energy differences are noise; fall back on the residual.
            if abs(t * slope) < 1e-13 * max(1.0, abs(E)):
                rt = float(np.abs(self._grad(xt, b)).max(initial=0.0))
                if rt < res:
                    return xt, Et, "roundoff"
            t *= cfg.backtrack_factor
        return None, None, kind


def solve_pq(mesh: Mesh, load, exp, coeff_q: float = 1.0, cfg: SolverConfig | None = None,
             warm_start: ScalarField | None = None) -> ScalarField:
    """Unique minimizer of the discrete energy; see :class:`PQSolver`."""
    return PQSolver(mesh, exp, coeff_q, cfg).solve(load, warm_start)


def check_distance_bound(w: ScalarField) -> float:
    """max |w_i| / d_i over interior nodes."""
    if not w.is_dirichlet:
        raise ValueError("field must vanish at boundary nodes")
    idx = w.mesh.interior
    return float(np.max(np.abs(w.values[idx]) / w.mesh.node_distance[idx], initial=0.0))
