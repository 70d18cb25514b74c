"""The reaction f, the singular right-hand side g(u) = lam f(u) / u^beta, and
sampled checks of the structural hypotheses on f."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .fem import ExponentSet

SAMPLE_GRID = np.logspace(-6, 6, 200)


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """Either ``kind="power_shifted"`` (f(s) = s^(sigma+beta) - 1) or
    ``kind="table"`` with increasing abscissae ``table_s`` and values
    ``table_f`` (linear interpolation, power-law extrapolation beyond the
    last point using ``growth_hint`` as exponent)."""

    exp: ExponentSet
    kind: str = "power_shifted"
    table_s: np.ndarray | None = None
    table_f: np.ndarray | None = None
    growth_hint: float | None = None
    beta0: float = field(init=False)

    def __post_init__(self):
        if self.kind == "table":
            s = np.asarray(self.table_s, dtype=float)
            fv = np.asarray(self.table_f, dtype=float)
            if s.ndim != 1 or s.shape != fv.shape or len(s) < 2:
                raise ValueError("table_s and table_f must be 1D arrays of equal length >= 2")
            if s[0] != 0.0 or np.any(np.diff(s) <= 0):
                raise ValueError("table_s must start at 0 and be strictly increasing")
            if np.any(np.diff(fv) < 0):
                raise ValueError("table values must be monotone nondecreasing")
            object.__setattr__(self, "table_s", s)
            object.__setattr__(self, "table_f", fv)
        elif self.kind != "power_shifted":
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        object.__setattr__(self, "beta0", self._compute_beta0())

    def _f(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power_shifted":
            return s ** (self.exp.sigma + self.exp.beta) - 1.0
        inside = np.interp(s, self.table_s, self.table_f)
        last_s, last_f = self.table_s[-1], self.table_f[-1]
        hint = self.growth_hint if self.growth_hint is not None else 1.0
        beyond = last_f * (np.maximum(s, last_s) / last_s) ** hint if last_f > 0 else last_f
        return np.where(s <= last_s, inside, beyond)

    def _compute_beta0(self) -> float:
        if self.kind == "power_shifted":
            return 1.0
        beta = self.exp.beta
        ratio = lambda t: float(self._f(t)) / t**beta
        hi = self.table_s[-1]
        while ratio(hi) <= 0:
            hi *= 2.0
            if hi > 1e12:
                raise ValueError("f(t)/t^beta never becomes positive")
        lo = min(1e-12, hi / 2)
        if ratio(lo) > 0:
            return lo
        return brentq(ratio, lo, hi, xtol=1e-15, rtol=1e-15)


def power_shifted(exp: ExponentSet) -> NonlinearitySpec:
    return NonlinearitySpec(exp, "power_shifted")


def f_eval(spec: NonlinearitySpec, s):
    """f(s) for s >= 0 (scalar or array)."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError("f is only defined for s >= 0")
    out = spec._f(arr)
    return float(out) if out.ndim == 0 else out


def g_eval(spec: NonlinearitySpec, lam: float, u):
    """lam * f(u) / u^beta; refuses u <= 0 rather than clamping."""
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("g requires strictly positive arguments")
    out = lam * spec._f(arr) / arr**spec.exp.beta
    return float(out) if out.ndim == 0 else out


@dataclass
class HypothesisResult:
    name: str
    passed: bool
    detail: str
    witness: dict = field(default_factory=dict)


def _tail_exponent(spec: NonlinearitySpec, grid: np.ndarray) -> float:
    """Slope of log f vs log s over the last decade of the grid."""
    if spec.kind == "power_shifted":
        return spec.exp.sigma + spec.exp.beta
    s = grid[grid >= grid[-1] / 10]
    fv = spec._f(s)
    if np.any(fv <= 0):
        return 0.0
    return float(np.polyfit(np.log(s), np.log(fv), 1)[0])


def validate_hypotheses(spec: NonlinearitySpec, grid: np.ndarray = SAMPLE_GRID) -> dict[str, HypothesisResult]:
    """Sampled check of the four structural hypotheses on f.

    Results are evidence on the grid, not proofs.
    """
    beta = spec.exp.beta
    s = np.asarray(grid, dtype=float)
    fv = spec._f(s)
    f0 = float(spec._f(0.0))
    ratio = fv / s**beta
    tol = 1e-12 * np.maximum(1.0, np.abs(ratio[:-1]))
    mono_f = bool(np.all(np.diff(fv) >= -1e-12 * np.maximum(1.0, np.abs(fv[:-1]))))
    mono_ratio = bool(np.all(np.diff(ratio) >= -tol))
    out = {}
    out["monotone_semipositone"] = HypothesisResult(
        "monotone_semipositone", mono_f and mono_ratio and f0 < 0,
        f"f increasing: {mono_f}; f/t^beta increasing: {mono_ratio}; f(0) = {f0:.6g}",
        {"f0": f0},
    )
    pos = np.flatnonzero(ratio > 0)
    out["eventually_positive"] = HypothesisResult(
        "eventually_positive", pos.size > 0,
        "f(t)/t^beta > 0 at t = %s" % (f"{s[pos[0]]:.6g}" if pos.size else "none"),
        {"t": float(s[pos[0]]) if pos.size else None},
    )
    e = _tail_exponent(spec, s)
    large = s >= max(10.0 * spec.beta0, 1.0)
    # lower growth: f >= A s^sig for large s with 0 < sig < beta + 1.
    sig = min(e, beta + 0.5) if e > 0 else None
    if sig is not None and np.any(large):
        A = float(np.min(fv[large] / s[large] ** sig))
        ok3 = A > 0
    else:
        A, ok3 = 0.0, False
    out["lower_growth"] = HypothesisResult(
        "lower_growth", ok3, f"tail exponent {e:.6g}; lower growth exponent {sig} with A = {A:.6g}",
        {"sigma": sig, "A": A, "tail_exponent": e},
    )
    # upper growth: f <= B s^gam for all s with beta <= gam < beta + 1.
    gam = max(beta, e)
    positive = fv > 0
    B = float(np.max(fv[positive] / s[positive] ** gam)) if np.any(positive) else 0.0
    ok4 = gam < beta + 1 and np.isfinite(B)
    out["upper_growth"] = HypothesisResult(
        "upper_growth", bool(ok4), f"upper growth exponent {gam:.6g} (needs < {beta + 1:.6g}); B = {B:.6g}",
        {"gamma": gam, "B": B},
    )
    return out
