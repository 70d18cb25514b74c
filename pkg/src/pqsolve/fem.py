"""P1 finite element machinery for the (p,q) Dirichlet energy.

Element gradients of P1 fields are constant, so the gradient part of

    E(u) = sum_T |T| (|grad u|^p / p + c |grad u|^q / q) - sum_i h_i u_i m_i

is evaluated exactly.  The load term uses lumped (nodal) quadrature, which
only ever samples ``h`` at interior nodes where d(x) > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


@dataclass(frozen=True)
class ExponentSet:
    """Exponents and growth constants of the problem.

    ``gamma_growth``, ``A`` and ``B`` describe the growth bounds
    ``f(s) >= A s^sigma`` (large s) and ``f(s) <= B s^gamma`` (all s).
    ``gamma_growth`` defaults to ``sigma + beta``, which is exact for the
    shifted power nonlinearity.
    """

    p: float
    q: float
    beta: float = 0.5
    sigma: float = 1.0
    gamma_growth: float | None = None
    A: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        if self.gamma_growth is None:
            object.__setattr__(self, "gamma_growth", self.sigma + self.beta)
        if not 1 < self.q < self.p:
            raise ValueError(f"exponents must satisfy 1 < q < p (got p={self.p}, q={self.q})")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.A > 0 and self.B > 0):
            raise ValueError("growth constants A and B must be positive")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1)

    def require_subsuper_regime(self) -> None:
        """Constraints for the eigenfunction subsolution / radial supersolution pair."""
        problems = []
        if not self.q > 2:
            problems.append("q > 2")
        if not self.sigma < self.beta + 1:
            problems.append("sigma < beta + 1")
        if not self.beta <= self.gamma_growth < self.beta + 1:
            problems.append("beta <= gamma_growth < beta + 1")
        if problems:
            raise ValueError("exponents outside admissible range: need " + ", ".join(problems))

    def require_maximal_regime(self) -> None:
        """Constraints for the global-supersolution (maximal solution) path."""
        problems = []
        if not self.q > 2:
            problems.append("q > 2")
        if not self.sigma < self.q - 1:
            problems.append("sigma < q - 1")
        if problems:
            raise ValueError("exponents outside admissible range: need " + ", ".join(problems))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a P1 function on ``mesh``."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_nodes,):
            raise ValueError(f"expected {self.mesh.n_nodes} nodal values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "ScalarField":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_interior(cls, mesh: Mesh, interior_values) -> "ScalarField":
        v = np.zeros(mesh.n_nodes)
        v[mesh.interior] = interior_values
        return cls(mesh, v)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.mesh.interior]

    @property
    def is_dirichlet(self) -> bool:
        return bool(np.all(self.values[self.mesh.boundary_flags] == 0.0))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.mesh, c * self.values)

    __rmul__ = __mul__


def _as_values(u) -> np.ndarray:
    return u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)


def _require_dirichlet(u: ScalarField) -> None:
    if not u.is_dirichlet:
        raise ValueError("field must vanish at boundary nodes")


def _check_load(mesh: Mesh, load) -> np.ndarray:
    load = np.asarray(load, dtype=float)
    if load.shape != (mesh.n_nodes,):
        raise ValueError(f"load must have one value per node ({mesh.n_nodes}), got {load.shape}")
    if not np.all(np.isfinite(load[mesh.interior])):
        raise ValueError("load is not finite at some interior node")
    return load


def element_gradients(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Constant gradient on each element, shape (ne, dim)."""
    return np.einsum("ek,ekd->ed", values[mesh.elements], mesh.basis_gradients)


def _spow(s: np.ndarray, e: float) -> np.ndarray:
    """s**e with the convention 0**e = 0 for e != 0 (the weight multiplies a zero vector)."""
    if e == 0:
        return np.ones_like(s)
    out = np.zeros_like(s)
    nz = s > 0
    out[nz] = s[nz] ** e
    return out


def flux_weights(s: np.ndarray, p: float, q: float, coeff_q: float) -> np.ndarray:
    """a(s) with flux = a(|g|) g, i.e. |g|^(p-2) + c |g|^(q-2)."""
    return _spow(s, p - 2) + coeff_q * _spow(s, q - 2)


def gradient_energy_density(mesh: Mesh, values: np.ndarray, p: float, q: float, coeff_q: float):
    g = element_gradients(mesh, values)
    s = np.linalg.norm(g, axis=1)
    return mesh.element_measures * (s**p / p + coeff_q * s**q / q)


def energy(u: ScalarField, load, exp, coeff_q: float = 1.0) -> float:
    """Discrete (p,q) energy with lumped load term.

    ``exp`` is any object exposing ``p`` and ``q``.
    """
    _require_dirichlet(u)
    mesh = u.mesh
    load = _check_load(mesh, load)
    grad_part = gradient_energy_density(mesh, u.values, exp.p, exp.q, coeff_q).sum()
    idx = mesh.interior
    return float(grad_part - np.dot(load[idx] * mesh.lumped_mass[idx], u.values[idx]))


def operator_action(mesh: Mesh, values: np.ndarray, p: float, q: float, coeff_q: float,
                    absolute: bool = False) -> np.ndarray:
    """Per-node integral of the flux against each hat: sum_T |T| a g . grad(phi_i).

    With ``absolute=True`` the magnitudes of the contributions are summed
    instead; this gives the roundoff scale of the residual.
    """
    g = element_gradients(mesh, values)
    s = np.linalg.norm(g, axis=1)
    flux = (mesh.element_measures * flux_weights(s, p, q, coeff_q))[:, None] * g
    contrib = np.einsum("ed,ekd->ek", flux, mesh.basis_gradients)
    if absolute:
        contrib = np.abs(contrib)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.elements.ravel(), contrib.ravel())
    return out


def weak_residual(u: ScalarField, load, exp, coeff_q: float = 1.0) -> np.ndarray:
    """Gradient of :func:`energy` with respect to interior nodal values.

    Entry i is  int a(|grad u|) grad u . grad(phi_i) - load_i m_i.
    """
    _require_dirichlet(u)
    mesh = u.mesh
    load = _check_load(mesh, load)
    idx = mesh.interior
    return operator_action(mesh, u.values, exp.p, exp.q, coeff_q)[idx] - load[idx] * mesh.lumped_mass[idx]


def hessian(mesh: Mesh, values: np.ndarray, p: float, q: float, coeff_q: float,
            eps_reg: float = 0.0) -> sp.csr_matrix:
    """Interior block of the energy Hessian with curvature regularization.

    Inside the second-derivative weights |g|^2 is replaced by |g|^2 + eps^2;
    the energy and its gradient are untouched.
    """
    g = element_gradients(mesh, values)
    s2 = np.einsum("ed,ed->e", g, g) + eps_reg**2
    s = np.sqrt(s2)
    a = flux_weights(s, p, q, coeff_q)
    b = (p - 2) * _spow(s, p - 4) + coeff_q * (q - 2) * _spow(s, q - 4)
    G = mesh.basis_gradients
    GG = np.einsum("ekd,eld->ekl", G, G)
    Gg = np.einsum("ekd,ed->ek", G, g)
    local = mesh.element_measures[:, None, None] * (
        a[:, None, None] * GG + b[:, None, None] * Gg[:, :, None] * Gg[:, None, :]
    )
    return _assemble_interior(mesh, local)


def _assemble_interior(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    k = mesh.dim + 1
    rows = np.repeat(mesh.elements, k, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, k)).ravel()
    full = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    idx = mesh.interior
    return full[idx][:, idx].tocsr()


def laplace_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """P1 stiffness matrix of -Laplace on interior nodes (Dirichlet rows/cols removed)."""
    G = mesh.basis_gradients
    local = mesh.element_measures[:, None, None] * np.einsum("ekd,eld->ekl", G, G)
    return _assemble_interior(mesh, local)


def assemble_load(h, mesh: Mesh) -> np.ndarray:
    """Nodal load h(x_i, d_i) at interior nodes, zero on the boundary.

    ``h`` is called once per interior node with the coordinate array and
    the distance to the boundary.
    """
    load = np.zeros(mesh.n_nodes)
    for i in mesh.interior:
        x = mesh.nodes[i]
        val = float(h(x if mesh.dim > 1 else x[0], mesh.node_distance[i]))
        if not math.isfinite(val):
            raise ValueError(f"load is not finite at interior node {i} (d={mesh.node_distance[i]:.3g})")
        load[i] = val
    return load


def nodal_load(mesh: Mesh, values) -> np.ndarray:
    """Vectorized variant of :func:`assemble_load` for precomputed nodal values."""
    load = np.zeros(mesh.n_nodes)
    vals = np.asarray(values, dtype=float)
    idx = mesh.interior
    load[idx] = vals[idx] if vals.shape == (mesh.n_nodes,) else vals
    if not np.all(np.isfinite(load[idx])):
        raise ValueError("load is not finite at some interior node")
    return load
