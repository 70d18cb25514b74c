from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqsolve.fem import (
    ExponentSet,
    ScalarField,
    assemble_load,
    energy,
    hessian,
    laplace_stiffness,
    nodal_load,
    operator_action,
    weak_residual,
)
from pqsolve.mesh import build_2d_mesh, build_interval_mesh


@pytest.mark.parametrize("kwargs,fragment", [
    (dict(p=3.0, q=3.0), "1 < q < p"),
    (dict(p=2.0, q=3.0), "1 < q < p"),
    (dict(p=3.0, q=1.0), "1 < q < p"),
    (dict(p=4.0, q=3.0, beta=0.0), "beta"),
    (dict(p=4.0, q=3.0, beta=1.0), "beta"),
    (dict(p=4.0, q=3.0, sigma=0.0), "sigma"),
    (dict(p=4.0, q=3.0, B=-1.0), "growth constants"),
])
def test_exponent_validation(kwargs, fragment):
    with pytest.raises(ValueError, match=fragment):
        ExponentSet(**kwargs)


def test_regime_checks():
    ExponentSet(4, 3, 0.5, 0.75).require_subsuper_regime()
    ExponentSet(4, 3, 0.5, 1.0).require_maximal_regime()
    with pytest.raises(ValueError, match="q > 2"):
        ExponentSet(4, 1.5).require_maximal_regime()
    with pytest.raises(ValueError, match="sigma < q - 1"):
        ExponentSet(4, 3, 0.5, 2.5).require_maximal_regime()
    with pytest.raises(ValueError, match="sigma < beta"):
        ExponentSet(4, 3, 0.5, 1.6).require_subsuper_regime()
    assert ExponentSet(4, 3).p_conj == pytest.approx(4 / 3)


def test_energy_of_linear_field_1d():
    # u = tent with slope +-1 on (0,1): |u'| = 1 everywhere
    mesh = build_interval_mesh(0.0, 1.0, 10)
    u = ScalarField(mesh, mesh.node_distance.copy())
    exp = ExponentSet(4, 3)
    assert energy(u, np.zeros(mesh.n_nodes), exp) == pytest.approx(1 / 4 + 1 / 3, rel=1e-14)
    assert energy(u, np.zeros(mesh.n_nodes), exp, coeff_q=0.0) == pytest.approx(0.25, rel=1e-14)


def test_energy_load_term_uses_lumped_mass():
    mesh = build_interval_mesh(0.0, 1.0, 10)
    u = ScalarField(mesh, mesh.node_distance.copy())
    exp = ExponentSet(4, 3)
    load = np.full(mesh.n_nodes, 2.0)
    expected = 1 / 4 + 1 / 3 - 2.0 * np.sum(mesh.lumped_mass * mesh.node_distance)
    assert energy(u, load, exp) == pytest.approx(expected, rel=1e-14)


def test_linear_operator_matches_stiffness(coarse_disk, rng):
    mesh = coarse_disk
    x = rng.standard_normal(mesh.interior.size)
    v = np.zeros(mesh.n_nodes)
    v[mesh.interior] = x
    # p = q = 2 with coeff 1 gives twice the Laplacian
    act = operator_action(mesh, v, 2.0, 2.0, 1.0)[mesh.interior]
    assert np.allclose(act, 2 * laplace_stiffness(mesh) @ x, atol=1e-12)


@pytest.mark.parametrize("mesh_factory", [
    lambda: build_interval_mesh(0.0, 1.0, 24),
    lambda: build_2d_mesh("unit_square", 0.2),
])
@pytest.mark.parametrize("pq", [(4.0, 3.0), (2.5, 1.5), (3.0, 2.2)])
def test_weak_residual_is_energy_gradient(mesh_factory, pq, rng):
    mesh = mesh_factory()
    exp = SimpleNamespace(p=pq[0], q=pq[1])
    u = ScalarField.from_interior(mesh, rng.uniform(0.1, 1.0, mesh.interior.size))
    load = rng.standard_normal(mesh.n_nodes)
    v = np.zeros(mesh.n_nodes)
    v[mesh.interior] = rng.standard_normal(mesh.interior.size)
    eps = 1e-5
    fd = (energy(ScalarField(mesh, u.values + eps * v), load, exp)
          - energy(ScalarField(mesh, u.values - eps * v), load, exp)) / (2 * eps)
    exact = weak_residual(u, load, exp) @ v[mesh.interior]
    assert fd == pytest.approx(exact, rel=1e-6, abs=1e-8)


def test_hessian_matches_residual_differences(rng):
    mesh = build_2d_mesh("unit_square", 0.25)
    exp = ExponentSet(4, 3)
    u = ScalarField.from_interior(mesh, rng.uniform(0.1, 1.0, mesh.interior.size))
    load = np.zeros(mesh.n_nodes)
    H = hessian(mesh, u.values, exp.p, exp.q, 1.0, eps_reg=0.0)
    v = np.zeros(mesh.n_nodes)
    v[mesh.interior] = rng.standard_normal(mesh.interior.size)
    eps = 1e-6
    fd = (weak_residual(ScalarField(mesh, u.values + eps * v), load, exp)
          - weak_residual(ScalarField(mesh, u.values - eps * v), load, exp)) / (2 * eps)
    assert np.allclose(H @ v[mesh.interior], fd, rtol=1e-6, atol=1e-8)
    assert abs(H - H.T).max() < 1e-12


def test_hessian_regularization_keeps_zero_field_definite():
    mesh = build_interval_mesh(0.0, 1.0, 16)
    H = hessian(mesh, np.zeros(mesh.n_nodes), 4.0, 3.0, 1.0, eps_reg=1e-7)
    assert np.linalg.eigvalsh(H.toarray()).min() > 0


@given(st.floats(2.05, 6.0), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_energy_convex_along_segments(p, qfrac, seed):
    q = 1.0 + qfrac * (p - 1.0)
    mesh = build_interval_mesh(0.0, 1.0, 12)
    r = np.random.default_rng(seed)
    exp = SimpleNamespace(p=p, q=q)
    a = ScalarField.from_interior(mesh, r.standard_normal(mesh.interior.size))
    b = ScalarField.from_interior(mesh, r.standard_normal(mesh.interior.size))
    load = r.standard_normal(mesh.n_nodes)
    mid = ScalarField(mesh, 0.5 * (a.values + b.values))
    Ea, Eb, Em = (energy(f, load, exp) for f in (a, b, mid))
    assert Em <= 0.5 * (Ea + Eb) + 1e-12 * max(1.0, abs(Ea), abs(Eb))


@pytest.mark.parametrize("c", [0.1, 1.0, 3.7])
def test_energy_homogeneity_without_load(c, rng):
    mesh = build_2d_mesh("unit_square", 0.25)
    exp = ExponentSet(4, 3)
    u = ScalarField.from_interior(mesh, rng.standard_normal(mesh.interior.size))
    zero = np.zeros(mesh.n_nodes)
    p_term = energy(u, zero, exp, coeff_q=0.0)
    q_term = (energy(u, zero, exp, coeff_q=2.0) - p_term) / 2.0
    assert energy(c * u, zero, exp, coeff_q=1.5) == pytest.approx(c**4 * p_term + 1.5 * c**3 * q_term, rel=1e-12)


def test_energy_requires_dirichlet_field(unit_interval):
    u = ScalarField(unit_interval, np.ones(unit_interval.n_nodes))
    with pytest.raises(ValueError, match="vanish"):
        energy(u, np.zeros(unit_interval.n_nodes), ExponentSet(4, 3))


def test_scalar_field_shape_check(unit_interval):
    with pytest.raises(ValueError, match="nodal values"):
        ScalarField(unit_interval, np.zeros(3))


def test_load_assembly(unit_interval):
    load = assemble_load(lambda x, d: x + d, unit_interval)
    idx = unit_interval.interior
    x = unit_interval.nodes[idx, 0]
    assert np.allclose(load[idx], x + np.minimum(x, 1 - x))
    assert np.all(load[unit_interval.boundary_flags] == 0)
    with pytest.raises(ValueError, match="not finite"):
        assemble_load(lambda x, d: float("nan") if d == 0.5 else 0.0, build_interval_mesh(0, 1, 4))
    with pytest.raises(ValueError, match="not finite"):
        nodal_load(unit_interval, np.full(unit_interval.n_nodes, np.inf))
