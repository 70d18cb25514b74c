from types import SimpleNamespace

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from pqsolve.errors import MaxIterExceeded
from pqsolve.fem import ExponentSet, ScalarField, laplace_stiffness, weak_residual
from pqsolve.inner import PQSolver, SolverConfig, check_distance_bound, solve_pq
from pqsolve.mesh import build_2d_mesh, build_interval_mesh
from pqsolve.subsuper import build_subsolution_psi, pick_r_exponent, principal_eigenpair, radial_profile_e

LINEAR = SimpleNamespace(p=2.0, q=2.0)


def test_linear_case_matches_direct_solve(unit_interval):
    mesh = unit_interval
    load = np.sin(3 * mesh.nodes[:, 0]) + 2.0
    w = solve_pq(mesh, load, LINEAR, coeff_q=1.0)
    idx = mesh.interior
    direct = spla.spsolve(2.0 * laplace_stiffness(mesh).tocsc(), load[idx] * mesh.lumped_mass[idx])
    assert np.abs(w.interior_values - direct).max() < 1e-12


def test_poisson_nodal_exactness():
    # P1 with lumped constant load is nodally exact for -u'' = 1 in 1D
    mesh = build_interval_mesh(0.0, 1.0, 20)
    w = solve_pq(mesh, np.ones(mesh.n_nodes), LINEAR, coeff_q=0.0)
    x = mesh.nodes[:, 0]
    assert np.abs(w.values - x * (1 - x) / 2).max() < 1e-13


@pytest.mark.parametrize("p", [3.0, 4.0])
def test_p_laplace_converges_to_closed_form(p):
    errs = []
    for n in (32, 64, 128):
        mesh = build_interval_mesh(0.0, 1.0, n)
        w = solve_pq(mesh, np.ones(mesh.n_nodes), SimpleNamespace(p=p, q=1.5), coeff_q=0.0)
        exact = radial_profile_e(np.abs(mesh.nodes[:, 0] - 0.5), p, 1, 0.5)
        errs.append(np.abs(w.values - exact).max())
    assert errs[-1] < 1e-3
    # the exact solution is only C^{1,1/(p-1)} at the flux zero, which caps the rate
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1 + 1 / (p - 1) - 0.1)


@pytest.mark.parametrize("c", [0.25, 3.0, 40.0])
def test_pure_p_homogeneity(c, unit_interval):
    exp = SimpleNamespace(p=4.0, q=3.0)
    load = 1.0 + unit_interval.nodes[:, 0]
    w1 = solve_pq(unit_interval, load, exp, coeff_q=0.0)
    wc = solve_pq(unit_interval, c * load, exp, coeff_q=0.0)
    assert np.allclose(wc.values, c ** (1 / 3) * w1.values, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("mesh_factory", [
    lambda: build_interval_mesh(0.0, 1.0, 128),
    lambda: build_2d_mesh("unit_square", 1 / 16),
    lambda: build_2d_mesh("disk", 0.1),
])
@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
def test_residual_below_tolerance(mesh_factory, scale):
    mesh = mesh_factory()
    exp = ExponentSet(4, 3)
    solver = PQSolver(mesh, exp)
    load = scale * (1.0 + mesh.node_distance)
    w = solver.solve(load)
    res, tol = solver.full_residual(w.values, load)
    assert res <= tol
    assert tol <= max(solver.cfg.tol_inner, 1e-13 * 1e6 * scale)
    assert np.all(w.interior_values > 0)


def test_warm_start_reaches_same_solution(unit_interval):
    exp = ExponentSet(4, 3)
    solver = PQSolver(unit_interval, exp)
    load = np.full(unit_interval.n_nodes, 5.0)
    w = solver.solve(load)
    w2 = solver.solve(load, warm_start=ScalarField(unit_interval, 0.5 * w.values))
    assert np.abs(w.values - w2.values).max() < 1e-9
    assert solver.last_stats.residual <= solver.last_stats.tolerance


def test_unique_minimizer_from_different_starts(fine_interval):
    exp = ExponentSet(4, 3, beta=0.5, sigma=0.75)
    eig = principal_eigenpair(fine_interval)
    psi = build_subsolution_psi(eig, 100.0, pick_r_exponent(exp), exp.beta)
    solver = PQSolver(fine_interval, exp)
    load = 50.0 * (1.0 + fine_interval.nodes[:, 0] ** 2)
    from_zero = solver.solve(load, warm_start=ScalarField.zeros(fine_interval))
    from_psi = solver.solve(load, warm_start=psi)
    assert np.abs(from_zero.values - from_psi.values).max() <= 2 * solver.cfg.tol_inner


def test_zero_load_gives_zero(unit_interval):
    w = solve_pq(unit_interval, np.zeros(unit_interval.n_nodes), ExponentSet(4, 3))
    assert np.all(w.values == 0)


def test_energy_decreases_monotonically(unit_interval):
    solver = PQSolver(unit_interval, ExponentSet(4, 3))
    solver.solve(np.full(unit_interval.n_nodes, 10.0))
    stats = solver.last_stats
    E = np.array(stats.energies)
    drops = np.diff(E)
    armijo = np.array([k != "roundoff" for k in stats.step_kinds])
    assert np.all(drops[armijo] < 0)
    # roundoff-level steps are accepted on residual decrease; energy may move by noise only
    assert np.all(np.abs(drops[~armijo]) <= 1e-13 * np.abs(E).max())


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_weak_comparison_for_ordered_loads(seed):
    r = np.random.default_rng(seed)
    mesh = build_interval_mesh(0.0, 1.0, 24)
    solver = PQSolver(mesh, ExponentSet(4, 3), cfg=SolverConfig.for_mesh(mesh, tol_inner=1e-12))
    h1 = r.uniform(-3, 3, mesh.n_nodes)
    h2 = h1 + r.uniform(0, 2, mesh.n_nodes)
    w1, w2 = solver.solve(h1), solver.solve(h2)
    assert np.all(w1.values <= w2.values + 1e-10)


def test_distance_bound(unit_interval):
    w = solve_pq(unit_interval, np.full(unit_interval.n_nodes, 4.0), ExponentSet(4, 3))
    C = check_distance_bound(w)
    assert 0 < C < np.inf
    assert np.all(np.abs(w.interior_values) <= C * unit_interval.node_distance[unit_interval.interior] + 1e-15)
    with pytest.raises(ValueError):
        check_distance_bound(ScalarField(unit_interval, np.ones(unit_interval.n_nodes)))


def test_weak_residual_of_solution(unit_interval):
    exp = ExponentSet(4, 3)
    load = np.full(unit_interval.n_nodes, 2.0)
    w = solve_pq(unit_interval, load, exp)
    assert np.abs(weak_residual(w, load, exp)).max() <= 1e-9


def test_iteration_cap_raises(unit_interval):
    cfg = SolverConfig(max_inner_iters=1)
    with pytest.raises(MaxIterExceeded) as info:
        PQSolver(unit_interval, ExponentSet(6, 3), cfg=cfg).solve(np.full(unit_interval.n_nodes, 1e4))
    assert info.value.iterations == 1


@pytest.mark.parametrize("kwargs", [dict(eps_reg=1e-5), dict(tol_inner=0.0), dict(max_inner_iters=0),
                                    dict(armijo_c=1.5), dict(backtrack_factor=1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_config_mesh_defaults(unit_interval, coarse_square):
    assert SolverConfig.for_mesh(unit_interval).tol_inner == 1e-9
    assert SolverConfig.for_mesh(coarse_square).tol_inner == 1e-8
    assert SolverConfig.for_mesh(coarse_square, tol_inner=1e-11).tol_inner == 1e-11


def test_load_validation(unit_interval):
    solver = PQSolver(unit_interval, ExponentSet(4, 3))
    with pytest.raises(ValueError):
        solver.solve(np.ones(3))
    bad = np.ones(unit_interval.n_nodes)
    bad[5] = np.nan
    with pytest.raises(ValueError):
        solver.solve(bad)
