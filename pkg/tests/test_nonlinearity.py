import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqsolve.fem import ExponentSet
from pqsolve.nonlinearity import NonlinearitySpec, f_eval, g_eval, power_shifted, validate_hypotheses

EXP = ExponentSet(4, 3, beta=0.5, sigma=0.75)


def test_power_shifted_values():
    spec = power_shifted(EXP)
    assert f_eval(spec, 0.0) == -1.0
    assert f_eval(spec, 1.0) == 0.0
    assert f_eval(spec, 4.0) == pytest.approx(4.0**1.25 - 1)
    assert spec.beta0 == 1.0
    assert g_eval(spec, 2.0, 1.0) == 0.0
    assert g_eval(spec, 3.0, 4.0) == pytest.approx(3.0 * (4.0**1.25 - 1) / 2.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.array([1.0, 0.0]), np.nan])
def test_g_refuses_nonpositive(bad):
    with pytest.raises(ValueError, match="positive"):
        g_eval(power_shifted(EXP), 1.0, bad)


def test_f_refuses_negative():
    with pytest.raises(ValueError):
        f_eval(power_shifted(EXP), -0.1)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(1e-3, 1e3))
@settings(max_examples=100)
def test_g_increasing(a, b, lam):
    lo, hi = sorted((a, b))
    spec = power_shifted(EXP)
    g_lo, g_hi = g_eval(spec, lam, lo), g_eval(spec, lam, hi)
    assert g_lo <= g_hi + 1e-12 * max(abs(g_lo), abs(g_hi))


def test_power_shifted_hypotheses_hold():
    res = validate_hypotheses(power_shifted(EXP))
    assert all(r.passed for r in res.values()), {k: r.detail for k, r in res.items()}
    assert res["upper_growth"].witness["gamma"] == pytest.approx(1.25)
    assert res["lower_growth"].witness["sigma"] == pytest.approx(1.0)
    assert 0 < res["lower_growth"].witness["sigma"] < EXP.beta + 1


def test_table_nonlinearity_and_beta0():
    s = np.linspace(0.0, 10.0, 101)
    spec = NonlinearitySpec(EXP, "table", s, s - 2.0, growth_hint=1.0)
    assert spec.beta0 == pytest.approx(2.0, abs=1e-12)
    assert f_eval(spec, 20.0) == pytest.approx(16.0)
    res = validate_hypotheses(spec)
    assert res["monotone_semipositone"].passed and res["eventually_positive"].passed and res["upper_growth"].passed


def test_table_failing_hypotheses():
    s = np.linspace(0.0, 10.0, 11)
    # f(0) >= 0 breaks the semipositone sign condition
    res = validate_hypotheses(NonlinearitySpec(EXP, "table", s, s + 1.0, growth_hint=1.0))
    assert not res["monotone_semipositone"].passed
    # growth s^2 exceeds beta + 1 = 1.5
    res = validate_hypotheses(NonlinearitySpec(EXP, "table", s, s**2 - 1.0, growth_hint=2.0))
    assert not res["upper_growth"].passed


@pytest.mark.parametrize("kwargs,msg", [
    (dict(kind="cubic"), "unknown"),
    (dict(kind="table", table_s=[0.0, 1.0], table_f=[1.0]), "equal length"),
    (dict(kind="table", table_s=[0.5, 1.0], table_f=[0.0, 1.0]), "start at 0"),
    (dict(kind="table", table_s=[0.0, 1.0], table_f=[1.0, 0.0]), "monotone"),
])
def test_spec_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        NonlinearitySpec(EXP, **kwargs)


def test_singular_load_bounded_by_inverse_distance_power():
    from pqsolve.mesh import build_interval_mesh
    from pqsolve.subsuper import build_subsolution_psi, pick_r_exponent, principal_eigenpair

    spec = power_shifted(EXP)
    for n in (64, 256, 1024):
        mesh = build_interval_mesh(0.0, 1.0, n)
        psi = build_subsolution_psi(principal_eigenpair(mesh), 100.0, pick_r_exponent(EXP), EXP.beta)
        idx = mesh.interior
        d = mesh.node_distance[idx]
        scaled = np.abs(g_eval(spec, 100.0, psi.values[idx])) * d**EXP.beta
        # bounded uniformly under refinement
        assert scaled.max() < 1e3


def test_reaction_quotient_monotonicity():
    from pqsolve.verify import reaction_quotient_nonincreasing

    q = EXP.q
    # the pure power reaction of the global supersolution problem
    assert reaction_quotient_nonincreasing(lambda s: 7.0 * s**EXP.sigma, q)
    # the shifted power is not covered: -s^(1-q) grows near zero
    spec = power_shifted(EXP)
    assert not reaction_quotient_nonincreasing(lambda s: f_eval(spec, s), q)
