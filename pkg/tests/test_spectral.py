import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import pipeline
from oracles import KAPPA_L_SHAPE_2, KAPPA_UNIT_SQUARE_2, kappa_from_pencil
from riesz_trace.operators import harmonic_lift
from riesz_trace.solver import very_weak_solve
from riesz_trace.spectral import (
    OutsideHarmonicSpanError,
    eigen_clusters,
    h1_equivalence_check,
    hs_norm,
    span_residual,
    spectrum_table,
)

LEVELS = [("unit_square", 2), ("unit_square", 4), ("unit_square", 8), ("l_shape", 4), ("l_shape", 8)]


@pytest.fixture(scope="module", params=LEVELS, ids=lambda p: f"{p[0]}-{p[1]}")
def run(request):
    return pipeline(*request.param)


def test_eigensystem_invariants(run):
    eig, s = run.eig, run.suite
    assert eig.N == run.forms.n_boundary
    gram = eig.modes.T @ run.forms.M @ eig.modes
    assert np.abs(gram - np.eye(eig.N)).max() <= 1e-9
    resid = s.core.matrix @ eig.modes - eig.modes * eig.kappa**2
    per_mode = np.sqrt(np.einsum("ij,ik,kj->j", resid, run.forms.M, resid))
    assert per_mode.max() <= 1e-9
    assert np.all(eig.kappa > 0) and np.all(eig.kappa <= 1)
    assert np.all(np.diff(eig.kappa) <= 0)


def test_sign_convention(run):
    modes = run.eig.modes
    idx = np.argmax(np.abs(modes), axis=0)
    assert np.all(modes[idx, np.arange(modes.shape[1])] > 0)


def test_kappa_matches_pencil_oracle(run):
    m, f = run.mesh, run.forms
    oracle = kappa_from_pencil(f.A, f.M, f.Mb, m.boundary_nodes)
    assert np.abs(run.eig.kappa - oracle).max() <= 1e-12


@pytest.mark.parametrize("domain, frozen", [("unit_square", KAPPA_UNIT_SQUARE_2), ("l_shape", KAPPA_L_SHAPE_2)])
def test_kappa_frozen_values(domain, frozen):
    assert np.abs(pipeline(domain, 2).eig.kappa - frozen).max() <= 1e-12


def test_clusters():
    assert [list(c) for c in eigen_clusters(np.array([3.0, 3.0 + 1e-12, 2.0, 1.0]))] == [[0, 1], [2], [3]]
    assert eigen_clusters(np.array([])) == []


def test_hs_norm_examples(run):
    eig = run.eig
    v = harmonic_lift(run.forms, np.random.default_rng(0).standard_normal(run.forms.n_boundary))
    assert hs_norm(v, 0.0, eig) == pytest.approx(run.suite.l2_omega.norm(v), rel=1e-10)
    for s in (0.0, 0.3, 1.0):
        assert hs_norm(eig.modes[:, 0], s, eig) == pytest.approx(eig.kappa[0] ** (-2 * s), rel=1e-10)


def test_hs_norm_half_matches_coefficients(run):
    rng = np.random.default_rng(1)
    for _ in range(5):
        g = rng.standard_normal(run.forms.n_boundary)
        c = run.pair.analysis("g") @ g
        v = harmonic_lift(run.forms, g)
        assert abs(hs_norm(v, 0.5, run.eig) ** 2 - np.sum(c**2)) <= 1e-9 * max(1.0, np.sum(c**2))
        # the s = 1 sum equals sum kappa^-2 <g, g_n>^2
        assert hs_norm(v, 1.0, run.eig) ** 2 == pytest.approx(np.sum(c**2 / run.eig.kappa**2), rel=1e-9)


def test_hs_norm_properties(run):
    eig = run.eig
    v = harmonic_lift(run.forms, np.random.default_rng(2).standard_normal(run.forms.n_boundary))
    # Parseval
    c = eig.coefficients(v)
    assert abs(run.suite.l2_omega.norm(v) ** 2 - np.sum(c**2)) <= 1e-9 * np.sum(c**2)
    vals = [hs_norm(v, s, eig) for s in np.linspace(0, 1, 11)]
    assert np.all(np.diff(vals) >= -1e-12)
    assert vals[5] ** 2 <= vals[0] * vals[-1] * (1 + 1e-12)


def test_hs_norm_rejects_non_harmonic(run):
    f = run.forms
    if len(f.interior) == 0:
        pytest.skip("no interior nodes")
    bump = np.zeros(f.n_nodes)
    bump[f.interior[0]] = 1.0
    assert span_residual(bump, run.eig) > 1e-8
    with pytest.raises(OutsideHarmonicSpanError):
        hs_norm(bump, 0.5, run.eig)
    with pytest.raises(ValueError):
        hs_norm(run.eig.modes[:, 0], 1.5, run.eig)


def test_h1_equivalence(run):
    lo, hi = h1_equivalence_check(run.suite, run.eig, sample_count=50)
    assert 0 < lo <= hi < np.inf
    # the ratio is sqrt(1 + ||v||_M^2 / ||v||_S^2), so it is at least 1 and the
    # constant sample attains sqrt(1 + area / perimeter)
    assert lo >= 1 - 1e-12
    const = np.sqrt(1 + run.mesh.area() / run.mesh.perimeter())
    assert lo - 1e-12 <= const <= hi + 1e-12


def test_h1_equivalence_drift():
    intervals = [h1_equivalence_check(pipeline("unit_square", n).suite, pipeline("unit_square", n).eig)
                 for n in (8, 16, 32)]
    lows, highs = np.array(intervals).T
    assert lows.max() / lows.min() < 2 and highs.max() / highs.min() < 2


def test_s_one_norm_identity_for_harmonic(run):
    # hs_norm(v, 1)^2 = ||v||_M^2 + ||v||_S^2 on discrete harmonic functions
    f = run.forms
    v = harmonic_lift(f, np.random.default_rng(3).standard_normal(f.n_boundary))
    lhs = hs_norm(v, 1.0, run.eig) ** 2
    assert lhs == pytest.approx(v @ f.M @ v + v @ f.S @ v, rel=1e-9)


def test_spectrum_table(run):
    table = spectrum_table(run.eig)
    assert [row[0] for row in table] == list(range(1, run.eig.N + 1))
    assert all(row[2] == pytest.approx(row[1] ** 2) for row in table)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 1.0))
def test_hs_norm_of_lift_matches_solution(seed, s):
    run = pipeline("unit_square", 4)
    g = np.random.default_rng(seed).standard_normal(run.forms.n_boundary)
    sol = very_weak_solve(g, run.pair, run.eig)
    coeff = sol.coefficients * run.eig.kappa
    expected = np.sqrt(np.sum(run.eig.kappa ** (-4 * s) * coeff**2))
    assert hs_norm(sol.field, s, run.eig) == pytest.approx(expected, rel=1e-9)
