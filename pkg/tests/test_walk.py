import numpy as np
import pytest

from causalab.errors import BracketTooWide, ExcessiveBoundaryHits, TruncationTooShallow
from causalab.maps import build_causal, build_cautrig
from causalab.offspring import make_geometric_critical
from causalab.trees import decode, sample_gw, sample_kesten
from causalab.walk import (
    dyadic_window,
    estimate_ds,
    estimate_nu,
    exact_kernel,
    mc_walk,
    transition_vector,
    vc_check,
)

from oracles import halfline_return

GEO = make_geometric_critical()


def path_map(length):
    return build_causal(decode("1 " * length + "0"))


def dense_transition(m):
    n = m.n_vertices
    P = np.zeros((n, n))
    for u, v in m.edges:
        P[u, v] += 1
        P[v, u] += 1
    return P / P.sum(axis=1, keepdims=True)


def finite_maps(n, seed, cap=400):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        t = sample_gw(GEO, 30, 10**6, rng)
        if t.truncated_at is None and 3 <= t.n_vertices <= cap:
            out.append(build_causal(t))
    return out


def test_first_return_probabilities():
    m = build_causal(decode("5 0 0 0 0 0"))
    s = exact_kernel(m, 4)
    assert s.p_return[0] == 1.0
    assert s.p_return[1] == 0.0
    # every child has degree three
    assert s.p_return[2] == pytest.approx(1 / 3, abs=1e-15)


def test_matches_dense_powers():
    for m in finite_maps(20, 0):
        P = dense_transition(m)
        s = exact_kernel(m, 40)
        Pt = np.eye(m.n_vertices)
        for t in range(41):
            assert s.p_return[t] == pytest.approx(Pt[0, 0], abs=1e-13)
            Pt = Pt @ P
        assert np.all(s.escaped == 0)


def test_halfline():
    ref = halfline_return(200)
    s = exact_kernel(path_map(400), 200)
    assert np.allclose(s.p_return, ref, atol=1e-15)
    assert np.allclose(s.even(np.arange(101)), ref[::2], atol=1e-14)


def test_even_kernel_uses_reversibility():
    t = sample_kesten(GEO, 60, 10**6, np.random.default_rng(1))
    s = exact_kernel(build_causal(t), 50)
    ns = np.arange(26)
    assert np.allclose(s.even(ns), s.p_return[2 * ns], rtol=1e-10, atol=1e-15)


def test_monotone_and_log_convex():
    t = sample_kesten(GEO, 200, 10**7, np.random.default_rng(2))
    s = exact_kernel(build_cautrig(t), 2000)
    p = s.even(np.arange(1, 1001))
    assert np.all(np.diff(p) <= 1e-15)
    lp = np.log(p)
    assert np.all(lp[:-2] + lp[2:] - 2 * lp[1:-1] >= -1e-10)


def test_mass_is_conserved():
    t = sample_kesten(GEO, 30, 10**6, np.random.default_rng(3))
    s = exact_kernel(build_causal(t), 500, H=12)
    assert np.allclose(s.surviving + s.escaped, 1.0, atol=1e-12)
    assert np.all(np.diff(s.escaped) >= 0)
    assert s.escaped[-1] > 0
    with pytest.raises(TruncationTooShallow):
        exact_kernel(build_causal(t), 10, H=31)


def test_transition_vector_normalised_and_reversible():
    t = sample_kesten(GEO, 50, 10**6, np.random.default_rng(4))
    m = build_causal(t)
    deg = m.degree
    p = transition_vector(m, 0, 20)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    for x in np.nonzero(p)[0][:15]:
        back = transition_vector(m, int(x), 20)[0]
        assert deg[0] * p[x] == pytest.approx(deg[x] * back, rel=1e-10)
    with pytest.raises(TruncationTooShallow):
        transition_vector(m, 0, 60)


def test_halfline_spectral_dimension():
    s = exact_kernel(path_map(5000), 2**12)
    est = estimate_ds(s, window=(2**6, 2**11))
    assert est.value == pytest.approx(1.0, abs=0.02)


def test_bracket_too_wide():
    t = sample_kesten(GEO, 10, 10**6, np.random.default_rng(5))
    s = exact_kernel(build_causal(t), 2**10)
    with pytest.raises(BracketTooWide):
        estimate_ds(s, window=(2**4, 2**9))


def test_annealed_equals_quenched_for_one_map():
    s = exact_kernel(path_map(3000), 2**10)
    q = estimate_ds(s, window=(2**4, 2**9))
    a = estimate_ds([s, s], window=(2**4, 2**9), variant="annealed")
    assert a.value == pytest.approx(q.value, rel=1e-12)


def test_walkers_on_star():
    m = build_causal(decode("4 0 0 0 0"))
    st = mc_walk(m, 1, 50, np.random.default_rng(6))
    assert np.all(st.displacement[:, -1] == 1)
    assert st.boundary_rate == 0.0


def test_halfline_displacement_exponent():
    m = path_map(20_000)
    st = mc_walk(m, 2**12, 4000, np.random.default_rng(7))
    est = estimate_nu(st, window=(2**4, 2**12))
    assert est.value == pytest.approx(0.5, abs=0.05)


def test_boundary_hits_raise():
    t = sample_kesten(GEO, 4, 10**6, np.random.default_rng(8))
    with pytest.raises(ExcessiveBoundaryHits):
        mc_walk(build_causal(t), 500, 100, np.random.default_rng(9))


def test_dyadic_window():
    assert list(dyadic_window(2**3, 2**6)) == [8, 16, 32, 64]


def test_varopoulos_carne_holds():
    rng = np.random.default_rng(10)
    for _ in range(3):
        t = sample_kesten(GEO, 130, 10**7, rng)
        rep = vc_check(build_cautrig(t), 128)
        assert rep.passed and rep.max_excess <= 0
    with pytest.raises(TruncationTooShallow):
        vc_check(build_causal(t), 200)


def test_bracket_negligible_with_deep_truncation():
    n = 2**12
    H = int(np.ceil(4 * np.sqrt(n * np.log(n))))
    rng = np.random.default_rng(11)
    for _ in range(5):
        s = exact_kernel(build_causal(sample_kesten(GEO, H + 1, 10**7, rng)), n, H=H)
        assert s.escaped[-1] < 1e-12
