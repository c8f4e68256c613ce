import numpy as np
import pytest

from causalab.errors import TruncationTooShallow
from causalab.maps import build_causal, build_cautrig
from causalab.metric import (
    ball_volume,
    ball_volumes,
    distance,
    distance_field,
    girth_at_height,
    girth_bruteforce,
    girth_certificate,
    sample_girth_certificate,
)
from causalab.offspring import make_geometric_critical, make_stable
from causalab.trees import decode, sample_kesten

from oracles import all_pairs_max, bfs_heights, causal_graph

GEO = make_geometric_critical()


def test_distance_on_small_tree():
    m = build_causal(decode("3 0 1 0 0"))
    assert distance(m, 0, 4) == 2
    assert distance(m, 1, 3) == 1  # cyclic level of size three
    assert distance(m, 2, 2) == 0


def test_distance_field_matches_networkx():
    rng = np.random.default_rng(0)
    for _ in range(30):
        t = sample_kesten(GEO, 20, 10**6, rng)
        m = build_causal(t)
        g = causal_graph(t.child_counts)
        src = int(rng.integers(m.n_vertices))
        ref = bfs_heights(g, src)
        f = distance_field(m, src)
        assert all(f.dist[v] == ref[v] for v in range(m.n_vertices))
        cut = distance_field(m, src, radius=3)
        assert np.all((cut.dist == -1) == (f.dist > 3))


def test_ball_volume_is_prefix_count():
    t = sample_kesten(GEO, 30, 10**6, np.random.default_rng(1))
    m = build_causal(t)
    d = bfs_heights(causal_graph(t.child_counts), 0)
    for r in (0, 1, 5, 17, 30):
        assert ball_volume(m, r) == sum(1 for v in d.values() if v <= r)
    assert list(ball_volumes(m, [0, 1])) == [1, 1 + t.child_counts[0]]
    with pytest.raises(TruncationTooShallow):
        ball_volume(m, 31)


def test_girth_matches_bruteforce():
    rng = np.random.default_rng(2)
    for _ in range(100):
        r = int(rng.integers(1, 16))
        t = sample_kesten(GEO, 2 * r, 10**6, rng)
        for m in (build_causal(t), build_cautrig(t)):
            res = girth_at_height(m, r)
            assert res.exact
            assert res.girth == girth_bruteforce(m, r)
            assert res.level_size == m.level_size(r)
            assert res.girth <= 2 * r


def test_girth_against_networkx():
    rng = np.random.default_rng(3)
    for _ in range(20):
        r = int(rng.integers(1, 10))
        t = sample_kesten(GEO, 2 * r, 10**6, rng)
        g = causal_graph(t.child_counts)
        lev = [v for v, h in bfs_heights(g, 0).items() if h == r]
        assert girth_at_height(build_causal(t), r).girth == all_pairs_max(g, lev)


def test_girth_lower_mode_is_a_lower_bound():
    rng = np.random.default_rng(4)
    for _ in range(30):
        t = sample_kesten(GEO, 24, 10**6, rng)
        m = build_causal(t)
        lower = girth_at_height(m, 12, mode="lower", sources=3, rng=rng)
        assert not lower.exact
        assert lower.girth <= girth_at_height(m, 12).girth


def test_girth_small_levels():
    m = build_causal(decode("1 1 0"))
    assert girth_at_height(m, 1).girth == 0
    m = build_causal(decode("3 0 0 0"))
    assert girth_at_height(m, 1).girth == 1


def test_girth_needs_prefix():
    t = sample_kesten(GEO, 10, 10**6, np.random.default_rng(5))
    with pytest.raises(TruncationTooShallow):
        girth_at_height(build_causal(t), 6)
    with pytest.raises(ValueError):
        girth_at_height(build_causal(t), 5, mode="median")



def test_capped_girth_needs_only_a_band():
    rng = np.random.default_rng(6)
    for _ in range(60):
        r = int(rng.integers(4, 14))
        cap = int(rng.integers(1, r + 1))
        t = sample_kesten(GEO, 2 * r, 10**6, rng)
        full = girth_at_height(build_causal(t), r).girth
        short = build_causal(t.truncated(r + (cap + 1) // 2))
        res = girth_at_height(short, r, cap=cap)
        assert res.girth == min(full, cap)
        assert res.exact == (full < cap)


def test_certificate_is_a_lower_bound():
    rng = np.random.default_rng(7)
    for _ in range(150):
        r = int(rng.integers(3, 25))
        cap = int(rng.integers(1, r + 1))
        t = sample_kesten(GEO, 2 * r, 10**6, rng)
        assert girth_certificate(t, r, cap) <= min(girth_at_height(build_causal(t), r).girth, cap)


def test_sampled_certificate_matches_tree_law():
    # without thinning the count-only sampler has the law of the tree statistic
    r, cap, n = 12, 7, 4000
    rng = np.random.default_rng(8)
    from_trees = np.array([girth_certificate(sample_kesten(GEO, r + 3, 10**6, rng), r, cap) for _ in range(n)])
    direct = np.array([sample_girth_certificate(GEO, r, cap, rng, level_cap=10**9) for _ in range(n)])
    for v in range(cap + 1):
        p, q = np.mean(from_trees == v), np.mean(direct == v)
        se = np.sqrt((p * (1 - p) + q * (1 - q)) / n) + 1e-9
        assert abs(p - q) <= 4 * se


def test_thinning_only_lowers_the_certificate():
    law = make_stable(1.3, 0.3)
    a = [sample_girth_certificate(law, 64, 4, np.random.default_rng(s), level_cap=10) for s in range(200)]
    b = [sample_girth_certificate(law, 64, 4, np.random.default_rng(s), level_cap=10**4) for s in range(200)]
    assert np.mean(a) <= np.mean(b)
