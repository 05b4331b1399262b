import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import instance_from_llr
from plm.cyclefinder import (BLUE, RED, AlternatingCycle, ConfigError, CycleFinderConfig, TreeParams,
                             build_trees, canonical_key, check_disjoint, cycle_from_sequence, dfs_long_cycle,
                             expand_cycle, exponential_thresholds, find_cycles, flip_cycle, hubs_disjoint,
                             many_cycles, sprinkle, verify_alternating)
from plm.dist import WeightDistribution, divergences, llr
from plm.match import reconstruction_error
from plm.model import generate_exponential, generate_sparse, generate_unweighted
from plm.posterior import exhaustive_posterior
from plm.rng import stream

NAN = math.nan


def _full(n, rng):
    # llr values above −log 2 keep the weights nonnegative
    return rng.uniform(-0.6, 2.0, size=(n, n))


def _complete_blue(n):
    return [np.asarray([j for j in range(n) if j != i], np.int64) for i in range(n)]


def _reserved(n, gamma, seed):
    return np.sort(stream(seed, "test-reserve").choice(n, size=int(gamma * n), replace=False))


# --- verify_alternating ------------------------------------------------------

def test_six_cycle_with_identity_planting():
    m = np.full((3, 3), NAN)
    np.fill_diagonal(m, 0.3)
    m[0, 1] = m[1, 2] = m[2, 0] = 0.1
    inst = instance_from_llr(m)
    seq = [("L", 0), ("R", 1), ("L", 1), ("R", 2), ("L", 2), ("R", 0)]
    rep = verify_alternating(seq, inst)
    assert rep.ok and rep.n_red == 3 and rep.n_blue == 3
    assert rep.delta == pytest.approx(3 * 0.1 - 3 * 0.3)


def test_odd_sequence_is_invalid():
    inst = instance_from_llr(np.zeros((3, 3)))
    assert not verify_alternating([("L", 0), ("R", 1), ("L", 1), ("R", 0), ("L", 2)], inst).ok


def test_absent_blue_pair_is_invalid():
    m = np.zeros((3, 3))
    m[2, 0] = NAN
    inst = instance_from_llr(m)
    rep = verify_alternating([("L", 0), ("R", 1), ("L", 1), ("R", 2), ("L", 2), ("R", 0)], inst)
    assert not rep.ok and "absent" in rep.reason


def test_repeated_vertex_and_same_side_are_invalid():
    inst = instance_from_llr(np.zeros((3, 3)))
    assert not verify_alternating([("L", 0), ("R", 1), ("L", 0), ("R", 0)], inst).ok
    assert not verify_alternating([("L", 0), ("L", 1), ("R", 1), ("R", 0)], inst).ok


def test_wrong_color_label_is_reported():
    inst = instance_from_llr(np.zeros((2, 2)))
    seq = [("L", 0), ("R", 1), ("L", 1), ("R", 0)]
    assert verify_alternating(AlternatingCycle(seq, [BLUE, RED, BLUE, RED]), inst).ok
    assert not verify_alternating(AlternatingCycle(seq, [RED, BLUE, RED, BLUE]), inst).ok


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**31 - 1))
def test_canonical_key_ignores_rotation_and_direction(r, seed):
    rng = np.random.default_rng(seed)
    left = rng.permutation(20)[:r]
    right = rng.permutation(20)[:r]
    seq = [v for k in range(r) for v in (("L", int(left[k])), ("R", int(right[k])))]
    shift = int(rng.integers(len(seq)))
    rot = seq[shift:] + seq[:shift]
    assert canonical_key(rot) == canonical_key(seq) == canonical_key(seq[::-1])


# --- flips against the posterior ---------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_flip_error_and_posterior_ratio(n, seed):
    rng = np.random.default_rng(seed)
    inst = instance_from_llr(_full(n, rng), rng.permutation(n))
    r = int(rng.integers(2, n + 1))
    left = rng.permutation(n)[:r]
    seq = []
    for k in range(r):
        seq += [("L", int(left[k])), ("R", int(inst.planted[left[(k + 1) % r]]))]
    cyc = cycle_from_sequence(seq, inst)
    rep = verify_alternating(cyc, inst)
    assert rep.ok, rep.reason
    perm = flip_cycle(cyc, inst.planted)
    assert reconstruction_error(perm, inst.planted) == pytest.approx(len(cyc) / n)
    table = exhaustive_posterior(inst)
    ratio = table.log_mass_of(perm) - table.log_mass_of(inst.planted)
    assert ratio == pytest.approx(rep.delta, abs=1e-9)


# --- trees -------------------------------------------------------------------

def test_unweighted_trees_keep_every_vertex():
    inst = generate_unweighted(4000, 4.0, 3)
    p = TreeParams.unweighted(4.0, size_cap=16)
    assert not p.select
    res = _reserved(inst.n, p.gamma, 3)
    forest = build_trees(inst, res, p)
    assert len(forest) > 0
    for t in forest:
        assert set(t.L.tolist()) == set(t.left_parent)
        assert set(t.R_pairs.tolist()) == set(t.right_parent)
        assert np.array_equal(t.R, inst.planted[t.R_pairs])
        assert len(t.left_parent) <= p.size_cap and len(t.right_parent) <= p.size_cap
    assert check_disjoint(forest, res)


def test_unbounded_below_threshold_selects_all_depth_two_leaves():
    p_, q_ = WeightDistribution.exponential(2.0), WeightDistribution.exponential(1.0)
    inst = generate_sparse(3000, 3.0, p_, q_, 5)
    p = TreeParams(gamma=0.3, zeta=-math.inf, H=1, L=1, eps=0.5, m=40)
    forest = build_trees(inst, _reserved(inst.n, p.gamma, 5), p)
    live = [t for t in forest if not t.terminated]
    assert live
    for t in live:
        assert t.selected == t.candidates
        depth1 = [q for q, par in t.left_parent.items() if par == t.root]
        assert sorted(t.L.tolist()) == sorted(depth1)


def test_tree_paths_alternate_and_carry_delta():
    p_, q_ = WeightDistribution.exponential(2.0), WeightDistribution.exponential(1.0)
    inst = generate_sparse(3000, 4.0, p_, q_, 11)
    p = TreeParams(gamma=0.3, zeta=-math.inf, H=2, L=1, eps=0.5, m=60)
    forest = build_trees(inst, _reserved(inst.n, p.gamma, 11), p)
    checked = 0
    for t in forest:
        if t.terminated or not len(t.L) or not len(t.R_pairs):
            continue
        path = t.path_vertices(int(t.R_pairs[0]), int(t.L[0]), inst.planted)
        red = sum(-float(llr(p_, q_, inst.weight(i[1], j[1]))) for i, j in zip(path[1::2], path[0::2]))
        blue = sum(float(llr(p_, q_, inst.weight(i[1], j[1]))) for i, j in zip(path[1:-1:2], path[2::2]))
        assert path[0][0] == "R" and path[-1][0] == "L"
        assert t.path_delta(int(t.R_pairs[0]), int(t.L[0])) == pytest.approx(red + blue, abs=1e-9)
        checked += 1
    assert checked > 0


def test_weighted_trees_use_exactly_m_pairs_per_side():
    p_, q_ = WeightDistribution.exponential(2.0), WeightDistribution.exponential(1.0)
    inst = generate_sparse(4000, 3.0, p_, q_, 2)
    p = TreeParams(gamma=0.3, zeta=0.2, H=2, L=2, eps=0.5, m=30)
    res = _reserved(inst.n, p.gamma, 2)
    forest = build_trees(inst, res, p)
    assert len(forest) == forest.planned == int(p.gamma * inst.n) // (2 * 30)
    for t in forest:
        assert len(t.pairs()) == 2 * 30
        assert t.left_used == t.right_used == 30
    assert check_disjoint(forest, res)


def test_budget_caps_m_and_counts_unexplored():
    p_, q_ = WeightDistribution.exponential(2.0), WeightDistribution.exponential(1.0)
    inst = generate_sparse(200, 3.0, p_, q_, 2)
    p = TreeParams(gamma=0.45, zeta=0.2, H=2, L=2, eps=0.5, m=1000)
    forest = build_trees(inst, _reserved(inst.n, p.gamma, 2), p)
    # m is capped at ⌊γn⌋/2 so that one tree still fits
    assert forest.m == 45 and len(forest) == forest.planned == 1
    assert not forest.exhausted and forest.unexplored_left == 200 - 90 - 90


def test_reserved_size_is_enforced():
    inst = generate_unweighted(100, 4.0, 0)
    with pytest.raises(ValueError):
        build_trees(inst, [1, 2, 3], TreeParams.unweighted(4.0))


def test_selection_rate_matches_direct_simulation():
    # selection at depth H keeps a leaf iff the sum of H blue-minus-red llr steps is ≥ ζH
    p_, q_ = WeightDistribution.exponential(2.0), WeightDistribution.exponential(1.0)
    H, zeta = 2, 0.25
    rng = np.random.default_rng(123)
    x = llr(p_, q_, p_.sample(rng, (400_000, H))).sum(axis=1)
    y = llr(p_, q_, q_.sample(rng, (400_000, H))).sum(axis=1)
    p_sel = float(np.mean(y - x >= zeta * H))

    cand, sel = [], []
    for seed in range(4):
        inst = generate_sparse(40_000, 3.0, p_, q_, 100 + seed)
        p = TreeParams(gamma=0.45, zeta=zeta, H=H, L=1, eps=0.5, m=60)
        for t in build_trees(inst, _reserved(inst.n, p.gamma, seed), p):
            if t.candidates:
                cand.append(t.candidates)
                sel.append(t.selected)
    cand, sel = np.asarray(cand, float), np.asarray(sel, float)
    rate = sel.sum() / cand.sum()
    # ratio estimator with per-tree clusters
    resid = sel - rate * cand
    se = math.sqrt(np.sum(resid**2)) / cand.sum()
    assert abs(rate - p_sel) <= 3 * se + 3 * math.sqrt(p_sel * (1 - p_sel) / 400_000)


# --- sprinkling --------------------------------------------------------------

def _weighted_setup(seed, n=50_000):
    lam, d, H, L, c = 2.0, 40.0, 1, 2, 0.3
    P, Q = WeightDistribution.exponential(lam), WeightDistribution.exponential(1.0)
    tau_red = math.log(lam)
    cfg = CycleFinderConfig(
        trees=TreeParams(gamma=0.35, zeta=12 * c / (4 * H * L), H=H, L=L, eps=0.3,
                         alpha=divergences(P, Q).alpha, m=100),
        tau_red=tau_red, tau_blue=tau_red - c, s=2)
    return generate_sparse(n, d, P, Q, seed), cfg


def test_no_blue_edges_pass_gives_empty_super_graph():
    inst = generate_unweighted(2000, 4.0, 1)
    p = TreeParams.unweighted(4.0)
    res = _reserved(inst.n, p.gamma, 1)
    forest = build_trees(inst, res, p)
    sg = sprinkle(inst, forest, res, 0.0, 1.0)  # unweighted llr is 0 everywhere
    assert sg.K2 == 0 and not sg.witness
    assert all(len(b) == 0 for b in sg.blue)


def test_thresholds_must_be_finite():
    inst = generate_unweighted(200, 4.0, 1)
    p = TreeParams.unweighted(4.0)
    res = _reserved(inst.n, p.gamma, 1)
    with pytest.raises(ValueError):
        sprinkle(inst, build_trees(inst, res, p), res, 0.0, -math.inf)


def test_exponential_thresholds_keep_all_reserved_and_cut_by_weight():
    n, lam, tau = 3000, 2.0, 0.5
    inst = generate_exponential(n, lam, 4)
    tr, tb = exponential_thresholds(n, lam, tau)
    # V* = V: every red edge has llr ≤ log(nλ)
    red = inst.cols == inst.planted[inst.rows]
    vals = llr(inst.P, inst.Q, inst.weights)
    assert np.all(vals[red] <= tr)
    blue = ~red
    assert np.array_equal(vals[blue] >= tb, inst.weights[blue] <= tau + 1e-12)
    p = TreeParams(gamma=0.3, zeta=0.1, H=1, L=1, eps=0.5, m=20)
    res = _reserved(n, p.gamma, 4)
    sg = sprinkle(inst, build_trees(inst, res, p), res, tr, tb)
    assert np.array_equal(sg.v_star, res)


def test_hubs_and_super_degree():
    inst, cfg = _weighted_setup(0)
    res = find_cycles(inst, cfg, 0)
    sg = res.super_graph
    assert sg.K2 >= 2
    assert hubs_disjoint(sg)
    assert all(len(u) >= sg.b and len(v) >= sg.b for u, v in zip(sg.U, sg.V))
    # a blue super edge comes with a witness joining the right hub sets
    for (a, c), (u, q) in sg.witness.items():
        assert u in sg.U[a] and q in sg.V[c] and c in sg.blue[a]
    pairs = sg.K2 * (sg.K2 - 1)
    edges = sum(len(b) for b in sg.blue)
    assert edges / pairs >= sg.d_super / sg.K2


# --- DFS and many_cycles -----------------------------------------------------

@pytest.mark.parametrize("n", [4, 9, 40, 200])
def test_dfs_on_complete_graph_is_long(n):
    cyc = dfs_long_cycle(_complete_blue(n))
    assert cyc is not None
    assert len(cyc) // 2 >= 3 * n / 4


def test_dfs_without_blue_edges_returns_none():
    assert dfs_long_cycle([np.zeros(0, np.int64) for _ in range(50)]) is None


def test_dfs_dense_random_graph():
    for seed in range(3):
        n = 1000
        rng = stream(seed, "dfs-test")
        blue = [np.flatnonzero(rng.random(n) < 0.9) for _ in range(n)]
        blue = [b[b != i] for i, b in enumerate(blue)]
        cyc = dfs_long_cycle(blue, None, 16.0)
        assert cyc is not None and len(cyc) // 2 >= 3 * n / 4


def test_dfs_cycles_are_alternating_on_pair_graph():
    rng = np.random.default_rng(7)
    n = 60
    blue = [np.flatnonzero(rng.random(n) < 0.2) for _ in range(n)]
    blue = [b[b != i] for i, b in enumerate(blue)]
    cyc = dfs_long_cycle(blue, None, 16.0)
    assert cyc is not None
    for i, j, color in cyc.edges():
        assert (i == j) == (color == RED)
        if color == BLUE:
            assert j in blue[i]


def test_many_cycles_counts():
    assert len(many_cycles(_complete_blue(30), 1, np.random.default_rng(0))) == 1
    cycs = many_cycles(_complete_blue(200), 50, np.random.default_rng(1), window_factor=16.0)
    assert len({c.key for c in cycs}) >= 45
    with pytest.raises(ValueError):
        many_cycles(_complete_blue(5), 0, np.random.default_rng(0))


# --- expansion ---------------------------------------------------------------

def _two_tree_instance():
    """Trees rooted at pairs 0 and 2 with left children 1 and 3; hubs 4..7 are reserved; pair 8 is idle."""
    n = 9
    m = np.full((n, n), NAN)
    np.fill_diagonal(m, 0.0)
    for i, j, v in [(0, 1, 0.1), (2, 3, 0.2),          # tree blues
                    (4, 0, 0.3), (1, 5, 0.4),          # hub stitches of tree A
                    (6, 2, 0.5), (3, 7, 0.6),          # hub stitches of tree B
                    (5, 6, 0.7), (7, 4, 0.8)]:         # sprinkled blues between the trees
        m[i, j] = v
    return instance_from_llr(m)


def test_two_tree_expansion_gives_sixteen_edge_cycle():
    inst = _two_tree_instance()
    p = TreeParams(gamma=0.45, zeta=0.0, H=1, L=1, eps=1.0, select=False, size_cap=2)
    res = np.array([4, 5, 6, 7])
    forest = build_trees(inst, res, p)
    assert [t.root for t in forest] == [0, 2]
    sg = sprinkle(inst, forest, res, 0.0, 0.0)
    assert sg.K2 == 2 and hubs_disjoint(sg)
    c_super = dfs_long_cycle(sg.blue)
    assert c_super is not None and len(c_super) == 4
    cyc, delta = expand_cycle(c_super, forest, sg, inst.planted)
    rep = verify_alternating(cyc, inst)
    assert rep.ok, rep.reason
    assert len(cyc) == 16 and rep.n_red == rep.n_blue == 8
    assert delta == pytest.approx(rep.delta, abs=1e-9)
    assert rep.delta == pytest.approx(0.1 + 0.2 + 0.3 + 0.4 + 0.5 + 0.6 + 0.7 + 0.8)


def test_super_self_loop_is_rejected():
    inst = _two_tree_instance()
    p = TreeParams(gamma=0.45, zeta=0.0, H=1, L=1, eps=1.0, select=False, size_cap=2)
    res = np.array([4, 5, 6, 7])
    forest = build_trees(inst, res, p)
    sg = sprinkle(inst, forest, res, 0.0, 0.0)
    loop = AlternatingCycle([("R", 0), ("L", 0)], [RED, BLUE])
    with pytest.raises(ValueError):
        expand_cycle(loop, forest, sg, inst.planted)


@pytest.mark.parametrize("seed", [0, 1])
def test_weighted_pipeline_cycles_are_augmenting(seed):
    inst, cfg = _weighted_setup(seed)
    res = find_cycles(inst, cfg, seed)
    assert res.cycles and res.rejected == 0
    sg = res.super_graph
    for c in res.cycles:
        rep = verify_alternating(c, inst)
        assert rep.ok and rep.delta > 0
        assert c.delta == pytest.approx(rep.delta, abs=1e-9)
    # incremental bookkeeping agrees with the from-scratch Δ
    c_super = dfs_long_cycle(sg.blue, None, cfg.window_factor)
    cyc, delta = expand_cycle(c_super, res.forest, sg, inst.planted)
    assert delta == pytest.approx(verify_alternating(cyc, inst).delta, abs=1e-9)


def test_unweighted_pipeline_finds_long_cycle():
    inst = generate_unweighted(20_000, 4.0, 0)
    cfg = CycleFinderConfig(trees=TreeParams.unweighted(4.0), tau_red=0.0, tau_blue=0.0)
    res = find_cycles(inst, cfg, 0)
    assert res.cycles
    assert max(len(c) for c in res.cycles) >= 0.001 * inst.n
    for c in res.cycles:
        assert verify_alternating(c, inst).ok
        flip_cycle(c, inst.planted)


def test_config_validation():
    tp = TreeParams(zeta=0.1, H=1, L=1)
    with pytest.raises(ConfigError):
        CycleFinderConfig(trees=tp, tau_red=1.0, tau_blue=0.0).validate()
    CycleFinderConfig(trees=TreeParams(zeta=3.0, H=1, L=1), tau_red=1.0, tau_blue=0.0).validate()
    CycleFinderConfig(trees=TreeParams.unweighted(4.0), tau_red=1.0, tau_blue=0.0).validate()
