import numpy as np
import pytest

from cqabench.errors import InsufficientCharts, TooLarge
from cqabench.fqa_select import (
    GibbsState,
    SamplerConfig,
    brute_force_subset,
    build_pool,
    gibbs_select,
    gibbs_select_multi,
    gibbs_step,
    summed_gap,
)

from conftest import corpus_from_bits, random_corpus


def test_homogeneous_corpus_converges_at_initialization():
    corpus = corpus_from_bits([[1, 0, 1, 0, 0, 1, 0, 1, 0, 0]] * 50)
    selected, rep = gibbs_select(corpus, SamplerConfig(target_size=10, rng_seed=3))
    assert len(selected) == 10
    assert rep.final_gaps == (0.0,) * 10
    assert rep.converged
    assert rep.iterations == 0


def test_insufficient_charts():
    corpus = corpus_from_bits([[0] * 10] * 3)
    with pytest.raises(InsufficientCharts):
        gibbs_select(corpus, SamplerConfig(target_size=5))


def test_selected_set_size_invariant_across_steps():
    corpus = random_corpus(60, seed=2)
    pool = build_pool(corpus)
    rng = np.random.default_rng(0)
    state = GibbsState(selected=tuple(pool.ids[:12]))
    for _ in range(100):
        state = gibbs_step(state, pool, rng)
        assert len(state.selected) == 12
        assert len(set(state.selected)) == 12


def test_step_deterministic_under_seed():
    corpus = random_corpus(40, seed=5)
    pool = build_pool(corpus)
    state = GibbsState(selected=tuple(pool.ids[:8]))
    a = gibbs_step(state, pool, np.random.default_rng(77))
    b = gibbs_step(state, pool, np.random.default_rng(77))
    assert a == b


def test_step_no_candidate_leaves_state_unchanged():
    # only one chart outside S and its bits cannot satisfy either zeta value
    # on some dimensions; craft so no candidate has bit k = zeta by making
    # the outsider equal to a member (already excluded by id, not bits) --
    # instead: every outside chart is IN S, i.e. S covers the corpus.
    corpus = corpus_from_bits([[0] * 10, [1] * 10])
    pool = build_pool(corpus)
    state = GibbsState(selected=tuple(pool.ids))
    nxt = gibbs_step(state, pool, np.random.default_rng(1))
    assert nxt.selected == state.selected
    assert nxt.iteration == 1


def test_step_pulls_in_exact_match():
    # S = {c0}; dimension draw will be some k with corpus marginal; craft a
    # corpus where exactly one outside chart has bit k = zeta and matches
    # the other nine bits of the replaced member; it must enter S whenever
    # the swap does not worsen the tracked gap. With all-zero corpus
    # marginals except dim 0 at 2/3, any zeta=1 draw on dim 0 can only
    # propose c1 (the only chart with bit 0 = 1 outside S).
    corpus = corpus_from_bits([
        [0] * 10,          # c0, in S
        [1] + [0] * 9,     # c1, the exact-match candidate on the other 9 dims
        [1] + [0] * 9,     # c2, same bits but higher id: tie-break goes to c1
    ])
    pool = build_pool(corpus)
    state = GibbsState(selected=(pool.ids[0],))
    rng = np.random.default_rng(4)
    seen_c1 = False
    for _ in range(30):
        nxt = gibbs_step(state, pool, rng)
        if nxt.selected != state.selected:
            assert nxt.selected == (pool.ids[1],)  # lowest-id tie-break
            seen_c1 = True
            break
        state = nxt
    assert seen_c1


def test_tracked_max_gap_non_increasing():
    corpus = random_corpus(80, seed=9)
    pool = build_pool(corpus)
    rng = np.random.default_rng(13)
    state = GibbsState(selected=tuple(pool.ids[:10]))
    prev = None
    for _ in range(200):
        state = gibbs_step(state, pool, rng)
        gaps = np.abs(
            pool.matrix[[pool.index[c] for c in state.selected]].mean(axis=0) - pool.marginals
        )
        cur = float(gaps.max())
        if prev is not None:
            assert cur <= prev + 1e-12
        prev = cur


def test_gibbs_select_reproducible():
    corpus = random_corpus(300, seed=21)
    cfg = SamplerConfig(target_size=40, rng_seed=17)
    a = gibbs_select(corpus, cfg)
    b = gibbs_select(corpus, cfg)
    assert a == b


def test_gaps_shrink_with_target_size():
    corpus = random_corpus(10000, probs=[0.7, 0.3, 0.5, 0.41, 0.78, 0.08, 0.47, 0.51, 0.35, 0.42], seed=123)
    gaps = []
    for size in (50, 200, 1000):
        _, rep = gibbs_select(corpus, SamplerConfig(target_size=size, rng_seed=5))
        gaps.append(rep.max_gap)
    assert gaps[0] >= gaps[1] >= gaps[2]


def test_small_instance_near_optimal():
    corpus = random_corpus(10, seed=33)
    selected, rep = gibbs_select_multi(corpus, SamplerConfig(target_size=4, rng_seed=0, max_iterations=200), chains=16)
    _, best_obj = brute_force_subset(corpus, 4)
    assert summed_gap(corpus, selected) <= best_obj + 0.1


def test_brute_force_full_corpus_is_exact():
    corpus = random_corpus(8, seed=40)
    ids, obj = brute_force_subset(corpus, 8)
    assert len(ids) == 8
    assert obj == pytest.approx(0.0)


def test_brute_force_counts_subsets():
    corpus = corpus_from_bits([[1, 0] * 5, [0, 1] * 5, [1] * 10, [0] * 10])
    ids, obj = brute_force_subset(corpus, 2)
    # C(4,2)=6 subsets; best is the complementary pair matching the mean
    assert len(ids) == 2
    best = summed_gap(corpus, ids)
    import itertools

    all_ids = [c.chart_id for c in corpus.charts()]
    for combo in itertools.combinations(all_ids, 2):
        assert best <= summed_gap(corpus, list(combo)) + 1e-12


def test_brute_force_too_large():
    corpus = random_corpus(21, seed=50)
    with pytest.raises(TooLarge):
        brute_force_subset(corpus, 2)
    corpus = random_corpus(15, seed=51)
    with pytest.raises(TooLarge):
        brute_force_subset(corpus, 9)
