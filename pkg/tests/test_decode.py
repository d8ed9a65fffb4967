import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knnmt.bm25 import build_index, search
from knnmt.corpus import BOS, EOS
from knnmt.datastore import Datastore, build_store
from knnmt.decode import BeamHyp, beam_search, decode, default_max_len, greedy, sentence_store, translate, translate_bare
from knnmt.interp import DistanceAware, Fixed, KnnConfig, Trainable, knn_step


def reference_greedy(next_dist, max_len):
    """Independent argmax loop: python max over (prob, -id) picks the lowest id on ties."""
    prefix = [BOS]
    for _ in range(max_len):
        p = next_dist(prefix)
        tok = max(range(len(p)), key=lambda i: (p[i], -i))
        if tok == EOS:
            break
        prefix.append(tok)
    return prefix[1:]


def table_model(table: dict, vocab_size: int):
    """next_dist from a {prefix tuple: {token: prob}} table; unlisted prefixes emit EOS."""

    def next_dist(prefix):
        p = np.zeros(vocab_size)
        for tok, prob in table.get(tuple(prefix), {EOS: 1.0}).items():
            p[tok] = prob
        return p

    return next_dist


class TestGreedy:
    def test_tie_goes_to_lowest_id(self):
        nd = table_model({(BOS,): {7: 0.5, 5: 0.5}}, 10)
        assert greedy(nd, 5).output() == [5]

    def test_truncated_at_max_len(self):
        nd = table_model({(BOS,): {4: 1.0}, (BOS, 4): {4: 1.0}, (BOS, 4, 4): {4: 1.0}}, 6)
        h = greedy(nd, 2)
        assert h.output() == [4, 4] and not h.finished

    def test_logprob(self):
        nd = table_model({(BOS,): {4: 0.6, 5: 0.4}, (BOS, 4): {EOS: 0.9, 5: 0.1}}, 6)
        h = greedy(nd, 10)
        assert h.finished and h.tokens == (BOS, 4, EOS)
        assert h.logprob == pytest.approx(math.log(0.6) + math.log(0.9))


class TestBeam:
    def test_finds_better_than_greedy(self):
        # greedy takes 4 (0.6) then is stuck with 0.5; 5 (0.4) leads to a certain EOS
        table = {
            (BOS,): {4: 0.6, 5: 0.4},
            (BOS, 4): {6: 0.5, 7: 0.5},
            (BOS, 5): {EOS: 1.0},
            (BOS, 4, 6): {EOS: 1.0},
            (BOS, 4, 7): {EOS: 1.0},
        }
        nd = table_model(table, 10)
        assert greedy(nd, 10).output() == [4, 6]
        best = decode(nd, 2, 10)
        assert best.output() == [5]
        assert best.logprob == pytest.approx(math.log(0.4))

    def test_anchor_keeps_greedy_when_pruned(self):
        # after two steps the greedy prefix (4, 7) scores 0.187 while (5, 9)
        # and (5, 10) score 0.225, so a width-2 beam drops it; both survivors
        # then spread over ten tokens and finish at 0.0225
        spread = {t: 0.1 for t in range(10, 20)}
        table = {
            (BOS,): {4: 0.55, 5: 0.45},
            (BOS, 4): {7: 0.34, 8: 0.33, 9: 0.33},
            (BOS, 5): {9: 0.5, 10: 0.5},
            (BOS, 5, 9): spread,
            (BOS, 5, 10): spread,
        }
        nd = table_model(table, 20)
        g = greedy(nd, 10)
        plain = beam_search(nd, 2, 10)
        assert g.output() == [4, 7]
        assert plain.logprob < g.logprob
        anchored = decode(nd, 2, 10)
        assert anchored == g

    def test_finished_never_extended(self):
        calls = []

        def nd(prefix):
            assert prefix[-1] != EOS
            calls.append(tuple(prefix))
            return table_model({(BOS,): {EOS: 0.5, 4: 0.5}, (BOS, 4): {5: 1.0}}, 8)(prefix)

        h = decode(nd, 3, 6)
        assert all(c[-1] != EOS for c in calls)
        assert h.logprob <= 0

    def test_length_norm_prefers_longer(self):
        table = {
            (BOS,): {EOS: 0.45, 4: 0.55},
            (BOS, 4): {5: 0.9, 6: 0.1},
            (BOS, 4, 5): {6: 0.9, 7: 0.1},
            (BOS, 4, 5, 6): {EOS: 0.6, 7: 0.4},
        }
        nd = table_model(table, 10)
        assert decode(nd, 3, 10).output() == []
        assert decode(nd, 3, 10, length_norm=True).output() == [4, 5, 6]

    def test_bad_arguments(self):
        nd = table_model({}, 5)
        with pytest.raises(ValueError):
            decode(nd, 0, 5)
        with pytest.raises(ValueError):
            decode(nd, 2, 0)

    def test_output_strips_markers(self):
        assert BeamHyp((BOS, 4, 5, EOS), -1.0, True).output() == [4, 5]
        assert BeamHyp((BOS, 4), -1.0, False).output() == [4]

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    def test_beam_not_worse_than_greedy_random_models(self, seed, beam):
        # random peaked distributions keyed on the last token only
        rng = np.random.default_rng(seed)
        v = 8
        logits = rng.standard_normal((v, v)) * 3
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)

        def nd(prefix):
            return probs[prefix[-1]]

        g = greedy(nd, 12)
        b = decode(nd, beam, 12)
        if g.finished and b.finished:
            assert b.logprob >= g.logprob - 1e-12


class TestTranslate:
    def test_beam1_matches_reference_greedy(self, small_domain):
        d = small_domain
        cfg = KnnConfig()
        for src, _ in d.test_b.pairs:
            store = build_store(d.model, search(d.index, src), d.ref_b)

            def nd(prefix):
                return knn_step(d.model, store, src, prefix, cfg).p_final

            want = reference_greedy(nd, default_max_len(src))
            assert translate(d.model, d.index, d.ref_b, src, cfg, beam=1) == want

    @pytest.mark.parametrize("beam", [1, 5])
    def test_empty_retrieval_is_bare(self, small_domain, beam):
        d = small_domain
        cfg = KnnConfig(policy=Fixed(0.9))
        empty_index = build_index(d.ref_b.__class__([((3,), (EOS,))], d.vocab))
        for src, _ in d.test_b.pairs[:20]:
            bare = translate_bare(d.model, src, beam)
            assert translate(d.model, None, None, src, cfg, beam) == bare
            assert translate(d.model, empty_index, d.ref_b, src, cfg, beam) == bare

    def test_point_mass_model_beam_invariant(self, small_domain):
        # every step's interpolated distribution is a point mass on the gold
        # token when lambda is fixed at 1 and the store holds only the gold pair
        d = small_domain
        cfg = KnnConfig(k=1, policy=Fixed(1.0))
        for src, tgt in d.ref_b.pairs[:20]:
            store = build_store(d.model, [search(d.index, src)[0]], d.ref_b)

            def nd(prefix):
                return knn_step(d.model, store, src, prefix, cfg).p_final

            assert decode(nd, 1, 50).output() == decode(nd, 5, 50).output() == list(tgt[:-1])

    def test_exact_copy(self, small_domain):
        d = small_domain
        index = build_index(d.test_b)
        cfg = KnnConfig(policy=DistanceAware(100))
        hits = sum(translate(d.model, index, d.test_b, s, cfg, beam=1) == list(t[:-1]) for s, t in d.test_b.pairs)
        assert hits == len(d.test_b)

    def test_beam_not_worse_than_greedy_knn(self, small_domain):
        d = small_domain
        for policy in (DistanceAware(100), Trainable(-0.01, 0.5)):
            cfg = KnnConfig(policy=policy)
            for src, _ in d.test_b.pairs:
                store = sentence_store(d.model, d.index, d.ref_b, src)

                def nd(prefix):
                    return knn_step(d.model, store, src, prefix, cfg).p_final

                g = greedy(nd, default_max_len(src))
                for b in (2, 3, 5):
                    h = decode(nd, b, default_max_len(src))
                    if g.finished and h.finished:
                        assert h.logprob >= g.logprob

    def test_max_len_cap(self, small_domain):
        d = small_domain
        src = d.test_b.pairs[0][0]
        assert len(translate(d.model, d.index, d.ref_b, src, KnnConfig(), beam=1, max_len=3)) <= 3

    def test_sentence_store_empty_inputs(self, small_domain):
        d = small_domain
        assert len(sentence_store(d.model, None, d.ref_b, [4])) == 0
        assert len(sentence_store(d.model, d.index, None, [4])) == 0
