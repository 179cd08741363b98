import functools
import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bagselect import languages as lg
from bagselect import meanings as me
from bagselect.agents import Hyper, Speaker
from bagselect.meanings import Meaning

CONCAT = me.enumerate_meanings("concatenation")
BAG = me.enumerate_meanings("bag")


class TestLanguage:
    def test_totality_enforced(self):
        mapping = {m: (0, 0) for m in CONCAT.meanings[:-1]}
        with pytest.raises(ValueError):
            lg.Language(space=CONCAT, mapping=mapping)

    def test_invalid_symbol_rejected(self):
        mapping = {m: (0, 11) for m in CONCAT.meanings}
        with pytest.raises(ValueError):
            lg.Language(space=CONCAT, mapping=mapping)

    def test_json_round_trip(self, tmp_path):
        lang = lg.compositional_language(CONCAT)
        path = tmp_path / "lang.json"
        lang.dump(path)
        with open(path) as fh:
            loaded = lg.Language.from_json(json.load(fh), kind="concatenation")
        assert loaded.mapping == lang.mapping

    def test_json_alphabet(self):
        lang = lg.compositional_language(BAG)
        obj = lang.to_json()
        assert obj["alphabet"] == "abcdefghij"
        entry = {e["meaning"]: e["message"] for e in obj["language"]}
        assert entry["2A3B"] == "cd"

    def test_injectivity(self):
        comp = lg.compositional_language(CONCAT)
        assert comp.is_injective()
        mapping = dict(comp.mapping)
        mapping[Meaning(0, 0)] = mapping[Meaning(1, 1)]
        assert not lg.Language(space=CONCAT, mapping=mapping).is_injective()


class TestGenerators:
    def test_compositional_is_positional(self):
        lang = lg.compositional_language(CONCAT)
        for m in CONCAT.meanings:
            assert lang.message(m) == (m.count_a, m.count_b)

    def test_compositional_custom_assignments(self):
        lang = lg.compositional_language(CONCAT, assign_a=[5, 4, 3, 2, 1, 0],
                                         assign_b=[9, 8, 7, 6, 5, 4])
        assert lang.message(Meaning(0, 0)) == (5, 9)
        assert lang.is_injective()

    def test_compositional_bad_assignment(self):
        with pytest.raises(ValueError):
            lg.compositional_language(CONCAT, assign_a=[0, 0, 1, 2, 3, 4])

    def test_holistic_preserves_message_multiset(self, rng):
        comp = lg.compositional_language(CONCAT)
        hol = lg.holistic_language(comp, rng)
        assert sorted(hol.messages()) == sorted(comp.messages())
        assert hol.is_injective()

    def test_holistic_differs_from_source(self, rng):
        comp = lg.compositional_language(CONCAT)
        hol = lg.holistic_language(comp, rng)
        assert hol.mapping != comp.mapping


class TestDistances:
    def test_hamming_known_values(self):
        assert lg.hamming(Meaning(2, 3), Meaning(2, 3)) == 0
        assert lg.hamming(Meaning(2, 3), Meaning(2, 5)) == 1
        assert lg.hamming(Meaning(0, 0), Meaning(5, 5)) == 2

    def test_edit_distance_against_recursive_oracle(self):
        # acceptance: brute-force oracle over all 100 x 100 length-2 messages
        @functools.lru_cache(maxsize=None)
        def oracle(s1, s2):
            if not s1:
                return len(s2)
            if not s2:
                return len(s1)
            return min(oracle(s1[1:], s2) + 1,
                       oracle(s1, s2[1:]) + 1,
                       oracle(s1[1:], s2[1:]) + (s1[0] != s2[0]))

        msgs = list(itertools.product(range(10), repeat=2))
        for a in msgs:
            for b in msgs:
                assert lg.edit_distance(a, b) == oracle(a, b)

    def test_edit_distance_known_strings(self):
        assert lg.edit_distance("kitten", "sitting") == 3
        assert lg.edit_distance("", "abc") == 3
        assert lg.edit_distance((1, 2, 3), (1, 3)) == 1

    @given(st.lists(st.integers(0, 9), max_size=5),
           st.lists(st.integers(0, 9), max_size=5),
           st.lists(st.integers(0, 9), max_size=5))
    @settings(max_examples=100, deadline=None)
    def test_edit_distance_metric_axioms(self, a, b, c):
        a, b, c = tuple(a), tuple(b), tuple(c)
        assert lg.edit_distance(a, a) == 0
        assert lg.edit_distance(a, b) == lg.edit_distance(b, a)
        assert (lg.edit_distance(a, c)
                <= lg.edit_distance(a, b) + lg.edit_distance(b, c))


class TestTopologicalSimilarity:
    def test_compositional_rho_exactly_one(self):
        for space in (CONCAT, BAG):
            res = lg.topological_similarity(lg.compositional_language(space))
            assert res.rho == 1.0
            assert not res.degenerate

    def test_pair_count(self):
        n = len(CONCAT)
        res = lg.topological_similarity(lg.compositional_language(CONCAT))
        assert res.n_pairs == n * (n - 1) // 2

    def test_constant_language_degenerate(self):
        lang = lg.Language(space=CONCAT,
                           mapping={m: (7, 7) for m in CONCAT.meanings})
        res = lg.topological_similarity(lang)
        assert res.degenerate
        assert res.rho is None

    def test_holistic_mean_rho_near_zero(self, rng):
        comp = lg.compositional_language(CONCAT)
        rhos = [lg.topological_similarity(lg.holistic_language(comp, rng)).rho
                for _ in range(100)]
        assert all(r is not None for r in rhos)
        assert -0.1 <= np.mean(rhos) <= 0.1

    def test_symbol_relabelling_invariance(self, rng):
        # rho depends only on the edit-distance pattern, which any bijective
        # relabelling of the alphabet preserves
        comp = lg.compositional_language(CONCAT)
        emergent = lg.holistic_language(comp, rng)
        for lang in (comp, emergent):
            perm = rng.permutation(10)
            relab = lg.Language(space=lang.space,
                                mapping={m: tuple(int(perm[s]) for s in msg)
                                         for m, msg in lang.mapping.items()})
            assert (lg.topological_similarity(relab).rho
                    == pytest.approx(lg.topological_similarity(lang).rho,
                                     abs=1e-12))

    def test_spearman_option(self):
        res = lg.topological_similarity(lg.compositional_language(CONCAT),
                                        method="spearman")
        assert res.rho == pytest.approx(1.0)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            lg.topological_similarity(lg.compositional_language(CONCAT),
                                      method="kendall")

    def test_manual_small_oracle(self):
        # independent oracle: scipy pearson on hand-assembled distance lists
        from scipy.stats import pearsonr
        comp = lg.compositional_language(BAG)
        rng = np.random.default_rng(5)
        lang = lg.holistic_language(comp, rng)
        dm, dx = [], []
        for m1, m2 in itertools.combinations(BAG.meanings, 2):
            dm.append(lg.hamming(m1, m2))
            dx.append(lg.edit_distance(lang.mapping[m1], lang.mapping[m2]))
        expected = pearsonr(dm, dx).statistic
        assert lg.topological_similarity(lang).rho == pytest.approx(expected,
                                                                    abs=1e-12)


class TestSpeakerLanguages:
    def test_extract_language_total_and_deterministic(self):
        sp = Speaker("concatenation", Hyper(embed=8, hidden=16), 0)
        a = lg.extract_language(sp, CONCAT)
        b = lg.extract_language(sp, CONCAT)
        assert a.mapping == b.mapping
        assert set(a.mapping) == set(CONCAT.meanings)

    def test_sample_language_stochastic(self, rng):
        sp = Speaker("bag", Hyper(embed=8, hidden=16, bag_rounds=3), 1)
        langs = {tuple(sorted(lg.sample_language(sp, BAG, rng).mapping.items()))
                 for _ in range(5)}
        assert len(langs) > 1


class TestPosterior:
    def test_peaked_compositional_speaker(self, rng):
        # train-free construction: a speaker whose greedy language is forced
        # compositional via near-deterministic logits gives posterior 1.0
        sp = _forced_speaker(lg.compositional_language(CONCAT), scale=50.0)
        assert lg.posterior_high_comp(sp, CONCAT, rng, n_samples=50) == 1.0

    def test_peaked_holistic_speaker(self, rng):
        comp = lg.compositional_language(CONCAT)
        hol = lg.holistic_language(comp, np.random.default_rng(3))
        sp = _forced_speaker(hol, scale=50.0)
        assert lg.posterior_high_comp(sp, CONCAT, rng, n_samples=50) == 0.0

    def test_bad_sample_count(self, rng):
        sp = Speaker("concatenation", Hyper(embed=8, hidden=16), 0)
        with pytest.raises(ValueError):
            lg.posterior_high_comp(sp, CONCAT, rng, n_samples=0)


def _forced_speaker(lang, scale=50.0):
    """A table speaker emitting `lang` with near-probability-one logits."""
    class Table:
        def __init__(self):
            self.order = {m: i for i, m in enumerate(lang.space.meanings)}

        def _logits(self):
            n = len(lang.space.meanings)
            out = np.zeros((n, 2, 10))
            for m, i in self.order.items():
                for t, s in enumerate(lang.mapping[m]):
                    out[i, t, s] = scale
            return out

        def speak_greedy(self, enc):
            return np.argmax(self._logits(), axis=-1)

        def speak_sample(self, enc, rng):
            logits = self._logits()
            n = logits.shape[0]
            out = np.zeros((n, 2), dtype=int)
            for t in range(2):
                p = np.exp(logits[:, t])
                p /= p.sum(axis=-1, keepdims=True)
                out[:, t] = [rng.choice(10, p=row) for row in p]
            return out

    return Table()
