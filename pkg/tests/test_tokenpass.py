import math

import numpy as np
import pytest

from ctrtok.errors import ConfigError, DataError
from ctrtok.hmm import Alphabet, Hmm, viterbi
from ctrtok.linguistic import baseline_ld, estimate_unigram, parse_corpus
from ctrtok.orthographic import OdSet, Vocabulary, build_od
from ctrtok.tokenpass import (
    NULL_TOKEN,
    START_TOKEN,
    BeamConfig,
    OdActivation,
    Token,
    WordLinkRecord,
    backtrack,
    prune,
    recognize_connected,
    recognize_isolated,
    step_model,
)
from oracles import chain_hmm, composed_decode, random_ld, random_od, two_state_hmm


def chain_od(words, alphabet):
    vocab = Vocabulary(words)
    return OdSet(vocab, [chain_hmm(" " + w, alphabet) for w in words], [False] * len(words))


@pytest.fixture(scope="module")
def for_these_od():
    return build_od(Vocabulary(["for", "these"]))


# --- step model ---------------------------------------------------------------


def test_step_model_null_stays_null():
    h = two_state_hmm()
    act = OdActivation.fresh(0, 2)
    for ch in "abba":
        act = step_model(act, h, ch)
        assert not act.active


def test_step_model_two_state_example():
    h = two_state_hmm()
    act = OdActivation.fresh(0, 2, START_TOKEN)
    act = step_model(act, h, "a")
    assert act.entry.is_null
    assert act.slots[0].cost == pytest.approx(-math.log(0.9))
    assert act.slots[1].is_null
    act = step_model(act, h, "b")
    expected = -math.log(0.9) - math.log(0.5) - math.log(0.8)
    assert act.slots[1].cost == pytest.approx(expected, abs=1e-12)
    assert act.exit.cost == pytest.approx(expected - math.log(0.5), abs=1e-12)
    assert act.exit.cost == viterbi(h, "ab")[0]


def test_step_model_chain_exit_is_zero():
    h = chain_hmm(" show")
    act = OdActivation.fresh(0, 5, START_TOKEN)
    for ch in " show":
        act = step_model(act, h, ch)
    assert act.exit.cost == 0.0


def test_step_model_carries_origin_and_link():
    rec = WordLinkRecord(3, 4, 1.5)
    h = two_state_hmm()
    act = OdActivation.fresh(0, 2, Token(1.0, 2, rec))
    act = step_model(act, h, "a")
    assert act.slots[0].ld_origin == 2 and act.slots[0].link is rec


# --- prune --------------------------------------------------------------------


def test_prune_threshold_arithmetic():
    acts = [
        OdActivation(0, [Token(1.0), NULL_TOKEN]),
        OdActivation(1, [Token(5.0), NULL_TOKEN]),
    ]
    out = prune(acts, BeamConfig(2.0))
    assert out[0].slots[0].cost == 1.0
    assert out[1].slots[0].is_null and not out[1].active


def test_prune_unbounded_is_identity():
    acts = [OdActivation(0, [Token(1.0)]), OdActivation(1, [Token(500.0)])]
    assert prune(acts, BeamConfig()) is acts


def test_beam_config_validation():
    with pytest.raises(ConfigError):
        BeamConfig(0.0)
    assert BeamConfig.parse("inf").unbounded
    assert BeamConfig.parse("2.5").width == 2.5


# --- isolated word recognition ------------------------------------------------------


def test_iwr_single_chain_word():
    od = chain_od(["show"], " show")
    assert recognize_isolated(od, "show") == [("show", 0.0)]


def test_iwr_ranks_own_word_first():
    od = chain_od(["ab", "ba"], " ab")
    ranking = recognize_isolated(od, "ab")
    assert ranking[0][0] == "ab"
    # the other chain cannot produce "ab" at all
    assert len(ranking) == 1


def test_iwr_deletion_tolerance_matches_viterbi():
    od = build_od(Vocabulary(["show"]))
    [(word, cost)] = recognize_isolated(od, "shw")
    assert word == "show" and math.isfinite(cost)
    assert cost == viterbi(od.model("show"), " shw")[0]


def test_iwr_costs_equal_viterbi_exactly():
    rng = np.random.default_rng(11)
    for _ in range(20):
        od = random_od(rng, 3)
        text = "".join(rng.choice(list(" abc"), size=rng.integers(1, 8)))
        ranking = dict(recognize_isolated(od, text))
        for w, h in zip(od.vocabulary, od.models):
            cost = viterbi(h, " " + text)[0]
            if math.isfinite(cost):
                assert ranking[w] == cost
            else:
                assert w not in ranking


def test_iwr_empty_input_rejected():
    with pytest.raises(DataError):
        recognize_isolated(chain_od(["a"], " a"), "")


# --- connected text recognition -----------------------------------------------------


def test_ctr_chain_words_baseline():
    od = chain_od(["a", "b"], " ab")
    d = recognize_connected(baseline_ld(od.vocabulary), od, "a b")
    assert d.words == ["a", "b"] and d.cost == 0.0
    assert d.boundaries == [2, 4]
    assert backtrack(d.final) == d.word_ids


def test_ctr_repairs_run_on(for_these_od):
    od = for_these_od
    d = recognize_connected(baseline_ld(od.vocabulary), od, "forthese")
    assert d.words == ["for", "these"]
    cost, words = composed_decode(baseline_ld(od.vocabulary), od, "forthese")
    assert words == d.words
    assert d.cost == pytest.approx(cost, abs=1e-9)


def test_ctr_single_word_baseline_equals_iwr(for_these_od):
    od = OdSet(Vocabulary(["these"]), [for_these_od.model("these")], [False])
    d = recognize_connected(baseline_ld(od.vocabulary), od, "thse")
    [(_, iwr)] = recognize_isolated(od, "thse")
    assert d.words == ["these"] and d.cost == iwr


def test_ctr_tight_beam_gives_no_parse():
    # " ab" is a perfect prefix match for " a c" but cannot continue with 'c';
    # the slightly costlier " a" gets pruned at t=2 and nothing survives.
    alph = Alphabet(" abc")
    ab = chain_hmm(" ab", " abc")
    a = Hmm.from_probabilities(alph, [1, 0], [[0, 1], [0, 0]], [0, 1], [[1, 0, 0, 0], [0, 0.5, 0.5, 0]])
    c = chain_hmm(" c", " abc")
    od = OdSet(Vocabulary(["ab", "a", "c"]), [ab, a, c], [False] * 3)
    ld = baseline_ld(od.vocabulary)
    assert recognize_connected(ld, od, "a c").words == ["a", "c"]
    d = recognize_connected(ld, od, "a c", BeamConfig(0.1))
    assert d.no_parse and d.words == [] and d.cost == math.inf
    assert d.best_partial == (0.0, 2)


def test_ctr_unknown_symbol_rejected():
    od = chain_od(["a"], " a")
    with pytest.raises(DataError):
        recognize_connected(baseline_ld(od.vocabulary), od, "x")


def test_ctr_requires_matching_observables():
    od = chain_od(["a", "b"], " ab")
    with pytest.raises(DataError):
        recognize_connected(baseline_ld(Vocabulary(["a"])), od, "a")


def test_unigram_breaks_od_ties():
    # two words with identical models: only the LD can decide
    alph = " ab"
    od = OdSet(Vocabulary(["ab", "ba"]), [chain_hmm(" ab", alph)] * 2, [False, False])
    corpus = parse_corpus("ba\nba\nab\n")
    uni = estimate_unigram(corpus, 1e-3, od.vocabulary)
    assert recognize_connected(baseline_ld(od.vocabulary), od, "ab").words == ["ab"]
    assert recognize_connected(uni, od, "ab").words == ["ba"]


@pytest.mark.parametrize("kind", ["baseline", "unigram", "biclass"])
def test_ctr_matches_composed_oracle(kind):
    rng = np.random.default_rng({"baseline": 1, "unigram": 2, "biclass": 3}[kind])
    for _ in range(15):
        od = random_od(rng, int(rng.integers(1, 4)), max_len=4)
        ld = random_ld(rng, kind, od.vocabulary, n_classes=int(rng.integers(1, 4)))
        text = "".join(rng.choice(list(" abc"), size=rng.integers(1, 9)))
        d = recognize_connected(ld, od, text)
        cost, words = composed_decode(ld, od, text)
        if math.isinf(cost):
            assert d.no_parse
        else:
            assert d.cost == pytest.approx(cost, abs=1e-9)
            assert d.words == words


def test_backtrack_cases():
    assert backtrack(Token(0.0)) == []
    r1 = WordLinkRecord(0, 2, 1.0)
    r2 = WordLinkRecord(2, 5, 2.0, r1)
    r3 = WordLinkRecord(1, 9, 3.0, r2)
    assert backtrack(Token(3.0, 0, r3)) == [0, 2, 1]
    with pytest.raises(DataError):
        backtrack(NULL_TOKEN)


def test_ctr_is_deterministic():
    rng = np.random.default_rng(5)
    od = random_od(rng, 4)
    ld = random_ld(rng, "biclass", od.vocabulary, 3)
    a = recognize_connected(ld, od, "abc cab", BeamConfig(3.0))
    b = recognize_connected(ld, od, "abc cab", BeamConfig(3.0))
    assert a.words == b.words and a.cost == b.cost
