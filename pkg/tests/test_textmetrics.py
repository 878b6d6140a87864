import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mwpforge.textmetrics import EmptyReference, bleu, corpus_scores, lcs_length, rouge_l, rouge_n, score_generation


def test_identity():
    toks = "how much did it cost to make a uniform ?".split()
    assert score_generation(toks, toks) == {"bleu": 1.0, "rouge1": 1.0, "rouge2": 1.0, "rougeL": 1.0}


def test_disjoint():
    assert rouge_n(["a", "b"], ["c", "d"], 1) == 0.0
    assert rouge_l(["a", "b"], ["c", "d"]) == 0.0


def test_rouge1_hand_count():
    assert rouge_n("a b c d".split(), "a b c e".split(), 1) == pytest.approx(0.75, abs=1e-9)


def test_rouge2_and_l_hand_count():
    hyp, ref = "a b c d".split(), "a b c e".split()
    # bigrams: ab bc match out of 3 each
    assert rouge_n(hyp, ref, 2) == pytest.approx(2 / 3)
    assert rouge_l(hyp, ref) == pytest.approx(0.75)
    assert lcs_length("a x b y c".split(), "a b c".split()) == 3


def test_bleu_hand_count():
    hyp, ref = "a b c d".split(), "a b c e".split()
    # precisions 3/4, 2/3, 1/2, and 4-grams unmatched -> add-one 1/2
    expected = math.exp((math.log(3 / 4) + math.log(2 / 3) + math.log(1 / 2) + math.log(1 / 2)) / 4)
    assert bleu(hyp, ref) == pytest.approx(expected)


def test_bleu_brevity_penalty():
    ref = "a b c d e f".split()
    short = "a b c".split()
    assert bleu(short, ref) < bleu(ref[:5], ref) < 1.0
    assert bleu([], ref) == 0.0


def test_empty_reference():
    for fn in (bleu, rouge_l, lambda h, r: rouge_n(h, r, 1)):
        with pytest.raises(EmptyReference):
            fn(["a"], [])


def test_corpus_scores_average():
    pairs = [(["a"], ["a"]), (["b"], ["c"])]
    assert corpus_scores(pairs)["rouge1"] == 0.5
    assert corpus_scores([])["bleu"] == 0.0


tokens = st.lists(st.sampled_from("abcdef"), min_size=1, max_size=12)


@given(tokens, tokens)
def test_scores_bounded_and_rouge_symmetric(h, r):
    scores = score_generation(h, r)
    assert all(0.0 <= v <= 1.0 + 1e-12 for v in scores.values())
    assert rouge_n(h, r, 1) == pytest.approx(rouge_n(r, h, 1))
    assert rouge_l(h, r) == pytest.approx(rouge_l(r, h))
