import random

import pytest

from mission_profiler.readability import (
    automated_readability_index,
    count_syllables,
    flesch_kincaid_grade,
    flesch_reading_ease,
    letter_count,
    linsear_write,
    mtld,
    readability_metrics,
    sentence_count,
)


# -- building blocks, pinned ------------------------------------------------------

def test_syllables_all_monosyllables():
    for word in ["The", "cat", "sat", "on", "the", "mat."]:
        assert count_syllables(word) == 1


@pytest.mark.parametrize("word,expected", [
    ("banana", 3),
    ("readability", 5),
    ("make", 1),       # silent final e
    ("table", 2),      # -le keeps its syllable
    ("idea", 3),       # exceptions list
    ("going", 2),      # exceptions list
    ("rhythm", 1),     # y as the only vowel
    ("", 0),
    ("123", 0),
])
def test_syllable_pins(word, expected):
    assert count_syllables(word) == expected


def test_sentence_count_minimum_one():
    assert sentence_count("no terminal punctuation") == 1
    assert sentence_count("One. Two! Three?") == 3
    assert sentence_count("Wait... what") == 2


def test_letter_count_excludes_punctuation():
    assert letter_count("The cat sat on the mat.") == 17


# -- formulas against hand-derived values -------------------------------------------

SENTENCE = "The cat sat on the mat."


def test_flesch_reading_ease_hand_value():
    # W=6, S=1, Syl=6: 206.835 - 1.015*6 - 84.6*1
    assert flesch_reading_ease(SENTENCE) == pytest.approx(116.145, abs=1e-6)


def test_ari_hand_value():
    # C=17, W=6, S=1: 4.71*(17/6) + 0.5*6 - 21.43
    assert automated_readability_index(SENTENCE) == pytest.approx(-5.085, abs=1e-6)


def test_flesch_kincaid_hand_value():
    # 0.39*6 + 11.8*1 - 15.59
    assert flesch_kincaid_grade(SENTENCE) == pytest.approx(-1.45, abs=1e-6)


def test_linsear_high_rate_branch():
    text = " ".join(["cat"] * 100) + "."
    # 100 easy words, one sentence: r = 100 > 20 -> r / 2
    assert linsear_write(text) == pytest.approx(50.0, abs=1e-9)


def test_linsear_low_rate_branch():
    # 6 easy words, one sentence: r = 6 <= 20 -> r/2 - 1
    assert linsear_write(SENTENCE) == pytest.approx(2.0, abs=1e-9)


def test_formulas_agree_with_naive_reference():
    rng = random.Random(21)
    words = ["cat", "banana", "readability", "dog", "wonderful", "a", "tremendous"]
    for _ in range(300):
        n = rng.randint(1, 30)
        text = " ".join(rng.choice(words) for _ in range(n))
        if rng.random() < 0.5:
            text += "."
        w = len(text.split())
        s = sentence_count(text)
        syl = sum(count_syllables(t) for t in text.split())
        c = letter_count(text)
        assert flesch_reading_ease(text) == pytest.approx(
            206.835 - 1.015 * (w / s) - 84.6 * (syl / w), abs=1e-6)
        assert flesch_kincaid_grade(text) == pytest.approx(
            0.39 * (w / s) + 11.8 * (syl / w) - 15.59, abs=1e-6)
        assert automated_readability_index(text) == pytest.approx(
            4.71 * (c / w) + 0.5 * (w / s) - 21.43, abs=1e-6)


# -- MTLD ----------------------------------------------------------------------------

def reference_mtld(tokens, threshold=0.72):
    """Independent straightforward scan, kept separate from the library."""

    def factors(seq):
        count = 0.0
        types = set()
        n = 0
        ttr = 1.0
        for tok in seq:
            n += 1
            types.add(tok)
            ttr = len(types) / n
            if ttr < threshold:
                count += 1
                types = set()
                n = 0
                ttr = 1.0
        if n > 0:
            count += (1 - ttr) / (1 - threshold)
        return count

    f = (factors(tokens) + factors(list(reversed(tokens)))) / 2
    return len(tokens) / (f if f > 0 else 1.0)


def test_mtld_matches_reference_on_random_sequences():
    rng = random.Random(99)
    vocab = [f"w{i}" for i in range(30)]
    for _ in range(300):
        n = rng.randint(1, 200)
        tokens = [rng.choice(vocab) for _ in range(n)]
        assert mtld(tokens) == pytest.approx(reference_mtld(tokens), abs=1e-9)


def test_mtld_all_identical_is_low():
    tokens = ["same"] * 50
    value = mtld(tokens)
    assert value == pytest.approx(reference_mtld(tokens), abs=1e-9)
    assert value < 10


def test_mtld_all_distinct_equals_length():
    tokens = [f"w{i}" for i in range(50)]
    assert mtld(tokens) == pytest.approx(50.0, abs=1e-9)


def test_mtld_single_token():
    assert mtld(["only"]) == pytest.approx(1.0)


def test_mtld_empty_raises():
    with pytest.raises(ValueError):
        mtld([])


# -- per-profile aggregation -----------------------------------------------------------

def test_profile_averages():
    tweets = ["The cat sat on the mat.", "The cat sat on the mat."]
    m = readability_metrics(tweets)
    assert m.flesch_ease == pytest.approx(116.145, abs=1e-6)
    assert m.words_per_tweet == pytest.approx(6.0)
    assert m.chars_per_tweet == pytest.approx(len(tweets[0]))
    assert m.chars_per_tweet >= m.words_per_tweet >= 1


def test_profile_with_only_empty_tweets_is_none():
    assert readability_metrics(["", "   "]) is None


def test_profile_skips_empty_tweets():
    m = readability_metrics(["", "The cat sat on the mat."])
    assert m.flesch_ease == pytest.approx(116.145, abs=1e-6)
