"""Per-tweet readability formulas and per-profile lexical aggregates.

Syllables come from a deterministic vowel-group heuristic (with silent-e
subtraction and a short exceptions list) rather than an external
hyphenation dictionary, so every downstream number is reproducible from
this file alone. Sentences are terminal-punctuation runs with a minimum
of one per text.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

MTLD_TTR_THRESHOLD = 0.72

_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_ALNUM_RE = re.compile(r"[^\W_]", re.UNICODE)

# words the vowel-group heuristic gets wrong by more than is tolerable
_SYLLABLE_EXCEPTIONS = {
    "everywhere": 3,
    "somewhere": 2,
    "something": 2,
    "sometimes": 2,
    "anywhere": 3,
    "business": 2,
    "evening": 2,
    "area": 3,
    "idea": 3,
    "being": 2,
    "doing": 2,
    "going": 2,
    "science": 2,
    "quiet": 2,
    "create": 2,
}


@dataclass
class LexicalMetrics:
    flesch_ease: float
    flesch_kincaid_grade: float
    linsear_write: float
    ari: float
    lexical_diversity_mtld: float
    chars_per_tweet: float
    words_per_tweet: float


def count_syllables(word: str) -> int:
    """Heuristic syllable count: vowel groups, minus silent final e."""
    cleaned = re.sub(r"[^a-z]", "", word.lower())
    if not cleaned:
        return 0
    if cleaned in _SYLLABLE_EXCEPTIONS:
        return _SYLLABLE_EXCEPTIONS[cleaned]
    groups = _VOWEL_GROUP_RE.findall(cleaned)
    count = len(groups)
    if count > 1 and cleaned.endswith("e") and not cleaned.endswith(("le", "ee", "ye", "oe", "ie")):
        count -= 1
    return max(count, 1)


def sentence_count(text: str) -> int:
    segments = [s for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]
    return max(len(segments), 1)


def word_tokens(text: str) -> list[str]:
    return text.split()


def letter_count(text: str) -> int:
    """Alphanumeric characters only; punctuation and spaces excluded."""
    return len(_ALNUM_RE.findall(text))


def flesch_reading_ease(text: str) -> float:
    words = word_tokens(text)
    if not words:
        raise ValueError("empty text")
    n_words = len(words)
    n_sentences = sentence_count(text)
    n_syllables = sum(count_syllables(w) for w in words)
    return 206.835 - 1.015 * (n_words / n_sentences) - 84.6 * (n_syllables / n_words)


def flesch_kincaid_grade(text: str) -> float:
    words = word_tokens(text)
    if not words:
        raise ValueError("empty text")
    n_words = len(words)
    n_sentences = sentence_count(text)
    n_syllables = sum(count_syllables(w) for w in words)
    return 0.39 * (n_words / n_sentences) + 11.8 * (n_syllables / n_words) - 15.59


def automated_readability_index(text: str) -> float:
    words = word_tokens(text)
    if not words:
        raise ValueError("empty text")
    n_chars = letter_count(text)
    n_words = len(words)
    n_sentences = sentence_count(text)
    return 4.71 * (n_chars / n_words) + 0.5 * (n_words / n_sentences) - 21.43


def linsear_write(text: str) -> float:
    """Weighted easy/hard word score: easy (<=2 syllables) weigh 1, hard 3."""
    words = word_tokens(text)
    if not words:
        raise ValueError("empty text")
    weighted = sum(3 if count_syllables(w) >= 3 else 1 for w in words)
    r = weighted / sentence_count(text)
    return r / 2 if r > 20 else r / 2 - 1


def _mtld_factors(tokens: list[str], threshold: float) -> float:
    factors = 0.0
    types: set[str] = set()
    count = 0
    ttr = 1.0
    for token in tokens:
        count += 1
        types.add(token)
        ttr = len(types) / count
        if ttr < threshold:
            factors += 1.0
            types.clear()
            count = 0
            ttr = 1.0
    if count > 0:
        factors += (1.0 - ttr) / (1.0 - threshold)
    return factors


def mtld(tokens: list[str], threshold: float = MTLD_TTR_THRESHOLD) -> float:
    """Mean length of token runs sustaining a type-token ratio >= threshold.

    Bidirectional: factor counts are averaged over a forward and a backward
    scan. A sequence that never crosses the threshold counts as one factor.
    """
    if not tokens:
        raise ValueError("empty token list")
    forward = _mtld_factors(tokens, threshold)
    backward = _mtld_factors(tokens[::-1], threshold)
    mean_factors = (forward + backward) / 2.0
    if mean_factors == 0.0:
        mean_factors = 1.0
    return len(tokens) / mean_factors


def readability_metrics(tweets: list[str]) -> LexicalMetrics | None:
    """Per-tweet scores averaged over a profile; None if no non-empty tweets."""
    texts = [t for t in tweets if t.strip()]
    if not texts:
        return None
    n = len(texts)
    all_tokens: list[str] = []
    for t in texts:
        all_tokens.extend(word_tokens(t))
    return LexicalMetrics(
        flesch_ease=sum(flesch_reading_ease(t) for t in texts) / n,
        flesch_kincaid_grade=sum(flesch_kincaid_grade(t) for t in texts) / n,
        linsear_write=sum(linsear_write(t) for t in texts) / n,
        ari=sum(automated_readability_index(t) for t in texts) / n,
        lexical_diversity_mtld=mtld(all_tokens),
        chars_per_tweet=sum(len(t) for t in texts) / n,
        words_per_tweet=sum(len(word_tokens(t)) for t in texts) / n,
    )
