"""Expressivity, compositionality and stability of materialized languages.

All three are computed exactly over the full meaning space. Corrected
values subtract a naive-agent baseline ``y0`` via ``(y - y0) / (1 - y0)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BaselineError
from .lang import LanguageTable, bits_to_indices, indices_to_bits, iter_space

BlockDecoder = Callable[[np.ndarray], np.ndarray]


def expressivity(lang: LanguageTable) -> float:
    """Fraction of the signal space used by the language."""
    used = np.bincount(lang.signal_index, minlength=1 << lang.n) > 0
    return float(used.sum()) / (1 << lang.n)


def cooccurrence(lang: LanguageTable) -> np.ndarray:
    """``counts[i, j]`` = number of meanings with fact i set whose signal has word j set."""
    n = lang.n
    counts = np.zeros((n, n))
    for start, meanings in iter_space(n):
        signals = indices_to_bits(lang.signal_index[start : start + len(meanings)], n)
        counts += meanings.T.astype(np.float64) @ signals.astype(np.float64)
    return counts


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """Entropy in bits with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    inside = (p > 0) & (p < 1)
    q = p[inside]
    out[inside] = -q * np.log2(q) - (1 - q) * np.log2(1 - q)
    return out


def fact_word_entropy(lang: LanguageTable) -> np.ndarray:
    """``h[i, j]``: entropy of word j given fact i is 1, over all meanings."""
    p = cooccurrence(lang) / (1 << (lang.n - 1))
    return binary_entropy(p)


def _composition_score(h: np.ndarray) -> float:
    selected = h == h.min(axis=1, keepdims=True)
    per_word = np.where(selected, h, np.inf).min(axis=0)
    per_word[np.isinf(per_word)] = 1.0
    return float(1.0 - per_word.mean())


def compositionality(lang: LanguageTable) -> float:
    """One minus the mean, over words, of the best fact entropy selecting that word.

    Each fact selects every word attaining its minimum entropy (ties are
    all kept). A word no fact selects scores 1.
    """
    return _composition_score(fact_word_entropy(lang))
def _decoder_fn(decoder) -> BlockDecoder:
    if isinstance(decoder, LanguageTable):
        # a table read as a signal -> meaning map
        return lambda s: indices_to_bits(decoder.signal_index[bits_to_indices(s)], decoder.n)
    return decoder


def stability(encoder_lang: LanguageTable, decoder) -> float:
    """Fraction of meanings recovered by ``decoder`` from the encoder's signals.

    ``decoder`` is either a callable on ``(batch, n)`` signal bits or a
    :class:`LanguageTable` read as a signal -> meaning map.
    """
    n = encoder_lang.n
    decode = _decoder_fn(decoder)
    hits = 0
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        sig_idx = encoder_lang.signal_index[start : start + chunk]
        decoded = bits_to_indices(decode(indices_to_bits(sig_idx, n)))
        hits += int(np.count_nonzero(decoded == np.arange(start, start + len(sig_idx))))
    return hits / (1 << n)


def agreement(a: LanguageTable, b: LanguageTable) -> float:
    """Fraction of meanings two encoders map to the same signal."""
    return float(np.mean(a.signal_index == b.signal_index))


def bias_correct(y: float, y0: float, clamp: bool = True) -> float:
    if y0 >= 1:
        raise BaselineError(f"degenerate baseline y0={y0}: correction needs y0 < 1")
    v = (y - y0) / (1 - y0)
    return max(v, 0.0) if clamp else v


@dataclass(frozen=True)
class MetricTriple:
    x_raw: float
    c_raw: float
    s_raw: float
    x: float
    c: float
    s: float

    def egood(self, lam: float = 0.95) -> bool:
        return self.x > lam and self.c > lam and self.s > lam


@dataclass(frozen=True)
class BaselineEstimate:
    x0: float
    c0: float
    s0: float
    kind: str
    n: int
    hidden: int
    agents: int = 40
    pairs: int = 20

    def correct(self, x: float, c: float, s: float) -> MetricTriple:
        return MetricTriple(
            x, c, s, bias_correct(x, self.x0), bias_correct(c, self.c0), bias_correct(s, self.s0)
        )


def pair_stability(tutor, pupil) -> float:
    """Stability from ``tutor``'s encoder to ``pupil``'s decoder.

    Agents without a decoder fall back to encoder agreement.
    """
    if getattr(pupil, "decode_block", None) is None:
        return agreement(tutor.language(), pupil.language())
    lang = tutor.language()
    decoded = pupil.decode_indices(lang.signal_index)
    return float(np.count_nonzero(decoded == np.arange(1 << lang.n))) / (1 << lang.n)


def sampled_metrics(tutor, pupil, k: int, rng: np.random.Generator) -> tuple[float, float, float]:
    """Approximate raw x, c, s from ``k`` distinct random meanings.

    Expressivity becomes the fraction of distinct signals among the sampled
    meanings, so it is 1 for a one-to-one language. Meant for large n only.
    """
    from .agents import encode_block

    n = pupil.n
    k = min(k, 1 << n)
    idx = np.sort(rng.choice(1 << n, size=k, replace=False))
    meanings = indices_to_bits(idx, n)
    signals = encode_block(pupil, meanings)
    x = len(np.unique(bits_to_indices(signals))) / k
    ones = meanings.sum(axis=0).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = (meanings.T.astype(np.float64) @ signals) / ones[:, None]
    p = np.nan_to_num(p, nan=0.5)
    c = _composition_score(binary_entropy(p))
    tutor_signals = encode_block(tutor, meanings)
    if getattr(pupil, "decode_block", None) is None:
        s = float(np.mean(np.all(tutor_signals == signals, axis=1)))
    else:
        s = float(np.mean(np.all(pupil.decode_block(tutor_signals) == meanings, axis=1)))
    return x, c, s


def estimate_baseline(
    kind: str, n: int, hidden: int, rng: np.random.Generator, agents: int = 40, pairs: int = 20
) -> BaselineEstimate:
    """Mean raw metrics of untrained agents; stability over disjoint naive pairs."""
    from .agents import naive_agent

    if 2 * pairs > agents:
        raise ValueError("need at least two agents per pair")
    pool = [naive_agent(kind, n, hidden, rng) for _ in range(agents)]
    langs = [a.language() for a in pool]
    x0 = float(np.mean([expressivity(lang) for lang in langs]))
    c0 = float(np.mean([compositionality(lang) for lang in langs]))
    s0 = float(np.mean([pair_stability(pool[2 * k], pool[2 * k + 1]) for k in range(pairs)]))
    return BaselineEstimate(x0, c0, s0, kind, n, hidden, agents, pairs)
