"""Deterministic word tokenization for BM25.

Tokens are maximal lowercase runs of letters/digits; apostrophes and hyphens
are kept only between alphanumerics ("don't", "state-of-the-art"). Runs of
pure punctuation disappear. No stemming, no stopword removal.

Case is normalized with str.casefold rather than str.lower: casefold is the
Unicode operation designed for caseless matching, so tokenize(text.upper())
agrees with tokenize(text) (lower() breaks this for e.g. the micro sign).
"""

import re

# [^\W_] = Unicode letters and digits (word chars minus underscore)
_TOKEN = re.compile(r"[^\W_]+(?:['\-][^\W_]+)*", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Split text into lowercase tokens. Total function: any input, never raises."""
    return _TOKEN.findall(text.casefold())
