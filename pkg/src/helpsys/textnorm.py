"""Query normalization: noisy user text to fixed-length lowercase token sequences.

The pipeline applies, in order: lowercasing, timestamp rewriting, genre
rewriting, slang expansion, punctuation stripping, tokenization, stopword
removal, suffix-rule lemmatization, and left-padding/truncation to a fixed
length. Rewrites run before punctuation stripping because timestamps need
their ':' intact to be recognized.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

__all__ = [
    "NormConfig",
    "NormalizedQuery",
    "normalize",
    "apply_phrase_map",
    "detect_timestamp",
    "lemmatize",
    "default_config",
    "load_phrase_pairs",
    "load_wordlist",
    "load_lemma_rules",
]

# Tokens may only contain these characters; everything else separates tokens.
_TOKEN_CHAR_CLASS = "a-z0-9_"
_SPLIT_RE = re.compile(f"[^{_TOKEN_CHAR_CLASS}]+")

DEFAULT_TIMESTAMP_PATTERNS = (
    r"(?:[01]?\d|2[0-3]):[0-5]\d(?:am|pm)?",
    r"(?:1[0-2]|[1-9])(?:am|pm)",
)


@dataclass(frozen=True)
class NormConfig:
    """Normalization lexicons and limits.

    slang_map and genre_lexicon are matched longest phrase first;
    lemma_rules are (suffix, replacement, min_stem_length) tried in order,
    first match wins, replacement == suffix acts as a protective no-op.
    """

    slang_map: tuple[tuple[str, str], ...]
    stopwords: frozenset[str]
    genre_lexicon: tuple[str, ...]
    timestamp_patterns: tuple[str, ...] = DEFAULT_TIMESTAMP_PATTERNS
    lemma_rules: tuple[tuple[str, str, int], ...] = ()
    maxlen: int = 15
    unk_token: str = "unk"
    time_token: str = "time_stamp"
    genre_token: str = "music_genre"

    def __post_init__(self) -> None:
        if self.maxlen < 1:
            raise ValueError("maxlen must be >= 1")
        reserved = (self.unk_token, self.time_token, self.genre_token)
        if len(set(reserved)) != 3:
            raise ValueError("reserved tokens must be distinct")
        for tok in reserved:
            if tok in self.stopwords:
                raise ValueError(f"reserved token {tok!r} may not be a stopword")
        lengths = [len(phrase) for phrase, _ in self.slang_map]
        if lengths != sorted(lengths, reverse=True):
            raise ValueError("slang_map must be sorted longest phrase first")

    @property
    def reserved_tokens(self) -> tuple[str, str, str]:
        return (self.unk_token, self.time_token, self.genre_token)


@dataclass(frozen=True)
class NormalizedQuery:
    """A fixed-length token sequence plus the text it came from."""

    tokens: tuple[str, ...]
    original: str

    def content(self, pad_token: str = "unk") -> tuple[str, ...]:
        """Tokens with the leading padding run stripped."""
        i = 0
        while i < len(self.tokens) and self.tokens[i] == pad_token:
            i += 1
        return self.tokens[i:]


def detect_timestamp(token: str, patterns: tuple[str, ...] = DEFAULT_TIMESTAMP_PATTERNS) -> bool:
    """True when the whole token is a clock time such as 5:00pm, 22:15, or 7am."""
    return any(re.fullmatch(p, token) for p in patterns)


def lemmatize(token: str, rules: tuple[tuple[str, str, int], ...]) -> str:
    for suffix, replacement, min_stem in rules:
        if token.endswith(suffix) and len(token) - len(suffix) >= min_stem:
            return token[: len(token) - len(suffix)] + replacement
    return token


def apply_phrase_map(tokens: list[str], phrase_map: list[tuple[str, str]]) -> list[str]:
    """Leftmost-longest non-overlapping phrase rewriting over a token sequence.

    phrase_map entries must be ordered longest phrase first; both sides may
    be multiword. Unmatched tokens pass through unchanged.
    """
    parsed = [(tuple(phrase.split()), replacement.split()) for phrase, replacement in phrase_map]
    parsed.sort(key=lambda item: (-len(item[0]), -sum(len(t) for t in item[0])))
    out: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        for phrase_tokens, replacement_tokens in parsed:
            width = len(phrase_tokens)
            if width and tuple(tokens[i : i + width]) == phrase_tokens:
                out.extend(replacement_tokens)
                i += width
                break
        else:
            out.append(tokens[i])
            i += 1
    return out


def _boundary_pattern(alternatives: tuple[str, ...]) -> re.Pattern[str]:
    body = "|".join(alternatives)
    return re.compile(f"(?<![{_TOKEN_CHAR_CLASS}])(?:{body})(?![{_TOKEN_CHAR_CLASS}])")


@lru_cache(maxsize=8)
def _compiled(cfg: NormConfig) -> tuple[re.Pattern[str], re.Pattern[str] | None, re.Pattern[str] | None, dict[str, str]]:
    time_re = _boundary_pattern(cfg.timestamp_patterns)
    genre_re = None
    if cfg.genre_lexicon:
        genres = sorted(cfg.genre_lexicon, key=lambda g: (-len(g), g))
        genre_re = _boundary_pattern(tuple(re.escape(g) for g in genres))
    slang_re = None
    slang_lookup: dict[str, str] = {}
    if cfg.slang_map:
        slang_re = _boundary_pattern(tuple(re.escape(p) for p, _ in cfg.slang_map))
        slang_lookup = dict(cfg.slang_map)
    return time_re, genre_re, slang_re, slang_lookup


def normalize(raw: str, cfg: NormConfig) -> NormalizedQuery:
    """Run the full pipeline; always returns exactly cfg.maxlen tokens."""
    text = " ".join(raw.lower().split())
    time_re, genre_re, slang_re, slang_lookup = _compiled(cfg)
    text = time_re.sub(cfg.time_token, text)
    if genre_re is not None:
        text = genre_re.sub(cfg.genre_token, text)
    if slang_re is not None:
        text = slang_re.sub(lambda m: slang_lookup[m.group(0)], text)
    tokens = [t for t in _SPLIT_RE.split(text) if t]
    tokens = [t for t in tokens if t not in cfg.stopwords]
    reserved = set(cfg.reserved_tokens)
    tokens = [t if t in reserved else lemmatize(t, cfg.lemma_rules) for t in tokens]
    if len(tokens) > cfg.maxlen:
        tokens = tokens[-cfg.maxlen :]
    else:
        tokens = [cfg.unk_token] * (cfg.maxlen - len(tokens)) + tokens
    return NormalizedQuery(tokens=tuple(tokens), original=raw)


def _data_lines(name: str) -> list[str]:
    path = resources.files("helpsys").joinpath("data", name)
    lines = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


def load_phrase_pairs(name_or_path: str) -> list[tuple[str, str]]:
    """Read a phrase<TAB>replacement TSV; '#' lines are comments."""
    lines = _read_lexicon(name_or_path)
    pairs = []
    for line in lines:
        phrase, _, replacement = line.partition("\t")
        pairs.append((phrase.strip().lower(), replacement.strip().lower()))
    return pairs


def load_wordlist(name_or_path: str) -> list[str]:
    return [line.split("\t")[0].strip().lower() for line in _read_lexicon(name_or_path)]


def load_lemma_rules(name_or_path: str) -> list[tuple[str, str, int]]:
    rules = []
    for line in _read_lexicon(name_or_path):
        parts = line.split("\t")
        suffix = parts[0].strip()
        replacement = parts[1].strip() if len(parts) > 1 else ""
        min_stem = int(parts[2]) if len(parts) > 2 and parts[2].strip() else 0
        rules.append((suffix, replacement, min_stem))
    return rules


def _read_lexicon(name_or_path: str) -> list[str]:
    import os

    if os.path.sep in name_or_path or os.path.exists(name_or_path):
        with open(name_or_path, encoding="utf-8") as fh:
            raw = fh.read().splitlines()
        return [line.strip() for line in raw if line.strip() and not line.strip().startswith("#")]
    return _data_lines(name_or_path)


@lru_cache(maxsize=4)
def default_config(maxlen: int = 15) -> NormConfig:
    """The shipped lexicons assembled into a ready-to-use configuration."""
    slang = load_phrase_pairs("slang.tsv")
    slang.sort(key=lambda pair: (-len(pair[0]), pair[0]))
    return NormConfig(
        slang_map=tuple(slang),
        stopwords=frozenset(load_wordlist("stopwords.tsv")),
        genre_lexicon=tuple(load_wordlist("genres.tsv")),
        lemma_rules=tuple(load_lemma_rules("lemma_rules.tsv")),
        maxlen=maxlen,
    )
