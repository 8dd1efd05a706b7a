"""Rule-based (action, skill) extraction baseline.

A help query like "how to connect via bluetooth" is answered by spotting an
action verb ("connect") and a skill noun ("bluetooth") in the normalized
token stream, then looking the pair up in a hand-maintained table. Detection
is lexicon-driven rather than tagger-driven: closed phrase lists are scanned
leftmost-longest. The lexicons are deliberately finite, so the baseline has
documented coverage gaps (unlisted verbs such as "sync", queries that name
no skill at all) and serves as the recall floor the retrieval path beats.

Extraction is total: absence of an action or skill is a value, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .textnorm import load_phrase_pairs, load_wordlist

__all__ = [
    "ActionLexicon",
    "SkillLexicon",
    "ActionSkillTable",
    "PosBaselineResult",
    "extract_action_skill",
    "map_response",
    "map_query",
    "default_action_lexicon",
    "default_skill_lexicon",
    "default_action_skill_table",
    "load_action_skill_table",
    "load_responses",
]


def _parse_phrases(pairs: list[tuple[str, str]]) -> tuple[tuple[tuple[str, ...], str], ...]:
    seen: dict[tuple[str, ...], str] = {}
    for phrase, canonical in pairs:
        key = tuple(phrase.lower().split())
        if not key:
            raise ValueError("empty phrase in lexicon")
        if key in seen and seen[key] != canonical:
            raise ValueError(f"conflicting entries for phrase {phrase!r}")
        seen[key] = canonical
    # longest first so multiword phrases win at equal start positions
    ordered = sorted(seen.items(), key=lambda kv: (-len(kv[0]), kv[0]))
    return tuple(ordered)


@dataclass(frozen=True)
class _PhraseScanner:
    phrases: tuple[tuple[tuple[str, ...], str], ...]
    _by_first: dict[str, tuple[tuple[tuple[str, ...], str], ...]] = field(
        init=False, repr=False, compare=False, hash=False, default=None  # type: ignore[assignment]
    )

    def __post_init__(self):
        grouped: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for key, canonical in self.phrases:
            grouped.setdefault(key[0], []).append((key, canonical))
        object.__setattr__(
            self, "_by_first", {first: tuple(items) for first, items in grouped.items()}
        )

    def matches(self, tokens):
        """Yield (position, phrase_tokens, canonical) leftmost-longest."""
        tokens = tuple(tokens)
        n = len(tokens)
        for i in range(n):
            for key, canonical in self._by_first.get(tokens[i], ()):
                if tokens[i : i + len(key)] == key:
                    yield i, key, canonical
                    break


@dataclass(frozen=True)
class ActionLexicon(_PhraseScanner):
    """Verb phrases mapped to canonical actions, plus an auxiliary stoplist.

    Matches made up entirely of auxiliaries ("can", "do", "tell", ...) are
    ignored so lead-ins like "can you ..." never become the action.
    """

    auxiliaries: frozenset = frozenset()


@dataclass(frozen=True)
class SkillLexicon(_PhraseScanner):
    pass


@dataclass(frozen=True)
class ActionSkillTable:
    """Supported (action, skill) pairs and the response each maps to."""

    pairs: tuple[tuple[tuple[str, str], str], ...]

    def __post_init__(self):
        keys = [key for key, _ in self.pairs]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (action, skill) pair in table")

    def as_dict(self) -> dict[tuple[str, str], str]:
        return dict(self.pairs)

    def get(self, action: str, skill: str) -> str | None:
        return self.as_dict().get((action, skill))

    def skills(self) -> dict[str, list[str]]:
        """Skill name -> sorted list of supported actions."""
        grouped: dict[str, set[str]] = {}
        for (action, skill), _ in self.pairs:
            grouped.setdefault(skill, set()).add(action)
        return {skill: sorted(actions) for skill, actions in sorted(grouped.items())}


@dataclass(frozen=True)
class PosBaselineResult:
    action: str | None
    skill: str | None
    response_id: str | None


def extract_action_skill(
    tokens: list[str],
    actions: ActionLexicon,
    skills: SkillLexicon,
) -> tuple[str | None, str | None]:
    """First qualifying action match and first skill match, left to right.

    Auxiliary-only action matches are skipped without consuming tokens.
    Total: either element may be None, never raises.
    """
    action = None
    for _, key, canonical in actions.matches(tokens):
        if all(word in actions.auxiliaries for word in key):
            continue
        action = canonical
        break
    skill = None
    for _, _, canonical in skills.matches(tokens):
        skill = canonical
        break
    return action, skill


def map_response(
    pair: tuple[str | None, str | None], table: ActionSkillTable
) -> str | None:
    action, skill = pair
    if action is None or skill is None:
        return None
    return table.get(action, skill)


def map_query(
    tokens: list[str],
    actions: ActionLexicon,
    skills: SkillLexicon,
    table: ActionSkillTable,
) -> PosBaselineResult:
    """Full baseline pipeline over already-normalized tokens."""
    action, skill = extract_action_skill(tokens, actions, skills)
    return PosBaselineResult(
        action=action, skill=skill, response_id=map_response((action, skill), table)
    )


# ---------------------------------------------------------------------------
# shipped defaults


def default_action_lexicon() -> ActionLexicon:
    pairs = load_phrase_pairs("actions.tsv")
    auxiliaries = frozenset(load_wordlist("auxiliaries.tsv"))
    return ActionLexicon(phrases=_parse_phrases(pairs), auxiliaries=auxiliaries)


def default_skill_lexicon() -> SkillLexicon:
    return SkillLexicon(phrases=_parse_phrases(load_phrase_pairs("skills.tsv")))


def load_action_skill_table(
    name_or_path: str = "action_skill_map.tsv",
    responses: dict[str, str] | None = None,
) -> ActionSkillTable:
    """Parse action<TAB>skill<TAB>response_id rows.

    When a response table is supplied, every response_id must exist in it.
    """
    from .textnorm import _read_lexicon

    rows: list[tuple[tuple[str, str], str]] = []
    for line in _read_lexicon(name_or_path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"malformed action-skill row: {line!r}")
        action, skill, response_id = (p.strip() for p in parts)
        if responses is not None and response_id not in responses:
            raise ValueError(f"unknown response id {response_id!r} in action-skill table")
        rows.append(((action, skill), response_id))
    return ActionSkillTable(pairs=tuple(rows))


def load_responses(name_or_path: str = "responses.tsv") -> dict[str, str]:
    """Parse response_id<TAB>text rows into the response table."""
    from .textnorm import _read_lexicon

    responses: dict[str, str] = {}
    for line in _read_lexicon(name_or_path):
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise ValueError(f"malformed response row: {line!r}")
        rid, text = parts[0].strip(), parts[1].strip()
        if rid in responses:
            raise ValueError(f"duplicate response id {rid!r}")
        responses[rid] = text
    return responses


def default_action_skill_table() -> ActionSkillTable:
    return load_action_skill_table("action_skill_map.tsv", responses=load_responses())
