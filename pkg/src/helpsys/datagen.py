"""Synthetic labeled-query generation.

Real assistant traffic is not shippable, so training and evaluation data is
synthesized from per-skill templates: help queries wrap a task phrase in a
question carrier ("how do i ...", "can you ..."), not-help queries are
imperative commands, chit-chat, or factual questions. Skills are sampled
from a skewed weight table so a few skills dominate, with a long tail.

Some task phrasings use verbs that the rule-based action lexicon does not
list ("hook up", "turn off", "put on", "take"); those rows keep a valid gold
response but are unanswerable by the baseline, which keeps its measured
recall strictly below the retrieval path's.

All randomness flows from the single seed argument; equal seeds produce
byte-identical datasets.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .models import HELP_LABEL, NOT_HELP_LABEL, LabeledQuery

__all__ = [
    "TaskTemplates",
    "SkillTemplates",
    "SkillTemplateSet",
    "desk_templates",
    "paper_templates",
    "generate_dataset",
    "save_jsonl",
    "load_jsonl",
    "GENERIC_RESPONSE_ID",
]

GENERIC_RESPONSE_ID = "generic.capabilities"

_SLOT_RE = re.compile(r"\{(\w+)\}")

_FILLERS: dict[str, tuple[str, ...]] = {
    "time": ("7am", "6am", "9pm", "7:30", "6:45", "8:00", "10:15pm", "noon"),
    "genre": ("jazz", "rock", "pop", "blues", "techno", "country", "classical", "reggae"),
    "city": ("boston", "seattle", "chicago", "miami", "denver", "austin"),
    "person": ("sam", "alex", "mom", "dad", "my boss"),
    "minutes": ("five", "ten", "fifteen", "twenty", "thirty"),
}

_HELP_CARRIERS: tuple[str, ...] = (
    "how do i {task}",
    "how do you {task}",
    "how to {task}",
    "how can i {task}",
    "can you {task}",
    "can i {task}",
    "help me {task}",
    "tell me how to {task}",
    "show me how to {task}",
    "what are the steps to {task}",
    "i want to know how to {task}",
    "i wanna know how to {task}",
    "do you know how to {task}",
    "is it possible to {task}",
    "teach me how to {task}",
    "whats the way to {task}",
    "explain how to {task}",
)

_GENERIC_HELP: tuple[str, ...] = (
    "what can you do",
    "what all can you do",
    "what are your capabilities",
    "help",
    "help me",
    "i need help",
    "i need some help",
    "can you help me",
    "what things can you do",
    "show me what you can do",
    "what can i ask you",
    "what do you know how to do",
    "how do i use this",
    "what are you able to do",
    "tell me what you can do",
)

_CHITCHAT: tuple[str, ...] = (
    "hello",
    "hello there",
    "hi",
    "hey",
    "hey there",
    "good morning",
    "good evening",
    "good night",
    "thank you",
    "thanks",
    "thanks a lot",
    "thank you so much",
    "you are awesome",
    "you are funny",
    "that is great",
    "goodbye",
    "bye",
    "see you later",
    "nice job",
    "well done",
)

_FACTUAL: tuple[str, ...] = (
    "what time is it",
    "what day is it today",
    "whats the date today",
    "who is the president",
    "what year is it",
    "who won the game last night",
    "where is the eiffel tower",
    "what is two plus two",
)

_PREFIXES: tuple[str, ...] = ("please ", "hey ", "ok ", "umm ", "pls ")


@dataclass(frozen=True)
class TaskTemplates:
    """Task phrases for one (action, skill) pair, all mapping to one response.

    covered=False marks phrasings whose verb the action lexicon omits.
    """

    action: str
    response_id: str
    phrases: tuple[str, ...]
    covered: bool = True

    def __post_init__(self):
        if not self.phrases:
            raise ValueError("task must have at least one phrase")


@dataclass(frozen=True)
class SkillTemplates:
    skill: str
    weight: float
    tasks: tuple[TaskTemplates, ...]
    commands: tuple[str, ...]

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("skill weight must be non-negative")
        if not self.tasks:
            raise ValueError(f"skill {self.skill!r} has no tasks")


@dataclass(frozen=True)
class SkillTemplateSet:
    skills: tuple[SkillTemplates, ...]
    generic_help: tuple[str, ...] = _GENERIC_HELP
    chitchat: tuple[str, ...] = _CHITCHAT
    factual: tuple[str, ...] = _FACTUAL
    carriers: tuple[str, ...] = _HELP_CARRIERS
    generic_response_id: str = GENERIC_RESPONSE_ID

    def __post_init__(self):
        if not self.skills:
            raise ValueError("empty template set")
        names = [s.skill for s in self.skills]
        if len(set(names)) != len(names):
            raise ValueError("duplicate skill in template set")

    def response_ids(self) -> set[str]:
        ids = {self.generic_response_id}
        for skill in self.skills:
            ids.update(task.response_id for task in skill.tasks)
        return ids


def _desk_skills() -> tuple[SkillTemplates, ...]:
    return (
        SkillTemplates(
            skill="alarm",
            weight=0.22,
            tasks=(
                TaskTemplates(
                    action="create",
                    response_id="alarm.create",
                    phrases=(
                        "set an alarm",
                        "set an alarm for {time}",
                        "set a daily alarm",
                        "create an alarm for {time}",
                        "make an alarm",
                        "add an alarm for {time}",
                        "set a wake up alarm",
                    ),
                ),
                TaskTemplates(
                    action="delete",
                    response_id="alarm.delete",
                    phrases=(
                        "delete an alarm",
                        "cancel my alarm",
                        "remove my {time} alarm",
                        "clear all my alarms",
                    ),
                ),
                TaskTemplates(
                    action="snooze",
                    response_id="alarm.snooze",
                    phrases=(
                        "snooze an alarm",
                        "snooze my alarm",
                        "snooze the alarm for {minutes} minutes",
                    ),
                ),
                TaskTemplates(
                    action="change",
                    response_id="alarm.change",
                    phrases=(
                        "change my alarm to {time}",
                        "change an alarm",
                        "edit my alarm",
                        "edit an existing alarm",
                    ),
                ),
                TaskTemplates(
                    action="turn off",
                    response_id="alarm.delete",
                    covered=False,
                    phrases=(
                        "turn off my alarm",
                        "turn off the {time} alarm",
                        "shut off my alarm",
                    ),
                ),
            ),
            commands=(
                "set an alarm for {time}",
                "wake me up at {time}",
                "cancel my {time} alarm",
                "snooze",
                "set a second alarm for {time}",
                "delete all my alarms",
            ),
        ),
        SkillTemplates(
            skill="music",
            weight=0.20,
            tasks=(
                TaskTemplates(
                    action="play",
                    response_id="music.play",
                    phrases=(
                        "play music",
                        "play some {genre}",
                        "play {genre} music",
                        "play a song",
                        "play my playlist",
                        "listen to {genre} music",
                    ),
                ),
                TaskTemplates(
                    action="pause",
                    response_id="music.pause",
                    phrases=("pause the music", "pause a song", "pause my playlist"),
                ),
                TaskTemplates(
                    action="skip",
                    response_id="music.skip",
                    phrases=("skip a song", "skip to the next song"),
                ),
                TaskTemplates(
                    action="shuffle",
                    response_id="music.shuffle",
                    phrases=("shuffle my playlist", "shuffle my music", "shuffle songs"),
                ),
                TaskTemplates(
                    action="put on",
                    response_id="music.play",
                    covered=False,
                    phrases=("put on some {genre}", "put on music", "put on my playlist"),
                ),
            ),
            commands=(
                "play some {genre}",
                "play {genre} music",
                "pause the music",
                "next song",
                "turn up the volume",
                "shuffle my playlist",
                "play my favorite song",
            ),
        ),
        SkillTemplates(
            skill="weather",
            weight=0.14,
            tasks=(
                TaskTemplates(
                    action="check",
                    response_id="weather.check",
                    phrases=(
                        "check the weather",
                        "check the weather in {city}",
                        "check the forecast",
                        "check tomorrows forecast",
                        "get the weather for {city}",
                    ),
                ),
                TaskTemplates(
                    action="find out",
                    response_id="weather.check",
                    covered=False,
                    phrases=(
                        "find out if it will rain",
                        "find out the temperature outside",
                    ),
                ),
            ),
            commands=(
                "whats the weather in {city}",
                "whats the weather like today",
                "will it rain tomorrow",
                "whats the temperature outside",
                "give me the forecast for {city}",
            ),
        ),
        SkillTemplates(
            skill="reminder",
            weight=0.12,
            tasks=(
                TaskTemplates(
                    action="create",
                    response_id="reminder.create",
                    phrases=(
                        "set a reminder",
                        "set a reminder for {time}",
                        "create a reminder to water the plants",
                        "add a reminder",
                        "make a reminder for {time}",
                        "schedule a reminder",
                    ),
                ),
                TaskTemplates(
                    action="delete",
                    response_id="reminder.delete",
                    phrases=(
                        "delete a reminder",
                        "cancel my reminder",
                        "remove a reminder",
                        "clear my reminders",
                    ),
                ),
                TaskTemplates(
                    action="change",
                    response_id="reminder.edit",
                    phrases=(
                        "change a reminder",
                        "edit my reminder",
                        "change my reminder to {time}",
                    ),
                ),
            ),
            commands=(
                "remind me to call {person} at {time}",
                "remind me to water the plants",
                "cancel my reminder",
                "set a reminder for {time}",
            ),
        ),
        SkillTemplates(
            skill="timer",
            weight=0.10,
            tasks=(
                TaskTemplates(
                    action="start",
                    response_id="timer.start",
                    phrases=(
                        "set a timer",
                        "set a timer for {minutes} minutes",
                        "start a timer",
                        "create a countdown",
                        "start a countdown for {minutes} minutes",
                    ),
                ),
                TaskTemplates(
                    action="stop",
                    response_id="timer.stop",
                    phrases=("stop the timer", "stop a timer", "stop my countdown"),
                ),
                TaskTemplates(
                    action="pause",
                    response_id="timer.pause",
                    phrases=("pause the timer", "pause a countdown"),
                ),
            ),
            commands=(
                "set a timer for {minutes} minutes",
                "start a {minutes} minute timer",
                "stop the timer",
                "pause the timer",
            ),
        ),
        SkillTemplates(
            skill="bluetooth",
            weight=0.09,
            tasks=(
                TaskTemplates(
                    action="connect",
                    response_id="bluetooth.connect",
                    phrases=(
                        "connect via bluetooth",
                        "connect over bluetooth",
                        "connect my bluetooth speaker",
                        "connect to a bluetooth device",
                    ),
                ),
                TaskTemplates(
                    action="pair",
                    response_id="bluetooth.pair",
                    phrases=(
                        "pair a bluetooth device",
                        "pair my new headphones",
                        "pair my bluetooth speaker",
                    ),
                ),
                TaskTemplates(
                    action="disconnect",
                    response_id="bluetooth.disconnect",
                    phrases=(
                        "disconnect bluetooth",
                        "disconnect my bluetooth speaker",
                        "unpair a bluetooth device",
                    ),
                ),
                TaskTemplates(
                    action="hook up",
                    response_id="bluetooth.connect",
                    covered=False,
                    phrases=(
                        "hook up via bluetooth",
                        "hook up my bluetooth speaker",
                        "sync my phone over bluetooth",
                    ),
                ),
            ),
            commands=(
                "connect my bluetooth speaker",
                "disconnect bluetooth",
                "turn on bluetooth",
                "turn off bluetooth",
            ),
        ),
        SkillTemplates(
            skill="flight",
            weight=0.07,
            tasks=(
                TaskTemplates(
                    action="track",
                    response_id="flight.track",
                    phrases=("track a flight", "track my flight", "track a flight status"),
                ),
                TaskTemplates(
                    action="check",
                    response_id="flight.check",
                    phrases=("check my flight", "check a flight status", "check on a flight"),
                ),
            ),
            commands=(
                "track my flight",
                "check my flight status",
                "when does my flight land",
            ),
        ),
        SkillTemplates(
            skill="news",
            weight=0.06,
            tasks=(
                TaskTemplates(
                    action="read",
                    response_id="news.read",
                    phrases=(
                        "read the news",
                        "read the latest news",
                        "read me the headlines",
                    ),
                ),
                TaskTemplates(
                    action="get",
                    response_id="news.get",
                    phrases=(
                        "get the news",
                        "get the latest headlines",
                        "get the morning news",
                    ),
                ),
            ),
            commands=(
                "read me the news",
                "whats in the news today",
                "give me the latest headlines",
            ),
        ),
    )


def _paper_extra_skills() -> tuple[SkillTemplates, ...]:
    return (
        SkillTemplates(
            skill="calendar",
            weight=0.035,
            tasks=(
                TaskTemplates(
                    action="check",
                    response_id="calendar.check",
                    phrases=("check my calendar", "check my calendar for today"),
                ),
            ),
            commands=("whats on my calendar today", "show my calendar"),
        ),
        SkillTemplates(
            skill="email",
            weight=0.03,
            tasks=(
                TaskTemplates(
                    action="read",
                    response_id="email.read",
                    phrases=("read my email", "read my latest email", "read my inbox"),
                ),
            ),
            commands=("read my latest email", "check my inbox"),
        ),
        SkillTemplates(
            skill="message",
            weight=0.03,
            tasks=(
                TaskTemplates(
                    action="send",
                    response_id="message.send",
                    phrases=(
                        "send a message",
                        "send a message to {person}",
                        "send a text to {person}",
                    ),
                ),
            ),
            commands=("send a message to {person}", "text {person} i am on my way"),
        ),
        SkillTemplates(
            skill="call",
            weight=0.03,
            tasks=(
                TaskTemplates(
                    action="create",
                    response_id="call.start",
                    phrases=("start a call", "make a call", "make a phone call"),
                ),
                TaskTemplates(
                    action="call",
                    response_id="call.start",
                    covered=False,
                    phrases=("call {person}",),
                ),
            ),
            commands=("call {person}", "dial {person}"),
        ),
        SkillTemplates(
            skill="navigation",
            weight=0.025,
            tasks=(
                TaskTemplates(
                    action="get",
                    response_id="navigation.get",
                    phrases=(
                        "get directions",
                        "get directions to the airport",
                        "get directions home",
                    ),
                ),
            ),
            commands=("navigate home", "give me directions to the airport"),
        ),
        SkillTemplates(
            skill="traffic",
            weight=0.02,
            tasks=(
                TaskTemplates(
                    action="check",
                    response_id="traffic.check",
                    phrases=("check the traffic", "check traffic on my commute"),
                ),
            ),
            commands=("hows the traffic", "hows my commute looking"),
        ),
        SkillTemplates(
            skill="sport",
            weight=0.02,
            tasks=(
                TaskTemplates(
                    action="check",
                    response_id="sport.check",
                    phrases=(
                        "check the score",
                        "check last nights scores",
                        "get the latest scores",
                    ),
                ),
            ),
            commands=("whats the score of the game", "give me sports news"),
        ),
        SkillTemplates(
            skill="stock",
            weight=0.015,
            tasks=(
                TaskTemplates(
                    action="check",
                    response_id="stock.check",
                    phrases=(
                        "check my stocks",
                        "check the stock market",
                        "check a stock price",
                    ),
                ),
            ),
            commands=("hows the stock market doing", "whats the price of my stocks"),
        ),
        SkillTemplates(
            skill="shopping",
            weight=0.015,
            tasks=(
                TaskTemplates(
                    action="create",
                    response_id="shopping.create",
                    phrases=(
                        "add milk to my shopping list",
                        "add something to my grocery list",
                        "create a shopping list",
                    ),
                ),
            ),
            commands=("add milk to my shopping list", "put eggs on the grocery list"),
        ),
        SkillTemplates(
            skill="note",
            weight=0.01,
            tasks=(
                TaskTemplates(
                    action="create",
                    response_id="note.create",
                    phrases=("create a note", "make a note", "add a note"),
                ),
                TaskTemplates(
                    action="take",
                    response_id="note.create",
                    covered=False,
                    phrases=("take a note",),
                ),
            ),
            commands=("take a note", "note that the meeting moved to {time}"),
        ),
        SkillTemplates(
            skill="podcast",
            weight=0.01,
            tasks=(
                TaskTemplates(
                    action="play",
                    response_id="podcast.play",
                    phrases=("play a podcast", "play my latest podcast"),
                ),
            ),
            commands=("play my latest podcast", "resume my podcast"),
        ),
        SkillTemplates(
            skill="radio",
            weight=0.01,
            tasks=(
                TaskTemplates(
                    action="play",
                    response_id="radio.play",
                    phrases=("play the radio", "play my favorite radio station"),
                ),
            ),
            commands=("play the radio", "tune to my favorite station"),
        ),
        SkillTemplates(
            skill="tv",
            weight=0.01,
            tasks=(
                TaskTemplates(
                    action="play",
                    response_id="tv.play",
                    phrases=("play a movie on the tv", "play something on my tv"),
                ),
            ),
            commands=("play a movie on the tv", "turn on the tv"),
        ),
        SkillTemplates(
            skill="translation",
            weight=0.005,
            tasks=(
                TaskTemplates(
                    action="translate",
                    response_id="translation.translate",
                    covered=False,
                    phrases=("translate a phrase", "translate hello to spanish"),
                ),
            ),
            commands=("translate good morning to spanish", "say thank you in french"),
        ),
        SkillTemplates(
            skill="joke",
            weight=0.005,
            tasks=(
                TaskTemplates(
                    action="hear",
                    response_id="joke.tell",
                    covered=False,
                    phrases=("hear a joke", "get you to tell a joke"),
                ),
            ),
            commands=("tell me a joke", "make me laugh"),
        ),
        SkillTemplates(
            skill="conversion",
            weight=0.005,
            tasks=(
                TaskTemplates(
                    action="convert",
                    response_id="conversion.convert",
                    covered=False,
                    phrases=("convert units", "convert cups to liters"),
                ),
            ),
            commands=("convert two cups to liters", "how many ounces in a pound"),
        ),
    )


@lru_cache(maxsize=None)
def desk_templates() -> SkillTemplateSet:
    """8 skills, the default scale for development and tests."""
    return SkillTemplateSet(skills=_desk_skills())


@lru_cache(maxsize=None)
def paper_templates() -> SkillTemplateSet:
    """24 skills for benchmark-scale runs."""
    return SkillTemplateSet(skills=_desk_skills() + _paper_extra_skills())


def sample_help_query(skill: str) -> str | None:
    """A representative, slot-filled help query for a skill, or None."""
    for templates in paper_templates().skills:
        if templates.skill == skill:
            phrase = _SLOT_RE.sub(
                lambda m: _FILLERS[m.group(1)][0], templates.tasks[0].phrases[0]
            )
            return "how do i " + phrase
    return None


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


def _fill_slots(template: str, rng: np.random.Generator) -> str:
    def repl(match: re.Match) -> str:
        name = match.group(1)
        if name not in _FILLERS:
            raise ValueError(f"unknown template slot {name!r}")
        return _pick(rng, _FILLERS[name])

    return _SLOT_RE.sub(repl, template)


def _weighted_pick(
    rng: np.random.Generator, skills: tuple[SkillTemplates, ...], weights: list[float]
) -> SkillTemplates:
    total = sum(weights)
    r = float(rng.random()) * total
    acc = 0.0
    for skill, w in zip(skills, weights):
        acc += w
        if r < acc:
            return skill
    return skills[-1]


def generate_dataset(
    templates: SkillTemplateSet,
    n: int,
    skill_weights: dict[str, float] | None = None,
    seed: int = 0,
    help_fraction: float = 0.5,
    generic_fraction: float = 0.15,
) -> list[LabeledQuery]:
    """Sample n labeled queries; deterministic given seed.

    skill_weights overrides the per-skill defaults; zero-weight skills are
    never sampled. Roughly help_fraction of rows are help, of which
    generic_fraction are generic (skill-less) help.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not templates.skills:
        raise ValueError("empty template set")
    skills = templates.skills
    if skill_weights is None:
        weights = [s.weight for s in skills]
    else:
        weights = [float(skill_weights.get(s.skill, 0.0)) for s in skills]
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    if sum(weights) <= 0:
        raise ValueError("weights must not be all zero")

    rng = np.random.default_rng(seed)
    rows: list[LabeledQuery] = []
    for _ in range(n):
        if rng.random() < help_fraction:
            if rng.random() < generic_fraction:
                text = _pick(rng, templates.generic_help)
                if rng.random() < 0.2:
                    text = _pick(rng, _PREFIXES) + text
                rows.append(
                    LabeledQuery(
                        text=text,
                        label=HELP_LABEL,
                        response_id=templates.generic_response_id,
                        skill=None,
                        help_kind="generic",
                    )
                )
            else:
                skill = _weighted_pick(rng, skills, weights)
                task = _pick(rng, skill.tasks)
                phrase = _fill_slots(_pick(rng, task.phrases), rng)
                text = _pick(rng, templates.carriers).format(task=phrase)
                if rng.random() < 0.25:
                    text = _pick(rng, _PREFIXES) + text
                if rng.random() < 0.35:
                    text = text + "?"
                rows.append(
                    LabeledQuery(
                        text=text,
                        label=HELP_LABEL,
                        response_id=task.response_id,
                        skill=skill.skill,
                        help_kind="skill",
                    )
                )
        else:
            category = float(rng.random())
            if category < 0.65:
                skill = _weighted_pick(rng, skills, weights)
                text = _fill_slots(_pick(rng, skill.commands), rng)
                if rng.random() < 0.2:
                    text = _pick(rng, _PREFIXES) + text
                skill_name: str | None = skill.skill
                kind = "command"
            elif category < 0.85:
                text = _pick(rng, templates.chitchat)
                skill_name = None
                kind = "chitchat"
            else:
                text = _fill_slots(_pick(rng, templates.factual), rng)
                skill_name = None
                kind = "factual"
            if rng.random() < 0.15:
                text = text + "."
            rows.append(
                LabeledQuery(
                    text=text,
                    label=NOT_HELP_LABEL,
                    response_id=None,
                    skill=skill_name,
                    help_kind=kind,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# JSONL io


def save_jsonl(rows: list[LabeledQuery], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(
                json.dumps(
                    {
                        "text": row.text,
                        "label": row.label,
                        "response_id": row.response_id,
                        "skill": row.skill,
                        "help_kind": row.help_kind,
                    }
                )
            )
            fh.write("\n")


def load_jsonl(path: str) -> list[LabeledQuery]:
    rows: list[LabeledQuery] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                row = LabeledQuery(
                    text=obj["text"],
                    label=obj["label"],
                    response_id=obj.get("response_id"),
                    skill=obj.get("skill"),
                    help_kind=obj.get("help_kind"),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"malformed dataset line {line_no}") from exc
            rows.append(row)
    return rows
