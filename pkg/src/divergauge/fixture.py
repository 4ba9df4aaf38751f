"""Bundled desk-scale fixture: a synthetic multi-genre corpus and a
writing-prompt dataset, both emitted by a seeded template grammar.

The grammar reuses a small set of sentence skeletons with combinatorial
word slots, which is exactly what an order-3 word LM needs: frequent
contexts (so smoothing stays a minor correction) with genuinely many
plausible continuations (so there is diversity to lose and recover).
The bundled files under data/ are generated once by
scripts/build_fixture_data.py and committed, so tests never depend on
regeneration.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Dict, List, Optional, Tuple

import numpy as np

from .features import tokenize
from .toylm import NGramLM, SharpenSpec, sharpen_lm, train_ngram_lm

CORPUS_RESOURCE = "corpus.txt"
DATASET_RESOURCE = "fixture_dataset.ndjson"

BANKS: Dict[str, Tuple[str, ...]] = {
    "name": (
        "mara", "tomas", "ilse", "edda", "ruth", "silas", "anselm", "greta",
        "odile", "pavel", "nils", "vera", "janek", "sable", "old tom", "the keeper",
        "the ferryman", "sister agnes", "the cartographer", "young pieter",
    ),
    "adj": (
        "grey", "quiet", "narrow", "salt-stained", "crooked", "pale", "heavy",
        "thin", "patient", "restless", "bright", "bitter", "mild", "weathered",
        "far", "low", "early", "stubborn", "gentle", "cold", "green", "hollow",
        "slow", "small",
    ),
    "place": (
        "harbour", "orchard", "market", "chapel", "attic", "lighthouse", "mill",
        "ferry landing", "square", "cellar", "garden", "workshop", "station",
        "boathouse", "granary", "archive", "courtyard", "pier",
    ),
    "thing": (
        "lantern", "letter", "ledger", "compass", "loaf", "map", "bell", "rope",
        "violin", "photograph", "kettle", "almanac", "coat", "telescope", "key",
        "clock", "net", "barometer", "diary", "chair",
    ),
    "nature": (
        "tide", "fog", "frost", "heather", "gull", "river", "moss", "storm",
        "moon", "harvest", "thaw", "current", "snow", "wind", "marsh", "orchard bloom",
    ),
    "verb": (
        "waited", "listened", "wandered", "mended", "counted", "measured",
        "remembered", "returned", "lingered", "worked", "watched", "slept",
        "climbed", "drifted", "searched", "rested", "hummed", "paced",
    ),
    "say": (
        "said", "whispered", "admitted", "repeated", "wrote", "sang", "muttered",
        "explained",
    ),
    "adv": (
        "slowly", "twice", "at last", "again", "alone", "quietly", "carefully",
        "without hurry", "by habit", "almost gladly",
    ),
    "time": (
        "at dawn", "before supper", "after the storm", "in late autumn",
        "on the third day", "toward evening", "past midnight", "in the morning",
        "all winter", "every sunday",
    ),
    "feeling": (
        "hope", "doubt", "a quiet joy", "an old sorrow", "relief", "wonder",
        "unease", "patience",
    ),
}

# genre -> sentence templates; slots name entries of BANKS
TEMPLATES: Dict[str, Tuple[str, ...]] = {
    "sea": (
        "the {adj} boat left the {place} {time}.",
        "{name} {verb} {adv} along the {adj} shore.",
        "under a {adj} sky the {nature} turned {adj}.",
        "the {nature} carried the {thing} past the {place}.",
        "{time} the crew {verb} near the {place}.",
        "a {adj} swell rolled in and the {thing} rang {adv}.",
        "{name} kept the {thing} close and {verb} {time}.",
    ),
    "village": (
        "in the {place} {name} {verb} {time}.",
        "the {adj} {thing} sat on the {adj} table.",
        "{name} {say} that the {nature} felt {adj} this year.",
        "children crossed the {place} {adv} before the {nature}.",
        "the {place} smelled of {nature} and {feeling}.",
        "{time} the {adj} bell of the {place} woke {name}.",
        "nobody {verb} in the {place} while the {nature} held.",
    ),
    "letters": (
        "dear {name}, the {thing} you sent {time} reached the {place}.",
        "i have {verb} {adv} and think of the {adj} {place}.",
        "send word when the {nature} turns, {name} {say}.",
        "your {thing} rests in the {attic_like} beside my {thing}.",
        "with {feeling}, i remain yours {time}.",
        "the {adj} weather kept us in the {place} again.",
    ),
    "fable": (
        "a {adj} fox met a {adj} heron by the {place}.",
        "the heron {say} that {feeling} weighs less than a {thing}.",
        "so the fox {verb} {adv} and learned about the {nature}.",
        "a {adj} crow watched the {place} and said nothing {time}.",
        "the moral stayed {adj} like the {nature} {time}.",
        "beasts of the {place} keep their {feeling} {adv}.",
    ),
    "frame": (
        "gather near, {name} {say}, the story is as follows.",
        "every writing prompt asks for a {adj} beginning, {name} {say}.",
        "the story is as follows and it starts in the {place}.",
        "write a story about the {nature}, the teacher {say} {time}.",
        "{name} read the prompt {adv} and picked up the {thing}.",
        "a good story ends where the {nature} meets the {place}.",
    ),
}

# "attic_like" reuses the place bank; kept as an alias so letter templates read naturally
_SLOT_ALIASES = {"attic_like": "place"}

PROMPT_TEMPLATES: Tuple[str, ...] = (
    "a {adj} {thing} appears in the {place} {time} and nobody knows why.",
    "write about {name} who {verb} in the {place} until the {nature} changed.",
    "the {nature} stops one day and the {place} must decide what to do.",
    "a letter about a {adj} {thing} arrives fifty years late.",
    "describe the last {time_word} before the {adj} {nature} reaches the {place}.",
    "{name} trades a {thing} for a {thing} and regrets it {time}.",
    "the {place} keeps a {adj} secret under the {nature}.",
    "a stranger asks {name} to guard a {adj} {thing} for one night.",
)


def _fill(template: str, rng: np.random.Generator) -> str:
    out = []
    i = 0
    while i < len(template):
        if template[i] == "{":
            j = template.index("}", i)
            slot = template[i + 1 : j]
            slot = _SLOT_ALIASES.get(slot, slot)
            if slot == "time_word":
                out.append(str(rng.choice(("night", "morning", "week", "tide", "winter"))))
            else:
                out.append(str(rng.choice(BANKS[slot])))
            i = j + 1
        else:
            out.append(template[i])
            i += 1
    return "".join(out)


def synth_story(rng: np.random.Generator, genre: Optional[str] = None, sentences: Optional[int] = None) -> str:
    if genre is None:
        genre = str(rng.choice(sorted(TEMPLATES)))
    pool = TEMPLATES[genre]
    n = sentences if sentences is not None else int(rng.integers(5, 10))
    picked = [str(pool[int(rng.integers(len(pool)))]) for _ in range(n)]
    return " ".join(_fill(t, rng) for t in picked)


def synth_corpus(seed: int = 20240901, n_docs: int = 3200) -> List[str]:
    """Deterministic multi-genre training corpus, one document per entry."""
    rng = np.random.default_rng(seed)
    genres = sorted(TEMPLATES)
    return [synth_story(rng, genre=genres[i % len(genres)]) for i in range(n_docs)]


def synth_dataset(
    seed: int = 20240902,
    n_prompts: int = 12,
    n_responses: int = 55,
) -> List[dict]:
    """Writing-prompt records shaped like the raw ingestion input."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_prompts):
        template = PROMPT_TEMPLATES[i % len(PROMPT_TEMPLATES)]
        prompt = _fill(template, rng)
        responses = [synth_story(rng) for _ in range(n_responses)]
        records.append({"prompt": prompt, "responses": responses})
    return records


def _read_resource(name: str) -> str:
    return resources.files("divergauge").joinpath("data", name).read_text(encoding="utf-8")


def load_bundled_corpus() -> List[str]:
    return [line for line in _read_resource(CORPUS_RESOURCE).splitlines() if line.strip()]


def load_bundled_dataset() -> List[dict]:
    return [json.loads(line) for line in _read_resource(DATASET_RESOURCE).splitlines() if line.strip()]


_LM_CACHE: Dict[tuple, NGramLM] = {}


def bundled_base_lm(order: int = 3, alpha: float = 0.01) -> NGramLM:
    key = ("base", order, alpha)
    if key not in _LM_CACHE:
        corpus = [tokenize(doc) for doc in load_bundled_corpus()]
        _LM_CACHE[key] = train_ngram_lm(corpus, order=order, alpha=alpha)
    return _LM_CACHE[key]


def bundled_lm_pair(order: int = 3, tau: float = 0.6, alpha: float = 0.01) -> Tuple[NGramLM, NGramLM]:
    """The default surrogate pair: (base, sharpened-instruct)."""
    base = bundled_base_lm(order=order, alpha=alpha)
    key = ("sharp", order, tau, alpha)
    if key not in _LM_CACHE:
        _LM_CACHE[key] = sharpen_lm(base, SharpenSpec(method="temperature", tau=tau))
    return base, _LM_CACHE[key]
