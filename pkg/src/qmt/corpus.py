"""Bilingual corpus files and seeded template-based corpus generation."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .grammar import GrammarError, Lexicon, parse

SRC_LANG, TGT_LANG = "en", "fa"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    name: str
    src: str  # slot placeholders in braces, other tokens literal
    tgt: str
    slots: dict  # slot -> tuple of concepts


NAMES = ("sara", "bob", "ali", "maryam")
OBJECTS = ("book", "pen", "apple", "bread", "flower")
PLACES = ("bookshop", "park", "market", "garden", "school")

DEFAULT_TEMPLATES = (
    Template("purchase", "{S} {V} the {O} from the {P}", "{S} {O} ra az {P} {V}",
             {"S": NAMES, "V": ("buy", "take"), "O": OBJECTS, "P": PLACES}),
    Template("transitive", "{S} {V} {O}", "{S} {O} ra {V}",
             {"S": NAMES, "V": ("see", "like", "call"), "O": NAMES}),
    Template("location", "{S} {V} in the {P}", "{S} dar {P} {V}",
             {"S": NAMES, "V": ("walk", "run", "sit"), "P": PLACES}),
)

# (template, slot filling) pairs named in the source material
ATTESTED = (
    ("purchase", {"S": "sara", "V": "buy", "O": "book", "P": "bookshop"}),
    ("transitive", {"S": "sara", "V": "see", "O": "bob"}),
    ("location", {"S": "sara", "V": "walk", "P": "park"}),
    ("location", {"S": "bob", "V": "walk", "P": "park"}),
)


@dataclass(frozen=True)
class Pair:
    id: str
    src: str
    tgt: str


@dataclass(frozen=True)
class Corpus:
    pairs: tuple[Pair, ...]
    src_lang: str = SRC_LANG
    tgt_lang: str = TGT_LANG
    seed: int | None = None

    def __post_init__(self):
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise CorpusError("duplicate pair ids")

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def dumps(self) -> str:
        lines = [f"#lang {self.src_lang} {self.tgt_lang}"]
        lines += [f"{p.id}\t{p.src}\t{p.tgt}" for p in self.pairs]
        return "\n".join(lines) + "\n"

    def dump(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "Corpus":
        src_lang, tgt_lang = SRC_LANG, TGT_LANG
        pairs = []
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] == "lang":
                    src_lang, tgt_lang = parts[1], parts[2]
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise CorpusError(f"line {n}: expected id<TAB>src<TAB>tgt")
            pairs.append(Pair(*cols))
        return cls(tuple(pairs), src_lang, tgt_lang)

    @classmethod
    def load(cls, path) -> "Corpus":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def check(self, lexicon: Lexicon):
        """Raise if any sentence is not covered or does not reduce to s."""
        for p in self.pairs:
            parse(p.src, lexicon, self.src_lang)
            parse(p.tgt, lexicon, self.tgt_lang)


def default_lexicon() -> Lexicon:
    with resources.files("qmt.data").joinpath("lexicon.json").open(encoding="utf-8") as fh:
        import json
        return Lexicon.from_records(json.load(fh))


def _surface(lexicon: Lexicon, concept: str, language: str) -> str:
    for e in lexicon:
        if e.concept == concept and e.language == language:
            return e.surface
    raise CorpusError(f"lexicon has no {language} word for concept {concept!r}")


def realize(t: Template, filling: dict, lexicon: Lexicon, src_lang=SRC_LANG, tgt_lang=TGT_LANG):
    src = t.src.format(**{k: _surface(lexicon, c, src_lang) for k, c in filling.items()})
    tgt = t.tgt.format(**{k: _surface(lexicon, c, tgt_lang) for k, c in filling.items()})
    return src, tgt


def _fillings(t: Template):
    keys = list(t.slots)
    for combo in itertools.product(*(t.slots[k] for k in keys)):
        filling = dict(zip(keys, combo))
        # a name does not act on itself
        if filling.get("S") is not None and filling.get("S") == filling.get("O"):
            continue
        yield filling


def gen_corpus(lexicon: Lexicon, n_pairs: int, seed: int,
               templates=DEFAULT_TEMPLATES, attested=ATTESTED) -> Corpus:
    """Attested pairs first, then seeded template substitutions.

    Every emitted sentence is parsed; a template that fails to reduce is a
    generation error, not a silent skip.
    """
    by_name = {t.name: t for t in templates}
    seen, pairs = set(), []

    def emit(t, filling):
        src, tgt = realize(t, filling, lexicon)
        if (src, tgt) in seen:
            return
        try:
            parse(src, lexicon, SRC_LANG)
            parse(tgt, lexicon, TGT_LANG)
        except GrammarError as exc:
            raise CorpusError(f"template {t.name!r} produced an ungrammatical pair: {exc}") from exc
        seen.add((src, tgt))
        pairs.append(Pair(f"p{len(pairs):03d}", src, tgt))

    for name, filling in attested:
        if len(pairs) >= n_pairs:
            break
        emit(by_name[name], filling)

    pool = [(t, f) for t in templates for f in _fillings(t)]
    order = np.random.default_rng(seed).permutation(len(pool))
    for k in order:
        if len(pairs) >= n_pairs:
            break
        emit(*pool[k])
    if len(pairs) < n_pairs:
        raise CorpusError(f"templates exhausted after {len(pairs)} of {n_pairs} pairs")
    return Corpus(tuple(pairs), SRC_LANG, TGT_LANG, seed)
