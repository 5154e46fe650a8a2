"""Pregroup types, lexicon lookup and reduction to the sentence type."""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

BASIC_TYPES = ("n", "s")


class GrammarError(Exception):
    pass


class TypeParseError(GrammarError):
    pass


class LexiconLookupError(GrammarError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class UngrammaticalError(GrammarError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True, order=True)
class SimpleType:
    """A basic type with an adjoint order: -1 is ``x.l``, +1 is ``x.r``."""

    base: str
    adjoint: int = 0

    def __post_init__(self):
        if self.base not in BASIC_TYPES:
            raise TypeParseError(f"unknown basic type {self.base!r}")

    @property
    def l(self) -> "SimpleType":
        return SimpleType(self.base, self.adjoint - 1)

    @property
    def r(self) -> "SimpleType":
        return SimpleType(self.base, self.adjoint + 1)

    def __str__(self):
        suffix = ".l" if self.adjoint < 0 else ".r"
        return self.base + suffix * abs(self.adjoint)


@dataclass(frozen=True)
class PregroupType:
    factors: tuple[SimpleType, ...] = ()

    def __len__(self):
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __getitem__(self, i):
        return self.factors[i]

    def __matmul__(self, other: "PregroupType") -> "PregroupType":
        return PregroupType(self.factors + other.factors)

    def __str__(self):
        return format_type(self)


_FACTOR_RE = re.compile(r"^([ns])((?:\.[lr])*)$")


def parse_type(text: str) -> PregroupType:
    """Parse the dotted notation, e.g. ``"n.r s n.l n.l"``.

    The empty string is the monoidal unit.
    """
    factors = []
    for token in text.split():
        m = _FACTOR_RE.match(token)
        if m is None:
            raise TypeParseError(f"malformed type factor {token!r} in {text!r}")
        adjoint = 0
        for suffix in m.group(2).split(".")[1:]:
            # n.l.r is legal and cancels back to n
            adjoint += -1 if suffix == "l" else 1
        factors.append(SimpleType(m.group(1), adjoint))
    return PregroupType(tuple(factors))


def format_type(t: PregroupType) -> str:
    return " ".join(str(f) for f in t.factors)


def cancels(left: SimpleType, right: SimpleType) -> bool:
    """Contraction x^(k) x^(k+1) -> 1 (covers x.l x and x x.r)."""
    return left.base == right.base and right.adjoint == left.adjoint + 1


S = SimpleType("s")
N = SimpleType("n")


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    language: str
    type: PregroupType
    concept: str

    def __post_init__(self):
        if not self.concept:
            raise GrammarError(f"entry {self.surface!r} has an empty concept")

    @property
    def wire_count(self) -> int:
        return len(self.type)

    def param_arity(self, iqp_layers: int = 1) -> int:
        k = self.wire_count
        return 3 if k == 1 else iqp_layers * (k - 1)

    def to_json(self) -> dict:
        return {
            "surface": self.surface,
            "language": self.language,
            "type": format_type(self.type),
            "concept": self.concept,
        }


class Lexicon:
    """Word -> type table. A surface form may carry several entries."""

    def __init__(self, entries: Iterable[LexiconEntry] = ()):
        self.entries: list[LexiconEntry] = []
        self._index: dict[tuple[str, str], list[LexiconEntry]] = {}
        for e in entries:
            self.add(e)

    def add(self, entry: LexiconEntry):
        bucket = self._index.setdefault((entry.surface, entry.language), [])
        if any(e.type == entry.type for e in bucket):
            raise GrammarError(
                f"duplicate entry {entry.surface!r} [{entry.language}] {format_type(entry.type)}"
            )
        bucket.append(entry)
        self.entries.append(entry)

    def lookup(self, surface: str, language: str) -> list[LexiconEntry]:
        try:
            return self._index[(surface, language)]
        except KeyError:
            raise LexiconLookupError(
                f"word {surface!r} not in lexicon for language {language!r}"
            ) from None

    def __contains__(self, key):
        return key in self._index

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def languages(self) -> list[str]:
        return sorted({e.language for e in self.entries})

    def concepts(self) -> list[str]:
        return sorted({e.concept for e in self.entries})

    def by_language(self, language: str) -> list[LexiconEntry]:
        return [e for e in self.entries if e.language == language]

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "Lexicon":
        return cls(
            LexiconEntry(r["surface"], r["language"], parse_type(r["type"]), r["concept"])
            for r in records
        )

    @classmethod
    def load(cls, path) -> "Lexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_records(json.load(fh))

    def to_records(self) -> list[dict]:
        return [e.to_json() for e in self.entries]

    def dump(self, path):
        Path(path).write_text(
            json.dumps(self.to_records(), indent=1, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )


@dataclass(frozen=True)
class TypedSentence:
    words: tuple[LexiconEntry, ...]
    language: str

    def __post_init__(self):
        if not self.words:
            raise GrammarError("empty sentence")

    @property
    def surfaces(self) -> list[str]:
        return [w.surface for w in self.words]

    @property
    def text(self) -> str:
        return " ".join(self.surfaces)

    def factors(self) -> list[SimpleType]:
        return [f for w in self.words for f in w.type]


@dataclass(frozen=True)
class ReductionProof:
    cups: tuple[tuple[int, int], ...]
    survivor: int | None
    n_factors: int = field(default=0)

    def to_json(self) -> dict:
        return {"cups": [list(c) for c in self.cups], "survivor": self.survivor}


def _search(factors: Sequence[SimpleType], target: SimpleType | None):
    """Backtracking over contraction sequences, adjacent pairs first.

    Returns (cups, survivors) for the first full reduction found, or
    (None, best_partial) where best_partial has the fewest survivors.
    """
    failed: set[tuple[int, ...]] = set()
    best = [None, tuple(range(len(factors)))]

    def done(remaining):
        if target is None:
            return len(remaining) == 1
        return len(remaining) == 1 and factors[remaining[0]] == target

    def step(remaining: tuple[int, ...], cups: list[tuple[int, int]]):
        if len(remaining) < len(best[1]):
            best[0], best[1] = list(cups), remaining
        if done(remaining):
            return list(cups)
        if remaining in failed:
            return None
        for pos in range(len(remaining) - 1):
            i, j = remaining[pos], remaining[pos + 1]
            if cancels(factors[i], factors[j]):
                cups.append((i, j))
                found = step(remaining[:pos] + remaining[pos + 2:], cups)
                if found is not None:
                    return found
                cups.pop()
        failed.add(remaining)
        return None

    cups = step(tuple(range(len(factors))), [])
    return cups, best


def reduce_factors(factors: Sequence[SimpleType], target: SimpleType | None = S) -> ReductionProof:
    """Reduce a flat factor sequence to ``target`` (any single factor if None)."""
    if not factors:
        raise UngrammaticalError("empty factor sequence")
    cups, (partial_cups, partial_left) = _search(list(factors), target)
    if cups is None:
        partial = ReductionProof(
            tuple(sorted(partial_cups or [])), None, len(factors)
        )
        left = " ".join(str(factors[i]) for i in partial_left)
        raise UngrammaticalError(
            f"no reduction to {target}; best partial leaves [{left}]", partial
        )
    matched = {i for c in cups for i in c}
    (survivor,) = [i for i in range(len(factors)) if i not in matched]
    return ReductionProof(tuple(sorted(cups)), survivor, len(factors))


def reduce(ts: TypedSentence, target: SimpleType | None = S) -> ReductionProof:
    return reduce_factors(ts.factors(), target)


def tokenize_sentence(text: str) -> list[str]:
    return text.replace(".", " ").split()


def assign_types(sentence, lexicon: Lexicon, language: str) -> TypedSentence:
    """Pair each word with a lexicon type.

    When some word has several entries, the first combination (in lexicon
    order) that reduces to ``s`` wins; if none reduces, the first
    combination is returned and ``reduce`` will report the failure.
    """
    words = tokenize_sentence(sentence) if isinstance(sentence, str) else list(sentence)
    if not words:
        raise GrammarError("empty sentence")
    options = [lexicon.lookup(w, language) for w in words]
    if all(len(o) == 1 for o in options):
        return TypedSentence(tuple(o[0] for o in options), language)
    for combo in itertools.product(*options):
        ts = TypedSentence(tuple(combo), language)
        try:
            reduce(ts)
        except UngrammaticalError:
            continue
        return ts
    return TypedSentence(tuple(o[0] for o in options), language)


def parse(sentence, lexicon: Lexicon, language: str) -> tuple[TypedSentence, ReductionProof]:
    ts = assign_types(sentence, lexicon, language)
    return ts, reduce(ts)


def check_proof(factors: Sequence[SimpleType], proof: ReductionProof, target=S) -> bool:
    """Replay a proof: cups must be non-crossing contractions leaving one target."""
    seen = set()
    for i, j in proof.cups:
        if not (0 <= i < j < len(factors)) or i in seen or j in seen:
            return False
        seen.update((i, j))
        if not cancels(factors[i], factors[j]):
            return False
    for (i, j), (k, l) in itertools.permutations(proof.cups, 2):
        if i < k < j < l:
            return False
    # nothing may be left uncancelled strictly inside a cup
    for i, j in proof.cups:
        if any(m not in seen for m in range(i + 1, j)):
            return False
    left = [i for i in range(len(factors)) if i not in seen]
    if left != [proof.survivor]:
        return False
    return target is None or factors[proof.survivor] == target
