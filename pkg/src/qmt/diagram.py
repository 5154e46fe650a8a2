"""DisCoCat wiring: one wire per type factor, cups from the reduction."""
from __future__ import annotations

import json
from dataclasses import dataclass

from .grammar import GrammarError, LexiconEntry, ReductionProof, TypedSentence


class DiagramError(GrammarError):
    pass


@dataclass(frozen=True)
class WordWires:
    entry: LexiconEntry
    wire_count: int
    first_wire: int

    @property
    def wires(self) -> range:
        return range(self.first_wire, self.first_wire + self.wire_count)


@dataclass(frozen=True)
class DiscoDiagram:
    words: tuple[WordWires, ...]
    cups: tuple[tuple[int, int], ...]
    sentence_wire: int
    total_wires: int
    language: str = ""
    # False for fragments whose open wire is not a plain s
    canonical: bool = True

    @property
    def text(self) -> str:
        return " ".join(w.entry.surface for w in self.words)

    def owner(self, wire: int) -> int:
        for idx, w in enumerate(self.words):
            if wire in w.wires:
                return idx
        raise IndexError(wire)

    def to_json(self) -> dict:
        return {
            "language": self.language,
            "text": self.text,
            "words": [
                {
                    "surface": w.entry.surface,
                    "concept": w.entry.concept,
                    "type": str(w.entry.type),
                    "wire_count": w.wire_count,
                    "first_wire": w.first_wire,
                }
                for w in self.words
            ],
            "cups": [list(c) for c in self.cups],
            "sentence_wire": self.sentence_wire,
            "total_wires": self.total_wires,
            "canonical": self.canonical,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, ensure_ascii=False)


def build_diagram(ts: TypedSentence, proof: ReductionProof) -> DiscoDiagram:
    factors = ts.factors()
    total = len(factors)
    if proof.n_factors and proof.n_factors != total:
        raise DiagramError(
            f"proof covers {proof.n_factors} factors but sentence has {total}"
        )
    if proof.survivor is None or not 0 <= proof.survivor < total:
        raise DiagramError("proof has no valid survivor for this sentence")
    used = set()
    for a, b in proof.cups:
        if not (0 <= a < b < total) or a in used or b in used:
            raise DiagramError(f"cup {(a, b)} does not fit a {total}-wire sentence")
        used.update((a, b))
    if len(used) != total - 1 or proof.survivor in used:
        raise DiagramError("cups do not cover every wire except the survivor")

    words, first = [], 0
    for entry in ts.words:
        words.append(WordWires(entry, len(entry.type), first))
        first += len(entry.type)
    canonical = factors[proof.survivor].base == "s" and factors[proof.survivor].adjoint == 0
    return DiscoDiagram(
        tuple(words), tuple(sorted(proof.cups)), proof.survivor, total, ts.language, canonical
    )


def wire_report(d: DiscoDiagram) -> list[tuple[str, int]]:
    return [(w.entry.surface, w.wire_count) for w in d.words]
