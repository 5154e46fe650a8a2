import pytest

from qmt.diagram import DiagramError, build_diagram, wire_report
from qmt.grammar import N, ReductionProof, parse, reduce

from conftest import EN, FA, SSB


def diagram(text, lexicon, lang):
    return build_diagram(*parse(text, lexicon, lang))


def test_english_wires(lexicon):
    d = diagram(EN, lexicon, "en")
    assert d.total_wires == 13
    assert [n for _, n in wire_report(d)] == [1, 4, 2, 1, 2, 2, 1]
    assert d.sentence_wire == 2 and d.canonical


def test_persian_wires(lexicon):
    d = diagram(FA, lexicon, "fa")
    assert d.total_wires == 11
    assert [n for _, n in wire_report(d)] == [1, 1, 2, 2, 1, 4]
    assert sum(n for _, n in wire_report(d)) == 11


def test_sara_sees_bob(lexicon):
    d = diagram(SSB, lexicon, "en")
    assert d.total_wires == 5 and [n for _, n in wire_report(d)] == [1, 3, 1]


def test_fragment_reducing_to_n_is_not_canonical(lexicon):
    from qmt.grammar import assign_types
    ts = assign_types("Sara", lexicon, "en")
    d = build_diagram(ts, reduce(ts, target=N))
    assert wire_report(d) == [("Sara", 1)]
    assert d.sentence_wire == 0 and not d.canonical


@pytest.mark.parametrize("text,lang", [(EN, "en"), (FA, "fa"), (SSB, "en")])
def test_diagram_invariants(lexicon, text, lang):
    d = diagram(text, lexicon, lang)
    assert d.total_wires % 2 == 1
    assert len(d.cups) == (d.total_wires - 1) // 2
    firsts = [w.first_wire for w in d.words]
    assert firsts == [sum(w.wire_count for w in d.words[:k]) for k in range(len(d.words))]
    touched = [q for c in d.cups for q in c]
    assert sorted(touched + [d.sentence_wire]) == list(range(d.total_wires))
    # connections per word equal its wire count
    for k, w in enumerate(d.words):
        ends = sum(1 for q in touched if d.owner(q) == k) + (d.owner(d.sentence_wire) == k)
        assert ends == w.wire_count


def test_mismatched_proof(lexicon):
    ts, proof = parse(SSB, lexicon, "en")
    with pytest.raises(DiagramError):
        build_diagram(ts, ReductionProof(proof.cups, proof.survivor, 7))
    with pytest.raises(DiagramError):
        build_diagram(ts, ReductionProof(((0, 1),), 2, 5))


def test_json(lexicon):
    d = diagram(SSB, lexicon, "en")
    j = d.to_json()
    assert j["cups"] == [[0, 1], [3, 4]] and j["sentence_wire"] == 2
