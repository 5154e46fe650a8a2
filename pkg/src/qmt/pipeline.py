"""Glue from corpus text to circuits, encodings and seq2seq datasets."""
from __future__ import annotations

from dataclasses import dataclass, field

from .circuit import ParamCircuit, ParamRegistry, compile, init_params
from .corpus import Corpus
from .diagram import build_diagram
from .encode import Tokenizer, corpus_shape, encode_sentence, max_width
from .grammar import Lexicon, parse
from .seq2seq.train import Dataset


def sentence_circuit(text: str, lexicon: Lexicon, language: str, iqp_layers: int = 1) -> ParamCircuit:
    ts, proof = parse(text, lexicon, language)
    return compile(build_diagram(ts, proof), iqp_layers=iqp_layers)


def corpus_circuits(corpus: Corpus, lexicon: Lexicon, iqp_layers: int = 1):
    """[(id, src circuit, tgt circuit)] in corpus order."""
    return [
        (p.id,
         sentence_circuit(p.src, lexicon, corpus.src_lang, iqp_layers),
         sentence_circuit(p.tgt, lexicon, corpus.tgt_lang, iqp_layers))
        for p in corpus
    ]


@dataclass
class EncodedCorpus:
    ids: list
    src_tokens: list
    tgt_tokens: list
    meta_src: list
    meta_tgt: list
    shape: tuple
    tokenizer: Tokenizer
    registry: ParamRegistry = field(repr=False, default_factory=dict)

    def dataset(self, aligned: bool = False) -> Dataset:
        return Dataset.from_sequences(self.src_tokens, self.tgt_tokens, aligned=aligned)

    def header(self) -> dict:
        return {
            "shape": list(self.shape),
            "bins": self.tokenizer.bins,
            "max_width": self.tokenizer.max_width,
            "vocab_size": self.tokenizer.vocab_size,
            "n_pairs": len(self.ids),
        }

    def records(self):
        yield {"header": self.header()}
        for row in zip(self.ids, self.src_tokens, self.tgt_tokens, self.meta_src, self.meta_tgt):
            yield dict(zip(("id", "src_tokens", "tgt_tokens", "meta_src", "meta_tgt"), row))


def encode_corpus(pairs, registry: ParamRegistry, bins: int = 32, shape=None,
                  width: int | None = None) -> EncodedCorpus:
    circuits = [c for _, s, t in pairs for c in (s, t)]
    shape = tuple(shape) if shape is not None else corpus_shape(circuits)
    tok = Tokenizer(bins, width or max_width(circuits))
    ids, st, tt, ms, mt = [], [], [], [], []
    for pid, s, t in pairs:
        es, et = encode_sentence(s, registry, shape), encode_sentence(t, registry, shape)
        ts, tg = tok.tokenize(es), tok.tokenize(et)
        ids.append(pid)
        st.append(ts.ids)
        tt.append(tg.ids)
        ms.append(ts.meta)
        mt.append(tg.meta)
    return EncodedCorpus(ids, st, tt, ms, mt, shape, tok, registry)


def build_registry(lexicon: Lexicon, seed: int, iqp_layers: int = 1) -> ParamRegistry:
    return init_params(lexicon, seed, iqp_layers)
