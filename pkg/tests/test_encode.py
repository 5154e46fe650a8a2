import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmt.circuit import Gate, ParamCircuit, bind, init_params, strip_angles
from qmt.corpus import gen_corpus
from qmt.encode import (GATE_DIM, PAD, STEP_SEP, WORD_SEP, CapacityError, DecodeError,
                        SentenceEncoding, Tokenizer, corpus_shape, decode_sentence,
                        encode_sentence, partition_words, required_shape, same_circuit,
                        schedule, schedule_circuit, split_words)
from qmt.pipeline import corpus_circuits, sentence_circuit

from conftest import EN, SSB


@pytest.fixture(scope="module")
def reg(lexicon):
    return init_params(lexicon, 0)


@pytest.fixture(scope="module")
def ssb(lexicon):
    return sentence_circuit(SSB, lexicon, "en")


@pytest.fixture(scope="module")
def corpus_pairs(lexicon):
    return corpus_circuits(gen_corpus(lexicon, 80, 0), lexicon)


def test_partition_ssb(ssb):
    assert partition_words(ssb) == [[0], [1, 2, 3], [4]]


def test_partition_fallback_ignores_cnot(ssb):
    raw = ParamCircuit(ssb.n_qubits, tuple(Gate(g.kind, g.qubits, g.param) for g in ssb.gates),
                       ssb.postselect, ssb.sentence_qubit)
    assert partition_words(raw) == [[0], [1, 2, 3], [4]]


def test_partition_single_word():
    c = ParamCircuit(2, (Gate("H", (0,), None, 0), Gate("H", (1,), None, 0),
                         Gate("CRZ", (0, 1), "x", 0)), frozenset(), 0, word_groups=((0, 1),))
    assert partition_words(c) == [[0, 1]]


def test_partition_english(lexicon):
    c = sentence_circuit(EN, lexicon, "en")
    assert [len(g) for g in partition_words(c)] == [1, 4, 2, 1, 2, 2, 1]


def test_schedule_ssb_seven_steps(ssb):
    frames = schedule_circuit(ssb)
    assert len(frames) == 7
    assert required_shape(ssb) == (7, 3)
    kinds = [[ssb.gates[i].kind for i in f] for f in frames]
    assert kinds[2] == ["RX", "H", "H", "H"]  # Sara's last RX packs with the verb's Hadamards


def test_schedule_trivia():
    one = ParamCircuit(1, (Gate("RX", (0,), "a", 0),), frozenset(), 0, word_groups=((0,),))
    assert schedule(one, [0]) == [[0]]
    two = ParamCircuit(1, (Gate("RX", (0,), "a", 0), Gate("RZ", (0,), "b", 0)), frozenset(), 0,
                       word_groups=((0,),))
    assert schedule(two, [0]) == [[0], [1]]


def test_schedule_excludes_cups(ssb):
    used = {i for f in schedule_circuit(ssb) for i in f}
    assert all(ssb.gates[i].word is not None for i in used)
    assert {i for i, g in enumerate(ssb.gates) if g.word is not None} == used


def test_frames_never_share_qubit(corpus_pairs):
    for _, s, t in corpus_pairs[:20]:
        for c in (s, t):
            for f in schedule_circuit(c):
                qs = [q for i in f for q in c.gates[i].qubits]
                assert len(qs) == len(set(qs))


def test_encode_ssb_shape(ssb, reg):
    e = encode_sentence(ssb, reg, (7, 3))
    assert e.data.shape == (3, 7, 3, GATE_DIM)
    assert e.frames().shape == (3, 7, 24)
    assert e.meta["cups"] == [[0, 1], [3, 4]] and e.meta["widths"] == [1, 3, 1]


def test_gate_vector_invariants(ssb, reg):
    e = encode_sentence(ssb, reg, (7, 3))
    for row in e.data.reshape(-1, GATE_DIM):
        if row.any():
            assert row[:6].sum() == 1
            assert 0 <= row[6] < 1 and 0 <= row[7] < 1
    # frames sorted top-down
    for w in range(3):
        for t in range(7):
            offs = [r[7] for r in e.data[w, t] if r.any()]
            assert offs == sorted(offs)


def test_capacity_error(ssb, reg):
    with pytest.raises(CapacityError) as exc:
        encode_sentence(ssb, reg, (5, 3))
    assert exc.value.required == (7, 3)


def test_round_trip_ssb(ssb, reg):
    b = bind(ssb, reg)
    back = decode_sentence(encode_sentence(ssb, reg, (7, 3)))
    assert same_circuit(back, b)


def test_round_trip_corpus(corpus_pairs, reg):
    circuits = [c for _, s, t in corpus_pairs for c in (s, t)]
    assert len(circuits) == 160
    shape = corpus_shape(circuits)
    for c in circuits:
        assert same_circuit(decode_sentence(encode_sentence(c, reg, shape)), bind(c, reg))


def test_round_trip_two_layers(lexicon, reg):
    c = sentence_circuit(EN, lexicon, "en", iqp_layers=2)
    r2 = init_params(lexicon, 0, iqp_layers=2)
    back = decode_sentence(encode_sentence(c, r2))
    assert same_circuit(back, bind(c, r2), strict_order=False)


def test_empty_encoding_decodes_empty():
    e = SentenceEncoding(np.zeros((1, 3, 2, GATE_DIM)), {"widths": [1], "cups": []})
    assert decode_sentence(e).gates == ()


def test_all_padding_word(ssb, reg):
    e = encode_sentence(ssb, reg, (9, 4))
    assert not e.data[:, 7:].any()


def test_tampered_one_hot(ssb, reg):
    e = encode_sentence(ssb, reg, (7, 3))
    e.data[0, 0, 0, 1:3] = 1.0
    with pytest.raises(DecodeError, match="word 0, step 0"):
        decode_sentence(e)


def test_tokenizer_vocab():
    tok = Tokenizer(32, 4)
    assert tok.vocab_size == 3 + 4 + 3 * 4 * 32
    assert tok.angle_bin(0.0) == 0 and tok.bin_center(0) == pytest.approx(math.pi / 32)


def test_nop_frame_is_step_sep():
    e = SentenceEncoding(np.zeros((1, 1, 1, GATE_DIM)), {"widths": [1]})
    assert Tokenizer().tokenize(e).ids == [STEP_SEP, WORD_SEP]


def test_token_round_trip_corpus(corpus_pairs, reg):
    circuits = [c for _, s, t in corpus_pairs for c in (s, t)]
    shape = corpus_shape(circuits)
    tok = Tokenizer(32, 4)
    worst = 0.0
    for c in circuits:
        e = encode_sentence(c, reg, shape)
        ts = tok.tokenize(e)
        back = tok.detokenize(ts)
        assert np.array_equal(back.data[..., :6], e.data[..., :6])
        assert np.array_equal(back.data[..., 7], e.data[..., 7])
        d = np.abs(back.data[..., 6] - e.data[..., 6]) * 2 * math.pi
        worst = max(worst, d.max())
        assert same_circuit(decode_sentence(back), bind(c, reg), atol=math.pi / 32)
    assert worst <= math.pi / 32


@settings(max_examples=200)
@given(st.floats(0, 2 * math.pi, exclude_max=True), st.sampled_from([8, 16, 32, 64]))
def test_bin_center_error(theta, bins):
    tok = Tokenizer(bins)
    assert abs(tok.bin_center(tok.angle_bin(theta)) - theta) <= math.pi / bins + 1e-12


def test_detokenize_errors():
    tok = Tokenizer()
    with pytest.raises(DecodeError):
        tok.detokenize([tok.vocab_size])
    with pytest.raises(DecodeError):
        split_words([3, PAD, 4])


def test_tokenizer_width_overflow(reg, lexicon):
    c = sentence_circuit(EN, lexicon, "en")
    with pytest.raises(CapacityError):
        Tokenizer(32, 3).tokenize(encode_sentence(c, reg))


def test_detokenize_infers_widths(ssb, reg):
    tok = Tokenizer()
    ids = tok.tokenize(encode_sentence(ssb, reg)).ids
    assert tok.detokenize(ids).meta["widths"] == [1, 3, 1]


def test_corpus_shape(corpus_pairs):
    circuits = [c for _, s, t in corpus_pairs for c in (s, t)]
    t_max, g_max = corpus_shape(circuits)
    assert all(required_shape(c)[0] <= t_max and required_shape(c)[1] <= g_max for c in circuits)


def test_encode_deterministic(ssb, reg):
    a, b = encode_sentence(ssb, reg), encode_sentence(ssb, reg)
    assert np.array_equal(a.data, b.data) and a.meta == b.meta


def test_encode_accepts_bound(ssb, reg):
    b = bind(ssb, reg)
    assert np.array_equal(encode_sentence(b).data, encode_sentence(ssb, reg).data)
    assert strip_angles(b) == ssb
