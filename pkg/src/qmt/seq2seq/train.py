"""Training loop, evaluation, checkpoints and greedy translation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..encode import PAD, STEP_SEP, WORD_SEP, Tokenizer, decode_sentence, split_words
from .layers import NumericError, sparse_ce
from .models import ModelConfig, Seq2Seq, shift_right
from .optim import make_optimizer

CHECKPOINT_FORMAT = "qmt-seq2seq"
CHECKPOINT_VERSION = 1


class DivergenceError(NumericError):
    def __init__(self, message, last_good_epoch, history):
        super().__init__(message)
        self.last_good_epoch = last_good_epoch
        self.history = history


class TranslationError(ValueError):
    def __init__(self, message, tokens=()):
        super().__init__(message)
        self.tokens = list(tokens)


def pad_sequences(seqs, length=None, value=PAD) -> np.ndarray:
    length = length or max(len(s) for s in seqs)
    out = np.full((len(seqs), length), value, dtype=np.int64)
    for i, s in enumerate(seqs):
        s = list(s)[:length]
        out[i, : len(s)] = s
    return out


def target_weights(tgt: np.ndarray) -> np.ndarray:
    """1 on every non-PAD position and on the first PAD (end of sequence)."""
    w = (tgt != PAD).astype(float)
    lengths = w.sum(axis=1).astype(int)
    rows = np.flatnonzero(lengths < tgt.shape[1])
    w[rows, lengths[rows]] = 1.0
    return w


@dataclass
class Dataset:
    src: np.ndarray
    tgt: np.ndarray

    def __post_init__(self):
        if len(self.src) != len(self.tgt):
            raise ValueError("source and target counts differ")
        self.weights = target_weights(self.tgt)

    def __len__(self):
        return len(self.src)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.src[idx], self.tgt[idx])

    @classmethod
    def from_sequences(cls, src_seqs, tgt_seqs, aligned=False, extra=1):
        """Pad both sides; ``aligned`` pads them to a common length (M2).

        Targets get ``extra`` trailing PAD slots so the end marker exists.
        """
        ls = max(len(s) for s in src_seqs)
        lt = max(len(t) for t in tgt_seqs) + extra
        if aligned:
            ls = lt = max(ls, lt)
        return cls(pad_sequences(src_seqs, ls), pad_sequences(tgt_seqs, lt))


def split_dataset(data: Dataset, val_split: float, seed: int):
    n = len(data)
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(round(val_split * n)) if n > 1 else 0
    return data.subset(np.sort(order[n_val:])), data.subset(np.sort(order[:n_val]))


@dataclass
class TrainHistory:
    epoch: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    mae: list = field(default_factory=list)
    mse: list = field(default_factory=list)

    def __len__(self):
        return len(self.epoch)

    def append(self, epoch, train_loss, val_loss, mae, mse):
        self.epoch.append(epoch)
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.mae.append(mae)
        self.mse.append(mse)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss", "mae", "mse"])
            for row in zip(self.epoch, self.train_loss, self.val_loss, self.mae, self.mse):
                w.writerow([row[0]] + [f"{x:.17g}" for x in row[1:]])


def _forward(model: Seq2Seq, src, tgt):
    return model.forward(src, None if model.cfg.variant == "M2" else shift_right(tgt))


def loss_and_grads(model: Seq2Seq, src, tgt, weights):
    logits, cache = _forward(model, src, tgt)
    loss, dlogits, _ = sparse_ce(logits, tgt, weights)
    return loss, model.backward(dlogits, cache)


def evaluate(model: Seq2Seq, data: Dataset, batch: int = 256):
    """(mean CE, MAE, MSE) over weighted target positions, teacher forced.

    MAE/MSE compare argmax ids with target ids, both divided by the
    vocabulary size.
    """
    V = model.cfg.vocab_size
    tot_loss = tot_abs = tot_sq = n = 0.0
    for s in range(0, len(data), batch):
        src, tgt, w = data.src[s:s + batch], data.tgt[s:s + batch], data.weights[s:s + batch]
        logits, _ = _forward(model, src, tgt)
        loss, _, _ = sparse_ce(logits, tgt, w)
        k = w.sum()
        tot_loss += loss * k
        err = (logits.argmax(-1) - tgt) / V
        tot_abs += (np.abs(err) * w).sum()
        tot_sq += (err * err * w).sum()
        n += k
    if n == 0:
        return 0.0, 0.0, 0.0
    return tot_loss / n, tot_abs / n, tot_sq / n


def train(model: Seq2Seq, dataset: Dataset, optimizer, epochs: int, batch: int = 16,
          seed: int = 0, val_split: float = 0.2, callback=None) -> TrainHistory:
    """Mini-batch BPTT. The validation split is drawn once from ``seed``."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    train_set, val_set = split_dataset(dataset, val_split, seed)
    rng = np.random.default_rng(seed + 1)
    history = TrainHistory()
    last_good = {k: v.copy() for k, v in model.params.items()}
    start = getattr(model, "epoch", 0)
    for ep in range(start + 1, start + epochs + 1):
        order = rng.permutation(len(train_set))
        tot, count = 0.0, 0.0
        for s in range(0, len(order), batch):
            idx = np.sort(order[s:s + batch])
            src, tgt, w = train_set.src[idx], train_set.tgt[idx], train_set.weights[idx]
            try:
                loss, grads = loss_and_grads(model, src, tgt, w)
            except NumericError as exc:
                model.params = last_good
                raise DivergenceError(f"epoch {ep}, batch {s // batch}: {exc}", ep - 1, history) from exc
            if not math.isfinite(loss):
                model.params = last_good
                raise DivergenceError(f"non-finite loss at epoch {ep}", ep - 1, history)
            optimizer.step(model.params, grads)
            tot += loss * w.sum()
            count += w.sum()
        evaluated = val_set if len(val_set) else train_set
        val_loss, mae, mse = evaluate(model, evaluated)
        if not math.isfinite(val_loss):
            model.params = last_good
            raise DivergenceError(f"non-finite validation loss at epoch {ep}", ep - 1, history)
        history.append(ep, tot / max(count, 1.0), val_loss, mae, mse)
        last_good = {k: v.copy() for k, v in model.params.items()}
        model.epoch = ep
        if callback is not None:
            callback(ep, history)
    return history


# ---------------------------------------------------------------- checkpoints

def _arrays_to_json(d):
    if d is None:
        return None
    return {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()} for k, v in d.items()}


def _arrays_from_json(d):
    if d is None:
        return None
    return {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in d.items()}


def save_checkpoint(path, model: Seq2Seq, optimizer=None, extra: dict | None = None):
    opt = None
    if optimizer is not None:
        opt = {}
        for k, v in optimizer.state().items():
            opt[k] = _arrays_to_json(v) if isinstance(v, dict) else v
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.cfg.to_json(),
        "epoch": getattr(model, "epoch", 0),
        "params": _arrays_to_json(model.params),
        "optimizer": opt,
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    model = Seq2Seq(ModelConfig(**doc["config"]), _arrays_from_json(doc["params"]))
    model.epoch = doc.get("epoch", 0)
    optimizer = None
    if doc.get("optimizer"):
        st = doc["optimizer"]
        optimizer = make_optimizer(st["kind"], st["lr"])
        for key in ("rho", "eps", "beta1", "beta2"):
            if key in st:
                setattr(optimizer, key, st[key])
        optimizer.load_state({k: _arrays_from_json(v) if isinstance(v, dict) else v
                              for k, v in st.items()})
    return model, optimizer, doc.get("extra", {})


# ---------------------------------------------------------------- decoding

class ConstrainedChooser:
    """Greedy choice restricted to token sequences the shape header allows.

    Per word: exactly ``t_max`` steps, each ended by STEP_SEP and holding at
    most ``g_max`` gates, then WORD_SEP. PAD may only start at a word
    boundary and is absorbing. An argmax outside the legal set counts as a
    repair.
    """

    def __init__(self, batch: int, vocab: int, t_max: int, g_max: int):
        self.t_max, self.g_max = t_max, g_max
        self.steps = np.zeros(batch, dtype=int)
        self.gates = np.zeros(batch, dtype=int)
        self.done = np.zeros(batch, dtype=bool)
        self.repairs = np.zeros(batch, dtype=int)
        self.gate_ids = np.arange(WORD_SEP + 1, vocab)

    def legal(self, b) -> np.ndarray:
        allowed = []
        if self.done[b]:
            return np.array([PAD])
        if self.steps[b] == self.t_max:
            return np.array([WORD_SEP])
        if self.steps[b] == 0 and self.gates[b] == 0:
            allowed.append(PAD)
        allowed.append(STEP_SEP)
        ids = np.array(allowed)
        if self.gates[b] < self.g_max:
            ids = np.concatenate([ids, self.gate_ids])
        return ids

    def __call__(self, t, probs):
        out = np.empty(len(probs), dtype=int)
        for b in range(len(probs)):
            legal = self.legal(b)
            raw = int(probs[b].argmax())
            tok = raw if raw in legal else int(legal[probs[b][legal].argmax()])
            self.repairs[b] += tok != raw
            out[b] = tok
            if tok == PAD:
                self.done[b] = True
            elif tok == WORD_SEP:
                self.steps[b] = self.gates[b] = 0
            elif tok == STEP_SEP:
                self.steps[b] += 1
                self.gates[b] = 0
            else:
                self.gates[b] += 1
        return out


def predict_tokens(model: Seq2Seq, src_ids, max_len: int, shape, constrained=True):
    """Greedy decode one or more padded source rows; returns (ids rows, repairs)."""
    src = np.atleast_2d(np.asarray(src_ids, dtype=np.int64))
    t_max, g_max = shape
    chooser = ConstrainedChooser(len(src), model.cfg.vocab_size, t_max, g_max)
    if not constrained:
        def pick(t, probs):
            return probs.argmax(-1)
    else:
        pick = chooser
    out = model.step_decoder(src, max_len, pick)
    rows = []
    for row in out:
        row = list(int(x) for x in row)
        # cut at the first PAD, drop an unfinished trailing word
        if PAD in row:
            row = row[: row.index(PAD)]
        if WORD_SEP in row:
            row = row[: len(row) - row[::-1].index(WORD_SEP)]
        else:
            row = []
        rows.append(row)
    return rows, chooser.repairs.tolist()


@dataclass
class Translation:
    tokens: list
    circuit: object
    text: str
    repairs: int


def _circular(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def recover_structure(word_tokens, tokenizer: Tokenizer, lexicon, registry, language, iqp_layers=1):
    """Pick, for each predicted word, the lexicon entry whose registered angles
    are nearest to the predicted ones, then parse the resulting sentence."""
    from ..circuit import word_param_names
    from ..grammar import GrammarError, TypedSentence, reduce

    entries = []
    for toks in word_tokens:
        width = tokenizer.infer_width(toks)
        angles = [tokenizer.bin_center(tokenizer.itos[t][2]) for t in toks
                  if tokenizer.is_gate(t) and tokenizer.itos[t][2] is not None]
        best, best_score = None, math.inf
        for e in lexicon.by_language(language):
            if e.wire_count != width:
                continue
            names = word_param_names(e.concept, width, iqp_layers)
            if len(names) != len(angles) or any(n not in registry for n in names):
                continue
            score = sum(_circular(a, registry[n]) for a, n in zip(angles, names))
            if score < best_score:
                best, best_score = e, score
        if best is None:
            raise TranslationError(f"no {language} word of width {width} fits the predicted gates")
        entries.append(best)
    ts = TypedSentence(tuple(entries), language)
    try:
        proof = reduce(ts)
    except GrammarError as exc:
        raise TranslationError(f"recovered sentence {ts.text!r} does not parse: {exc}") from exc
    return ts, proof


def translate(model: Seq2Seq, src_circuit, registry, *, tokenizer: Tokenizer, shape,
              src_len: int, max_len: int, lexicon, language: str,
              iqp_layers: int = 1) -> Translation:
    """Source circuit -> predicted target tokens -> target circuit."""
    from ..encode import encode_sentence

    enc = encode_sentence(src_circuit, registry, shape)
    src_ids = pad_sequences([tokenizer.tokenize(enc).ids], src_len)
    (tokens,), (repairs,) = predict_tokens(model, src_ids, max_len, shape)
    if not tokens:
        raise TranslationError("prediction is empty (PAD only)", tokens)
    words = split_words(tokens)
    try:
        ts, proof = recover_structure(words, tokenizer, lexicon, registry, language, iqp_layers)
    except TranslationError as exc:
        exc.tokens = tokens
        raise
    widths = [e.wire_count for e in ts.words]
    meta = {
        "widths": widths, "T_max": shape[0], "G_max": shape[1],
        "n_qubits": sum(widths), "cups": [list(c) for c in proof.cups],
        "sentence_qubit": proof.survivor, "language": language, "source_text": ts.text,
    }
    try:
        circuit = decode_sentence(tokenizer.detokenize(tokens, meta))
    except ValueError as exc:
        raise TranslationError(f"predicted tokens do not decode: {exc}", tokens) from exc
    return Translation(tokens, circuit, ts.text, repairs)

