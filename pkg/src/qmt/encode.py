"""Circuit <-> nested word/time-step/gate encoding, and its integer tokenisation.

A circuit is split into per-word qubit groups, the word-owned gates are laid
into time steps, and every gate becomes an 8-vector::

    [NOP, RX, RZ, H, CRZ, CNOT one-hot] + [angle / 2pi] + [offset / width]

where ``offset`` is the gate's (control) qubit relative to the word's first
qubit. Cup gates (CNOT + H) and post-selection are kept in ``meta`` only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import TWO_PI, BoundCircuit, Gate, ParamCircuit, ParamRegistry, bind

KINDS = ("NOP", "RX", "RZ", "H", "CRZ", "CNOT")
KIND_INDEX = {k: i for i, k in enumerate(KINDS)}
GATE_DIM = len(KINDS) + 2
ANGLE_COL = len(KINDS)
OFFSET_COL = len(KINDS) + 1


class EncodingError(ValueError):
    pass


class CapacityError(EncodingError):
    def __init__(self, message, required):
        super().__init__(message)
        self.required = required


class DecodeError(EncodingError):
    pass


# ---------------------------------------------------------------- structure

def _cup_gate_mask(c: ParamCircuit) -> list[bool]:
    """True for gates that realise cups (CNOT and the H that follows on its control)."""
    if any(g.word is not None for g in c.gates):
        return [g.word is None for g in c.gates]
    mask, pending = [], set()
    for g in c.gates:
        if g.kind == "CNOT":
            mask.append(True)
            pending.add(g.qubits[0])
        elif g.kind == "H" and g.qubits[0] in pending:
            mask.append(True)
            pending.discard(g.qubits[0])
        else:
            mask.append(False)
            pending.difference_update(g.qubits)
    return mask


def partition_words(c: ParamCircuit) -> list[list[int]]:
    """Contiguous qubit groups, one per word.

    Uses the compile-time word annotations when present; otherwise the
    connected components of the gate graph with CNOT edges removed.
    """
    if c.word_groups:
        groups = [list(g) for g in c.word_groups]
        for g in c.gates:
            if g.word is None:
                continue
            if not 0 <= g.word < len(groups) or any(q not in groups[g.word] for q in g.qubits):
                raise EncodingError(f"gate {g} disagrees with word annotation")
    else:
        parent = list(range(c.n_qubits))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in c.gates:
            if g.kind != "CNOT" and len(g.qubits) == 2:
                a, b = find(g.qubits[0]), find(g.qubits[1])
                parent[max(a, b)] = min(a, b)
        comps: dict[int, list[int]] = {}
        for q in range(c.n_qubits):
            comps.setdefault(find(q), []).append(q)
        groups = sorted(comps.values())
    for grp in groups:
        if grp != list(range(grp[0], grp[0] + len(grp))):
            raise EncodingError(f"word qubits {grp} are not contiguous")
    if sorted(q for grp in groups for q in grp) != list(range(c.n_qubits)):
        raise EncodingError("word groups do not cover the circuit")
    return groups


def schedule_circuit(c: ParamCircuit) -> list[list[int]]:
    """Time steps over all word-owned gates, as gate indices.

    Gates are taken in circuit order and packed into the current step until
    one touches a qubit already used in it, which opens the next step. No
    gate is hoisted into an earlier step (no depth optimisation), and cup
    gates are skipped.
    """
    frames: list[list[int]] = []
    busy: set[int] = set()
    for i, (g, cup) in enumerate(zip(c.gates, _cup_gate_mask(c))):
        if cup:
            continue
        if not frames or busy.intersection(g.qubits):
            frames.append([])
            busy = set()
        frames[-1].append(i)
        busy.update(g.qubits)
    return frames


def schedule(c: ParamCircuit, group) -> list[list[int]]:
    """The circuit's time steps restricted to one word's qubits."""
    qs = set(group)
    return [[i for i in frame if set(c.gates[i].qubits) <= qs]
            for frame in schedule_circuit(c)]


def required_shape(c: ParamCircuit) -> tuple[int, int]:
    groups = partition_words(c)
    frames = schedule_circuit(c)
    g_max = max((len(f) for grp in groups for f in schedule(c, grp)), default=0)
    return len(frames), g_max


# ---------------------------------------------------------------- encoding

@dataclass
class SentenceEncoding:
    data: np.ndarray  # (L, T_max, G_max, GATE_DIM)
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def n_words(self) -> int:
        return self.data.shape[0]

    def frames(self) -> np.ndarray:
        """(L, T_max, G_max * GATE_DIM) flattened frames."""
        L, T, G, D = self.data.shape
        return self.data.reshape(L, T, G * D)

    def nested(self) -> list:
        return self.data.tolist()


def _norm_angle(theta: float) -> float:
    return (theta % TWO_PI) / TWO_PI


def encode_sentence(c: ParamCircuit, reg: ParamRegistry | None = None,
                    shape: tuple[int, int] | None = None) -> SentenceEncoding:
    bc = bind(c, reg) if not isinstance(c, BoundCircuit) else c
    groups = partition_words(bc)
    frames = schedule_circuit(bc)
    need_t, need_g = required_shape(bc)
    t_max, g_max = shape if shape is not None else (need_t, need_g)
    if need_t > t_max or need_g > g_max:
        raise CapacityError(
            f"circuit needs shape (T={need_t}, G={need_g}) but got (T={t_max}, G={g_max})",
            (need_t, need_g),
        )
    data = np.zeros((len(groups), t_max, g_max, GATE_DIM))
    for w, grp in enumerate(groups):
        first, width = grp[0], len(grp)
        for t, frame in enumerate(schedule(bc, grp)):
            gates = sorted(frame, key=lambda i: bc.gates[i].qubits[0])
            for slot, i in enumerate(gates):
                g, a = bc.gates[i], bc.angles[i]
                row = data[w, t, slot]
                row[KIND_INDEX[g.kind]] = 1.0
                if a is not None:
                    row[ANGLE_COL] = _norm_angle(a)
                row[OFFSET_COL] = (g.qubits[0] - first) / width
    cup_gates = [g for g, cup in zip(bc.gates, _cup_gate_mask(bc)) if cup]
    cups = [list(g.qubits) for g in cup_gates if g.kind == "CNOT"]
    meta = {
        "L": len(groups),
        "T_max": t_max,
        "G_max": g_max,
        "n_qubits": bc.n_qubits,
        "widths": [len(g) for g in groups],
        "cups": cups,
        "sentence_qubit": bc.sentence_qubit,
        "language": bc.language,
        "source_text": bc.source_text,
        "frames_used": len(frames),
    }
    return SentenceEncoding(data, meta)


def decode_sentence(e: SentenceEncoding) -> BoundCircuit:
    meta = e.meta
    widths = meta["widths"]
    if len(widths) != e.n_words:
        raise DecodeError(f"meta lists {len(widths)} words but encoding has {e.n_words}")
    n_qubits = meta.get("n_qubits", sum(widths))
    gates, angles = [], []
    first = 0
    one_hot = e.data[..., : len(KINDS)]
    for w, width in enumerate(widths):
        for t in range(e.data.shape[1]):
            for slot in range(e.data.shape[2]):
                row = e.data[w, t, slot]
                hot = one_hot[w, t, slot]
                if not row.any():
                    continue
                if not (np.isin(hot, (0.0, 1.0)).all() and hot.sum() == 1):
                    raise DecodeError(f"malformed one-hot at word {w}, step {t}, slot {slot}: {hot}")
                kind = KINDS[int(hot.argmax())]
                if kind == "NOP":
                    continue
                if kind == "CNOT":
                    raise DecodeError(f"CNOT inside a word at word {w}, step {t}, slot {slot}")
                offset = int(round(row[OFFSET_COL] * width))
                q = first + offset
                if kind == "CRZ":
                    qubits = (q, q + 1)
                else:
                    qubits = (q,)
                if any(not first <= x < first + width for x in qubits):
                    raise DecodeError(f"gate offset {offset} outside word {w} of width {width}")
                # decoded gates get positional parameter names
                name = f"{kind.lower()}{len(gates)}" if kind != "H" else None
                gates.append(Gate(kind, qubits, name, w))
                angles.append(row[ANGLE_COL] * TWO_PI if kind != "H" else None)
        first += width
    post = set()
    for a, b in meta.get("cups", []):
        gates += [Gate("CNOT", (a, b)), Gate("H", (a,))]
        angles += [None, None]
        post.update((a, b))
    groups, first = [], 0
    for width in widths:
        groups.append(tuple(range(first, first + width)))
        first += width
    return BoundCircuit(
        n_qubits, tuple(gates), frozenset(post), meta.get("sentence_qubit", 0),
        meta.get("language", ""), meta.get("source_text", ""), tuple(groups),
        angles=tuple(angles),
    )


def same_circuit(a: BoundCircuit, b: BoundCircuit, atol: float = 1e-12, strict_order=True) -> bool:
    """Structural equality ignoring parameter names; angles compared mod 2pi.

    With ``strict_order=False`` only the per-qubit gate sequences must agree,
    which is equality up to reordering gates on disjoint qubits.
    """
    if a.n_qubits != b.n_qubits or a.postselect != b.postselect or a.sentence_qubit != b.sentence_qubit:
        return False
    if len(a.gates) != len(b.gates):
        return False

    def key(g, x):
        return (g.kind, g.qubits, g.word)

    def close(x, y):
        if x is None or y is None:
            return x is y
        d = abs((x - y + math.pi) % TWO_PI - math.pi)
        return d <= atol

    if strict_order:
        return all(key(g, x) == key(h, y) and close(x, y)
                   for g, x, h, y in zip(a.gates, a.angles, b.gates, b.angles))
    for q in range(a.n_qubits):
        sa = [(g, x) for g, x in zip(a.gates, a.angles) if q in g.qubits]
        sb = [(g, x) for g, x in zip(b.gates, b.angles) if q in g.qubits]
        if len(sa) != len(sb):
            return False
        if not all(key(g, x) == key(h, y) and close(x, y) for (g, x), (h, y) in zip(sa, sb)):
            return False
    return True


# ---------------------------------------------------------------- tokens

PAD, STEP_SEP, WORD_SEP = 0, 1, 2
ANGLED = ("RX", "RZ", "CRZ")


@dataclass
class TokenSequence:
    ids: list[int]
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ids)


class Tokenizer:
    """Fixed vocabulary: PAD, STEP_SEP, WORD_SEP, H@offset, (RX|RZ|CRZ)@offset@bin."""

    def __init__(self, bins: int = 32, max_width: int = 4):
        self.bins = bins
        self.max_width = max_width
        self.itos: list[tuple] = [("PAD",), ("STEP_SEP",), ("WORD_SEP",)]
        self.itos += [("H", off, None) for off in range(max_width)]
        self.itos += [(k, off, b) for k in ANGLED for off in range(max_width) for b in range(bins)]
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @property
    def vocab_size(self) -> int:
        return len(self.itos)

    def angle_bin(self, theta: float) -> int:
        return min(int(math.floor(self.bins * ((theta % TWO_PI) / TWO_PI))), self.bins - 1)

    def bin_center(self, b: int) -> float:
        return (b + 0.5) * TWO_PI / self.bins

    def is_gate(self, tid: int) -> bool:
        return tid > WORD_SEP

    def describe(self, tid: int) -> tuple:
        return self.itos[tid]

    def tokenize(self, e: SentenceEncoding) -> TokenSequence:
        widths = e.meta["widths"]
        ids = []
        for w, width in enumerate(widths):
            if width > self.max_width:
                raise CapacityError(f"word width {width} exceeds tokenizer max_width {self.max_width}",
                                    (width,))
            for t in range(e.data.shape[1]):
                for row in e.data[w, t]:
                    if not row.any():
                        continue
                    kind = KINDS[int(row[: len(KINDS)].argmax())]
                    if kind == "NOP":
                        continue
                    off = int(round(row[OFFSET_COL] * width))
                    if kind == "H":
                        ids.append(self.stoi[("H", off, None)])
                    else:
                        ids.append(self.stoi[(kind, off, self.angle_bin(row[ANGLE_COL] * TWO_PI))])
                ids.append(STEP_SEP)
            ids.append(WORD_SEP)
        return TokenSequence(ids, dict(e.meta))

    def detokenize(self, t: TokenSequence | list[int], meta: dict | None = None) -> SentenceEncoding:
        ids = list(t.ids if isinstance(t, TokenSequence) else t)
        meta = dict(meta if meta is not None else getattr(t, "meta", {}) or {})
        for tid in ids:
            if not 0 <= tid < self.vocab_size:
                raise DecodeError(f"token id {tid} outside vocabulary of {self.vocab_size}")
        words = split_words(ids)
        # frames per word: token runs separated by STEP_SEP
        parsed = []
        for wtoks in words:
            frames, cur = [], []
            for tid in wtoks:
                if tid == STEP_SEP:
                    frames.append(cur)
                    cur = []
                else:
                    cur.append(tid)
            if cur:
                frames.append(cur)
            parsed.append(frames)
        widths = meta.get("widths") or [self.infer_width(sum(f, [])) for f in parsed]
        if len(widths) != len(parsed):
            raise DecodeError(f"{len(parsed)} words in tokens but meta has {len(widths)}")
        t_max = meta.get("T_max") or max((len(f) for f in parsed), default=0)
        g_max = meta.get("G_max") or max((len(x) for f in parsed for x in f), default=0)
        data = np.zeros((len(parsed), t_max, g_max, GATE_DIM))
        for w, frames in enumerate(parsed):
            if len(frames) > t_max:
                raise DecodeError(f"word {w} has {len(frames)} steps, shape allows {t_max}")
            for ti, frame in enumerate(frames):
                if len(frame) > g_max:
                    raise DecodeError(f"word {w} step {ti} has {len(frame)} gates, shape allows {g_max}")
                for slot, tid in enumerate(frame):
                    kind, off, b = self.itos[tid]
                    row = data[w, ti, slot]
                    row[KIND_INDEX[kind]] = 1.0
                    if b is not None:
                        row[ANGLE_COL] = self.bin_center(b) / TWO_PI
                    row[OFFSET_COL] = off / widths[w]
        meta.update(L=len(parsed), T_max=t_max, G_max=g_max, widths=list(widths))
        meta.setdefault("n_qubits", sum(widths))
        meta.setdefault("cups", [])
        meta.setdefault("sentence_qubit", 0)
        return SentenceEncoding(data, meta)

    def infer_width(self, toks: list[int]) -> int:
        """Word width from its gates: an IQP word puts an H on every qubit."""
        hs = [self.itos[t][1] for t in toks if self.itos[t][0] == "H"]
        if hs:
            return max(hs) + 1
        crz = [self.itos[t][1] for t in toks if self.itos[t][0] == "CRZ"]
        return max(crz) + 2 if crz else 1

    def to_json(self) -> dict:
        return {"bins": self.bins, "max_width": self.max_width}


def split_words(ids: list[int]) -> list[list[int]]:
    """Token runs terminated by WORD_SEP; trailing PAD ignored."""
    words, cur = [], []
    for k, tid in enumerate(ids):
        if tid == PAD:
            if any(x != PAD for x in ids[k:]):
                raise DecodeError(f"PAD at position {k} is followed by non-PAD tokens")
            break
        if tid == WORD_SEP:
            words.append(cur)
            cur = []
        else:
            cur.append(tid)
    if cur:
        words.append(cur)
    return words


def corpus_shape(circuits) -> tuple[int, int]:
    shapes = [required_shape(c) for c in circuits]
    return max(s[0] for s in shapes), max(s[1] for s in shapes)


def max_width(circuits) -> int:
    return max(len(g) for c in circuits for g in partition_words(c))
