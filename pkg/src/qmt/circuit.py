"""Compile DisCoCat diagrams into parameterised circuits.

Single-wire words get an Euler triple RX-RZ-RX, multi-wire words get IQP
layers (Hadamards, then CRZ on neighbouring wires) and every cup becomes a
Bell effect: CNOT from the lower wire, H on the lower wire, both wires
post-selected on 0.

Parameter names are ``concept/slot`` so that synonyms in different languages
resolve to the same registry entry.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .diagram import DiscoDiagram
from .grammar import Lexicon

TWO_PI = 2 * math.pi

GATE_KINDS = ("RX", "RZ", "H", "CRZ", "CNOT")
PARAMETRIC = {"RX", "RZ", "CRZ"}
TWO_QUBIT = {"CRZ", "CNOT"}

ParamRegistry = dict  # name -> radians in [0, 2pi)


class CircuitError(ValueError):
    pass


class BindingError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    param: str | None = None
    word: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.qubits) != arity or len(set(self.qubits)) != arity:
            raise CircuitError(f"{self.kind} needs {arity} distinct qubits, got {self.qubits}")
        if (self.param is not None) != (self.kind in PARAMETRIC):
            raise CircuitError(f"{self.kind} parameter mismatch: {self.param!r}")


@dataclass(frozen=True)
class ParamCircuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    postselect: frozenset[int]
    sentence_qubit: int
    language: str = ""
    source_text: str = ""
    # per-word qubit groups recorded at compile time
    word_groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        for g in self.gates:
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise CircuitError(f"gate {g} out of range for {self.n_qubits} qubits")
        if self.sentence_qubit in self.postselect:
            raise CircuitError("sentence qubit cannot be post-selected")

    @property
    def params(self) -> list[str]:
        return [g.param for g in self.gates if g.param is not None]

    def param_names(self) -> list[str]:
        return list(dict.fromkeys(self.params))

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "gates": [
                {"kind": g.kind, "qubits": list(g.qubits), "param": g.param, "word": g.word}
                for g in self.gates
            ],
            "postselect": sorted(self.postselect),
            "sentence_qubit": self.sentence_qubit,
            "language": self.language,
            "source_text": self.source_text,
            "word_groups": [list(w) for w in self.word_groups],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ParamCircuit":
        return cls(
            data["n_qubits"],
            tuple(Gate(g["kind"], tuple(g["qubits"]), g.get("param"), g.get("word"))
                  for g in data["gates"]),
            frozenset(data["postselect"]),
            data["sentence_qubit"],
            data.get("language", ""),
            data.get("source_text", ""),
            tuple(tuple(w) for w in data.get("word_groups", [])),
        )


@dataclass(frozen=True)
class BoundCircuit(ParamCircuit):
    # one entry per gate, None for H/CNOT
    angles: tuple[float | None, ...] = field(default=())

    def __post_init__(self):
        super().__post_init__()
        if len(self.angles) != len(self.gates):
            raise CircuitError("angles must align with gates")

    def to_json(self) -> dict:
        data = super().to_json()
        for g, a in zip(data["gates"], self.angles):
            g["angle"] = a
        return data

    @classmethod
    def from_json(cls, data: dict) -> "BoundCircuit":
        base = ParamCircuit.from_json(data)
        return cls(**_fields(base), angles=tuple(g.get("angle") for g in data["gates"]))


def _fields(c: ParamCircuit) -> dict:
    return dict(
        n_qubits=c.n_qubits, gates=c.gates, postselect=c.postselect,
        sentence_qubit=c.sentence_qubit, language=c.language,
        source_text=c.source_text, word_groups=c.word_groups,
    )


def load_circuit(data: dict) -> ParamCircuit:
    if any("angle" in g for g in data["gates"]):
        return BoundCircuit.from_json(data)
    return ParamCircuit.from_json(data)


def euler_names(concept: str) -> list[str]:
    return [f"{concept}/{j}" for j in range(3)]


def iqp_names(concept: str, width: int, iqp_layers: int) -> list[list[str]]:
    return [[f"{concept}/{layer}_{p}" for p in range(width - 1)] for layer in range(iqp_layers)]


def word_param_names(concept: str, width: int, iqp_layers: int = 1) -> list[str]:
    if width == 1:
        return euler_names(concept)
    return [n for layer in iqp_names(concept, width, iqp_layers) for n in layer]


def compile(d: DiscoDiagram, reg: ParamRegistry | None = None, iqp_layers: int = 1) -> ParamCircuit:
    """Lay the ansatz over ``d``; qubit i is wire i.

    ``reg`` is only consulted to fail early on unknown parameters; pass
    None to compile structure alone.
    """
    if iqp_layers < 1:
        raise CircuitError("iqp_layers must be >= 1")
    gates: list[Gate] = []
    for idx, w in enumerate(d.words):
        qs = list(w.wires)
        concept = w.entry.concept
        if w.wire_count == 1:
            q = qs[0]
            a, b, c = euler_names(concept)
            gates += [Gate("RX", (q,), a, idx), Gate("RZ", (q,), b, idx), Gate("RX", (q,), c, idx)]
        elif w.wire_count > 1:
            for layer in iqp_names(concept, w.wire_count, iqp_layers):
                gates += [Gate("H", (q,), None, idx) for q in qs]
                gates += [Gate("CRZ", (qs[p], qs[p + 1]), name, idx)
                          for p, name in enumerate(layer)]
    post = set()
    for a, b in sorted(d.cups):
        gates += [Gate("CNOT", (a, b)), Gate("H", (a,))]
        post.update((a, b))
    circuit = ParamCircuit(
        d.total_wires, tuple(gates), frozenset(post), d.sentence_wire,
        d.language, d.text, tuple(tuple(w.wires) for w in d.words),
    )
    if reg is not None:
        missing = [p for p in circuit.param_names() if p not in reg]
        if missing:
            raise BindingError(f"registry lacks parameters {missing}")
    return circuit


def all_param_names(lexicon: Lexicon, iqp_layers: int = 1) -> list[str]:
    names = set()
    for e in lexicon:
        names.update(word_param_names(e.concept, e.wire_count, iqp_layers))
    return sorted(names)


def init_params(lexicon: Lexicon, seed: int, iqp_layers: int = 1) -> ParamRegistry:
    """Uniform draws on [0, 2pi), one per concept slot, in sorted name order."""
    rng = np.random.default_rng(seed)
    names = all_param_names(lexicon, iqp_layers)
    values = rng.uniform(0.0, TWO_PI, size=len(names))
    return {n: float(v) for n, v in zip(names, values)}


def _occurrence_keys(c: ParamCircuit) -> list[str]:
    seen: dict[str, int] = {}
    keys = []
    for name in c.params:
        k = seen.get(name, 0)
        seen[name] = k + 1
        keys.append(f"{name}#{k}")
    return keys


def swap_angles(c: ParamCircuit, reg: ParamRegistry, seed: int) -> ParamRegistry:
    """Randomly permute the angles bound to ``c``'s rotation gates.

    The result is ``reg`` plus occurrence-qualified keys (``name#k``, the
    k-th gate using ``name``) so each gate can receive its own value even
    where a word repeats. Gate structure is untouched.
    """
    keys = _occurrence_keys(c)
    if not keys:
        raise CircuitError("circuit has no parameterised gates to swap")
    values = [_resolve(reg, name, key) for name, key in zip(c.params, keys)]
    perm = np.random.default_rng(seed).permutation(len(values))
    out = dict(reg)
    for key, src in zip(keys, perm):
        out[key] = values[src]
    return out


def _resolve(reg: ParamRegistry, name: str, key: str) -> float:
    if key in reg:
        return reg[key]
    try:
        return reg[name]
    except KeyError:
        raise BindingError(f"unresolved parameter {name!r}") from None


def bind(c: ParamCircuit, reg: ParamRegistry) -> BoundCircuit:
    """Resolve parameter names to radians; occurrence keys win over plain names."""
    if isinstance(c, BoundCircuit):
        return c
    keys = iter(_occurrence_keys(c))
    angles = []
    for g in c.gates:
        if g.param is None:
            angles.append(None)
        else:
            angles.append(float(_resolve(reg, g.param, next(keys))))
    return BoundCircuit(**_fields(c), angles=tuple(angles))


def bound_angles(c: BoundCircuit) -> list[float]:
    return [a for a in c.angles if a is not None]


def word_angles(c: BoundCircuit, word: int) -> list[float]:
    return [a for g, a in zip(c.gates, c.angles) if g.word == word and a is not None]


def param_count(d: DiscoDiagram, iqp_layers: int = 1) -> int:
    return sum(3 if w.wire_count == 1 else iqp_layers * (w.wire_count - 1) for w in d.words)


def dump_registry(reg: ParamRegistry, path):
    with open(path, "w", encoding="utf-8") as fh:
        # repr of a float round-trips; %.17g is the fixed-width equivalent
        fh.write("{\n" + ",\n".join(
            f" {json.dumps(k)}: {float(v):.17g}" for k, v in sorted(reg.items())
        ) + "\n}\n")


def load_registry(path) -> ParamRegistry:
    with open(path, encoding="utf-8") as fh:
        return {k: float(v) for k, v in json.load(fh).items()}


def with_angles(c: ParamCircuit, angles: Iterable[float | None]) -> BoundCircuit:
    return BoundCircuit(**_fields(c), angles=tuple(angles))


def strip_angles(c: BoundCircuit) -> ParamCircuit:
    return ParamCircuit(**_fields(c))

