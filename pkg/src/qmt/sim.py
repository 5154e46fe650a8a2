"""Statevector simulation, shot sampling and post-selection.

Qubit 0 is the leftmost character of every outcome bitstring (the most
significant bit of the flat amplitude index).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .circuit import BoundCircuit

MAX_QUBITS = 20
EXACT = None

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


class CapacityError(ValueError):
    pass


class PostselectionError(ValueError):
    pass


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int) -> np.ndarray:
    psi = np.tensordot(u, psi, axes=([1], [q]))
    return np.moveaxis(psi, 0, q)


def _slice(n, q, bit):
    idx = [slice(None)] * n
    idx[q] = bit
    return tuple(idx)


def apply_gate(psi: np.ndarray, kind: str, qubits, angle=None) -> np.ndarray:
    """Apply one gate to a (2,)*n tensor, returning a new tensor."""
    n = psi.ndim
    if kind == "H":
        return _apply_1q(psi, _H, qubits[0])
    if kind == "RX":
        return _apply_1q(psi, rx(angle), qubits[0])
    if kind == "RZ":
        return _apply_1q(psi, rz(angle), qubits[0])
    control, target = qubits
    out = psi.copy()
    on = _slice(n, control, 1)
    # the target axis shifts down by one once the control axis is sliced out
    t = target - (target > control)
    if kind == "CNOT":
        out[on] = np.flip(psi[on], axis=t)
    elif kind == "CRZ":
        sub = psi[on]
        phase = np.array([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
        shape = [1] * sub.ndim
        shape[t] = 2
        out[on] = sub * phase.reshape(shape)
    else:
        raise ValueError(f"unknown gate {kind}")
    return out


def statevector(c: BoundCircuit, check_norm: bool = False) -> np.ndarray:
    """Flat amplitude vector of length 2**n starting from |0...0>."""
    n = c.n_qubits
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit budget")
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for g, a in zip(c.gates, c.angles):
        psi = apply_gate(psi, g.kind, g.qubits, a)
        if check_norm:
            norm = float(np.vdot(psi, psi).real)
            if abs(norm - 1) > 1e-9:
                raise FloatingPointError(f"norm drifted to {norm} after {g}")
    return psi.reshape(-1)


@dataclass(frozen=True)
class OutcomeDistribution:
    n_qubits: int
    probs: np.ndarray  # dense, length 2**n_qubits
    shots: int | None = EXACT

    def __post_init__(self):
        if self.probs.shape != (1 << self.n_qubits,):
            raise ValueError("probability vector has the wrong length")

    def bitstring(self, index: int) -> str:
        return format(index, f"0{self.n_qubits}b") if self.n_qubits else ""

    @property
    def mass(self) -> dict[str, float]:
        nz = np.flatnonzero(self.probs)
        return {self.bitstring(i): float(self.probs[i]) for i in nz}

    def __getitem__(self, bits: str) -> float:
        return float(self.probs[int(bits, 2) if bits else 0])

    def tv_distance(self, other: "OutcomeDistribution") -> float:
        return 0.5 * float(np.abs(self.probs - other.probs).sum())

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["outcome", "p"])
            for i in np.flatnonzero(self.probs):
                w.writerow([self.bitstring(i), f"{self.probs[i]:.17g}"])

    @classmethod
    def from_mass(cls, mass: dict[str, float], n_qubits: int, shots=EXACT):
        p = np.zeros(1 << n_qubits)
        for bits, v in mass.items():
            p[int(bits, 2) if bits else 0] = v
        return cls(n_qubits, p, shots)


def exact_distribution(c: BoundCircuit) -> OutcomeDistribution:
    psi = statevector(c)
    p = np.abs(psi) ** 2
    return OutcomeDistribution(c.n_qubits, p / p.sum(), EXACT)


def sample(c: BoundCircuit, shots: int, seed: int) -> OutcomeDistribution:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    exact = exact_distribution(c)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, exact.probs)
    return OutcomeDistribution(c.n_qubits, counts / shots, shots)


def simulate(c: BoundCircuit, shots: int | None = EXACT, seed: int = 0) -> OutcomeDistribution:
    return exact_distribution(c) if shots is EXACT else sample(c, shots, seed)


def postselect(d: OutcomeDistribution, zeros) -> OutcomeDistribution:
    """Condition on every qubit in ``zeros`` reading 0 and drop those qubits."""
    zeros = sorted(set(zeros))
    if not zeros:
        return d
    n = d.n_qubits
    t = d.probs.reshape((2,) * n)
    t = t[tuple(0 if q in zeros else slice(None) for q in range(n))]
    total = float(t.sum())
    if total <= 0:
        raise PostselectionError(f"no probability mass survives post-selection on {zeros}")
    kept = n - len(zeros)
    return OutcomeDistribution(kept, np.asarray(t, dtype=float).reshape(-1) / total, d.shots)


def dense_unitary(c: BoundCircuit) -> np.ndarray:
    """Full 2**n x 2**n matrix product, built gate by gate with Kronecker products.

    Independent of the tensor-contraction path above; used as a test oracle
    for small circuits.
    """
    n = c.n_qubits
    eye = np.eye(2)
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    x = np.array([[0, 1], [1, 0]])

    def kron_at(ops: dict[int, np.ndarray]) -> np.ndarray:
        m = np.array([[1.0 + 0j]])
        for q in range(n):
            m = np.kron(m, ops.get(q, eye))
        return m

    u = np.eye(1 << n, dtype=complex)
    for g, a in zip(c.gates, c.angles):
        if g.kind == "H":
            m = kron_at({g.qubits[0]: _H})
        elif g.kind == "RX":
            m = kron_at({g.qubits[0]: rx(a)})
        elif g.kind == "RZ":
            m = kron_at({g.qubits[0]: rz(a)})
        else:
            ctl, tgt = g.qubits
            op = x if g.kind == "CNOT" else rz(a)
            m = kron_at({ctl: p0}) + kron_at({ctl: p1, tgt: op})
        u = m @ u
    return u
