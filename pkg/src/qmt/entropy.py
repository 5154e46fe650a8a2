"""Shannon entropy of measurement statistics and entropy-based sentence matching."""
from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuit import ParamCircuit, ParamRegistry, bind, swap_angles
from .sim import EXACT, OutcomeDistribution, simulate


def shannon_entropy(d: OutcomeDistribution | np.ndarray) -> float:
    """-sum p log2 p in bits, with 0 log 0 = 0."""
    p = np.asarray(getattr(d, "probs", d), dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) + 0.0  # no negative zero


def entropy_diff(h_src: float, h_tgt: float) -> float:
    return abs(h_src - h_tgt)


@dataclass(frozen=True)
class EntropyRow:
    id: str
    language: str
    entropy: float
    n_qubits: int = 0


@dataclass(frozen=True)
class EntropyTable:
    rows: tuple[EntropyRow, ...]

    @property
    def values(self) -> np.ndarray:
        return np.array([r.entropy for r in self.rows])

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.rows]

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "language", "entropy"])
            for r in self.rows:
                w.writerow([r.id, r.language, f"{r.entropy:.17g}"])

    @classmethod
    def from_values(cls, values: Sequence[float], language: str = "", ids=None):
        ids = ids or [str(i) for i in range(len(values))]
        return cls(tuple(EntropyRow(i, language, float(v)) for i, v in zip(ids, values)))


@dataclass(frozen=True)
class MatchMatrix:
    values: np.ndarray
    offset: float
    best: tuple[int, ...]
    src_ids: tuple[str, ...] = ()
    tgt_ids: tuple[str, ...] = ()

    def diagonal(self) -> np.ndarray:
        k = min(self.values.shape)
        return self.values[np.arange(k), np.arange(k)]

    def mean_diagonal(self) -> float:
        return float(np.abs(self.diagonal()).mean())

    def accuracy(self) -> float:
        """Fraction of rows whose best match is the same-index column."""
        return float(np.mean([b == i for i, b in enumerate(self.best)]))


def match_matrix(src: EntropyTable, tgt: EntropyTable, offset: float = 1.0) -> MatchMatrix:
    if not len(src) or not len(tgt):
        raise ValueError("both entropy tables must be nonempty")
    hs, ht = src.values, tgt.values
    values = np.abs(np.abs(hs[:, None] - ht[None, :]) - offset)
    # argmin returns the first minimum, i.e. the lowest column on ties
    best = tuple(int(j) for j in values.argmin(axis=1))
    return MatchMatrix(values, float(offset), best, tuple(src.ids), tuple(tgt.ids))


def calibrate_offset(src: EntropyTable, tgt: EntropyTable, pairs=None) -> float:
    """Median |dH| over labelled translation pairs (default: same index)."""
    if pairs is None:
        pairs = [(i, i) for i in range(min(len(src), len(tgt)))]
    hs, ht = src.values, tgt.values
    return float(statistics.median(abs(hs[i] - ht[j]) for i, j in pairs))


def entropy_table(circuits: Sequence[ParamCircuit], reg: ParamRegistry, shots=EXACT,
                  seed: int = 0, ids=None, overrides=None) -> EntropyTable:
    rows = []
    ids = ids or [str(i) for i in range(len(circuits))]
    for k, (cid, c) in enumerate(zip(ids, circuits)):
        r = overrides[k] if overrides is not None else reg
        dist = simulate(bind(c, r), shots, seed + k)
        rows.append(EntropyRow(cid, c.language, shannon_entropy(dist), c.n_qubits))
    return EntropyTable(tuple(rows))


@dataclass(frozen=True)
class MatchingResult:
    src: EntropyTable
    tgt: EntropyTable
    matrix: MatchMatrix


def run_matching_experiment(pairs: Sequence[tuple[str, ParamCircuit, ParamCircuit]],
                            reg: ParamRegistry, shots=EXACT, seed: int = 0,
                            swapped: bool = False, swap_seed: int | None = None,
                            offset: float | str = 1.0) -> MatchingResult:
    """Entropy tables for both sides of a bilingual corpus plus the match grid.

    ``offset="calibrate"`` uses the median same-index |dH| of this run.
    With ``swapped`` each source circuit gets its own angle permutation
    (seeded from ``swap_seed`` + row index).
    """
    if not pairs:
        raise ValueError("empty corpus")
    ids = [p[0] for p in pairs]
    src_c = [p[1] for p in pairs]
    tgt_c = [p[2] for p in pairs]
    overrides = None
    if swapped:
        base = seed if swap_seed is None else swap_seed
        overrides = [swap_angles(c, reg, base + k) for k, c in enumerate(src_c)]
    src = entropy_table(src_c, reg, shots, seed, ids, overrides)
    tgt = entropy_table(tgt_c, reg, shots, seed + len(pairs), ids)
    if offset == "calibrate":
        offset = calibrate_offset(src, tgt)
    return MatchingResult(src, tgt, match_matrix(src, tgt, float(offset)))


def heatmap_export(m: MatchMatrix, path) -> dict[str, Path]:
    """Write ``<stem>.csv``, ``<stem>.pgm`` and ``best_matches.csv`` next to ``path``."""
    v = np.asarray(m.values, dtype=float)
    if v.size == 0:
        raise ValueError("empty match matrix")
    path = Path(path)
    stem = path.with_suffix("")
    out = {
        "csv": stem.with_suffix(".csv"),
        "pgm": stem.with_suffix(".pgm"),
        "best": stem.parent / "best_matches.csv",
    }
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        with open(out["csv"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for row in v:
                w.writerow([f"{x:.17g}" for x in row])
        vmax = float(v.max())
        scaled = np.ones_like(v) if vmax == 0 else 1.0 - v / vmax
        pixels = np.rint(255 * scaled).astype(np.uint8)
        rows, cols = pixels.shape
        with open(out["pgm"], "wb") as fh:
            fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
        src_ids = m.src_ids or [str(i) for i in range(rows)]
        tgt_ids = m.tgt_ids or [str(j) for j in range(cols)]
        with open(out["best"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["src_id", "tgt_id", "score"])
            for i, j in enumerate(m.best):
                w.writerow([src_ids[i], tgt_ids[j], f"{v[i, j]:.17g}"])
    except OSError as exc:
        raise OSError(f"cannot write heat map to {path}: {exc}") from exc
    return out


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    cols, rows = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(rows, cols)
