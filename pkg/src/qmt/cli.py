"""Command-line front end.

Every subcommand writes its outputs under ``--out`` together with
``manifest.json`` (arguments, seeds and sha256 digests of the inputs read).

Exit codes: 0 success, 2 grammar failure, 3 capacity or precondition
failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .circuit import (BoundCircuit, bind, dump_registry, init_params, load_circuit,
                      load_registry)
from .corpus import Corpus, default_lexicon, gen_corpus
from .diagram import build_diagram, wire_report
from .encode import Tokenizer
from .entropy import heatmap_export, run_matching_experiment, shannon_entropy
from .grammar import GrammarError, Lexicon, format_type, parse
from .pipeline import corpus_circuits, encode_corpus, sentence_circuit
from .seq2seq import (Dataset, ModelConfig, build_model, evaluate, load_checkpoint,
                      make_optimizer, save_checkpoint, train, translate)
from .sim import postselect, simulate

EXIT_OK, EXIT_GRAMMAR, EXIT_PRECONDITION, EXIT_IO = 0, 2, 3, 4


class Run:
    """Collects inputs and outputs for the manifest of one invocation."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.results: dict = {}

    def read(self, path) -> Path:
        path = Path(path)
        self.inputs[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path

    def path(self, name) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write_json(self, name, obj):
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def manifest(self):
        config = {k: v for k, v in vars(self.args).items() if k != "func"}
        doc = {
            "tool": "qmt",
            "version": __version__,
            "command": self.args.command,
            "config": config,
            "inputs": self.inputs,
            "outputs": sorted(set(self.outputs)),
            "results": self.results,
        }
        (self.out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                                encoding="utf-8")


# ---------------------------------------------------------------- helpers

def _lexicon(run: Run) -> Lexicon:
    if run.args.lexicon:
        return Lexicon.load(run.read(run.args.lexicon))
    return default_lexicon()


def _corpus(run: Run, lexicon: Lexicon) -> Corpus:
    if getattr(run.args, "corpus", None):
        corpus = Corpus.load(run.read(run.args.corpus))
        corpus.check(lexicon)
        return corpus
    return gen_corpus(lexicon, run.args.n_pairs, run.args.seed_corpus)


def _registry(run: Run, lexicon: Lexicon):
    if getattr(run.args, "registry", None):
        return load_registry(run.read(run.args.registry))
    return init_params(lexicon, run.args.seed_params, run.args.iqp_layers)


def _shots(args):
    return None if args.exact else args.shots


# ---------------------------------------------------------------- commands

def cmd_gen_corpus(run: Run):
    lexicon = _lexicon(run)
    corpus = gen_corpus(lexicon, run.args.n_pairs, run.args.seed_corpus)
    corpus.dump(run.path("corpus.tsv"))
    run.results["n_pairs"] = len(corpus)
    print(f"{len(corpus)} pairs -> {run.out / 'corpus.tsv'}")


def cmd_parse(run: Run):
    lexicon = _lexicon(run)
    ts, proof = parse(run.args.sentence, lexicon, run.args.lang)
    factors = [str(f) for f in ts.factors()]
    doc = {
        "sentence": ts.text,
        "language": ts.language,
        "types": [[w.surface, format_type(w.type)] for w in ts.words],
        "factors": factors,
        **proof.to_json(),
    }
    run.write_json("parse.json", doc)
    for w in ts.words:
        print(f"{w.surface:>16}  {format_type(w.type)}")
    print("cups:", " ".join(f"({a},{b})" for a, b in proof.cups), "survivor:", proof.survivor)


def cmd_diagram(run: Run):
    lexicon = _lexicon(run)
    ts, proof = parse(run.args.sentence, lexicon, run.args.lang)
    d = build_diagram(ts, proof)
    run.path("diagram.json").write_text(d.dumps() + "\n", encoding="utf-8")
    for surface, n in wire_report(d):
        print(f"{surface:>16}  {n}")
    print("total wires:", d.total_wires)


def cmd_compile(run: Run):
    lexicon = _lexicon(run)
    c = sentence_circuit(run.args.sentence, lexicon, run.args.lang, run.args.iqp_layers)
    reg = _registry(run, lexicon)
    run.write_json("circuit.json", c.to_json())
    run.write_json("bound_circuit.json", bind(c, reg).to_json())
    dump_registry(reg, run.path("registry.json"))
    run.results.update(n_qubits=c.n_qubits, n_gates=len(c.gates), n_params=len(c.param_names()))
    print(f"{c.n_qubits} qubits, {len(c.gates)} gates, {len(c.param_names())} parameters")


def _load_bound(run: Run, lexicon) -> BoundCircuit:
    if run.args.circuit:
        c = load_circuit(json.loads(run.read(run.args.circuit).read_text(encoding="utf-8")))
        if isinstance(c, BoundCircuit):
            return c
    else:
        if not run.args.sentence:
            raise ValueError("give a sentence or --circuit")
        c = sentence_circuit(run.args.sentence, lexicon, run.args.lang, run.args.iqp_layers)
    return bind(c, _registry(run, lexicon))


def cmd_simulate(run: Run):
    lexicon = _lexicon(run)
    c = _load_bound(run, lexicon)
    dist = simulate(c, _shots(run.args), run.args.seed_sampling)
    dist.to_csv(run.path("distribution.csv"))
    h = shannon_entropy(dist)
    run.results.update(n_qubits=c.n_qubits, entropy=h)
    if run.args.postselect:
        zeros = sorted(q for q in range(c.n_qubits) if q in set(c.postselect))
        ps = postselect(dist, zeros)
        ps.to_csv(run.path("postselected.csv"))
        run.results["postselected_entropy"] = shannon_entropy(ps)
    print(f"entropy {h:.12g} bits over {c.n_qubits} qubits")


def cmd_entropy(run: Run):
    lexicon = _lexicon(run)
    corpus = _corpus(run, lexicon)
    pairs = corpus_circuits(corpus, lexicon, run.args.iqp_layers)
    reg = _registry(run, lexicon)
    res = run_matching_experiment(pairs, reg, _shots(run.args), run.args.seed_sampling)
    res.src.to_csv(run.path("entropy_src.csv"))
    res.tgt.to_csv(run.path("entropy_tgt.csv"))
    run.results["n_pairs"] = len(pairs)
    for a, b in zip(res.src.rows, res.tgt.rows):
        print(f"{a.id}  {a.entropy:.6f}  {b.entropy:.6f}")


def cmd_match(run: Run):
    lexicon = _lexicon(run)
    corpus = _corpus(run, lexicon)
    pairs = corpus_circuits(corpus, lexicon, run.args.iqp_layers)
    reg = _registry(run, lexicon)
    offset = run.args.offset if run.args.offset == "calibrate" else float(run.args.offset)
    res = run_matching_experiment(pairs, reg, _shots(run.args), run.args.seed_sampling,
                                  swapped=run.args.swapped, swap_seed=run.args.seed_swap,
                                  offset=offset)
    res.src.to_csv(run.path("entropy_src.csv"))
    res.tgt.to_csv(run.path("entropy_tgt.csv"))
    for f in heatmap_export(res.matrix, run.out / "heatmap").values():
        run.outputs.append(f.name)
    m = res.matrix
    summary = {"offset": m.offset, "mean_diagonal": m.mean_diagonal(), "accuracy": m.accuracy(),
               "swapped": run.args.swapped}
    run.write_json("match.json", summary)
    run.results.update(summary)
    print(f"offset {m.offset:.6g}  mean diagonal {m.mean_diagonal():.6g}  accuracy {m.accuracy():.3f}")


def cmd_encode(run: Run):
    lexicon = _lexicon(run)
    corpus = _corpus(run, lexicon)
    pairs = corpus_circuits(corpus, lexicon, run.args.iqp_layers)
    reg = _registry(run, lexicon)
    shape = tuple(run.args.shape) if run.args.shape else None
    enc = encode_corpus(pairs, reg, run.args.bins, shape)
    with open(run.path("dataset.jsonl"), "w", encoding="utf-8") as fh:
        for rec in enc.records():
            fh.write(json.dumps(rec) + "\n")
    dump_registry(reg, run.path("registry.json"))
    run.results.update(enc.header())
    print(f"{len(enc.ids)} pairs, shape {enc.shape}, vocabulary {enc.tokenizer.vocab_size}")


def _read_dataset(path):
    header, src, tgt = None, [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if "header" in rec:
                header = rec["header"]
            else:
                src.append(rec["src_tokens"])
                tgt.append(rec["tgt_tokens"])
    if header is None:
        raise ValueError(f"{path}: missing header record")
    return header, src, tgt


def cmd_train(run: Run):
    args = run.args
    header, src, tgt = _read_dataset(run.read(args.dataset))
    registry = load_registry(run.read(args.registry)) if args.registry else None
    aligned = args.model == "M2"
    data = Dataset.from_sequences(src, tgt, aligned=aligned)
    cfg = ModelConfig.default(args.model, header["vocab_size"])
    if args.units:
        cfg = ModelConfig(cfg.variant, cfg.vocab_size, args.units, args.units, cfg.dense_units)
    model = build_model(cfg, args.seed_train)
    opt = make_optimizer(args.optimizer, args.lr)
    hist = train(model, data, opt, args.epochs, args.batch, args.seed_train, args.val_split)
    hist.to_csv(run.path("history.csv"))
    extra = {
        "header": header,
        "src_len": int(data.src.shape[1]),
        "max_len": int(data.tgt.shape[1]),
        "registry": registry,
        "iqp_layers": args.iqp_layers,
    }
    save_checkpoint(run.path("checkpoint.json"), model, opt, extra)
    loss, mae, mse = evaluate(model, data)
    run.results.update(final_val_loss=hist.val_loss[-1], loss=loss, mae=mae, mse=mse)
    print(f"epoch {model.epoch}: val loss {hist.val_loss[-1]:.6g}  mae {mae:.6g}  mse {mse:.6g}")


def cmd_translate(run: Run):
    args = run.args
    model, _, extra = load_checkpoint(run.read(args.checkpoint))
    lexicon = _lexicon(run)
    registry = extra.get("registry")
    if args.registry:
        registry = load_registry(run.read(args.registry))
    if registry is None:
        raise ValueError("checkpoint carries no registry; pass --registry")
    header = extra["header"]
    layers = extra.get("iqp_layers", 1)
    c = sentence_circuit(args.sentence, lexicon, args.lang, layers)
    tok = Tokenizer(header["bins"], header["max_width"])
    tr = translate(model, c, registry, tokenizer=tok, shape=tuple(header["shape"]),
                   src_len=extra["src_len"], max_len=extra["max_len"], lexicon=lexicon,
                   language=args.target_lang, iqp_layers=layers)
    run.write_json("translation.json", {"source": args.sentence, "text": tr.text,
                                        "tokens": tr.tokens, "repairs": tr.repairs})
    run.write_json("circuit.json", tr.circuit.to_json())
    run.results.update(text=tr.text, repairs=tr.repairs)
    print(tr.text)


def _csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def cmd_report(run: Run):
    lines = ["# qmt run report", ""]
    for d in map(Path, run.args.runs):
        man = json.loads(run.read(d / "manifest.json").read_text(encoding="utf-8"))
        lines += [f"## {d.name}: `{man['command']}`", ""]
        for k, v in sorted(man.get("results", {}).items()):
            lines.append(f"- {k}: {v}")
        lines.append("")
        src, tgt = d / "entropy_src.csv", d / "entropy_tgt.csv"
        if src.exists() and tgt.exists():
            a, b = _csv_rows(run.read(src))[1:], _csv_rows(run.read(tgt))[1:]
            lines += ["| id | source entropy | target entropy |", "|---|---|---|"]
            lines += [f"| {x[0]} | {float(x[2]):.6f} | {float(y[2]):.6f} |" for x, y in zip(a, b)]
            lines.append("")
        hist = d / "history.csv"
        if hist.exists():
            rows = _csv_rows(run.read(hist))
            lines.append(f"Training curve: [{hist}]({hist.resolve()}) ({len(rows) - 1} epochs, "
                         f"final val loss {float(rows[-1][2]):.6g})")
            lines.append("")
    run.path("report.md").write_text("\n".join(lines), encoding="utf-8")
    print(f"report -> {run.out / 'report.md'}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmt", description="Quantum circuit pipeline for bilingual sentences.")
    p.add_argument("--version", action="version", version=f"qmt {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, corpus=False, registry=True, n_pairs=20):
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--lexicon", help="lexicon JSON (default: bundled)")
        sp.add_argument("--iqp-layers", type=int, default=1)
        if registry:
            sp.add_argument("--seed-params", type=int, default=0)
            sp.add_argument("--registry", help="parameter registry JSON (overrides --seed-params)")
        if corpus:
            sp.add_argument("--corpus", help="corpus TSV (default: generated)")
            sp.add_argument("--n-pairs", type=int, default=n_pairs)
            sp.add_argument("--seed-corpus", type=int, default=0)

    def shots(sp):
        sp.add_argument("--shots", type=int, default=20000)
        sp.add_argument("--exact", action="store_true", help="exact probabilities, no sampling")
        sp.add_argument("--seed-sampling", type=int, default=0)

    def sentence(sp, required=True):
        sp.add_argument("sentence", nargs=None if required else "?")
        sp.add_argument("--lang", default="en")

    sp = sub.add_parser("gen-corpus", help="generate a seeded bilingual corpus")
    common(sp, registry=False)
    sp.add_argument("--n-pairs", type=int, default=80)
    sp.add_argument("--seed-corpus", type=int, default=0)
    sp.set_defaults(func=cmd_gen_corpus)

    sp = sub.add_parser("parse", help="type-assign and reduce a sentence")
    common(sp, registry=False)
    sentence(sp)
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("diagram", help="build the wire diagram of a sentence")
    common(sp, registry=False)
    sentence(sp)
    sp.set_defaults(func=cmd_diagram)

    sp = sub.add_parser("compile", help="compile a sentence to a parameterized circuit")
    common(sp)
    sentence(sp)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("simulate", help="simulate a sentence or a circuit file")
    common(sp)
    sentence(sp, required=False)
    sp.add_argument("--circuit", help="circuit JSON (bound circuits keep their angles)")
    sp.add_argument("--postselect", action="store_true", help="also write the post-selected distribution")
    shots(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("entropy", help="entropy tables for a corpus")
    common(sp, corpus=True)
    shots(sp)
    sp.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("match", help="entropy match matrix and heat map")
    common(sp, corpus=True)
    shots(sp)
    sp.add_argument("--swapped", action="store_true", help="permute source angles per sentence")
    sp.add_argument("--seed-swap", type=int, default=0)
    sp.add_argument("--offset", default="1.0", help="number or 'calibrate'")
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("encode", help="encode and tokenize a corpus to a JSONL dataset")
    common(sp, corpus=True, n_pairs=80)
    sp.add_argument("--bins", type=int, default=32)
    sp.add_argument("--shape", type=int, nargs=2, metavar=("T_MAX", "G_MAX"))
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("train", help="train a seq2seq model on an encoded dataset")
    sp.add_argument("--out", default="out")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--registry", help="registry to store in the checkpoint for translate")
    sp.add_argument("--iqp-layers", type=int, default=1)
    sp.add_argument("--model", choices=("M1", "M2", "M3"), default="M3")
    sp.add_argument("--units", type=int)
    sp.add_argument("--optimizer", choices=("SGD", "Adam", "RMSprop"), default="Adam")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--epochs", type=int, default=1000)
    sp.add_argument("--batch", type=int, default=16)
    sp.add_argument("--val-split", type=float, default=0.2)
    sp.add_argument("--seed-train", type=int, default=0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("translate", help="translate a sentence with a trained checkpoint")
    sp.add_argument("--out", default="out")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--lexicon")
    sp.add_argument("--registry")
    sentence(sp)
    sp.add_argument("--target-lang", default="fa")
    sp.set_defaults(func=cmd_translate)

    sp = sub.add_parser("report", help="Markdown summary of earlier runs")
    sp.add_argument("--out", default="out")
    sp.add_argument("runs", nargs="+", help="run directories")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = Run(args)
        args.func(run)
        run.manifest()
    except GrammarError as exc:
        print(f"grammar error: {exc}", file=sys.stderr)
        return EXIT_GRAMMAR
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
