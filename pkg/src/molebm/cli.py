"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(bad input files, checkpoints, vocabularies), 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .canon import canonical_key
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, schema_help
from .dataset import graph_record, read_dataset
from .energy import init_params
from .errors import ConfigError, DataError, NumericalError
from .graph import AtomVocab, Dims, encode_one_hot
from .metrics import (
    CONSTRAINED_FIELDS,
    constrained_eval,
    evaluate_set,
    property_histogram,
    write_histogram_csv,
    write_metrics,
)
from .pipeline import compose, generate, optimize_from
from .properties import make_scorer
from .smiles import parse_smiles_lite, write_smiles_lite
from .training import PropertyStats, fit, normalize_property

log = logging.getLogger("molebm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        print(f"\n{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _key_value(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--out", type=Path, help="output directory (canonicalize: output file)")
    common.add_argument("--set", type=_key_value, action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="molebm", description="Energy-based molecular graph generation.",
                     epilog=schema_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"molebm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, text):
        return sub.add_parser(name, parents=[common], help=text, description=text,
                              epilog=schema_help(), formatter_class=argparse.RawDescriptionHelpFormatter)

    for name, text in (("train", "train an energy model"),
                       ("goal-train", "train with property-weighted positives")):
        p = add(name, text)
        p.add_argument("--data", type=Path, required=True, help=".jsonl or .smi dataset")
        p.add_argument("--epochs", type=int)
        p.add_argument("--property", help="scorer used when the dataset has no y column")

    for name, text in (("generate", "sample molecules from one checkpoint"),
                       ("compose-generate", "sample from the sum of several checkpoints")):
        p = add(name, text)
        p.add_argument("--checkpoint", type=Path, action="append", required=True)
        p.add_argument("--count", type=int)
        p.add_argument("--train-keys", type=Path, help="file of canonical keys, one per line")
        p.add_argument("--train-data", type=Path, help="dataset whose keys define novelty")
        p.add_argument("--property", help="scorer for the property histogram")
        p.add_argument("--trace", type=int, default=0, metavar="N", help="record energy traces of N chains")

    p = add("optimize", "improve seed molecules under similarity thresholds")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--seeds", type=Path, required=True, help="seed molecules (.jsonl or .smi)")
    p.add_argument("--delta", help="comma-separated similarity thresholds")
    p.add_argument("--property", required=True, help="scorer, e.g. atom_fraction:O or cmd:./score")
    p.add_argument("--chains", type=int, help="chains per seed molecule")

    p = add("eval-metrics", "score a generated JSONL file")
    p.add_argument("--generated", type=Path, required=True)
    p.add_argument("--train-keys", type=Path)
    p.add_argument("--train-data", type=Path)

    add("canonicalize", "read SMILES-lite on stdin, print canonical keys")
    return parser


def _config(args, extra=None) -> RunConfig:
    overrides = dict(args.set)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    for key, value in (extra or {}).items():
        if value is not None:
            overrides[key] = str(value)
    return load_config(args.config, overrides)


def _out_dir(args) -> Path:
    out = args.out or Path("molebm_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _molecule_row(m, vocab: AtomVocab, prop=None):
    row = {"valid": m.valid, "energy": m.energy, "provenance": m.provenance}
    if m.valid:
        row.update(graph_record(m.graph, vocab))
        row["key"] = m.key.decode("ascii")
        row["smiles"] = write_smiles_lite(m.graph, vocab)
    else:
        row.update(atoms=None, bonds=None, key=None, smiles=None)
    if prop is not None:
        row["property"] = None if math.isnan(prop) else prop
    if m.similarity is not None:
        row["similarity"] = m.similarity
    return row


def _training_keys(args, vocab: AtomVocab, dims: Dims) -> set[bytes]:
    keys: set[bytes] = set()
    if args.train_keys is not None:
        with open(args.train_keys, encoding="ascii") as fh:
            keys.update(line.strip().encode("ascii") for line in fh if line.strip())
    if args.train_data is not None:
        data = read_dataset(args.train_data, vocab, dims)
        keys.update(canonical_key(g, vocab) for g in data.graphs)
    return keys


def cmd_train(args, goal: bool) -> int:
    cfg = _config(args, {"epochs": args.epochs})
    vocab, dims = cfg.vocab, cfg.dims
    data = read_dataset(args.data, vocab, dims)
    props = None
    stats = None
    if goal:
        raw = data.y
        if raw is None:
            if not args.property:
                raise ConfigError("goal-train needs a y column in the dataset or --property")
            raw = make_scorer(args.property, vocab)(data.graphs)
        stats = PropertyStats.from_values(raw)
        props = [normalize_property(v, stats) for v in raw]
    model = init_params(dims, cfg["layers"], cfg["hidden"], seed=cfg["seed"], vocab=vocab,
                        normalize_adjacency=cfg["normalize_adjacency"])
    out = _out_dir(args)
    tcfg = cfg.train(goal_directed=goal)
    model, reports = fit(data.graphs, tcfg, model, properties=props,
                         checkpoint_dir=out / "checkpoints", csv_path=out / "epochs.csv")
    model.metadata.update(seed=cfg["seed"], epochs=tcfg.epochs, goal_directed=int(goal),
                          molecules=len(data.graphs))
    if stats is not None:
        model.metadata.update(property_min=repr(stats.min), property_max=repr(stats.max))
    save_checkpoint(model, out / "model.gebm")
    if not args.no_plots:
        from .plotting import plot_training
        plot_training(reports, out / "training.png")
    last = reports[-1]
    print(f"trained {tcfg.epochs} epochs on {len(data.graphs)} molecules; "
          f"final mean E+ {last.mean_e_pos:.4f}, E- {last.mean_e_neg:.4f}; wrote {out / 'model.gebm'}")
    return 0


def _load_models(paths):
    return [load_checkpoint(p) for p in paths]


def cmd_generate(args, composite: bool) -> int:
    cfg = _config(args, {"count": args.count})
    models = _load_models(args.checkpoint)
    if composite:
        energy = compose(models)
    else:
        if len(models) != 1:
            raise ConfigError("generate takes exactly one --checkpoint; use compose-generate for several")
        energy = models[0]
    vocab = models[0].vocab
    if vocab is None:
        raise DataError("checkpoint carries no atom vocabulary")
    if args.trace < 0:
        raise ConfigError("--trace must be >= 0")
    dims = energy.dims
    lcfg = cfg.langevin
    mols = generate(energy, cfg["count"], lcfg, vocab, keep_traces=args.trace > 0)
    out = _out_dir(args)

    props = None
    if args.property:
        props = make_scorer(args.property, vocab)([m.graph if m.valid else None for m in mols])
    _write_jsonl(out / "generated.jsonl",
                 (_molecule_row(m, vocab, None if props is None else props[i]) for i, m in enumerate(mols)))

    metrics = evaluate_set(mols, _training_keys(args, vocab, dims))
    write_metrics(metrics, out / "metrics.json", out / "metrics.csv")
    plots = not args.no_plots
    if props is not None:
        finite = [p for p in props if not math.isnan(p)]
        if finite:
            rows = property_histogram(finite, cfg["bins"])
            write_histogram_csv(rows, out / "property_hist.csv")
            if plots:
                from .plotting import plot_histograms
                plot_histograms({"generated": rows}, out / "property_hist.png", args.property)
    if args.trace > 0:
        traced = mols[:args.trace]
        with open(out / "energy_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["chain", "step", "energy"])
            for m in traced:
                for step, e in enumerate(m.trace, 1):
                    w.writerow([m.provenance["chain"], step, e])
        if plots:
            from .plotting import plot_traces
            plot_traces([m.trace for m in traced], out / "energy_trace.png")
    print(f"generated {metrics.sample_count} molecules: validity {metrics.validity:.4f}, "
          f"uniqueness {metrics.uniqueness:.4f}, novelty {metrics.novelty:.4f}")
    return 0


def cmd_optimize(args) -> int:
    cfg = _config(args, {"delta": args.delta, "chains_per_seed": args.chains})
    model = load_checkpoint(args.checkpoint)
    vocab = model.vocab
    if vocab is None:
        raise DataError("checkpoint carries no atom vocabulary")
    seeds = read_dataset(args.seeds, vocab, model.dims).graphs
    scorer = make_scorer(args.property, vocab)
    seed_scores = scorer(seeds)
    lcfg = cfg.langevin
    chains = cfg["chains_per_seed"]
    runs = []
    rows = []
    for i, g in enumerate(seeds):
        cands = optimize_from(model, g, lcfg, vocab, chains=chains, seed_index=i)
        scores = scorer([c.graph if c.valid else None for c in cands])
        runs.append((g, cands, seed_scores[i], scores))
        for c, s in zip(cands, scores):
            row = _molecule_row(c, vocab, s)
            row["seed_index"] = i
            rows.append(row)

    reports = []
    for delta in cfg["delta"]:
        pairs = []
        for g, cands, p_seed, scores in runs:
            ok = [(s, c) for c, s in zip(cands, scores) if c.valid and c.similarity >= delta and not math.isnan(s)]
            if ok:
                s, c = max(ok, key=lambda t: t[0])
                pairs.append((g, c.graph, p_seed, s))
            else:
                pairs.append((g, None, p_seed, math.nan))
        reports.append(constrained_eval(pairs, delta, cfg["radius"], cfg["nbits"]))

    out = _out_dir(args)
    _write_jsonl(out / "candidates.jsonl", rows)
    with open(out / "constrained.csv", "w", newline="") as fh:
        fh.write("# improvement and similarity are means over successes only\n")
        w = csv.writer(fh)
        w.writerow(CONSTRAINED_FIELDS)
        w.writerows(r.row() for r in reports)
    if not args.no_plots:
        from .plotting import plot_constrained
        plot_constrained(reports, out / "constrained.png")
    for r in reports:
        print(f"delta {r.delta:.2f}: success {r.success_rate:.3f}, improvement {r.improvement:.4f}, "
              f"similarity {r.similarity:.4f}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    items = []
    with open(args.generated, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                key = row["key"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise DataError(f"line {lineno}: expected a generated-molecule JSON object with a 'key'") from None
            items.append(SimpleNamespace(key=None if key is None else str(key).encode("ascii")))
    metrics = evaluate_set(items, _training_keys(args, cfg.vocab, cfg.dims))
    out = _out_dir(args)
    write_metrics(metrics, out / "metrics.json", out / "metrics.csv")
    print(json.dumps(metrics.to_dict(), sort_keys=True))
    return 0


def cmd_canonicalize(args) -> int:
    cfg = _config(args)
    vocab = cfg.vocab
    lines = []
    for lineno, line in enumerate(sys.stdin, 1):
        text = line.split("\t", 1)[0].strip()
        if not text or text.startswith("#"):
            continue
        try:
            rec = parse_smiles_lite(text)
            types = [vocab.index(a) for a in rec.atoms]
        except DataError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        dims = Dims(len(types), vocab.b, cfg["bond_types"])
        g = encode_one_hot(types, sorted((min(i, j), max(i, j), o) for i, j, o in rec.bonds), dims)
        lines.append(canonical_key(g, vocab).decode("ascii"))
    text = "".join(k + "\n" for k in lines)
    if args.out is not None:
        args.out.write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    return 0


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", under="ignore")
    handlers = {
        "train": lambda: cmd_train(args, goal=False),
        "goal-train": lambda: cmd_train(args, goal=True),
        "generate": lambda: cmd_generate(args, composite=False),
        "compose-generate": lambda: cmd_generate(args, composite=True),
        "optimize": lambda: cmd_optimize(args),
        "eval-metrics": lambda: cmd_eval(args),
        "canonicalize": lambda: cmd_canonicalize(args),
    }
    try:
        return handlers[args.command]()
    except ConfigError as exc:
        print(f"molebm: configuration error: {exc}\n\n{schema_help()}", file=sys.stderr)
        return 1
    except (DataError, OSError, UnicodeDecodeError) as exc:
        print(f"molebm: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"molebm: numerical abort: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
