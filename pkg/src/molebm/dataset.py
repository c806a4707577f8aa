"""Dataset loading: JSONL graph records or SMILES-lite ``.smi`` files.

JSONL schema, one object per line::

    {"atoms": ["C", "O"], "bonds": [[0, 1, 2]], "y": 0.37}

``bonds`` entries are ``[i, j, order]`` with 0-based atom indices and order
in 1..3; ``y`` is optional. A ``.smi`` file holds one SMILES-lite string per
line, optionally followed by a tab and a property value. Blank lines and
lines starting with ``#`` are skipped in both formats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, EmptySet, ParseError, TooManyAtoms, UnknownAtomSymbol
from .graph import AtomVocab, Dims, MolecularGraph, encode_one_hot
from .smiles import DatasetRecord, SmilesError, parse_smiles_lite
from .training import PropertyStats


@dataclass
class Dataset:
    graphs: list[MolecularGraph]
    records: list[DatasetRecord]
    y: list[float] | None
    stats: PropertyStats | None


def record_to_graph(rec: DatasetRecord, vocab: AtomVocab, dims: Dims) -> MolecularGraph:
    atoms = [vocab.index(a) for a in rec.atoms]
    bonds = sorted((min(i, j), max(i, j), o) for i, j, o in rec.bonds)
    return encode_one_hot(atoms, bonds, dims)


def _json_record(obj) -> DatasetRecord:
    if not isinstance(obj, dict) or "atoms" not in obj:
        raise DataError("expected an object with an 'atoms' field")
    atoms = obj["atoms"]
    bonds = obj.get("bonds", [])
    if not isinstance(atoms, list) or not all(isinstance(a, str) for a in atoms):
        raise DataError("'atoms' must be a list of symbols")
    if not isinstance(bonds, list):
        raise DataError("'bonds' must be a list")
    parsed = []
    for b in bonds:
        if not (isinstance(b, list) and len(b) == 3 and all(isinstance(x, int) and not isinstance(x, bool) for x in b)):
            raise DataError(f"bond {b!r} is not [i, j, order]")
        i, j, o = b
        if not (0 <= i < len(atoms) and 0 <= j < len(atoms)) or i == j or o not in (1, 2, 3):
            raise DataError(f"bond {b!r} out of range")
        parsed.append((i, j, o))
    y = obj.get("y")
    if y is not None:
        if isinstance(y, bool) or not isinstance(y, (int, float)) or not math.isfinite(y):
            raise DataError(f"'y' must be a finite number, got {y!r}")
        y = float(y)
    return DatasetRecord(list(atoms), parsed, y)


def _smi_record(line: str) -> DatasetRecord:
    text, _, rest = line.partition("\t")
    rec = parse_smiles_lite(text.strip())
    rest = rest.strip()
    if rest:
        try:
            rec.y_raw = float(rest.split()[0])
        except ValueError:
            raise DataError(f"property value {rest!r} is not a number") from None
        if not math.isfinite(rec.y_raw):
            raise DataError("property value must be finite")
    return rec


def parse_records(lines, fmt: str):
    """Yield ``(line number, DatasetRecord)``; ``fmt`` is ``"jsonl"`` or ``"smi"``."""
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            if fmt == "smi":
                rec = _smi_record(line.rstrip("\r\n"))
            else:
                rec = _json_record(json.loads(stripped))
        except SmilesError as exc:
            raise type(exc)(exc.detail, line=lineno, position=exc.position) from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno, position=exc.colno - 1) from None
        except DataError as exc:
            raise ParseError(str(exc), line=lineno) from None
        yield lineno, rec


def format_of(path) -> str:
    return "smi" if Path(path).suffix.lower() in (".smi", ".smiles", ".txt") else "jsonl"


def load_records(lines, fmt: str, vocab: AtomVocab, dims: Dims) -> Dataset:
    graphs, records = [], []
    for lineno, rec in parse_records(lines, fmt):
        unknown = [a for a in rec.atoms if a not in vocab.symbols]
        if unknown:
            raise UnknownAtomSymbol(f"atom symbol {unknown[0]!r} not in vocabulary {vocab.symbols}", line=lineno)
        if len(rec.atoms) > dims.n:
            err = TooManyAtoms(f"line {lineno}: {len(rec.atoms)} atoms exceed the maximum of {dims.n}")
            err.line = lineno
            raise err
        try:
            graphs.append(record_to_graph(rec, vocab, dims))
        except DataError as exc:
            raise ParseError(str(exc), line=lineno) from None
        records.append(rec)
    if not records:
        raise EmptySet("dataset contains no molecules")
    ys = [r.y_raw for r in records]
    if all(y is None for y in ys):
        return Dataset(graphs, records, None, None)
    if any(y is None for y in ys):
        missing = next(i for i, y in enumerate(ys) if y is None)
        raise DataError(f"record {missing + 1} lacks the property value the others carry")
    return Dataset(graphs, records, ys, PropertyStats.from_values(ys))


def read_dataset(path, vocab: AtomVocab, dims: Dims) -> Dataset:
    """Load a ``.jsonl`` or ``.smi`` dataset (format chosen by extension)."""
    with open(path, encoding="utf-8") as fh:
        return load_records(fh, format_of(path), vocab, dims)


read_dataset_jsonl = read_dataset


def graph_record(g: MolecularGraph, vocab: AtomVocab) -> dict:
    real = g.real_atoms().tolist()
    pos = {v: i for i, v in enumerate(real)}
    types = g.atom_types()
    return {
        "atoms": [vocab.symbols[types[v]] for v in real],
        "bonds": [[pos[i], pos[j], o] for i, j, o in g.bonds()],
    }
