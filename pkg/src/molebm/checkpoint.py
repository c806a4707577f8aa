"""Binary checkpoint format for :class:`EnergyModel`.

Layout (all integers little-endian)::

    b"GEBM"                 magic
    u32  version            currently 1
    u32  header length      in bytes
    header                  UTF-8 ``key=value`` lines
    f64[]                   payload, row-major, in this order:
                              layer weights (layers ascending, channels ascending)
                              output vector
                              layer power-iteration vectors (same order)
                              output power-iteration vector
                              layer spectral estimates (same order)
                              output spectral estimate
    u32  CRC32              of every preceding byte

Header keys: ``n``, ``b``, ``c``, ``layers``, ``hidden``, ``normalize_adjacency`` (0/1), ``symbols``
(comma separated, omitted without a vocabulary), ``valences``, and
``meta.<name>`` for free-form training metadata.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .energy import EnergyModel
from .errors import ChecksumMismatch, CheckpointError, FormatVersionMismatch
from .graph import AtomVocab, Dims

MAGIC = b"GEBM"
FORMAT_VERSION = 1


def _header(model: EnergyModel) -> bytes:
    lines = [
        f"n={model.dims.n}",
        f"b={model.dims.b}",
        f"c={model.dims.c}",
        f"layers={model.num_layers}",
        f"hidden={model.hidden}",
        f"normalize_adjacency={int(model.normalize_adjacency)}",
    ]
    if model.vocab is not None:
        lines.append("symbols=" + ",".join(model.vocab.symbols))
        lines.append("valences=" + ",".join(str(v) for v in model.vocab.valence))
    for key in sorted(model.metadata):
        value = str(model.metadata[key])
        if "\n" in key or "\n" in value or "=" in key:
            raise CheckpointError(f"metadata entry {key!r} cannot be stored")
        lines.append(f"meta.{key}={value}")
    return "\n".join(lines).encode("utf-8")


def to_bytes(model: EnergyModel, version: int = FORMAT_VERSION) -> bytes:
    header = _header(model)
    parts = [
        *model.layers, model.out,
        *model.layer_u, model.out_u,
        *model.layer_sigma, np.array([model.out_sigma]),
    ]
    payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in parts)
    body = MAGIC + struct.pack("<II", version, len(header)) + header + payload
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(model: EnergyModel, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def from_bytes(data: bytes) -> EnergyModel:
    if len(data) < 12 or data[:4] != MAGIC:
        raise ChecksumMismatch("not a checkpoint file or truncated before the header")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"checkpoint version {version}, this build reads {FORMAT_VERSION}")
    if len(data) < 16 or zlib.crc32(data[:-4]) != struct.unpack("<I", data[-4:])[0]:
        raise ChecksumMismatch("checkpoint CRC32 does not match its contents")
    try:
        fields = dict(line.split("=", 1) for line in data[12:12 + hlen].decode("utf-8").splitlines())
        dims = Dims(int(fields["n"]), int(fields["b"]), int(fields["c"]))
        L, d = int(fields["layers"]), int(fields["hidden"])
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint header: {exc}") from None
    vocab = None
    if "symbols" in fields:
        vocab = AtomVocab(
            tuple(fields["symbols"].split(",")),
            tuple(int(v) for v in fields["valences"].split(",")),
        )
    meta = {k[5:]: v for k, v in fields.items() if k.startswith("meta.")}

    C = dims.c + 1
    widths = [dims.b + 1] + [d] * L
    shapes = (
        [(C, a, b) for a, b in zip(widths[:-1], widths[1:])] + [(d,)]
        + [(C, a) for a in widths[:-1]] + [(d,)]
        + [(C,)] * L + [(1,)]
    )
    payload = np.frombuffer(data, dtype="<f8", offset=12 + hlen, count=(len(data) - 16 - hlen) // 8)
    if payload.size != sum(int(np.prod(s)) for s in shapes):
        raise CheckpointError("payload size does not match the header dimensions")
    arrays, pos = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(payload[pos:pos + size].reshape(shape).astype(np.float64))
        pos += size
    return EnergyModel(
        dims,
        layers=arrays[:L],
        out=arrays[L],
        layer_u=arrays[L + 1:2 * L + 1],
        out_u=arrays[2 * L + 1],
        layer_sigma=arrays[2 * L + 2:3 * L + 2],
        out_sigma=float(arrays[3 * L + 2][0]),
        vocab=vocab,
        metadata=meta,
        normalize_adjacency=fields.get("normalize_adjacency", "1") == "1",
    )


def load_checkpoint(path) -> EnergyModel:
    return from_bytes(Path(path).read_bytes())
