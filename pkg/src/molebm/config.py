"""Flat ``key = value`` run configuration.

Files hold one assignment per line; ``#`` starts a comment. Every key must
appear in :data:`SCHEMA` except ``valence.<Symbol>`` overrides. Command-line
flags are merged on top of the file, and both pass through the same checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .errors import ConfigError, DataError
from .graph import PRESETS, AtomVocab, Dims
from .langevin import LangevinConfig
from .training import TrainConfig


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _symbols(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default, help)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any, str]] = {
    "preset": (str, "qm9", "vocabulary/size preset: qm9 or zinc"),
    "atoms": (_symbols, None, "comma-separated atom symbols (overrides the preset)"),
    "max_atoms": (int, None, "maximum atoms per molecule n (overrides the preset)"),
    "bond_types": (int, 3, "number of real bond orders c"),
    "layers": (int, 3, "graph convolution layers"),
    "hidden": (int, 64, "hidden width"),
    "normalize_adjacency": (_bool, True, "degree-normalize adjacency inside the energy"),
    "t": (float, 0.1, "dequantization scale"),
    "alpha": (float, 1.0, "energy magnitude penalty"),
    "lr": (float, 1e-4, "Adam learning rate"),
    "batch": (int, 128, "training batch size"),
    "epochs": (int, 20, "training epochs"),
    "K": (int, 30, "Langevin steps"),
    "step_size": (float, 10.0, "Langevin step size"),
    "noise_std": (float, 0.005, "Langevin noise standard deviation"),
    "clip": (float, 0.01, "per-entry gradient clip"),
    "seed": (int, 0, "random seed"),
    "count": (int, 10000, "molecules to generate"),
    "chains_per_seed": (int, 1, "optimization chains per seed molecule"),
    "delta": (_floats, (0.0, 0.2, 0.4, 0.6), "similarity thresholds"),
    "radius": (int, 2, "fingerprint radius"),
    "nbits": (int, 2048, "fingerprint width"),
    "bins": (int, 20, "property histogram bins"),
}


def schema_help() -> str:
    lines = ["configuration keys (key = value):"]
    for key, (_, default, text) in SCHEMA.items():
        shown = ",".join(map(str, default)) if isinstance(default, tuple) else default
        lines.append(f"  {key:<20} {text} [default: {shown}]")
    lines.append("  valence.<Symbol>     valence override for one atom type")
    return "\n".join(lines)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        raw[key] = value
    return raw


@dataclass(frozen=True)
class RunConfig:
    values: Mapping[str, Any]
    valence: Mapping[str, int]

    def __getitem__(self, key):
        return self.values[key]

    @property
    def vocab(self) -> AtomVocab:
        base = PRESETS[self["preset"]][0]
        symbols = self["atoms"] or base.symbols
        overrides = dict(self.valence)
        if not self["atoms"]:
            overrides = {**dict(zip(base.symbols, base.valence)), **overrides}
        try:
            return AtomVocab.from_symbols(symbols, overrides)
        except DataError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def dims(self) -> Dims:
        n = self["max_atoms"] or PRESETS[self["preset"]][1]
        try:
            return self.vocab.dims(n, self["bond_types"])
        except DataError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def langevin(self) -> LangevinConfig:
        return LangevinConfig(
            K=self["K"], step_size=self["step_size"], noise_std=self["noise_std"],
            clip=self["clip"], t=self["t"], seed=self["seed"],
        )

    def train(self, goal_directed: bool = False) -> TrainConfig:
        return TrainConfig(
            t=self["t"], alpha=self["alpha"], lr=self["lr"], batch=self["batch"],
            epochs=self["epochs"], langevin=self.langevin,
            goal_directed=goal_directed, seed=self["seed"],
        )


def build_config(*layers: Mapping[str, str]) -> RunConfig:
    """Merge raw string mappings (later wins), validate, and convert."""
    merged: dict[str, str] = {}
    for layer in layers:
        merged.update(layer)
    values = {k: default for k, (_, default, _) in SCHEMA.items()}
    valence = {}
    for key, text in merged.items():
        if key.startswith("valence."):
            try:
                valence[key[8:]] = int(text)
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            values[key] = SCHEMA[key][0](text)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    if values["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {values['preset']!r}; choose from {sorted(PRESETS)}")
    for key in ("count", "chains_per_seed", "bins", "nbits", "layers", "hidden"):
        if values[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    if values["radius"] < 0:
        raise ConfigError("radius must be >= 0")
    if any(not 0.0 <= d <= 1.0 for d in values["delta"]):
        raise ConfigError("delta values must lie in [0, 1]")
    cfg = RunConfig(values, valence)
    cfg.dims  # surface vocabulary errors early
    try:
        cfg.train()
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path=None, overrides: Mapping[str, str] | None = None) -> RunConfig:
    file_values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            file_values = parse_config_text(fh.read(), str(path))
    return build_config(file_values, overrides or {})
