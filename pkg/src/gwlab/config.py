"""Experiment configuration: a JSON-serializable record that, together with
the code version, determines every output byte."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .bodies import body_from_descriptor
from .decomposition import GridSpec


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    body: dict = field(default_factory=dict)
    seed: int = 20240
    samples: int = 200_000
    sigmas: list = field(default_factory=lambda: [1.0])
    grid: dict = field(default_factory=dict)
    out: str | None = None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path):
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {"body", "seed", "samples", "sigmas", "grid", "out"}
        options = {k: v for k, v in raw.items() if k not in known}
        sigmas = raw.get("sigmas", [1.0])
        if isinstance(sigmas, dict):
            sigmas = _expand_sigma_grid(sigmas)
        cfg = cls(body=raw.get("body", {}), seed=int(raw.get("seed", 20240)),
                  samples=int(raw.get("samples", 200_000)), sigmas=list(sigmas),
                  grid=raw.get("grid", {}), out=raw.get("out"), options=options)
        cfg.validate()
        return cfg

    def validate(self):
        if self.samples < 1:
            raise ConfigError("samples must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative 64-bit integer")
        if any(s < 0 for s in self.sigmas):
            raise ConfigError("sigmas must be nonnegative")
        return self

    def make_body(self):
        if not self.body:
            raise ConfigError("config needs a body descriptor")
        try:
            return body_from_descriptor(self.body)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def make_grid(self):
        try:
            return GridSpec(**self.grid) if self.grid else GridSpec()
        except TypeError as exc:
            raise ConfigError(f"bad grid spec: {exc}") from exc

    def echo(self):
        return asdict(self)


def _expand_sigma_grid(spec):
    import numpy as np
    try:
        lo, hi = float(spec["lo"]), float(spec["hi"])
        count = int(spec.get("count", 10))
        spacing = spec.get("spacing", "log")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad sigma grid: {exc}") from exc
    if spacing == "log":
        return [float(x) for x in np.geomspace(lo, hi, count)]
    return [float(x) for x in np.linspace(lo, hi, count)]


def code_version():
    """SHA-256 over the package sources, so reports pin the code they ran."""
    pkg = Path(__file__).parent
    h = hashlib.sha256()
    for src in sorted(pkg.glob("*.py")):
        h.update(src.name.encode())
        h.update(src.read_bytes())
    return h.hexdigest()[:16]


def format_float(x):
    """Full-precision decimal formatting used in every CSV/JSON cell."""
    return format(float(x), ".17g")
