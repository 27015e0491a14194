"""Flat key=value run configuration.

Recognised keys: ``data``, ``output``, ``units``, ``vars_per_unit``, ``lags``,
``blocks`` (``lag`` or ``single``), every ``Hyperparameters`` field by name,
and free-form subcommand options under an ``opt.`` prefix. Blank lines and
text after ``#`` are ignored.

Seeds: ``seed`` is the master seed. A fit with k chains runs chain c on
``SeedSequence(seed).spawn(k)[c]``; forecast origin r uses the r-th child of
``SeedSequence(seed)``; simulate uses ``default_rng(seed)`` directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .sampler import Hyperparameters
from .var import CoefficientLayout, PanelSpec

_HYPER_FIELDS = {f.name: f for f in fields(Hyperparameters)}
_BLOCK_CHOICES = ("lag", "single")


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def parse_hyper_value(name: str, text: str):
    """Typed value of one Hyperparameters field from its text form."""
    if name not in _HYPER_FIELDS:
        raise ValueError(f"unknown hyperparameter {name!r}")
    default = getattr(Hyperparameters(), name)
    if text.strip().lower() == "none":
        if name != "graph_psi":
            raise ValueError(f"{name} cannot be none")
        return None
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        value = _parse_number(text)
        if not float(value).is_integer():
            raise ValueError(f"{name} must be an integer, got {text!r}")
        return int(value)
    value = _parse_number(text)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    return value


@dataclass
class RunConfig:
    data: str | None = None
    output: str = "."
    units: int = 1
    vars_per_unit: int = 1
    lags: int = 1
    blocks: str = "lag"
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    options: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.blocks not in _BLOCK_CHOICES:
            raise ValueError(f"blocks must be one of {_BLOCK_CHOICES}")
        PanelSpec(self.units, self.vars_per_unit, self.lags)
        self.hyper.validate()

    @property
    def spec(self) -> PanelSpec:
        return PanelSpec(self.units, self.vars_per_unit, self.lags)

    def block_partition(self):
        """None for one block per lag; a single block otherwise."""
        if self.blocks == "lag":
            return None
        return [np.arange(CoefficientLayout(self.spec).n)]

    def items(self) -> list[tuple[str, str]]:
        out = [
            ("data", format_value(self.data)),
            ("output", self.output),
            ("units", str(self.units)),
            ("vars_per_unit", str(self.vars_per_unit)),
            ("lags", str(self.lags)),
            ("blocks", self.blocks),
        ]
        out += [(k, format_value(v)) for k, v in self.hyper.to_dict().items()]
        out += [(f"opt.{k}", v) for k, v in sorted(self.options.items())]
        return out

    def to_text(self, extra: dict | None = None) -> str:
        lines = [f"{k} = {v}" for k, v in self.items()]
        for k, v in (extra or {}).items():
            lines.append(f"# {k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "RunConfig":
        kw: dict = {}
        hyper: dict = {}
        options: dict[str, str] = {}
        for key, text in mapping.items():
            if key.startswith("opt."):
                options[key[4:]] = text
            elif key in _HYPER_FIELDS:
                hyper[key] = parse_hyper_value(key, text)
            elif key in ("units", "vars_per_unit", "lags"):
                kw[key] = int(text)
            elif key == "data":
                kw[key] = None if text.lower() == "none" else text
            elif key in ("output", "blocks"):
                kw[key] = text
            else:
                raise ValueError(f"unknown configuration key {key!r}")
        return cls(hyper=Hyperparameters(**hyper), options=options, **kw)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_mapping(parse_pairs(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())


def parse_pairs(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {num}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"line {num}: empty key")
        if key in out:
            raise ValueError(f"line {num}: duplicate key {key!r}")
        out[key] = value
    return out
