"""Experiment configuration: one frozen record that fully determines a run.

Serializes to sectioned key-value text; the canonical form (sorted keys,
normalized whitespace) is hashed and the hash stamped into every report, so
outputs can be traced back to the exact configuration that produced them.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields, replace

from .stats import AXIOM_KEYS


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "asep-exotic"
    seed: int = 0
    replicas: int = 1000
    axioms: tuple[str, ...] = AXIOM_KEYS
    window: tuple[int, int] = (-24, 24)
    horizon: float = 2.0
    epsilon: float = 0.01
    coupling: tuple[int, int] = (1, 1)
    p1: float = 1.0
    pm1: float = 0.0
    audit_seeds: int = 5
    chain_stride: int = 2
    out: str | None = None

    def __post_init__(self) -> None:
        if self.replicas < 1 or self.audit_seeds < 1 or self.chain_stride < 1:
            raise ValueError("counts must be positive")
        if self.epsilon <= 0 or self.horizon < 0:
            raise ValueError("scale and horizon must be positive")
        if self.window[0] >= self.window[1]:
            raise ValueError("window must be nonempty")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["run"] = {}
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = " ".join(str(v) for v in value)
            cp["run"][f.name] = str(value)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        if "run" not in cp:
            raise ValueError("config must have a [run] section")
        raw = dict(cp["run"])
        kwargs = {}
        for f in fields(cls):
            if f.name not in raw:
                continue
            v = raw.pop(f.name)
            if f.name in ("seed", "replicas", "audit_seeds", "chain_stride"):
                kwargs[f.name] = int(v)
            elif f.name in ("horizon", "epsilon", "p1", "pm1"):
                kwargs[f.name] = float(v)
            elif f.name == "window":
                a, b = v.split()
                kwargs[f.name] = (int(a), int(b))
            elif f.name == "coupling":
                a, b = v.split()
                kwargs[f.name] = (int(a), int(b))
            elif f.name == "axioms":
                kwargs[f.name] = tuple(v.split())
            else:
                kwargs[f.name] = v
        if raw:
            raise ValueError(f"unknown config keys: {sorted(raw)}")
        return cls(**kwargs)

    def canonical(self) -> str:
        """Sorted-key, whitespace-normalized form whose hash names the config."""
        lines = []
        for raw in self.to_ini().splitlines():
            line = " ".join(raw.split())
            if line:
                lines.append(line)
        return "\n".join(sorted(lines)) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)
