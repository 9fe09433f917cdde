"""Run configuration, stored on disk as flat JSON with dotted keys."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .amp import AMPConfig

METHODS = ("taam", "taam_l", "finetune", "oracle", "joint")


class ConfigError(ValueError):
    pass


def _key(name, default, **kw):
    return field(default=default, metadata={"key": name}, **kw)


@dataclass(frozen=True)
class RunConfig:
    method: str = _key("method", "taam")
    seed: int = _key("seed", 0)
    epochs: int = _key("epochs", 200)
    lr: float = _key("lr", 0.005)
    weight_decay: float = _key("weight_decay", 5e-4)
    beta1: float = _key("adam.beta1", 0.9)
    beta2: float = _key("adam.beta2", 0.999)
    adam_eps: float = _key("adam.eps", 1e-8)
    d_hid: int = _key("backbone.d_hid", 256)
    k_prop: int = _key("backbone.k_prop", 2)
    activation: str = _key("backbone.activation", "relu")
    amp_alpha: float = _key("amp.alpha", 0.1)
    amp_hops: tuple = _key("amp.hop_set", (1, 2, 4))
    d_task: int = _key("nsm.d_task", 6)
    heads: int = _key("nsm.heads", 2)
    rank: int = _key("nsm.rank", 4)
    ln_eps: float = _key("nsm.eps", 1e-5)
    loss_reduction: str = _key("loss_reduction", "sum")
    restrict_inference: bool = _key("restrict_inference", True)

    def __post_init__(self):
        method = self.method.replace("-", "_")
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "amp_hops", tuple(int(h) for h in self.amp_hops))
        if method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.loss_reduction not in ("sum", "mean"):
            raise ConfigError("loss_reduction must be 'sum' or 'mean'")
        if self.activation not in ("relu", "none"):
            raise ConfigError("backbone.activation must be 'relu' or 'none'")
        if min(self.d_hid, self.heads, self.d_task, self.rank) < 1 or self.k_prop < 0:
            raise ConfigError("dimensions must be positive")
        try:
            self.amp
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def variant(self) -> str:
        return "taam_l" if self.method == "taam_l" else "taam"

    @property
    def amp(self) -> AMPConfig:
        return AMPConfig(self.amp_alpha, self.amp_hops)

    def to_dotted(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            out[f.metadata["key"]] = list(val) if isinstance(val, tuple) else val
        return out

    @classmethod
    def from_dotted(cls, d: dict, strict: bool = True) -> "RunConfig":
        by_key = {f.metadata["key"]: f for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in by_key:
                if strict:
                    raise ConfigError(f"unknown config key {k!r}")
                continue
            f = by_key[k]
            try:
                kwargs[f.name] = _coerce(f, v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k!r}: {v!r}") from exc
        return cls(**kwargs)

    def override(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _coerce(f, v):
    default = f.default
    if isinstance(default, bool):
        if isinstance(v, str):
            if v.lower() in ("1", "true", "yes"):
                return True
            if v.lower() in ("0", "false", "no"):
                return False
            raise ValueError(v)
        return bool(v)
    if isinstance(default, tuple):
        if isinstance(v, str):
            v = [x for x in v.replace(",", " ").split()]
        return tuple(int(x) for x in v)
    if isinstance(default, int):
        if isinstance(v, float) and not v.is_integer():
            raise ValueError(v)
        return int(v)
    if isinstance(default, float):
        return float(v)
    return str(v)


def load_config_file(path) -> dict:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return d
