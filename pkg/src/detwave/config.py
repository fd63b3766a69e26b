"""Strict run configuration loaded from YAML or JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from detwave.errors import AdmissibilityError, ConfigError
from detwave.spectral import ForcingSpec
from detwave.wavenumber import DEFAULT_DELTAS, DEFAULT_RS, TupleGrid


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ForcingMode(_Strict):
    k: tuple[int, int, int]
    amplitude: tuple[float, float, float]
    amplitude_imag: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def as_pair(self):
        a = tuple(complex(re, im) for re, im in zip(self.amplitude, self.amplitude_imag))
        return (self.k, a)


class InitConfig(_Strict):
    rms: float = Field(1e-3, gt=0)
    q_range: tuple[int, int] = (0, 4)
    k_peak: float = Field(4.0, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        lo, hi = self.q_range
        if not 0 <= lo <= hi:
            raise ValueError("q_range must satisfy 0 <= q_lo <= q_hi")
        return self


def _parse_r(v):
    if isinstance(v, str):
        text = v.strip().lower()
        if text == ".inf":
            return math.inf
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"r must be a number or 'inf', got {v!r}") from None
    return float(v)


class TupleConfig(_Strict):
    deltas: list[float] = Field(default_factory=lambda: list(DEFAULT_DELTAS))
    rs: list[float] = Field(default_factory=lambda: list(DEFAULT_RS))

    @field_validator("rs", mode="before")
    @classmethod
    def _rs(cls, v):
        if not isinstance(v, (list, tuple)):
            raise ValueError("rs must be a list")
        return [_parse_r(x) for x in v]

    def grid(self):
        return TupleGrid.from_lists(self.rs, self.deltas)


class OutputConfig(_Strict):
    dir: str = "out"
    series: str = "series.csv"
    snapshot_every: int = Field(0, ge=0)
    snapshot_prefix: str = "snap"


class RunConfig(_Strict):
    """All knobs of a ``run`` or ``sync`` invocation; unknown keys are errors."""

    N: int = Field(64, ge=16)
    L: float = Field(2 * math.pi, gt=0)
    nu: float = Field(gt=0)
    dt: float = Field(gt=0)
    t_end: float = Field(gt=0)
    forcing: list[ForcingMode] = Field(default_factory=list)
    seed: int = 0
    seed_v: int = 1
    init: InitConfig = Field(default_factory=InitConfig)
    tuples: TupleConfig = Field(default_factory=TupleConfig)
    window_T: Optional[float] = Field(None, gt=0)
    sample_stride: int = Field(1, ge=1)
    output: OutputConfig = Field(default_factory=OutputConfig)
    cap_q: bool = False
    convention: Literal["definition", "equality"] = "definition"
    enforce: bool = True

    @field_validator("N")
    @classmethod
    def _pow2(cls, v):
        if v & (v - 1):
            raise ValueError(f"N must be a power of two, got {v}")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        try:
            self.tuples.grid()
        except AdmissibilityError as e:
            raise ValueError(f"tuples: {e}") from None
        try:
            self.forcing_spec()
        except ValueError as e:
            raise ValueError(f"forcing: {e}") from None
        return self

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def forcing_spec(self):
        return ForcingSpec(tuple(m.as_pair() for m in self.forcing))

    def tuple_grid(self):
        return self.tuples.grid()


def _format_error(err: ValidationError):
    first = err.errors()[0]
    key = ".".join(str(p) for p in first["loc"]) or "<root>"
    return key, f"{key}: {first['msg']}"


def parse_config(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values", key="<root>")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        key, msg = _format_error(e)
        raise ConfigError(msg, key=key) from None


def load_config(path) -> RunConfig:
    """Read a YAML (or JSON) config file and validate it strictly."""
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}", key="<file>") from None
    return parse_config(data)
