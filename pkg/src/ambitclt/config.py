"""Run configuration: TOML file, schema validation and model construction."""

import contextlib
import hashlib
import json
import sys
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import AmbitCLTError, ValidationError

__all__ = ["RunConfig", "load_config", "apply_overrides", "config_hash", "section",
           "ConfigError"]


class ConfigError(ValidationError):
    """Schema or value error tied to a config path."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class JumpLawCfg(_Strict):
    name: str
    params: Dict[str, Union[float, List[float], bool]] = Field(default_factory=dict)


class MixingCfg(_Strict):
    kind: Literal["degenerate", "discrete", "gamma"] = "degenerate"
    params: Dict[str, Union[float, List[float]]] = Field(default_factory=dict)


class LevyCfg(_Strict):
    gamma: float = 0.0
    sigma: float = 0.0
    jump_law: Optional[JumpLawCfg] = None
    intensity: float = 0.0
    gaussian_compensation: bool = False
    mixing: MixingCfg = Field(default_factory=MixingCfg)


class KernelCfg(_Strict):
    kind: Literal["mstou-exp", "exp-bounded", "geometric-ma", "tabulated"] = "mstou-exp"
    c: float = 1.0
    m: int = 1
    M: float = 1.0
    K: float = 1.0
    dim: int = 1
    ratio: float = 0.5
    terms: int = 64
    path: Optional[str] = None


class GeometryCfg(_Strict):
    m: int = 1
    shape: Literal["c-cone", "lex-halfspace", "rotated-halfspace"] = "c-cone"
    c: float = 1.0
    alpha: Optional[List[float]] = None


class VolatilityCfg(_Strict):
    kind: Literal["constant", "mmaf", "iid-cell"] = "constant"
    value: float = 1.0
    kernel: Optional[KernelCfg] = None
    levy: Optional[LevyCfg] = None
    law: str = "gamma"
    params: Dict[str, float] = Field(default_factory=dict)


class ModelCfg(_Strict):
    type: Literal["mmaf", "ambit", "geometric-ma", "iid-normal"] = "mmaf"
    levy: LevyCfg = Field(default_factory=LevyCfg)
    kernel: KernelCfg = Field(default_factory=KernelCfg)
    geometry: Optional[GeometryCfg] = None
    volatility: Optional[VolatilityCfg] = None


class PlanCfg(_Strict):
    n: int = 32
    m: int = 2
    T: Optional[float] = None
    grid_step: float = 0.5
    eps_bias: float = 1e-2
    reps: int = 1
    seed: int = 0


class TaskCfg(_Strict):
    kind: Literal["moments", "coeffs", "simulate", "clt-mean", "clt-acf", "clt-pmoment",
                  "fit"] = "moments"
    case: str = "i"
    coefficient: Literal["theta-lex", "eta"] = "theta-lex"
    method: Literal["closed-form", "quadrature"] = "closed-form"
    h: Optional[List[float]] = None
    h_min: float = 1.0
    h_max: float = 1e4
    points: int = 41
    delta: float = 2.0
    p: int = 2
    target: Literal["mean", "autocov", "pth-moment", "eta-mean"] = "mean"
    max_lag: int = 3
    lags: Optional[List[List[int]]] = None
    moment: Optional[float] = None
    pilot_reps: Optional[int] = Field(default=None, ge=2)
    variance: Optional[float] = None
    level: float = 0.01
    lrv_eps: float = 1e-4
    conditions: List[str] = Field(default_factory=lambda: ["var", "R1", "R2", "R3"])
    free: List[str] = Field(default_factory=lambda: ["alpha", "beta", "sigma"])
    init: Dict[str, float] = Field(default_factory=dict)
    restarts: int = 5
    data: Optional[str] = None


class OutputCfg(_Strict):
    prefix: str = ""


class TolCfg(_Strict):
    rel_tol: float = 1e-8
    max_refinements: int = 6


class RunConfig(_Strict):
    """Validated run configuration; unknown keys are rejected."""

    model: ModelCfg = Field(default_factory=ModelCfg)
    plan: PlanCfg = Field(default_factory=PlanCfg)
    task: TaskCfg = Field(default_factory=TaskCfg)
    output: OutputCfg = Field(default_factory=OutputCfg)
    tolerances: TolCfg = Field(default_factory=TolCfg)


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw, overrides):
    """Apply ``key.path=value`` overrides (values parsed as TOML) to a dict."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", item)
        key, val = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError("cannot descend into a scalar", key)
        node[parts[-1]] = _parse_value(val.strip())
    return raw


def validate(raw):
    try:
        return RunConfig.model_validate(raw)
    except PydanticError as exc:
        err = exc.errors()[0]
        path = ".".join(str(x) for x in err["loc"])
        raise ConfigError(err["msg"], path) from None


def load_config(path=None, overrides=()):
    """Read, override and validate a TOML config."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}", str(path)) from None
    return validate(apply_overrides(raw, overrides))


def config_hash(cfg):
    """SHA-256 of the canonical JSON form of a validated config."""
    blob = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@contextlib.contextmanager
def section(path):
    """Prefix package errors raised inside with the config path ``path``."""
    try:
        yield
    except ConfigError:
        raise
    except AmbitCLTError as exc:
        if not getattr(exc, "config_path", None):
            exc.config_path = path
        raise
