"""Run configuration and its flat ``key = value`` text form.

Nested values use dotted keys (``priors.a``, ``mniw.n0``). Values are JSON
literals (numbers, ``true``/``false``, ``null``, nested lists for
matrices); a bare word such as ``identity`` is kept as a string.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .dynamics import MniwPrior
from .errors import ValidationError
from .hdp import HyperPriors
from .messages import ObsModel, StatePrior


class ConfigError(ValidationError):
    def __init__(self, key, reason):
        self.key = key
        super().__init__(f"config key '{key}': {reason}")


@dataclass(frozen=True)
class MniwConfig:
    """Unset entries fall back to :meth:`MniwPrior.default`."""

    M: list | None = None
    K: list | float | None = None
    n0: float | None = None
    S0: list | float | None = None

    def resolve(self, dim):
        base = MniwPrior.default(dim)
        return MniwPrior(
            M=base.M if self.M is None else _matrix(self.M, dim, "mniw.M"),
            K=base.K if self.K is None else _matrix(self.K, dim, "mniw.K"),
            n0=base.n0 if self.n0 is None else float(self.n0),
            S0=base.S0 if self.S0 is None else _matrix(self.S0, dim, "mniw.S0"),
        )


@dataclass(frozen=True)
class RunConfig:
    L: int = 100
    iterations: int = 105
    select_window: int = 5
    burn_in: int = 0
    thin: int = 5
    seed: int = 0
    chains: int = 1
    priors: HyperPriors = field(default_factory=HyperPriors)
    resample_hyperparameters: bool = True
    sticky: bool = True
    R: float | list = 1e-4
    C: str | list = "identity"
    x0_mean: list | None = None
    x0_cov: list | float | None = None
    mniw: MniwConfig = field(default_factory=MniwConfig)

    def __post_init__(self):
        checks = {
            "L": self.L >= 1,
            "iterations": self.iterations >= 0,
            "select_window": self.select_window >= 1,
            "burn_in": self.burn_in >= 0,
            "thin": self.thin >= 0,
            "chains": self.chains >= 1,
            "seed": 0 <= self.seed < 2**64,
        }
        for key, ok in checks.items():
            if not ok:
                raise ConfigError(key, f"invalid value {getattr(self, key)!r}")

    def obs_model(self, obs_dim):
        if isinstance(self.C, str):
            if self.C != "identity":
                raise ConfigError("C", f"expected 'identity' or a matrix, got {self.C!r}")
            C = np.eye(obs_dim)
        else:
            C = np.atleast_2d(np.asarray(self.C, dtype=float))
            if C.shape[0] != obs_dim:
                raise ConfigError("C", f"needs {obs_dim} rows to match the data")
        return ObsModel(C=C, R=_matrix(self.R, obs_dim, "R"))

    def state_prior(self, y, obs):
        default = StatePrior.from_first_observation(y, obs)
        dim = obs.state_dim
        mean = default.mean if self.x0_mean is None else np.asarray(self.x0_mean, dtype=float).reshape(dim)
        cov = default.cov if self.x0_cov is None else _matrix(self.x0_cov, dim, "x0_cov")
        return StatePrior(mean=mean, cov=cov)

    def mniw_prior(self, dim):
        return self.mniw.resolve(dim)

    def to_flat(self):
        """Dotted-key dict of JSON-compatible values."""
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, dict):
                out.update({f"{key}.{k}": v for k, v in value.items()})
            else:
                out[key] = value
        return out

    def to_text(self):
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in self.to_flat().items())

    @classmethod
    def from_flat(cls, flat, base=None):
        """Overlay dotted-key values on ``base`` (defaults if omitted)."""
        base = base or cls()
        top, nested = {}, {"priors": {}, "mniw": {}}
        names = {f.name: f for f in fields(cls)}
        for key, value in flat.items():
            head, _, tail = key.partition(".")
            if tail:
                group = getattr(base, head, None) if head in nested else None
                if group is None or tail not in {f.name for f in fields(group)}:
                    raise ConfigError(key, "unknown key")
                nested[head][tail] = value
            elif key in names and key not in nested:
                top[key] = _coerce(key, value, names[key].type)
            else:
                raise ConfigError(key, "unknown key")
        try:
            priors = replace(base.priors, **{k: float(v) for k, v in nested["priors"].items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError("priors", str(exc)) from None
        mniw = replace(base.mniw, **nested["mniw"])
        return replace(base, priors=priors, mniw=mniw, **top)


def _coerce(key, value, annotation):
    kind = annotation if isinstance(annotation, str) else getattr(annotation, "__name__", str(annotation))
    try:
        if kind == "int":
            if isinstance(value, bool) or not (isinstance(value, int) or float(value).is_integer()):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError(f"expected true/false, got {value!r}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None
    return value


def _matrix(value, dim, key):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(dim)
    if arr.shape != (dim, dim):
        raise ConfigError(key, f"expected a scalar or {dim}x{dim} matrix, got shape {arr.shape}")
    return arr


def parse_value(text):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text):
    """Parse ``key = value`` lines (``#`` starts a comment) into a flat dict."""
    flat = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, sep, value = line.partition(":")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        flat[key.strip()] = parse_value(value)
    return flat


def load_config(path, base=None):
    with open(path) as fh:
        return RunConfig.from_flat(parse_config_text(fh.read()), base)
