"""Run configuration: INI-style files, command-line overrides and validation."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import asdict, dataclass, field, fields

from .branching import InitialCondition
from .exceptions import ParameterError
from .kernels import FracParams

__all__ = ["RunConfig", "SECTIONS", "load_config", "parse_floats", "parse_complex_list"]

# section -> field names, in the order they are printed
SECTIONS = {
    "params": ["alpha", "beta", "theta", "rho"],
    "initial": ["u0", "c", "amplitude", "width", "center", "u0_file"],
    "evaluation": ["t", "x", "z"],
    "mc": ["n_paths", "seed", "workers", "engine", "max_depth", "allow_unbounded"],
    "grid": ["T", "N_t", "N_x", "halfwidth", "tol", "max_iters", "grid_check"],
    "kernel": ["kernel_t", "n_points", "tail_target"],
    "sampler": ["sample_kind", "n_samples", "lam"],
    "output": ["output"],
}


@dataclass
class RunConfig:
    alpha: float = 0.7
    beta: float = 1.5
    theta: float = 0.0
    rho: str = "one"
    u0: str = "gaussian"
    c: float = 0.5
    amplitude: float = 1.0
    width: float = 1.0
    center: float = 0.0
    u0_file: str = ""
    t: list = field(default_factory=lambda: [0.5])
    x: list = field(default_factory=lambda: [0.0])
    z: list = field(default_factory=lambda: [-1.0])
    n_paths: int = 100_000
    seed: int = 12345
    workers: int = 1
    engine: str = "backward"
    max_depth: int = 10_000
    allow_unbounded: bool = False
    T: float = 0.0
    N_t: int = 64
    N_x: int = 0
    halfwidth: float = 0.0
    tol: float = 1e-8
    max_iters: int = 200
    grid_check: bool = True
    kernel_t: float = 1.0
    n_points: int = 2**16
    tail_target: float = 1e-3
    sample_kind: str = "kernel"
    n_samples: int = 100_000
    lam: float = 1.0
    output: str = ""

    # {{{ derived objects

    def params(self) -> FracParams:
        return FracParams(self.alpha, self.beta, self.theta)

    def rho_value(self) -> float:
        if self.rho in ("one", "1", "1.0"):
            return 1.0
        if self.rho == "alpha":
            return self.alpha
        try:
            value = float(self.rho)
        except ValueError:
            raise ParameterError(f"rho must be 'one', 'alpha' or a number, got {self.rho!r}") from None
        if not (math.isfinite(value) and value > 0):
            raise ParameterError(f"rho must be positive, got {self.rho!r}")
        return value

    def initial_condition(self) -> InitialCondition:
        if self.u0 == "constant":
            return InitialCondition.constant(self.c)
        if self.u0 == "gaussian":
            return InitialCondition.gaussian(self.amplitude, self.width, self.center)
        if self.u0 == "tabulated":
            if not self.u0_file:
                raise ParameterError("u0 = tabulated needs u0_file")
            return InitialCondition.from_file(self.u0_file)
        raise ParameterError(f"u0 must be constant, gaussian or tabulated, got {self.u0!r}")

    def horizon(self) -> float:
        return self.T if self.T > 0 else max(self.t)

    # }}}

    def validate(self) -> RunConfig:
        """Check every module precondition; raises :class:`ParameterError`."""
        self.params()
        self.rho_value()
        self.initial_condition()
        for name in ("t", "x"):
            values = getattr(self, name)
            if not values or not all(math.isfinite(v) for v in values):
                raise ParameterError(f"{name} must be a non-empty list of finite numbers")
        if any(v < 0 for v in self.t):
            raise ParameterError("evaluation times must be >= 0")
        if any(v > 10 for v in self.t) or self.T > 10:
            raise ParameterError("horizons beyond t = 10 are not supported")
        positive_ints = ("n_paths", "workers", "max_depth", "N_t", "max_iters", "n_samples", "n_points")
        for name in positive_ints:
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must lie in [0, 2**64)")
        if self.engine not in ("backward", "forward"):
            raise ParameterError(f"engine must be backward or forward, got {self.engine!r}")
        if self.N_x and (self.N_x < 8 or self.N_x & (self.N_x - 1)):
            raise ParameterError("N_x must be 0 (automatic) or a power of two >= 8")
        if self.n_points < 8 or self.n_points & (self.n_points - 1):
            raise ParameterError("n_points must be a power of two >= 8")
        for name in ("tol", "kernel_t", "tail_target", "lam"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")
        if self.halfwidth < 0 or self.T < 0:
            raise ParameterError("halfwidth and T must be >= 0 (0 selects the default)")
        if self.sample_kind not in ("clock", "stable", "kernel"):
            raise ParameterError(f"sample_kind must be clock, stable or kernel, got {self.sample_kind!r}")
        return self

    def to_dict(self) -> dict:
        """JSON-safe copy; complex arguments become strings."""
        values = asdict(self)
        values["z"] = [_format(v) for v in self.z]
        return values

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        values = asdict(self)
        for section, names in SECTIONS.items():
            parser[section] = {name: _format(values[name]) for name in names}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


_TYPES = {f.name: f for f in fields(RunConfig)}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, complex):
        return repr(value).strip("()")
    return str(value)


def parse_floats(text: str) -> list:
    try:
        return [float(v) for v in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise ParameterError(f"expected a list of numbers, got {text!r}") from exc


def parse_complex_list(text: str) -> list:
    try:
        return [complex(v.replace(" ", "")) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ParameterError(f"expected a comma-separated list of complex numbers, got {text!r}") from exc


def _convert(name: str, raw):
    default = getattr(RunConfig(), name)
    if isinstance(raw, str):
        text = raw.strip()
        if name == "z":
            return parse_complex_list(text)
        if isinstance(default, list):
            return parse_floats(text)
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ParameterError(f"{name} must be a boolean, got {raw!r}")
        if isinstance(default, int):
            try:
                return int(text)
            except ValueError:
                pass
            try:
                value = float(text)
                if not value.is_integer():
                    raise ValueError(text)
                return int(value)
            except (ValueError, OverflowError) as exc:
                raise ParameterError(f"{name} must be an integer, got {raw!r}") from exc
        if isinstance(default, float):
            try:
                return float(text)
            except ValueError as exc:
                raise ParameterError(f"{name} must be a number, got {raw!r}") from exc
        return text
    return raw


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (values that are not None)."""
    values = {}
    if path:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ParameterError(f"cannot read config {path}: {exc}") from exc
        for section in parser.sections():
            if section not in SECTIONS:
                raise ParameterError(f"unknown config section [{section}]")
            for key, raw in parser[section].items():
                if key not in SECTIONS[section]:
                    raise ParameterError(f"unknown key {key!r} in section [{section}]")
                values[key] = _convert(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in _TYPES:
            raise ParameterError(f"unknown setting {key!r}")
        values[key] = _convert(key, raw)
    return RunConfig(**values).validate()
