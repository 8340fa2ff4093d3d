"""Run configuration and the line-oriented ``key = value`` config format.

Files contain one ``key = value`` pair per line; blank lines and ``#``
comments are ignored. Keys match RunConfig fields exactly; command-line
flags override file values. Values round-trip bit-exactly through
parse -> serialize -> parse.
"""

from dataclasses import dataclass, fields

from .errors import ConfigError
from .solvers import DEFAULT_DT

SCHEMES = ("monolithic", "ivrc", "ivrl", "dmdfs")
SCENARIOS = ("patch", "combination")
BOOTSTRAPS = ("zero", "schur")
INIT_METHODS = ("projection", "interpolation")


@dataclass
class RunConfig:
    """Everything one CLI invocation needs.

    ``kappa1``/``kappa2`` double as the parametric query point; ``corners``
    gives the training rectangle as (k1min, k1max, k2min, k2max). ``seed``
    is reserved and unused by the numerics.
    """

    n: int = 64
    scenario: str = "patch"
    kappa1: float = 1e-3
    kappa2: float = 1e-3
    scheme: str = "ivrc"
    dt: float | None = None
    epsilon: float = 1e-13
    patch_size: int = 2
    corners: tuple | None = None
    bootstrap: str = "zero"
    init: str = "projection"
    operators: str | None = None
    output_dir: str = "out"
    repeats: int = 3
    figures: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ConfigError(f"n must be an even integer >= 2, got {self.n}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.bootstrap not in BOOTSTRAPS:
            raise ConfigError(f"bootstrap must be one of {BOOTSTRAPS}")
        if self.init not in INIT_METHODS:
            raise ConfigError(f"init must be one of {INIT_METHODS}")
        if self.kappa1 <= 0 or self.kappa2 <= 0:
            raise ConfigError("kappa1 and kappa2 must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.patch_size < 1:
            raise ConfigError("patch_size must be at least 1")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.corners is not None:
            c = tuple(float(v) for v in self.corners)
            if len(c) != 4:
                raise ConfigError("corners must be k1min,k1max,k2min,k2max")
            if not (0 < c[0] < c[1] and 0 < c[2] < c[3]):
                raise ConfigError("corner bounds must be positive and ordered")
            self.corners = c

    @property
    def resolved_dt(self) -> float:
        if self.dt is not None:
            return self.dt
        try:
            return DEFAULT_DT[self.n]
        except KeyError:
            raise ConfigError(
                f"no default dt for n = {self.n}; set dt explicitly"
            ) from None

    @property
    def mu(self):
        return (self.kappa1, self.kappa2)

    def corner_points(self):
        """The four sampled parameter pairs of the training rectangle."""
        if self.corners is None:
            raise ConfigError("corners are not configured")
        k1min, k1max, k2min, k2max = self.corners
        return [(k1min, k2min), (k1min, k2max), (k1max, k2min), (k1max, k2max)]


def _parse_bool(text):
    if text.lower() in ("true", "1", "yes", "on"):
        return True
    if text.lower() in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_corners(text):
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 4:
        raise ConfigError("corners must be four comma-separated numbers")
    return tuple(float(p) for p in parts)


_PARSERS = {
    "n": int,
    "scenario": str,
    "kappa1": float,
    "kappa2": float,
    "scheme": str,
    "dt": float,
    "epsilon": float,
    "patch_size": int,
    "corners": parse_corners,
    "bootstrap": str,
    "init": str,
    "operators": str,
    "output_dir": str,
    "repeats": int,
    "figures": _parse_bool,
    "seed": int,
}


def parse_config_text(text: str) -> dict:
    """Parse config text into a key -> value mapping (typed values)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return values


def config_from_mapping(values: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_mapping(parse_config_text(fh.read()))


def serialize_config(cfg: RunConfig) -> str:
    """Config text whose parse reproduces cfg exactly."""
    lines = ["# dmdflux run configuration"]
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        elif isinstance(value, tuple):
            text = ",".join(repr(float(v)) for v in value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
