"""
Settings service for reading experiment configuration files
"""
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, Optional

import config
from couette.numerics.weights import EPS_MAX
from couette.utils.errors import ConfigError

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    "verify-operator",
    "linear-run",
    "kelvin-check",
    "nonlinear-run",
    "threshold-sweep",
    "inequalities",
    "calibrate",
)

# Experiments that assemble the singular operator need n >= 32
OPERATOR_EXPERIMENTS = ("verify-operator", "nonlinear-run", "threshold-sweep", "inequalities", "calibrate", "linear-run")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of one experiment run"""

    experiment: str
    n: int = config.DEFAULT_N
    K: int = config.DEFAULT_K
    Lx: float = config.DEFAULT_LX
    nu: float = config.DEFAULT_NU
    m: float = config.DEFAULT_M
    eps: float = config.DEFAULT_EPS
    A: Optional[float] = None
    eps0: float = config.DEFAULT_EPS0
    dt: float = config.DEFAULT_DT
    t_end: Optional[float] = None
    seed: int = 0
    k: float = 1.0
    out: str = config.OUTPUT_ROOT
    threads: int = config.THREADS
    nu_list: tuple = ()
    lx_list: tuple = ()
    resume: str = ""
    constants: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment '{self.experiment}', expected one of {', '.join(EXPERIMENTS)}")
        if not 0.0 < self.nu < 1.0:
            raise ConfigError(f"ν must lie in (0, 1), got {self.nu}")
        if not 0.0 < self.eps < EPS_MAX:
            raise ConfigError(f"ε must lie in (0, 1/12), got {self.eps}")
        if not self.m > 1.0:
            raise ConfigError(f"m must be > 1, got {self.m}")
        minimum = 32 if self.experiment in OPERATOR_EXPERIMENTS else 8
        if self.n < minimum or self.n % 2:
            raise ConfigError(f"n must be an even integer >= {minimum} for {self.experiment}, got {self.n}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.Lx < 50.0:
            raise ConfigError(f"Lx must be >= 50, got {self.Lx}")
        if not self.dt > 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end is not None and not self.t_end > 0.0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.A is not None and (self.A < 0.0 or not math.isfinite(self.A)):
            raise ConfigError(f"A must be finite and >= 0, got {self.A}")
        if not self.eps0 > 0.0:
            raise ConfigError(f"eps0 must be positive, got {self.eps0}")
        if self.k == 0.0 or not math.isfinite(self.k):
            raise ConfigError(f"k must be finite and nonzero, got {self.k}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        for lx in self.lx_list:
            if lx < 50.0:
                raise ConfigError(f"Lx must be >= 50, got {lx} in lx_list")
        for nu in self.nu_list:
            if not 0.0 < nu < 1.0:
                raise ConfigError(f"ν must lie in (0, 1), got {nu} in nu_list")

    @property
    def amplitude(self) -> float:
        """A when given, otherwise ε0 ν^{1/2}"""
        return self.A if self.A is not None else self.eps0 * math.sqrt(self.nu)

    @property
    def horizon(self) -> float:
        """t_end when given, otherwise 3ν^{-1/3}"""
        return self.t_end if self.t_end is not None else 3.0 * self.nu ** (-1.0 / 3.0)

    def echo(self) -> Dict:
        values = asdict(self)
        values["nu_list"] = list(self.nu_list)
        values["lx_list"] = list(self.lx_list)
        return values


_CONVERTERS = {f.name: f.type for f in fields(RunConfig)}
_ALIASES = {"t-end": "t_end", "tend": "t_end", "lx": "Lx", "k_modes": "K", "output": "out", "nu-list": "nu_list", "lx-list": "lx_list"}


def _convert(key: str, raw: str):
    kind = _CONVERTERS[key]
    try:
        if key in ("nu_list", "lx_list"):
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if key in ("A", "t_end"):
            return None if raw.lower() in ("", "none") else float(raw)
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError as e:
        raise ConfigError(f"invalid value for {key}: '{raw}'") from e
    return raw


def _canonical(key: str) -> str:
    key = key.strip()
    if key in _CONVERTERS:
        return key
    lowered = key.lower().replace("-", "_")
    if key.lower() in _ALIASES:
        return _ALIASES[key.lower()]
    if lowered in _CONVERTERS:
        return lowered
    for name in _CONVERTERS:
        if name.lower() == lowered:
            return name
    raise ConfigError(f"unknown configuration key '{key}'")


class SettingsService:
    """Reads KEY: value (or key = value) experiment files; sections are separated by ---"""

    def __init__(self):
        self._cache: Dict[str, Dict[str, str]] = {}
        self._cache_enabled = True

    def read_settings_file(self, path: str) -> Dict[str, str]:
        """
        Read raw key/value pairs from a configuration file

        Args:
            path: Path to the configuration file

        Returns:
            Dict of canonical key -> raw string value
        """
        resolved = str(Path(path).resolve())
        if self._cache_enabled and resolved in self._cache:
            logger.info(f"Using cached settings for {path}")
            return dict(self._cache[resolved])

        try:
            content = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read configuration file {path}: {e}") from e

        values: Dict[str, str] = {}
        for section in content.split("---"):
            for line in section.splitlines():
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if ":" in line:
                    key, raw = line.split(":", 1)
                elif "=" in line:
                    key, raw = line.split("=", 1)
                else:
                    raise ConfigError(f"{path}: malformed line '{line}' (expected KEY: value)")
                values[_canonical(key)] = raw.strip()

        if self._cache_enabled:
            self._cache[resolved] = dict(values)
        logger.info(f"Read {len(values)} settings from {path}")
        return values

    def clear_cache(self) -> None:
        self._cache.clear()


settings_service = SettingsService()


def parse_config(
    experiment: str,
    path: Optional[str] = None,
    overrides: Optional[Dict] = None,
    service: SettingsService = settings_service,
) -> RunConfig:
    """
    Build a RunConfig from defaults, an optional file and flag overrides

    Flags win over file values; keys set to None in overrides are ignored.
    """
    values = {}
    if path:
        for key, raw in service.read_settings_file(path).items():
            if key == "experiment":
                continue
            values[key] = _convert(key, raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        name = _canonical(key)
        values[name] = _convert(name, value) if isinstance(value, str) else value
    for key in ("nu_list", "lx_list"):
        if key in values:
            values[key] = tuple(values[key])
    return RunConfig(experiment=experiment, **values)

