"""INI configuration for sweeps and validation runs.

Sections and keys::

    [model]     omega_delta, drive, gamma, beta_sq, r, u2
    [numerics]  n_max_override, tol, chi_step, omega_step, horizon,
                route, strict, dist_time
    [sweep]     name, axis, start, stop, points, scale, values,
                methods, outputs
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .params import InvalidParameterError, ModelParams

AXES = ("detuning", "squeezing", "kerr")
METHODS = ("meanfield", "numeric")
ROUTES = ("perturbative", "eigenvalue", "propagation")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NumericsConfig:
    n_max_override: int | None = None
    tol: float = 1e-8
    chi_step: float = 1e-2
    omega_step: float | None = None
    horizon: float | None = None
    route: str = "perturbative"
    strict: bool = True
    dist_time: float | None = None


@dataclass(frozen=True)
class SweepConfig:
    name: str = "sweep"
    axis: str = "detuning"
    grid: tuple = ()
    methods: tuple = ("meanfield",)
    outputs: tuple = ("cfi",)


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    sweep: SweepConfig | None = None

    def to_dict(self) -> dict:
        out = {"model": asdict(self.model), "numerics": asdict(self.numerics)}
        out["model"]["beta_sq"] = self.model.beta_sq
        del out["model"]["beta"]
        if self.sweep is not None:
            out["sweep"] = asdict(self.sweep)
            out["sweep"]["grid"] = list(self.sweep.grid)
        return out


def _float(section, key, default):
    raw = section.get(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} must be a number, got {raw!r}") from exc


def _list(raw: str) -> tuple:
    return tuple(x.strip() for x in raw.replace(";", ",").split(",") if x.strip())


def _check_keys(section, allowed):
    extra = set(section.keys()) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in [{section.name}]: {', '.join(sorted(extra))}")


def parse_outputs(outputs) -> tuple:
    out = []
    for item in outputs:
        if item in ("cfi", "qfi", "eta", "distribution"):
            out.append(item)
            continue
        if item.startswith("cumulants:"):
            try:
                order = int(item.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad cumulant order in {item!r}") from exc
            if not 1 <= order <= 6:
                raise ConfigError("cumulant order must be between 1 and 6")
            out.append(f"cumulants:{order}")
            continue
        raise ConfigError(f"unknown output {item!r}")
    return tuple(out)


def make_grid(start: float, stop: float, points: int, scale: str = "linear") -> tuple:
    if points < 1:
        raise ConfigError("points must be positive")
    if scale == "linear":
        g = np.linspace(start, stop, points)
    elif scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log grids need positive bounds")
        g = np.geomspace(start, stop, points)
    else:
        raise ConfigError(f"unknown scale {scale!r}")
    return tuple(float(x) for x in g)


def check_grid(grid) -> None:
    if len(grid) == 0:
        raise ConfigError("sweep grid is empty")
    d = np.diff(np.asarray(grid, dtype=float))
    if len(d) and not (np.all(d > 0) or np.all(d < 0)):
        raise ConfigError("sweep grid must be strictly monotone")


def parse_config(text: str, name: str = "sweep") -> RunConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    unknown = set(cp.sections()) - {"model", "numerics", "sweep"}
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")

    model = ModelParams()
    if cp.has_section("model"):
        s = cp["model"]
        _check_keys(s, ("omega_delta", "drive", "gamma", "beta_sq", "r", "u2"))
        beta_sq = _float(s, "beta_sq", model.beta_sq)
        try:
            model = ModelParams.from_beta_sq(
                beta_sq,
                omega_delta=_float(s, "omega_delta", model.omega_delta),
                drive=_float(s, "drive", model.drive),
                gamma=_float(s, "gamma", model.gamma),
                r=_float(s, "r", model.r),
                u2=_float(s, "u2", model.u2),
            )
        except InvalidParameterError as exc:
            raise ConfigError(str(exc)) from exc

    num = NumericsConfig()
    if cp.has_section("numerics"):
        s = cp["numerics"]
        _check_keys(s, ("n_max_override", "tol", "chi_step", "omega_step", "horizon", "route", "strict",
                        "dist_time"))
        n_override = s.get("n_max_override", "").strip()
        route = s.get("route", num.route).strip()
        if route not in ROUTES:
            raise ConfigError(f"route must be one of {ROUTES}")
        try:
            strict = s.getboolean("strict", num.strict)
        except ValueError as exc:
            raise ConfigError("strict must be a boolean") from exc
        num = NumericsConfig(
            n_max_override=int(n_override) if n_override else None,
            tol=_float(s, "tol", num.tol),
            chi_step=_float(s, "chi_step", num.chi_step),
            omega_step=_float(s, "omega_step", None),
            horizon=_float(s, "horizon", None),
            route=route,
            strict=strict,
            dist_time=_float(s, "dist_time", None),
        )
        if num.n_max_override is not None and num.n_max_override < 1:
            raise ConfigError("n_max_override must be >= 1")
        if not (num.chi_step > 0 and num.tol > 0):
            raise ConfigError("chi_step and tol must be positive")

    sweep = None
    if cp.has_section("sweep"):
        s = cp["sweep"]
        _check_keys(s, ("name", "axis", "start", "stop", "points", "scale", "values", "methods", "outputs"))
        axis = s.get("axis", "detuning").strip()
        if axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}")
        if s.get("values"):
            try:
                grid = tuple(float(x) for x in _list(s["values"]))
            except ValueError as exc:
                raise ConfigError("values must be numbers") from exc
        else:
            if "start" not in s or "stop" not in s or "points" not in s:
                raise ConfigError("[sweep] needs values or start/stop/points")
            try:
                points = int(s["points"])
            except ValueError as exc:
                raise ConfigError("points must be an integer") from exc
            grid = make_grid(_float(s, "start", 0.0), _float(s, "stop", 0.0), points,
                             s.get("scale", "linear").strip())
        check_grid(grid)
        methods = _list(s.get("methods", "meanfield"))
        if not methods or any(m not in METHODS for m in methods):
            raise ConfigError(f"methods must be a subset of {METHODS}")
        outputs = parse_outputs(_list(s.get("outputs", "cfi")))
        if not outputs:
            raise ConfigError("no outputs requested")
        sweep = SweepConfig(s.get("name", name).strip() or name, axis, grid, methods, outputs)
    return RunConfig(model, num, sweep)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, path.stem)


def apply_axis(params: ModelParams, axis: str, value: float) -> ModelParams:
    key = {"detuning": "omega_delta", "squeezing": "r", "kerr": "u2"}[axis]
    if not math.isfinite(value):
        raise ConfigError(f"non-finite {axis} value")
    return params.with_(**{key: value})
