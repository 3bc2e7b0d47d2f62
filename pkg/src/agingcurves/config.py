"""TOML run configuration for simulation sweeps.

Example::

    seed = 2024
    replications = 50

    [grid]
    t_min = 18
    t_max = 40

    [curve]          # a, b, c, t_peak
    [players]        # sigma_b, sigma_eps
    [missingness]    # pi_schedule = [...] (optional)

    [sweep]
    n_players = [300]
    omega = [0.0]
    sigma_gamma = [0.8]

    [estimation]
    specs = ["spline:obs:fixed", "delta-plus"]   # default: all presets
    spline_df = 6
    boundary_quantile = 0.75
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .exceptions import ParseError
from .numerics import AgeGrid
from .panel import EstimatorSpec, presets
from .simulation import SimulationConfig

_SECTIONS = {
    "grid": {"t_min", "t_max"},
    "curve": {"a", "b", "c", "t_peak"},
    "players": {"sigma_b", "sigma_eps"},
    "missingness": {"pi_schedule"},
    "sweep": {"n_players", "omega", "sigma_gamma"},
    "estimation": {"specs", "spline_df", "boundary_quantile"},
}
_TOP = {"seed", "replications"}


@dataclass
class RunConfig:
    base: SimulationConfig
    sweep: dict = field(default_factory=dict)
    specs: list = field(default_factory=presets)


def _check_keys(table, allowed, where):
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ParseError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed TOML mapping and build a :class:`RunConfig`."""
    _check_keys(data, _TOP | set(_SECTIONS), "top level")
    for name, allowed in _SECTIONS.items():
        if not isinstance(data.get(name, {}), dict):
            raise ParseError(f"[{name}] must be a table")
        _check_keys(data.get(name, {}), allowed, f"[{name}]")

    grid = AgeGrid(**data.get("grid", {}))
    kw = {**data.get("curve", {}), **data.get("players", {})}
    pi = data.get("missingness", {}).get("pi_schedule")
    if pi is not None:
        kw["pi_schedule"] = tuple(pi)
    sweep = {k: list(v) if isinstance(v, list) else [v]
             for k, v in data.get("sweep", {}).items()}
    # the base config takes the first level of each swept factor
    for k, v in sweep.items():
        if v:
            kw[k] = v[0]
    for k in _TOP:
        if k in data:
            kw[k] = data[k]
    base = SimulationConfig(grid=grid, **kw)

    est = dict(data.get("estimation", {}))
    names = est.pop("specs", None)
    specs = ([EstimatorSpec.parse(str(n), **est) for n in names] if names is not None
             else presets(**est))
    return RunConfig(base, sweep, specs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parse_config(data)
