"""Run configuration: flat key = value text files and validation.

The format is deliberately plain: one key per line, '#' comments, commas
for lists. Unknown keys are rejected so typos fail loudly. The metadata
file echoed next to run outputs is itself a loadable config.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from galbrun.mesh import DuctGeometry
from galbrun.physics import (
    AbcVariant,
    ProfileKind,
    SourceKind,
    SourceSpec,
    TimeProfile,
    well_posedness_margin,
)


class ConfigError(ValueError):
    """Malformed or physically inadmissible configuration."""


class InitKind:
    NONE = "none"
    BUMP = "bump"
    PLANE_PULSE = "plane_pulse"
    ALL = (NONE, BUMP, PLANE_PULSE)


@dataclass
class RunConfig:
    """Everything a run needs; field names double as config file keys.

    Geometry and grid: R, h are the duct half-length and half-height, nx
    and ny the cell counts. Time stepping derives the step from
    cfl_safety * h_min / (1 + |M|) and snaps it so an integer number of
    steps lands on t_end.

    Flow: M is the mean-flow Mach number (|M| < 1 enforced), s the
    regularization weight on the curl-curl term. min(1, s) > M^2 is the
    sufficient well-posedness regime; outside it the run proceeds with a
    warning.

    Initial data (init_kind): "none" starts from rest; "bump" starts from
    the gradient of a Gaussian bump with zero velocity; "plane_pulse"
    launches an exact downstream-moving y-independent pulse (init_center_y
    is ignored for it).
    """

    # geometry
    R: float = 4.0
    h: float = 1.0
    # discretization
    nx: int = 160
    ny: int = 40
    cfl_safety: float = 0.35
    t_end: float = 2.0
    snapshot_times: tuple[float, ...] = ()
    # flow
    M: float = 0.5
    s: float = 1.0
    # artificial boundary treatment
    abc: str = "stable"
    # source
    source_kind: str = "rotational"
    source_center_x: float = 0.0
    source_center_y: float = 0.0
    source_width: float = 0.25
    source_amplitude: float = 1.0
    time_profile: str = "gaussian_pulse"
    time_t0: float = 0.5
    time_sigma: float = 0.1
    # initial data
    init_kind: str = "none"
    init_center_x: float = 0.0
    init_center_y: float = 0.0
    init_width: float = 0.35
    init_amplitude: float = 1.0
    # output
    out_dir: str = "out"
    energy_log: str = "energy.csv"
    field_format: str = "vtk_ascii"
    serial_deterministic: bool = True

    def geometry(self) -> DuctGeometry:
        return DuctGeometry(R=self.R, h=self.h)

    def abc_variant(self) -> AbcVariant:
        return AbcVariant(self.abc)

    def source_spec(self) -> SourceSpec | None:
        if self.source_kind == SourceKind.NONE.value:
            return None
        return SourceSpec(
            kind=SourceKind(self.source_kind),
            center=(self.source_center_x, self.source_center_y),
            width=self.source_width,
            amplitude=self.source_amplitude,
            time_profile=TimeProfile(
                kind=ProfileKind(self.time_profile),
                t0=self.time_t0,
                sigma=self.time_sigma,
            ),
        )

    def validate(self) -> list[str]:
        """Raise ConfigError on hard violations; return soft warnings."""
        if self.R <= 0 or self.h <= 0:
            raise ConfigError("R and h must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("nx and ny must be at least 1")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ConfigError("cfl_safety must lie in (0, 1]")
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")
        if abs(self.M) >= 1.0:
            raise ConfigError(
                f"M = {self.M} violates the subsonic requirement |M| < 1"
            )
        if self.s < 0:
            raise ConfigError("regularization weight s must be nonnegative")
        try:
            AbcVariant(self.abc)
        except ValueError:
            raise ConfigError(f"abc must be one of stable, naive, none; got {self.abc!r}")
        try:
            SourceKind(self.source_kind)
        except ValueError:
            raise ConfigError(f"unknown source_kind {self.source_kind!r}")
        try:
            ProfileKind(self.time_profile)
        except ValueError:
            raise ConfigError(f"unknown time_profile {self.time_profile!r}")
        if self.init_kind not in InitKind.ALL:
            raise ConfigError(f"unknown init_kind {self.init_kind!r}")
        if self.source_width <= 0 or self.init_width <= 0 or self.time_sigma <= 0:
            raise ConfigError("source_width, init_width and time_sigma must be positive")
        if self.field_format != "vtk_ascii":
            raise ConfigError(f"unsupported field_format {self.field_format!r}")
        for ts in self.snapshot_times:
            if ts < 0 or ts > self.t_end + 1e-12:
                raise ConfigError(f"snapshot time {ts} outside [0, t_end]")

        warnings = []
        if well_posedness_margin(self.M, self.s) <= 0:
            warnings.append(
                f"min(1, s) = {min(1.0, self.s)} does not exceed M^2 = {self.M ** 2}: "
                "outside the sufficient well-posedness regime, expect instability"
            )
        if self.s != 1.0 and self.abc != "none":
            warnings.append(
                "absorbing boundary analysis assumes s = 1; this run is experimental"
            )
        return warnings


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_value(key: str, raw: str):
    f = _FIELD_TYPES[key]
    raw = raw.strip()
    if f.type in ("float", float):
        return float(raw)
    if f.type in ("int", int):
        return int(raw)
    if f.type in ("bool", bool):
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {key} = {raw!r}")
    if key == "snapshot_times":
        if not raw:
            return ()
        return tuple(float(tok) for tok in raw.split(","))
    return raw


def parse_config_text(text: str) -> RunConfig:
    kwargs = {}
    unknown = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELD_TYPES:
            unknown.append(key)
            continue
        if key in kwargs:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        try:
            kwargs[key] = _parse_value(key, raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(sorted(unknown)))
    return RunConfig(**kwargs)


def load_config(path: str) -> RunConfig:
    """Parse and validate a config file. Warnings are re-derivable via
    RunConfig.validate(); hard violations raise ConfigError."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    cfg = parse_config_text(text)
    cfg.validate()
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_to_text(cfg: RunConfig, header_comments: tuple[str, ...] = ()) -> str:
    """Canonical echo; parsing it back reproduces the config exactly."""
    lines = [f"# {c}" for c in header_comments]
    for f in dataclasses.fields(RunConfig):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
