"""Flat key-value run configuration.

A run config is a text file of ``dotted.key = value`` lines, ``#``
comments, and blank lines.  It fully determines a run: the scenario
(models, topology, trigger levels, inputs, grid, initial states), the
subsystem passivity indices, verification settings, and an optional
trigger-level grid for sweeps.

Example::

    scenario.topology = plant_side
    scenario.plant = ex2_plant
    scenario.controller = ex2_controller
    scenario.dt = 0.001
    scenario.duration = 20.0
    indices.plant.nu = 0.0
    indices.plant.rho = 1.0
    indices.controller.nu = 0.3
    indices.controller.rho = 0.5
    trigger.delta_p = 0.5
    w1.kind = sinusoid
    w1.amplitude = 1.0
    w1.angular_freq = 7.853981633974483
    w2.kind = zero

Unknown keys are rejected.  :func:`flatten_config` inverts parsing, so a
report can echo the effective configuration and a reader can reproduce
the run from the echo alone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .certificates import PassivityIndices, Topology
from .eventsim import Scenario
from .signals import SignalSpec, parse_signal, signal_fields

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "load_config",
    "flatten_config",
    "render_config",
    "fixture_path",
    "fixture_names",
]

_SCENARIO_KEYS = {
    "scenario.topology",
    "scenario.plant",
    "scenario.controller",
    "scenario.dt",
    "scenario.duration",
    "scenario.x0_plant",
    "scenario.x0_controller",
    "trigger.delta_p",
    "trigger.delta_c",
    "indices.plant.nu",
    "indices.plant.rho",
    "indices.controller.nu",
    "indices.controller.rho",
}
_VERIFY_KEYS = {"verify.tolerance", "verify.eps0", "verify.delta0"}
_OTHER_KEYS = {"sweep.delta_grid", "report.format"}
_SIGNAL_PREFIXES = ("w1.", "w2.")
_REQUIRED = (
    "scenario.topology",
    "scenario.plant",
    "scenario.controller",
    "scenario.dt",
    "scenario.duration",
    "indices.plant.nu",
    "indices.plant.rho",
    "indices.controller.nu",
    "indices.controller.rho",
    "w1.kind",
    "w2.kind",
)


class ConfigError(ValueError):
    """A run config is malformed or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI command needs for one run."""

    scenario: Scenario
    plant_indices: PassivityIndices
    controller_indices: PassivityIndices
    tolerance: float = 1e-6
    eps0: float | None = None
    delta0: float | None = None
    delta_grid: tuple[float, ...] | None = None
    report_format: str = "text"

    def with_seed(self, seed: int) -> "RunConfig":
        """Override the seed of every noise input (CLI --seed)."""
        scn = self.scenario
        changes = {}
        for field in ("w1", "w2"):
            spec = getattr(scn, field)
            if hasattr(spec, "seed"):
                changes[field] = replace(spec, seed=seed)
        return replace(self, scenario=replace(scn, **changes)) if changes else self


def _parse_lines(text: str) -> dict[str, str]:
    table: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in table:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        table[key] = value
    return table


def _pop_float(table: dict[str, str], key: str) -> float | None:
    if key not in table:
        return None
    raw = table.pop(key)
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a real number, got {raw!r}") from None


def _pop_floats(table: dict[str, str], key: str) -> tuple[float, ...] | None:
    if key not in table:
        return None
    raw = table.pop(key)
    try:
        return tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated reals, got {raw!r}") from None


def _pop_signal(table: dict[str, str], prefix: str) -> SignalSpec:
    kind_key = prefix + "kind"
    if kind_key not in table:
        raise ConfigError(f"missing required key {kind_key!r}")
    kind = table.pop(kind_key)
    params = {}
    for key in [k for k in table if k.startswith(prefix)]:
        params[key[len(prefix):]] = table.pop(key)
    try:
        return parse_signal(kind, params)
    except ValueError as exc:
        raise ConfigError(f"{prefix[:-1]}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    """Parse config text into a validated :class:`RunConfig`."""
    table = _parse_lines(text)

    missing = [key for key in _REQUIRED if key not in table]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    try:
        topology = Topology.parse(table.pop("scenario.topology"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    plant = table.pop("scenario.plant")
    controller = table.pop("scenario.controller")
    dt = _pop_float(table, "scenario.dt")
    duration = _pop_float(table, "scenario.duration")
    x0_plant = _pop_floats(table, "scenario.x0_plant")
    x0_controller = _pop_floats(table, "scenario.x0_controller")
    delta_p = _pop_float(table, "trigger.delta_p")
    delta_c = _pop_float(table, "trigger.delta_c")
    p_idx = PassivityIndices(
        nu=_pop_float(table, "indices.plant.nu"), rho=_pop_float(table, "indices.plant.rho")
    )
    c_idx = PassivityIndices(
        nu=_pop_float(table, "indices.controller.nu"),
        rho=_pop_float(table, "indices.controller.rho"),
    )
    w1 = _pop_signal(table, "w1.")
    w2 = _pop_signal(table, "w2.")

    tolerance = _pop_float(table, "verify.tolerance")
    eps0 = _pop_float(table, "verify.eps0")
    delta0 = _pop_float(table, "verify.delta0")
    delta_grid = _pop_floats(table, "sweep.delta_grid")
    report_format = table.pop("report.format", "text")
    if report_format not in ("text", "json"):
        raise ConfigError(f"report.format must be 'text' or 'json', got {report_format!r}")

    if table:
        raise ConfigError(f"unknown keys: {', '.join(sorted(table))}")

    scenario = Scenario(
        topology=topology,
        plant=plant,
        controller=controller,
        delta_p=delta_p,
        delta_c=delta_c,
        w1=w1,
        w2=w2,
        dt=dt,
        duration=duration,
        x0_plant=x0_plant,
        x0_controller=x0_controller,
    )
    return RunConfig(
        scenario=scenario,
        plant_indices=p_idx,
        controller_indices=c_idx,
        tolerance=tolerance if tolerance is not None else 1e-6,
        eps0=eps0,
        delta0=delta0,
        delta_grid=delta_grid,
        report_format=report_format,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _format_value(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def flatten_config(cfg: RunConfig) -> dict[str, str]:
    """The effective configuration as flat key-value strings."""
    scn = cfg.scenario
    out: dict[str, str] = {
        "scenario.topology": scn.topology.value,
        "scenario.plant": scn.plant,
        "scenario.controller": scn.controller,
        "scenario.dt": _format_value(scn.dt),
        "scenario.duration": _format_value(scn.duration),
    }
    if scn.x0_plant is not None:
        out["scenario.x0_plant"] = _format_value(scn.x0_plant)
    if scn.x0_controller is not None:
        out["scenario.x0_controller"] = _format_value(scn.x0_controller)
    if scn.delta_p is not None:
        out["trigger.delta_p"] = _format_value(scn.delta_p)
    if scn.delta_c is not None:
        out["trigger.delta_c"] = _format_value(scn.delta_c)
    out["indices.plant.nu"] = _format_value(cfg.plant_indices.nu)
    out["indices.plant.rho"] = _format_value(cfg.plant_indices.rho)
    out["indices.controller.nu"] = _format_value(cfg.controller_indices.nu)
    out["indices.controller.rho"] = _format_value(cfg.controller_indices.rho)
    for prefix, spec in (("w1", scn.w1), ("w2", scn.w2)):
        for name, value in signal_fields(spec).items():
            out[f"{prefix}.{name}"] = _format_value(value)
    out["verify.tolerance"] = _format_value(cfg.tolerance)
    if cfg.eps0 is not None:
        out["verify.eps0"] = _format_value(cfg.eps0)
    if cfg.delta0 is not None:
        out["verify.delta0"] = _format_value(cfg.delta0)
    if cfg.delta_grid is not None:
        out["sweep.delta_grid"] = _format_value(cfg.delta_grid)
    out["report.format"] = cfg.report_format
    return out


def render_config(cfg: RunConfig) -> str:
    """Config text that parses back to an equivalent :class:`RunConfig`."""
    return "".join(f"{key} = {value}\n" for key, value in flatten_config(cfg).items())


def fixture_path(name: str) -> Path:
    """Path of a bundled scenario config, e.g. ``fixture_path('ex2')``."""
    if not name.endswith(".cfg"):
        name = name + ".cfg"
    root = resources.files("etpass").joinpath("fixtures")
    path = Path(str(root.joinpath(name)))
    if not path.is_file():
        known = ", ".join(fixture_names())
        raise ConfigError(f"no bundled config {name!r}; available: {known}")
    return path


def fixture_names() -> list[str]:
    root = Path(str(resources.files("etpass").joinpath("fixtures")))
    return sorted(p.stem for p in root.glob("*.cfg"))
