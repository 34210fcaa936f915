"""Problem instance definition, validation, and geometry construction.

A scenario is loaded from a JSON config (units there are dBm / meters) and
stored with all power quantities converted to linear watts. Scenario and
Geometry are immutable after construction and safe to share across workers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .util import DOMAIN_USERS, dbm_to_watts, substream, watts_to_dbm

SCHEMA_VERSION = 1

# Diamond layout from the evaluated deployment: horizontal diagonal 25 m,
# vertical diagonal 50 m, indices ordered top / left / bottom / right / center.
DIAMOND_HALF_HORIZONTAL = 12.5
DIAMOND_HALF_VERTICAL = 25.0


class ConfigError(ValueError):
    """Config text violates the documented schema (bad key, type, or syntax)."""


class ValidationError(ValueError):
    """Config parsed fine but violates a scenario invariant."""


@dataclass(frozen=True)
class Scenario:
    """Validated, immutable problem instance. Powers are linear watts."""

    num_antennas: int = 4
    num_users: int = 4
    num_ris: int = 5
    elements_per_ris: tuple[int, ...] = (20, 20, 20, 20, 20)
    power_budget_w: float = dbm_to_watts(10.0)
    noise_power_w: float = dbm_to_watts(-80.0)
    cost_weight: float = 1.0
    pathloss_ref_db: float = 30.0
    exponent_direct: float = 3.5
    exponent_ris: float = 2.0
    bs_position: tuple[float, float] = (0.0, 0.0)
    ris_positions: tuple[tuple[float, float], ...] = (
        (50.0, 25.0), (37.5, 0.0), (50.0, -25.0), (62.5, 0.0), (50.0, 0.0))
    user_cluster_center: tuple[float, float] = (200.0, 0.0)
    user_cluster_radius: float = 10.0
    rng_seed: int = 0
    eps_inner: float = 1e-4
    eps_outer: float = 1e-3
    max_inner_iters: int = 200
    max_outer_iters: int = 50
    price_cap: float = 0.1
    log_base: str = "natural"

    @property
    def total_elements(self) -> int:
        return sum(self.elements_per_ris)

    @property
    def log_scale(self) -> float:
        """Divide natural-log rates by this to get rates in the configured base."""
        return 1.0 if self.log_base == "natural" else math.log(2.0)

    def element_slice(self, s: int) -> slice:
        """Row slice of RIS s inside the stacked L-element arrays."""
        start = sum(self.elements_per_ris[:s])
        return slice(start, start + self.elements_per_ris[s])

    def replace(self, **changes) -> "Scenario":
        scn = replace(self, **changes)
        validate_scenario(scn)
        return scn


@dataclass(frozen=True)
class Geometry:
    """Resolved 2-D node positions in meters."""

    bs_position: np.ndarray
    ris_positions: np.ndarray  # (S, 2)
    user_positions: np.ndarray  # (K, 2)

    def __post_init__(self):
        for name in ("bs_position", "ris_positions", "user_positions"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (np.isfinite(self.bs_position).all()
                and np.isfinite(self.ris_positions).all()
                and np.isfinite(self.user_positions).all()):
            raise ValidationError("geometry contains non-finite coordinates")


_FIELD_PARSERS = {
    "num_antennas": int,
    "num_users": int,
    "num_ris": int,
    "power_budget_dbm": float,
    "noise_power_dbm": float,
    "cost_weight": float,
    "pathloss_ref_db": float,
    "exponent_direct": float,
    "exponent_ris": float,
    "user_cluster_radius": float,
    "rng_seed": int,
    "eps_inner": float,
    "eps_outer": float,
    "max_inner_iters": int,
    "max_outer_iters": int,
    "price_cap": float,
    "log_base": str,
}
_POINT_FIELDS = ("bs_position", "user_cluster_center", "diamond_center")
_OTHER_FIELDS = ("schema_version", "elements_per_ris", "ris_positions")


def place_diamond(center) -> list[tuple[float, float]]:
    """Positions of the 5 RISs on the diamond: [top, left, bottom, right, center]."""
    cx, cy = float(center[0]), float(center[1])
    return [
        (cx, cy + DIAMOND_HALF_VERTICAL),
        (cx - DIAMOND_HALF_HORIZONTAL, cy),
        (cx, cy - DIAMOND_HALF_VERTICAL),
        (cx + DIAMOND_HALF_HORIZONTAL, cy),
        (cx, cy),
    ]


def _parse_point(name: str, value) -> tuple[float, float]:
    try:
        x, y = value
        return (float(x), float(y))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{name}' must be a 2-element [x, y] pair") from exc


def load_scenario(config_text: str) -> Scenario:
    """Parse JSON config text into a validated Scenario.

    Omitted fields take documented defaults; power fields are given in dBm and
    stored linear. Unknown keys are rejected so typos surface immediately.
    """
    try:
        raw = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    known = set(_FIELD_PARSERS) | set(_POINT_FIELDS) | set(_OTHER_FIELDS)
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config field '{key}'")

    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"field 'schema_version': unsupported version {version!r}")

    kwargs = {}
    for key, parser in _FIELD_PARSERS.items():
        if key not in raw:
            continue
        try:
            value = parser(raw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field '{key}' has invalid value {raw[key]!r}") from exc
        if key == "power_budget_dbm":
            kwargs["power_budget_w"] = dbm_to_watts(value)
        elif key == "noise_power_dbm":
            kwargs["noise_power_w"] = dbm_to_watts(value)
        else:
            kwargs[key] = value

    for key in ("bs_position", "user_cluster_center"):
        if key in raw:
            kwargs[key] = _parse_point(key, raw[key])

    num_ris = kwargs.get("num_ris", Scenario.num_ris)
    if "elements_per_ris" in raw:
        value = raw["elements_per_ris"]
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            kwargs["elements_per_ris"] = (int(value),) * num_ris
        elif isinstance(value, list):
            kwargs["elements_per_ris"] = tuple(int(v) for v in value)
        else:
            raise ConfigError("field 'elements_per_ris' must be an int or list of ints")
    else:
        kwargs["elements_per_ris"] = (20,) * num_ris

    if "ris_positions" in raw and raw["ris_positions"] is not None:
        if "diamond_center" in raw:
            raise ConfigError("give either 'ris_positions' or 'diamond_center', not both")
        pos = raw["ris_positions"]
        if not isinstance(pos, list):
            raise ConfigError("field 'ris_positions' must be a list of [x, y] pairs")
        kwargs["ris_positions"] = tuple(_parse_point("ris_positions", p) for p in pos)
    else:
        center = _parse_point("diamond_center", raw.get("diamond_center", [50.0, 0.0]))
        if num_ris == 5:
            kwargs["ris_positions"] = tuple(place_diamond(center))
        else:
            raise ConfigError(
                "field 'ris_positions' is required when num_ris != 5 "
                "(the diamond layout defines exactly 5 positions)")

    scenario = Scenario(**kwargs)
    validate_scenario(scenario)
    return scenario


def validate_scenario(scenario: Scenario) -> None:
    """Raise ValidationError on any violated invariant."""
    scn = scenario
    for name in ("num_antennas", "num_users", "num_ris"):
        if getattr(scn, name) < 1:
            raise ValidationError(f"{name} must be >= 1, got {getattr(scn, name)}")
    if len(scn.elements_per_ris) != scn.num_ris:
        raise ValidationError(
            f"elements_per_ris has {len(scn.elements_per_ris)} entries for "
            f"{scn.num_ris} RISs")
    if any(l < 1 for l in scn.elements_per_ris):
        raise ValidationError("every RIS needs at least one element")
    if len(scn.ris_positions) != scn.num_ris:
        raise ValidationError(
            f"ris_positions has {len(scn.ris_positions)} entries for {scn.num_ris} RISs")
    for name in ("power_budget_w", "noise_power_w", "price_cap", "eps_inner", "eps_outer"):
        if not getattr(scn, name) > 0:
            raise ValidationError(f"{name} must be > 0")
    if scn.cost_weight < 0:
        raise ValidationError("cost_weight must be >= 0")
    if scn.user_cluster_radius < 0:
        raise ValidationError("user_cluster_radius must be >= 0")
    if scn.max_inner_iters < 1 or scn.max_outer_iters < 1:
        raise ValidationError("iteration limits must be >= 1")
    if scn.log_base not in ("natural", "base2"):
        raise ValidationError(f"log_base must be 'natural' or 'base2', got {scn.log_base!r}")
    # Coincident nodes are allowed: the channel model clamps sub-meter
    # distances to the 1 m reference, so e.g. a diamond vertex sitting exactly
    # on the BS (location sweeps start there) stays well-defined.


def serialize_scenario(scenario: Scenario) -> str:
    """Inverse of load_scenario: emit config text (dBm / meters units)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "num_antennas": scenario.num_antennas,
        "num_users": scenario.num_users,
        "num_ris": scenario.num_ris,
        "elements_per_ris": list(scenario.elements_per_ris),
        "power_budget_dbm": watts_to_dbm(scenario.power_budget_w),
        "noise_power_dbm": watts_to_dbm(scenario.noise_power_w),
        "cost_weight": scenario.cost_weight,
        "pathloss_ref_db": scenario.pathloss_ref_db,
        "exponent_direct": scenario.exponent_direct,
        "exponent_ris": scenario.exponent_ris,
        "bs_position": list(scenario.bs_position),
        "ris_positions": [list(p) for p in scenario.ris_positions],
        "user_cluster_center": list(scenario.user_cluster_center),
        "user_cluster_radius": scenario.user_cluster_radius,
        "rng_seed": scenario.rng_seed,
        "eps_inner": scenario.eps_inner,
        "eps_outer": scenario.eps_outer,
        "max_inner_iters": scenario.max_inner_iters,
        "max_outer_iters": scenario.max_outer_iters,
        "price_cap": scenario.price_cap,
        "log_base": scenario.log_base,
    }
    return json.dumps(doc, indent=2) + "\n"


def apply_overrides(config_text: str, overrides: list[str]) -> str:
    """Apply 'key=value' CLI overrides on top of config text, returning new text."""
    doc = json.loads(config_text) if config_text.strip() else {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        try:
            doc[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            doc[key.strip()] = value.strip()
    return json.dumps(doc)


def sample_users(scenario: Scenario, rng: np.random.Generator | None = None) -> np.ndarray:
    """K user positions, area-uniform over the configured disk.

    Deterministic given the scenario seed; pass rng only to override the
    default substream.
    """
    if rng is None:
        rng = substream(scenario.rng_seed, DOMAIN_USERS)
    center = np.asarray(scenario.user_cluster_center, dtype=float)
    radius = scenario.user_cluster_radius
    k = scenario.num_users
    r = radius * np.sqrt(rng.uniform(size=k))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=k)
    return center[None, :] + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def build_geometry(scenario: Scenario) -> Geometry:
    """Resolve all node positions for one scenario."""
    return Geometry(
        bs_position=np.asarray(scenario.bs_position, dtype=float),
        ris_positions=np.asarray(scenario.ris_positions, dtype=float),
        user_positions=sample_users(scenario),
    )
