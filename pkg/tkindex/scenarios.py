"""Scenario configuration: one JSON document, parsed into a frozen ScenarioConfig.

A config names a catalog scenario through "name" and overrides its values key by key;
a name outside the catalog starts from the defaults below.
"""
import dataclasses
import json
import logging
from pathlib import Path

from django.core import validators
from django.core.exceptions import ValidationError as DjangoValidationError

from tkindex.cech import ManifoldTag
from tkindex.sclquant import DEFAULT_EPS_GRID
from tkindex.utils import ValidationError


logger = logging.getLogger(__name__)

FAMILIES = ("toeplitz", "bott", "twisted")

DEFAULT_TOLERANCES = {
    # E1² - E1 of every index idempotent
    "idempotency": 1e-12,
    # distance of traces and pairings from the nearest integer
    "integer": 1e-9,
    # analytic against topological pairing
    "pairing": 1e-6,
    # odd character before and after f -> f + 1
    "deck": 1e-10,
    # twisted-harmonic part of the index difference
    "harmonic": 1e-4,
    # σ(Op(a)) - a on the band grid
    "recovery": 1e-12,
    # gauge residual of the odd character on patch overlaps
    "overlap": 1e-10,
    # residuals that must sit at the discretization's roundoff floor
    "exact": 1e-9,
    # residuals of single-resolution runs, which have no slope to fit
    "residual": 1e-3,
    "curvature_slope": 1.5,
    "defect_slope": 0.9,
}

MINIMA = {
    "resolution": 0,
    "fiber_points": 8,
    "N": 1,
    "seed": 0,
    "samples": 1,
    "max_degree": 4,
}


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    base: str = ManifoldTag.CIRCLE_TIMES_SPHERE2.value
    resolution: int = 0
    resolutions: tuple = (0,)
    fiber_points: int = 8
    N: int = 16
    u_winding: int = 0
    bundle_degree: int = 0
    symbol_winding: int = 0
    family: str = "toeplitz"
    tolerances: dict = dataclasses.field(default_factory=dict)
    seed: int = 0
    samples: int = 100
    eps_grid: tuple = DEFAULT_EPS_GRID
    max_degree: int = 4

    def __post_init__(self):
        for key, minimum in MINIMA.items():
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValidationError("Expected an integer, got {!r}".format(value), key=key)
            if value < minimum:
                raise ValidationError(
                    "Value {} is below the minimum {}".format(value, minimum), key=key
                )
        for key in ("u_winding", "bundle_degree", "symbol_winding"):
            if not isinstance(getattr(self, key), int):
                raise ValidationError("Expected an integer", key=key)
        try:
            validators.validate_slug(self.name)
        except DjangoValidationError:
            raise ValidationError("Scenario names are slugs, got {!r}".format(self.name), key="name")
        try:
            ManifoldTag(self.base)
        except ValueError:
            raise ValidationError(
                "Unknown base {!r}; expected one of {}".format(
                    self.base, [tag.value for tag in ManifoldTag]
                ),
                key="base",
            )
        if self.family not in FAMILIES:
            raise ValidationError("Unknown operator family {!r}".format(self.family), key="family")
        if not self.resolutions or any(
            not isinstance(r, int) or r < MINIMA["resolution"] for r in self.resolutions
        ):
            raise ValidationError("Resolutions must be non-negative integers", key="resolutions")
        if list(self.resolutions) != sorted(set(self.resolutions)):
            raise ValidationError("Resolutions must increase strictly", key="resolutions")
        if not self.eps_grid or any(not 0 < float(eps) < 1 for eps in self.eps_grid):
            raise ValidationError("eps values must lie in (0, 1)", key="eps_grid")
        unknown = sorted(set(self.tolerances) - set(DEFAULT_TOLERANCES))
        if unknown:
            raise ValidationError("Unknown tolerances {}".format(unknown), key="tolerances")
        for key, value in self.tolerances.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise ValidationError("Tolerance must be a positive number", key=key)

    @property
    def manifold(self):
        return ManifoldTag(self.base)

    def tolerance(self, name):
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def replace(self, **changes):
        """Copy with some values changed; `resolution` and `resolutions` stay in step."""
        if "resolution" in changes and "resolutions" not in changes:
            changes["resolutions"] = (changes["resolution"],)
        elif "resolutions" in changes:
            changes["resolutions"] = tuple(changes["resolutions"])
            changes["resolution"] = max(changes["resolutions"])
        if "eps_grid" in changes:
            changes["eps_grid"] = tuple(float(eps) for eps in changes["eps_grid"])
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        data = dataclasses.asdict(self)
        data["resolutions"] = list(self.resolutions)
        data["eps_grid"] = list(self.eps_grid)
        data["tolerances"] = dict(sorted(self.tolerances.items()))
        return data


SCENARIO_CATALOG = {
    "s1xs2-generator": {
        "base": ManifoldTag.CIRCLE_TIMES_SPHERE2.value,
        "u_winding": 1,
        "bundle_degree": 1,
        "family": "twisted",
        "N": 16,
        "resolutions": (0, 1, 2),
    },
    "s1xs2-untwisted": {
        "base": ManifoldTag.CIRCLE_TIMES_SPHERE2.value,
        "family": "twisted",
        "N": 16,
        "resolutions": (0, 1),
    },
    "s2-monopole": {
        "base": ManifoldTag.SPHERE2.value,
        "bundle_degree": 1,
        "family": "bott",
        "N": 6,
    },
    "t2-trivial": {
        "base": ManifoldTag.TORUS2.value,
    },
    "bott-s2": {
        "base": ManifoldTag.SPHERE2.value,
        "family": "bott",
        "N": 6,
    },
    "toeplitz-winding-0": {"base": ManifoldTag.POINT.value, "symbol_winding": 0},
    "toeplitz-winding-1": {"base": ManifoldTag.POINT.value, "symbol_winding": 1},
    "toeplitz-winding-2": {"base": ManifoldTag.POINT.value, "symbol_winding": 2},
    "scl-default": {
        "base": ManifoldTag.SPHERE2.value,
    },
    "thom": {
        "base": ManifoldTag.POINT.value,
        "N": 32,
        "eps_grid": (0.5, 0.25),
    },
    "grr": {
        "base": ManifoldTag.POINT.value,
    },
}

FIELDS = {field.name for field in dataclasses.fields(ScenarioConfig)}
TWIST_KEYS = {"u_winding", "bundle_degree"}


def _read(source):
    if isinstance(source, dict):
        return dict(source)
    path = Path(source)
    try:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    except OSError as e:
        raise ValidationError("Cannot read config {}: {}".format(path, e.strerror))
    except json.JSONDecodeError as e:
        raise ValidationError("Config {} is not valid JSON: {}".format(path, e))
    if not isinstance(document, dict):
        raise ValidationError("Config {} must hold a JSON object".format(path))
    return document


def _flatten_twist(values):
    twist = values.pop("twist", None)
    if twist is None:
        return values
    if not isinstance(twist, dict):
        raise ValidationError("The twist must be an object", key="twist")
    unknown = sorted(set(twist) - TWIST_KEYS)
    if unknown:
        raise ValidationError("Unknown twist keys {}".format(unknown), key="twist")
    for key, value in twist.items():
        if key in values and values[key] != value:
            raise ValidationError("Given both inside and outside the twist", key=key)
        values[key] = value
    return values


def load_config(source):
    """ScenarioConfig from a dict or a JSON file; unknown keys are rejected by name."""
    values = _flatten_twist(_read(source))
    unknown = sorted(set(values) - FIELDS)
    if unknown:
        raise ValidationError("Unknown config keys {}".format(unknown))
    name = values.get("name", ScenarioConfig.name)
    merged = dict(SCENARIO_CATALOG.get(name, {}))
    merged.update(values)
    if "resolutions" in merged and "resolution" in values and "resolutions" not in values:
        # an explicit single resolution wins over the catalog's list
        merged["resolutions"] = (values["resolution"],)
    if "resolutions" in merged:
        merged["resolutions"] = tuple(merged["resolutions"])
        if merged["resolutions"]:
            merged["resolution"] = max(merged["resolutions"])
    elif "resolution" in merged:
        merged["resolutions"] = (merged["resolution"],)
    if "eps_grid" in merged:
        if not isinstance(merged["eps_grid"], (list, tuple)):
            raise ValidationError("eps_grid must be a list", key="eps_grid")
        merged["eps_grid"] = tuple(float(eps) for eps in merged["eps_grid"])
    if "tolerances" in merged and not isinstance(merged["tolerances"], dict):
        raise ValidationError("tolerances must be an object", key="tolerances")
    config = ScenarioConfig(**merged)
    logger.debug("Loaded scenario %s: %s", config.name, config)
    return config
