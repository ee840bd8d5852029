"""Run configuration: YAML ingestion, validation and problem construction.

A config file looks like::

    schema: skiemodes.config/1
    name: example1
    physics:
      wavelength: 1.5          # same length unit as the geometry
      length_unit: um
      n_cladding: 1.444
    inclusions:
      - {shape: circle, center: [0, 0], radius: 25, n: 1.4475}
    discretization: {panels: 5, p: 10}
    search:
      guesses: [1.447115413503111]

Lengths are nondimensionalized once, at ingestion, by ``k_v = 2 pi / wavelength``.
Complex numbers may be written as ``[re, im]`` or as strings like ``"1.4+2e-8j"``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..geometry import Circle, Ellipse, PerturbedCircle, Polygon, ValidationError, discretize

__all__ = [
    "CONFIG_SCHEMA",
    "ConfigError",
    "PhysicalConfig",
    "InclusionSpec",
    "Config",
    "load_config",
    "parse_config",
    "builtin_configs",
    "square_layout",
    "parse_complex",
]

CONFIG_SCHEMA = "skiemodes.config/1"

_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9}
_SHAPES = ("circle", "ellipse", "perturbed_circle", "polygon", "square", "ring")


class ConfigError(ValueError):
    pass


def parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            raise ConfigError(f"cannot parse complex value {v!r}") from None
    if isinstance(v, (complex, np.complexfloating)):
        return complex(v)
    return complex(float(v))


def square_layout(nodes_per_side: int, p: int = 10):
    """``(base panels, grading levels)`` giving ``nodes_per_side`` nodes per side.

    A side carries ``base + 2 L`` panels of ``p`` nodes; the ladder
    ``150, 300, 450, ...`` uses ``base = N/(3p) + 2`` and ``L = N/(3p) - 1``.
    """
    n = int(nodes_per_side)
    if n <= 0 or n % (3 * p):
        raise ConfigError(f"nodes per side must be a positive multiple of {3 * p}")
    k = n // (3 * p)
    if k < 1:
        raise ConfigError("too few nodes per side")
    return k + 2, k - 1


@dataclass(frozen=True)
class PhysicalConfig:
    """Wavelength (metres), cladding index and branch convention."""

    wavelength: float
    n_cladding: float
    length_unit: str = "um"
    branch: str = "outgoing"

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ConfigError("wavelength must be positive")
        if not self.n_cladding > 0:
            raise ConfigError("cladding index must be positive")
        if self.branch not in ("outgoing", "upper"):
            raise ConfigError(f"unknown branch {self.branch!r}")

    @property
    def k_vacuum(self) -> float:
        """Vacuum wavenumber ``2 pi / wavelength`` in 1/m."""
        return 2 * np.pi / self.wavelength

    @property
    def length_scale(self) -> float:
        """Factor turning lengths in ``length_unit`` into nondimensional ones."""
        return 2 * np.pi / (self.wavelength / _UNITS[self.length_unit])


@dataclass(frozen=True)
class InclusionSpec:
    """One curve in config units, with its index and panel count."""

    shape: str
    params: dict
    n: float
    panels: int | None = None

    def curve(self, scale: float):
        p = self.params
        c = tuple(float(v) * scale for v in p.get("center", (0.0, 0.0)))
        if self.shape == "circle":
            return Circle(c, float(p["radius"]) * scale)
        if self.shape == "ellipse":
            return Ellipse(c, float(p["a"]) * scale, float(p["b"]) * scale)
        if self.shape == "perturbed_circle":
            return PerturbedCircle(c, float(p["diameter"]) * scale, float(p.get("amplitude", 0.0)),
                                   int(p.get("lobes", 7)))
        if self.shape == "square":
            h = 0.5 * float(p["side"]) * scale
            return Polygon(((c[0] - h, c[1] - h), (c[0] + h, c[1] - h),
                            (c[0] + h, c[1] + h), (c[0] - h, c[1] + h)))
        if self.shape == "polygon":
            return Polygon(tuple((float(x) * scale, float(y) * scale) for x, y in p["vertices"]))
        raise ConfigError(f"unknown shape {self.shape!r}")


def _expand_ring(entry: dict) -> list:
    """``shape: ring`` expands to ``count`` equal holes on a circle."""
    count = int(entry.get("count", 6))
    radius = float(entry["ring_radius"])
    offset = np.deg2rad(float(entry.get("angle_offset", 0.0)))
    c0 = entry.get("center", (0.0, 0.0))
    pert = entry.get("perturbation")
    out = []
    for k in range(count):
        ang = offset + 2 * np.pi * k / count
        c = [float(c0[0]) + radius * np.cos(ang), float(c0[1]) + radius * np.sin(ang)]
        if pert:
            params = {"center": c, "diameter": entry["diameter"],
                      "amplitude": pert.get("amplitude", 0.0), "lobes": pert.get("lobes", 7)}
            out.append(InclusionSpec("perturbed_circle", params, float(entry["n"]), entry.get("panels")))
        else:
            params = {"center": c, "radius": 0.5 * float(entry["diameter"])}
            out.append(InclusionSpec("circle", params, float(entry["n"]), entry.get("panels")))
    return out


@dataclass
class Config:
    """Immutable-by-convention snapshot of a run configuration."""

    name: str
    physics: PhysicalConfig
    inclusions: list
    panels: int = 10
    p: int = 10
    corner_levels: int = 25
    nodes_per_side: int | None = None
    search: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def indices(self):
        return [self.physics.n_cladding] + [inc.n for inc in self.inclusions]

    def panel_counts(self):
        counts, levels = [], self.corner_levels
        for inc in self.inclusions:
            if inc.shape in ("square", "polygon") and self.nodes_per_side is not None:
                base, levels = square_layout(self.nodes_per_side, self.p)
                counts.append(base)
            else:
                counts.append(inc.panels if inc.panels is not None else self.panels)
        return counts, levels

    def discretization(self):
        scale = self.physics.length_scale
        specs = [inc.curve(scale) for inc in self.inclusions]
        counts, levels = self.panel_counts()
        try:
            return discretize(specs, counts, self.p, levels)
        except ValidationError as exc:
            raise ConfigError(f"invalid geometry: {exc}") from None

    def with_overrides(self, **kw) -> "Config":
        """Copy with discretization/search keys replaced (``None`` values ignored)."""
        new = copy.deepcopy(self)
        for k, v in kw.items():
            if v is None:
                continue
            if k in ("panels", "p", "corner_levels", "nodes_per_side"):
                setattr(new, k, v)
            elif k == "panel_scale":
                new.panels = max(1, int(round(new.panels * v)))
                new.inclusions = [InclusionSpec(i.shape, i.params, i.n,
                                                None if i.panels is None
                                                else max(1, int(round(i.panels * v))))
                                  for i in new.inclusions]
            else:
                new.search[k] = v
        return new

    def settings(self) -> dict:
        """Plain-data echo of everything that determines a run."""
        counts, levels = self.panel_counts()
        return {
            "name": self.name,
            "wavelength_m": self.physics.wavelength,
            "length_unit": self.physics.length_unit,
            "n_cladding": self.physics.n_cladding,
            "branch": self.physics.branch,
            "inclusions": [{"shape": i.shape, "n": i.n, **_plain(i.params)} for i in self.inclusions],
            "panels": counts,
            "p": self.p,
            "corner_levels": levels,
            "nodes_per_side": self.nodes_per_side,
            "search": _plain(self.search),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def parse_config(data: dict) -> Config:
    """Validate a decoded config mapping."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    schema = data.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}")
    phys = data.get("physics") or {}
    unit = phys.get("length_unit", "um")
    if unit not in _UNITS:
        raise ConfigError(f"unknown length unit {unit!r}")
    try:
        physics = PhysicalConfig(float(phys["wavelength"]) * _UNITS[unit], float(phys["n_cladding"]),
                                 unit, phys.get("branch", "outgoing"))
    except KeyError as exc:
        raise ConfigError(f"physics section lacks {exc}") from None
    incs = []
    for entry in data.get("inclusions") or []:
        shape = entry.get("shape")
        if shape not in _SHAPES:
            raise ConfigError(f"unknown shape {shape!r}")
        if "n" not in entry:
            raise ConfigError("every inclusion needs an index n")
        if not float(entry["n"]) > 0:
            raise ConfigError("indices must be positive")
        if shape == "ring":
            incs.extend(_expand_ring(entry))
        else:
            params = {k: v for k, v in entry.items() if k not in ("shape", "n", "panels")}
            incs.append(InclusionSpec(shape, params, float(entry["n"]), entry.get("panels")))
    if not incs:
        raise ConfigError("at least one inclusion is required")
    disc = data.get("discretization") or {}
    return Config(
        name=str(data.get("name", "run")),
        physics=physics,
        inclusions=incs,
        panels=int(disc.get("panels", 10)),
        p=int(disc.get("p", 10)),
        corner_levels=int(disc.get("corner_levels", 25)),
        nodes_per_side=disc.get("nodes_per_side"),
        search=dict(data.get("search") or {}),
        raw=data,
    )


def builtin_configs() -> list:
    """Names of the configs shipped with the package."""
    root = resources.files("skiemodes").joinpath("data", "configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_config(source) -> Config:
    """Load a config from a path, or by name from the bundled examples."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    else:
        res = resources.files("skiemodes").joinpath("data", "configs", f"{source}.yaml")
        if not res.is_file():
            raise ConfigError(f"no config file or bundled config named {source!r}")
        text = res.read_text()
    return parse_config(yaml.safe_load(text))
