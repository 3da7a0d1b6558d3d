"""JSON scene/grid configuration.

Lengths are meters and angles degrees in files; everything is converted to
radians internally.  Every error names the offending field (or the line and
column for JSON syntax errors).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from .scene import (DEFAULT_MATERIALS, REFLECTOR_PRESETS, AntennaSpec, ConfigError,
                    CorridorParams, Material, ReceiverGrid, ReflectorSpec, Scene, make_corridor)
from .sweep import TraceOptions

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_ANTENNA = {
    "type": "object",
    "properties": {
        "gain_dbi": {"type": "number"},
        "hpbw_e_deg": {"type": "number"},
        "hpbw_h_deg": {"type": "number"},
        "boresight": _VEC3,
    },
    "additionalProperties": False,
}
SCHEMA = {
    "type": "object",
    "required": ["scene", "corridor", "grid"],
    "additionalProperties": False,
    "properties": {
        "scene": {
            "type": "object",
            "required": ["frequency_hz", "tx"],
            "additionalProperties": False,
            "properties": {
                "frequency_hz": {"type": "number"},
                "tx": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "position": _VEC3,
                        "power_dbm": {"type": "number"},
                        "antenna": _ANTENNA,
                    },
                },
            },
        },
        "corridor": {
            "type": "object",
            "additionalProperties": False,
            "properties": {f.name: {"type": "number"} for f in fields(CorridorParams)},
        },
        "materials": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "perfect_conductor": {"type": "boolean"},
                    "eps_r": {"type": "number"},
                    "sigma": {"type": "number"},
                    "scatter_coeff": {"type": "number"},
                    "scatter_exponent": {"type": "integer"},
                },
            },
        },
        "reflector": {
            "type": "object",
            "required": ["kind", "dims"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["flat_plate", "cylinder", "sphere"]},
                "dims": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"w": {"type": "number"}, "h": {"type": "number"},
                                   "r": {"type": "number"}},
                },
                "center": _VEC3,
                "tilt_deg": {"type": "number"},
            },
        },
        "grid": {
            "type": "object",
            "required": ["origin", "x_extent", "y_extent", "spacing", "height"],
            "additionalProperties": False,
            "properties": {
                "origin": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3},
                "x_extent": {"type": "number"},
                "y_extent": {"type": "number"},
                "spacing": {"type": "number"},
                "height": {"type": "number"},
                "rx_antenna": _ANTENNA,
            },
        },
        "trace": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_order": {"type": "integer"},
                "tile_size": {"type": "number"},
                "seed": {"type": "integer"},
                "diffuse": {"type": "boolean"},
                "rx_orientation": {"enum": ["strongest", "fixed"]},
            },
        },
    },
}

_DIMS_BY_KIND = {"flat_plate": ("w", "h"), "cylinder": ("r", "h"), "sphere": ("r",)}


@dataclass(frozen=True)
class SimConfig:
    scene: Scene
    grid: ReceiverGrid
    options: TraceOptions
    raw: dict

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


def _material_entry(m: Material) -> dict:
    return {"name": m.name, "perfect_conductor": m.perfect_conductor, "eps_r": m.rel_permittivity,
            "sigma": m.conductivity, "scatter_coeff": m.scatter_coeff,
            "scatter_exponent": m.scatter_exponent}


def default_config(reflector: Optional[str] = "plate24") -> dict:
    """Corridor configuration used for the reflector study."""
    p = CorridorParams()
    cfg: dict[str, Any] = {
        "scene": {
            "frequency_hz": 28e9,
            "tx": {
                "position": [float(v) for v in p.tx_position],
                "power_dbm": 0.0,
                "antenna": {"gain_dbi": 17.0, "hpbw_e_deg": 26.0, "hpbw_h_deg": 24.0,
                            "boresight": [-1.0, 0.0, 0.0]},
            },
        },
        "corridor": asdict(p),
        "materials": [_material_entry(m) for m in DEFAULT_MATERIALS.values()],
        "grid": {
            "origin": [(p.perp_width - 1.5) / 2, p.main_width + 0.5],
            "x_extent": 1.5,
            "y_extent": 15.0,
            "spacing": 0.25,
            "height": p.tx_height,
            "rx_antenna": {"gain_dbi": 17.0, "hpbw_e_deg": 26.0, "hpbw_h_deg": 24.0,
                           "boresight": [0.0, -1.0, 0.0]},
        },
        "trace": {"max_order": 2, "tile_size": 0.25, "seed": 0, "diffuse": True,
                  "rx_orientation": "strongest"},
    }
    if reflector is not None and reflector != "none":
        cfg["reflector"] = reflector_section(parse_variant(reflector), p)
    return cfg


def reflector_section(spec: ReflectorSpec, p: CorridorParams = CorridorParams()) -> dict:
    names = _DIMS_BY_KIND[spec.kind]
    center = spec.center if spec.center is not None else [float(v) for v in p.corner_center]
    return {"kind": spec.kind, "dims": dict(zip(names, spec.dims)), "center": list(center),
            "tilt_deg": spec.tilt_deg}


def with_reflector(raw: dict, spec: Optional[ReflectorSpec]) -> dict:
    """Copy of ``raw`` with its reflector section replaced (or removed)."""
    out = copy.deepcopy(raw)
    if spec is None:
        out.pop("reflector", None)
        return out
    old = raw.get("reflector", {})
    if spec.center is None and "center" in old:
        spec = ReflectorSpec(spec.kind, spec.dims, spec.tilt_deg, tuple(old["center"]))
    p = CorridorParams(**raw.get("corridor", {}))
    out["reflector"] = reflector_section(spec, p)
    return out


def parse_variant(text: str) -> Optional[ReflectorSpec]:
    """Reflector variant from a short name.

    ``none``, ``plate12``, ``plate24``, ``plate33``, ``sphere``, ``cylinder``
    (the measured set), or explicit meters: ``plate:W`` / ``plate:WxH``,
    ``sphere:R``, ``cylinder:RxH``.  A trailing ``@DEG`` sets the plate tilt.
    """
    body, _, tilt = text.strip().partition("@")
    tilt_deg = float(tilt) if tilt else 45.0
    if body == "none":
        return None
    if body in REFLECTOR_PRESETS:
        base = REFLECTOR_PRESETS[body]
        return ReflectorSpec(base.kind, base.dims, tilt_deg)
    kind, sep, dims = body.partition(":")
    if not sep:
        raise ConfigError(f"unknown reflector variant {text!r}", "variant")
    try:
        vals = tuple(float(v) for v in dims.split("x"))
    except ValueError:
        raise ConfigError(f"bad dimensions in variant {text!r}", "variant") from None
    if kind == "plate":
        if len(vals) == 1:
            vals = (vals[0], vals[0])
        return ReflectorSpec("flat_plate", vals, tilt_deg)
    if kind in ("sphere", "cylinder"):
        return ReflectorSpec(kind, vals, tilt_deg)
    raise ConfigError(f"unknown reflector variant {text!r}", "variant")


def _antenna(section: Optional[dict], where: str, default_boresight) -> AntennaSpec:
    section = section or {}
    try:
        return AntennaSpec(
            boresight=np.array(section.get("boresight", default_boresight), dtype=float),
            gain_dbi=section.get("gain_dbi", 17.0),
            hpbw_e_deg=section.get("hpbw_e_deg", 26.0),
            hpbw_h_deg=section.get("hpbw_h_deg", 24.0))
    except ConfigError as exc:
        raise ConfigError(exc.message, where) from None


def build_config(raw: dict) -> SimConfig:
    """Validate a parsed config dict and build the simulation objects."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path)
        raise ConfigError(exc.message, path.lstrip(".") or "<root>") from None

    corridor = CorridorParams(**raw["corridor"])
    materials = {}
    for i, m in enumerate(raw.get("materials", [])):
        base = DEFAULT_MATERIALS.get(m["name"], Material(m["name"]))
        try:
            materials[m["name"]] = Material(
                m["name"], m.get("perfect_conductor", base.perfect_conductor),
                m.get("eps_r", base.rel_permittivity), m.get("sigma", base.conductivity),
                m.get("scatter_coeff", base.scatter_coeff),
                m.get("scatter_exponent", base.scatter_exponent))
        except ConfigError as exc:
            raise ConfigError(exc.message, f"materials[{i}].{exc.where}") from None

    sc = raw["scene"]
    tx_sec = sc["tx"]
    tx_pos = np.array(tx_sec.get("position", corridor.tx_position), dtype=float)
    tx_ant = _antenna(tx_sec.get("antenna"), "scene.tx.antenna",
                      corridor.corner_center - tx_pos)

    spec = None
    if "reflector" in raw:
        r = raw["reflector"]
        names = _DIMS_BY_KIND[r["kind"]]
        missing = [n for n in names if n not in r["dims"]]
        if missing:
            raise ConfigError(f"missing dimension(s) {missing} for {r['kind']}", "reflector.dims")
        dims = tuple(float(r["dims"][n]) for n in names)
        spec = ReflectorSpec(r["kind"], dims, float(r.get("tilt_deg", 45.0)),
                             tuple(r["center"]) if "center" in r else None)

    base = make_corridor(corridor, None, materials)
    refl = spec.build(corridor.corner_center, tx_pos) if spec is not None else None
    scene = Scene(base.surfaces, tx_pos, tx_ant, refl, float(sc["frequency_hz"]),
                  float(tx_sec.get("power_dbm", 0.0)), base.reflector_material)

    g = raw["grid"]
    origin = list(g["origin"])[:2] + [g["height"]]
    try:
        grid = ReceiverGrid(np.array(origin, dtype=float), g["x_extent"], g["y_extent"],
                            g["spacing"], _antenna(g.get("rx_antenna"), "grid.rx_antenna",
                                                   (0.0, -1.0, 0.0)))
    except ConfigError as exc:
        raise ConfigError(exc.message, exc.where or "grid") from None

    t = raw.get("trace", {})
    try:
        options = TraceOptions(t.get("max_order", 2), t.get("tile_size", 0.25), t.get("seed", 0),
                               t.get("diffuse", True), t.get("rx_orientation", "strongest"))
    except ValueError as exc:
        raise ConfigError(str(exc), "trace") from None
    return SimConfig(scene, grid, options, raw)


def read_config(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None


def load_config(path) -> SimConfig:
    return build_config(read_config(path))


def load_scene(path) -> tuple[Scene, ReceiverGrid]:
    """Scene and receiver grid from a JSON config file."""
    cfg = load_config(path)
    return cfg.scene, cfg.grid


__all__ = ["SCHEMA", "SimConfig", "build_config", "default_config", "load_config", "load_scene",
           "parse_variant", "read_config", "reflector_section", "with_reflector"]
