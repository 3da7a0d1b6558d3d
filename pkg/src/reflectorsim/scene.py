"""Scene geometry: materials, rectangular surfaces, reflectors, antennas and the
L-shaped corridor used for the NLOS coverage study.

Coordinates are meters.  The azimuth plane is x-y and z points up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

C0 = 299_792_458.0
INCH = 0.0254


class ConfigError(ValueError):
    """Invalid scene or grid description.

    ``where`` names the offending config field (or ``line N`` for parse errors).
    """

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        self.message = message
        super().__init__(f"{where}: {message}" if where else message)


def vec3(values: Sequence[float]) -> np.ndarray:
    """Validated, read-only float64 3-vector."""
    v = np.array(values, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise ConfigError(f"expected 3 components, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ConfigError("vector components must be finite")
    v.flags.writeable = False
    return v


def unit(values: Sequence[float]) -> np.ndarray:
    v = np.array(values, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ConfigError("direction vector must be nonzero and finite")
    v = v / n
    v.flags.writeable = False
    return v


def rotate_z(v: np.ndarray, angle: float) -> np.ndarray:
    """Rotate ``v`` counter-clockwise about +z by ``angle`` radians."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])


@dataclass(frozen=True)
class Material:
    name: str
    perfect_conductor: bool = False
    rel_permittivity: float = 1.0
    conductivity: float = 0.0
    scatter_coeff: float = 0.0
    scatter_exponent: int = 4

    def __post_init__(self):
        if not 0.0 <= self.scatter_coeff <= 1.0:
            raise ConfigError(f"scatter_coeff {self.scatter_coeff} outside [0, 1]", "scatter_coeff")
        if int(self.scatter_exponent) != self.scatter_exponent or self.scatter_exponent < 1:
            raise ConfigError("scatter_exponent must be an integer >= 1", "scatter_exponent")
        if not self.perfect_conductor:
            if not (self.rel_permittivity >= 1.0 and math.isfinite(self.rel_permittivity)):
                raise ConfigError("rel_permittivity must be >= 1", "eps_r")
            if not (self.conductivity >= 0.0 and math.isfinite(self.conductivity)):
                raise ConfigError("conductivity must be >= 0", "sigma")

    def complex_permittivity(self, frequency: float) -> complex:
        """Relative complex permittivity eps_r - j sigma / (2 pi f eps0)."""
        eps0 = 8.8541878128e-12
        return complex(self.rel_permittivity, -self.conductivity / (2 * math.pi * frequency * eps0))


# Dielectric constants at 28 GHz; scatter coefficients from the measured campaign.
DRYWALL = Material("layered_drywall", False, 2.73, 0.22, 0.3, 4)
CONCRETE = Material("concrete", False, 5.24, 0.46, 0.2, 4)
CEILING_BOARD = Material("ceiling_board", False, 1.48, 0.16, 0.25, 4)
PERFECT_CONDUCTOR = Material("perfect_conductor", True, 1.0, 0.0, 0.1, 4)

DEFAULT_MATERIALS = {m.name: m for m in (DRYWALL, CONCRETE, CEILING_BOARD, PERFECT_CONDUCTOR)}


@dataclass(frozen=True)
class Surface:
    """Rectangle ``origin + a*edge1 + b*edge2`` with a, b in [0, 1].

    The normal is ``edge1 x edge2`` normalised, so edge order fixes the facing.
    """

    name: str
    origin: np.ndarray
    edge1: np.ndarray
    edge2: np.ndarray
    material: Material
    normal: np.ndarray = field(init=False)

    def __post_init__(self):
        o, e1, e2 = vec3(self.origin), vec3(self.edge1), vec3(self.edge2)
        l1, l2 = np.linalg.norm(e1), np.linalg.norm(e2)
        if l1 == 0.0 or l2 == 0.0:
            raise ConfigError(f"surface {self.name!r} has a zero-length edge")
        if abs(float(e1 @ e2)) > 1e-9 * l1 * l2:
            raise ConfigError(f"surface {self.name!r} edges are not orthogonal")
        n = np.cross(e1, e2)
        n = n / np.linalg.norm(n)
        n.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "edge1", e1)
        object.__setattr__(self, "edge2", e2)
        object.__setattr__(self, "normal", n)

    @property
    def width(self) -> float:
        return float(np.linalg.norm(self.edge1))

    @property
    def height(self) -> float:
        return float(np.linalg.norm(self.edge2))

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> np.ndarray:
        return self.origin + 0.5 * (self.edge1 + self.edge2)

    def local_coords(self, p: np.ndarray) -> tuple[float, float, float]:
        """(u, v, signed distance) of ``p`` with u, v in meters along the edges."""
        d = np.asarray(p, dtype=float) - self.origin
        return (
            float(d @ self.edge1) / self.width,
            float(d @ self.edge2) / self.height,
            float(d @ self.normal),
        )

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        u, v, h = self.local_coords(p)
        return (abs(h) <= tol and -tol <= u <= self.width + tol
                and -tol <= v <= self.height + tol)


@dataclass(frozen=True)
class FlatPlate:
    width: float
    height: float
    center: np.ndarray
    normal: np.ndarray

    kind = "flat_plate"

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigError("plate dimensions must be > 0", "reflector.dims")
        object.__setattr__(self, "center", vec3(self.center))
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ConfigError("plate normal must be a unit vector", "reflector")
        object.__setattr__(self, "normal", unit(n))

    @property
    def min_dimension(self) -> float:
        return min(self.width, self.height)

    def as_surface(self, material: Material = PERFECT_CONDUCTOR) -> Surface:
        """The plate as a rectangle; width runs horizontally, height along the
        component of +z orthogonal to the normal."""
        n = self.normal
        up = np.array([0.0, 0.0, 1.0])
        up = up - (up @ n) * n
        if np.linalg.norm(up) < 1e-9:
            up = np.array([1.0, 0.0, 0.0]) - n[0] * n
        up = up / np.linalg.norm(up)
        across = np.cross(up, n)
        e1 = across * self.width
        e2 = up * self.height
        origin = self.center - 0.5 * e1 - 0.5 * e2
        return Surface("reflector", origin, e1, e2, material)


@dataclass(frozen=True)
class Cylinder:
    radius: float
    height: float
    center: np.ndarray
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    kind = "cylinder"

    def __post_init__(self):
        if not (self.radius > 0 and self.height > 0):
            raise ConfigError("cylinder dimensions must be > 0", "reflector.dims")
        object.__setattr__(self, "center", vec3(self.center))
        a = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ConfigError("cylinder axis must be a unit vector", "reflector")
        object.__setattr__(self, "axis", unit(a))

    @property
    def min_dimension(self) -> float:
        return min(self.radius, self.height)


@dataclass(frozen=True)
class Sphere:
    radius: float
    center: np.ndarray

    kind = "sphere"

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("sphere radius must be > 0", "reflector.dims")
        object.__setattr__(self, "center", vec3(self.center))

    @property
    def min_dimension(self) -> float:
        return self.radius


Reflector = Union[FlatPlate, Cylinder, Sphere]


@dataclass(frozen=True)
class AntennaSpec:
    """Vertically polarised directional antenna.

    ``up`` fixes both the polarisation vector and the E-plane (the plane
    containing boresight and ``up``).
    """

    boresight: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    gain_dbi: float = 17.0
    hpbw_e_deg: float = 26.0
    hpbw_h_deg: float = 24.0
    polarization: str = "vertical"
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if not math.isfinite(self.gain_dbi):
            raise ConfigError("antenna gain must be finite", "antenna.gain_dbi")
        for name in ("hpbw_e_deg", "hpbw_h_deg"):
            if not 0.0 < getattr(self, name) < 180.0:
                raise ConfigError("half-power beamwidth must lie in (0, 180) degrees", f"antenna.{name}")
        if self.polarization != "vertical":
            raise ConfigError("only vertical polarization is supported", "antenna.polarization")
        b = unit(self.boresight)
        u = unit(self.up)
        if abs(float(b @ u)) > 1.0 - 1e-9:
            raise ConfigError("boresight must not be parallel to the vertical", "antenna.boresight")
        object.__setattr__(self, "boresight", b)
        object.__setattr__(self, "up", u)

    def pointed(self, boresight: Sequence[float]) -> "AntennaSpec":
        return AntennaSpec(np.asarray(boresight, dtype=float), self.gain_dbi, self.hpbw_e_deg,
                           self.hpbw_h_deg, self.polarization, self.up)


@dataclass(frozen=True)
class Scene:
    surfaces: tuple[Surface, ...]
    tx_position: np.ndarray
    tx_antenna: AntennaSpec = field(default_factory=AntennaSpec)
    reflector: Optional[Reflector] = None
    frequency: float = 28e9
    tx_power_dbm: float = 0.0
    reflector_material: Material = PERFECT_CONDUCTOR

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        object.__setattr__(self, "tx_position", vec3(self.tx_position))
        if not (self.frequency > 0 and math.isfinite(self.frequency)):
            raise ConfigError("frequency must be > 0", "scene.frequency_hz")
        if not math.isfinite(self.tx_power_dbm):
            raise ConfigError("tx power must be finite", "scene.tx.power_dbm")
        if not self.surfaces:
            raise ConfigError("scene needs at least one surface", "corridor")
        names = [s.name for s in self.surfaces]
        if len(set(names)) != len(names) or "reflector" in names:
            raise ConfigError("surface names must be unique and not 'reflector'", "corridor")
        for s in self.surfaces:
            if s.contains(self.tx_position, tol=1e-9):
                raise ConfigError(f"transmitter lies on surface {s.name!r}", "scene.tx.position")
        if self.reflector is not None and inside_reflector(self.reflector, self.tx_position):
            raise ConfigError("transmitter lies inside the reflector", "scene.tx.position")

    @property
    def wavelength(self) -> float:
        return C0 / self.frequency

    def with_reflector(self, reflector: Optional[Reflector]) -> "Scene":
        return Scene(self.surfaces, self.tx_position, self.tx_antenna, reflector,
                     self.frequency, self.tx_power_dbm, self.reflector_material)


def inside_reflector(reflector: Reflector, p: np.ndarray) -> bool:
    p = np.asarray(p, dtype=float)
    if isinstance(reflector, Sphere):
        return bool(np.linalg.norm(p - reflector.center) <= reflector.radius)
    if isinstance(reflector, Cylinder):
        d = p - reflector.center
        along = float(d @ reflector.axis)
        radial = np.linalg.norm(d - along * reflector.axis)
        return bool(abs(along) <= reflector.height / 2 and radial <= reflector.radius)
    return reflector.as_surface().contains(p, tol=1e-9)


@dataclass(frozen=True)
class ReceiverGrid:
    origin: np.ndarray
    x_extent: float
    y_extent: float
    spacing: float
    rx_antenna: AntennaSpec = field(default_factory=AntennaSpec)

    def __post_init__(self):
        object.__setattr__(self, "origin", vec3(self.origin))
        if not (self.x_extent > 0 and self.y_extent > 0):
            raise ConfigError("grid extents must be > 0", "grid")
        if not self.spacing > 0:
            raise ConfigError("grid spacing must be > 0", "grid.spacing")

    @property
    def rx_height(self) -> float:
        return float(self.origin[2])

    @property
    def nx(self) -> int:
        return math.ceil(self.x_extent / self.spacing + 1 - 1e-9)

    @property
    def ny(self) -> int:
        return math.ceil(self.y_extent / self.spacing + 1 - 1e-9)

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def points(self) -> np.ndarray:
        """(ny, nx, 3) receiver positions; row index follows y."""
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.stack([X, Y, np.full_like(X, self.rx_height)], axis=-1)


def mirror_point(p: Sequence[float], surface: Surface) -> np.ndarray:
    """Reflect ``p`` across the infinite plane of ``surface``."""
    p = np.asarray(p, dtype=float)
    n = surface.normal
    return p - 2.0 * float((p - surface.origin) @ n) * n


def orient_flat_reflector(incident_dir: Sequence[float], steer_angle: float) -> np.ndarray:
    """Unit normal for a plate that turns an azimuthal beam by ``2 * steer_angle``.

    At zero tilt the plate faces the incoming beam and sends it straight back;
    tilting the normal counter-clockwise by ``steer_angle`` rotates the reflected
    beam counter-clockwise by twice that angle.
    """
    d = np.asarray(incident_dir, dtype=float)
    if abs(d[2]) > 1e-9 or abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("incident direction must be a horizontal unit vector")
    if not 0.0 <= steer_angle < math.pi / 2:
        raise ValueError(f"invalid reflector orientation: tilt {steer_angle} rad not in [0, pi/2)")
    n = rotate_z(-d, steer_angle)
    return n / np.linalg.norm(n)


def reflect_direction(d: np.ndarray, normal: np.ndarray) -> np.ndarray:
    return d - 2.0 * float(d @ normal) * normal


@dataclass(frozen=True)
class CorridorParams:
    """L-shaped corridor.

    The main (transmitter) corridor runs along +x over ``[0, main_length]`` with
    width ``main_width`` in y.  The receiver corridor branches off along +y at
    its x=0 end, spanning x in ``[0, perp_width]``.  The reflector sits at the
    centre of the square where the two meet; the transmitter is
    ``tx_distance`` meters down the main corridor from it, aimed at it.
    """

    main_width: float = 2.0
    main_length: float = 8.0
    perp_width: float = 2.0
    perp_length: float = 18.0
    height: float = 2.7
    tx_distance: float = 5.0
    tx_height: float = 1.5
    door_offset: float = 8.0
    door_width: float = 0.9
    door_height: float = 2.1

    def __post_init__(self):
        for name in ("main_width", "main_length", "perp_width", "perp_length", "height",
                     "tx_distance", "tx_height", "door_width", "door_height"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0", f"corridor.{name}")
        if self.main_length <= self.perp_width:
            raise ConfigError("main corridor must be longer than the receiver corridor width",
                              "corridor.main_length")
        if self.perp_width / 2 + self.tx_distance >= self.main_length:
            raise ConfigError("transmitter falls outside the main corridor", "corridor.tx_distance")
        if self.tx_height >= self.height:
            raise ConfigError("transmitter above the ceiling", "corridor.tx_height")
        if self.door_height >= self.height:
            raise ConfigError("door taller than the corridor", "corridor.door_height")
        if self.door_offset < 0 or self.door_offset + self.door_width > self.perp_length:
            raise ConfigError("door does not fit in the receiver corridor wall", "corridor.door_offset")

    @property
    def corner_center(self) -> np.ndarray:
        return np.array([self.perp_width / 2, self.main_width / 2, self.tx_height])

    @property
    def tx_position(self) -> np.ndarray:
        return self.corner_center + np.array([self.tx_distance, 0.0, 0.0])


@dataclass(frozen=True)
class ReflectorSpec:
    """Reflector shape placed by the corridor builder.

    ``dims``: (w, h) for ``flat_plate``, (r, h) for ``cylinder``, (r,) for
    ``sphere``; meters.  ``center`` defaults to the corridor corner.
    """

    kind: str
    dims: tuple[float, ...]
    tilt_deg: float = 45.0
    center: Optional[tuple[float, float, float]] = None

    def build(self, default_center: np.ndarray, tx_position: np.ndarray) -> Reflector:
        center = np.asarray(self.center if self.center is not None else default_center, dtype=float)
        if self.kind == "flat_plate":
            if len(self.dims) != 2:
                raise ConfigError("flat_plate needs dims (w, h)", "reflector.dims")
            incident = center - np.asarray(tx_position, dtype=float)
            incident[2] = 0.0
            tilt = math.radians(self.tilt_deg)
            try:
                n = orient_flat_reflector(incident / np.linalg.norm(incident), tilt)
            except ValueError as exc:
                raise ConfigError(str(exc), "reflector.tilt_deg") from None
            return FlatPlate(self.dims[0], self.dims[1], center, n)
        if self.kind == "cylinder":
            if len(self.dims) != 2:
                raise ConfigError("cylinder needs dims (r, h)", "reflector.dims")
            return Cylinder(self.dims[0], self.dims[1], center)
        if self.kind == "sphere":
            if len(self.dims) != 1:
                raise ConfigError("sphere needs dims (r,)", "reflector.dims")
            return Sphere(self.dims[0], center)
        raise ConfigError(f"unknown reflector kind {self.kind!r}", "reflector.kind")


# Reflector sizes used in the measurement campaign.
REFLECTOR_PRESETS = {
    "plate12": ReflectorSpec("flat_plate", (12 * INCH, 12 * INCH)),
    "plate24": ReflectorSpec("flat_plate", (24 * INCH, 24 * INCH)),
    "plate33": ReflectorSpec("flat_plate", (33 * INCH, 33 * INCH)),
    "sphere": ReflectorSpec("sphere", (13 * INCH,)),
    "cylinder": ReflectorSpec("cylinder", (4.5 * INCH, 18 * INCH)),
}


def _box_face(name, origin, e1, e2, material, inward):
    e1, e2 = np.asarray(e1, float), np.asarray(e2, float)
    if np.cross(e1, e2) @ np.asarray(inward, float) < 0:
        e1, e2 = e2, e1
    return Surface(name, np.asarray(origin, float), e1, e2, material)


def corridor_surfaces(p: CorridorParams, materials: Optional[dict] = None) -> list[Surface]:
    """Walls, floor, ceiling and door of the L-shaped corridor, normals inward."""
    m = dict(DEFAULT_MATERIALS)
    if materials:
        m.update(materials)
    wall, floor, ceil, door = (m["layered_drywall"], m["concrete"], m["ceiling_board"],
                               m["perfect_conductor"])
    H, Wm, Lm, Wp, Lp = p.height, p.main_width, p.main_length, p.perp_width, p.perp_length
    Z = np.array([0.0, 0.0, H])
    ytop = Wm + Lp
    d0, d1 = Wm + p.door_offset, Wm + p.door_offset + p.door_width
    dz = np.array([0.0, 0.0, p.door_height])
    S = []
    # Main corridor: south wall (y=0, faces +y), far end (x=Lm, faces -x),
    # north wall (y=Wm, faces -y) east of the branch.
    S.append(_box_face("wall_main_south", (0, 0, 0), (Lm, 0, 0), Z, wall, (0, 1, 0)))
    S.append(_box_face("wall_main_end", (Lm, 0, 0), (0, Wm, 0), Z, wall, (-1, 0, 0)))
    S.append(_box_face("wall_main_north", (Lm, Wm, 0), (Wp - Lm, 0, 0), Z, wall, (0, -1, 0)))
    # West wall x=0 spans both corridors (faces +x).
    S.append(_box_face("wall_west", (0, ytop, 0), (0, -ytop, 0), Z, wall, (1, 0, 0)))
    # Receiver corridor east wall x=Wp (faces -x), split around the door.
    S.append(_box_face("wall_perp_east_a", (Wp, Wm, 0), (0, d0 - Wm, 0), Z, wall, (-1, 0, 0))
             if p.door_offset > 0 else None)
    S.append(_box_face("wall_perp_east_b", (Wp, d1, 0), (0, ytop - d1, 0), Z, wall, (-1, 0, 0))
             if d1 < ytop else None)
    S.append(_box_face("wall_perp_east_lintel", (Wp, d0, p.door_height), (0, d1 - d0, 0),
                       (0, 0, H - p.door_height), wall, (-1, 0, 0)))
    S.append(_box_face("door", (Wp, d0, 0), (0, d1 - d0, 0), dz, door, (-1, 0, 0)))
    # Receiver corridor end wall y=ytop (faces -y).
    S.append(_box_face("wall_perp_end", (0, ytop, 0), (Wp, 0, 0), Z, wall, (0, -1, 0)))
    # Floors (face +z) and ceilings (face -z), one rectangle per corridor leg.
    S.append(_box_face("floor_main", (0, 0, 0), (Lm, 0, 0), (0, Wm, 0), floor, (0, 0, 1)))
    S.append(_box_face("floor_perp", (0, Wm, 0), (Wp, 0, 0), (0, Lp, 0), floor, (0, 0, 1)))
    S.append(_box_face("ceiling_main", (0, 0, H), (0, Wm, 0), (Lm, 0, 0), ceil, (0, 0, -1)))
    S.append(_box_face("ceiling_perp", (0, Wm, H), (0, Lp, 0), (Wp, 0, 0), ceil, (0, 0, -1)))
    return [s for s in S if s is not None]


def inside_corridor(p: CorridorParams, point: Sequence[float]) -> bool:
    x, y, z = point
    if not 0 < z < p.height:
        return False
    in_main = 0 < x < p.main_length and 0 < y < p.main_width
    in_perp = 0 < x < p.perp_width and p.main_width <= y < p.main_width + p.perp_length
    return in_main or in_perp


def make_corridor(params: CorridorParams = CorridorParams(),
                  reflector: Optional[ReflectorSpec] = None,
                  materials: Optional[dict] = None,
                  tx_antenna: Optional[AntennaSpec] = None,
                  frequency: float = 28e9,
                  tx_power_dbm: float = 0.0) -> Scene:
    """Build the corridor scene, optionally with a reflector at the corner."""
    surfaces = corridor_surfaces(params, materials)
    tx = params.tx_position
    refl = reflector.build(params.corner_center, tx) if reflector is not None else None
    if tx_antenna is None:
        tx_antenna = AntennaSpec(boresight=params.corner_center - tx)
    refl_material = (materials or {}).get("perfect_conductor", PERFECT_CONDUCTOR)
    return Scene(tuple(surfaces), tx, tx_antenna, refl, frequency, tx_power_dbm, refl_material)


def default_grid(params: CorridorParams = CorridorParams(), spacing: float = 0.25,
                 rx_antenna: Optional[AntennaSpec] = None) -> ReceiverGrid:
    """1.5 m x 15 m grid centred across the receiver corridor, starting 0.5 m
    past the corridor mouth."""
    x0 = (params.perp_width - 1.5) / 2
    origin = (x0, params.main_width + 0.5, params.tx_height)
    return ReceiverGrid(np.array(origin), 1.5, 15.0, spacing,
                        rx_antenna or AntennaSpec(boresight=(0.0, -1.0, 0.0)))
