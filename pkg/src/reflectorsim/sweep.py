"""Grid coverage sweeps and the statistics used to compare reflector setups."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .link import SENTINEL_DBM, coherent_sum, power_dbm
from .scene import AntennaSpec, ReceiverGrid, Scene
from .tracer import DEFAULT_MAX_ORDER, DEFAULT_TILE_SIZE, Tracer, received_amplitudes

WORKERS_ENV = "REFLECTORSIM_WORKERS"
HEATMAP_RANGE_DBM = (-120.0, -40.0)


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TraceOptions:
    max_order: int = DEFAULT_MAX_ORDER
    tile_size: float = DEFAULT_TILE_SIZE
    seed: int = 0
    diffuse: bool = True
    # "strongest": aim each receiver back along its strongest arrival;
    # "fixed": use the grid antenna's boresight everywhere.
    rx_orientation: str = "strongest"

    def __post_init__(self):
        if self.max_order < 0:
            raise ValueError("max_order must be >= 0")
        if not self.tile_size > 0:
            raise ValueError("tile_size must be > 0")
        if self.rx_orientation not in ("strongest", "fixed"):
            raise ValueError("rx_orientation must be 'strongest' or 'fixed'")


@dataclass
class CoverageMap:
    xs: np.ndarray
    ys: np.ndarray
    power: np.ndarray            # (ny, nx) dBm, SENTINEL_DBM where nothing arrives
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.power.shape != (len(self.ys), len(self.xs)):
            raise ValueError("power array does not match grid dimensions")

    @property
    def values(self) -> np.ndarray:
        return self.power.ravel()

    @property
    def sentinel_count(self) -> int:
        return int(np.sum(self.power <= SENTINEL_DBM))

    def same_grid(self, other: "CoverageMap") -> bool:
        return (self.xs.shape == other.xs.shape and self.ys.shape == other.ys.shape
                and np.allclose(self.xs, other.xs, atol=1e-9, rtol=0)
                and np.allclose(self.ys, other.ys, atol=1e-9, rtol=0))

    def crop(self, max_distance: float) -> "CoverageMap":
        """Rows within ``max_distance`` meters of the first grid row."""
        rows = self.ys - self.ys[0] <= max_distance + 1e-9
        return CoverageMap(self.xs, self.ys[rows], self.power[rows], dict(self.metadata))

    def median(self) -> float:
        return float(np.median(self.values))


@dataclass(frozen=True)
class Cdf:
    values: np.ndarray
    probs: np.ndarray

    def quantile(self, q: float) -> float:
        i = int(np.searchsorted(self.probs, q - 1e-12))
        return float(self.values[min(i, len(self.values) - 1)])


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def point_power(tracer: Tracer, rx, rx_antenna: AntennaSpec, options: TraceOptions,
                tx_power_dbm: float) -> tuple[float, int]:
    """(received dBm, path count) at one receiver point."""
    paths = tracer.all_paths(rx, diffuse=options.diffuse)
    if not len(paths):
        return -math.inf, 0
    paths = paths.take(paths.order())
    antenna = rx_antenna
    if options.rx_orientation == "strongest":
        iso = received_amplitudes(paths, None, rx_antenna.up)
        strongest = int(np.argmax(np.abs(iso)))
        antenna = rx_antenna.pointed(-paths.arr[strongest])
    amps = received_amplitudes(paths, antenna)
    total = coherent_sum(amps, paths.length, paths.keys)
    return power_dbm(total, tx_power_dbm), len(paths)


def _sweep_rows(scene: Scene, grid: ReceiverGrid, options: TraceOptions, rows: list[int]):
    tracer = Tracer(scene, max_order=options.max_order, tile_size=options.tile_size,
                    seed=options.seed)
    pts = grid.points()
    out = []
    for r in rows:
        vals = [point_power(tracer, pts[r, c], grid.rx_antenna, options, scene.tx_power_dbm)
                for c in range(pts.shape[1])]
        out.append((r, [v[0] for v in vals], [v[1] for v in vals]))
    return out


def run_grid(scene: Scene, grid: ReceiverGrid, options: TraceOptions = TraceOptions(),
             workers: Optional[int] = None) -> CoverageMap:
    """Received power at every grid point.

    Rows are farmed out to worker processes; results are placed by index, so
    the map does not depend on the worker count.
    """
    workers = resolve_workers(workers)
    ny, nx = grid.ny, grid.nx
    power = np.empty((ny, nx))
    counts = np.zeros((ny, nx), dtype=int)
    rows = list(range(ny))
    if workers == 1 or ny == 1:
        results = _sweep_rows(scene, grid, options, rows)
    else:
        chunks = [rows[i::workers] for i in range(workers) if rows[i::workers]]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [pool.submit(_sweep_rows, scene, grid, options, ch) for ch in chunks]
            results = [item for f in futures for item in f.result()]
    for r, vals, n in results:
        power[r] = vals
        counts[r] = n
    power = np.where(np.isfinite(power), np.maximum(power, SENTINEL_DBM), SENTINEL_DBM)
    refl = scene.reflector
    meta = {
        "reflector_kind": refl.kind if refl is not None else "none",
        "max_order": options.max_order,
        "tile_size": options.tile_size,
        "seed": options.seed,
        "diffuse": options.diffuse,
        "rx_orientation": options.rx_orientation,
        "sentinel_count": int(np.sum(power <= SENTINEL_DBM)),
        "mean_path_count": float(counts.mean()),
    }
    return CoverageMap(grid.xs, grid.ys, power, meta)


# -- statistics --------------------------------------------------------------

def cdf(cmap: CoverageMap) -> Cdf:
    """Empirical CDF over all grid points, sentinels included."""
    v = cmap.values
    if v.size == 0:
        raise ValueError("empty coverage map")
    vals, counts = np.unique(v, return_counts=True)
    probs = np.cumsum(counts) / v.size
    probs[-1] = 1.0
    return Cdf(vals, probs)


def median_gain(map_a: CoverageMap, map_b: CoverageMap) -> float:
    """median(map_a) - median(map_b) in dB."""
    if not map_a.same_grid(map_b):
        raise GridMismatchError("coverage maps are on different grids")
    return map_a.median() - map_b.median()


def decile_gains(map_a: CoverageMap, map_b: CoverageMap) -> list[float]:
    if not map_a.same_grid(map_b):
        raise GridMismatchError("coverage maps are on different grids")
    q = np.arange(1, 10) / 10
    return list(np.quantile(map_a.values, q) - np.quantile(map_b.values, q))


def uniformity(cmap: CoverageMap) -> float:
    """Population standard deviation (dB) of the non-sentinel grid powers."""
    v = cmap.values
    v = v[v > SENTINEL_DBM]
    if v.size == 0:
        raise ValueError("coverage map has no finite entries")
    return float(np.std(v))


@dataclass(frozen=True)
class LobeStats:
    centroid_deg: float      # azimuth of the mean cell direction, deg CCW from +x
    components: int          # connected components among the selected cells
    cells: int
    mask: np.ndarray = field(repr=False)


def top_cells_lobe(cmap: CoverageMap, origin_xy, top_fraction: float = 0.1,
                   connectivity: int = 8) -> LobeStats:
    """Shape of the strongest ``top_fraction`` of grid cells as seen from ``origin_xy``.

    ``connectivity`` is 4 (edge neighbours) or 8 (edges and corners).
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    thresh = np.quantile(cmap.power, 1.0 - top_fraction)
    mask = cmap.power >= thresh
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    _, ncomp = ndimage.label(mask, structure=structure)
    X, Y = np.meshgrid(cmap.xs, cmap.ys)
    d = np.stack([X[mask] - origin_xy[0], Y[mask] - origin_xy[1]], axis=1)
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    m = d.mean(axis=0)
    return LobeStats(math.degrees(math.atan2(m[1], m[0])), int(ncomp), int(mask.sum()), mask)


# -- files -------------------------------------------------------------------

def atomic_write(path: Path, data: bytes):
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def coverage_csv_bytes(cmap: CoverageMap) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x_m", "y_m", "power_dbm"])
    for j, y in enumerate(cmap.ys):
        for i, x in enumerate(cmap.xs):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(cmap.power[j, i]))])
    return buf.getvalue().encode()


def cdf_csv_bytes(c: Cdf) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["power_dbm", "prob"])
    for v, p in zip(c.values, c.probs):
        w.writerow([repr(float(v)), repr(float(p))])
    return buf.getvalue().encode()


def write_coverage_csv(cmap: CoverageMap, path):
    atomic_write(Path(path), coverage_csv_bytes(cmap))


def read_coverage_csv(path) -> CoverageMap:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["x_m", "y_m", "power_dbm"]:
            raise ValueError(f"{path}: expected header x_m,y_m,power_dbm")
        rows = [(float(a), float(b), float(c)) for a, b, c in reader]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows)
    xs = np.unique(arr[:, 0])
    ys = np.unique(arr[:, 1])
    if len(xs) * len(ys) != len(arr):
        raise ValueError(f"{path}: points do not form a full grid")
    power = np.empty((len(ys), len(xs)))
    ix = np.searchsorted(xs, arr[:, 0])
    iy = np.searchsorted(ys, arr[:, 1])
    power[iy, ix] = arr[:, 2]
    return CoverageMap(xs, ys, power)


def write_cdf_csv(c: Cdf, path):
    atomic_write(Path(path), cdf_csv_bytes(c))


def read_cdf_csv(path) -> Cdf:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        rows = [(float(a), float(b)) for a, b in reader]
    arr = np.array(rows).reshape(-1, 2)
    return Cdf(arr[:, 0], arr[:, 1])


def heatmap_pgm_bytes(cmap: CoverageMap, db_range=HEATMAP_RANGE_DBM) -> tuple[bytes, int]:
    """Binary 8-bit PGM, dB range mapped linearly onto 0-255.

    The top image row is the grid row farthest along y.  Returns the bytes and
    the number of clipped cells.
    """
    lo, hi = db_range
    p = cmap.power[::-1]
    clipped = int(np.sum((p < lo) | (p > hi)))
    scaled = np.clip((p - lo) / (hi - lo), 0.0, 1.0)
    img = np.round(scaled * 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    return header + img.tobytes(), clipped


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def metadata_bytes(meta: dict) -> bytes:
    return (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode()
