"""Path enumeration between a transmitter and a receiver point.

Specular paths come from the image method over every reflection sequence up to
``max_order``; diffuse paths are single-bounce TX -> tile -> RX contributions;
curved reflectors contribute one path through their geometric specular point
with an RCS-derived amplitude.  A flat-plate reflector is treated as an extra
perfectly conducting rectangle, so it takes part in higher-order sequences and
carries diffuse tiles like any wall.

Geometry ids: ``0 .. len(scene.surfaces)-1`` are the scene surfaces, and
``len(scene.surfaces)`` is the reflector (plate rectangle or curved volume).
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import em
from .scene import (C0, AntennaSpec, Cylinder, FlatPlate, Reflector, Scene, Sphere, Surface)

# Segments ending within this distance of a hit, and hits within this distance
# of a rectangle boundary, do not count as occluding.
EDGE_TOL = 1e-9

KIND_SPECULAR, KIND_DIFFUSE, KIND_REFLECTOR = 0, 1, 2
_KIND_NAMES = {KIND_SPECULAR: "specular", KIND_DIFFUSE: "diffuse", KIND_REFLECTOR: "reflector"}

DEFAULT_MAX_ORDER = 2
DEFAULT_TILE_SIZE = 0.25

_UNBUILT = object()


@dataclass(frozen=True)
class Interaction:
    kind: str                    # "specular", "diffuse" or "reflector"
    geometry: str                # surface name, or "reflector"
    geometry_id: int
    point: np.ndarray
    incidence_angle: float
    tile: Optional[int] = None
    reflector_kind: Optional[str] = None

    def key(self) -> tuple[int, int, int]:
        code = {"specular": KIND_SPECULAR, "diffuse": KIND_DIFFUSE, "reflector": KIND_REFLECTOR}
        return (code[self.kind], self.geometry_id, -1 if self.tile is None else self.tile)


@dataclass(frozen=True)
class PropagationPath:
    interactions: tuple[Interaction, ...]
    total_length: float
    amplitude: complex
    departure_dir: np.ndarray
    arrival_dir: np.ndarray
    # Complex E-field vector at the receiver before the receive antenna.
    field: np.ndarray = field(repr=False, default=None)

    @property
    def delay(self) -> float:
        return self.total_length / C0

    @property
    def order(self) -> int:
        return len(self.interactions)

    def key(self) -> tuple:
        return tuple(v for i in self.interactions for v in i.key())

    def points(self, tx, rx) -> list[np.ndarray]:
        return [np.asarray(tx, float)] + [i.point for i in self.interactions] + [np.asarray(rx, float)]


@dataclass(frozen=True)
class Tile:
    surface: str
    surface_id: int
    index: int
    origin: np.ndarray
    edge1: np.ndarray
    edge2: np.ndarray

    @property
    def area(self) -> float:
        return float(np.linalg.norm(self.edge1) * np.linalg.norm(self.edge2))

    @property
    def center(self) -> np.ndarray:
        return self.origin + 0.5 * (self.edge1 + self.edge2)


def generate_tiles(surface: Surface, tile_size: float, surface_id: int = 0) -> list[Tile]:
    """Partition ``surface`` into a row-major grid of tiles at most ``tile_size`` on a side.

    The last tile along each edge absorbs the remainder, so tiles cover the
    surface exactly.
    """
    if not tile_size > 0:
        raise ValueError("tile_size must be > 0")
    w, h = surface.width, surface.height
    u1, u2 = surface.edge1 / w, surface.edge2 / h

    def cuts(length):
        n = max(1, math.ceil(length / tile_size - 1e-9))
        edges = [min(i * tile_size, length) for i in range(n)] + [length]
        return edges

    cu, cv = cuts(w), cuts(h)
    tiles = []
    for j in range(len(cv) - 1):
        for i in range(len(cu) - 1):
            origin = surface.origin + cu[i] * u1 + cv[j] * u2
            tiles.append(Tile(surface.name, surface_id, len(tiles), origin,
                              (cu[i + 1] - cu[i]) * u1, (cv[j + 1] - cv[j]) * u2))
    return tiles


def tile_phases(seed: int, surface_id: int, count: int) -> np.ndarray:
    """Per-tile random phases; a pure function of (seed, surface id)."""
    return np.random.default_rng([int(seed), int(surface_id)]).uniform(0.0, 2 * np.pi, count)


def _normalize_rows(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.linalg.norm(v, axis=-1)
    return v / np.where(n > 0, n, 1.0)[..., None], n


def vertical_pol(direction: np.ndarray, up: np.ndarray) -> np.ndarray:
    """Unit polarisation vectors: ``up`` projected orthogonal to each direction."""
    d = np.atleast_2d(direction)
    p = up[None, :] - (d @ up)[:, None] * d
    p, n = _normalize_rows(p)
    p[n < 1e-12] = 0.0
    return p


@dataclass
class PathArrays:
    """Columnar path storage used on the hot path of grid sweeps."""

    length: np.ndarray           # (P,)
    field: np.ndarray            # (P, 3) complex
    dep: np.ndarray              # (P, 3)
    arr: np.ndarray              # (P, 3)
    keys: np.ndarray             # (P, 3 * kmax) int, -1 padded
    points: np.ndarray           # (P, kmax, 3), nan padded
    angles: np.ndarray           # (P, kmax), nan padded

    @classmethod
    def empty(cls, kmax: int) -> "PathArrays":
        return cls(np.zeros(0), np.zeros((0, 3), complex), np.zeros((0, 3)), np.zeros((0, 3)),
                   np.zeros((0, 3 * kmax), int), np.zeros((0, kmax, 3)), np.zeros((0, kmax)))

    @classmethod
    def concat(cls, parts: Sequence["PathArrays"], kmax: int) -> "PathArrays":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(kmax)
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("length", "field", "dep", "arr", "keys", "points", "angles")))

    def __len__(self) -> int:
        return len(self.length)

    def take(self, idx) -> "PathArrays":
        return PathArrays(self.length[idx], self.field[idx], self.dep[idx], self.arr[idx],
                          self.keys[idx], self.points[idx], self.angles[idx])

    def order(self) -> np.ndarray:
        """Canonical summation order: by length, then interaction ids."""
        cols = [self.keys[:, c] for c in range(self.keys.shape[1] - 1, -1, -1)]
        return np.lexsort(cols + [self.length])


def rx_factor(arr: np.ndarray, rx_antenna: Optional[AntennaSpec], up: np.ndarray) -> np.ndarray:
    """Receive weights: sqrt(gain) times the co-polar unit vector, per path.

    ``rx_antenna=None`` means an isotropic unit-gain co-polar receiver.
    """
    pol = vertical_pol(arr, rx_antenna.up if rx_antenna is not None else up)
    if rx_antenna is None:
        g = np.ones(len(arr))
    else:
        g = np.atleast_1d(em.antenna_gain(rx_antenna, -arr))
    return np.sqrt(g)[:, None] * pol


def received_amplitudes(paths: PathArrays, rx_antenna: Optional[AntennaSpec],
                        up=np.array([0.0, 0.0, 1.0])) -> np.ndarray:
    if not len(paths):
        return np.zeros(0, complex)
    w = rx_factor(paths.arr, rx_antenna, up)
    return np.einsum("ij,ij->i", paths.field, w)


class Tracer:
    """Precomputed tracing state for one scene and transmitter position."""

    def __init__(self, scene: Scene, tx=None, max_order: int = DEFAULT_MAX_ORDER,
                 tile_size: float = DEFAULT_TILE_SIZE, seed: int = 0):
        if max_order < 0:
            raise ValueError("max_order must be >= 0")
        self.scene = scene
        self.tx = np.asarray(scene.tx_position if tx is None else tx, dtype=float)
        self.max_order = int(max_order)
        self.kmax = max(1, self.max_order)
        self.tile_size = float(tile_size)
        self.seed = int(seed)
        self.wavelength = scene.wavelength
        self.k = 2 * np.pi / self.wavelength
        self.up = scene.tx_antenna.up

        surfaces = list(scene.surfaces)
        self.n_scene = len(surfaces)
        self.reflector = scene.reflector
        self.plate_id = None
        if isinstance(self.reflector, FlatPlate):
            surfaces.append(self.reflector.as_surface(scene.reflector_material))
            self.plate_id = self.n_scene
        self.surfaces = surfaces
        self.names = [s.name for s in surfaces]
        self.reflector_id = self.n_scene
        self.curved = self.reflector if isinstance(self.reflector, (Sphere, Cylinder)) else None

        self.O = np.array([s.origin for s in surfaces])
        self.N = np.array([s.normal for s in surfaces])
        self.L1 = np.array([s.width for s in surfaces])
        self.L2 = np.array([s.height for s in surfaces])
        self.U1 = np.array([s.edge1 for s in surfaces]) / self.L1[:, None]
        self.U2 = np.array([s.edge2 for s in surfaces]) / self.L2[:, None]
        self.Dp = np.einsum("ij,ij->i", self.N, self.O)
        self.pec = np.array([s.material.perfect_conductor for s in surfaces])
        self.eps = np.array([1.0 if s.material.perfect_conductor
                             else s.material.complex_permittivity(scene.frequency)
                             for s in surfaces], dtype=complex)
        self._build_images()
        self._tiles = _UNBUILT

        if self.reflector is not None:
            small = self.reflector.min_dimension < em.OPTICAL_REGIME_WAVELENGTHS * self.wavelength
            if small:
                warnings.warn(f"{self.reflector.kind} smaller than "
                              f"{em.OPTICAL_REGIME_WAVELENGTHS:g} wavelengths; "
                              "reflector model outside its optical regime",
                              em.OpticalRegimeWarning, stacklevel=2)

    # -- geometry -------------------------------------------------------

    def _build_images(self):
        M = len(self.surfaces)
        self.seqs, self.images = {}, {}
        for k in range(1, self.max_order + 1):
            seqs = [s for s in itertools.product(range(M), repeat=k)
                    if all(s[i] != s[i + 1] for i in range(k - 1))]
            seqs = np.array(seqs, dtype=int).reshape(-1, k)
            imgs = np.empty((len(seqs), k, 3))
            cur = np.broadcast_to(self.tx, (len(seqs), 3)).copy()
            for j in range(k):
                sid = seqs[:, j]
                h = np.einsum("ij,ij->i", cur, self.N[sid]) - self.Dp[sid]
                cur = cur - 2 * h[:, None] * self.N[sid]
                imgs[:, j] = cur
            self.seqs[k], self.images[k] = seqs, imgs

    def occluded_mask(self, A: np.ndarray, B: np.ndarray, ignore: np.ndarray) -> np.ndarray:
        """Open segments A->B blocked by any geometry not listed in ``ignore``.

        ``ignore`` is (S, m) of geometry ids, -1 for unused slots.
        """
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        S = len(A)
        if S == 0:
            return np.zeros(0, bool)
        D = B - A
        seglen = np.linalg.norm(D, axis=1)
        denom = D @ self.N.T
        num = self.Dp[None, :] - A @ self.N.T
        rel_u = A @ self.U1.T - np.einsum("ij,ij->i", self.O, self.U1)[None, :]
        rel_v = A @ self.U2.T - np.einsum("ij,ij->i", self.O, self.U2)[None, :]
        # Segments parallel to a plane give inf/nan here; the comparisons below
        # are False for nan, so those planes never register a hit.
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
            along = t * seglen[:, None]
            u = rel_u + t * (D @ self.U1.T)
            v = rel_v + t * (D @ self.U2.T)
        hit = (np.abs(denom) > 1e-300) & (along > EDGE_TOL) & (seglen[:, None] - along > EDGE_TOL)
        hit &= (u > EDGE_TOL) & (u < self.L1[None, :] - EDGE_TOL)
        hit &= (v > EDGE_TOL) & (v < self.L2[None, :] - EDGE_TOL)
        ids = np.arange(len(self.surfaces))
        for col in range(ignore.shape[1]):
            hit &= ids[None, :] != ignore[:, col:col + 1]
        blocked = hit.any(axis=1)
        if self.curved is not None:
            vol = _segment_hits_volume(self.curved, A, B)
            vol &= ~(ignore == self.reflector_id).any(axis=1)
            blocked |= vol
        return blocked

    # -- specular -------------------------------------------------------

    def _fresnel_rows(self, cos_i, sid):
        g_te, g_tm = em._fresnel_coeffs(cos_i, self.eps[sid])
        pec = self.pec[sid]
        g_te = np.where(pec, -1.0 + 0j, g_te)
        g_tm = np.where(pec, 1.0 + 0j, g_tm)
        return g_te, g_tm

    def _tx_field(self, dep: np.ndarray) -> np.ndarray:
        g = np.atleast_1d(em.antenna_gain(self.scene.tx_antenna, dep))
        return np.sqrt(g)[:, None] * vertical_pol(dep, self.up).astype(complex)

    def _blank(self, P):
        keys = np.full((P, 3 * self.kmax), -1, dtype=int)
        pts = np.full((P, self.kmax, 3), np.nan)
        ang = np.full((P, self.kmax), np.nan)
        return keys, pts, ang

    def direct(self, rx) -> PathArrays:
        rx = np.asarray(rx, float)
        if self.occluded_mask(self.tx[None], rx[None], np.full((1, 1), -1))[0]:
            return PathArrays.empty(self.kmax)
        d = rx - self.tx
        L = np.linalg.norm(d)
        dep = (d / L)[None]
        fld = self._tx_field(dep) * em.spreading_and_phase(L, self.wavelength)
        keys, pts, ang = self._blank(1)
        return PathArrays(np.array([L]), fld, dep, dep.copy(), keys, pts, ang)

    def specular_order(self, rx, k: int, only: Optional[int] = None) -> PathArrays:
        """Image-method paths with exactly ``k`` reflections."""
        rx = np.asarray(rx, float)
        seqs, imgs = self.seqs[k], self.images[k]
        if only is not None:
            sel = np.all(seqs == only, axis=1) if k == 1 else np.zeros(len(seqs), bool)
            seqs, imgs = seqs[sel], imgs[sel]
        Q = len(seqs)
        if Q == 0:
            return PathArrays.empty(self.kmax)
        pts = np.empty((Q, k, 3))
        ok = np.ones(Q, bool)
        target = np.broadcast_to(rx, (Q, 3))
        for j in range(k - 1, -1, -1):
            sid = seqs[:, j]
            n = self.N[sid]
            I = imgs[:, j]
            tn = np.einsum("ij,ij->i", target, n)
            denom = np.einsum("ij,ij->i", I, n) - tn
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (self.Dp[sid] - tn) / denom
                P = target + t[:, None] * (I - target)
            rel = P - self.O[sid]
            u = np.einsum("ij,ij->i", rel, self.U1[sid])
            v = np.einsum("ij,ij->i", rel, self.U2[sid])
            ok &= np.isfinite(t) & (t > 1e-12) & (t < 1 - 1e-12)
            ok &= (u >= 0) & (u < self.L1[sid]) & (v >= 0) & (v < self.L2[sid])
            pts[:, j] = P
            target = P
        seqs, pts = seqs[ok], pts[ok]
        Q = len(seqs)
        if Q == 0:
            return PathArrays.empty(self.kmax)
        chain = np.concatenate([np.broadcast_to(self.tx, (Q, 1, 3)), pts,
                                np.broadcast_to(rx, (Q, 1, 3))], axis=1)
        A = chain[:, :-1].reshape(-1, 3)
        B = chain[:, 1:].reshape(-1, 3)
        pad = np.full((Q, 1), -1)
        ig = np.stack([np.concatenate([pad, seqs], 1), np.concatenate([seqs, pad], 1)], axis=-1)
        blocked = self.occluded_mask(A, B, ig.reshape(-1, 2)).reshape(Q, k + 1).any(axis=1)
        keep = ~blocked
        seqs, pts, chain = seqs[keep], pts[keep], chain[keep]
        Q = len(seqs)
        if Q == 0:
            return PathArrays.empty(self.kmax)

        dirs, seg = _normalize_rows(chain[:, 1:] - chain[:, :-1])
        length = np.zeros(Q)
        for j in range(k + 1):
            length = length + seg[:, j]
        E = self._tx_field(dirs[:, 0])
        angles = np.empty((Q, k))
        for j in range(k):
            sid = seqs[:, j]
            n = self.N[sid]
            kin, kout = dirs[:, j], dirs[:, j + 1]
            cos_i = np.abs(np.einsum("ij,ij->i", kin, n))
            angles[:, j] = np.arccos(np.clip(cos_i, 0.0, 1.0))
            s = np.cross(kin, n)
            s, sn = _normalize_rows(s)
            degenerate = sn < 1e-12
            if degenerate.any():
                alt = np.cross(kin[degenerate], self.up)
                alt2 = np.cross(kin[degenerate], np.array([1.0, 0.0, 0.0]))
                alt = np.where((np.linalg.norm(alt, axis=1) > 1e-9)[:, None], alt, alt2)
                s[degenerate] = _normalize_rows(alt)[0]
            p_in, p_out = np.cross(s, kin), np.cross(s, kout)
            g_te, g_tm = self._fresnel_rows(cos_i, sid)
            e_s = np.einsum("ij,ij->i", E, s)
            e_p = np.einsum("ij,ij->i", E, p_in)
            E = (g_te * e_s)[:, None] * s + (g_tm * e_p)[:, None] * p_out
        E = E * em.spreading_and_phase(length, self.wavelength)[:, None]

        keys, P3, ang = self._blank(Q)
        for j in range(k):
            is_plate = seqs[:, j] == self.plate_id if self.plate_id is not None else False
            keys[:, 3 * j] = np.where(is_plate, KIND_REFLECTOR, KIND_SPECULAR)
            keys[:, 3 * j + 1] = seqs[:, j]
        P3[:, :k] = pts
        ang[:, :k] = angles
        return PathArrays(length, E, dirs[:, 0].copy(), dirs[:, -1].copy(), keys, P3, ang)

    def specular(self, rx, max_order: Optional[int] = None) -> PathArrays:
        K = self.max_order if max_order is None else min(max_order, self.max_order)
        parts = [self.direct(rx)] + [self.specular_order(rx, k) for k in range(1, K + 1)]
        return PathArrays.concat(parts, self.kmax)

    # -- diffuse --------------------------------------------------------

    def _build_tiles(self):
        rows = []
        for sid, surf in enumerate(self.surfaces):
            S = surf.material.scatter_coeff
            if S <= 0.0:
                continue
            tiles = generate_tiles(surf, self.tile_size, sid)
            phases = tile_phases(self.seed, sid, len(tiles))
            for t, ph in zip(tiles, phases):
                rows.append((sid, t.index, t.center, t.area, S, surf.material.scatter_exponent, ph))
        if not rows:
            self._tiles = None
            return
        sid = np.array([r[0] for r in rows])
        C = np.array([r[2] for r in rows])
        n = self.N[sid]
        d = C - self.tx
        r_i = np.linalg.norm(d, axis=1)
        d = d / r_i[:, None]
        side = -np.einsum("ij,ij->i", d, n)   # >0: TX on the normal side
        cos_i = np.abs(side)
        ig = np.stack([sid, np.full_like(sid, -1)], axis=1)
        visible = (cos_i > 1e-12) & ~self.occluded_mask(np.broadcast_to(self.tx, C.shape), C, ig)
        idx = np.nonzero(visible)[0]
        alpha = np.array([r[5] for r in rows])[idx]
        theta_i = np.arccos(np.clip(cos_i[idx], 0, 1))
        norm = np.empty(len(idx))
        for a in np.unique(alpha):
            m = alpha == a
            norm[m] = em.lobe_normalization(int(a), theta_i[m])
        spec = d[idx] - 2 * np.einsum("ij,ij->i", d[idx], n[idx])[:, None] * n[idx]
        self._tiles = dict(
            sid=sid[idx], tile=np.array([r[1] for r in rows])[idx], C=C[idx], n=n[idx],
            sign=np.sign(side[idx]), area=np.array([r[3] for r in rows])[idx],
            S=np.array([r[4] for r in rows])[idx], alpha=alpha, phase=np.array([r[6] for r in rows])[idx],
            r_i=r_i[idx], cos_i=cos_i[idx], theta_i=theta_i, norm=norm, spec=spec,
            tx_field=self._tx_field(d[idx]), dep=d[idx])

    def diffuse(self, rx, only: Optional[int] = None) -> PathArrays:
        if self._tiles is _UNBUILT:
            self._build_tiles()
        T = self._tiles
        if T is None or len(T["sid"]) == 0:
            return PathArrays.empty(self.kmax)
        rx = np.asarray(rx, float)
        sel = np.arange(len(T["sid"])) if only is None else np.nonzero(T["sid"] == only)[0]
        C = T["C"][sel]
        w = rx - C
        r_s = np.linalg.norm(w, axis=1)
        ok = (r_s > 0) & (np.einsum("ij,ij->i", w, T["n"][sel]) * T["sign"][sel] > 0)
        sel, C, w, r_s = sel[ok], C[ok], w[ok], r_s[ok]
        if len(sel) == 0:
            return PathArrays.empty(self.kmax)
        ig = np.stack([T["sid"][sel], np.full(len(sel), -1)], axis=1)
        vis = ~self.occluded_mask(C, np.broadcast_to(rx, C.shape), ig)
        sel, C, w, r_s = sel[vis], C[vis], w[vis], r_s[vis]
        if len(sel) == 0:
            return PathArrays.empty(self.kmax)
        out = w / r_s[:, None]
        cos_psi = np.einsum("ij,ij->i", out, T["spec"][sel])
        lobe = np.empty(len(sel))
        for a in np.unique(T["alpha"][sel]):
            m = T["alpha"][sel] == a
            lobe[m] = em.lobe(cos_psi[m], int(a))
        r_i = T["r_i"][sel]
        p = em.directive_power(T["S"][sel], T["area"][sel], T["cos_i"][sel], lobe, T["norm"][sel],
                               r_i, r_s, self.wavelength)
        length = r_i + r_s
        amp = np.sqrt(p) * np.exp(1j * (T["phase"][sel] - self.k * length))
        tx_gain = np.linalg.norm(T["tx_field"][sel], axis=1)
        E = (amp * tx_gain)[:, None] * vertical_pol(out, self.up)
        keys, pts, ang = self._blank(len(sel))
        keys[:, 0] = KIND_DIFFUSE
        keys[:, 1] = T["sid"][sel]
        keys[:, 2] = T["tile"][sel]
        pts[:, 0] = C
        ang[:, 0] = T["theta_i"][sel]
        return PathArrays(length, E, T["dep"][sel].copy(), out, keys, pts, ang)

    # -- curved reflectors ---------------------------------------------

    def curved_path(self, rx) -> PathArrays:
        refl = self.curved
        if refl is None:
            return PathArrays.empty(self.kmax)
        rx = np.asarray(rx, float)
        P, n = curved_specular_point(refl, self.tx, rx)
        if P is None:
            return PathArrays.empty(self.kmax)
        ig = np.full((2, 1), self.reflector_id)
        if self.occluded_mask(np.array([self.tx, P]), np.array([P, rx]), ig).any():
            return PathArrays.empty(self.kmax)
        d_in, r_i = _normalize_rows((P - self.tx)[None])
        d_out, r_s = _normalize_rows((rx - P)[None])
        sigma = _rcs_quiet(refl, d_in[0], d_out[0], self.wavelength)
        length = r_i + r_s
        amp = math.sqrt(sigma / (4 * math.pi)) * self.wavelength / (4 * math.pi * r_i * r_s) \
            * np.exp(-1j * self.k * length)
        tx_gain = np.linalg.norm(self._tx_field(d_in), axis=1)
        E = (amp * tx_gain)[:, None] * vertical_pol(d_out, self.up)
        keys, pts, ang = self._blank(1)
        keys[0, :3] = (KIND_REFLECTOR, self.reflector_id, -1)
        pts[0, 0] = P
        ang[0, 0] = math.acos(min(1.0, abs(float(d_in[0] @ n))))
        return PathArrays(length, E, d_in, d_out, keys, pts, ang)

    # -- assembly -------------------------------------------------------

    def reflector_paths(self, rx) -> PathArrays:
        if self.reflector is None:
            raise ValueError("scene has no reflector")
        if self.plate_id is not None:
            return PathArrays.concat([self.specular_order(rx, 1, only=self.plate_id),
                                      self.diffuse(rx, only=self.plate_id)], self.kmax)
        return self.curved_path(rx)

    def all_paths(self, rx, diffuse: bool = True) -> PathArrays:
        parts = [self.specular(rx)]
        if diffuse:
            parts.append(self.diffuse(rx))
        if self.curved is not None:
            parts.append(self.curved_path(rx))
        return PathArrays.concat(parts, self.kmax)

    # -- conversion -----------------------------------------------------

    def to_paths(self, arrays: PathArrays, rx_antenna: Optional[AntennaSpec] = None
                 ) -> list[PropagationPath]:
        amps = received_amplitudes(arrays, rx_antenna, self.up)
        out = []
        for p in range(len(arrays)):
            inter = []
            for j in range(self.kmax):
                code = int(arrays.keys[p, 3 * j])
                if code < 0:
                    break
                gid = int(arrays.keys[p, 3 * j + 1])
                tile = int(arrays.keys[p, 3 * j + 2])
                inter.append(Interaction(
                    _KIND_NAMES[code],
                    "reflector" if gid == self.reflector_id and self.reflector is not None
                    else self.names[gid],
                    gid, arrays.points[p, j].copy(), float(arrays.angles[p, j]),
                    tile if tile >= 0 else None,
                    self.reflector.kind if code == KIND_REFLECTOR else None))
            out.append(PropagationPath(tuple(inter), float(arrays.length[p]), complex(amps[p]),
                                       arrays.dep[p].copy(), arrays.arr[p].copy(),
                                       arrays.field[p].copy()))
        return out


def _rcs_quiet(refl, d_in, d_out, wavelength):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", em.OpticalRegimeWarning)
        return em.rcs(refl, d_in, d_out, wavelength)


def _circle_specular(center, radius, t, r, e_u=None, e_v=None):
    """Specular point on a circle (in the plane spanned by center, t, r).

    Returns (point, unit normal) or (None, None) when no point is visible from
    both ends.
    """
    a = t - center
    b = r - center
    da, db = np.linalg.norm(a), np.linalg.norm(b)
    if da <= radius or db <= radius:
        return None, None
    u = a / da
    bp = b - (b @ u) * u
    nb = np.linalg.norm(bp)
    gamma = math.atan2(nb, float(b @ u))
    if gamma > math.pi - 1e-9:
        return None, None
    if nb < 1e-12 * db:
        P = center + radius * u
        return P, u
    v = bp / nb

    def point(phi):
        return center + radius * (math.cos(phi) * u + math.sin(phi) * v)

    def f(phi):
        P = point(phi)
        n = (P - center) / radius
        wt, wr = t - P, r - P
        ang_t = math.atan2(np.linalg.norm(np.cross(wt, n)), float(wt @ n))
        ang_r = math.atan2(np.linalg.norm(np.cross(wr, n)), float(wr @ n))
        return ang_t - ang_r

    phi = brentq(f, 0.0, gamma, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    P = point(phi)
    n = (P - center) / radius
    if float((t - P) @ n) <= 0 or float((r - P) @ n) <= 0:
        return None, None
    return P, n


def curved_specular_point(refl: Reflector, tx, rx):
    """Geometric specular point on a sphere or finite cylinder."""
    tx, rx = np.asarray(tx, float), np.asarray(rx, float)
    if isinstance(refl, Sphere):
        return _circle_specular(refl.center, refl.radius, tx, rx)
    if isinstance(refl, Cylinder):
        ax, c = refl.axis, refl.center
        zt, zr = float((tx - c) @ ax), float((rx - c) @ ax)
        tp, rp = tx - zt * ax, rx - zr * ax
        P, n = _circle_specular(c, refl.radius, tp, rp)
        if P is None:
            return None, None
        dt, dr = np.linalg.norm(tp - P), np.linalg.norm(rp - P)
        zp = zt + (zr - zt) * dt / (dt + dr)
        if abs(zp) > refl.height / 2:
            return None, None
        return P + zp * ax, n
    raise TypeError("curved reflector expected")


def _segment_hits_volume(refl: Reflector, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    D = B - A
    L = np.linalg.norm(D, axis=1)
    lo = EDGE_TOL / np.where(L > 0, L, 1.0)
    hi = 1.0 - lo
    if isinstance(refl, Sphere):
        f = A - refl.center
        a = np.einsum("ij,ij->i", D, D)
        b = 2 * np.einsum("ij,ij->i", f, D)
        c = np.einsum("ij,ij->i", f, f) - refl.radius**2
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t1, t2 = (-b - sq) / (2 * a), (-b + sq) / (2 * a)
        # Intersection interval [t1, t2] overlapping the open segment.
        return (disc > 0) & (t2 > lo) & (t1 < hi)
    if isinstance(refl, Cylinder):
        ax, c, R, H = refl.axis, refl.center, refl.radius, refl.height / 2
        f = A - c
        fz, dz = f @ ax, D @ ax
        fp, dp = f - fz[:, None] * ax, D - dz[:, None] * ax
        a = np.einsum("ij,ij->i", dp, dp)
        b = 2 * np.einsum("ij,ij->i", fp, dp)
        cc = np.einsum("ij,ij->i", fp, fp) - R**2
        # Parameter interval inside the infinite cylinder.
        disc = b * b - 4 * a * cc
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = np.sqrt(np.maximum(disc, 0.0))
            r1 = np.where(a > 1e-300, (-b - sq) / (2 * a), np.where(cc < 0, -np.inf, np.inf))
            r2 = np.where(a > 1e-300, (-b + sq) / (2 * a), np.where(cc < 0, np.inf, -np.inf))
            radial_ok = (a <= 1e-300) & (cc < 0) | (a > 1e-300) & (disc > 0)
            # Parameter interval inside the slab |z| <= H.
            z1 = np.where(np.abs(dz) > 1e-300, (-H - fz) / dz, np.where(np.abs(fz) <= H, -np.inf, np.inf))
            z2 = np.where(np.abs(dz) > 1e-300, (H - fz) / dz, np.where(np.abs(fz) <= H, np.inf, -np.inf))
        s1, s2 = np.minimum(z1, z2), np.maximum(z1, z2)
        t_lo = np.maximum(np.maximum(r1, s1), lo)
        t_hi = np.minimum(np.minimum(r2, s2), hi)
        return radial_ok & (t_lo < t_hi)
    raise TypeError("curved reflector expected")


# -- public per-link API -------------------------------------------------------

def occluded(p1, p2, scene: Scene, ignore: Iterable[str] = ()) -> bool:
    """True iff the open segment p1-p2 meets a surface or the reflector.

    ``ignore`` holds surface names and/or ``"reflector"``.  Hits within
    ``EDGE_TOL`` of a rectangle boundary do not occlude.
    """
    p1, p2 = np.asarray(p1, float), np.asarray(p2, float)
    if np.allclose(p1, p2, atol=0, rtol=0):
        raise ValueError("segment endpoints coincide")
    tr = Tracer(scene, max_order=0)
    lookup = {name: i for i, name in enumerate(tr.names)}
    lookup["reflector"] = tr.reflector_id
    ids = [lookup[name] for name in ignore] or [-1]
    return bool(tr.occluded_mask(p1[None], p2[None], np.array([ids]))[0])


def trace_specular(scene: Scene, tx, rx, max_order: int = DEFAULT_MAX_ORDER,
                   rx_antenna: Optional[AntennaSpec] = None) -> list[PropagationPath]:
    """Direct path (if clear) plus every valid image-method path up to ``max_order``."""
    tx, rx = np.asarray(tx, float), np.asarray(rx, float)
    if np.array_equal(tx, rx):
        raise ValueError("tx and rx coincide")
    tr = Tracer(scene, tx, max_order=max_order)
    return tr.to_paths(tr.specular(rx), rx_antenna)


def trace_diffuse(scene: Scene, tx, rx, tile_size: float = DEFAULT_TILE_SIZE, seed: int = 0,
                  rx_antenna: Optional[AntennaSpec] = None) -> list[PropagationPath]:
    """One TX -> tile -> RX path per tile seen from both ends."""
    if not tile_size > 0:
        raise ValueError("tile_size must be > 0")
    tr = Tracer(scene, tx, max_order=0, tile_size=tile_size, seed=seed)
    return tr.to_paths(tr.diffuse(np.asarray(rx, float)), rx_antenna)


def trace_reflector(scene: Scene, tx, rx, reflector: Optional[Reflector] = None,
                    tile_size: float = DEFAULT_TILE_SIZE, seed: int = 0,
                    rx_antenna: Optional[AntennaSpec] = None) -> list[PropagationPath]:
    """Paths produced by the reflector alone.

    Flat plate: the single plate bounce plus the plate's diffuse tiles.
    Sphere / cylinder: one path through the specular point with an amplitude
    from the bistatic radar equation.
    """
    if reflector is not None and reflector is not scene.reflector:
        scene = scene.with_reflector(reflector)
    if scene.reflector is None:
        raise ValueError("scene has no reflector")
    tr = Tracer(scene, tx, max_order=1, tile_size=tile_size, seed=seed)
    return tr.to_paths(tr.reflector_paths(np.asarray(rx, float)), rx_antenna)


def trace_all(scene: Scene, tx, rx, max_order: int = DEFAULT_MAX_ORDER,
              tile_size: float = DEFAULT_TILE_SIZE, seed: int = 0, diffuse: bool = True,
              rx_antenna: Optional[AntennaSpec] = None) -> list[PropagationPath]:
    """Every path the grid sweep would sum for one receiver point."""
    tr = Tracer(scene, tx, max_order=max_order, tile_size=tile_size, seed=seed)
    return tr.to_paths(tr.all_paths(np.asarray(rx, float), diffuse), rx_antenna)
