"""Independent reference implementations used to check the simulator.

Nothing here reuses the package's geometry or physics code; each oracle is a
different method for the same quantity.
"""

import math

import numpy as np
from scipy import integrate
from scipy.optimize import least_squares
from scipy.special import comb

from reflectorsim.scene import CONCRETE, Scene, Surface

BOX_FACES = ("x0", "x1", "y0", "y1", "z0", "z1")


def shoebox_surfaces(dims, material=CONCRETE):
    """Six inward-facing rectangles of the box [0, Lx] x [0, Ly] x [0, Lz]."""
    lx, ly, lz = dims
    ex, ey, ez = np.array([lx, 0, 0.0]), np.array([0, ly, 0.0]), np.array([0, 0, lz * 1.0])
    zero = np.zeros(3)
    spec = {
        "x0": (zero, ey, ez, (1, 0, 0)), "x1": (ex, ey, ez, (-1, 0, 0)),
        "y0": (zero, ex, ez, (0, 1, 0)), "y1": (ey, ex, ez, (0, -1, 0)),
        "z0": (zero, ex, ey, (0, 0, 1)), "z1": (ez, ex, ey, (0, 0, -1)),
    }
    out = []
    for name in BOX_FACES:
        origin, e1, e2, inward = spec[name]
        if np.cross(e1, e2) @ np.array(inward, float) < 0:
            e1, e2 = e2, e1
        out.append(Surface(name, origin, e1, e2, material))
    return out


def random_shoebox(rng, margin=0.3):
    dims = np.array([rng.uniform(3, 10), rng.uniform(3, 10), rng.uniform(2.5, 4)])
    tx = margin + rng.uniform(size=3) * (dims - 2 * margin)
    rx = margin + rng.uniform(size=3) * (dims - 2 * margin)
    scene = Scene(shoebox_surfaces(dims), tx)
    return dims, tx, rx, scene


def fibonacci_directions(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _box_exit(origin, direction, dims):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(direction > 0, (dims - origin) / direction,
                     np.where(direction < 0, -origin / direction, np.inf))
    axis = np.argmin(t, axis=1)
    return t[np.arange(len(t)), axis], axis


def shoot_rays(dims, tx, rx, max_order=2, n_rays=1_000_000, capture=1.0):
    """Brute-force ray launching inside a box.

    Rays leave ``tx`` on a Fibonacci sphere, reflect specularly off the nearest
    wall, and count as received when they pass within a cone of half-angle
    ``capture * angular spacing`` around ``rx`` (measured over the unfolded
    length).  Returns {face sequence: best launch direction}.
    """
    dims = np.asarray(dims, float)
    tx, rx = np.asarray(tx, float), np.asarray(rx, float)
    D = fibonacci_directions(n_rays)
    O = np.broadcast_to(tx, D.shape).copy()
    spacing = math.sqrt(4 * math.pi / n_rays)
    travelled = np.zeros(n_rays)
    launch = D.copy()
    seq = np.full((n_rays, max_order), -1)
    found = {}
    rows = np.arange(n_rays)
    for order in range(max_order + 1):
        t_exit, axis = _box_exit(O, D, dims)
        w = rx - O
        s = np.einsum("ij,ij->i", w, D)
        perp = np.linalg.norm(w - s[:, None] * D, axis=1)
        reach = travelled + s
        hit = (s > 0) & (s < t_exit) & (perp < capture * spacing * reach)
        for i in np.nonzero(hit)[0]:
            key = tuple(BOX_FACES[f] for f in seq[i, :order])
            miss = perp[i] / reach[i]
            if key not in found or miss < found[key][0]:
                found[key] = (miss, launch[i])
        if order == max_order:
            break
        O = O + t_exit[:, None] * D
        travelled = travelled + t_exit
        positive = D[rows, axis] > 0
        seq[:, order] = 2 * axis + positive
        D[rows, axis] *= -1.0
    return {k: v[1] for k, v in found.items()}


def _follow(direction, sequence, dims, tx):
    """Unfold a ray along a fixed face sequence; returns (end point, dir, length, points)."""
    O, d = np.array(tx, float), np.array(direction, float)
    d /= np.linalg.norm(d)
    length, points = 0.0, []
    for name in sequence:
        axis = BOX_FACES.index(name) // 2
        plane = 0.0 if name.endswith("0") else dims[axis]
        if d[axis] == 0:
            return None
        t = (plane - O[axis]) / d[axis]
        if t <= 0:
            return None
        O = O + t * d
        length += t
        points.append(O.copy())
        d[axis] = -d[axis]
    return O, d, length, points


def refine_path(direction, sequence, dims, tx, rx):
    """Adjust a launch direction until the ray passes exactly through ``rx``.

    Returns (length, bounce points) or None when the refined ray leaves the
    box faces or fails to converge.
    """
    dims, rx = np.asarray(dims, float), np.asarray(rx, float)
    d0 = np.asarray(direction, float)
    angles0 = np.array([math.atan2(d0[1], d0[0]), math.asin(np.clip(d0[2], -1, 1))])

    def to_dir(a):
        return np.array([math.cos(a[1]) * math.cos(a[0]), math.cos(a[1]) * math.sin(a[0]),
                         math.sin(a[1])])

    def residual(a):
        res = _follow(to_dir(a), sequence, dims, tx)
        if res is None:
            return np.full(3, 1e3)
        O, d, _, _ = res
        w = rx - O
        return w - (w @ d) * d

    sol = least_squares(residual, angles0, xtol=1e-15, ftol=1e-15, gtol=1e-15, method="lm")
    res = _follow(to_dir(sol.x), sequence, dims, tx)
    if res is None:
        return None
    O, d, length, points = res
    w = rx - O
    if np.linalg.norm(w - (w @ d) * d) > 1e-9 or w @ d <= 0:
        return None
    for p in points:
        if np.any(p < -1e-9) or np.any(p > dims + 1e-9):
            return None
    return length + float(w @ d), points


def brute_force_paths(dims, tx, rx, max_order=2, n_rays=1_000_000):
    """{face sequence: path length} found by ray launching plus refinement."""
    out = {}
    for sequence, direction in shoot_rays(dims, tx, rx, max_order, n_rays).items():
        refined = refine_path(direction, sequence, dims, tx, rx)
        if refined is not None:
            out[sequence] = refined[0]
    return out


# -- diffuse lobe normalisation ------------------------------------------------

def lobe_integral_closed_form(alpha: int, theta_i: float) -> float:
    """Hemisphere integral of ((1 + cos psi)/2)^alpha in closed form.

    Binomial expansion of the lobe, with the hemisphere moments of cos^j psi
    written as finite sums.
    """
    total = 0.0
    s2 = math.sin(theta_i) ** 2
    for j in range(alpha + 1):
        if j % 2 == 0:
            moment = 2 * math.pi / (j + 1)
        else:
            series = sum(comb(2 * w, w, exact=True) * s2**w / 4**w for w in range((j - 1) // 2 + 1))
            moment = 2 * math.pi / (j + 1) * math.cos(theta_i) * series
        total += comb(alpha, j, exact=True) * moment
    return total / 2**alpha


def lobe_integral_quadrature(alpha: int, theta_i: float) -> float:
    """Same integral by adaptive 2-D quadrature over the hemisphere."""
    si, ci = math.sin(theta_i), math.cos(theta_i)

    def integrand(phi, theta):
        cos_psi = si * math.sin(theta) * math.cos(phi) + ci * math.cos(theta)
        return ((1 + cos_psi) / 2) ** alpha * math.sin(theta)

    val, _ = integrate.dblquad(integrand, 0, math.pi / 2, 0, 2 * math.pi, epsabs=1e-11, epsrel=1e-11)
    return val


def direct_power_dbm(amplitudes, tx_power_dbm=0.0) -> float:
    """Plain left-to-right complex sum, the textbook definition."""
    total = 0j
    for a in amplitudes:
        total += complex(a)
    mag = abs(total)
    return tx_power_dbm + 20 * math.log10(mag) if mag > 0 else -math.inf
