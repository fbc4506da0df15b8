"""Planar polygonal domains: generation, membership tests and flatness certification.

A domain is a simple, counter-clockwise polygon with a working scale r0.
Flatness of the boundary at a center x and radius r is the normalized
symmetric Hausdorff distance between the sampled boundary inside B(x, r)
and the best straight chord, minimized over a grid of (angle, offset)
candidates refined by golden-section search.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# domain type


@dataclass(frozen=True)
class PolygonalDomain:
    """Closed simple CCW polygon with scale r0 and free-form provenance."""

    vertices: np.ndarray  # (n, 2), first vertex not repeated
    r0: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("vertices must be an (n>=3, 2) array")
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
        object.__setattr__(self, "vertices", v)
        if self.signed_area <= 0:
            raise GeometryError("polygon must be counter-clockwise (signed area > 0)")
        if not self.r0 > 0:
            raise GeometryError("r0 must be positive")
        if self.r0 > self.diameter * (1 + 1e-12):
            raise GeometryError(f"r0 = {self.r0} exceeds the polygon diameter {self.diameter}")
        bad = _first_self_intersection(v)
        if bad is not None:
            raise GeometryError(f"polygon is not simple: edges {bad[0]} and {bad[1]} intersect")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def edges(self) -> np.ndarray:
        """(n, 2, 2) array of segments [v_i, v_{i+1}]."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    @property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.hypot(*(e[:, 1] - e[:, 0]).T)

    @property
    def signed_area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def diameter(self) -> float:
        v = self.vertices
        lo, hi = v.min(axis=0), v.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    # -- membership ---------------------------------------------------------

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd crossing test, vectorized. Boundary points are arbitrary."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        out = np.zeros(len(pts), dtype=bool)
        for lo in range(0, len(pts), 4096):
            p = pts[lo:lo + 4096]
            py = p[:, 1][:, None]
            px = p[:, 0][:, None]
            y1, y2 = v[:, 1][None, :], w[:, 1][None, :]
            x1, x2 = v[:, 0][None, :], w[:, 0][None, :]
            cond = (y1 > py) != (y2 > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xs = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            cross = cond & (px < xs)
            out[lo:lo + 4096] = np.count_nonzero(cross, axis=1) % 2 == 1
        return out

    def distance_to_boundary(self, pts: np.ndarray, return_projection: bool = False):
        """Distance (and optionally nearest point) from each point to the boundary."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        e = self.edges
        a, b = e[:, 0], e[:, 1]
        d = b - a
        dd = np.einsum("ij,ij->i", d, d)
        best = np.full(len(pts), np.inf)
        proj = np.zeros_like(pts) if return_projection else None
        for lo in range(0, len(pts), 2048):
            p = pts[lo:lo + 2048]
            ap = p[:, None, :] - a[None, :, :]
            t = np.clip(np.einsum("pek,ek->pe", ap, d) / dd[None, :], 0.0, 1.0)
            foot = a[None, :, :] + t[..., None] * d[None, :, :]
            dist = np.linalg.norm(p[:, None, :] - foot, axis=2)
            idx = np.argmin(dist, axis=1)
            rows = np.arange(len(p))
            best[lo:lo + 2048] = dist[rows, idx]
            if return_projection:
                proj[lo:lo + 2048] = foot[rows, idx]
        if return_projection:
            return best, proj
        return best

    def boundary_arc_points(self, spacing: float) -> np.ndarray:
        """Points along the boundary at (approximately) uniform arc spacing."""
        if spacing <= 0:
            raise GeometryError("spacing must be positive")
        n = max(8, int(math.ceil(self.perimeter / spacing)))
        return self.boundary_points_at(np.arange(n) / n)

    def boundary_points_at(self, fractions: np.ndarray) -> np.ndarray:
        """Boundary points at the given arc-length fractions of the perimeter."""
        fr = np.mod(np.asarray(fractions, dtype=float), 1.0)
        lens = self.edge_lengths
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        s = fr * cum[-1]
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lens) - 1)
        t = (s - cum[k]) / lens[k]
        e = self.edges
        return e[k, 0] + t[:, None] * (e[k, 1] - e[k, 0])

    # -- transforms (handy for invariance tests) -----------------------------

    def scaled(self, s: float) -> "PolygonalDomain":
        return PolygonalDomain(self.vertices * s, self.r0 * s, dict(self.meta))

    def transformed(self, angle: float = 0.0, shift=(0.0, 0.0)) -> "PolygonalDomain":
        c, sn = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -sn], [sn, c]])
        return PolygonalDomain(self.vertices @ rot.T + np.asarray(shift, dtype=float),
                               self.r0, dict(self.meta))

    # -- io -------------------------------------------------------------------

    def to_json(self, path) -> None:
        data = {"vertices": self.vertices.tolist(), "r0": self.r0, "meta": self.meta}
        Path(path).write_text(json.dumps(data, indent=1))

    @classmethod
    def from_json(cls, path) -> "PolygonalDomain":
        data = json.loads(Path(path).read_text())
        return cls(np.asarray(data["vertices"], dtype=float), float(data["r0"]),
                   dict(data.get("meta", {})))


def point_in_domain(domain: PolygonalDomain, p) -> bool:
    """True if p lies in the closed domain (boundary within 1e-12 counts)."""
    return classify_point(domain, p) != "outside"

def classify_point(domain: PolygonalDomain, p, tol: float = 1e-12) -> str:
    """'inside' / 'boundary' / 'outside' with boundary band of width tol."""
    p = np.asarray(p, dtype=float).reshape(1, 2)
    if float(domain.distance_to_boundary(p)[0]) <= tol:
        return "boundary"
    return "inside" if bool(domain.contains_many(p)[0]) else "outside"


# ---------------------------------------------------------------------------
# stock domains


def square_domain(side: float = 1.0, r0: float | None = None) -> PolygonalDomain:
    v = np.array([[0, 0], [side, 0], [side, side], [0, side]], dtype=float)
    return PolygonalDomain(v, r0 if r0 is not None else side, {"generator": "square"})


def rectangle_domain(w: float, h: float, r0: float | None = None) -> PolygonalDomain:
    v = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=float)
    return PolygonalDomain(v, r0 if r0 is not None else min(w, h), {"generator": "rectangle"})


def disk_domain(radius: float = 1.0, n: int = 512, r0: float | None = None,
                center=(0.0, 0.0)) -> PolygonalDomain:
    ang = 2 * np.pi * np.arange(n) / n
    v = np.column_stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)])
    return PolygonalDomain(v, r0 if r0 is not None else radius,
                           {"generator": "disk", "radius": radius, "n": n})


def regular_polygon_domain(k: int, radius: float = 1.0, r0: float | None = None) -> PolygonalDomain:
    ang = 2 * np.pi * (np.arange(k) + 0.5) / k
    v = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
    return PolygonalDomain(v, r0 if r0 is not None else radius,
                           {"generator": "regular_polygon", "k": k})


def lshape_domain(r0: float = 0.5) -> PolygonalDomain:
    """Unit square minus its upper-right quadrant; re-entrant corner at (0.5, 0.5)."""
    v = np.array([[0, 0], [1, 0], [1, 0.5], [0.5, 0.5], [0.5, 1], [0, 1]], dtype=float)
    return PolygonalDomain(v, r0, {"generator": "lshape"})


# ---------------------------------------------------------------------------
# flat fractal generator


def generate_flat_fractal(base: PolygonalDomain, bump: float, depth: int,
                          seed: int | None = None) -> PolygonalDomain:
    """Koch-type refinement: each edge becomes a 4-edge motif with a mid bump.

    The motif vertices sit at the quarter points of the edge; the midpoint is
    displaced perpendicular to the edge by ``bump`` times the edge length
    (outward, or sign-randomized per edge when a seed is given). bump = 0
    reproduces the traced base boundary, subdivided.
    """
    if not 0.0 <= bump <= 0.3:
        raise GeometryError(f"bump amplitude must lie in [0, 0.3], got {bump}")
    if depth < 0:
        raise GeometryError("depth must be >= 0")
    rng = np.random.default_rng(seed) if seed is not None else None
    verts = base.vertices.copy()
    for _ in range(depth):
        p = verts
        q = np.roll(verts, -1, axis=0)
        e = q - p
        lens = np.hypot(e[:, 0], e[:, 1])
        # outward normal of a CCW polygon is the right-hand normal
        nrm = np.column_stack([e[:, 1], -e[:, 0]]) / lens[:, None]
        if rng is not None:
            signs = rng.integers(0, 2, size=len(p)) * 2.0 - 1.0
        else:
            signs = np.ones(len(p))
        a = p + 0.25 * e
        m = p + 0.50 * e + (signs * bump * lens)[:, None] * nrm
        b = p + 0.75 * e
        verts = np.stack([p, a, m, b], axis=1).reshape(-1, 2)
    meta = dict(base.meta)
    meta.update({"generator": "flat_fractal", "bump": bump, "depth": depth,
                 "seed": seed, "base": base.meta.get("generator", "custom")})
    try:
        return PolygonalDomain(verts, base.r0, meta)
    except GeometryError as exc:
        raise GeometryError(f"fractal refinement produced an invalid polygon: {exc}") from exc


def _first_self_intersection(v: np.ndarray):
    """Index pair of the first properly intersecting non-adjacent edge pair, or None."""
    n = len(v)
    a = v
    b = np.roll(v, -1, axis=0)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    scale = float(np.max(hi - lo, initial=1e-30)) + 1e-30
    tol = 1e-12 * scale
    for i in range(n - 2):
        js = np.arange(i + 2, n if i > 0 else n - 1)
        cand = js[(lo[js, 0] <= hi[i, 0] + tol) & (hi[js, 0] >= lo[i, 0] - tol)
                  & (lo[js, 1] <= hi[i, 1] + tol) & (hi[js, 1] >= lo[i, 1] - tol)]
        for j in cand:
            if _segments_cross(a[i], b[i], a[j], b[j], tol):
                return i, int(j)
    return None


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _segments_cross(p1, q1, p2, q2, tol: float) -> bool:
    d1 = q1 - p1
    d2 = q2 - p2
    o1 = _cross2(d1, p2 - p1)
    o2 = _cross2(d1, q2 - p1)
    o3 = _cross2(d2, p1 - p2)
    o4 = _cross2(d2, q1 - p2)
    if (o1 * o2 < -tol * tol) and (o3 * o4 < -tol * tol):
        return True
    # collinear overlap: all orientations ~ 0 and projected intervals overlap
    if max(abs(o1), abs(o2), abs(o3), abs(o4)) <= tol * max(1.0, np.linalg.norm(d1)):
        t = d1 / (np.linalg.norm(d1) + 1e-300)
        s1 = sorted([float(np.dot(p1, t)), float(np.dot(q1, t))])
        s2 = sorted([float(np.dot(p2, t)), float(np.dot(q2, t))])
        return min(s1[1], s2[1]) - max(s1[0], s2[0]) > tol
    return False


# ---------------------------------------------------------------------------
# flatness estimation


@dataclass(frozen=True)
class FlatnessSample:
    center: tuple[float, float]
    radius: float
    eps_hat: float
    line_point: tuple[float, float]
    line_dir: tuple[float, float]
    separation_ok: bool


@dataclass(frozen=True)
class FlatnessReport:
    samples: list[FlatnessSample]
    eps_global: float
    r0_used: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["center_x", "center_y", "radius", "eps_hat", "separation_ok"])
            for s in self.samples:
                w.writerow([repr(s.center[0]), repr(s.center[1]), repr(s.radius),
                            repr(s.eps_hat), int(s.separation_ok)])


def estimate_flatness(domain: PolygonalDomain, scales, centers_per_scale: int = 12,
                      angular_resolution: int = 64, centers=None,
                      separation_all_scales: bool = False,
                      sample_spacing: float | None = None) -> FlatnessReport:
    """Measure the normalized boundary-to-best-line Hausdorff distance.

    For every (center, scale) pair the flatness quotient eps_hat is the
    symmetric Hausdorff distance between the sampled boundary inside the
    ball and the best chord over a grid of (angle, offset) candidates with
    golden-section refinement, divided by the scale. The two-sided
    separation condition is checked at scale r0 (or at every scale when
    ``separation_all_scales`` is set) using the best line through the center.
    """
    scales = sorted(float(s) for s in np.atleast_1d(scales))
    if not scales or scales[0] <= 0 or scales[-1] > domain.r0 * (1 + 1e-12):
        raise GeometryError("scales must lie in (0, r0]")
    spacing = scales[0] / 20.0 if sample_spacing is None else float(sample_spacing)
    if scales[0] < 2.0 * spacing:
        raise GeometryError(
            f"scale {scales[0]} is below twice the boundary sample spacing {spacing}")
    boundary = domain.boundary_arc_points(spacing)
    if centers is None:
        fr = (np.arange(centers_per_scale) + 0.5) / centers_per_scale
        ctrs = domain.boundary_points_at(fr)
        # include the sharpest corner: flatness there bounds the rest
        ctrs = np.vstack([ctrs, domain.vertices[_sharpest_vertex(domain)]])
    else:
        ctrs = np.atleast_2d(np.asarray(centers, dtype=float))
        _, ctrs = domain.distance_to_boundary(ctrs, return_projection=True)

    samples: list[FlatnessSample] = []
    for c in ctrs:
        per_scale = {}
        for r in scales:
            eps, theta, off = _best_line(domain, boundary, c, r, angular_resolution)
            per_scale[r] = (eps, theta, off)
        if separation_all_scales:
            sep = {r: _separation_ok(domain, boundary, c, r, angular_resolution)
                   for r in scales}
        else:
            ok0 = _separation_ok(domain, boundary, c, domain.r0, angular_resolution)
            sep = {r: ok0 for r in scales}
        for r in scales:
            eps, theta, off = per_scale[r]
            n = (math.cos(theta), math.sin(theta))
            samples.append(FlatnessSample(
                center=(float(c[0]), float(c[1])), radius=r, eps_hat=eps,
                line_point=(float(c[0] + off * n[0]), float(c[1] + off * n[1])),
                line_dir=(-n[1], n[0]), separation_ok=sep[r]))
    eps_global = max(s.eps_hat for s in samples)
    return FlatnessReport(samples=samples, eps_global=eps_global, r0_used=domain.r0)


def _sharpest_vertex(domain: PolygonalDomain) -> int:
    v = domain.vertices
    prv = v - np.roll(v, 1, axis=0)
    nxt = np.roll(v, -1, axis=0) - v
    prv /= np.linalg.norm(prv, axis=1, keepdims=True)
    nxt /= np.linalg.norm(nxt, axis=1, keepdims=True)
    return int(np.argmin(np.einsum("ij,ij->i", prv, nxt)))


def _clip_edges_to_ball(domain: PolygonalDomain, center, r: float) -> np.ndarray:
    """Sub-segments of polygon edges inside B(center, r), as a (k, 2, 2) array."""
    e = domain.edges
    a = e[:, 0] - center
    d = e[:, 1] - e[:, 0]
    aa = np.einsum("ij,ij->i", a, a)
    ad = np.einsum("ij,ij->i", a, d)
    dd = np.einsum("ij,ij->i", d, d)
    disc = ad * ad - dd * (aa - r * r)
    keep = disc > 0
    sq = np.sqrt(disc[keep])
    t0 = np.clip((-ad[keep] - sq) / dd[keep], 0.0, 1.0)
    t1 = np.clip((-ad[keep] + sq) / dd[keep], 0.0, 1.0)
    ok = t1 - t0 > 1e-12
    base = e[keep][ok]
    t0, t1 = t0[ok], t1[ok]
    d = base[:, 1] - base[:, 0]
    p0 = base[:, 0] + t0[:, None] * d
    p1 = base[:, 0] + t1[:, None] * d
    return np.stack([p0, p1], axis=1)


def _points_to_segments_min(pts: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Min distance from each point to a set of segments."""
    if len(segs) == 0:
        return np.full(len(pts), np.inf)
    a, b = segs[:, 0], segs[:, 1]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d) + 1e-300
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pek,ek->pe", ap, d) / dd[None, :], 0.0, 1.0)
    foot = a[None, :, :] + t[..., None] * d[None, :, :]
    return np.linalg.norm(pts[:, None, :] - foot, axis=2).min(axis=1)


def _chord_hausdorff(local_pts: np.ndarray, clipped: np.ndarray, center,
                     r: float, theta: float, off: float,
                     chord_samples: int = 64) -> float:
    """Symmetric Hausdorff distance between boundary∩B and the chord (theta, off)."""
    if abs(off) >= r:
        return np.inf
    n = np.array([math.cos(theta), math.sin(theta)])
    t = np.array([-n[1], n[0]])
    half = math.sqrt(max(r * r - off * off, 0.0))
    a = np.asarray(center) + off * n - half * t
    b = np.asarray(center) + off * n + half * t
    seg = np.array([[a, b]])
    d1 = _points_to_segments_min(local_pts, seg).max() if len(local_pts) else np.inf
    lam = np.linspace(0.0, 1.0, chord_samples)[:, None]
    chord_pts = a + lam * (b - a)
    d2 = _points_to_segments_min(chord_pts, clipped).max()
    return float(max(d1, d2))


def _golden_min(fn, lo: float, hi: float, iters: int = 18):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(iters):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = fn(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = fn(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _best_line(domain: PolygonalDomain, boundary: np.ndarray, center, r: float,
               angular_resolution: int, through_center: bool = False):
    """(eps_hat, theta, offset) of the Hausdorff-minimizing chord in B(center, r)."""
    center = np.asarray(center, dtype=float)
    rel = boundary - center
    inside = np.einsum("ij,ij->i", rel, rel) <= r * r
    pts = boundary[inside]
    clipped = _clip_edges_to_ball(domain, center, r)
    if len(pts) < 2 or len(clipped) == 0:
        raise GeometryError("ball contains too little boundary to fit a line")

    thetas = np.pi * np.arange(angular_resolution) / angular_resolution
    if through_center:
        offsets = np.array([0.0])
    else:
        n_off = max(9, angular_resolution // 4 + 1)
        offsets = np.linspace(-0.7 * r, 0.7 * r, n_off)
    # cheap score: directed sup distance to the infinite line + coverage penalty
    nx, ny = np.cos(thetas), np.sin(thetas)
    rel_in = rel[inside]
    proj_n = rel_in @ np.stack([nx, ny])          # (npts, ntheta)
    proj_t = rel_in @ np.stack([-ny, nx])         # (npts, ntheta)
    pn_max, pn_min = proj_n.max(axis=0), proj_n.min(axis=0)
    pt_max, pt_min = proj_t.max(axis=0), proj_t.min(axis=0)
    best_cells = []
    for k in range(len(thetas)):
        sup_perp = np.maximum(pn_max[k] - offsets, offsets - pn_min[k])
        half = np.sqrt(np.maximum(r * r - offsets**2, 0.0))
        coverage = np.maximum(np.maximum(pt_min[k] + half, half - pt_max[k]), 0.0)
        score = np.maximum(sup_perp, coverage)
        j = int(np.argmin(score))
        best_cells.append((float(score[j]), float(thetas[k]), float(offsets[j])))
    best_cells.sort(key=lambda x: x[0])

    def exact(theta, off):
        return _chord_hausdorff(pts, clipped, center, r, theta, off)

    d_theta = np.pi / angular_resolution
    d_off = (offsets[1] - offsets[0]) if len(offsets) > 1 else 0.0
    best = (np.inf, 0.0, 0.0)
    for _, th0, of0 in best_cells[:6]:
        th, of = th0, of0
        val = exact(th, of)
        for _ in range(2):
            th, val = _golden_min(lambda x: exact(x, of), th - d_theta, th + d_theta)
            if not through_center:
                of, val = _golden_min(lambda x: exact(th, x), of - d_off, of + d_off)
        if val < best[0]:
            best = (val, th, of)
    return best[0] / r, best[1], best[2]


def _separation_ok(domain: PolygonalDomain, boundary: np.ndarray, center, r0: float,
                   angular_resolution: int) -> bool:
    """Two-sided separation at scale r0 with the best line through the center."""
    center = np.asarray(center, dtype=float)
    try:
        eps0, theta, _ = _best_line(domain, boundary, center, r0, angular_resolution,
                                    through_center=True)
    except GeometryError:
        return False
    n = np.array([math.cos(theta), math.sin(theta)])
    margin = max(2.0 * eps0 * r0, r0 / 50.0)
    if margin >= 0.98 * r0:
        return False
    rad = np.linspace(0.05 * r0, 0.98 * r0, 14)
    ang = 2 * np.pi * np.arange(48) / 48
    probes = center + np.stack([np.outer(rad, np.cos(ang)).ravel(),
                                np.outer(rad, np.sin(ang)).ravel()], axis=1)
    s = (probes - center) @ n
    plus = probes[s >= margin]
    minus = probes[s <= -margin]
    if len(plus) == 0 or len(minus) == 0:
        return False
    in_plus = domain.contains_many(plus)
    in_minus = domain.contains_many(minus)
    return bool((in_plus.all() and not in_minus.any())
                or (in_minus.all() and not in_plus.any()))
