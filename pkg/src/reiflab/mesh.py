"""Background-grid triangulation of polygonal domains and local refinement.

The mesher lays a regular grid fitted to the bounding box (cell counts are
integers, so axis-aligned boxes mesh exactly), splits cells into right
triangles, snaps near-boundary nodes onto the polygon and keeps triangles
that sit inside the domain. A conformity pass projects any remaining rim
vertex onto the boundary so the topological rim always lies on the polygon.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import PolygonalDomain

_MIN_ANGLE_DEG = 10.0
_SNAP_FACTOR = 0.3
_MAX_EDGE_FACTOR = 1.5


class MeshError(ValueError):
    pass


@dataclass
class TriMesh:
    """Conforming triangle mesh with per-vertex boundary flags."""

    points: np.ndarray      # (nv, 2)
    triangles: np.ndarray   # (nt, 3) int, CCW
    is_boundary: np.ndarray  # (nv,) bool

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def h(self) -> float:
        """Maximum edge length, recomputed."""
        return float(self.edge_lengths().max())

    def edge_lengths(self) -> np.ndarray:
        p = self.points[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2).ravel()

    def triangle_areas(self) -> np.ndarray:
        p = self.points[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.points[self.triangles].mean(axis=1)

    def min_angles(self) -> np.ndarray:
        return np.degrees(_tri_min_angles(self.points[self.triangles]))

    def boundary_edges(self) -> np.ndarray:
        counts = _edge_counts(self.triangles)
        return np.array([e for e, c in counts.items() if c == 1], dtype=int)

    def validate(self) -> None:
        areas = self.triangle_areas()
        if not (areas > 0).all():
            raise MeshError(f"{np.count_nonzero(areas <= 0)} triangles have non-positive area")
        h = self.h
        from scipy.spatial import cKDTree
        tree = cKDTree(self.points)
        pairs = tree.query_pairs(1e-12 * h)
        if pairs:
            raise MeshError(f"coincident points: {sorted(pairs)[:3]}")
        counts = _edge_counts(self.triangles)
        if max(counts.values()) > 2:
            raise MeshError("an edge is shared by more than two triangles")
        rim = {v for e, c in counts.items() if c == 1 for v in e}
        if not all(self.is_boundary[v] for v in rim):
            raise MeshError("a rim vertex is not flagged boundary")

    # -- io: OFF-style text with a boundary-flag block ------------------------

    def save_off(self, path) -> None:
        lines = ["OFF", f"{self.n_points} {self.n_triangles} 0"]
        lines += [f"{float(x)!r} {float(y)!r} 0.0" for x, y in self.points]
        lines += [f"3 {a} {b} {c}" for a, b, c in self.triangles]
        lines.append("BOUNDARY")
        lines.append(" ".join("1" if b else "0" for b in self.is_boundary))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load_off(cls, path) -> "TriMesh":
        toks = Path(path).read_text().split("\n")
        if toks[0].strip() != "OFF":
            raise MeshError("not an OFF file")
        nv, nt, _ = (int(x) for x in toks[1].split())
        pts = np.array([[float(x) for x in toks[2 + i].split()[:2]] for i in range(nv)])
        tris = np.array([[int(x) for x in toks[2 + nv + i].split()[1:4]] for i in range(nt)])
        k = 2 + nv + nt
        while toks[k].strip() != "BOUNDARY":
            k += 1
        flags = np.array([c == "1" for c in toks[k + 1].split()])
        return cls(pts, tris, flags)


def _edge_counts(tris: np.ndarray) -> dict:
    counts: dict[tuple[int, int], int] = defaultdict(int)
    for a, b, c in tris:
        for e in ((a, b), (b, c), (c, a)):
            counts[(min(e), max(e))] += 1
    return counts


def _tri_min_angles(p: np.ndarray) -> np.ndarray:
    """Min interior angle (radians) per triangle, p of shape (nt, 3, 2)."""
    angs = []
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        nu = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1) + 1e-300
        c = np.clip(np.einsum("ij,ij->i", u, v) / nu, -1.0, 1.0)
        angs.append(np.arccos(c))
    return np.min(np.stack(angs), axis=0)


def _check_thin_features(domain: PolygonalDomain, h: float) -> None:
    """Refuse domains whose boundary sheets pinch closer than 2h.

    Edge pairs are compared only when they are more than 6h apart in arc
    length, so consecutive fractal wiggles do not trip the check.
    """
    e = domain.edges
    mids = 0.5 * (e[:, 0] + e[:, 1])
    lens = domain.edge_lengths
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    arc = cum[:-1] + 0.5 * lens
    per = domain.perimeter
    a, b = e[:, 0], e[:, 1]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d) + 1e-300
    for lo in range(0, len(mids), 1024):
        p = mids[lo:lo + 1024]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pek,ek->pe", ap, d) / dd[None, :], 0.0, 1.0)
        foot = a[None, :, :] + t[..., None] * d[None, :, :]
        dist = np.linalg.norm(p[:, None, :] - foot, axis=2)
        darc = np.abs(arc[lo:lo + 1024, None] - arc[None, :])
        darc = np.minimum(darc, per - darc)
        bad = (dist < 2.0 * h) & (darc > 6.0 * h)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise MeshError(
                f"domain feature thinner than 2*h: edges {lo + i} and {j} are "
                f"{dist[i, j]:.4g} apart; reduce h_target below {dist[i, j] / 2:.4g}")


def triangulate(domain: PolygonalDomain, h_target: float) -> TriMesh:
    """Background-grid triangulation with boundary snapping.

    Requires h_target <= r0/4 and h_target at most twice the shortest
    polygon edge; refuses domains with features thinner than 2*h_target.
    """
    if h_target > domain.r0 / 4 * (1 + 1e-12):
        raise MeshError(f"h_target = {h_target} exceeds r0/4 = {domain.r0 / 4}")
    lens = domain.edge_lengths
    shortest = int(np.argmin(lens))
    if h_target > 2.0 * lens[shortest]:
        raise MeshError(
            f"h_target = {h_target} exceeds twice the shortest polygon edge "
            f"({shortest}, length {lens[shortest]:.4g})")
    _check_thin_features(domain, h_target)

    lo, hi = domain.bbox
    g0 = h_target / math.sqrt(2.0)
    nx = max(2, int(math.ceil((hi[0] - lo[0]) / g0)))
    ny = max(2, int(math.ceil((hi[1] - lo[1]) / g0)))
    gx = (hi[0] - lo[0]) / nx
    gy = (hi[1] - lo[1]) / ny
    xs = lo[0] + gx * np.arange(nx + 1)
    ys = lo[1] + gy * np.arange(ny + 1)
    px, py = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([px.ravel(), py.ravel()])

    dist, proj = domain.distance_to_boundary(pts, return_projection=True)
    inside = domain.contains_many(pts)

    def node(i, j):
        return i * (ny + 1) + j

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    n00 = node(ii, jj).ravel()
    n10 = node(ii + 1, jj).ravel()
    n11 = node(ii + 1, jj + 1).ravel()
    n01 = node(ii, jj + 1).ravel()
    tris = np.concatenate([np.column_stack([n00, n10, n11]),
                           np.column_stack([n00, n11, n01])])

    # snap near-boundary nodes plus, per cut edge, the endpoint nearer to the
    # boundary: this puts the topological rim on the polygon without violent
    # late projections
    edges = np.unique(np.sort(np.concatenate(
        [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1), axis=0)
    cut = edges[inside[edges[:, 0]] != inside[edges[:, 1]]]
    nearer = np.where(dist[cut[:, 0]] <= dist[cut[:, 1]], cut[:, 0], cut[:, 1])
    snap = dist <= _SNAP_FACTOR * h_target
    snap[nearer] = True
    pts = np.where(snap[:, None], proj, pts)
    on_bd = snap.copy()
    alive = inside | snap
    tris = tris[alive[tris].all(axis=1)]

    # cleanup loop: collapse slivers by welding their shortest edge, drop
    # irreparable triangles, project any rim vertex left off the boundary
    from scipy.spatial import cKDTree
    area_floor = 1e-12 * gx * gy
    min_angle = math.radians(_MIN_ANGLE_DEG)
    max_edge = _MAX_EDGE_FACTOR * h_target
    short_cap = 0.55 * min(gx, gy)
    for _ in range(60):
        used = np.unique(tris)
        weld = [(used[i], used[j]) for i, j in
                sorted(cKDTree(pts[used]).query_pairs(1e-9 * h_target))]
        coords = pts[tris]
        angles = _tri_min_angles(coords)
        drop = np.zeros(len(tris), dtype=bool)
        for t in np.flatnonzero(angles < min_angle):
            tri = tris[t]
            lens = [(math.dist(pts[tri[k]], pts[tri[(k + 1) % 3]]), k) for k in range(3)]
            length, k = min(lens)
            if length <= short_cap:
                weld.append((tri[k], tri[(k + 1) % 3]))
            else:
                drop[t] = True
        if weld:
            vert_map = np.arange(len(pts))

            def root(x):
                while vert_map[x] != x:
                    x = vert_map[x]
                return x

            for a, b in weld:
                ra, rb = root(a), root(b)
                if ra == rb:
                    continue
                # fold into the boundary vertex (lower index as a tiebreak)
                if (on_bd[rb] and not on_bd[ra]) or (on_bd[rb] == on_bd[ra] and rb < ra):
                    ra, rb = rb, ra
                vert_map[rb] = ra
            for _ in range(8):
                nxt = vert_map[vert_map]
                if (nxt == vert_map).all():
                    break
                vert_map = nxt
            tris = vert_map[tris]
            tris = tris[(tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2])
                        & (tris[:, 0] != tris[:, 2])]
            drop = np.zeros(len(tris), dtype=bool)
            coords = pts[tris]
        d1 = coords[:, 1] - coords[:, 0]
        d2 = coords[:, 2] - coords[:, 0]
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        keep = ~drop
        keep &= areas > area_floor
        keep &= np.linalg.norm(coords - np.roll(coords, -1, axis=1), axis=2).max(axis=1) <= max_edge
        keep &= domain.contains_many(coords.mean(axis=1))
        tris = tris[keep]
        if len(tris) == 0:
            raise MeshError("triangulation emptied out; h_target too coarse for this domain")
        counts = _edge_counts(tris)
        rim = np.array(sorted({v for e, c in counts.items() if c == 1 for v in e}), dtype=int)
        loose = rim[~on_bd[rim]]
        if keep.all() and len(loose) == 0 and not weld:
            break
        if len(loose):
            _, pr = domain.distance_to_boundary(pts[loose], return_projection=True)
            pts[loose] = pr
            on_bd[loose] = True
    else:
        raise MeshError("mesh conformity pass did not settle")

    # compact vertex numbering
    used = np.unique(tris)
    lookup = np.full(len(pts), -1, dtype=int)
    lookup[used] = np.arange(len(used))
    mesh = TriMesh(points=pts[used].copy(), triangles=lookup[tris],
                   is_boundary=np.zeros(len(used), dtype=bool))
    counts = _edge_counts(mesh.triangles)
    for e, c in counts.items():
        if c == 1:
            mesh.is_boundary[e[0]] = True
            mesh.is_boundary[e[1]] = True
    mesh.validate()
    return mesh


def refine_toward(mesh: TriMesh, x0, levels: int, r0: float | None = None) -> TriMesh:
    """Longest-edge bisection of triangles within 2^{-k} r0 of x0, k = 1..levels.

    Conformity is restored by propagating splits along longest-edge paths.
    levels = 0 returns the mesh unchanged.
    """
    if not 0 <= levels <= 4:
        raise MeshError("levels must lie in [0, 4]")
    if levels == 0:
        return mesh
    x0 = np.asarray(x0, dtype=float)
    if r0 is None:
        lo = mesh.points.min(axis=0)
        hi = mesh.points.max(axis=0)
        r0 = 0.5 * float(np.hypot(*(hi - lo)))

    points = [tuple(p) for p in mesh.points]
    tris: list[tuple[int, int, int] | None] = [tuple(t) for t in mesh.triangles]
    flags = list(mesh.is_boundary)

    def longest_edge(t):
        best, length = None, -1.0
        for k in range(3):
            a, b = t[k], t[(k + 1) % 3]
            d = math.dist(points[a], points[b])
            if d > length:
                best, length = (min(a, b), max(a, b)), d
        return best

    for level in range(1, levels + 1):
        radius = r0 * 2.0 ** (-level)
        marked = []
        for idx, t in enumerate(tris):
            if t is None:
                continue
            if min(math.dist(points[v], x0) for v in t) <= radius:
                marked.append(idx)

        edge_map: dict[tuple[int, int], list[int]] = defaultdict(list)
        for idx, t in enumerate(tris):
            if t is None:
                continue
            for k in range(3):
                e = (min(t[k], t[(k + 1) % 3]), max(t[k], t[(k + 1) % 3]))
                edge_map[e].append(idx)

        def split_pair(e):
            """Bisect edge e in every triangle containing it (1 or 2)."""
            owners = [i for i in edge_map[e] if tris[i] is not None]
            a, b = e
            mid = ((points[a][0] + points[b][0]) / 2.0, (points[a][1] + points[b][1]) / 2.0)
            m = len(points)
            points.append(mid)
            flags.append(len(owners) == 1 and flags[a] and flags[b])
            for i in owners:
                t = tris[i]
                apex = next(v for v in t if v not in e)
                k = t.index(apex)
                v1, v2 = t[(k + 1) % 3], t[(k + 2) % 3]  # ordered edge, CCW kept
                tris[i] = None
                for child in ((apex, v1, m), (apex, m, v2)):
                    tris.append(child)
                    ci = len(tris) - 1
                    for kk in range(3):
                        ee = (min(child[kk], child[(kk + 1) % 3]),
                              max(child[kk], child[(kk + 1) % 3]))
                        edge_map[ee].append(ci)
            return m

        work = list(marked)
        guard = 0
        while work:
            guard += 1
            if guard > 100 * (len(tris) + 1):
                raise MeshError("longest-edge propagation did not terminate")
            idx = work.pop()
            if tris[idx] is None:
                continue
            e = longest_edge(tris[idx])
            owners = [i for i in edge_map[e] if tris[i] is not None and i != idx]
            nb = owners[0] if owners else None
            if nb is not None and longest_edge(tris[nb]) != e:
                work.append(idx)
                work.append(nb)
                continue
            split_pair(e)

    new_tris = np.array([t for t in tris if t is not None], dtype=int)
    out = TriMesh(points=np.array(points), triangles=new_tris,
                  is_boundary=np.array(flags, dtype=bool))
    out.validate()
    return out
