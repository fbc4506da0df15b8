"""P1 finite elements for -Laplace(u) = f with zero Dirichlet data.

Assembly is vectorized over triangles with a fixed-order scatter, the
solver is plain conjugate gradients with a Jacobi preconditioner, and the
load vector uses the 3-point edge-midpoint rule (subdivided near a source
singularity). The discrete energy identity u'Ku = b'u holds up to the
solver residual and is checked after every solve.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix

from .mesh import TriMesh


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


# ---------------------------------------------------------------------------
# source terms


@dataclass(frozen=True)
class SourceTerm:
    """Right-hand side f: constant, radial power |x-c|^{-s}, or a smooth bump."""

    kind: str
    value: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    exponent: float = 0.0
    radius: float = 1.0

    @classmethod
    def constant(cls, c: float) -> "SourceTerm":
        return cls(kind="constant", value=float(c))

    @classmethod
    def radial_power(cls, center, s: float) -> "SourceTerm":
        if s < 0:
            raise ValueError("exponent must be >= 0")
        return cls(kind="radial_power", center=(float(center[0]), float(center[1])),
                   exponent=float(s))

    @classmethod
    def bump(cls, center, radius: float, height: float) -> "SourceTerm":
        return cls(kind="bump", center=(float(center[0]), float(center[1])),
                   radius=float(radius), value=float(height))

    @property
    def singular(self) -> bool:
        return self.kind == "radial_power" and self.exponent > 0

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "constant":
            return np.full(len(pts), self.value)
        r = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        if self.kind == "radial_power":
            with np.errstate(divide="ignore"):
                return r ** (-self.exponent)
        if self.kind == "bump":
            t2 = (r / self.radius) ** 2
            out = np.zeros(len(pts))
            m = t2 < 1.0
            out[m] = self.value * np.exp(1.0 - 1.0 / (1.0 - t2[m]))
            return out
        raise ValueError(f"unknown source kind {self.kind!r}")

    def check_integrability(self, q: float, dim: int = 2) -> None:
        """radial_power needs s*q < dim for a finite L^q norm on bounded sets."""
        if self.kind == "radial_power" and self.exponent * q >= dim:
            raise ValueError(
                f"|x|^-{self.exponent} is not in L^{q} near the center (s*q >= {dim})")

    def lq_norm(self, mesh: TriMesh, q: float) -> float:
        """L^q norm over the mesh by the same triangle quadrature as the load."""
        self.check_integrability(q)
        if self.kind == "constant":
            return abs(self.value) * float(mesh.triangle_areas().sum()) ** (1.0 / q)
        coords = mesh.points[mesh.triangles]
        areas = mesh.triangle_areas()
        total = 0.0
        for sub_coords, sub_areas in _quadrature_pieces(coords, areas, self, mesh):
            mids = 0.5 * (sub_coords + np.roll(sub_coords, -1, axis=1)).reshape(-1, 2)
            vals = np.abs(self(mids)) ** q
            total += float(np.dot(np.repeat(sub_areas / 3.0, 3), vals.reshape(-1)))
        return total ** (1.0 / q)


def _subdivide(coords: np.ndarray, levels: int) -> np.ndarray:
    """Uniform 4-way midpoint refinement of (n, 3, 2) triangles, applied ``levels`` times."""
    for _ in range(levels):
        p0, p1, p2 = coords[:, 0], coords[:, 1], coords[:, 2]
        m01, m12, m20 = 0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)
        coords = np.concatenate([
            np.stack([p0, m01, m20], axis=1),
            np.stack([m01, p1, m12], axis=1),
            np.stack([m20, m12, p2], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ])
    return coords


def _quadrature_pieces(coords, areas, f: SourceTerm, mesh: TriMesh):
    """Yield (triangle coords, areas) groups, subdividing near a singular source."""
    if not f.singular:
        yield coords, areas
        return
    h = mesh.h
    c = np.asarray(f.center)
    dmin = np.min(np.linalg.norm(coords - c, axis=2), axis=1)
    near = dmin < 3.0 * h
    if (~near).any():
        yield coords[~near], areas[~near]
    if near.any():
        sub = _subdivide(coords[near], 2)
        yield sub, np.repeat(areas[near] / 16.0, 16)


# ---------------------------------------------------------------------------
# fields


@dataclass
class ScalarField:
    """Nodal values over a TriMesh; gradients are constant per triangle."""

    mesh: TriMesh
    values: np.ndarray
    solver_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != self.mesh.n_points:
            raise ValueError("one value per mesh vertex required")
        if not np.isfinite(self.values).all():
            raise ValueError("field values must be finite")
        self._grads = None
        self._locator = None

    @classmethod
    def from_function(cls, mesh: TriMesh, fn) -> "ScalarField":
        return cls(mesh, np.asarray(fn(mesh.points), dtype=float))

    def gradients(self) -> np.ndarray:
        """(nt, 2) constant P1 gradient per triangle."""
        if self._grads is None:
            p = self.mesh.points[self.mesh.triangles]
            v = self.values[self.mesh.triangles]
            areas = self.mesh.triangle_areas()
            # grad phi_i = rot90(edge opposite i) / (2A)
            b = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1],
                          p[:, 0, 1] - p[:, 1, 1]], axis=1)
            c = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0],
                          p[:, 1, 0] - p[:, 0, 0]], axis=1)
            gx = np.einsum("ti,ti->t", v, b) / (2 * areas)
            gy = np.einsum("ti,ti->t", v, c) / (2 * areas)
            self._grads = np.stack([gx, gy], axis=1)
        return self._grads

    def dirichlet_energy(self) -> float:
        g = self.gradients()
        return float(np.sum(self.mesh.triangle_areas() * np.einsum("ij,ij->i", g, g)))

    def lp_norm(self, p: float) -> float:
        coords = self.mesh.points[self.mesh.triangles]
        v = self.values[self.mesh.triangles]
        vm = 0.5 * (v + np.roll(v, -1, axis=1))
        w = np.repeat(self.mesh.triangle_areas() / 3.0, 3)
        return float(np.dot(w, (np.abs(vm) ** p).ravel()) ** (1.0 / p))

    def eval(self, pts: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Barycentric interpolation; points outside the mesh get ``fill``."""
        tri, bary = self.locate(pts)
        out = np.full(len(np.atleast_2d(pts)), fill, dtype=float)
        ok = tri >= 0
        out[ok] = np.einsum("pk,pk->p", self.values[self.mesh.triangles[tri[ok]]], bary[ok])
        return out

    def locate(self, pts: np.ndarray):
        if self._locator is None:
            self._locator = _TriLocator(self.mesh)
        return self._locator.locate(np.atleast_2d(np.asarray(pts, dtype=float)))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex", "x", "y", "u"])
            for i, ((x, y), u) in enumerate(zip(self.mesh.points, self.values)):
                w.writerow([i, repr(float(x)), repr(float(y)), repr(float(u))])


class _TriLocator:
    """Uniform-bin point location over a triangle mesh."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self.lo = mesh.points.min(axis=0)
        hi = mesh.points.max(axis=0)
        self.cell = max(mesh.h, 1e-12)
        self.nx = int((hi[0] - self.lo[0]) / self.cell) + 1
        self.ny = int((hi[1] - self.lo[1]) / self.cell) + 1
        self.bins: dict[tuple[int, int], list[int]] = {}
        coords = mesh.points[mesh.triangles]
        tlo = ((coords.min(axis=1) - self.lo) / self.cell).astype(int)
        thi = ((coords.max(axis=1) - self.lo) / self.cell).astype(int)
        for t in range(len(coords)):
            for ix in range(tlo[t, 0], thi[t, 0] + 1):
                for iy in range(tlo[t, 1], thi[t, 1] + 1):
                    self.bins.setdefault((ix, iy), []).append(t)

    def locate(self, pts: np.ndarray, tol: float = 1e-10):
        tris = self.mesh.points[self.mesh.triangles]
        out_tri = np.full(len(pts), -1, dtype=int)
        out_bary = np.zeros((len(pts), 3))
        for i, p in enumerate(pts):
            ix = int((p[0] - self.lo[0]) / self.cell)
            iy = int((p[1] - self.lo[1]) / self.cell)
            for t in self.bins.get((ix, iy), ()):
                a, b, c = tris[t]
                det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
                l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det
                l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det
                l3 = 1.0 - l1 - l2
                if l1 >= -tol and l2 >= -tol and l3 >= -tol:
                    out_tri[i] = t
                    out_bary[i] = (l1, l2, l3)
                    break
        return out_tri, out_bary


def gradient_field(u: ScalarField) -> np.ndarray:
    """Per-triangle constant gradients of a P1 field."""
    return u.gradients()


# ---------------------------------------------------------------------------
# assembly and solve


def _assemble_stiffness(mesh: TriMesh):
    p = mesh.points[mesh.triangles]
    areas = mesh.triangle_areas()
    b = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1],
                  p[:, 0, 1] - p[:, 1, 1]], axis=1)
    c = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0],
                  p[:, 1, 0] - p[:, 0, 0]], axis=1)
    k_loc = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / (4.0 * areas)[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_points
    return coo_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _assemble_load(mesh: TriMesh, f: SourceTerm) -> np.ndarray:
    fq = f
    if f.singular:
        d, _ = _nearest_vertex(mesh, f.center)
        if d < mesh.h * 1e-6:
            warnings.warn("source singularity sits on a mesh vertex; "
                          "perturbing the evaluation center by h*1e-6")
            fq = SourceTerm(kind=f.kind, value=f.value,
                            center=(f.center[0] + mesh.h * 1e-6,
                                    f.center[1] + mesh.h * 1e-6),
                            exponent=f.exponent, radius=f.radius)
    load = np.zeros(mesh.n_points)
    coords = mesh.points[mesh.triangles]
    areas = mesh.triangle_areas()
    if not fq.singular:
        mids = 0.5 * (coords + np.roll(coords, -1, axis=1))  # m01, m12, m20
        vals = fq(mids.reshape(-1, 2)).reshape(-1, 3)
        # phi_i = 1/2 at the two midpoints of edges adjacent to vertex i
        contrib = (areas / 3.0)[:, None] * 0.5 * (vals + np.roll(vals, 1, axis=1))
        np.add.at(load, mesh.triangles, contrib)
        return load
    # singular source: subdivide nearby triangles, carrying barycentric weights
    c = np.asarray(fq.center)
    dmin = np.min(np.linalg.norm(coords - c, axis=2), axis=1)
    near = dmin < 3.0 * mesh.h
    for group, is_near in ((~near, False), (near, True)):
        if not group.any():
            continue
        tri_idx = np.flatnonzero(group)
        sub = coords[tri_idx]
        bary = np.tile(np.eye(3), (len(tri_idx), 1, 1))  # rows: barycentric of corners
        levels = 2 if is_near else 0
        for _ in range(levels):
            p0, p1, p2 = sub[:, 0], sub[:, 1], sub[:, 2]
            b0, b1, b2 = bary[:, 0], bary[:, 1], bary[:, 2]
            m01, m12, m20 = 0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)
            c01, c12, c20 = 0.5 * (b0 + b1), 0.5 * (b1 + b2), 0.5 * (b2 + b0)
            sub = np.concatenate([np.stack([p0, m01, m20], axis=1),
                                  np.stack([m01, p1, m12], axis=1),
                                  np.stack([m20, m12, p2], axis=1),
                                  np.stack([m01, m12, m20], axis=1)])
            bary = np.concatenate([np.stack([b0, c01, c20], axis=1),
                                   np.stack([c01, b1, c12], axis=1),
                                   np.stack([c20, c12, b2], axis=1),
                                   np.stack([c01, c12, c20], axis=1)])
            tri_idx = np.tile(tri_idx, 4)
        sub_area = np.repeat(areas[np.flatnonzero(group)], 4 ** levels) / 4.0 ** levels
        mids = 0.5 * (sub + np.roll(sub, -1, axis=1))
        mbary = 0.5 * (bary + np.roll(bary, -1, axis=1))
        vals = fq(mids.reshape(-1, 2)).reshape(len(sub), 3)
        w = (sub_area / 3.0)[:, None, None] * vals[:, :, None] * mbary
        np.add.at(load, mesh.triangles[tri_idx], w.sum(axis=1))
    return load


def _nearest_vertex(mesh: TriMesh, p):
    d = np.linalg.norm(mesh.points - np.asarray(p), axis=1)
    i = int(np.argmin(d))
    return float(d[i]), i


def _cg_jacobi(A, b: np.ndarray, rel_tol: float, max_iter: int = 10_000):
    """Jacobi-preconditioned CG with fixed-order reductions (deterministic)."""
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    minv = 1.0 / A.diagonal()
    x = np.zeros_like(b)
    r = b.copy()
    z = minv * r
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        ap = A @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r)) / bnorm
        if res <= rel_tol:
            return x, k, res
        z = minv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach rel_tol={rel_tol} in {max_iter} iterations "
        f"(residual {res:.3e})", iterations=max_iter, residual=res)


def solve_poisson(mesh: TriMesh, f: SourceTerm, rel_tol: float = 1e-10) -> ScalarField:
    """Solve -Laplace(u) = f on the mesh with u = 0 at boundary-flagged vertices."""
    if not 1e-14 <= rel_tol <= 1e-6:
        raise ValueError("rel_tol must lie in [1e-14, 1e-6]")
    K = _assemble_stiffness(mesh)
    b = _assemble_load(mesh, f)
    free = ~mesh.is_boundary
    idx = np.flatnonzero(free)
    Kff = K[idx][:, idx].tocsr()
    x, iters, res = _cg_jacobi(Kff, b[idx], rel_tol)
    values = np.zeros(mesh.n_points)
    values[idx] = x
    u = ScalarField(mesh, values)
    energy = u.dirichlet_energy()
    work = float(b @ values)
    gap = abs(energy - work)
    if energy > 0 and gap > 1e-6 * energy:
        raise ConvergenceError(
            f"energy identity violated: |grad-energy - f.u| = {gap:.3e} "
            f"> 1e-6 * {energy:.3e}", iterations=iters, residual=res)
    u.solver_stats = {"iterations": iters, "residual": res, "n_dofs": int(len(idx)),
                      "energy": energy, "energy_identity_gap": gap}
    return u
