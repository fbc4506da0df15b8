"""Independent reference solutions and brute-force integrals.

Everything in this module is used to certify the heavier machinery
elsewhere in the package, so it deliberately imports nothing from the
other modules (a unit test enforces the layering).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class RadialSolution:
    """Radial Dirichlet solution of -div(rho^{N-1} u') = rho^{N-1} f on (0, R)."""

    N: int
    R: float
    rho: np.ndarray
    u: np.ndarray
    du: np.ndarray
    f: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def u_at(self, r):
        return np.interp(r, self.rho, self.u)

    def du_at(self, r):
        return np.interp(r, self.rho, self.du)

    def __call__(self, points: np.ndarray, center=(0.0, 0.0)) -> np.ndarray:
        """Evaluate at 2-D points as u(|x - center|)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
        return self.u_at(r)

    def ode_residual(self, lo: float = 0.1, hi: float = 0.95) -> float:
        """Max residual of (rho^{N-1} u')' + rho^{N-1} f on [lo*R, hi*R]."""
        i0 = np.searchsorted(self.rho, lo * self.R)
        i1 = np.searchsorted(self.rho, hi * self.R)
        rho = self.rho[i0:i1]
        flux = rho ** (self.N - 1) * self.du[i0:i1]
        dflux = np.gradient(flux, rho)[2:-2]  # one-sided end stencils are low order
        rho = rho[2:-2]
        return float(np.max(np.abs(dflux + rho ** (self.N - 1) * self.f(rho))))


def radial_poisson(N: int, R: float, f_radial, grid: int = 200_000) -> RadialSolution:
    """Solve -Laplace(u) = f(|x|) on the ball B(0, R) with u = 0 on the boundary.

    ``f_radial`` may be a constant (closed form u = (R^2 - rho^2)/(2N)) or a
    callable of rho, in which case the two nested integrals are evaluated by
    a midpoint/trapezoid pass on a fine grid.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if np.isscalar(f_radial):
        c = float(f_radial)
        rho = np.linspace(0.0, R, 4097)
        u = c * (R**2 - rho**2) / (2 * N)
        du = -c * rho / N
        return RadialSolution(N, R, rho, u, du, f=lambda r: np.full_like(np.asarray(r, dtype=float), c))

    f = f_radial
    rho = np.linspace(0.0, R, grid + 1)
    h = R / grid
    mid = 0.5 * (rho[:-1] + rho[1:])
    # F(rho) = int_0^rho t^{N-1} f(t) dt, midpoint rule (tolerates an
    # integrable singularity at 0)
    F = np.concatenate([[0.0], np.cumsum(f(mid) * mid ** (N - 1) * h)])
    du = np.zeros_like(rho)
    du[1:] = -F[1:] / rho[1:] ** (N - 1)
    # u(rho) = -int_rho^R u'(s) ds, trapezoid from the outside in
    seg = 0.5 * (du[:-1] + du[1:]) * h
    u = -np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    return RadialSolution(N, R, rho, u, du, f=f)


def square_series_solution(x: float, y: float, terms: int = 200):
    """Double-sine series for -Laplace(u) = 1 on the unit square, u = 0 on the edges.

    ``terms`` odd frequencies are used per direction. Returns (value, bound)
    where bound is a crude upper estimate of the truncation error.
    """
    if terms < 50:
        raise ValueError("terms must be >= 50")
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError("point must lie in the closed unit square")
    m = np.arange(1, 2 * terms, 2, dtype=float)  # odd frequencies
    sx = np.sin(np.pi * m * x)
    sy = np.sin(np.pi * m * y)
    denom = m[:, None] * m[None, :] * (m[:, None] ** 2 + m[None, :] ** 2)
    coef = 16.0 / np.pi**4
    value = coef * float(sx @ (1.0 / denom) @ sy)
    mmax = m[-1]
    # tail: sum_{m>mmax} 1/(m n (m^2+n^2)) <= sum_{m>mmax} 1/m^3 * sum_n 1/n <= C/mmax^2
    bound = coef * 4.0 / mmax**2
    return value, bound


@dataclass
class QuadResult:
    value: float
    error_estimate: float
    converged: bool


def brute_quadrature(integrand, center, radius: float, contains=None,
                     depth: int = 8, rel_tol: float = 1e-7) -> QuadResult:
    """Adaptive cell quadrature of ``integrand`` over B(center, radius) [∩ Ω].

    ``contains``, if given, is a vectorized predicate marking points of the
    domain Ω. Cells straddling the region boundary, or where a one-vs-four
    midpoint Richardson check disagrees, are subdivided down to ``depth``
    levels; leaf cells straddling the boundary are weighted by a 4x4
    subsample fraction. Returns the value with a Richardson-style error
    accumulator and a convergence flag.
    """
    cx, cy = float(center[0]), float(center[1])
    r = float(radius)

    def inside(px, py):
        m = (px - cx) ** 2 + (py - cy) ** 2 <= r * r
        if contains is not None:
            pts = np.column_stack([px.ravel(), py.ravel()])
            m = m & contains(pts).reshape(px.shape)
        return m

    sub = np.linspace(-0.5 + 1 / 16, 0.5 - 1 / 16, 8)
    sub_x, sub_y = np.meshgrid(sub, sub)

    total = 0.0
    err = 0.0
    ok = True
    # iterative stack: (x0, y0, size, level)
    stack = [(cx - r, cy - r, 2 * r, 0)]
    while stack:
        x0, y0, s, lev = stack.pop()
        half = 0.5 * s
        # corner + center probes for in/out classification
        px = np.array([x0, x0 + s, x0, x0 + s, x0 + half])
        py = np.array([y0, y0, y0 + s, y0 + s, y0 + half])
        # conservative circle test first
        dx = np.maximum(np.abs(np.array([x0 + half]) - cx) - half, 0.0)
        dy = np.maximum(np.abs(np.array([y0 + half]) - cy) - half, 0.0)
        if dx**2 + dy**2 > r * r:
            continue  # cell entirely outside the ball
        flags = inside(px, py)
        area = s * s
        cxm, cym = x0 + half, y0 + half
        if lev >= depth:
            fx = cxm + sub_x * s
            fy = cym + sub_y * s
            m = inside(fx, fy)
            frac = float(np.count_nonzero(m)) / 64.0
            if frac > 0:
                vals = np.asarray(integrand(np.column_stack([fx[m], fy[m]])), dtype=float)
                vals = vals[np.isfinite(vals)]
                if vals.size:
                    total += area * frac * float(np.mean(vals))
                    err += area * frac * abs(float(np.mean(vals))) * 0.25
            continue
        if not flags.any():
            # corners all out; still may clip a sliver - recurse a bit
            if lev < depth:
                for ix in (0, 1):
                    for iy in (0, 1):
                        stack.append((x0 + ix * half, y0 + iy * half, half, lev + 1))
            continue
        if flags.all():
            v1 = float(np.asarray(integrand(np.array([[cxm, cym]])), dtype=float)[0])
            qx = np.array([x0 + 0.25 * s, x0 + 0.75 * s, x0 + 0.25 * s, x0 + 0.75 * s])
            qy = np.array([y0 + 0.25 * s, y0 + 0.25 * s, y0 + 0.75 * s, y0 + 0.75 * s])
            v4 = np.asarray(integrand(np.column_stack([qx, qy])), dtype=float)
            if np.all(np.isfinite(v4)) and np.isfinite(v1):
                i1 = area * v1
                i4 = area * float(np.mean(v4))
                if abs(i4 - i1) <= rel_tol * (abs(i4) + 1e-300) or lev >= depth - 1:
                    total += i4
                    err += abs(i4 - i1) / 3.0
                    continue
        for ix in (0, 1):
            for iy in (0, 1):
                stack.append((x0 + ix * half, y0 + iy * half, half, lev + 1))

    if not np.isfinite(total):
        ok = False
    return QuadResult(float(total), float(err), ok)
