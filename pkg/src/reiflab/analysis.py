"""Decay-rate, Campanato and Hölder diagnostics on solved fields."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import ScalarField, SourceTerm
from .functional import _BallQuad


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    radii: np.ndarray
    energies: np.ndarray
    degenerate: bool = False


def geometric_radii(rmin: float, rmax: float, per_octave: int = 2) -> np.ndarray:
    """Geometric radius ladder with 2^(1/per_octave) spacing, endpoints included."""
    if not 0 < rmin < rmax:
        raise ValueError("need 0 < rmin < rmax")
    n = max(1, int(math.floor(per_octave * math.log2(rmax / rmin) + 1e-9)))
    return rmax * 2.0 ** (-np.arange(n, -1, -1) / per_octave)


def energy_decay_fit(u: ScalarField, x0, radii, r0: float | None = None) -> DecayFit:
    """Least-squares slope of log energy in B(x0, r) against log r.

    Radii must number at least 4 and, when r0 is given, stay within r0/6;
    they should also exceed ~4 local mesh sizes to mean anything.
    """
    radii = np.asarray(sorted(float(r) for r in np.atleast_1d(radii)))
    if len(radii) < 4:
        raise ValueError("need at least 4 radii for a decay fit")
    if r0 is not None and radii[-1] > r0 / 6 * (1 + 1e-12):
        raise ValueError(f"radii must stay within r0/6 = {r0 / 6}")
    quad = _BallQuad(u, x0, radii[-1], depth=3, radii=radii)
    energies = quad.energy_fn(dim=2)(radii)
    if (energies <= 0).any():
        return DecayFit(slope=float("nan"), intercept=float("nan"), radii=radii,
                        energies=energies, degenerate=True)
    slope, intercept = np.polyfit(np.log(radii), np.log(energies), 1)
    return DecayFit(slope=float(slope), intercept=float(intercept),
                    radii=radii, energies=energies)


def campanato_seminorm(u: ScalarField, lam: float, centers, radii,
                       depth: int = 2) -> float:
    """sup over (center, r) of r^{-lam} int_{B∩Ω} |u - mean_{B∩Ω} u| dx.

    The mean is intrinsic (same clipped quadrature as the integral), so a
    constant field scores exactly zero.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(sorted(float(r) for r in np.atleast_1d(radii)))
    if radii[0] <= 0:
        raise ValueError("radii must be positive")
    best = 0.0
    for c in centers:
        quad = _BallQuad(u, c, radii[-1], depth=depth, radii=radii)
        for r in radii:
            m = quad.dist <= r
            if not m.any():
                continue
            a = quad.area[m]
            uv = quad.u_mid[m]
            mean = float(np.dot(a, uv)) / float(a.sum())
            val = float(np.dot(a, np.abs(uv - mean))) / r**lam
            best = max(best, val)
    return best


@dataclass(frozen=True)
class HolderFit:
    alpha_hat: float
    c_hat: float
    separations: np.ndarray
    oscillations: np.ndarray
    degenerate: bool = False


def holder_exponent_fit(u: ScalarField, center, radius: float,
                        pair_budget: int = 4000, seed: int = 0,
                        n_bins: int = 7, min_sep: float | None = None) -> HolderFit:
    """Estimate the Hölder exponent from binned sup oscillations of vertex pairs.

    Vertex pairs inside B(center, radius) are drawn with a seeded generator,
    binned by dyadic separation, and the slope of log sup|u(x) - u(y)| per
    bin against log separation is the exponent estimate. C_hat is the
    largest oscillation quotient at that exponent.
    """
    from scipy.spatial import cKDTree

    if pair_budget < 1000:
        raise ValueError("pair_budget must be >= 1000")
    center = np.asarray(center, dtype=float)
    sel = np.flatnonzero(np.linalg.norm(u.mesh.points - center, axis=1) <= radius)
    if len(sel) < 10:
        raise ValueError("region contains too few mesh vertices")
    pts = u.mesh.points[sel]
    vals = u.values[sel]
    tree = cKDTree(pts)
    rng = np.random.default_rng(seed)

    if min_sep is None:
        # separations below the local mesh scale carry no information
        in_region = np.zeros(u.mesh.n_points, dtype=bool)
        in_region[sel] = True
        tsel = in_region[u.mesh.triangles].any(axis=1)
        coords = u.mesh.points[u.mesh.triangles[tsel]]
        min_sep = float(np.median(np.linalg.norm(
            coords - np.roll(coords, -1, axis=1), axis=2)))
    smax = radius  # larger separations saturate at the global oscillation
    smin = max(min_sep, smax / 2.0**n_bins)
    edges = smax * 2.0 ** (-np.arange(n_bins, -1, -1, dtype=float))
    edges = edges[edges >= smin * (1 - 1e-12)]
    if len(edges) < 4:
        raise ValueError("separation range too narrow for a fit")

    per_bin = max(200, pair_budget // (len(edges) - 1))
    min_anchors = 24
    seps, sups = [], []
    all_sep, all_osc = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        # the sup oscillation usually involves an extreme value: anchor there first
        order = np.concatenate([[int(np.argmin(vals)), int(np.argmax(vals))],
                                rng.permutation(len(pts))])
        sup = 0.0
        used = 0
        for n_anchor, a in enumerate(order):
            nb = np.asarray(tree.query_ball_point(pts[a], hi), dtype=int)
            d = np.linalg.norm(pts[nb] - pts[a], axis=1)
            keep = (d >= lo) & (nb != a)
            if keep.any():
                osc = np.abs(vals[nb[keep]] - vals[a])
                sup = max(sup, float(osc.max()))
                all_sep.append(d[keep])
                all_osc.append(osc)
                used += int(np.count_nonzero(keep))
            if used >= per_bin and n_anchor + 1 >= min_anchors:
                break
        if used >= 5:
            seps.append(math.sqrt(lo * hi))
            sups.append(sup)
    seps = np.asarray(seps)
    sups = np.asarray(sups)
    scale = float(np.max(np.abs(vals), initial=0.0))
    if len(seps) < 3 or (sups <= 1e-12 * max(1.0, scale)).any():
        return HolderFit(alpha_hat=float("nan"), c_hat=0.0, separations=seps,
                         oscillations=sups, degenerate=True)
    alpha = float(np.polyfit(np.log(seps), np.log(sups), 1)[0])
    all_sep = np.concatenate(all_sep)
    all_osc = np.concatenate(all_osc)
    c_hat = float(np.max(all_osc / np.maximum(all_sep, 1e-300) ** alpha))
    return HolderFit(alpha_hat=alpha, c_hat=c_hat, separations=seps, oscillations=sups)


@dataclass(frozen=True)
class PsiDecayFit:
    slope: float
    bound_slope: float
    ok: bool
    radii: np.ndarray
    psi_values: np.ndarray
    degenerate: bool = False


def psi_decay_fit(u: ScalarField, f: SourceTerm, x0, p0: float, radii,
                  dim: int = 2) -> PsiDecayFit:
    """Fit the power of psi(r) and compare with the integrable-source bound.

    The bound exponent is (2 p0 - dim)/p0, valid for p0 > dim/2; ``ok``
    records slope >= bound - 0.1.
    """
    if not p0 > dim / 2:
        raise ValueError(f"p0 must exceed dim/2 = {dim / 2}")
    radii = np.asarray(sorted(float(r) for r in np.atleast_1d(radii)))
    quad = _BallQuad(u, x0, radii[-1], f=f, depth=4, radii=radii)
    vals = quad.psi_fn(dim)(radii)
    bound = (2.0 * p0 - dim) / p0
    if (vals <= 0).any():
        return PsiDecayFit(slope=float("nan"), bound_slope=bound, ok=False,
                           radii=radii, psi_values=vals, degenerate=True)
    slope = float(np.polyfit(np.log(radii), np.log(vals), 1)[0])
    return PsiDecayFit(slope=slope, bound_slope=bound, ok=slope >= bound - 0.1,
                       radii=radii, psi_values=vals)


def poincare_ratio(u: ScalarField, centers, radii, depth: int = 2) -> float:
    """sup over balls of int_B |u - mean| / (r^{1+dim/2} sqrt(int_B |grad u|^2)).

    Balls with (numerically) zero gradient energy are skipped; the sup over
    an empty set is reported as 0.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(sorted(float(r) for r in np.atleast_1d(radii)))
    best = 0.0
    energy_floor = 1e-14 * max(1.0, float(np.max(np.abs(u.values)))) ** 2
    for c in centers:
        quad = _BallQuad(u, c, radii[-1], depth=depth, radii=radii)
        for r in radii:
            m = quad.dist <= r
            if not m.any():
                continue
            a = quad.area[m]
            grad_energy = float(np.dot(a, quad.gsq[m]))
            if grad_energy <= energy_floor:
                continue
            uv = quad.u_mid[m]
            mean = float(np.dot(a, uv)) / float(a.sum())
            num = float(np.dot(a, np.abs(uv - mean)))
            best = max(best, num / (r**2 * math.sqrt(grad_energy)))
    return best
