"""First Dirichlet eigenvalues of spherical caps and the decay-exponent algebra.

The cap S_t is the part of the unit sphere above height t. In 2-D it is a
circular arc of length pi - 2*arcsin(t) whose first eigenvalue is closed
form; in 3-D the zonal eigenfunction solves u'' + cot(theta) u' + lambda u = 0
and the eigenvalue is found by shooting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

_ARC_EIGEN_FLOOR = 0.25  # (pi / 2*pi)^2: arcs never get longer than the circle


@numba.njit(cache=True)
def _cap_sign_changes(lam: float, theta_end: float, n_dim: int, steps: int) -> int:
    """Count sign changes of the zonal solution on (theta0, theta_end].

    RK4 with a fixed step count on u'' + (n_dim-2) cot(theta) u' + lam u = 0,
    started from the regular series u = 1 - lam theta^2 / (2 (n_dim-1)).
    """
    c = n_dim - 2.0
    theta0 = theta_end * 1e-6
    a = -lam / (2.0 * (n_dim - 1.0))
    u = 1.0 + a * theta0 * theta0
    v = 2.0 * a * theta0
    h = (theta_end - theta0) / steps
    crossings = 0
    prev = u
    th = theta0
    for _ in range(steps):
        # derivative of (u, v): (v, -c*cot(th)*v - lam*u)
        cot1 = math.cos(th) / math.sin(th)
        k1u = v
        k1v = -c * cot1 * v - lam * u
        th2 = th + 0.5 * h
        cot2 = math.cos(th2) / math.sin(th2)
        k2u = v + 0.5 * h * k1v
        k2v = -c * cot2 * (v + 0.5 * h * k1v) - lam * (u + 0.5 * h * k1u)
        k3u = v + 0.5 * h * k2v
        k3v = -c * cot2 * (v + 0.5 * h * k2v) - lam * (u + 0.5 * h * k2u)
        th3 = th + h
        cot3 = math.cos(th3) / math.sin(th3)
        k4u = v + h * k3v
        k4v = -c * cot3 * (v + h * k3v) - lam * (u + h * k3u)
        u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        th = th3
        if u == 0.0 or (u > 0.0) != (prev > 0.0):
            crossings += 1
        prev = u
    return crossings


def cap_eigenvalue(N: int, t: float, steps: int = 10_000, tol: float = 1e-8) -> float:
    """First Dirichlet eigenvalue of the spherical cap S_t for N in {2, 3}."""
    if not -1.0 < t < 1.0:
        raise ValueError(f"t must lie in (-1, 1), got {t}")
    if N == 2:
        arc = math.pi - 2.0 * math.asin(t)
        return (math.pi / arc) ** 2
    if N != 3:
        raise ValueError("cap geometry implemented for N in {2, 3} only")
    theta_end = math.acos(t)
    # bisection on the monotone predicate "u has a zero in (0, theta_end]"
    lo = 0.0
    hi = max(8.0, 1.5 * (2.4048 / theta_end) ** 2)
    while _cap_sign_changes(hi, theta_end, N, steps) < 1:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("cap eigenvalue bracket failed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _cap_sign_changes(mid, theta_end, N, steps) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def beta_from_sigma(N: int, sigma_star: float) -> float:
    """Decay exponent beta = sqrt((N-2)^2 + 4 sigma*) - (N-2), for sigma* in (0, N-1)."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if not 0.0 < sigma_star < N - 1:
        raise ValueError(f"sigma* must lie in (0, {N - 1}), got {sigma_star}")
    return math.sqrt((N - 2) ** 2 + 4.0 * sigma_star) - (N - 2)


def sigma_from_beta(N: int, beta: float) -> float:
    """Inverse of beta_from_sigma: sigma* = (beta/2)(beta/2 + N - 2)."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    return 0.5 * beta * (0.5 * beta + N - 2)


@dataclass(frozen=True)
class CapThreshold:
    """Cap height t* with lambda_1(S_{t*}) = sigma*, and the flatness budget |t*|/2."""

    t_star: float
    eps_max: float
    sigma_star: float
    unconditional: bool = False


def flatness_threshold(N: int, beta: float) -> CapThreshold:
    """Largest boundary flatness for which the slice eigenvalue bound sigma*(beta) holds.

    In 2-D, arc eigenvalues never drop below 1/4, so beta <= 1 needs no
    flatness at all; such thresholds are flagged unconditional with
    eps_max just below the definitional cap of 1/2.
    """
    sigma = sigma_from_beta(N, beta)
    cap = 0.5 - 1e-9
    if N == 2:
        if sigma <= _ARC_EIGEN_FLOOR:
            return CapThreshold(t_star=-1.0, eps_max=cap, sigma_star=sigma, unconditional=True)
        t_star = math.sin(0.5 * (math.pi - math.pi / math.sqrt(sigma)))
        return CapThreshold(t_star=t_star, eps_max=min(abs(t_star) / 2.0, cap), sigma_star=sigma)
    if N != 3:
        raise ValueError("cap geometry implemented for N in {2, 3} only")
    lo, hi = -1.0 + 1e-6, 1.0 - 1e-6
    if cap_eigenvalue(N, lo) >= sigma:
        return CapThreshold(t_star=-1.0, eps_max=cap, sigma_star=sigma, unconditional=True)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if cap_eigenvalue(N, mid) >= sigma:
            hi = mid
        else:
            lo = mid
    t_star = 0.5 * (lo + hi)
    return CapThreshold(t_star=t_star, eps_max=min(abs(t_star) / 2.0, cap), sigma_star=sigma)
