"""Exponent arithmetic tying integrability of the data to the Hölder exponent.

All routines are total: out-of-range inputs produce flagged results rather
than exceptions (except where a hard rejection is specified), so parameter
tables over grids stay complete.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import eigen


@dataclass(frozen=True)
class ExponentBundle:
    """The full exponent chain for one (N, p, q, alpha) choice.

    p0 is the harmonic combination 1/p + 1/q = 1/p0; validity requires
    p0 > N/2 and alpha below the critical (p0 - N/2)/p0. beta = 2*alpha,
    sigma* = (beta/2)(beta/2 + N - 2), and (t_star, eps_max) come from the
    cap geometry (N in {2, 3} only; None otherwise).
    """

    N: int
    p: float
    q: float
    p0: float
    alpha: float
    beta: float
    sigma_star: float
    t_star: float | None
    eps_max: float | None
    valid: bool
    reason: str = ""
    unconditional: bool = False

    @property
    def alpha_max(self) -> float:
        """Critical exponent (p0 - N/2)/p0; negative when nothing is admissible."""
        if math.isinf(self.p0):
            return 1.0
        return (self.p0 - self.N / 2) / self.p0


def bundle_from_pq(N: int, p: float, q: float, alpha: float) -> ExponentBundle:
    """Assemble and validate the exponent chain for given integrabilities.

    ``p`` and ``q`` may be math.inf. Invalid combinations come back flagged
    with a reason, never raised.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if p < 1 or q < 1:
        raise ValueError("p and q must be >= 1")
    inv = (1.0 / p if math.isfinite(p) else 0.0) + (1.0 / q if math.isfinite(q) else 0.0)
    p0 = 1.0 / inv if inv > 0 else math.inf
    beta = 2.0 * alpha
    valid = True
    reason = ""
    if p0 <= N / 2:
        valid, reason = False, "p0 <= N/2"
    elif not 0.0 < alpha < (p0 - N / 2) / p0:
        valid, reason = False, "alpha outside (0, (p0 - N/2)/p0)"
    sigma = 0.5 * beta * (0.5 * beta + N - 2) if 0.0 < beta < 2.0 else float("nan")
    t_star: float | None = None
    eps_max: float | None = None
    unconditional = False
    if valid and N in (2, 3):
        thr = eigen.flatness_threshold(N, beta)
        t_star, eps_max, unconditional = thr.t_star, thr.eps_max, thr.unconditional
    elif valid:
        reason = "cap geometry restricted to N in {2,3}"
    return ExponentBundle(N=N, p=float(p), q=float(q), p0=p0, alpha=alpha, beta=beta,
                          sigma_star=sigma, t_star=t_star, eps_max=eps_max,
                          valid=valid, reason=reason, unconditional=unconditional)


@dataclass(frozen=True)
class Cor1Result:
    alpha_max: float
    q_admissible: bool
    n_admissible: bool


def alpha_max_cor1(N: int, q: float) -> Cor1Result:
    """Critical Hölder exponent 1 - (N/2)((N-2)/(2N) + 1/q) with the I_N check.

    I_2 = [2, inf); I_N = (2N/(6-N), inf) for 3 <= N <= 5; empty otherwise.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    inv_q = 1.0 / q if math.isfinite(q) else 0.0
    alpha_max = 1.0 - (N / 2.0) * ((N - 2.0) / (2.0 * N) + inv_q)
    n_ok = 2 <= N <= 5
    if N == 2:
        q_ok = q >= 2.0
    elif n_ok:
        q_ok = q > 2.0 * N / (6.0 - N)
    else:
        q_ok = False
    return Cor1Result(alpha_max=alpha_max, q_admissible=q_ok, n_admissible=n_ok)


@dataclass(frozen=True)
class Cor2Result:
    alpha_max: float
    r_star: float
    valid: bool
    reason: str = ""


def alpha_max_cor2(N: int, r: float, q: float) -> Cor2Result:
    """Critical exponent 1 - (N/2)(1/r* + 1/q) for divergence-form data in L^r.

    r* = rN/(N-r) for r < N and +inf at r = N. Requires N/3 < r <= N,
    r >= 2 and q > rN/(3r - N); r > N is rejected outright (outside scope).
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if r > N:
        raise ValueError(f"r = {r} exceeds N = {N}: outside the divergence-form range")
    r_star = math.inf if r == N else r * N / (N - r)
    inv_rs = 0.0 if math.isinf(r_star) else 1.0 / r_star
    inv_q = 1.0 / q if math.isfinite(q) else 0.0
    alpha_max = 1.0 - (N / 2.0) * (inv_rs + inv_q)
    if r <= N / 3.0:
        return Cor2Result(alpha_max, r_star, False, "r <= N/3")
    if r < 2.0:
        return Cor2Result(alpha_max, r_star, False, "r < 2")
    if not q > r * N / (3.0 * r - N):
        return Cor2Result(alpha_max, r_star, False, "q <= rN/(3r - N)")
    return Cor2Result(alpha_max, r_star, True)
