"""Tube and ball invariants of harmonic spaces from the radial density profile.

With v(r) = ω_{n-1} r^{n-1} θ̄(r) the tube about a curve of length l has
volume v·l, area v′·l, total mean curvature -v″·l/(n - 1) and total scalar
curvature (v‴ - 3(n - 1)θ̄″(0)v′)·l; the Ricci curvature is -3θ̄″(0).
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Sequence

import numpy as np
from scipy.special import roots_legendre

from model_spaces import RadialProfile
from riemann import FloatArray, ParameterError, PrecisionWarning, weighted_sum
from sphere_quadrature import sphere_area, unit_ball_volume

from . import TubeInvariants

log = logging.getLogger(__name__)

MAX_PROFILE_ORDER = 3


def _falling(m: int, j: int) -> float:
    return float(math.prod(range(m - j + 1, m + 1))) if j <= m else 0.0


def tube_profile_derivative(profile: RadialProfile, n: int, r: float, k: int = 0) -> float:
    """k-th derivative of v(r) = ω_{n-1} r^{n-1} θ̄(r) by the Leibniz rule."""
    if not 0 <= k <= MAX_PROFILE_ORDER:
        msg = f"v is differentiated up to order {MAX_PROFILE_ORDER}, got {k}"
        raise ParameterError(msg)
    total = 0.0
    for j in range(k + 1):
        power = _falling(n - 1, j)
        if power == 0:
            continue
        total += math.comb(k, j) * power * r ** (n - 1 - j) * profile(r, k - j)
    return unit_ball_volume(n - 1) * total


def harmonic_closed_forms(
    profile: RadialProfile, n: int, r: float, length: float
) -> TubeInvariants:
    if not profile.closed_form:
        warnings.warn(
            f"profile {profile.name} is {profile.provenance}; its derivatives carry fit errors",
            PrecisionWarning,
            stacklevel=2,
        )
        log.warning(f"closed forms from a {profile.provenance} profile")
    v = [tube_profile_derivative(profile, n, r, k) for k in range(4)]
    curvature = profile.second_derivative_at_zero
    ricci = -3 * curvature
    errors: dict[str, float] = {}
    if profile.errors and any(profile.errors):
        errors = {
            "volume": unit_ball_volume(n - 1) * r ** (n - 1) * profile.errors[0] * length,
            "area": _derivative_error(profile, n, r, 1) * length,
            "total_mean_curvature": _derivative_error(profile, n, r, 2) * length / (n - 1),
            "total_scalar_curvature": (
                _derivative_error(profile, n, r, 3)
                + 3 * (n - 1) * abs(curvature) * _derivative_error(profile, n, r, 1)
            )
            * length,
        }
    return TubeInvariants(
        radius=r,
        volume=v[0] * length,
        area=v[1] * length,
        total_mean_curvature=-v[2] * length / (n - 1),
        total_scalar_curvature=(v[3] - 3 * (n - 1) * curvature * v[1]) * length,
        normal_ricci=ricci * v[1] * length,
        mean_curvature_integral=-v[2] * length,
        ambient_scalar=n * ricci * v[1] * length,
        length=length,
        ricci_constant=ricci,
        scalar_constant=n * ricci,
        errors=errors,
    )


def _derivative_error(profile: RadialProfile, n: int, r: float, k: int) -> float:
    total = 0.0
    for j in range(k + 1):
        power = _falling(n - 1, j)
        if power:
            total += math.comb(k, j) * power * r ** (n - 1 - j) * profile.errors[k - j]
    return unit_ball_volume(n - 1) * total


def sphere_area_from_profile(profile: RadialProfile, n: int, r: float) -> float:
    """vol(𝒮_p(r)) = nω_n r^{n-1} θ̄(r)."""
    return sphere_area(n) * r ** (n - 1) * profile(r)


def ball_volume_from_profile(
    profile: RadialProfile, n: int, r: float, order: int = 32
) -> float:
    x, w = roots_legendre(order)
    nodes = 0.5 * r * (x + 1)
    return weighted_sum(0.5 * r * w, [sphere_area_from_profile(profile, n, s) for s in nodes])


def series_coefficients_from_tube(
    radii: Sequence[float],
    volumes: Sequence[float],
    n: int,
    length: float,
    order: int = 4,
) -> tuple[FloatArray, FloatArray]:
    """Even Taylor coefficients a₀, a₂, … of θ̄ from measured tube volumes.

    Fits V/(ω_{n-1} r^{n-1} l) in powers r⁰, r², …, r^order; returns the
    coefficients and their standard errors.
    """
    r = np.asarray(radii, dtype=float)
    y = np.asarray(volumes, dtype=float) / (unit_ball_volume(n - 1) * r ** (n - 1) * length)
    powers = np.arange(0, order + 1, 2)
    if len(r) <= len(powers):
        msg = f"need more than {len(powers)} radii to fit {len(powers)} coefficients"
        raise ParameterError(msg)
    scale = float(np.max(r))
    design = (r[:, None] / scale) ** powers[None, :]
    solution, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ solution
    dof = max(len(r) - len(powers), 1)
    sigma2 = max(float(residual @ residual) / dof, 1e-30)
    covariance = sigma2 * np.linalg.inv(design.T @ design)
    rescale = scale ** (-powers.astype(float))
    return solution * rescale, np.sqrt(np.diag(covariance)) * rescale


def gheysens_vanhecke_expansion(
    n: int, r: float, length: float, tau: float, ricci_tangent: float
) -> float:
    """Two-term small-radius expansion of the total scalar curvature of a geodesic tube."""
    bracket = (n - 2) * (n - 3) - (n - 3) / (6 * (n - 1)) * (
        (n - 4) * tau + (n + 2) * ricci_tangent
    ) * r**2
    return (n - 1) * unit_ball_volume(n - 1) * r ** (n - 4) * bracket * length


def ricci_from_total_scalar_curvature(
    c: float, n: int, r: float, length: float, tau: float
) -> float:
    """Solve the two-term expansion for ρ(γ′) given a measured total scalar curvature."""
    if n < 4:
        msg = f"the expansion determines the axial Ricci curvature only for n >= 4, got {n}"
        raise ParameterError(msg)
    bracket = c / ((n - 1) * unit_ball_volume(n - 1) * r ** (n - 4) * length)
    second = ((n - 2) * (n - 3) - bracket) * 6 * (n - 1) / ((n - 3) * r**2)
    return (second - (n - 4) * tau) / (n + 2)
