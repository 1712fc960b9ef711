"""Damek–Ricci spaces from J-map data.

The generalized Heisenberg algebra 𝔫 = 𝔳 ⊕ 𝔷 has [V, W] = Σ_j ⟨J_j V, W⟩ Z_j
and is extended by A with [A, V] = V/2, [A, Z] = Z.  Global coordinates
(v, z, t) ∈ ℝ^p × ℝ^q × ℝ carry the left-invariant orthonormal frame

    E_{V_i} = e^{t/2} (∂_{v_i} + ½ Σ_j (J_j v)_i ∂_{z_j}),
    E_{Z_j} = e^{t} ∂_{z_j},
    E_A = ∂_t,

so the connection and curvature in that frame are constants obtained from
the structure constants with the Koszul formula.  Coordinate tensors follow by
a change of frame; nothing is differentiated numerically.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from riemann import ChartMetric, Error, FloatArray

log = logging.getLogger(__name__)

CLIFFORD_TOLERANCE = 1e-12


class AlgebraError(Error):
    pass


def complex_structure(p: int) -> FloatArray:
    j = np.zeros((p, p))
    for i in range(0, p, 2):
        j[i + 1, i] = 1.0
        j[i, i + 1] = -1.0
    return j


def quaternionic_structure(p: int) -> list[FloatArray]:
    # Left multiplication by i, j, k on H = span(1, i, j, k), column = image.
    left_i = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]])
    left_j = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]])
    left_k = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]])
    blocks = p // 4
    return [
        np.kron(np.eye(blocks), unit).astype(float) for unit in (left_i, left_j, left_k)
    ]


def standard_j_maps(p: int, q: int) -> list[FloatArray]:
    if q == 1 and p > 0 and p % 2 == 0:
        return [complex_structure(p)]
    if q == 3 and p > 0 and p % 4 == 0:
        return quaternionic_structure(p)
    msg = (
        f"no built-in J-maps for (p, q) = ({p}, {q}); "
        "supply j_maps or use q = 1 with even p, q = 3 with p divisible by 4"
    )
    raise AlgebraError(msg)


def clifford_residual(j_maps: Sequence[FloatArray]) -> float:
    """max |J_a J_b + J_b J_a + 2 δ_ab Id| over the table."""
    if not j_maps:
        return 0.0
    p = j_maps[0].shape[0]
    worst = 0.0
    for a, ja in enumerate(j_maps):
        for b, jb in enumerate(j_maps):
            target = -2.0 * np.eye(p) if a == b else np.zeros((p, p))
            worst = max(worst, float(np.max(np.abs(ja @ jb + jb @ ja - target))))
    return worst


def validate_j_maps(p: int, q: int, j_maps: Sequence[FloatArray]) -> list[FloatArray]:
    maps = [np.asarray(j, dtype=float) for j in j_maps]
    if len(maps) != q:
        msg = f"expected {q} J-maps, got {len(maps)}"
        raise AlgebraError(msg)
    for j in maps:
        if j.shape != (p, p):
            msg = f"J-maps must be {p}x{p}, got {j.shape}"
            raise AlgebraError(msg)
        if np.max(np.abs(j + j.T)) > CLIFFORD_TOLERANCE:
            msg = "J-maps must be skew-symmetric"
            raise AlgebraError(msg)
    residual = clifford_residual(maps)
    if residual > CLIFFORD_TOLERANCE:
        msg = f"J-maps violate the Clifford relation (residual {residual:.2e})"
        raise AlgebraError(msg)
    return maps


def structure_constants(p: int, q: int, j_maps: Sequence[FloatArray]) -> FloatArray:
    """c[γ, α, β] with [E_α, E_β] = c^γ_αβ E_γ; basis order V, Z, A."""
    n = p + q + 1
    a = n - 1
    c = np.zeros((n, n, n))
    for j, jmap in enumerate(j_maps):
        # ⟨J_j e_i, e_k⟩ = jmap[k, i]
        c[p + j, :p, :p] = jmap.T
    for i in range(p):
        c[i, a, i] = 0.5
        c[i, i, a] = -0.5
    for j in range(q):
        c[p + j, a, p + j] = 1.0
        c[p + j, p + j, a] = -1.0
    return c


def frame_connection(c: FloatArray) -> FloatArray:
    """Γ̃[γ, α, β] with ∇_{E_α} E_β = Γ̃^γ_αβ E_γ for an orthonormal frame."""
    return 0.5 * (
        c - np.einsum("abg->gab", c) + np.einsum("bga->gab", c)
    )


def frame_curvature(c: FloatArray, gamma: FloatArray) -> FloatArray:
    """R̃[ε, γ, α, β] with R(E_α, E_β)E_γ = R̃^ε_γαβ E_ε."""
    return (
        np.einsum("dbg,ead->egab", gamma, gamma)
        - np.einsum("dag,ebd->egab", gamma, gamma)
        - np.einsum("dab,edg->egab", c, gamma)
    )


def damek_ricci_space(
    p: int,
    q: int,
    j_maps: Sequence[Sequence[Sequence[float]]] | None = None,
    bound: float = 50.0,
) -> ChartMetric:
    if p < 1 or q < 1:
        msg = f"Damek–Ricci spaces need p, q >= 1, got ({p}, {q})"
        raise AlgebraError(msg)
    maps = validate_j_maps(
        p,
        q,
        standard_j_maps(p, q)
        if j_maps is None
        else [np.asarray(j, dtype=float) for j in j_maps],
    )
    n = p + q + 1
    c = structure_constants(p, q, maps)
    gamma_frame = frame_connection(c)
    riemann_frame = frame_curvature(c, gamma_frame)
    jstack = np.asarray(maps)
    log.debug(f"Damek–Ricci ({p}, {q}): dimension {n}")

    def _coframe(x: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        v, t = x[:p], x[-1]
        jv = jstack @ v  # jv[j, i] = (J_j v)_i
        half, full = np.exp(-t / 2), np.exp(-t)
        theta = np.zeros((n, n))
        theta[:p, :p] = half * np.eye(p)
        theta[p : p + q, p : p + q] = full * np.eye(q)
        theta[p : p + q, :p] = -0.5 * full * jv
        theta[-1, -1] = 1.0
        frame = np.zeros((n, n))
        frame[:p, :p] = np.eye(p) / half
        frame[p : p + q, :p] = 0.5 * jv / half
        frame[p : p + q, p : p + q] = np.eye(q) / full
        frame[-1, -1] = 1.0
        # d_theta[a, β, b] = ∂_a θ^β_b
        d_theta = np.zeros((n, n, n))
        d_theta[:p, p : p + q, :p] = -0.5 * full * np.einsum("jim->mji", jstack)
        d_theta[-1, :p, :p] = -0.5 * half * np.eye(p)
        d_theta[-1, p : p + q, p : p + q] = -full * np.eye(q)
        d_theta[-1, p : p + q, :p] = 0.5 * full * jv
        return theta, frame, d_theta

    last: dict[bytes, tuple[FloatArray, FloatArray, FloatArray]] = {}

    def coframe(x: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        key = np.asarray(x, dtype=float).tobytes()
        hit = last.get(key)
        if hit is not None:
            return hit
        result = _coframe(x)
        last.clear()
        last[key] = result
        return result

    def metric(x: FloatArray) -> FloatArray:
        theta = coframe(x)[0]
        return theta.T @ theta

    def christoffel(x: FloatArray) -> FloatArray:
        theta, frame, d_theta = coframe(x)
        rotated = np.einsum("cg,gAB->cAB", frame, gamma_frame)
        rotated = np.einsum("cAB,Aa->caB", rotated, theta)
        gamma = np.einsum("cB,aBb->cab", frame, d_theta) + np.einsum(
            "caB,Bb->cab", rotated, theta
        )
        return 0.5 * (gamma + gamma.transpose(0, 2, 1))

    def riemann(x: FloatArray) -> FloatArray:
        # contracted one index at a time
        theta, frame, _ = coframe(x)
        tensor = np.einsum("ae,efgh->afgh", frame, riemann_frame)
        tensor = np.einsum("afgh,fb->abgh", tensor, theta)
        tensor = np.einsum("abgh,gc->abch", tensor, theta)
        return np.einsum("abch,hd->abcd", tensor, theta)

    return ChartMetric(
        name=f"damek_ricci(p={p}, q={q})",
        dim=n,
        metric_fn=metric,
        margin_fn=lambda x: bound - float(np.max(np.abs(x))),
        christoffel_fn=christoffel,
        riemann_fn=riemann,
    )
