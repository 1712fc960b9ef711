"""Charts whose metric is a sympy expression.

Only g, ∂g and ∂∂g are compiled; Christoffel symbols and their derivatives
are assembled numerically from them, which keeps the lambdified code small
even for rational metrics.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from . import ChartMetric, FloatArray, ParameterError, Provider, levi_civita

log = logging.getLogger(__name__)


def _compile(symbols: Sequence[sp.Symbol], expr: sp.Array) -> Provider:
    fn = sp.lambdify([list(symbols)], expr.tolist(), "numpy")
    shape = tuple(expr.shape)

    def evaluate(x: FloatArray) -> FloatArray:
        return np.broadcast_to(np.asarray(fn(x), dtype=float), shape).copy()

    return evaluate


def compile_metric(
    symbols: Sequence[sp.Symbol], metric: sp.Matrix
) -> tuple[Provider, Provider, Provider]:
    """Returns numeric g, dg[m,i,j]=∂_m g_ij and ddg[l,m,i,j]=∂_l∂_m g_ij."""
    g = sp.Array(metric)
    dg = sp.derive_by_array(g, list(symbols))
    ddg = sp.derive_by_array(dg, list(symbols))
    return _compile(symbols, g), _compile(symbols, dg), _compile(symbols, ddg)


def connection_from_jets(
    g: FloatArray, dg: FloatArray, ddg: FloatArray
) -> tuple[FloatArray, FloatArray]:
    g_inv = np.linalg.inv(g)
    lowered = (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg) / 2
    d_lowered = (
        np.einsum("milj->mlij", ddg) + np.einsum("mjli->mlij", ddg) - ddg
    ) / 2
    d_inverse = -np.einsum("ik,jl,mkl->mij", g_inv, g_inv, dg)
    dgamma = np.einsum("mkl,lij->mkij", d_inverse, lowered) + np.einsum(
        "kl,mlij->mkij", g_inv, d_lowered
    )
    return levi_civita(g, dg), dgamma


def symbolic_chart(
    name: str,
    symbols: Sequence[sp.Symbol],
    metric: sp.Matrix,
    margin: Callable[[FloatArray], float],
    *,
    riemann_fn: Provider | None = None,
    center: tuple[float, ...] | None = None,
    coordinate_scale: float = 1.0,
    analytic: bool = True,
) -> ChartMetric:
    """Build a chart from a sympy metric matrix in the coordinates ``symbols``.

    With ``analytic=False`` only g is compiled and the connection falls back
    to finite differences.
    """
    dim = len(symbols)
    if metric.shape != (dim, dim):
        msg = f"metric of {name} has shape {metric.shape}, expected {(dim, dim)}"
        raise ValueError(msg)
    log.debug(f"compiling symbolic metric for {name}")
    g_fn, dg_fn, ddg_fn = compile_metric(symbols, metric)
    if not analytic:
        return ChartMetric(
            name=name,
            dim=dim,
            metric_fn=g_fn,
            margin_fn=margin,
            riemann_fn=riemann_fn,
            center=center,
            coordinate_scale=coordinate_scale,
        )

    def gamma(x: FloatArray) -> FloatArray:
        return levi_civita(g_fn(x), dg_fn(x))

    def dgamma(x: FloatArray) -> FloatArray:
        return connection_from_jets(g_fn(x), dg_fn(x), ddg_fn(x))[1]

    return ChartMetric(
        name=name,
        dim=dim,
        metric_fn=g_fn,
        margin_fn=margin,
        christoffel_fn=gamma,
        christoffel_derivative_fn=dgamma,
        riemann_fn=riemann_fn,
        center=center,
        coordinate_scale=coordinate_scale,
    )


# Names a metric expression may use besides its coordinates.
ALLOWED_NAMES: dict[str, object] = {
    name: getattr(sp, name)
    for name in (
        "sin cos tan sinh cosh tanh asin acos atan asinh acosh atanh "
        "exp log sqrt Abs pi E Integer Float Rational Symbol"
    ).split()
}


def _parse(text: str, local: dict[str, sp.Symbol]) -> Any:
    if "__" in text:
        msg = f"metric entry {text!r} uses a reserved name"
        raise ParameterError(msg)
    try:
        return parse_expr(
            text,
            local_dict=dict(local),
            global_dict={"__builtins__": {}, **ALLOWED_NAMES},
            transformations=standard_transformations,
        )
    except (SyntaxError, TypeError, NameError, sp.SympifyError) as e:
        msg = f"cannot parse metric entry {text!r}: {e}"
        raise ParameterError(msg) from e


def parse_metric(
    entries: str | Sequence[Sequence[str]], coordinates: Sequence[str]
) -> tuple[list[sp.Symbol], sp.Matrix]:
    """Parse a metric given as a matrix of expression strings."""
    symbols = [sp.Symbol(c, real=True) for c in coordinates]
    local = {c: s for c, s in zip(coordinates, symbols, strict=True)}
    if isinstance(entries, str):
        matrix = sp.Matrix(_parse(entries, local))
    else:
        matrix = sp.Matrix([[sp.sympify(_parse(str(e), local)) for e in row] for row in entries])
    undefined = matrix.atoms(AppliedUndef)
    if undefined:
        names = ", ".join(sorted(str(f.func) for f in undefined))
        msg = f"cannot parse metric: unknown functions {names}"
        raise ParameterError(msg)
    unknown = matrix.free_symbols - set(symbols)
    if unknown:
        names = ", ".join(sorted(str(s) for s in unknown))
        msg = f"metric uses names that are not coordinates: {names}"
        raise ParameterError(msg)
    return symbols, matrix
