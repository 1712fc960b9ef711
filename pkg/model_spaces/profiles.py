from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import sympy as sp

# Below this radius the profile is evaluated from its Taylor polynomial; the
# closed forms divide by powers of r and cancel badly near the origin.
SERIES_RADIUS = 0.1
SERIES_ORDER = 20


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """θ̄ and its first three derivatives as plain float functions."""

    name: str
    derivatives: tuple[Callable[[float], float], ...]
    provenance: str = "closed-form"
    taylor: tuple[float, ...] = ()
    errors: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)

    def __call__(self, r: float, order: int = 0) -> float:
        if order >= len(self.derivatives):
            msg = f"profile {self.name} has no derivative of order {order}"
            raise ValueError(msg)
        if r < 0:
            msg = f"radial profiles live on r >= 0, got {r}"
            raise ValueError(msg)
        return float(self.derivatives[order](r))

    @property
    def closed_form(self) -> bool:
        return self.provenance == "closed-form"

    @property
    def second_derivative_at_zero(self) -> float:
        return self(0.0, 2)

    def taylor_coefficient(self, i: int) -> float:
        return self.taylor[i] if i < len(self.taylor) else 0.0


def profile_from_expression(name: str, expr: sp.Expr, r: sp.Symbol) -> RadialProfile:
    polynomial = sp.series(expr, r, 0, SERIES_ORDER).removeO()
    coefficients = sp.Poly(polynomial, r).all_coeffs()[::-1]
    derivatives = []
    for order in range(4):
        exact = sp.lambdify(r, sp.diff(expr, r, order), "numpy")
        near = sp.lambdify(r, sp.diff(polynomial, r, order), "numpy")

        def evaluate(
            x: float,
            exact: Callable[[float], float] = exact,
            near: Callable[[float], float] = near,
        ) -> float:
            return float(near(x) if x < SERIES_RADIUS else exact(x))

        derivatives.append(evaluate)
    return RadialProfile(
        name=name,
        derivatives=tuple(derivatives),
        taylor=tuple(float(c) for c in coefficients),
    )
