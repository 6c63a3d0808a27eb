"""Downward coefficient recursion for polynomial integrals on an energy level.

Starting from a constant top coefficient ``a_k``, each step solves

    dbar a_n = -(E/2) ((n+2) a_{n+2} dg + g d a_{n+2})

on the torus.  The equation is solvable iff the right side has zero mean; that
mean is the obstruction recorded for step ``n``.  At the bottom the closing
condition is ``Re d(g a_1) = 0`` (odd ``k``) or ``a_0`` real (even ``k``).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .fourier_field import (
    FourierField,
    constant,
    d_z,
    d_zbar,
    depends_on_x_only,
    depends_on_y_only,
    field_to_json,
    inv_d_zbar,
    is_real,
    multiply,
    zeros,
)
from .momentum_poly import MetricError, MomentumPolynomial, check_metric

OBSTRUCTION_RTOL = 1e-10
CLOSING_RTOL = 1e-10
GRID = 64


class ObstructionError(ValueError):
    def __init__(self, n: int, value: complex, relative: float):
        self.n = n
        self.value = complex(value)
        self.relative = relative
        super().__init__(f"step n={n}: right side has mean {self.value:.3e} (relative {relative:.3e})")


class Verdict(str, enum.Enum):
    INTEGRAL_FOUND = "integral_found"
    OBSTRUCTION_HIT = "obstruction_hit"
    REALITY_FAILED = "reality_failed"


@dataclass
class CascadeState:
    g: FourierField
    k: int
    E: float
    a_k: complex = 1.0
    constants: dict = field(default_factory=dict)
    solved: dict = field(default_factory=dict)
    obstructions: dict = field(default_factory=dict)
    relative: dict = field(default_factory=dict)
    truncation: dict = field(default_factory=dict)
    out_band: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("degree must be at least 1")
        if self.E <= 0:
            raise ValueError("energy level must be positive")
        if self.a_k == 0:
            raise ValueError("top coefficient must be nonzero")
        self.solved.setdefault(self.k, constant(self.a_k, self.g.lattice))

    @property
    def lam(self) -> complex:
        return self.k * self.a_k * self.E


def step_rhs(a_next: FourierField, g: FourierField, n: int, E: float,
             out_band: int | None = None) -> FourierField:
    gz = d_z(g)
    s = multiply(a_next, gz, out_band) * (n + 2) + multiply(g, d_z(a_next), out_band)
    return s * (-E / 2)


def cascade_step(state: CascadeState, n: int, tol: float = OBSTRUCTION_RTOL) -> FourierField:
    """Solve for ``a_n`` given ``a_{n+2}``; records the obstruction either way."""
    if n < 0:
        raise ValueError("step index must be nonnegative")
    if n + 2 not in state.solved:
        raise KeyError(f"a_{n + 2} has not been solved")
    rhs = step_rhs(state.solved[n + 2], state.g, n, state.E, state.out_band)
    ob = rhs.mean
    scale = rhs.max_coeff()
    rel = abs(ob) / scale if scale > 0 else 0.0
    state.obstructions[n] = ob
    state.relative[n] = rel
    state.truncation[n] = rhs.truncation
    if rel > tol:
        raise ObstructionError(n, ob, rel)
    a_n = inv_d_zbar(rhs.without_mean()) + state.constants.get(n, 0.0)
    state.solved[n] = a_n
    return a_n


def obstruction_reduced(a: FourierField, g: FourierField) -> complex:
    """Mean of ``a * dg/dz``: the reduced solvability functional."""
    gz = d_z(g)
    M = min(a.band, gz.band)
    # mean of a product only needs matching opposite modes
    A = a.padded(M)
    G = gz.padded(M)
    return complex(np.sum(A * G[::-1, ::-1]))


def full_rhs_mean(a: FourierField, g: FourierField, n: int) -> complex:
    """Mean of ``(n+2) a dg + g d a``; equals ``(n+1) * obstruction_reduced(a, g)``."""
    s = multiply(a, d_z(g)) * (n + 2) + multiply(g, d_z(a))
    return s.mean


def closing_field(state: CascadeState) -> FourierField:
    if state.k % 2 == 1:
        X = d_z(multiply(state.g, state.solved[1], state.out_band))
        return X.real
    a0 = state.solved[0]
    return a0.without_mean().imag


@dataclass
class CascadeReport:
    k: int
    E: float
    a_k: complex
    lam: complex
    solved: dict
    obstructions: dict
    relative: dict
    closing_residual: FourierField | None
    closing_sup: float
    closing_coef: float
    verdict: Verdict
    obstruction_step: int | None
    constants: dict
    truncation: dict
    g: FourierField

    @property
    def exit_code(self) -> int:
        return {Verdict.INTEGRAL_FOUND: 0, Verdict.OBSTRUCTION_HIT: 2, Verdict.REALITY_FAILED: 3}[self.verdict]

    def polynomial(self) -> MomentumPolynomial:
        """The solved coefficients as an E-tracked polynomial (``a_{k-2j}`` carries ``E^j``)."""
        lat = self.g.lattice
        coeffs = []
        for m in range(self.k + 1):
            if m not in self.solved:
                coeffs.append((zeros(lat),))
                continue
            j = (self.k - m) // 2
            a = self.solved[m] / (self.E ** j)
            coeffs.append(tuple([zeros(lat)] * j + [a]))
        return MomentumPolynomial(tuple(coeffs), strict=self.verdict == Verdict.INTEGRAL_FOUND)

    def to_json(self) -> dict:
        def c(z):
            return {"re": complex(z).real, "im": complex(z).imag}

        return {
            "k": self.k,
            "E": self.E,
            "a_k": c(self.a_k),
            "lambda": c(self.lam),
            "verdict": self.verdict.value,
            "obstruction_step": self.obstruction_step,
            "obstructions": {str(n): {**c(v), "relative": self.relative[n]}
                             for n, v in sorted(self.obstructions.items(), reverse=True)},
            "closing": {"sup_grid": self.closing_sup, "coef_linf": self.closing_coef, "grid": GRID},
            "constants": {str(n): c(v) for n, v in sorted(self.constants.items())},
            "truncation": {str(n): v for n, v in sorted(self.truncation.items(), reverse=True)},
        }

    def coefficients_json(self) -> dict:
        return {str(n): field_to_json(f) for n, f in sorted(self.solved.items(), reverse=True)}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


def run_cascade(g: FourierField, k: int, E: float, a_k: complex = 1.0, constants: dict | None = None,
                tol: float = OBSTRUCTION_RTOL, closing_tol: float = CLOSING_RTOL,
                out_band: int | None = None) -> CascadeReport:
    """Run every step down to index 0 or 1 and evaluate the closing condition.

    An obstruction beyond ``tol`` ends the run with verdict ``obstruction_hit``.
    The closing residual is judged against ``closing_tol * max(1, |lambda| * max|g_kl|)``.
    """
    check_metric(g)
    state = CascadeState(g, k, E, a_k, dict(constants or {}), out_band=out_band)
    verdict = Verdict.INTEGRAL_FOUND
    hit = None
    for n in range(k - 2, -1, -2):
        try:
            cascade_step(state, n, tol)
        except ObstructionError as exc:
            verdict, hit = Verdict.OBSTRUCTION_HIT, exc.n
            break
    resid = None
    sup = coef = float("nan")
    if verdict != Verdict.OBSTRUCTION_HIT:
        resid = closing_field(state)
        sup = resid.sup_norm(GRID)
        coef = resid.max_coeff()
        scale = max(1.0, abs(state.lam) * g.max_coeff())
        if max(sup, coef) > closing_tol * scale:
            verdict = Verdict.REALITY_FAILED
    return CascadeReport(k, E, a_k, state.lam, dict(state.solved), dict(state.obstructions),
                         dict(state.relative), resid, sup, coef, verdict, hit,
                         dict(state.constants), dict(state.truncation), g)


# --- explicit families -------------------------------------------------------

@dataclass(frozen=True)
class LiouvilleSystem:
    v: FourierField
    w: FourierField
    g: FourierField
    F2: MomentumPolynomial  # E-tracked: a_2 = 1, a_0 = -E (v - w)

    def closed_form(self, x, y, px, py):
        """``(p_x^2 w - p_y^2 v) / (v + w)``."""
        v = np.asarray(self.v(x, y)).real
        w = np.asarray(self.w(x, y)).real
        out = (np.asarray(px) ** 2 * w - np.asarray(py) ** 2 * v) / (v + w)
        return float(out) if np.ndim(out) == 0 else out


def build_liouville(v: FourierField, w: FourierField) -> LiouvilleSystem:
    if not depends_on_x_only(v):
        raise ValueError("v must depend on x only")
    if not depends_on_y_only(w):
        raise ValueError("w must depend on y only")
    for name, f in (("v", v), ("w", w)):
        if not is_real(f, 1e-12)[0]:
            raise ValueError(f"{name} must be real")
    g = v + w
    try:
        check_metric(g)
    except MetricError as exc:
        raise MetricError(f"v + w is not a metric: {exc}") from None
    lat = g.lattice
    z = zeros(lat)
    F2 = MomentumPolynomial(((z, -(v - w)), (z,), (constant(1.0, lat),)))
    return LiouvilleSystem(v, w, g, F2)


def hopf_residual(u: FourierField, v: FourierField) -> tuple[FourierField, FourierField]:
    """Residuals ``d(uv) + dbar(u conj(v))`` and ``dbar v - d u``."""
    uv = multiply(u, v)
    r1 = d_z(uv) + d_zbar(multiply(u, v.conj()))
    r2 = d_zbar(v) - d_z(u)
    return r1, r2
