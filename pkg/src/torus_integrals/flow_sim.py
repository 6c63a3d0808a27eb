"""Geodesic and magnetic geodesic flows on T*T^2 and conservation drift.

Equations of motion for ``H = h (p_x^2 + p_y^2) / 2``, ``h = 1/g``, with the
real-momentum bracket ``{p_x, p_y} = B``::

    x' = h p_x,  y' = h p_y,
    p_x' = -h_x |p|^2 / 2 + B h p_y,
    p_y' = -h_y |p|^2 / 2 - B h p_x.

Note the factor: a field given in the complex normalization
``{p_z, p_zbar} = i b`` (as used by the bracket and magnetic constructions)
enters here as ``B = 2 b``; see :meth:`SystemSpec.from_complex_field`.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import solve_ivp

from .fourier_field import FourierField, d_x, d_y, evaluate, is_real
from .momentum_poly import HomogeneousPolynomial, MomentumPolynomial, check_metric, evaluate_homogeneous, evaluate_poly

Observable = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhaseState:
    x: float
    y: float
    px: float
    py: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.px, self.py], dtype=float)

    @classmethod
    def from_array(cls, a) -> "PhaseState":
        return cls(*(float(v) for v in a))


class _Evaluator:
    """Stacked coefficient blocks of g, g_x, g_y, B for fast point evaluation."""

    def __init__(self, g: FourierField, B: FourierField | None):
        fields = [g, d_x(g), d_y(g)] + ([B] if B is not None else [])
        M = max(f.band for f in fields)
        self.stack = np.stack([f.padded(M) for f in fields])
        self.kx, self.ky = g.lattice.wavenumbers(M)
        self.magnetic = B is not None

    def __call__(self, x: float, y: float) -> np.ndarray:
        ex = np.exp(1j * x * self.kx)
        ey = np.exp(1j * y * self.ky)
        return (self.stack @ ey @ ex).real


@dataclass
class SystemSpec:
    g: FourierField
    B: FourierField | None = None
    E_design: float | None = None
    name: str = ""
    _eval: _Evaluator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        check_metric(self.g)
        if self.B is not None:
            ok, asym = is_real(self.B, 1e-10 * max(1.0, self.B.max_coeff()))
            if not ok:
                raise ValueError(f"magnetic field must be real (asymmetry {asym:.3e})")
            if not np.any(self.B.coeffs != 0):
                self.B = None
        if self.E_design is not None and self.E_design <= 0:
            raise ValueError("design energy must be positive")
        self._eval = _Evaluator(self.g, self.B)

    @classmethod
    def from_complex_field(cls, g: FourierField, b: FourierField | None, **kw) -> "SystemSpec":
        """System whose field is given with ``{p_z, p_zbar} = i b``."""
        return cls(g, None if b is None else b * 2.0, **kw)

    @property
    def complex_field(self) -> FourierField | None:
        return None if self.B is None else self.B * 0.5

    @property
    def lattice(self):
        return self.g.lattice

    def energy(self, x, y, px, py):
        gv = np.asarray(evaluate(self.g, x, y)).real
        return 0.5 * (np.asarray(px) ** 2 + np.asarray(py) ** 2) / gv

    def state_on_level(self, x: float, y: float, theta: float, E: float) -> PhaseState:
        """Phase point over ``(x, y)`` with momentum direction ``theta`` and ``H = E``."""
        gv = float(np.real(evaluate(self.g, x, y)))
        p = np.sqrt(2.0 * E * gv)
        return PhaseState(x, y, p * np.cos(theta), p * np.sin(theta))


def rhs(spec: SystemSpec, s) -> np.ndarray:
    x, y, px, py = (s.as_array() if isinstance(s, PhaseState) else np.asarray(s, float))
    vals = spec._eval(x, y)
    g, gx, gy = vals[0], vals[1], vals[2]
    h = 1.0 / g
    p2 = px * px + py * py
    # h_x = -g_x / g^2
    dpx = 0.5 * gx * h * h * p2
    dpy = 0.5 * gy * h * h * p2
    if spec._eval.magnetic:
        Bv = vals[3]
        dpx += Bv * h * py
        dpy -= Bv * h * px
    return np.array([h * px, h * py, dpx, dpy])


@dataclass(frozen=True)
class IntegrationControls:
    rtol: float = 1e-10
    atol: float = 1e-10
    samples: int = 1001
    method: str = "DOP853"
    first_step: float | None = None
    # None: never step over a stored sample, so interpolation adds no error
    max_step: float | None = None


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # shape (n, 4), unwrapped
    observables: dict = field(default_factory=dict)
    lattice: object = None

    @property
    def drift(self) -> dict:
        return {k: float(np.max(np.abs(v - v[0]))) for k, v in self.observables.items()}

    def reduced_states(self) -> np.ndarray:
        """States with ``(x, y)`` reduced to the fundamental domain."""
        out = np.array(self.states)
        out[:, 0] = np.mod(out[:, 0], self.lattice.Lx)
        out[:, 1] = np.mod(out[:, 1], self.lattice.Ly)
        return out

    def samples(self) -> list[tuple[float, PhaseState]]:
        return [(float(t), PhaseState.from_array(s)) for t, s in zip(self.t, self.reduced_states())]

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(self.observables)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "px", "py"] + names)
        red = self.reduced_states()
        for i, t in enumerate(self.t):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in red[i]]
                       + [repr(float(self.observables[n][i])) for n in names])
        return buf.getvalue()


def integrate(spec: SystemSpec, s0: PhaseState, T: float, controls: IntegrationControls | None = None,
              observables: Mapping[str, Observable] | None = None, with_energy: bool = True) -> Trajectory:
    """Adaptive embedded Runge-Kutta integration with dense output at uniform times.

    ``T`` may be negative to integrate backwards in time.  Steps are capped at
    the sample spacing unless ``controls.max_step`` says otherwise; pass
    ``max_step=np.inf`` for purely tolerance-driven stepping.
    """
    if T == 0:
        raise ValueError("integration time must be nonzero")
    c = controls or IntegrationControls()
    t_eval = np.linspace(0.0, T, c.samples)
    kw = {"max_step": c.max_step if c.max_step is not None else abs(T) / max(c.samples - 1, 1)}
    if c.first_step is not None:
        kw["first_step"] = c.first_step
    sol = solve_ivp(lambda t, s: rhs(spec, s), (0.0, T), s0.as_array(), method=c.method,
                    t_eval=t_eval, rtol=c.rtol, atol=c.atol, **kw)
    if sol.status != 0:
        raise IntegrationError(f"integration failed at t={sol.t[-1] if sol.t.size else 0.0}: {sol.message}")
    states = sol.y.T
    obs = {}
    X, Y, PX, PY = states.T
    if with_energy:
        obs["H"] = spec.energy(X, Y, PX, PY)
    for name, fn in (observables or {}).items():
        obs[name] = np.asarray(fn(X, Y, PX, PY), dtype=float)
    return Trajectory(sol.t, states, obs, spec.lattice)


@dataclass(frozen=True)
class DriftStats:
    max_abs: float
    mean_abs: float
    max_rel: float
    mean_rel: float


def conservation_report(traj: Trajectory, names=None) -> dict[str, DriftStats]:
    out = {}
    for name in (names or traj.observables):
        v = traj.observables[name]
        d = np.abs(v - v[0])
        ref = max(abs(v[0]), np.finfo(float).tiny)
        out[name] = DriftStats(float(d.max()), float(d.mean()), float(d.max() / ref), float(d.mean() / ref))
    return out


# --- observables ------------------------------------------------------------

def poly_observable(F: MomentumPolynomial, E: float | None = None) -> Observable:
    return lambda x, y, px, py: evaluate_poly(F, x, y, px, py, E=E, tol=1e-8)


def homogeneous_observable(f: HomogeneousPolynomial) -> Observable:
    return lambda x, y, px, py: evaluate_homogeneous(f, x, y, px, py)


def momentum_x(x, y, px, py):
    return np.asarray(px, float)


def flat_cosine_integral(B: float) -> Observable:
    """``cos(p_x / B - y)`` for the flat metric with constant field ``{p_x, p_y} = B``."""
    return lambda x, y, px, py: np.cos(np.asarray(px) / B - np.asarray(y))


def time_derivative(spec: SystemSpec, s: PhaseState, fn: Observable, delta: float = 1e-3,
                    rtol: float = 1e-13) -> float:
    """dF/dt at ``s`` by a 5-point central difference along the integrated flow."""
    ctl = IntegrationControls(rtol=rtol, atol=rtol, samples=3)
    fwd = integrate(spec, s, 2 * delta, ctl, with_energy=False).states
    bwd = integrate(spec, s, -2 * delta, ctl, with_energy=False).states
    pts = np.array([bwd[2], bwd[1], fwd[1], fwd[2]])
    v = np.asarray(fn(*pts.T), float)
    return float((v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * delta))
