"""Magnetic geodesic flows with polynomial integrals on one energy level.

Fields here use the complex normalization ``{p_z, p_zbar} = i b``; the
simulator's ``SystemSpec.B`` is ``2 b`` (``{p_x, p_y} = B``).

For a quadratic ``F = a_2 p_z^2 + a_1 p_z + a_0 + c.c.`` with constant ``a_2``
the vanishing of the restricted bracket reads

    dbar a_1 + 2 i a_2 b = 0
    dbar a_0 + E a_2 dg + i a_1 b = 0
    d(g a_1) + dbar(g conj(a_1)) = 0.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .fourier_field import (
    FourierField,
    TorusLattice,
    DEFAULT_LATTICE,
    constant,
    d_x,
    d_y,
    d_z,
    d_zbar,
    depends_on_y_only,
    inv_d_zbar,
    is_real,
    make_field,
    multiply,
    polyval_field,
    zeros,
)
from .flow_sim import IntegrationControls, SystemSpec, integrate, poly_observable
from .momentum_poly import MomentumPolynomial, check_metric


class InconsistentCandidateError(ValueError):
    pass


class ResidualError(ValueError):
    pass


@dataclass(frozen=True)
class ExtractedField:
    b: FourierField
    # potential A_x dx + A_y dy with dA = b dx^dy
    A_x: FourierField
    A_y: FourierField


def extract_B(a_k: complex, a_km1: FourierField, k: int, tol: float = 1e-10) -> ExtractedField:
    """Field forced by the ``p_z^k`` coefficient: ``b = i/(k a_k) dbar a_{k-1}``."""
    if a_k == 0:
        raise ValueError("top coefficient must be nonzero")
    c = a_km1 / (k * a_k)
    b = d_zbar(c) * 1j
    ok, asym = is_real(b, tol * max(1.0, b.max_coeff()))
    if not ok:
        raise InconsistentCandidateError(f"induced field is not real (asymmetry {asym:.3e})")
    b = b.real
    if abs(b.mean) > 1e-14 * max(1.0, b.max_coeff()):
        raise InconsistentCandidateError(f"induced field has mean {b.mean}")
    # c = alpha + i beta; d(alpha dx - beta dy) = -(alpha_y + beta_x) dx^dy = 2 b dx^dy
    return ExtractedField(b, c.real * 0.5, c.imag * (-0.5))


def curl(A_x: FourierField, A_y: FourierField) -> FourierField:
    return d_x(A_y) - d_y(A_x)


@dataclass(frozen=True)
class MagneticCandidate:
    F: MomentumPolynomial
    spec: SystemSpec
    E: float
    b: FourierField

    @property
    def alpha(self) -> FourierField:
        return self.F.at_energy(self.E)[self.F.degree - 1].real

    @property
    def beta(self) -> FourierField:
        return self.F.at_energy(self.E)[self.F.degree - 1].imag


def linear_magnetic_system(a_0: FourierField, g: FourierField) -> MagneticCandidate:
    """``F_1 = p_z + a_0 + p_zbar`` with ``b = -a_0'(y)/2``; an integral on every level."""
    for name, f in (("a_0", a_0), ("g", g)):
        if not depends_on_y_only(f, 1e-14):
            raise ValueError(f"{name} must depend on y only")
    check_metric(g)
    b = d_y(a_0) * (-0.5)
    spec = SystemSpec.from_complex_field(g, b.real, name="linear-magnetic")
    F = MomentumPolynomial.from_fields([a_0, 1.0], lattice=g.lattice)
    return MagneticCandidate(F, spec, 1.0, b.real)


def quadratic_residuals(F2: MomentumPolynomial, g: FourierField, b: FourierField, E: float,
                        out_band: int | None = None) -> tuple[FourierField, FourierField, FourierField]:
    if F2.degree != 2:
        raise ValueError("need a quadratic polynomial")
    a0, a1, a2 = F2.at_energy(E)
    if np.any(np.abs(a2.without_mean().coeffs) > 1e-14):
        raise ValueError("a_2 must be constant")
    c2 = a2.mean
    r1 = d_zbar(a1) + b * (2j * c2)
    r2 = d_zbar(a0) + d_z(g) * (E * c2) + multiply(a1, b, out_band) * 1j
    ga1 = multiply(g, a1, out_band)
    r3 = d_z(ga1) + d_zbar(ga1.conj())
    return r1, r2, r3


def residual_norms(res, grid: int = 64) -> list[float]:
    return [max(r.sup_norm(grid), r.max_coeff()) for r in res]


# --- the DGRW family ----------------------------------------------------------

@dataclass
class DGRWSystem:
    v: FourierField
    w: FourierField
    f_coeffs: tuple  # (alpha_0, alpha_1, alpha_2, alpha_3)
    E: float
    g: FourierField
    b: FourierField
    a1: FourierField
    a0: FourierField
    F2: MomentumPolynomial
    spec: SystemSpec
    residuals: list = field(default_factory=list)
    reality: float = 0.0
    truncation: float = 0.0
    params: dict = field(default_factory=dict)

    def audit(self) -> dict:
        return {"residuals": self.residuals, "imag_a0": self.reality, "truncation": self.truncation,
                "alpha": list(self.f_coeffs), "E": self.E, **self.params}


def dgrw_from_profiles(v: FourierField, w: FourierField, f_coeffs, E: float, tol: float = 1e-9,
                       a0_constant: float = 0.0, name: str = "dgrw") -> DGRWSystem:
    """Assemble ``b = v'' + w''``, ``a_1 = -4(w' + i v')``, ``g = f(v - w)`` and solve for ``a_0``.

    ``f_coeffs`` are ``(alpha_0, alpha_1, alpha_2, alpha_3)`` of the cubic ``f``.
    Raises :class:`ResidualError` when ``a_0`` is not real or a residual exceeds ``tol``.
    """
    if E <= 0:
        raise ValueError("energy level must be positive")
    lat = v.lattice
    b = (d_x(d_x(v)) + d_y(d_y(w))).real
    a1 = (d_y(w) + d_x(v) * 1j) * (-4)
    u = v - w
    g = polyval_field(list(f_coeffs), u).real
    check_metric(g)
    rhs = -(d_z(g) * E) - multiply(a1, b) * 1j
    a0c = inv_d_zbar(rhs, rtol=1e-8) + a0_constant
    imag = max(a0c.imag.sup_norm(), a0c.imag.max_coeff())
    a0 = a0c.real
    F2 = MomentumPolynomial((((a0,)), (a1,), (constant(1.0, lat),)))
    res = quadratic_residuals(F2, g, b, E)
    norms = residual_norms(res)
    trunc = g.truncation + a0.truncation
    spec = SystemSpec.from_complex_field(g, b, E_design=E, name=name)
    sys_ = DGRWSystem(v, w, tuple(f_coeffs), E, g, b, a1, a0, F2, spec, norms, imag, trunc)
    if imag > tol or max(norms) > tol:
        raise ResidualError(f"DGRW candidate fails: residuals {norms}, Im a_0 {imag:.3e}")
    return sys_


def dgrw_trig(mu: int = 1, nu: int = 1, a: float = 0.1, b: float = 0.1, E: float = 1.0,
              alpha1: float = 0.0, alpha0: float = 1.0, lattice: TorusLattice = DEFAULT_LATTICE,
              tol: float = 1e-9) -> DGRWSystem:
    """Quadratic ``f`` with ``v = a cos(mu x)``, ``w = b cos(nu y)``.

    Reality of ``a_0`` forces ``alpha_2 = -2 (mu^2 + nu^2) / E``.
    """
    v = make_field(lattice, [(mu, 0, a / 2), (-mu, 0, a / 2)])
    w = make_field(lattice, [(0, nu, b / 2), (0, -nu, b / 2)])
    alpha2 = -2.0 * (mu ** 2 + nu ** 2) / E
    s = dgrw_from_profiles(v, w, (alpha0, alpha1, alpha2, 0.0), E, tol, name="dgrw-trig")
    s.params = {"mu": mu, "nu": nu, "a": a, "b": b}
    return s


def _periodic_profile(c3: float, c2: float, amp: float, n: int) -> tuple[np.ndarray, float]:
    """Solve ``v'' = c2 v + 1.5 c3 v^2`` from ``v(0) = amp``, ``v'(0) = 0``.

    Returns samples over one period on ``n`` uniform points and the period.
    """
    def f(t, s):
        return [s[1], c2 * s[0] + 1.5 * c3 * s[0] ** 2]

    def turn(t, s):
        return s[1]
    turn.direction = 1.0 if amp > 0 else -1.0

    sol = solve_ivp(f, (0, 50.0), [amp, 0.0], method="DOP853", rtol=1e-13, atol=1e-14,
                    events=turn, dense_output=True)
    ev = [t for t in sol.t_events[0] if t > 1e-6]
    if not ev:
        raise ResidualError("profile is not periodic (no return to a turning point)")
    half = ev[0]
    period = 2 * half
    ts = np.arange(n) * period / n
    # even about t = 0
    tt = np.where(ts <= half, ts, period - ts)
    return sol.sol(tt)[0], period


def shoot_profile(c3: float, amp: float, period: float = 2 * np.pi, n: int = 256) -> tuple[np.ndarray, float]:
    """Find ``c2 < 0`` such that the profile has the requested period."""
    def mismatch(c2):
        try:
            return _periodic_profile(c3, c2, amp, 8)[1] - period
        except ResidualError:
            # escaped orbit: beyond the separatrix the period is unbounded
            return 50.0
    w0 = 2 * np.pi / period
    lo, hi = -4.0 * w0 ** 2, -0.25 * w0 ** 2
    c2 = brentq(mismatch, lo, hi, xtol=1e-15, rtol=1e-14)
    vals, _ = _periodic_profile(c3, c2, amp, n)
    return vals, c2


def _profile_field(samples: np.ndarray, lattice: TorusLattice, band: int, axis: int) -> FourierField:
    hat = np.fft.fft(samples) / len(samples)
    ks = np.arange(-band, band + 1)
    modes = [(k, 0, hat[k % len(samples)]) if axis == 0 else (0, k, hat[k % len(samples)]) for k in ks]
    return make_field(lattice, modes).real


def dgrw_cubic(alpha3: float = 0.5, amp_v: float = 0.2, amp_w: float = 0.2, E: float = 1.0,
               alpha1: float = 0.0, alpha0: float = 2.0, lattice: TorusLattice = DEFAULT_LATTICE,
               band: int | None = None, tol: float = 1e-9) -> DGRWSystem:
    """Cubic ``f`` with elliptic profiles obtained by ODE integration and period shooting.

    Reality of ``a_0`` needs ``E f''(v - w) v'w' = 4 (v''' w' + v' w''')``, which
    splits into ``v'^2 = (E a3 / 2) v^3 + c2v v^2 + const`` and
    ``w'^2 = -(E a3 / 2) w^3 + c2w w^2 + const`` with ``gamma = 2 c2v / E`` and
    ``alpha_2 = gamma + 2 c2w / E``.
    """
    band = band or max(4, min(10, lattice.N // 3))
    n = 4 * band + 4
    vv, c2v = shoot_profile(E * alpha3 / 2, amp_v, lattice.Lx, n)
    ww, c2w = shoot_profile(-E * alpha3 / 2, amp_w, lattice.Ly, n)
    gamma = 2 * c2v / E
    alpha2 = gamma + 2 * c2w / E
    v = _profile_field(vv, lattice, band, axis=0)
    w = _profile_field(ww, lattice, band, axis=1)
    s = dgrw_from_profiles(v, w, (alpha0, alpha1, alpha2, alpha3), E, tol, name="dgrw-cubic")
    s.params = {"gamma": gamma, "c2_v": c2v, "c2_w": c2w, "amp_v": amp_v, "amp_w": amp_w}
    return s


# --- energy-level experiments -----------------------------------------------------

@dataclass
class LevelResult:
    E: float
    drifts: list
    max_drift: float
    median_drift: float


@dataclass
class MultiLevelResult:
    levels: list
    small_tol: float

    @property
    def small_levels(self) -> list[float]:
        return [r.E for r in self.levels if r.max_drift <= self.small_tol]

    @property
    def single_level_signature(self) -> bool:
        return len(self.small_levels) == 1

    def ratio(self, i: int = 1, j: int = 0) -> float:
        return self.levels[i].max_drift / max(self.levels[j].max_drift, np.finfo(float).tiny)

    def table(self) -> list[dict]:
        return [{"E": r.E, "max_drift": r.max_drift, "median_drift": r.median_drift} for r in self.levels]


def level_initial_states(spec: SystemSpec, E: float, n_points: int = 8, seed: int = 0):
    """``n_points`` states on ``H = E``: seeded positions, one momentum direction per sector."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0, spec.lattice.Lx, n_points)
    ys = rng.uniform(0, spec.lattice.Ly, n_points)
    th = 2 * np.pi * (np.arange(n_points) + rng.uniform(0, 1, n_points)) / n_points
    return [spec.state_on_level(x, y, t, E) for x, y, t in zip(xs, ys, th)]


def multi_level_test(spec: SystemSpec, observable, E_list, T: float = 50.0,
                     controls: IntegrationControls | None = None, n_points: int = 8, seed: int = 0,
                     small_tol: float = 1e-6, workers: int = 4) -> MultiLevelResult:
    """Integrate from on-level states at each energy and tabulate the drift of ``observable``.

    ``observable`` is a callable ``(x, y, px, py) -> value`` or a polynomial.
    """
    if len(E_list) < 2 or any(E <= 0 for E in E_list):
        raise ValueError("need at least two positive energies")
    fn = poly_observable(observable) if isinstance(observable, MomentumPolynomial) else observable
    ctl = controls or IntegrationControls(rtol=1e-11, atol=1e-11, samples=501)

    def one(s0):
        return integrate(spec, s0, T, ctl, {"F": fn}, with_energy=False).drift["F"]

    levels = []
    for E in E_list:
        starts = level_initial_states(spec, E, n_points, seed)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            drifts = list(ex.map(one, starts))
        levels.append(LevelResult(E, drifts, float(max(drifts)), float(np.median(drifts))))
    return MultiLevelResult(levels, small_tol)


def flat_constant_field(B: float = 1.0, lattice: TorusLattice = DEFAULT_LATTICE) -> SystemSpec:
    """Flat metric with constant ``{p_x, p_y} = B``; not exact, so no polynomial integral."""
    return SystemSpec(constant(1.0, lattice), constant(B, lattice), name="flat-constant-B")


def trial_field_residual(g: FourierField, b: FourierField, E: float, c: complex = 0.0) -> float:
    """Best-effort quadratic candidate for a given ``b`` and its remaining violation.

    Solves the first two equations (``a_2 = 1``, ``a_1`` mean ``c``) and returns
    the larger of the third residual and the imaginary part of ``a_0``.
    """
    a1 = inv_d_zbar(b * (-2j)) + c
    rhs = -(d_z(g) * E) - multiply(a1, b) * 1j
    a0 = inv_d_zbar(rhs, rtol=1e-8)
    ga1 = multiply(g, a1)
    r3 = d_z(ga1) + d_zbar(ga1.conj())
    im = a0.imag
    return max(r3.sup_norm(), im.sup_norm())


def level_split_invariant(a1: FourierField, b: FourierField, g: FourierField, E1: float, E2: float,
                          out_band: int | None = None) -> FourierField:
    """``dbar(a_00 - a_1^2 / 4)`` for the E-free part of ``a_0`` solved on two levels.

    ``a_0(E)`` comes from the second quadratic equation (``a_2 = 1``) at both
    energies; ``a_00`` is its linear extrapolation to ``E = 0``.  The result
    vanishes when ``a_1`` satisfies the first equation.
    """
    if E1 == E2:
        raise ValueError("need two distinct levels")
    ab = multiply(a1, b, out_band) * 1j
    a0 = [inv_d_zbar(-(d_z(g) * E) - ab, rtol=1e-8) for E in (E1, E2)]
    a00 = (a0[0] * E2 - a0[1] * E1) / (E2 - E1)
    return d_zbar(a00 - multiply(a1, a1, out_band) * 0.25)
