"""Momentum polynomials on an energy level and the restricted bracket with H.

Momenta enter through ``p_z = (p_x - i p_y)/2`` and ``p_zbar = conj(p_z)``; the
geodesic Hamiltonian is ``H = 2 h p_z p_zbar`` with ``h = 1/g``.

A :class:`MomentumPolynomial` of degree ``k`` stands for

    F = a_k p_z^k + ... + a_1 p_z + a_0 + conj(a_1) p_zbar + ... + conj(a_k) p_zbar^k

with ``a_0`` real.  Only ``a_0 .. a_k`` are stored.  Each ``a_m`` is itself a
polynomial in the energy ``E``: ``coeffs[m][j]`` is the field multiplying
``E**j``.  Keeping the E-structure is what lets :func:`homogenize` turn a
level-restricted integral back into a homogeneous one.

Magnetic fields here use the complex-bracket normalization
``{p_z, p_zbar} = i B``, which is ``{p_x, p_y} = 2 B`` in real momenta.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fourier_field import (
    FourierField,
    TorusLattice,
    constant,
    d_z,
    d_zbar,
    evaluate,
    field_from_json,
    field_to_json,
    is_real,
    multiply,
    zeros,
)

REALITY_TOL = 1e-10


class RealityError(ValueError):
    pass


class MetricError(ValueError):
    pass


def check_metric(g: FourierField, n: int = 64) -> None:
    ok, asym = is_real(g, REALITY_TOL * max(1.0, g.max_coeff()))
    if not ok:
        raise MetricError(f"conformal factor is not real (asymmetry {asym:.3e})")
    vals = g.on_grid(n).real
    if np.min(vals) <= 0:
        raise MetricError(f"conformal factor is not positive (min {np.min(vals):.3e} on {n}x{n} grid)")


@dataclass(frozen=True)
class MomentumPolynomial:
    coeffs: tuple[tuple[FourierField, ...], ...]
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        cs = tuple(tuple(c) for c in self.coeffs)
        if not cs or any(len(c) == 0 for c in cs):
            raise ValueError("every coefficient needs at least one E-power term")
        lat = cs[0][0].lattice
        for c in cs:
            for f in c:
                f._check(cs[0][0])
        object.__setattr__(self, "coeffs", cs)
        if self.strict:
            for j, a0 in enumerate(cs[0]):
                ok, asym = is_real(a0, REALITY_TOL * max(1.0, a0.max_coeff()))
                if not ok:
                    raise RealityError(f"a_0 (E^{j} part) is not real: asymmetry {asym:.3e}")
        del lat

    @classmethod
    def from_fields(cls, fields: Sequence[FourierField | complex], lattice: TorusLattice | None = None,
                    strict: bool = True) -> "MomentumPolynomial":
        """E-independent polynomial from ``[a_0, a_1, ..., a_k]``; scalars become constant fields."""
        lat = lattice or next((f.lattice for f in fields if isinstance(f, FourierField)), None)
        if lat is None:
            from .fourier_field import DEFAULT_LATTICE
            lat = DEFAULT_LATTICE
        cs = tuple((f if isinstance(f, FourierField) else constant(f, lat),) for f in fields)
        return cls(cs, strict=strict)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def E_degree(self) -> int:
        return max(len(c) for c in self.coeffs) - 1

    @property
    def lattice(self) -> TorusLattice:
        return self.coeffs[0][0].lattice

    def at_energy(self, E: float) -> list[FourierField]:
        """Numeric coefficients ``[a_0, ..., a_k]`` on the level ``H = E``."""
        out = []
        for c in self.coeffs:
            acc = c[0]
            for j, f in enumerate(c[1:], start=1):
                acc = acc + f * (E ** j)
            out.append(acc)
        return out

    def fixed(self, E: float) -> "MomentumPolynomial":
        return MomentumPolynomial(tuple((a,) for a in self.at_energy(E)), strict=self.strict)

    def __add__(self, other: "MomentumPolynomial") -> "MomentumPolynomial":
        k = max(self.degree, other.degree)
        z = zeros(self.lattice)
        out = []
        for m in range(k + 1):
            a = self.coeffs[m] if m <= self.degree else (z,)
            b = other.coeffs[m] if m <= other.degree else (z,)
            n = max(len(a), len(b))
            out.append(tuple((a[j] if j < len(a) else z) + (b[j] if j < len(b) else z) for j in range(n)))
        return MomentumPolynomial(tuple(out), strict=self.strict and other.strict)

    def scaled(self, s: float) -> "MomentumPolynomial":
        return MomentumPolynomial(tuple(tuple(f * s for f in c) for c in self.coeffs), strict=self.strict)

    def __call__(self, x, y, px, py, E: float | None = None):
        return evaluate_poly(self, x, y, px, py, E=E)

    def max_coeff(self) -> float:
        return max(f.max_coeff() for c in self.coeffs for f in c)

    def truncation(self) -> float:
        return sum(f.truncation for c in self.coeffs for f in c)


@dataclass(frozen=True)
class HomogeneousPolynomial:
    """Degree-``k`` form ``sum a_{i,j} p_z^i p_zbar^j`` (``i + j = k``).

    ``terms[(i, j)]`` (stored for ``i >= j`` only; the rest is the conjugate
    mirror) is a tuple ``(c_0, c_1, ...)`` meaning ``sum_r c_r * h**r`` with
    ``h = 1/g``.  Powers of ``h`` appear when an energy-dependent polynomial is
    homogenized; ``g`` is required whenever some ``r > 0``.
    """

    degree: int
    terms: dict
    g: FourierField | None = None

    def __post_init__(self):
        for (i, j), cs in self.terms.items():
            if i + j != self.degree or i < j:
                raise ValueError(f"term ({i},{j}) not allowed in degree {self.degree} (store i >= j)")
            if len(cs) > 1 and self.g is None:
                raise ValueError("powers of h need the conformal factor g")

    def __call__(self, x, y, px, py):
        return evaluate_homogeneous(self, x, y, px, py)


# --- evaluation -----------------------------------------------------------

def _pz(px, py):
    return (np.asarray(px, float) - 1j * np.asarray(py, float)) / 2


def evaluate_poly(F: MomentumPolynomial, x, y, px, py, E: float | None = None, tol: float = 1e-12):
    """Real value of ``F`` at phase point(s); ``E`` is required when ``F.E_degree > 0``."""
    if F.E_degree > 0 and E is None:
        raise ValueError("polynomial depends on E; pass E or homogenize first")
    coeffs = F.at_energy(E if E is not None else 0.0)
    pz = _pz(px, py)
    pzb = np.conj(pz)
    total = evaluate(coeffs[0], x, y)
    pw = np.ones_like(pz)
    pwb = np.ones_like(pz)
    for a in coeffs[1:]:
        pw = pw * pz
        pwb = pwb * pzb
        v = evaluate(a, x, y)
        total = total + v * pw + np.conj(v) * pwb
    total = np.asarray(total)
    scale = max(1.0, float(np.max(np.abs(total.real))) if total.size else 1.0)
    resid = float(np.max(np.abs(total.imag))) if total.size else 0.0
    if resid > tol * scale * max(1.0, F.max_coeff()):
        raise RealityError(f"polynomial value has imaginary part {resid:.3e}")
    out = total.real
    return float(out) if out.ndim == 0 else out


def evaluate_homogeneous(f: HomogeneousPolynomial, x, y, px, py):
    pz = _pz(px, py)
    pzb = np.conj(pz)
    h = None
    if f.g is not None:
        h = 1.0 / np.asarray(evaluate(f.g, x, y)).real
    total = 0j
    for (i, j), cs in f.terms.items():
        c = 0j
        for r, fr in enumerate(cs):
            v = evaluate(fr, x, y)
            c = c + (v if r == 0 else v * h ** r)
        term = c * pz ** i * pzb ** j
        total = total + (term if i == j else term + np.conj(term))
    out = np.asarray(total).real
    return float(out) if out.ndim == 0 else out


# --- energy substitution and homogenization --------------------------------

def substitute_energy(f: HomogeneousPolynomial, g: FourierField, E: float | None = None,
                      out_band: int | None = None) -> MomentumPolynomial:
    """Replace each ``p_z p_zbar`` by ``E/(2h) = E g / 2``.

    With ``E=None`` the energy is kept symbolic and the result carries E-powers.
    """
    if E is not None and E <= 0:
        raise ValueError("energy level must be positive")
    check_metric(g)
    k = f.degree
    top = k  # a_m with m = i - j ranges over 0..k
    lat = g.lattice
    # acc[m][power of E]
    acc: list[dict[int, FourierField]] = [dict() for _ in range(top + 1)]
    gpow = {0: constant(1.0, lat)}

    def g_to(p):
        if p not in gpow:
            gpow[p] = multiply(g_to(p - 1), g, out_band)
        return gpow[p]

    for (i, j), cs in f.terms.items():
        m = i - j
        for r, c in enumerate(cs):
            if j < r:
                raise ValueError(f"term ({i},{j}) carries h^{r}; cannot substitute without negative powers of g")
            val = multiply(c, g_to(j - r), out_band) * (0.5 ** j)
            acc[m][j] = acc[m].get(j, zeros(lat)) + val
    # trim trailing zero-degree coefficients above the actual polynomial degree
    while top > 0 and not acc[top]:
        top -= 1
    coeffs = []
    for m in range(top + 1):
        d = acc[m]
        if not d:
            coeffs.append((zeros(lat),))
            continue
        if E is None:
            coeffs.append(tuple(d.get(p, zeros(lat)) for p in range(max(d) + 1)))
        else:
            s = zeros(lat)
            for p, v in d.items():
                s = s + v * (E ** p)
            coeffs.append((s,))
    return MomentumPolynomial(tuple(coeffs))


def homogenize(F: MomentumPolynomial, g: FourierField) -> HomogeneousPolynomial:
    """Substitute ``E -> H = 2 h p_z p_zbar`` into an E-tracked polynomial.

    Requires every term ``a_{m,j} E^j p_z^m`` to have the same total degree
    ``m + 2j``; raises ``ValueError`` otherwise.
    """
    degs = set()
    terms: dict[tuple[int, int], list[FourierField]] = {}
    for m, cs in enumerate(F.coeffs):
        for j, a in enumerate(cs):
            if not np.any(a.coeffs != 0):
                continue
            degs.add(m + 2 * j)
            key = (m + j, j)
            lst = terms.setdefault(key, [])
            while len(lst) <= j:
                lst.append(zeros(F.lattice))
            lst[j] = lst[j] + a * (2.0 ** j)
    if len(degs) > 1:
        raise ValueError(f"E-dependence is not homogeneous: total degrees {sorted(degs)}")
    k = degs.pop() if degs else F.degree
    return HomogeneousPolynomial(k, {key: tuple(v) for key, v in terms.items()}, g)


def split_parity(F: MomentumPolynomial) -> tuple[MomentumPolynomial, MomentumPolynomial]:
    z = zeros(F.lattice)
    even = tuple(c if m % 2 == 0 else (z,) for m, c in enumerate(F.coeffs))
    odd = tuple(c if m % 2 == 1 else (z,) for m, c in enumerate(F.coeffs))
    return MomentumPolynomial(even, strict=F.strict), MomentumPolynomial(odd, strict=False)


# --- the restricted bracket -------------------------------------------------

def bracket_restricted(F: MomentumPolynomial, g: FourierField, E: float,
                       out_band: int | None = None) -> MomentumPolynomial:
    """``g * {F, H}_E``: the bracket with ``H`` restricted to ``H = E``, times ``g``.

    Coefficient at ``p_z^m`` (``1 <= m <= k+1``)::

        2 dbar a_{m-1} + E ((m+1) a_{m+1} dg + g d a_{m+1})

    and the free term is ``2 E Re d(g a_1)``.  Divide values by ``g`` to get the
    bracket itself (see :func:`evaluate_bracket`).
    """
    return _bracket(F, g, E, None, out_band)


def bracket_restricted_magnetic(F: MomentumPolynomial, g: FourierField, B: FourierField, E: float,
                                out_band: int | None = None) -> MomentumPolynomial:
    """As :func:`bracket_restricted` with ``{p_z, p_zbar} = i B``.

    The deformation adds ``2 i m B a_m`` to the ``p_z^m`` coefficient.
    """
    ok, asym = is_real(B, REALITY_TOL * max(1.0, B.max_coeff()))
    if not ok:
        raise ValueError(f"magnetic field must be real (asymmetry {asym:.3e})")
    return _bracket(F, g, E, B, out_band)


def _bracket(F, g, E, B, out_band):
    if E <= 0:
        raise ValueError("energy level must be positive")
    check_metric(g)
    a = F.at_energy(E)
    k = F.degree
    lat = g.lattice
    z = zeros(lat)
    a = a + [z, z]
    gz = d_z(g)
    out = []
    # free term
    if k >= 1:
        X = d_z(multiply(g, a[1], out_band))
        out.append((X + X.conj()) * E)
    else:
        out.append(z)
    for m in range(1, k + 2):
        c = d_zbar(a[m - 1]) * 2
        if m + 1 <= k:
            c = c + (multiply(a[m + 1], gz, out_band) * (m + 1) + multiply(g, d_z(a[m + 1]), out_band)) * E
        if B is not None and m <= k:
            c = c + multiply(B, a[m], out_band) * (2j * m)
        out.append(c)
    return MomentumPolynomial(tuple((c,) for c in out), strict=False)


def evaluate_bracket(Fb: MomentumPolynomial, g: FourierField, x, y, px, py):
    """Value of ``{F,H}_E`` from the g-normalized output of the bracket functions."""
    return evaluate_poly(Fb, x, y, px, py, tol=1e-9) / np.asarray(evaluate(g, x, y)).real


def is_zero(F: MomentumPolynomial, tol: float = 1e-10) -> bool:
    return all(f.max_coeff() <= tol for c in F.coeffs for f in c)


# --- JSON -----------------------------------------------------------------

def poly_to_json(F: MomentumPolynomial) -> dict:
    coeffs = []
    for c in F.coeffs:
        if len(c) == 1:
            coeffs.append(field_to_json(c[0]))
        else:
            coeffs.append([field_to_json(f) for f in c])
    return {"k": F.degree, "E_degree": F.E_degree, "coeffs": coeffs}


def poly_from_json(d: dict, strict: bool = True) -> MomentumPolynomial:
    cs = []
    for c in d["coeffs"]:
        if isinstance(c, list):
            cs.append(tuple(field_from_json(f) for f in c))
        else:
            cs.append((field_from_json(c),))
    if len(cs) != int(d["k"]) + 1:
        raise ValueError(f"expected {int(d['k']) + 1} coefficients, got {len(cs)}")
    F = MomentumPolynomial(tuple(cs), strict=strict)
    if "E_degree" in d and F.E_degree > int(d["E_degree"]):
        raise ValueError("declared E_degree is smaller than the stored E-polynomials")
    return F


def dumps_poly(F: MomentumPolynomial) -> str:
    return json.dumps(poly_to_json(F), sort_keys=True)
