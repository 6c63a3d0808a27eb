"""Band-limited doubly periodic fields and the d/dz, d/dzbar calculus on a torus.

A field is stored as a dense block of Fourier coefficients ``c[k + M, l + M]``
for ``|k|, |l| <= M`` where ``M`` is the field's own band (never larger than the
lattice band limit ``N``).  The value at a point is

    f(x, y) = sum_{k,l} c_{k,l} exp(i (kx * 2pi/Lx + ly * 2pi/Ly)).

With ``z = x + i y`` we use ``d/dz = (d_x - i d_y)/2`` and
``d/dzbar = (d_x + i d_y)/2``, so on the 2pi-lattice the mode ``(k, l)`` picks
up ``(ik + l)/2`` and ``(ik - l)/2`` respectively.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import convolve2d

TWO_PI = 2.0 * np.pi

#: default relative tolerance on the mean before inverting d/dz, d/dzbar
SOLVABILITY_RTOL = 1e-10


class BandLimitError(ValueError):
    pass


class UnsolvableError(ValueError):
    """Raised when inverting d/dz or d/dzbar on a field with nonzero mean."""

    def __init__(self, mean_value: complex, message: str | None = None):
        self.mean = complex(mean_value)
        super().__init__(message or f"field has nonzero mean {self.mean!r}; equation is unsolvable on the torus")


class LatticeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TorusLattice:
    Lx: float = TWO_PI
    Ly: float = TWO_PI
    N: int = 32

    def __post_init__(self):
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError(f"lattice periods must be positive, got Lx={self.Lx}, Ly={self.Ly}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"band limit must be a positive integer, got {self.N}")

    def wavenumbers(self, M: int) -> tuple[np.ndarray, np.ndarray]:
        k = np.arange(-M, M + 1)
        return TWO_PI * k / self.Lx, TWO_PI * k / self.Ly

    def grid(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        return np.arange(n) * self.Lx / n, np.arange(n) * self.Ly / n

    def to_json(self) -> dict:
        return {"Lx": self.Lx, "Ly": self.Ly, "N": self.N}


DEFAULT_LATTICE = TorusLattice()


@dataclass(frozen=True, eq=False)
class FourierField:
    lattice: TorusLattice
    coeffs: np.ndarray
    # l1 mass of modes dropped by the product that created this field
    truncation: float = field(default=0.0, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] % 2 != 1:
            raise ValueError(f"coefficient block must be square with odd side, got {c.shape}")
        if (c.shape[0] - 1) // 2 > self.lattice.N:
            raise BandLimitError(f"band {(c.shape[0] - 1) // 2} exceeds lattice limit {self.lattice.N}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite Fourier coefficient")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # --- basic views -------------------------------------------------
    @property
    def band(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    def coefficient(self, k: int, l: int) -> complex:
        M = self.band
        if abs(k) > M or abs(l) > M:
            return 0j
        return complex(self.coeffs[k + M, l + M])

    def modes(self) -> dict[tuple[int, int], complex]:
        M = self.band
        idx = np.argwhere(self.coeffs != 0)
        return {(int(i) - M, int(j) - M): complex(self.coeffs[i, j]) for i, j in idx}

    @property
    def mean(self) -> complex:
        return self.coefficient(0, 0)

    def max_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    # --- reshaping ---------------------------------------------------
    def padded(self, M: int) -> np.ndarray:
        """Coefficient block zero-padded (or cropped) to band ``M``."""
        c = self.coeffs
        m = self.band
        out = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
        r = min(m, M)
        out[M - r:M + r + 1, M - r:M + r + 1] = c[m - r:m + r + 1, m - r:m + r + 1]
        return out

    def trimmed(self) -> "FourierField":
        """Drop outer rings of exactly-zero coefficients."""
        c = self.coeffs
        M = self.band
        nz = np.argwhere(c != 0)
        if len(nz) == 0:
            return FourierField(self.lattice, np.zeros((1, 1), complex), self.truncation)
        need = int(np.max(np.abs(nz - M)))
        if need == M:
            return self
        return FourierField(self.lattice, c[M - need:M + need + 1, M - need:M + need + 1], self.truncation)

    def _with(self, coeffs: np.ndarray) -> "FourierField":
        return FourierField(self.lattice, coeffs, self.truncation)

    # --- arithmetic --------------------------------------------------
    def _check(self, other: "FourierField"):
        if self.lattice.Lx != other.lattice.Lx or self.lattice.Ly != other.lattice.Ly:
            raise LatticeMismatchError(f"{self.lattice} vs {other.lattice}")

    def __add__(self, other):
        if isinstance(other, FourierField):
            self._check(other)
            M = max(self.band, other.band)
            return FourierField(self.lattice, self.padded(M) + other.padded(M),
                                self.truncation + other.truncation)
        c = np.array(self.coeffs)
        c[self.band, self.band] += complex(other)
        return self._with(c)

    __radd__ = __add__

    def __neg__(self):
        return self._with(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FourierField):
            return multiply(self, other)
        return self._with(self.coeffs * complex(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._with(self.coeffs / complex(scalar))

    def conj(self) -> "FourierField":
        """The complex-conjugate function: mode (k,l) becomes conj(c_{-k,-l})."""
        return self._with(np.conj(self.coeffs[::-1, ::-1]))

    @property
    def real(self) -> "FourierField":
        return (self + self.conj()) * 0.5

    @property
    def imag(self) -> "FourierField":
        return (self - self.conj()) * (-0.5j)

    def without_mean(self) -> "FourierField":
        c = np.array(self.coeffs)
        c[self.band, self.band] = 0
        return self._with(c)

    def __call__(self, x, y):
        return evaluate(self, x, y)

    def on_grid(self, n: int = 64) -> np.ndarray:
        """Values on the uniform ``n x n`` grid, indexed ``[ix, iy]``."""
        xs, ys = self.lattice.grid(n)
        kx, ky = self.lattice.wavenumbers(self.band)
        ex = np.exp(1j * np.outer(xs, kx))
        ey = np.exp(1j * np.outer(ys, ky))
        return ex @ self.coeffs @ ey.T

    def sup_norm(self, n: int = 64) -> float:
        return float(np.max(np.abs(self.on_grid(n))))

    def __repr__(self):
        return f"FourierField(band={self.band}, modes={len(self.modes())}, mean={self.mean:.6g})"


# --- construction ---------------------------------------------------------

def make_field(lattice: TorusLattice, modes: Iterable[tuple[int, int, complex]]) -> FourierField:
    entries = list(modes)
    seen = set()
    M = 0
    for k, l, _ in entries:
        if (k, l) in seen:
            raise ValueError(f"duplicate mode ({k}, {l})")
        seen.add((k, l))
        if abs(k) > lattice.N or abs(l) > lattice.N:
            raise BandLimitError(f"mode ({k}, {l}) outside band limit N={lattice.N}")
        M = max(M, abs(k), abs(l))
    c = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
    for k, l, v in entries:
        c[k + M, l + M] = v
    return FourierField(lattice, c)


def constant(value: complex, lattice: TorusLattice = DEFAULT_LATTICE) -> FourierField:
    return FourierField(lattice, np.full((1, 1), complex(value)))


def zeros(lattice: TorusLattice = DEFAULT_LATTICE) -> FourierField:
    return constant(0.0, lattice)


def from_grid(values: np.ndarray, lattice: TorusLattice, band: int) -> FourierField:
    """Project samples on a uniform grid (indexed ``[ix, iy]``) onto modes ``|k|,|l| <= band``."""
    values = np.asarray(values)
    nx, ny = values.shape
    if nx < 2 * band + 1 or ny < 2 * band + 1:
        raise ValueError("grid too coarse for requested band")
    hat = np.fft.fft2(values) / (nx * ny)
    ks = np.arange(-band, band + 1)
    return FourierField(lattice, hat[np.ix_(ks % nx, ks % ny)])


def random_real_field(rng: np.random.Generator, lattice: TorusLattice, band: int,
                      scale: float = 1.0, mean: float = 0.0) -> FourierField:
    """Real field with Gaussian modes up to ``band``; coefficients decay like 1/(1+|k|+|l|)."""
    M = band
    k = np.arange(-M, M + 1)
    decay = 1.0 / (1.0 + np.abs(k)[:, None] + np.abs(k)[None, :])
    c = (rng.standard_normal((2 * M + 1, 2 * M + 1)) + 1j * rng.standard_normal((2 * M + 1, 2 * M + 1))) * decay
    c = 0.5 * (c + np.conj(c[::-1, ::-1]))
    c[M, M] = 0
    c *= scale
    c[M, M] = mean
    return FourierField(lattice, c)


def random_metric(rng: np.random.Generator, lattice: TorusLattice, band: int,
                  amplitude: float = 0.5, base: float = 1.0) -> FourierField:
    """Positive real field ``base + fluctuation`` with ``sum |fluct coeffs| = amplitude*base``."""
    if not 0 <= amplitude < 1:
        raise ValueError("amplitude must lie in [0, 1) to guarantee positivity")
    f = random_real_field(rng, lattice, band)
    l1 = np.sum(np.abs(f.coeffs))
    if l1 > 0:
        f = f * (amplitude * base / l1)
    return f + base


# --- evaluation -----------------------------------------------------------

def evaluate(f: FourierField, x, y):
    """Value(s) of ``f`` at point(s); scalar in, complex out; arrays broadcast."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xb, yb = np.broadcast_arrays(x, y)
    kx, ky = f.lattice.wavenumbers(f.band)
    ex = np.exp(1j * xb[..., None] * kx)
    ey = np.exp(1j * yb[..., None] * ky)
    out = np.einsum("...k,kl,...l->...", ex, f.coeffs, ey)
    return complex(out) if out.ndim == 0 else out


def multiply(f: FourierField, g: FourierField, out_band: int | None = None) -> FourierField:
    """Exact coefficient convolution, truncated to ``|k|,|l| <= out_band``.

    ``out_band`` defaults to the lattice band limit.  The l1 mass of the discarded
    modes is stored on the result as ``truncation``.
    """
    f._check(g)
    if out_band is None:
        out_band = f.lattice.N
    if out_band > f.lattice.N:
        raise BandLimitError(f"out_band {out_band} exceeds lattice limit {f.lattice.N}")
    full = convolve2d(f.coeffs, g.coeffs, mode="full")
    M = f.band + g.band
    if M <= out_band:
        return FourierField(f.lattice, full)
    r = out_band
    kept = full[M - r:M + r + 1, M - r:M + r + 1]
    dropped = float(np.sum(np.abs(full)) - np.sum(np.abs(kept)))
    return FourierField(f.lattice, kept, truncation=dropped)


# --- differential operators -----------------------------------------------

def _symbols(f: FourierField):
    kx, ky = f.lattice.wavenumbers(f.band)
    return kx[:, None], ky[None, :]


def d_x(f: FourierField) -> FourierField:
    kx, _ = _symbols(f)
    return f._with(f.coeffs * (1j * kx))


def d_y(f: FourierField) -> FourierField:
    _, ky = _symbols(f)
    return f._with(f.coeffs * (1j * ky))


def d_z(f: FourierField) -> FourierField:
    kx, ky = _symbols(f)
    return f._with(f.coeffs * ((1j * kx + ky) / 2))


def d_zbar(f: FourierField) -> FourierField:
    kx, ky = _symbols(f)
    return f._with(f.coeffs * ((1j * kx - ky) / 2))


def laplace(f: FourierField) -> FourierField:
    kx, ky = _symbols(f)
    return f._with(f.coeffs * (-(kx ** 2) - ky ** 2))


def _check_solvable(f: FourierField, rtol: float):
    scale = f.max_coeff()
    if abs(f.mean) > rtol * scale:
        raise UnsolvableError(f.mean)


def _invert(f: FourierField, symbol: np.ndarray, rtol: float) -> FourierField:
    _check_solvable(f, rtol)
    M = f.band
    sym = np.array(symbol, dtype=complex)
    sym[M, M] = 1.0
    c = f.coeffs / sym
    c[M, M] = 0
    return f._with(c)


def inv_d_z(f: FourierField, rtol: float = SOLVABILITY_RTOL) -> FourierField:
    """Mean-zero solution ``u`` of ``du/dz = f``."""
    kx, ky = _symbols(f)
    return _invert(f, (1j * kx + ky) / 2 * np.ones_like(f.coeffs), rtol)


def inv_d_zbar(f: FourierField, rtol: float = SOLVABILITY_RTOL) -> FourierField:
    """Mean-zero solution ``v`` of ``dv/dzbar = f``."""
    kx, ky = _symbols(f)
    return _invert(f, (1j * kx - ky) / 2 * np.ones_like(f.coeffs), rtol)


def inv_laplace(f: FourierField, rtol: float = SOLVABILITY_RTOL) -> FourierField:
    """Mean-zero solution of ``(d_xx + d_yy) u = f``."""
    kx, ky = _symbols(f)
    return _invert(f, (-(kx ** 2) - ky ** 2) * np.ones_like(f.coeffs), rtol)


def inv_d_zdzbar(f: FourierField, rtol: float = SOLVABILITY_RTOL) -> FourierField:
    """Mean-zero solution of ``d^2 u / dz dzbar = f``; equals ``4 * inv_laplace(f)``."""
    kx, ky = _symbols(f)
    return _invert(f, (1j * kx + ky) * (1j * kx - ky) / 4 * np.ones_like(f.coeffs), rtol)


def mean(f: FourierField) -> complex:
    return f.mean


def is_real(f: FourierField, tol: float = 1e-10) -> tuple[bool, float]:
    """Conjugate symmetry check; returns ``(ok, max |c_{k,l} - conj(c_{-k,-l})|)``."""
    asym = float(np.max(np.abs(f.coeffs - np.conj(f.coeffs[::-1, ::-1]))))
    return asym <= tol, asym


def depends_on_x_only(f: FourierField, tol: float = 0.0) -> bool:
    M = f.band
    off = np.delete(f.coeffs, M, axis=1)
    return bool(np.all(np.abs(off) <= tol))


def depends_on_y_only(f: FourierField, tol: float = 0.0) -> bool:
    M = f.band
    off = np.delete(f.coeffs, M, axis=0)
    return bool(np.all(np.abs(off) <= tol))


def polyval_field(coeffs: Sequence[float], u: FourierField, out_band: int | None = None) -> FourierField:
    """``sum_j coeffs[j] * u**j`` by Horner's rule (``coeffs`` in increasing degree)."""
    acc = constant(coeffs[-1], u.lattice)
    trunc = 0.0
    for c in reversed(coeffs[:-1]):
        acc = multiply(acc, u, out_band)
        trunc += acc.truncation
        acc = acc + c
    return FourierField(acc.lattice, acc.coeffs, trunc)


# --- JSON -----------------------------------------------------------------

def lattice_from_json(d: dict) -> TorusLattice:
    return TorusLattice(float(d.get("Lx", TWO_PI)), float(d.get("Ly", TWO_PI)), int(d.get("N", 32)))


def field_to_json(f: FourierField, real: bool | None = None) -> dict:
    out = {
        "lattice": f.lattice.to_json(),
        "modes": [{"k": k, "l": l, "re": v.real, "im": v.imag} for (k, l), v in sorted(f.modes().items())],
    }
    if real is not None:
        out["real"] = bool(real)
    return out


def field_from_json(d: dict, lattice: TorusLattice | None = None, tol: float = 1e-10) -> FourierField:
    lat = lattice_from_json(d["lattice"]) if "lattice" in d else (lattice or DEFAULT_LATTICE)
    f = make_field(lat, [(int(m["k"]), int(m["l"]), complex(m.get("re", 0.0), m.get("im", 0.0)))
                         for m in d.get("modes", [])])
    if d.get("real", False):
        ok, asym = is_real(f, tol)
        if not ok:
            raise ValueError(f"field declared real but conjugate asymmetry is {asym:.3e}")
    return f


def dumps_field(f: FourierField, **kw) -> str:
    return json.dumps(field_to_json(f, **kw), sort_keys=True)
