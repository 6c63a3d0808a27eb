import numpy as np
import pytest

from torus_integrals.fourier_field import DEFAULT_LATTICE, make_field, random_metric, random_real_field
from torus_integrals.momentum_poly import MomentumPolynomial


def random_complex_field(rng, band=2, scale=1.0, lattice=DEFAULT_LATTICE):
    return (random_real_field(rng, lattice, band, scale) + random_real_field(rng, lattice, band, scale) * 1j
            + complex(*rng.standard_normal(2)) * scale)


def random_poly(rng, k, band=2, lattice=DEFAULT_LATTICE):
    a0 = random_real_field(rng, lattice, band, mean=float(rng.standard_normal()))
    return MomentumPolynomial.from_fields([a0] + [random_complex_field(rng, band, lattice=lattice)
                                                 for _ in range(k)])


def cos_field(amp=1.0, k=0, l=0, base=0.0, lattice=DEFAULT_LATTICE):
    return make_field(lattice, [(0, 0, base), (k, l, amp / 2), (-k, -l, amp / 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def generic_metric(rng):
    return random_metric(rng, DEFAULT_LATTICE, 3, amplitude=0.5, base=1.0)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
