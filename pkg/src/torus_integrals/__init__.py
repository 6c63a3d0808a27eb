"""Polynomial first integrals of geodesic and magnetic geodesic flows on the two-torus."""
from .fourier_field import (
    DEFAULT_LATTICE,
    BandLimitError,
    FourierField,
    LatticeMismatchError,
    TorusLattice,
    UnsolvableError,
    d_z,
    d_zbar,
    evaluate,
    inv_d_z,
    inv_d_zbar,
    inv_laplace,
    is_real,
    make_field,
    mean,
    multiply,
)
from .momentum_poly import (
    HomogeneousPolynomial,
    MetricError,
    MomentumPolynomial,
    RealityError,
    bracket_restricted,
    bracket_restricted_magnetic,
    evaluate_poly,
    homogenize,
    split_parity,
    substitute_energy,
)
from .cascade import (
    CascadeReport,
    CascadeState,
    ObstructionError,
    Verdict,
    build_liouville,
    cascade_step,
    hopf_residual,
    obstruction_reduced,
    run_cascade,
)
from .flow_sim import (
    IntegrationControls,
    IntegrationError,
    PhaseState,
    SystemSpec,
    Trajectory,
    conservation_report,
    integrate,
)
from .magnetic import (
    MagneticCandidate,
    dgrw_cubic,
    dgrw_trig,
    extract_B,
    linear_magnetic_system,
    multi_level_test,
    quadratic_residuals,
)

__version__ = "0.1.0"
