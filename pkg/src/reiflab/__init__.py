"""Poisson solves and boundary-regularity diagnostics on flat-fractal planar domains."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    PolygonalDomain,
    FlatnessReport,
    GeometryError,
    disk_domain,
    estimate_flatness,
    generate_flat_fractal,
    lshape_domain,
    point_in_domain,
    regular_polygon_domain,
    square_domain,
)
from .mesh import TriMesh, MeshError, refine_toward, triangulate  # noqa: F401
from .fem import (  # noqa: F401
    ConvergenceError,
    ScalarField,
    SourceTerm,
    gradient_field,
    solve_poisson,
)
from .functional import (  # noqa: F401
    MonotonicityTrace,
    acf_trace,
    check_monotone,
    gronwall_check,
    ipp_residual,
    psi,
    weighted_energy,
)
from .eigen import beta_from_sigma, cap_eigenvalue, flatness_threshold, sigma_from_beta  # noqa: F401
from .exponents import ExponentBundle, alpha_max_cor1, alpha_max_cor2, bundle_from_pq  # noqa: F401
from .analysis import (  # noqa: F401
    campanato_seminorm,
    energy_decay_fit,
    holder_exponent_fit,
    poincare_ratio,
    psi_decay_fit,
)
