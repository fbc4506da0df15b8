"""Shared meshes and solves; session-scoped because the big ones are reused a lot."""
import numpy as np
import pytest

import reiflab as rl
from reiflab import analysis


def disk_exact(points):
    return (1.0 - points[:, 0] ** 2 - points[:, 1] ** 2) / 4.0


@pytest.fixture(scope="session")
def disk_domain():
    return rl.disk_domain(1.0, 512, r0=1.0)


@pytest.fixture(scope="session")
def disk_mesh(disk_domain):
    return rl.triangulate(disk_domain, 0.02)


@pytest.fixture(scope="session")
def disk_solution(disk_mesh):
    return rl.solve_poisson(disk_mesh, rl.SourceTerm.constant(1.0))


@pytest.fixture(scope="session")
def disk_exact_field(disk_mesh):
    return rl.ScalarField.from_function(disk_mesh, disk_exact)


@pytest.fixture(scope="session")
def disk_fine():
    """Finer disk with the polygon resolution scaled to h (curved-domain refinement)."""
    dom = rl.disk_domain(1.0, 1024, r0=1.0)
    mesh = rl.triangulate(dom, 0.01)
    u = rl.solve_poisson(mesh, rl.SourceTerm.constant(1.0))
    return dom, mesh, u


@pytest.fixture(scope="session")
def square_mesh():
    return rl.triangulate(rl.square_domain(1.0), 0.01)


@pytest.fixture(scope="session")
def square_solution(square_mesh):
    return rl.solve_poisson(square_mesh, rl.SourceTerm.constant(1.0))


@pytest.fixture(scope="session")
def koch_domain():
    base = rl.regular_polygon_domain(8, 1.0, r0=0.8)
    return rl.generate_flat_fractal(base, 0.05, 3, seed=7)


@pytest.fixture(scope="session")
def koch_mesh(koch_domain):
    return rl.triangulate(koch_domain, 0.02)


@pytest.fixture(scope="session")
def koch_solution(koch_mesh):
    return rl.solve_poisson(koch_mesh, rl.SourceTerm.constant(1.0))


@pytest.fixture(scope="session")
def koch_fine(koch_domain):
    mesh = rl.triangulate(koch_domain, 0.01)
    return mesh, rl.solve_poisson(mesh, rl.SourceTerm.constant(1.0))


@pytest.fixture(scope="session")
def koch_flatness(koch_domain):
    r0 = koch_domain.r0
    return rl.estimate_flatness(koch_domain, [r0, r0 / 2, r0 / 4, r0 / 8],
                                centers_per_scale=12, angular_resolution=48)


@pytest.fixture(scope="session")
def lshape_domain_fix():
    return rl.lshape_domain(r0=0.5)


@pytest.fixture(scope="session")
def lshape_mesh(lshape_domain_fix):
    coarse = rl.triangulate(lshape_domain_fix, 0.015)
    return rl.refine_toward(coarse, (0.5, 0.5), 4, r0=0.5)


@pytest.fixture(scope="session")
def lshape_solution(lshape_mesh):
    return rl.solve_poisson(lshape_mesh, rl.SourceTerm.constant(1.0))


@pytest.fixture(scope="session")
def lshape_bump_solution(lshape_mesh):
    f = rl.SourceTerm.bump((0.25, 0.25), 0.15, 1.0)
    return rl.solve_poisson(lshape_mesh, f), f


@pytest.fixture(scope="session")
def koch_boundary_centers(koch_domain):
    return koch_domain.boundary_points_at(np.array([0.07, 0.24, 0.41, 0.58, 0.86]))


def decay_radii(rmin, rmax, per_octave=2):
    return analysis.geometric_radii(rmin, rmax, per_octave)
