import numpy as np
import pytest

import reiflab as rl
from reiflab import geometry as geo
from reiflab.geometry import GeometryError, PolygonalDomain


# -- domain type -------------------------------------------------------------

def test_rejects_self_intersection():
    # positive area, one proper edge crossing
    crossed = np.array([[0, 0], [2, 0], [2, 1], [1, -0.5], [0, 1]], dtype=float)
    with pytest.raises(GeometryError, match="not simple"):
        PolygonalDomain(crossed, 0.5)


def test_rejects_clockwise():
    cw = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float)
    with pytest.raises(GeometryError, match="counter-clockwise"):
        PolygonalDomain(cw, 0.5)


def test_rejects_bad_r0():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    with pytest.raises(GeometryError):
        PolygonalDomain(sq, 0.0)
    with pytest.raises(GeometryError):
        PolygonalDomain(sq, 10.0)  # above the diameter


def test_area_perimeter():
    sq = rl.square_domain(1.0)
    assert sq.area == pytest.approx(1.0)
    assert sq.perimeter == pytest.approx(4.0)
    assert rl.lshape_domain().area == pytest.approx(0.75)


def test_json_roundtrip(tmp_path):
    dom = rl.generate_flat_fractal(rl.square_domain(1.0), 0.05, 2, seed=3)
    path = tmp_path / "dom.json"
    dom.to_json(path)
    back = PolygonalDomain.from_json(path)
    assert np.array_equal(back.vertices, dom.vertices)
    assert back.r0 == dom.r0
    assert back.meta["depth"] == 2


# -- point membership ----------------------------------------------------------

def test_point_in_domain_trivial():
    sq = rl.square_domain(1.0)
    assert rl.point_in_domain(sq, (0.5, 0.5))
    assert not rl.point_in_domain(sq, (2.0, 2.0))
    assert geo.classify_point(sq, (0.5, 0.0)) == "boundary"
    assert geo.classify_point(sq, (0.5, 1e-13)) == "boundary"


def test_area_by_probe_grid(koch_domain):
    lo, hi = koch_domain.bbox
    gx = np.linspace(lo[0], hi[0], 100)
    gy = np.linspace(lo[1], hi[1], 100)
    px, py = np.meshgrid(gx, gy)
    pts = np.column_stack([px.ravel(), py.ravel()])
    frac = np.mean(koch_domain.contains_many(pts))
    est = frac * (hi[0] - lo[0]) * (hi[1] - lo[1])
    assert est == pytest.approx(koch_domain.area, rel=0.02)


# -- fractal generator ---------------------------------------------------------

def test_fractal_vertex_counts():
    sq = rl.square_domain(1.0)
    assert rl.generate_flat_fractal(sq, 0.0, 1, seed=1).n_vertices == 16
    assert rl.generate_flat_fractal(sq, 0.0, 3, seed=1).n_vertices == 256


def test_fractal_zero_amplitude_traces_base():
    sq = rl.square_domain(1.0)
    dom = rl.generate_flat_fractal(sq, 0.0, 3, seed=1)
    # every vertex stays on the base square's boundary
    d = sq.distance_to_boundary(dom.vertices)
    assert d.max() < 1e-14
    assert dom.area == pytest.approx(1.0, abs=1e-14)


def test_fractal_reproducible_and_seeded():
    base = rl.regular_polygon_domain(8, 1.0, r0=0.8)
    a = rl.generate_flat_fractal(base, 0.1, 2, seed=9)
    b = rl.generate_flat_fractal(base, 0.1, 2, seed=9)
    c = rl.generate_flat_fractal(base, 0.1, 2, seed=10)
    assert np.array_equal(a.vertices, b.vertices)
    assert not np.array_equal(a.vertices, c.vertices)


def test_fractal_rejects_bad_amplitude():
    with pytest.raises(GeometryError):
        rl.generate_flat_fractal(rl.square_domain(1.0), 0.5, 1, seed=0)


def test_fractal_flatness_monotone_in_bump():
    """eps_global grows with the bump amplitude on a corner-light base."""
    base = rl.regular_polygon_domain(32, 1.0, r0=0.5)
    eps = []
    for eta in (0.01, 0.05, 0.1):
        dom = rl.generate_flat_fractal(base, eta, 2, seed=4)
        rep = rl.estimate_flatness(dom, [0.25, 0.5], centers_per_scale=8,
                                   angular_resolution=48)
        eps.append(rep.eps_global)
    assert eps[0] <= eps[1] + 1e-9 <= eps[2] + 2e-9
    assert eps[2] > eps[0]


def test_fractal_square_flatness(koch_domain_square):
    """Square-based fractal: corners dominate eps_global (bump effect is smaller)."""
    rep = koch_domain_square
    assert 0.3 <= rep.eps_global <= 0.55
    # away from corners, the bump-scale flatness stays small
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    off_corner = [s.eps_hat for s in rep.samples
                  if np.linalg.norm(corners - s.center, axis=1).min() > 0.25
                  and s.radius <= 0.125]
    assert off_corner and max(off_corner) <= 0.2  # bump tips: eps ~ 3*eta


@pytest.fixture(scope="module")
def koch_domain_square():
    dom = rl.generate_flat_fractal(rl.square_domain(1.0), 0.05, 3, seed=7)
    return rl.estimate_flatness(dom, [0.125, 0.25, 0.5, 1.0], centers_per_scale=12,
                                angular_resolution=48)


# -- flatness estimation --------------------------------------------------------

def test_flatness_straight_edge():
    rect = geo.rectangle_domain(2.0, 1.0, r0=0.5)
    rep = rl.estimate_flatness(rect, [0.3], centers=[(1.0, 0.0)])
    s = rep.samples[0]
    assert s.eps_hat < 1e-3
    assert s.separation_ok


def test_flatness_disk_sagitta():
    """Best-line flatness of a circular arc: eps = r/(4R) by equioscillation."""
    disk = rl.disk_domain(1.0, 512, r0=1.0)
    rep = rl.estimate_flatness(disk, [0.25], centers=[(1.0, 0.0)])
    assert rep.samples[0].eps_hat == pytest.approx(0.25 / 4, rel=0.2)


def test_flatness_square_corner():
    sq = rl.square_domain(1.0)
    for r in (0.3, 0.6):
        rep = rl.estimate_flatness(sq, [r], centers=[(0.0, 0.0)])
        assert 0.35 <= rep.samples[0].eps_hat <= 0.45


def test_flatness_eps_below_one(koch_flatness):
    assert all(s.eps_hat <= 1.01 for s in koch_flatness.samples)
    assert koch_flatness.eps_global == max(s.eps_hat for s in koch_flatness.samples)
    assert all(0 < s.radius <= koch_flatness.r0_used for s in koch_flatness.samples)


def test_flatness_scale_invariance():
    dom = rl.generate_flat_fractal(rl.regular_polygon_domain(8, 1.0, r0=0.8),
                                   0.08, 2, seed=2)
    centers = dom.boundary_points_at(np.array([0.13, 0.55]))
    base = rl.estimate_flatness(dom, [0.4], centers=centers)
    for s in (0.5, 2.0):
        scaled = rl.estimate_flatness(dom.scaled(s), [0.4 * s], centers=centers * s)
        for a, b in zip(base.samples, scaled.samples):
            assert b.eps_hat == pytest.approx(a.eps_hat, rel=0.05, abs=5e-3)


def test_flatness_rigid_invariance():
    dom = rl.generate_flat_fractal(rl.regular_polygon_domain(8, 1.0, r0=0.8),
                                   0.08, 2, seed=2)
    c = dom.boundary_points_at(np.array([0.37]))
    base = rl.estimate_flatness(dom, [0.4], centers=c)
    moved = dom.transformed(angle=0.7, shift=(3.0, -1.0))
    rot = np.array([[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]])
    rep = rl.estimate_flatness(moved, [0.4], centers=c @ rot.T + [3.0, -1.0])
    assert rep.samples[0].eps_hat == pytest.approx(base.samples[0].eps_hat,
                                                   rel=0.05, abs=5e-3)


def test_flatness_refuses_tiny_scale():
    sq = rl.square_domain(1.0)
    with pytest.raises(GeometryError, match="sample spacing"):
        rl.estimate_flatness(sq, [0.05], sample_spacing=0.04)


def test_flatness_rejects_bad_scales():
    sq = rl.square_domain(1.0)
    with pytest.raises(GeometryError):
        rl.estimate_flatness(sq, [2.0])  # above r0


def test_separation_two_sided(koch_flatness):
    assert all(s.separation_ok for s in koch_flatness.samples)


def test_flatness_csv(tmp_path, koch_flatness):
    path = tmp_path / "flatness.csv"
    koch_flatness.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "center_x,center_y,radius,eps_hat,separation_ok"
    assert len(lines) == len(koch_flatness.samples) + 1


def test_fractal_rejects_self_intersection():
    # bumps from the two walls of a narrow notch collide
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0.515],
                  [0.8, 0.515], [0.8, 0.485], [0, 0.485]], dtype=float)
    dom = PolygonalDomain(v, 0.1)
    with pytest.raises(GeometryError, match="edges .* and .*"):
        rl.generate_flat_fractal(dom, 0.2, 1, seed=None)
