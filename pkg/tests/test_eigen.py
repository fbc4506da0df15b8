import numpy as np
import pytest

from reiflab import eigen


def test_arc_closed_forms():
    assert eigen.cap_eigenvalue(2, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert eigen.cap_eigenvalue(2, -0.5) == pytest.approx(0.5625, abs=1e-12)


def test_hemisphere_value():
    assert eigen.cap_eigenvalue(3, 0.0) == pytest.approx(2.0, abs=1e-6)


def test_cap_domain_error():
    for t in (-1.0, 1.0, -2.0, 1.5):
        with pytest.raises(ValueError):
            eigen.cap_eigenvalue(2, t)
        with pytest.raises(ValueError):
            eigen.cap_eigenvalue(3, t)


@pytest.mark.parametrize("n", [2, 3])
def test_cap_monotone_in_t(n):
    grid = np.linspace(-0.95, 0.95, 50)
    vals = [eigen.cap_eigenvalue(n, t) for t in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_arc_floor():
    for t in np.linspace(-0.999, 0.999, 25):
        assert eigen.cap_eigenvalue(2, t) > 0.25


def test_beta_sigma_examples():
    assert eigen.beta_from_sigma(2, 0.25) == pytest.approx(1.0, abs=1e-14)
    assert eigen.beta_from_sigma(3, 0.75) == pytest.approx(1.0, abs=1e-14)
    for n in (2, 3, 4):
        assert eigen.beta_from_sigma(n, n - 1 - 1e-9) > 2 - 1e-4


def test_sigma_beta_examples():
    assert eigen.sigma_from_beta(2, 1.0) == pytest.approx(0.25, abs=1e-14)
    assert eigen.sigma_from_beta(3, 1.0) == pytest.approx(0.75, abs=1e-14)
    assert eigen.sigma_from_beta(2, 2 - 1e-9) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("beta", [0.1, 0.5, 1.0, 1.5, 1.9])
def test_roundtrip(n, beta):
    assert eigen.beta_from_sigma(n, eigen.sigma_from_beta(n, beta)) == \
        pytest.approx(beta, abs=1e-12)


def test_range_rejections():
    with pytest.raises(ValueError):
        eigen.beta_from_sigma(2, 0.0)
    with pytest.raises(ValueError):
        eigen.beta_from_sigma(2, 1.0)  # sigma* = N-1 excluded
    with pytest.raises(ValueError):
        eigen.sigma_from_beta(2, 2.0)


def test_threshold_2d_example():
    thr = eigen.flatness_threshold(2, 1.5)
    assert thr.sigma_star == pytest.approx(0.5625, abs=1e-12)
    assert thr.t_star == pytest.approx(-0.5, abs=1e-9)
    assert thr.eps_max == pytest.approx(0.25, abs=1e-9)
    assert not thr.unconditional


def test_threshold_2d_unconditional():
    thr = eigen.flatness_threshold(2, 1.0)
    assert thr.unconditional
    assert thr.eps_max == pytest.approx(0.5, abs=1e-6)
    assert thr.t_star == -1.0


def test_threshold_3d_hemisphere_limit():
    thr = eigen.flatness_threshold(3, 2 - 1e-6)
    assert abs(thr.t_star) < 5e-3
    assert thr.eps_max < 3e-3


def test_threshold_3d_consistency():
    # lambda_1 at the returned cap height reproduces sigma*
    thr = eigen.flatness_threshold(3, 1.2)
    assert eigen.cap_eigenvalue(3, thr.t_star) == pytest.approx(thr.sigma_star, abs=1e-6)
    assert thr.t_star < 0
