import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from vectorgas.exceptions import DomainError, MassMismatchError, SingularPointError, TruncationError
from vectorgas.fields import ModelParams
from vectorgas.measures import (
    ConstraintMeasure,
    EmpiricalMeasure,
    GridMeasure,
    Lattice,
    SphereMeasure,
    bl_distance,
    circle_angle,
    default_lattice_size,
    lattice_points,
    quantile_discretize,
    sigma_density,
    sigma_mass,
    sigma_n_mass,
    snap_to_lattice,
    stereo_inverse,
    stereo_map,
    stereo_pull,
    stereo_push,
)
from vectorgas.special import bessel_zero


def dual_bl(z1, w1, z2, w2):
    """Bounded-Lipschitz distance by the function-side LP:
    maximise sum f (w1 - w2) over |f| <= 1, |f_i - f_j| <= |z_i - z_j|."""
    z = np.concatenate([z1, z2])
    c = np.concatenate([w1, -w2])
    n = z.shape[0]
    d = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=-1)
    rows, rhs = [], []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = np.zeros(n)
                r[i], r[j] = 1.0, -1.0
                rows.append(r)
                rhs.append(d[i, j])
    tight = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    res = optimize.linprog(
        -c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=[(-1, 1)] * n, method="highs", options=tight
    )
    assert res.status == 0
    return -res.fun


# ------------------------------------------------------------ containers


def test_grid_measure_validation():
    with pytest.raises(DomainError):
        GridMeasure([0, 1, 1], [0.5, 0.5])
    with pytest.raises(DomainError):
        GridMeasure([0, 1], [-0.1])
    with pytest.raises(DomainError):
        GridMeasure([0, 1, 2], [1.0])
    with pytest.raises(MassMismatchError):
        GridMeasure([0, 1], [0.5], mass=1.0)
    m = GridMeasure([0, 1, 3], [0.25, 0.75])
    assert m.mass == 1.0 and np.allclose(m.points, [0.5, 2.0]) and np.allclose(m.widths, [1, 2])
    with pytest.raises(ValueError):
        m.weights[0] = 3.0


def test_grid_measure_moments_exact():
    m = GridMeasure.uniform(0.0, 2.0, 7)
    assert m.moment(1) == pytest.approx(1.0, rel=1e-14)
    assert m.moment(2) == pytest.approx(4.0 / 3.0, rel=1e-14)
    assert m.cdf(1.0) == pytest.approx(0.5, rel=1e-14)


def test_grid_from_cdf():
    edges = np.linspace(0, 1, 11)
    m = GridMeasure.from_cdf(edges, lambda t: t**2, mass=0.5)
    assert m.mass == pytest.approx(0.5) and np.all(np.diff(m.weights) > 0)


def test_empirical_measure():
    m = EmpiricalMeasure.normalized([1.0, 2.0, 3.0, 4.0], mass=0.5)
    assert m.mass == pytest.approx(0.5) and m.atom_mass == 0.125
    assert m.moment(1) == pytest.approx(1.25)
    with pytest.raises(DomainError):
        EmpiricalMeasure([], 1.0)
    with pytest.raises(DomainError):
        EmpiricalMeasure([1.0], 0.0)


# --------------------------------------------------------------- lattice


def test_lattice_first_point():
    lat = lattice_points(ModelParams(1.0, 0, 1), 5)
    ref = -((bessel_zero(0.0, 0) / 2.0) ** 2)
    assert lat.points[0] == pytest.approx(ref, rel=1e-14)
    assert lat.points[0] == pytest.approx(-1.4457964907366, rel=1e-12)


@given(st.floats(0.05, 20.0), st.integers(0, 4), st.integers(1, 60), st.integers(1, 300))
def test_lattice_negative_decreasing(a, alpha, n, K):
    lat = lattice_points(ModelParams(a, alpha, n), K)
    assert lat.count == K and np.all(lat.points < 0) and np.all(np.diff(lat.points) < 0)


def test_lattice_domain():
    with pytest.raises(DomainError):
        lattice_points(ModelParams(1.0, 0, 2), 0)


def test_default_lattice_size_covers_window():
    p = ModelParams(2.0, 1, 40)
    lat = lattice_points(p, default_lattice_size(p, 5.0))
    assert lat.points[-1] < -5.0


# ------------------------------------------------------------ constraint


def test_sigma_density_values():
    assert sigma_density(1.0, -1.0) == pytest.approx(1 / math.pi)
    assert sigma_density(4.0, -4.0) == pytest.approx(1 / math.pi)
    with pytest.raises(SingularPointError):
        sigma_density(1.0, 0.0)
    with pytest.raises(DomainError):
        sigma_density(1.0, 1.0)


def test_sigma_mass_closed_form_and_quadrature():
    from scipy.integrate import quad

    assert sigma_mass(1.0, -1.0) == pytest.approx(0.6366197723675814, rel=1e-15)
    val, _ = quad(lambda x: sigma_density(3.0, x), -2.0, 0.0)
    assert val == pytest.approx(sigma_mass(3.0, -2.0), rel=1e-8)
    c = ConstraintMeasure(3.0)
    caps = c.cell_caps([-2.0, -1.0, -0.25, 0.0])
    assert caps.sum() == pytest.approx(sigma_mass(3.0, -2.0), rel=1e-14)


def test_counting_measure_converges():
    gaps = [abs(sigma_n_mass(ModelParams(1.0, 0, n), -1.0) - sigma_mass(1.0, -1.0)) for n in (10, 100, 1000, 10_000)]
    assert gaps[-1] <= 0.01
    assert gaps[-1] < gaps[0]


# ------------------------------------------------------- compactification


def test_stereo_map_values():
    assert np.allclose(stereo_map(0.0), [0.0, 0.0])
    d = np.linalg.norm(stereo_map(1.0) - stereo_map(0.0))
    assert d == pytest.approx(1 / math.sqrt(2), rel=1e-15)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_chord_metric_identity(x, y):
    d = np.linalg.norm(stereo_map(x) - stereo_map(y))
    ref = abs(x - y) / math.sqrt((1 + x * x) * (1 + y * y))
    assert d == pytest.approx(ref, rel=1e-9, abs=1e-15)


@given(st.lists(st.floats(-1e5, 1e5), min_size=1, max_size=20))
def test_push_pull_round_trip(atoms):
    m = EmpiricalMeasure(atoms, 0.5)
    s = stereo_push(m)
    assert s.mass == pytest.approx(m.mass, rel=1e-15) and s.mass_at_infinity == 0
    back = stereo_pull(s)
    assert np.allclose(back.atoms, atoms, rtol=1e-12, atol=1e-12)


def test_points_on_circle_and_angles():
    x = np.linspace(-50, 50, 101)
    z = stereo_map(x)
    assert np.allclose(np.hypot(z[:, 0], z[:, 1] - 0.5), 0.5, atol=1e-12)
    th = circle_angle(z)
    assert np.allclose(np.stack([np.sin(th) / 2, (1 - np.cos(th)) / 2], -1), z, atol=1e-14)
    assert np.allclose(stereo_inverse(z), x, rtol=1e-12)
    with pytest.raises(DomainError):
        SphereMeasure([[0.3, 0.3]], [1.0])


def test_grid_push_keeps_cells():
    m = GridMeasure.uniform(0.0, 3.0, 5)
    back = stereo_pull(stereo_push(m))
    assert np.array_equal(back.edges, m.edges) and np.array_equal(back.weights, m.weights)


# ------------------------------------------------------------- BL metric


def test_bl_self_distance_zero():
    s = stereo_push(GridMeasure.uniform(0.0, 4.0, 50))
    assert bl_distance(s, s) == 0.0


def test_bl_two_atoms():
    s0 = stereo_push(EmpiricalMeasure([0.0], 1.0))
    s1 = stereo_push(EmpiricalMeasure([1.0], 1.0))
    assert bl_distance(s0, s1, n_bins=None) == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    assert abs(bl_distance(s0, s1) - 1 / math.sqrt(2)) <= 2 * math.pi / 512
    assert dual_bl(s0.points, s0.weights, s1.points, s1.weights) == pytest.approx(1 / math.sqrt(2), rel=1e-9)


def test_bl_mass_mismatch():
    with pytest.raises(MassMismatchError):
        bl_distance(stereo_push(EmpiricalMeasure([0.0], 1.0)), stereo_push(EmpiricalMeasure([0.0], 0.5)))


def test_bl_pole_mass():
    line = stereo_push(EmpiricalMeasure([0.0], 1.0))
    pole = SphereMeasure(np.zeros((0, 2)), np.zeros(0), mass_at_infinity=1.0)
    assert bl_distance(line, pole, n_bins=None) == pytest.approx(1.0, rel=1e-12)


atom_lists = st.lists(st.floats(-20, 20, allow_subnormal=False), min_size=1, max_size=6)


@given(atom_lists, atom_lists)
def test_bl_matches_dual_lp(x1, x2):
    s1 = stereo_push(EmpiricalMeasure.normalized(x1))
    s2 = stereo_push(EmpiricalMeasure.normalized(x2))
    ref = dual_bl(s1.points, s1.weights, s2.points, s2.weights)
    assert bl_distance(s1, s2, n_bins=None) == pytest.approx(ref, rel=1e-7, abs=1e-9)
    assert bl_distance(s1, s2, n_bins=None) == pytest.approx(bl_distance(s2, s1, n_bins=None), abs=1e-12)


@given(atom_lists, atom_lists, atom_lists)
def test_bl_triangle_inequality(x1, x2, x3):
    s = [stereo_push(EmpiricalMeasure.normalized(x)) for x in (x1, x2, x3)]
    d12, d23, d13 = (bl_distance(s[i], s[j]) for i, j in ((0, 1), (1, 2), (0, 2)))
    assert d13 <= d12 + d23 + 1e-9


# ---------------------------------------------------------- discretization


def test_quantile_uniform():
    m = GridMeasure.uniform(0.0, 1.0, 10)
    assert np.allclose(quantile_discretize(m, 2), [0.5, 1.0])
    assert np.allclose(quantile_discretize(m, 4), [0.25, 0.5, 0.75, 1.0])
    with pytest.raises(DomainError):
        quantile_discretize(m, 0)
    with pytest.raises(DomainError):
        quantile_discretize(EmpiricalMeasure([1.0], 1.0), 2)


def test_quantile_half_mass_atoms():
    N = 10
    nu = GridMeasure.uniform(-3.0, 0.0, 30, mass=0.5)
    y = quantile_discretize(nu, N // 2)
    e = EmpiricalMeasure(y, 1.0 / N)
    assert e.mass == pytest.approx(0.5) and y.size == 5


@given(st.lists(st.floats(0.0, 5.0), min_size=3, max_size=30), st.integers(1, 40))
def test_quantile_levels(w, n):
    w = np.asarray(w)
    if w.sum() <= 1e-6:
        w = w + 1.0
    m = GridMeasure(np.arange(w.size + 1.0), w)
    x = quantile_discretize(m, n)
    assert np.all(np.diff(x) >= 0)
    assert m.cdf(x[0]) == pytest.approx(m.mass / n, rel=1e-9, abs=1e-12)
    assert np.allclose(m.cdf(x), m.mass * np.arange(1, n + 1) / n, rtol=1e-9, atol=1e-12)


def test_quantile_weak_convergence():
    m = GridMeasure.from_cdf(np.linspace(0, 4, 81), lambda t: 1 - np.exp(-t))
    s_ref = stereo_push(m)
    dists = [
        bl_distance(stereo_push(EmpiricalMeasure.normalized(quantile_discretize(m, n), m.mass)), s_ref)
        for n in (4, 16, 64)
    ]
    assert dists[0] > dists[1] > dists[2]


def test_snap_constructed_case():
    lat = Lattice(ModelParams(1.0, 0, 2), np.array([-1.0, -2.0, -3.0]))
    res = snap_to_lattice([-1.5, -0.5], lat)
    assert np.array_equal(res.values, [-2.0, -1.0])
    assert res.interlacing and res.distinct
    with pytest.raises(TruncationError):
        snap_to_lattice([-3.5], lat)


def test_snap_interlaces_for_admissible_nu():
    p = ModelParams(4.0, 0, 400)
    # nu proportional to sigma on [-1, -0.1]; sigma has mass 0.87 there
    edges = np.linspace(-1.0, -0.1, 200)
    caps = ConstraintMeasure(4.0).cell_caps(edges)
    nu = GridMeasure(edges, 0.5 * caps / caps.sum())
    assert np.all(nu.weights <= 0.6 * caps)
    y = quantile_discretize(nu, p.N // 2)
    res = snap_to_lattice(y, lattice_points(p, default_lattice_size(p, 1.0)))
    assert res.distinct and res.interlacing
