"""Curves, panels and discretizations."""
import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ellipe

from skiemodes.geometry import (Circle, Ellipse, PerturbedCircle, Polygon, ValidationError,
                                build_curve, discretize, panelize)

SQUARE = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))

shapes = st.one_of(
    st.builds(lambda r, x, y: Circle((x, y), r), st.floats(0.1, 50), st.floats(-5, 5), st.floats(-5, 5)),
    st.builds(lambda a, k: Ellipse((0.0, 0.0), a, a * k), st.floats(0.1, 10), st.floats(1 / 3, 3)),
    st.builds(lambda d, h, m: PerturbedCircle((1.0, -2.0), d, h, m), st.floats(0.5, 10),
              st.floats(-0.05, 0.05), st.integers(1, 9)),
    st.builds(lambda s: Polygon(((0, 0), (s, 0), (s, s), (0, s))), st.floats(0.1, 10)),
)


def signed_area(disc, i=0):
    sl = disc.nodes_of(i)
    x = disc.points[sl]
    return float(np.sum(disc.weights[sl] * x[:, 0] * disc.tangent[sl, 1]))


def test_circle_frame():
    c = build_curve(Circle((1.0, 2.0), 3.0))
    t = np.linspace(0, 2 * np.pi, 13)
    pos, tang, nrm, speed = c.frame(t)
    assert np.allclose(np.sum(nrm * (pos - [1.0, 2.0]), -1), 3.0, rtol=0, atol=1e-14)
    assert np.allclose(speed, 3.0)


def test_ellipse_perimeter():
    a, b = 1.15, 2.3
    c = build_curve(Ellipse((0, 0), a, b))
    ref = 4 * b * ellipe(1 - (a / b) ** 2)
    assert abs(c.perimeter() - ref) <= 1e-12 * ref


def test_zero_perturbation_is_circle():
    d1 = discretize([PerturbedCircle((0.5, 0.5), 2.0, 0.0, 7)], 6)
    d2 = discretize([Circle((0.5, 0.5), 1.0)], 6)
    assert np.allclose(d1.points, d2.points, rtol=0, atol=1e-15)
    assert np.allclose(d1.weights, d2.weights, rtol=0, atol=1e-15)


def test_circle_panel_count():
    d = discretize([Circle((0, 0), 25.0)], 5, p=10)
    assert d.n_nodes == 50 and d.n_panels == 5


def test_graded_square():
    n_base, L = 7, 4
    d = discretize([SQUARE], n_base, p=10, corner_levels=L)
    assert abs(d.weights.sum() - 4.0) <= 1e-12
    assert d.n_panels == 4 * (n_base + 2 * L)
    lengths = d.panel_lengths()
    assert abs(lengths.min() - 2.0 ** -L / n_base) <= 1e-15
    # no node on a vertex
    v = np.array(SQUARE.vertices, float)
    dist = np.min(np.hypot(*(d.points[:, None] - v[None]).transpose(2, 0, 1)))
    assert dist > 0


def test_validation_errors():
    with pytest.raises(ValidationError):
        build_curve(Polygon(((0, 0), (1, 1), (1, 0), (0, 1))))
    with pytest.raises(ValidationError):
        build_curve(PerturbedCircle((0, 0), 1.0, 1.0, 7))
    with pytest.raises(ValidationError):
        build_curve(Circle((0, 0), 0.0))
    with pytest.raises(ValidationError):
        discretize([Circle((0, 0), 1.0), Circle((1.5, 0), 1.0)], 4)
    with pytest.raises(ValidationError):
        discretize([Circle((0, 0), 2.0), Circle((0.2, 0), 0.5)], 4)
    with pytest.raises(ValidationError):
        panelize(build_curve(SQUARE), 0)


def test_clockwise_polygon_is_reoriented():
    cw = Polygon(((0, 0), (0, 1), (1, 1), (1, 0)))
    d = discretize([cw], 3, corner_levels=2)
    assert abs(signed_area(d) - 1.0) <= 1e-13


@settings(max_examples=30, deadline=None)
@given(shapes)
def test_orientation_and_frames(spec):
    d = discretize([spec], 32, corner_levels=3)
    c = d.curves[0]
    area = signed_area(d)
    if isinstance(spec, Circle):
        ref = np.pi * spec.radius ** 2
    elif isinstance(spec, Ellipse):
        ref = np.pi * spec.a * spec.b
    elif isinstance(spec, Polygon):
        ref = spec.vertices[1][0] ** 2
    else:
        ref = area
    assert area > 0
    assert abs(area - ref) <= 1e-9 * ref
    assert np.allclose(np.hypot(*d.tangent.T), 1.0, rtol=0, atol=1e-14)
    assert np.allclose(np.sum(d.tangent * d.normal, -1), 0.0, rtol=0, atol=1e-15)
    assert abs(d.weights.sum() - c.perimeter()) <= 1e-12 * c.perimeter()


@settings(max_examples=15, deadline=None)
@given(shapes)
def test_refinement_consistency(spec):
    a = discretize([spec], 32, corner_levels=3)
    b = discretize([spec], 64, corner_levels=3)
    per = a.curves[0].perimeter()
    assert abs(a.weights.sum() - per) <= 1e-12 * per
    assert abs(b.weights.sum() - per) <= 1e-12 * per
    if a.curves[0].smooth:
        # the same parameter gives the same point in either discretization
        ta = a.node_t[:5]
        pa = a.curves[0].frame(ta)[0]
        pb = b.curves[0].frame(ta)[0]
        assert np.array_equal(pa, pb)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_panel_interpolation(seed):
    rng = np.random.default_rng(seed)
    d = discretize([Ellipse((0, 0), 1.0, 2.0)], 4, p=10)
    pan = d.panel_list[1]
    c = rng.standard_normal(10)
    y = rng.uniform(-1, 1, 7)
    got = pan.interpolation_matrix(y) @ np.polynomial.polynomial.polyval(pan.nodes_y, c)
    assert np.allclose(got, np.polynomial.polynomial.polyval(y, c), rtol=0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([Circle((0.3, 0), 100.0), Ellipse((0, 0), 1.15, 2.3),
                        PerturbedCircle((0, 0), 5.0, 0.03, 7)]),
       st.floats(0, 2 * np.pi), st.floats(1e-12, 1e-3))
def test_chord_precision(spec, t, dt):
    c = build_curve(spec)
    got = c.chord(t, dt)
    with mp.workdps(50):
        def pos(tt):
            th = tt + spec.start_angle
            if isinstance(spec, Circle):
                r = mp.mpf(spec.radius)
                return r * mp.cos(th), r * mp.sin(th)
            if isinstance(spec, Ellipse):
                return spec.a * mp.cos(th), spec.b * mp.sin(th)
            rad = spec.diameter / 2 * (1 + spec.amplitude * mp.sin(spec.lobes * th))
            return rad * mp.cos(th), rad * mp.sin(th)
        p0 = pos(mp.mpf(t))
        p1 = pos(mp.mpf(t) + mp.mpf(dt))
        ref = np.array([float(p1[0] - p0[0]), float(p1[1] - p0[1])])
    assert np.max(np.abs(got - ref)) <= 1e-14 * np.hypot(*ref)


def test_unknown_layout():
    d = discretize([Circle((0, 0), 1.0), Circle((5, 0), 1.0)], [3, 2], p=10)
    n0, n1 = 30, 20
    assert d.n_nodes == n0 + n1
    assert list(d.unknown_index(2, [0, 29])) == [2 * n0, 2 * n0 + 29]
    assert list(d.unknown_index(1, [n0, n0 + 1])) == [4 * n0 + n1, 4 * n0 + n1 + 1]
    allidx = np.concatenate([d.unknown_index(c) for c in range(4)])
    assert np.array_equal(np.sort(allidx), np.arange(4 * d.n_nodes))
