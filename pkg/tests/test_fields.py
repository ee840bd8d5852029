"""Field representation: continuity, Maxwell relations and grids."""
import numpy as np
import pytest

from skiemodes.assembly import Assembler
from skiemodes.fields import (COMPONENTS, EMField, NearBoundaryError, boundary_mismatch,
                              eval_field, field_grid, locate, transverse_from_longitudinal)
from skiemodes.geometry import Circle, discretize
from skiemodes.modefinder import nullspace

from conftest import EX1_MODES


def transverse_residual(x, disc, wn, pts, region, h=1e-3):
    """Max relative mismatch of the transverse components versus the
    finite-difference reconstruction from Ez and Hz."""
    def f(P):
        return eval_field(P, region, x, disc, wn, check=False).stack()
    F = f(pts)
    ex = np.array([1.0, 0.0])
    ey = np.array([0.0, 1.0])
    dx = (f(pts + h * ex) - f(pts - h * ex)) / (2 * h)
    dy = (f(pts + h * ey) - f(pts - h * ey)) / (2 * h)
    n = wn.n[region]
    Ex, Ey, Hx, Hy = transverse_from_longitudinal((dx[2], dy[2]), (dx[5], dy[5]), n, wn.ne)
    scale = np.max(np.abs(F))
    got = np.array([F[0], F[1], F[3], F[4]])
    ref = np.array([Ex, Ey, Hx, Hy])
    return float(np.max(np.abs(got - ref)) / scale)


def test_zero_density_zero_field(ex1, ex1_mode):
    pts = np.array([[0.0, 0.0], [200.0, 10.0]])
    x = np.zeros(4 * ex1.disc.n_nodes)
    for reg, P in ((1, pts[:1]), (0, pts[1:])):
        F = eval_field(P, reg, x, ex1.disc, ex1_mode.wn, check=False).stack()
        assert np.all(F == 0)


def test_linearity(ex1, ex1_mode):
    rng = np.random.default_rng(0)
    n = 4 * ex1.disc.n_nodes
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = rng.standard_normal(n)
    P = np.array([[250.0, -30.0], [0.0, 300.0]])
    a, b = 2 - 1j, 0.5
    lhs = eval_field(P, 0, a * x + b * y, ex1.disc, ex1_mode.wn).stack()
    rhs = (a * eval_field(P, 0, x, ex1.disc, ex1_mode.wn).stack()
           + b * eval_field(P, 0, y, ex1.disc, ex1_mode.wn).stack())
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * np.max(np.abs(lhs))


def test_near_boundary_rejected(ex1, ex1_mode):
    P = np.array([[ex1.radius * 0.999, 0.0]])
    with pytest.raises(NearBoundaryError):
        eval_field(P, 1, ex1_mode.x, ex1.disc, ex1_mode.wn)
    with pytest.raises(ValueError):
        eval_field(P, 3, ex1_mode.x, ex1.disc, ex1_mode.wn)
    with pytest.raises(ValueError):
        eval_field(P, 1, ex1_mode.x[:-1], ex1.disc, ex1_mode.wn)


def test_boundary_conditions_of_mode(ex1, ex1_mode):
    res = boundary_mismatch(ex1_mode.x, ex1.disc, ex1_mode.wn)
    for key in ("Ez", "Etau", "Hz", "Htau"):
        assert res[key] <= 1e-8, (key, res[key])


def test_boundary_mismatch_generic_vector(ex1):
    rng = np.random.default_rng(4)
    n = 4 * ex1.disc.n_nodes
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    wn = ex1.assembler.wavenumbers(1.4462)
    res = boundary_mismatch(x, ex1.disc, wn)
    assert max(res[k] for k in ("Ez", "Etau", "Hz", "Htau")) > 1e-2


def test_boundary_mismatch_matched_zero(matched_circle):
    disc, idx = matched_circle
    wn = Assembler(disc, idx).wavenumbers(1.47)
    res = boundary_mismatch(np.zeros(4 * disc.n_nodes), disc, wn)
    assert all(res[k] == 0 for k in ("Ez", "Etau", "Hz", "Htau"))


def test_transverse_relations_inside_and_outside(ex1, ex1_mode):
    R = ex1.radius
    ang = np.linspace(0, 2 * np.pi, 5, endpoint=False) + 0.3
    inner = 0.5 * R * np.stack([np.cos(ang), np.sin(ang)], -1)
    outer = 1.6 * R * np.stack([np.cos(ang), np.sin(ang)], -1)
    assert transverse_residual(ex1_mode.x, ex1.disc, ex1_mode.wn, inner, 1) <= 1e-8
    assert transverse_residual(ex1_mode.x, ex1.disc, ex1_mode.wn, outer, 0) <= 1e-8


def test_helmholtz_residual(ex1, ex1_mode):
    h = 0.01
    wn = ex1_mode.wn
    for reg, P in ((1, np.array([[20.0, -35.0]])), (0, np.array([[150.0, 60.0]]))):
        st = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]])
        F = np.stack([eval_field(P + s, reg, ex1_mode.x, ex1.disc, wn, check=False).stack()[:, 0]
                      for s in st])
        lap = (F[1] + F[2] + F[3] + F[4] - 4 * F[0]) / h ** 2
        k2 = wn.kappa[reg] ** 2
        scale = abs(k2) * np.max(np.abs(F[0]))
        assert np.max(np.abs(lap + k2 * F[0])) <= 1e-6 * scale


def test_exterior_decay_along_ray(ex1, ex1_mode):
    assert ex1_mode.wn.kappa[0].real == 0 and ex1_mode.wn.kappa[0].imag > 0
    r = np.linspace(1.5, 4.0, 12) * ex1.radius
    P = np.stack([r * np.cos(0.7), r * np.sin(0.7)], -1)
    # Example 1 panels are longer than the core radius, so skip the distance guard
    F = eval_field(P, 0, ex1_mode.x, ex1.disc, ex1_mode.wn, check=False).stack()
    mag = np.sqrt(np.sum(np.abs(F) ** 2, axis=0))
    assert np.all(np.diff(mag) < 0)


def test_wrong_region_is_inconsistent(ex1, ex1_mode):
    P = 0.6 * ex1.radius * np.array([[np.cos(1.0), np.sin(1.0)]])
    right = eval_field(P, 1, ex1_mode.x, ex1.disc, ex1_mode.wn, check=False).stack()
    wrong = eval_field(P, 0, ex1_mode.x, ex1.disc, ex1_mode.wn, check=False).stack()
    assert np.max(np.abs(right - wrong)) > 0.1 * np.max(np.abs(right))


def test_locate(ex1):
    R = ex1.radius
    reg = locate(ex1.disc, np.array([[0.0, 0.0], [0.9 * R, 0.1 * R], [1.1 * R, 0.0]]))
    assert list(reg) == [1, 1, 0]


@pytest.fixture(scope="module")
def fine_ex1_mode(ex1):
    disc = discretize([Circle((0.0, 0.0), ex1.radius)], 20)
    asm = Assembler(disc, [1.444, 1.4475])
    ne = EX1_MODES[-1]
    mult, basis, _ = nullspace(asm.assemble(ne))
    assert mult == 1
    return disc, basis[:, 0], asm.wavenumbers(ne)


def test_field_grid_symmetry_and_mask(ex1, fine_ex1_mode):
    disc, x, wn = fine_ex1_mode
    R = ex1.radius
    g = field_grid((-1.3 * R, 1.3 * R, -1.3 * R, 1.3 * R), (41, 41), x, disc, wn)
    E = np.sqrt(np.sum(np.abs(g.fields[:3]) ** 2, axis=0))
    assert np.nanmax(E) == pytest.approx(1.0, abs=1e-15)
    # mask: exactly the pixels within one local panel length of a node
    X, Y = np.meshgrid(g.x, g.y)
    P = np.stack([X.ravel(), Y.ravel()], -1)
    dn = np.hypot(*(P[:, None] - disc.points[None]).transpose(2, 0, 1))
    j = np.argmin(dn, axis=1)
    expect = dn[np.arange(len(P)), j] < disc.panel_lengths()[disc.panel_of[j]]
    assert np.array_equal(g.mask.ravel(), expect)
    assert np.all(np.isnan(g.fields[:, g.mask]))
    assert not np.any(np.isnan(g.fields[:, ~g.mask]))
    # rotational symmetry of |E| for this azimuthally uniform mode
    rad = 0.4 * R
    ang = np.linspace(0, 2 * np.pi, 9, endpoint=False)
    P = rad * np.stack([np.cos(ang), np.sin(ang)], -1)
    F = eval_field(P, 1, x, disc, wn).stack() * g.normalization
    e = np.sqrt(np.sum(np.abs(F[:3]) ** 2, axis=0))
    assert np.max(e) - np.min(e) <= 1e-6


def test_field_grid_validation(ex1, ex1_mode):
    with pytest.raises(ValueError):
        field_grid((0, 1, 0, 1), (0, 3), ex1_mode.x, ex1.disc, ex1_mode.wn)
    with pytest.raises(ValueError):
        field_grid((0, np.inf, 0, 1), 3, ex1_mode.x, ex1.disc, ex1_mode.wn)


def test_emfield_stack_roundtrip():
    a = np.arange(12.0).reshape(6, 2) + 1j
    f = EMField.from_stack(a)
    assert np.array_equal(f.stack(), a)
    assert COMPONENTS[2] == "Ez"
