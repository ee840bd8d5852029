"""Green's function family, kernel kinds and transverse wavenumbers."""
import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from skiemodes.kernels import (DomainError, Frame, KernelKind, WavenumberSet,
                               difference_kernel_eval, family, family_full, kernel_eval,
                               transverse_wavenumber)

KAPPAS = [1.0, 0.15j, 2.0 + 0.3j, 0.07 - 1e-5j, 5.0j]


def mp_family(kappa, r):
    """Regular parts of F0, F1, F2 in high precision."""
    with mp.workdps(60 + int(max(complex(kappa * r).imag, 0))):
        k = mp.mpc(kappa.real, kappa.imag)
        rr = mp.mpf(r)
        z = k * rr
        h0 = mp.hankel1(0, z)
        h1 = mp.hankel1(1, z)
        h2 = 2 * h1 / z - h0
        f0 = 0.25j * h0
        f1 = -0.25j * k * h1 / rr + 1 / (2 * mp.pi * rr ** 2)
        f2 = 0.25j * k * k * h2 / rr ** 2 - 1 / (mp.pi * rr ** 4)
        return complex(f0), complex(f1), complex(f2)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KAPPAS), st.floats(-9, np.log10(50)))
def test_family_matches_high_precision(kappa, lr):
    r = 10.0 ** lr
    got = family(kappa, np.array([r]))
    ref = mp_family(complex(kappa), r)
    # absolute scale: the regular parts are compared to the size of the
    # full kernels they are added to (times r^2 or r^4 where they enter)
    k2 = abs(kappa) ** 2
    scales = [max(abs(ref[0]), 1e-300), max(abs(ref[1]), k2 * 1e-2, 1e-300),
              max(abs(ref[2]), k2 ** 2 * 1e-2, 1e-300)]
    for g, rf, sc in zip(got, ref, scales):
        assert abs(g[0] - rf) <= 1e-12 * sc


def test_s_is_hankel():
    r = np.array([1e-3, 0.5, 3.0, 40.0])
    for k in (1.0, 0.3j, 2 + 0.5j):
        f0 = family_full(k, r)[0]
        assert np.allclose(f0, 0.25j * special.hankel1(0, k * r), rtol=1e-13, atol=0)


def _frame(p, ang):
    return Frame(np.asarray(p, float), np.array([np.cos(ang), np.sin(ang)]))


def test_double_layer_collinear_zero():
    src = Frame(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
    tgt = Frame(np.array([[0.7, 0.0]]), np.array([[1.0, 0.0]]))
    assert kernel_eval(KernelKind.D, 1.3, src, tgt).value()[0] == 0


pairs = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * np.pi),
                  st.floats(0, 2 * np.pi)).filter(lambda t: np.hypot(t[0], t[1]) > 0.05)


def _val(kind, k, q, tq, p, tp):
    return kernel_eval(kind, k, _frame(q, tq), _frame(p, tp)).value()


@settings(max_examples=40, deadline=None)
@given(pairs, st.sampled_from(KAPPAS[:3]))
def test_derivative_kernels_by_finite_differences(geo, k):
    x, y, tp, tq = geo
    P = np.array([x, y])
    Q = np.zeros(2)
    tauP = np.array([np.cos(tp), np.sin(tp)])
    tauQ = np.array([np.cos(tq), np.sin(tq)])
    nuP = np.array([tauP[1], -tauP[0]])
    h = 1e-5

    def S(p, q):
        return _val(KernelKind.S, k, q, tq, p, tp)

    def T(p, q):
        return _val(KernelKind.T, k, q, tq, p, tp)

    def fd(f, p, q, direction, on="q"):
        if on == "q":
            return (f(p, q + h * direction) - f(p, q - h * direction)) / (2 * h)
        return (f(p + h * direction, q) - f(p - h * direction, q)) / (2 * h)

    tol = 1e-7 * max(1.0, abs(S(P, Q)), 1 / np.hypot(x, y) ** 2)
    assert abs(T(P, Q) - fd(S, P, Q, tauQ)) <= tol
    assert abs(_val(KernelKind.S_NU, k, Q, tq, P, tp) - fd(S, P, Q, nuP, "p")) <= tol
    assert abs(_val(KernelKind.S_TAU, k, Q, tq, P, tp) - fd(S, P, Q, tauP, "p")) <= tol
    nuQ = np.array([tauQ[1], -tauQ[0]])
    assert abs(_val(KernelKind.D, k, Q, tq, P, tp) - fd(S, P, Q, nuQ)) <= tol
    tol2 = 1e-6 * max(1.0, 1 / np.hypot(x, y) ** 3)
    assert abs(_val(KernelKind.T_TAU, k, Q, tq, P, tp) - fd(T, P, Q, tauP, "p")) <= tol2


@settings(max_examples=30, deadline=None)
@given(pairs, st.sampled_from(KAPPAS))
def test_reciprocity(geo, k):
    x, y, tp, tq = geo
    a = _val(KernelKind.S, k, (0, 0), tq, (x, y), tp)
    b = _val(KernelKind.S, k, (x, y), tp, (0, 0), tq)
    assert a == b


@pytest.mark.parametrize("kind", list(KernelKind))
def test_matched_media_difference_is_zero(kind):
    src = Frame(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
    tgt = Frame(np.array([[1e-7, 3e-8]]), np.array([[0.6, 0.8]]))
    v = difference_kernel_eval(kind, 0.4j, 0.4j, (2.1, 2.1), src, tgt)
    assert np.all(v.value() == 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, -2), st.floats(0, 2 * np.pi))
def test_t_tau_difference_is_log_bounded(lr, ang):
    r = 10.0 ** lr
    src = Frame(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
    # a target on a gently curved arc through the source
    tgt = Frame(np.array([[r * np.cos(0.1 * ang), r * np.sin(0.1 * ang)]]),
                np.array([[np.cos(0.2 * ang), np.sin(0.2 * ang)]]))
    v = difference_kernel_eval(KernelKind.T_TAU, 1.2, 0.3j, (1.0, 1.0), src, tgt).value()[0]
    assert abs(v) <= 2.0 * (1 + abs(np.log(r)))


def test_single_layer_difference_log_coefficient():
    k0, k1 = 1.2, 0.3j
    n0sq, n1sq, ne = 1.444 ** 2, 1.4475 ** 2, 1.446
    q0, q1 = n0sq - ne ** 2, n1sq - ne ** 2
    src = Frame(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
    tgt = Frame(np.array([[1e-9, 0.0]]), np.array([[1.0, 0.0]]))
    a = kernel_eval(KernelKind.S, k0, src, tgt).log_coeff[0]
    b = kernel_eval(KernelKind.S, k1, src, tgt).log_coeff[0]
    assert abs((q0 * a - q1 * b) - (-(q0 - q1) / (2 * np.pi))) <= 1e-15


def test_unequal_weight_hypersingular_difference_rejected():
    src = Frame(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
    tgt = Frame(np.array([[0.1, 0.0]]), np.array([[1.0, 0.0]]))
    with pytest.raises(DomainError):
        difference_kernel_eval(KernelKind.T_TAU, 1.0, 0.5, (1.0, 2.0), src, tgt)
    with pytest.raises(DomainError):
        kernel_eval(KernelKind.S, 1.0, src, src)
    with pytest.raises(DomainError):
        kernel_eval("S", 1.0, src, tgt)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 3.6), st.floats(0.5, 4.0), st.floats(0, 0.05))
def test_transverse_wavenumber_branches(n, ne_re, ne_im):
    ne = complex(ne_re, ne_im)
    for branch in ("outgoing", "upper"):
        k = transverse_wavenumber(n, ne, branch)
        assert abs(k * k - (n * n - ne * ne)) <= 1e-14 * max(1, abs(n * n - ne * ne))
    assert transverse_wavenumber(n, ne, "upper").imag >= 0
    if ne_im == 0 and ne_re > n:
        k = transverse_wavenumber(n, ne)
        assert k.real == 0 and k.imag > 0
    if ne_im > 0 and ne_re < n and ne_im < 1e-3:
        # leaky: outgoing (positive real part), just below the real axis
        k = transverse_wavenumber(n, ne)
        assert k.real > 0 and k.imag <= 0


def test_wavenumber_guard():
    with pytest.raises(DomainError):
        WavenumberSet.build([1.444, 1.4475], 1.444 + 1e-12)
    wn = WavenumberSet.build([1.444, 1.4475], 1.446)
    assert np.allclose(wn.q, [1.444 ** 2 - 1.446 ** 2, 1.4475 ** 2 - 1.446 ** 2], rtol=1e-15)
    with pytest.raises(ValueError):
        transverse_wavenumber(1.0, 1.2, "sideways")
