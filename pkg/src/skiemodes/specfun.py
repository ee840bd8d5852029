"""Bessel and Hankel functions of orders 0 and 1 for complex argument.

Small arguments (``|z| <= SERIES_RADIUS``) use the ascending power series
with the logarithm extracted explicitly; larger arguments are delegated to
the AMOS routines wrapped by :mod:`scipy.special`.

The log-split form

    H0(k r) = R0(r) + L0(r) log r
    H1(k r) = C1 / r + R1(r) + L1(r) log r

is what makes the media-difference kernels computable without
catastrophic cancellation: ``L0``, ``L1``, ``R0`` and ``R1`` are analytic in
``r`` and differences between two wavenumbers are formed term by term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "SERIES_RADIUS",
    "EULER_GAMMA",
    "LogSplitValue",
    "DomainError",
    "hankel01",
    "bessel_j01",
    "hankel_log_split",
]

SERIES_RADIUS = 2.0
EULER_GAMMA = 0.57721566490153286060651209008240243
_NTERMS = 16

# 1/(k!)^2, 1/(k!(k+1)!) and harmonic numbers H_k
_fact = np.array([float(np.prod(np.arange(1, k + 1))) for k in range(_NTERMS + 2)])
_INV_FACT2 = 1.0 / (_fact[:_NTERMS] ** 2)
_INV_FACT_K_K1 = 1.0 / (_fact[:_NTERMS] * _fact[1:_NTERMS + 1])
_HARM = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, _NTERMS + 1))])[:_NTERMS + 1]


class DomainError(ValueError):
    """Argument outside the supported domain of a special function."""


@dataclass(frozen=True)
class LogSplitValue:
    """``value = smooth_part + log_coeff * log(r) (+ inv_coeff / r)``."""

    smooth_part: complex | np.ndarray
    log_coeff: complex | np.ndarray
    inv_coeff: complex | np.ndarray = 0.0

    def value(self, r):
        return self.smooth_part + self.log_coeff * np.log(r) + self.inv_coeff / r


def _check_argument(z: np.ndarray) -> None:
    if np.any(z == 0):
        raise DomainError("Hankel functions are singular at z = 0")
    # principal sheet continued slightly below the real axis (leaky modes)
    if np.any((z.imag < 0) & (z.real <= 0)):
        raise DomainError("argument outside the supported sector -pi/2 < arg z <= pi")


def _series_j(w: np.ndarray):
    """J0 and J1/(z/2) as power series in w = z^2/4."""
    j0 = np.zeros_like(w)
    j1h = np.zeros_like(w)
    for k in range(_NTERMS - 1, -1, -1):
        s = (-1.0) ** k
        j0 = j0 * w + s * _INV_FACT2[k]
        j1h = j1h * w + s * _INV_FACT_K_K1[k]
    return j0, j1h


def _series_y_regular(w: np.ndarray):
    """Entire remainders of Y0 and Y1 after the log and pole terms.

    Y0 = (2/pi) (log(z/2) + gamma) J0 + (2/pi) s0
    Y1 = -2/(pi z) + (2/pi) log(z/2) J1 - (z/(2 pi)) s1
    """
    s0 = np.zeros_like(w)
    s1 = np.zeros_like(w)
    for k in range(_NTERMS - 1, -1, -1):
        s = (-1.0) ** k
        # psi(k+1) + psi(k+2) = H_k + H_{k+1} - 2 gamma
        s0 = s0 * w + (-s * _HARM[k] * _INV_FACT2[k] if k > 0 else 0.0)
        s1 = s1 * w + s * _INV_FACT_K_K1[k] * (_HARM[k] + _HARM[k + 1] - 2 * EULER_GAMMA)
    return s0, s1


def _series_h01(z: np.ndarray):
    w = 0.25 * z * z
    j0, j1h = _series_j(w)
    j1 = 0.5 * z * j1h
    s0, s1 = _series_y_regular(w)
    lg = np.log(0.5 * z)
    y0 = (2 / np.pi) * ((lg + EULER_GAMMA) * j0 + s0)
    y1 = -2 / (np.pi * z) + (2 / np.pi) * lg * j1 - z / (2 * np.pi) * s1
    return j0 + 1j * y0, j1 + 1j * y1


def hankel01(z):
    """Return ``(H0^(1)(z), H1^(1)(z))`` for complex ``z``.

    Raises
    ------
    DomainError
        If ``z == 0`` or ``z`` lies outside ``-pi/2 < arg z <= pi``.
    """
    z = np.asarray(z, dtype=complex)
    _check_argument(z)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    h0 = np.empty_like(z)
    h1 = np.empty_like(z)
    small = np.abs(z) <= SERIES_RADIUS
    if small.any():
        h0[small], h1[small] = _series_h01(z[small])
    big = ~small
    if big.any():
        h0[big] = special.hankel1(0, z[big])
        h1[big] = special.hankel1(1, z[big])
    if scalar:
        return h0[0], h1[0]
    return h0, h1


def bessel_j01(z):
    """Return ``(J0(z), J1(z))``; entire, no domain restriction."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    j0 = np.empty_like(z)
    j1 = np.empty_like(z)
    small = np.abs(z) <= SERIES_RADIUS
    if small.any():
        a, b = _series_j(0.25 * z[small] ** 2)
        j0[small] = a
        j1[small] = 0.5 * z[small] * b
    big = ~small
    if big.any():
        j0[big] = special.jv(0, z[big])
        j1[big] = special.jv(1, z[big])
    if scalar:
        return j0[0], j1[0]
    return j0, j1


def hankel_log_split(k, r):
    """Split ``H0(k r)`` and ``H1(k r)`` into analytic and ``log r`` parts.

    Parameters
    ----------
    k : complex
        Wavenumber (same sector as accepted by :func:`hankel01`).
    r : float or array of float
        Distances, strictly positive.

    Returns
    -------
    (LogSplitValue, LogSplitValue)
        Order 0: ``H0 = smooth + log_coeff*log r``.
        Order 1: ``H1 = inv_coeff/r + smooth + log_coeff*log r``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("hankel_log_split requires r > 0")
    k = complex(k)
    z = k * r
    _check_argument(np.asarray(z))
    j0, j1 = bessel_j01(z)
    l0 = (2j / np.pi) * j0
    l1 = (2j / np.pi) * j1
    inv1 = -2j / (np.pi * k)
    zz = np.atleast_1d(z)
    small = np.abs(zz) <= SERIES_RADIUS
    sm0 = np.empty_like(zz)
    sm1 = np.empty_like(zz)
    if small.any():
        zs = zz[small]
        w = 0.25 * zs * zs
        a, b = _series_j(w)
        s0, s1 = _series_y_regular(w)
        lk = np.log(0.5 * k)
        jj1 = 0.5 * zs * b
        sm0[small] = a + (2j / np.pi) * ((lk + EULER_GAMMA) * a + s0)
        sm1[small] = jj1 + (2j / np.pi) * lk * jj1 - 1j * zs / (2 * np.pi) * s1
    if (~small).any():
        zb = zz[~small]
        rb = np.atleast_1d(r)[~small] if np.ndim(r) else np.array([float(r)])
        lr = np.log(rb)
        sm0[~small] = special.hankel1(0, zb) - np.atleast_1d(l0)[~small] * lr
        sm1[~small] = (special.hankel1(1, zb) - inv1 / rb
                       - np.atleast_1d(l1)[~small] * lr)
    if np.ndim(r) == 0:
        sm0, sm1 = sm0[0], sm1[0]
    return (LogSplitValue(sm0, l0), LogSplitValue(sm1, l1, inv1))
