"""Independent reference solutions used to validate the solver.

* :func:`fiber_dispersion_oracle` solves the classical characteristic
  equation of a step-index circular fiber.
* :func:`run_sommerfeld_check` integrates the 3D Green's function along the
  axis and compares with the 2D Hankel kernel.
* :func:`point_source_fields` gives exact fields of a line source in a
  homogeneous medium (used by the point-source verification).
"""
from __future__ import annotations

import numpy as np
from scipy import integrate, optimize, special

from ..fields import transverse_from_longitudinal
from ..kernels import family_full
from ..specfun import hankel01

__all__ = [
    "fiber_characteristic",
    "fiber_dispersion_oracle",
    "OracleMode",
    "run_sommerfeld_check",
    "sommerfeld_integral",
    "point_source_fields",
]


def fiber_characteristic(ne, m: int, v_core: float, n0: float, n1: float) -> float:
    """Characteristic function of a step-index fiber (zero at guided modes).

    ``v_core`` is the nondimensional core radius ``k_v a``.  With
    ``u = a sqrt(n1^2 - ne^2)``, ``w = a sqrt(ne^2 - n0^2)`` and
    ``Jr = J_m'(u)/(u J_m(u))``, ``Kr = K_m'(w)/(w K_m(w))`` the function is
    ``(Jr + Kr)(n1^2 Jr + n0^2 Kr) - m^2 ne^2 (1/u^2 + 1/w^2)^2``.
    """
    u = v_core * np.sqrt(n1 * n1 - ne * ne)
    w = v_core * np.sqrt(ne * ne - n0 * n0)
    jr = special.jvp(m, u) / (u * special.jv(m, u))
    kr = special.kvp(m, w) / (w * special.kv(m, w))
    val = (jr + kr) * (n1 * n1 * jr + n0 * n0 * kr)
    if m:
        val = val - (m * ne) ** 2 * (1 / u ** 2 + 1 / w ** 2) ** 2
    return val


class OracleMode(tuple):
    """``(ne, m)``: effective index and azimuthal order."""

    __slots__ = ()

    def __new__(cls, ne, m):
        return super().__new__(cls, (float(ne), int(m)))

    @property
    def ne(self):
        return self[0]

    @property
    def m(self):
        return self[1]


def fiber_dispersion_oracle(radius: float, n0: float, n1: float, wavelength: float,
                            max_order: int | None = None, samples: int = 200_001) -> list:
    """Guided modes of a step-index fiber, sorted by decreasing ``ne``.

    ``radius`` and ``wavelength`` share a unit.  Roots are bracketed by
    sign changes on a fine grid of ``ne`` per azimuthal order and polished
    with Brent's method; brackets straddling a pole of the Bessel ratios are
    discarded by checking the residual.
    """
    if not (radius > 0 and wavelength > 0 and n0 > 0 and n1 > 0):
        raise ValueError("radius, wavelength and indices must be positive")
    if n1 <= n0:
        return []
    v_core = 2 * np.pi * radius / wavelength
    v = v_core * np.sqrt(n1 * n1 - n0 * n0)
    if max_order is None:
        max_order = int(v) + 2
    eps = 1e-13 * n1
    grid = np.linspace(n0 + eps, n1 - eps, samples)
    out = []
    with np.errstate(all="ignore"):
        for m in range(max_order + 1):
            vals = fiber_characteristic(grid, m, v_core, n0, n1)
            ok = np.isfinite(vals)
            sgn = np.sign(vals)
            idx = np.nonzero(ok[:-1] & ok[1:] & (sgn[:-1] * sgn[1:] < 0))[0]
            for i in idx:
                r = optimize.brentq(fiber_characteristic, grid[i], grid[i + 1], args=(m, v_core, n0, n1),
                                    xtol=1e-16, rtol=4 * np.finfo(float).eps)
                # a bracket around a pole converges to it with a huge residual
                if abs(fiber_characteristic(r, m, v_core, n0, n1)) <= min(abs(vals[i]), abs(vals[i + 1])):
                    out.append(OracleMode(r, m))
    return sorted(out, key=lambda t: -t[0])


def sommerfeld_integral(k: complex, beta: float, rho: float, phi: float = np.pi / 4,
                        tol: float = 1e-13) -> complex:
    """``(1/4pi) int exp(i k R)/R exp(i beta z) dz`` over the whole axis.

    ``R = sqrt(rho^2 + z^2)``.  The integrand is even in ``z`` apart from the
    phase, so the integral splits into two half-line integrals with phases
    ``exp(i (k R +- beta z))``; each is taken along the ray ``z = t e^{+-i phi}``
    on which it decays exponentially, and truncated once the tail is below
    ``tol``.
    """
    if rho <= 0:
        raise ValueError("separation must be positive")
    k = complex(k)
    total = 0j
    for sgn in (1.0, -1.0):
        rate = (k + sgn * beta).real
        if rate == 0:
            raise ValueError("k = +-beta: the reduced kernel is singular")
        rot = np.exp(1j * phi * np.sign(rate))

        def f(t):
            z = t * rot
            R = np.sqrt(rho * rho + z * z)
            return np.exp(1j * (k * R + sgn * beta * z)) / R * rot

        decay = abs(rate) * np.sin(phi) + max(k.imag, 0.0)
        T = (np.log(1.0 / tol) + 5.0) / decay + 2 * rho
        val, err = integrate.quad_vec(f, 0.0, T, epsabs=tol * 1e-2, epsrel=tol, limit=2000)
        tail = abs(f(T)) / decay
        if tail > tol * max(1.0, abs(val)):
            raise RuntimeError(f"Sommerfeld integral tail {tail:.2e} above tolerance")
        total += val
    return total / (4 * np.pi)


def run_sommerfeld_check(k: complex, beta: float, separations, tol: float = 1e-13) -> float:
    """Max residual of the Sommerfeld reduction over ``separations``.

    Compares :func:`sommerfeld_integral` with ``(i/4) H0(k_beta r)`` where
    ``k_beta = sqrt(k^2 - beta^2)`` on the branch with ``Im >= 0``.  The
    residual is ``|got - ref| / max(1, |ref|)``: for ``beta > k`` the exact
    value is exponentially small while the two half-line integrals are O(1),
    so a purely relative measure would only report their cancellation.
    """
    kb = np.sqrt(complex(k) ** 2 - beta * beta)
    if kb.imag < 0:
        kb = -kb
    worst = 0.0
    for r in np.atleast_1d(separations):
        ref = 0.25j * complex(hankel01(kb * r)[0])
        got = sommerfeld_integral(k, beta, float(r), tol=tol)
        worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    return worst


def point_source_fields(points, source, n: float, ne: complex, kappa: complex,
                        amp_e: complex = 1.0, amp_h: complex = 0.5 - 0.3j):
    """Exact fields of a line source at ``source`` in a homogeneous medium.

    ``Ez = amp_e G``, ``Hz = amp_h G`` with ``G = (i/4) H0(kappa |P - S|)``;
    the transverse components follow from the longitudinal ones.
    Returns a ``(6, npts)`` array ordered ``Ex, Ey, Ez, Hx, Hy, Hz``.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    d = P - np.asarray(source, dtype=float)
    r = np.hypot(d[:, 0], d[:, 1])
    f0, f1, _ = family_full(kappa, r)
    gx, gy = f1 * d[:, 0], f1 * d[:, 1]
    Ez, Hz = amp_e * f0, amp_h * f0
    Ex, Ey, Hx, Hy = transverse_from_longitudinal((amp_e * gx, amp_e * gy), (amp_h * gx, amp_h * gy), n, ne)
    return np.stack([Ex, Ey, Ez, Hx, Hy, Hz])
