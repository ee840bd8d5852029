"""Layer-potential kernels of the 2D Helmholtz Green's function.

Everything is nondimensional: lengths are scaled by the vacuum wavenumber,
so region ``i`` has wavenumber ``n_i`` and transverse wavenumber
``kappa_i = sqrt(n_i^2 - ne^2)``.

Radial family
-------------
With ``g(r) = (i/4) H0(kappa r)`` every kernel is built from

    F0 = g,   F1 = g'/r,   F2 = (g'' - g'/r) / r^2,

whose wavenumber-independent singular parts are

    F1 ~ -1/(2 pi r^2),   F2 ~ 1/(pi r^4).

:func:`family` returns ``F0`` and the *regular* parts ``F1 + 1/(2 pi r^2)``
and ``F2 - 1/(pi r^4)``.  For ``|kappa r| <= FAMILY_SERIES_RADIUS`` these
are evaluated from polynomials in ``w = kappa^2 r^2 / 4`` with the ``log r``
factor kept explicit: with ``c = i/4 - (log(kappa/2) + gamma)/(2 pi)`` and
``L = log r``,

    F0    = J0(w) (c - L/(2 pi)) + h(w)/(2 pi)
    F1reg = (kappa^2/4) [2 J0'(w) (c - L/(2 pi)) + (2 h'(w) - P(w))/(2 pi)]
    F2reg = (kappa^4/8) [2 J0''(w) (c - L/(2 pi)) + (2 h''(w) - P'(w))/(2 pi)]
            - kappa^2 J0'(w) / (4 pi r^2)

where ``J0(w) = sum (-w)^k/(k!)^2``, ``h(w) = sum (-w)^k H_k/(k!)^2`` (``H_k``
harmonic numbers) and ``P(w) = (J0(w) - 1)/w``.  No singular term is ever
formed and subtracted, so differences between two media lose nothing.
The last term of ``F2reg`` tends to ``kappa^2 / (4 pi r^2)``; it only ever
appears multiplied by ``(d.tau_P)(d.tau_Q) = O(r^2)``.

Kernels
-------
With ``d = P - Q`` (target minus source), ``tau``/``nu`` the unit tangent and
outward normal (``nu = (tau_y, -tau_x)``):

    S   = F0                         D    = dG/dnu_Q    = -F1 (d.nu_Q)
    T   = dG/dtau_Q = -F1 (d.tau_Q)  S_nu = dG/dnu_P    =  F1 (d.nu_P)
    S_tau = F1 (d.tau_P)
    T_tau = d^2 G / dtau_P dtau_Q = -F2 (d.tau_P)(d.tau_Q) - F1 (tau_P.tau_Q)

Derivation of ``T_tau``: ``grad_Q G = -F1 d``, hence
``dG/dtau_Q = -F1 (d.tau_Q)``.  Differentiating along ``tau_P`` with
``grad_P F1 = (F1'/r) d = F2 d`` and ``grad_P (d.tau_Q) = tau_Q`` gives the
formula above.  Its singular part

    -(d.tau_P)(d.tau_Q)/(pi r^4) + (tau_P.tau_Q)/(2 pi r^2)

does not depend on the medium, so ``T_tau`` for two media subtracts to a
kernel built from ``F1reg`` and ``F2reg`` alone, which is bounded apart
from ``log r`` terms.  The same holds for ``T``, ``S_tau`` and for ``D`` and
``S_nu`` whenever the weights of the two media agree; with weights
``n0^2 != n1^2`` the Laplace double-layer part ``(n0^2 - n1^2) (d.nu_Q)/(2 pi r^2)``
remains, which is smooth on smooth curves.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import special

from .specfun import EULER_GAMMA, DomainError

__all__ = [
    "FAMILY_SERIES_RADIUS",
    "WavenumberSet",
    "KernelKind",
    "Frame",
    "SplitValue",
    "transverse_wavenumber",
    "family",
    "family_full",
    "family_split",
    "PairGeometry",
    "block_kernel",
    "kernel_eval",
    "difference_kernel_eval",
    "DIFFERENCE_PAIRS",
]

FAMILY_SERIES_RADIUS = 2.0
_NT = 18
_TWO_PI = 2 * np.pi

# coefficient table: columns are J0, J0', J0'', h, h', h'', P, P'
def _coeff_table(nt):
    k = np.arange(nt + 3)
    fact2 = np.array([float(factorial(int(i))) ** 2 for i in k])
    harm = np.concatenate([[0.0], np.cumsum(1.0 / k[1:])])
    j0 = (-1.0) ** k / fact2
    h = j0 * harm

    def deriv(c):
        return c[1:] * np.arange(1, len(c))

    cols = [j0, deriv(j0), deriv(deriv(j0)), h, deriv(h), deriv(deriv(h)),
            j0[1:], deriv(j0[1:])]
    tab = np.zeros((nt, len(cols)))
    for i, c in enumerate(cols):
        m = min(nt, len(c))
        tab[:m, i] = c[:m]
    return tab


_TABLE = _coeff_table(_NT)


def transverse_wavenumber(n, ne, branch: str = "outgoing"):
    """Return ``kappa`` with ``kappa^2 = n^2 - ne^2``.

    ``branch="outgoing"`` (default) takes ``exp(i pi/4) sqrt(-i kappa^2)``:
    it is ``+i sqrt(ne^2 - n^2)`` for guided indices and has positive real
    part (outgoing radiation) for leaky ones with small ``Im ne > 0``.  The
    cut lies where ``Re kappa^2 = 0`` and ``Im kappa^2 < 0``.
    ``branch="upper"`` enforces ``Im kappa >= 0``.
    """
    k2 = np.asarray(n, dtype=complex) ** 2 - np.asarray(ne, dtype=complex) ** 2
    if branch == "outgoing":
        k = np.exp(0.25j * np.pi) * np.sqrt(-1j * k2)
        # same branch, but exact on the real axis of kappa^2 (guided modes)
        real = k2.imag == 0
        if np.any(real):
            s = np.sqrt(np.abs(k2.real))
            k = np.where(real, np.where(k2.real >= 0, s + 0j, 1j * s), k)
    elif branch == "upper":
        k = np.sqrt(k2)
        k = np.where((k.imag < 0) | ((k.imag == 0) & (k.real < 0)), -k, k)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return k if k.ndim else complex(k)


@dataclass(frozen=True)
class WavenumberSet:
    """Indices, effective index and transverse wavenumbers (nondimensional).

    ``n[0]`` is the exterior (cladding) index; ``q = n^2 - ne^2`` is kept
    separately from ``kappa`` so that ``q`` is exact to rounding.
    """

    n: np.ndarray
    ne: complex
    kappa: np.ndarray
    q: np.ndarray
    branch: str = "outgoing"

    @classmethod
    def build(cls, indices, ne, branch: str = "outgoing", guard: float = 1e-10):
        n = np.asarray(indices, dtype=float)
        ne = complex(ne)
        if np.any(np.abs(ne - n) < guard):
            raise DomainError(
                f"effective index {ne} within {guard:g} of a material index; "
                "transverse wavenumber degenerates")
        q = n.astype(complex) ** 2 - ne * ne
        kappa = np.atleast_1d(transverse_wavenumber(n, ne, branch))
        return cls(n, ne, kappa, q, branch)

    @classmethod
    def from_physical(cls, k_v, indices, beta, **kw):
        """Nondimensionalize ``beta`` (1/m) by ``k_v`` (1/m)."""
        return cls.build(indices, beta / k_v, **kw)


def _series(kappa, r):
    w = 0.25 * (kappa * r) ** 2
    # powers w^0 .. w^(NT-1), then one small matmul against the table
    pw = np.empty(w.shape + (_NT,), dtype=complex)
    pw[..., 0] = 1.0
    for k in range(1, _NT):
        pw[..., k] = pw[..., k - 1] * w
    v = pw @ _TABLE
    j0, j0w, j0ww, h, hw, hww, p, pw_ = (v[..., i] for i in range(8))
    c = 0.25j - (np.log(0.5 * kappa) + EULER_GAMMA) / _TWO_PI
    cl = c - np.log(r) / _TWO_PI
    k2 = kappa * kappa
    f0 = j0 * cl + h / _TWO_PI
    f1 = 0.25 * k2 * (2 * j0w * cl + (2 * hw - p) / _TWO_PI)
    f2 = (0.125 * k2 * k2 * (2 * j0ww * cl + (2 * hww - pw_) / _TWO_PI)
          - k2 * j0w / (4 * np.pi * r * r))
    return f0, f1, f2


def _hankel_full(kappa, r):
    z = kappa * r
    h0 = special.hankel1(0, z)
    h1 = special.hankel1(1, z)
    h2 = 2 * h1 / z - h0
    return 0.25j * h0, -0.25j * kappa * h1 / r, 0.25j * kappa * kappa * h2 / (r * r)


def _asymptotic(kappa, r):
    f0, f1, f2 = _hankel_full(kappa, r)
    return f0, f1 + 1.0 / (_TWO_PI * r * r), f2 - 1.0 / (np.pi * r ** 4)


def _check_kappa(kappa):
    kappa = complex(kappa)
    if kappa == 0:
        raise DomainError("kappa = 0 is degenerate")
    if kappa.imag < 0 and kappa.real <= 0:
        raise DomainError("kappa outside the sector -pi/2 < arg <= pi")
    return kappa


def _dispatch(kappa, r, small_fn, big_fn):
    r = np.asarray(r, dtype=float)
    shape = r.shape
    r = r.ravel()
    out = [np.empty(r.shape, dtype=complex) for _ in range(3)]
    small = np.abs(kappa) * r <= FAMILY_SERIES_RADIUS
    if small.all():
        out = list(small_fn(kappa, r))
    else:
        if small.any():
            for o, v in zip(out, small_fn(kappa, r[small])):
                o[small] = v
        big = ~small
        for o, v in zip(out, big_fn(kappa, r[big])):
            o[big] = v
    return tuple(o.reshape(shape) for o in out)


def _series_full(kappa, r):
    f0, f1, f2 = _series(kappa, r)
    return f0, f1 - 1.0 / (_TWO_PI * r * r), f2 + 1.0 / (np.pi * r ** 4)


def family(kappa: complex, r):
    """``(F0, F1reg, F2reg)`` at distances ``r > 0`` for one wavenumber."""
    return _dispatch(_check_kappa(kappa), r, _series, _asymptotic)


def family_full(kappa, r):
    """``(F0, F1, F2)`` including the singular parts.

    Away from the series disc the Hankel values are used directly, so tiny
    (exponentially decayed) values keep full relative accuracy.
    """
    return _dispatch(_check_kappa(kappa), r, _series_full, _hankel_full)


def family_split(kappa, r):
    """Split ``F0, F1reg, F2reg`` into ``(smooth, log_coeff)`` pairs."""
    kappa = complex(kappa)
    r = np.asarray(r, dtype=float)
    w = 0.25 * (kappa * r) ** 2
    pw = w[..., None] ** np.arange(_NT)
    # log coefficients are entire in w; the series converges everywhere
    # but loses digits for large |w|, so fall back on J_n there
    z = kappa * r
    big = np.abs(z) > FAMILY_SERIES_RADIUS
    v = pw @ _TABLE[:, :3]
    j0, j0w, j0ww = v[..., 0], v[..., 1], v[..., 2]
    if np.any(big):
        zb = z[big] if z.ndim else z
        j0b = special.jv(0, zb)
        # d/dw J0 = -J1(z)/(z/2),  d^2/dw^2 J0 = J2(z)/(z/2)^2
        j0wb = -special.jv(1, zb) / (0.5 * zb)
        j0wwb = special.jv(2, zb) / (0.25 * zb * zb)
        if z.ndim:
            j0[big], j0w[big], j0ww[big] = j0b, j0wb, j0wwb
        else:
            j0, j0w, j0ww = j0b, j0wb, j0wwb
    k2 = kappa * kappa
    l0 = -j0 / _TWO_PI
    l1 = -0.25 * k2 * 2 * j0w / _TWO_PI
    l2 = -0.125 * k2 * k2 * 2 * j0ww / _TWO_PI
    f0, f1, f2 = family(kappa, r)
    lr = np.log(r)
    return ((f0 - l0 * lr, l0), (f1 - l1 * lr, l1), (f2 - l2 * lr, l2))


class PairGeometry:
    """Geometric factors for target/source pairs.

    ``d`` is target minus source; pass it explicitly when it is known more
    accurately than ``P - Q`` (e.g. from anchored offsets).
    """

    __slots__ = ("d", "r", "dtp", "dnp", "dtq", "dnq", "tt", "tn")

    def __init__(self, d, tp, tq):
        d = np.asarray(d, dtype=float)
        tp = np.asarray(tp, dtype=float)
        tq = np.asarray(tq, dtype=float)
        self.d = d
        self.r = np.hypot(d[..., 0], d[..., 1])
        # nu = (tau_y, -tau_x)
        self.dtp = d[..., 0] * tp[..., 0] + d[..., 1] * tp[..., 1]
        self.dnp = d[..., 0] * tp[..., 1] - d[..., 1] * tp[..., 0]
        self.dtq = d[..., 0] * tq[..., 0] + d[..., 1] * tq[..., 1]
        self.dnq = d[..., 0] * tq[..., 1] - d[..., 1] * tq[..., 0]
        self.tt = tp[..., 0] * tq[..., 0] + tp[..., 1] * tq[..., 1]
        self.tn = tp[..., 0] * tq[..., 1] - tp[..., 1] * tq[..., 0]


def block_kernel(g: PairGeometry, ne: complex, media, c1: float, c2: float, out=None):
    """4x4 kernel block of the boundary system, shape ``(4, 4) + g.r.shape``.

    Rows are the conditions ``([H_z], -[H_tau], [E_z], -[E_tau])``, columns
    the densities ``(J_tau, J_z, M_tau, M_z)``.

    Parameters
    ----------
    media : sequence of (sign, n^2, q, kappa)
        Media whose blocks are summed with the given signs, using regular
        parts of ``F1`` and ``F2``.
    c1, c2 : float
        Weights of the singular parts: ``c1 = sum(sign)`` multiplies the
        medium-independent entries and ``c2 = sum(sign * n^2)`` the
        ``n^2``-weighted double-layer entries.
    """
    shape = g.r.shape
    if out is None:
        out = np.zeros((4, 4) + shape, dtype=complex)
    else:
        out[...] = 0
    ne = complex(ne)
    for sign, n2, q, kappa in media:
        f0, f1, f2 = family(kappa, g.r)
        s = sign * f0
        f1 = sign * f1
        f2 = sign * f2
        D = -f1 * g.dnq
        T = -f1 * g.dtq
        Sn = f1 * g.dnp
        St = f1 * g.dtp
        Tt = -f2 * g.dtp * g.dtq - f1 * g.tt
        Stt = s * g.tt
        Stn = s * g.tn
        out[0, 0] += n2 * D
        out[0, 2] += ne * T
        out[0, 3] += 1j * q * s
        out[1, 0] += -1j * n2 * ne * Stn
        out[1, 1] += -n2 * Sn
        out[1, 2] += -1j * n2 * Stt + 1j * Tt
        out[1, 3] += ne * St
        out[2, 0] += -ne * T
        out[2, 1] += -1j * q * s
        out[2, 2] += D
        out[3, 0] += 1j * n2 * Stt - 1j * Tt
        out[3, 1] += -ne * St
        out[3, 2] += -1j * ne * Stn
        out[3, 3] += -Sn
    if c1 != 0 or c2 != 0:
        inv = 1.0 / (_TWO_PI * g.r * g.r)
        Ds = g.dnq * inv
        if c2 != 0:
            out[0, 0] += c2 * Ds
            out[1, 1] += c2 * g.dnp * inv
        if c1 != 0:
            Ts = g.dtq * inv
            Sns = -g.dnp * inv
            Sts = -g.dtp * inv
            Tts = -2 * g.dtp * g.dtq * inv / (g.r * g.r) + g.tt * inv
            out[0, 2] += c1 * ne * Ts
            out[1, 2] += c1 * 1j * Tts
            out[1, 3] += c1 * ne * Sts
            out[2, 0] += -c1 * ne * Ts
            out[2, 2] += c1 * Ds
            out[3, 0] += -c1 * 1j * Tts
            out[3, 1] += -c1 * ne * Sts
            out[3, 3] += -c1 * Sns
    return out


# ---------------------------------------------------------------------------
# kind-by-kind evaluation (diagnostics and tests; assembly uses block_kernel)

class KernelKind(enum.Enum):
    S = "S"
    D = "D"
    S_NU = "S_nu"
    S_TAU = "S_tau"
    T = "T"
    T_TAU = "T_tau"
    S_TP_NQ = "S*(tau_P.nu_Q)"
    S_TP_TQ = "S*(tau_P.tau_Q)"


@dataclass(frozen=True)
class Frame:
    """Boundary node(s): position and unit tangent."""

    point: np.ndarray
    tangent: np.ndarray

    @property
    def normal(self):
        t = np.asarray(self.tangent, dtype=float)
        return np.stack([t[..., 1], -t[..., 0]], -1)


@dataclass(frozen=True)
class SplitValue:
    """``value = smooth + log_coeff * log r + principal``.

    ``principal`` is the medium-independent singular part (``1/r``,
    Cauchy-type or hypersingular); it is zero for ``S`` and cancels in
    difference kernels with equal weights.
    """

    smooth: np.ndarray
    log_coeff: np.ndarray
    principal: np.ndarray
    r: np.ndarray

    def value(self):
        return self.smooth + self.log_coeff * np.log(self.r) + self.principal


def _kind_parts(kind, g, parts):
    """Combine family parts (each a 2-tuple or scalar array) for ``kind``."""
    f0, f1, f2 = parts
    if kind is KernelKind.S:
        return f0
    if kind is KernelKind.S_TP_NQ:
        return f0 * g.tn
    if kind is KernelKind.S_TP_TQ:
        return f0 * g.tt
    if kind is KernelKind.D:
        return -f1 * g.dnq
    if kind is KernelKind.T:
        return -f1 * g.dtq
    if kind is KernelKind.S_NU:
        return f1 * g.dnp
    if kind is KernelKind.S_TAU:
        return f1 * g.dtp
    if kind is KernelKind.T_TAU:
        return -f2 * g.dtp * g.dtq - f1 * g.tt
    raise DomainError(f"unknown kernel kind {kind!r}")


def _principal(kind, g):
    inv = 1.0 / (_TWO_PI * g.r ** 2)
    f1s = -inv
    f2s = 2 * inv / g.r ** 2
    zero = np.zeros_like(g.r)
    return _kind_parts(kind, g, (zero, f1s, f2s))


def _frames_geometry(source: Frame, target: Frame):
    d = np.asarray(target.point, float) - np.asarray(source.point, float)
    g = PairGeometry(d, target.tangent, source.tangent)
    if np.any(g.r == 0):
        raise DomainError("coincident source and target; use a difference kernel")
    return g


def kernel_eval(kind: KernelKind, kappa: complex, source: Frame, target: Frame) -> SplitValue:
    """Kernel ``kind`` for one medium at ``(target, source)`` node pairs."""
    if not isinstance(kind, KernelKind):
        raise DomainError(f"not a KernelKind: {kind!r}")
    g = _frames_geometry(source, target)
    (s0, l0), (s1, l1), (s2, l2) = family_split(kappa, g.r)
    smooth = _kind_parts(kind, g, (s0, s1, s2))
    logc = _kind_parts(kind, g, (l0, l1, l2))
    return SplitValue(smooth, logc, _principal(kind, g), g.r)


# admissible (kind, weights) combinations of the boundary system
DIFFERENCE_PAIRS = {
    KernelKind.S, KernelKind.D, KernelKind.S_NU, KernelKind.S_TAU, KernelKind.T,
    KernelKind.T_TAU, KernelKind.S_TP_NQ, KernelKind.S_TP_TQ,
}


def difference_kernel_eval(kind: KernelKind, kappa0, kappa1, weights, source: Frame,
                           target: Frame) -> SplitValue:
    """``w0 K(kappa0) - w1 K(kappa1)`` with singular parts cancelled analytically.

    With equal weights the returned ``principal`` is exactly zero; with
    ``w0 != w1`` (only meaningful for ``D`` and ``S_nu``, the ``n^2``-weighted
    entries) it carries ``(w0 - w1)`` times the Laplace part.  Matched media
    return an exact zero.
    """
    if not isinstance(kind, KernelKind):
        raise DomainError(f"not a KernelKind: {kind!r}")
    w0, w1 = weights
    g = _frames_geometry(source, target)
    if complex(kappa0) == complex(kappa1) and w0 == w1:
        z = np.zeros(g.r.shape, dtype=complex)
        return SplitValue(z, z.copy(), z.copy(), g.r)
    sp0 = family_split(kappa0, g.r)
    sp1 = family_split(kappa1, g.r)
    smooth = _kind_parts(kind, g, tuple(w0 * a[0] - w1 * b[0] for a, b in zip(sp0, sp1)))
    logc = _kind_parts(kind, g, tuple(w0 * a[1] - w1 * b[1] for a, b in zip(sp0, sp1)))
    if w0 == w1:
        principal = np.zeros(g.r.shape)
    else:
        if kind in (KernelKind.T, KernelKind.S_TAU, KernelKind.T_TAU):
            raise DomainError(f"{kind.value} difference with unequal weights is not compact")
        principal = (w0 - w1) * _principal(kind, g)
    return SplitValue(smooth, logc, principal, g.r)
