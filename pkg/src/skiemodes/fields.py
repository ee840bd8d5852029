"""Electromagnetic fields from boundary densities.

The field in the cladding (region 0) is the layer-potential representation
with the cladding wavenumber summed over every interface; the field inside
inclusion ``i`` is the same representation with that inclusion's wavenumber
over its own boundary only.  The boundary system states that the exterior
and interior traces agree, so a null vector of it gives a continuous field.  In nondimensional form (``k_v = 1``,
``H`` scaled by the vacuum impedance, ``q = n^2 - ne^2``)::

    Ez = -ne T[Jt] - i q S[Jz] + D[Mt]
    Hz =  ne T[Mt] + i q S[Mz] + n^2 D[Jt]
    Ex =  i dxT[Jt] + ne dxS[Jz] - i n^2 S[Jt t1] - dyS[Mz] + i ne S[Mt t2]
    Ey =  i dyT[Jt] + ne dyS[Jz] - i n^2 S[Jt t2] + dxS[Mz] - i ne S[Mt t1]
    Hx = -i dxT[Mt] - ne dxS[Mz] + i n^2 S[Mt t1] - n^2 dyS[Jz] + i ne n^2 S[Jt t2]
    Hy = -i dyT[Mt] - ne dyS[Mz] + i n^2 S[Mt t2] + n^2 dxS[Jz] - i ne n^2 S[Jt t1]

where ``(t1, t2)`` is the source tangent.  Derivatives act on the target:
``grad S = F1 d`` and ``d_i T = -(F2 d_i (d.tau_Q) + F1 tau_Q,i)``.

The transverse components also follow from ``Ez`` and ``Hz`` alone::

    [Hx, Ey] = -1/q [[i n^2, -i ne], [-i ne, i]] [dy Ez, dx Hz]
    [Ex, Hy] =  1/q [[i ne, i], [i n^2, i ne]]   [dx Ez, dy Hz]

which :func:`transverse_from_longitudinal` implements for checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Discretization
from .kernels import WavenumberSet, family_full
from .quadrature import PanelIntegrator, lagrange_basis

__all__ = [
    "EMField",
    "NearBoundaryError",
    "locate",
    "eval_field",
    "boundary_mismatch",
    "field_grid",
    "FieldGrid",
    "transverse_from_longitudinal",
    "split_densities",
]

COMPONENTS = ("Ex", "Ey", "Ez", "Hx", "Hy", "Hz")


class NearBoundaryError(ValueError):
    pass


@dataclass
class EMField:
    """Six complex components, each of the shape of the evaluation points."""

    Ex: np.ndarray
    Ey: np.ndarray
    Ez: np.ndarray
    Hx: np.ndarray
    Hy: np.ndarray
    Hz: np.ndarray

    def stack(self):
        return np.stack([getattr(self, c) for c in COMPONENTS])

    @classmethod
    def from_stack(cls, a):
        return cls(*a)


def split_densities(disc: Discretization, x):
    """``(npts, 4)`` array of ``J_tau, J_z, M_tau, M_z`` per node."""
    x = np.asarray(x)
    if x.shape != (4 * disc.n_nodes,):
        raise ValueError("density vector has the wrong length")
    out = np.empty((disc.n_nodes, 4), dtype=complex)
    for i in range(disc.n_interfaces):
        sl = disc.nodes_of(i)
        m = sl.stop - sl.start
        out[sl] = x[4 * sl.start:4 * sl.stop].reshape(4, m).T
    return out


def locate(disc: Discretization, points, samples: int = 2000):
    """Region id of each point: 0 outside every inclusion, ``i + 1`` inside interface ``i``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    region = np.zeros(len(pts), dtype=int)
    for i, c in enumerate(disc.curves):
        if c.smooth:
            poly = c.frame(np.linspace(0, c.period, samples, endpoint=False))[0]
        else:
            poly = c.vertices
        x, y = pts[:, 0], pts[:, 1]
        xs, ys = poly[:, 0], poly[:, 1]
        x2, y2 = np.roll(xs, -1), np.roll(ys, -1)
        cond = (ys[None] > y[:, None]) != (y2[None] > y[:, None])
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xs[None] + (y[:, None] - ys[None]) * (x2 - xs)[None] / (y2 - ys)[None]
        inside = np.count_nonzero(cond & (x[:, None] < xint), axis=1) % 2 == 1
        region[inside] = i + 1
    return region.reshape(np.shape(points)[:-1])


def _field_kernel(d, tq, dens, n2, q, kappa, ne):
    """Per-source contributions ``(6, npts)`` for densities ``dens`` (npts, 4)."""
    r = np.hypot(d[:, 0], d[:, 1])
    f0, f1, f2 = family_full(kappa, r)
    jt, jz, mt, mz = dens.T
    dtq = d[:, 0] * tq[:, 0] + d[:, 1] * tq[:, 1]
    dnq = d[:, 0] * tq[:, 1] - d[:, 1] * tq[:, 0]
    S = f0
    Sx, Sy = f1 * d[:, 0], f1 * d[:, 1]
    T = -f1 * dtq
    D = -f1 * dnq
    Tx = -(f2 * d[:, 0] * dtq + f1 * tq[:, 0])
    Ty = -(f2 * d[:, 1] * dtq + f1 * tq[:, 1])
    t1, t2 = tq[:, 0], tq[:, 1]
    Ez = -ne * T * jt - 1j * q * S * jz + D * mt
    Hz = ne * T * mt + 1j * q * S * mz + n2 * D * jt
    Ex = 1j * Tx * jt + ne * Sx * jz - 1j * n2 * S * jt * t1 - Sy * mz + 1j * ne * S * mt * t2
    Ey = 1j * Ty * jt + ne * Sy * jz - 1j * n2 * S * jt * t2 + Sx * mz - 1j * ne * S * mt * t1
    Hx = (-1j * Tx * mt - ne * Sx * mz + 1j * n2 * S * mt * t1 - n2 * Sy * jz
          + 1j * ne * n2 * S * jt * t2)
    Hy = (-1j * Ty * mt - ne * Sy * mz + 1j * n2 * S * mt * t2 + n2 * Sx * jz
          - 1j * ne * n2 * S * jt * t1)
    return np.stack([Ex, Ey, Ez, Hx, Hy, Hz])


def _panel_lengths(disc):
    return disc.panel_lengths()


def eval_field(points, region, densities, disc: Discretization, wn: WavenumberSet,
               check: bool = True, near_ratio: float = 4.0, tol: float = 1e-13) -> EMField:
    """Fields at ``points`` (shape ``(..., 2)``) lying in ``region``.

    Parameters
    ----------
    region : int
        0 for the cladding, ``i + 1`` for the inside of interface ``i``.
    densities : array
        Density vector of length ``4 * disc.n_nodes`` (system layout).
    check : bool
        Reject points closer to the boundary than one local panel length.

    Source panels within ``near_ratio`` panel radii of a point are
    integrated adaptively; the rest use the panel's Gauss nodes.
    """
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 2)
    dens = split_densities(disc, densities)
    if region == 0:
        ifaces = list(range(disc.n_interfaces))
        sign, n_reg = 1.0, 0
    else:
        if not 1 <= region <= disc.n_interfaces:
            raise ValueError(f"no region {region}")
        ifaces = [region - 1]
        sign, n_reg = 1.0, region
    n2 = wn.n[n_reg] ** 2
    q = wn.q[n_reg]
    kappa = wn.kappa[n_reg]
    ne = wn.ne
    nodes = np.concatenate([np.arange(disc.nodes_of(i).start, disc.nodes_of(i).stop) for i in ifaces])
    panels = np.unique(disc.panel_of[nodes])
    plen = _panel_lengths(disc)
    src = disc.points[nodes]
    out = np.zeros((6, len(pts)), dtype=complex)
    if len(pts) == 0:
        return EMField.from_stack(out.reshape((6,) + shape))
    # near pairs
    dist = np.hypot(*(pts[:, None, :] - disc.panel_center[panels][None]).transpose(2, 0, 1))
    near = dist < near_ratio * disc.panel_radius[panels][None]
    if check:
        dn = np.hypot(*(pts[:, None, :] - src[None]).transpose(2, 0, 1))
        j = np.argmin(dn, axis=1)
        if np.any(dn[np.arange(len(pts)), j] < plen[disc.panel_of[nodes[j]]]):
            raise NearBoundaryError("evaluation point closer than one panel length to a boundary")
    # far part with the panel nodes; near panels are zeroed and redone
    w = disc.weights[nodes]
    step = max(1, 200_000 // len(nodes))
    node_panel_pos = np.searchsorted(panels, disc.panel_of[nodes])
    for lo in range(0, len(pts), step):
        sl = slice(lo, lo + step)
        P = pts[sl]
        d = (P[:, None, :] - src[None]).reshape(-1, 2)
        npt = len(P)
        dd = np.broadcast_to(dens[nodes][None], (npt, len(nodes), 4)).reshape(-1, 4)
        tq = np.broadcast_to(disc.tangent[nodes][None], (npt, len(nodes), 2)).reshape(-1, 2)
        mask = near[sl][:, node_panel_pos].reshape(-1)
        d = d.copy()
        d[mask] = (1.0, 0.0)
        K = _field_kernel(d, tq, dd, n2, q, kappa, ne)
        K[:, mask] = 0
        K = K.reshape(6, npt, len(nodes)) * w[None, None]
        out[:, sl] += K.sum(axis=2)
    # near part: adaptive
    pi, pj = np.nonzero(near)
    if len(pi):
        pid = panels[pj]
        x_gl = disc.panel_list[0].nodes_y
        p = disc.p
        pdens = dens.reshape(-1, p, 4)

        def integrand(pair, y):
            P = pts[pi[pair]]
            g = pid[pair]
            anc, off, tq, spd = disc.eval_panels(g, y)
            d = (P - anc) - off
            L = lagrange_basis(x_gl, y)
            dval = np.einsum("nk,nkc->nc", L, pdens[g])
            vals = (_field_kernel(d, tq, dval, n2, q, kappa, ne) * spd).T
            # d carries the absolute rounding of the coordinates; the kernels
            # (up to 1/r^2) amplify it relative to |d|
            r = np.hypot(d[:, 0], d[:, 1])
            mag = np.hypot(P[:, 0], P[:, 1]) + np.hypot(anc[:, 0], anc[:, 1])
            return vals, np.finfo(float).eps * (1 + 2 * mag / r)

        integ = PanelIntegrator(n=p, tol=tol, scale=max(1.0, float(np.max(np.abs(dens)))))
        npair = len(pi)
        _, _, _, vals, _ = integ.run(integrand, np.arange(npair), -np.ones(npair), np.ones(npair),
                                     np.zeros(npair, int))
        np.add.at(out.T, pi, vals)
    out *= sign
    return EMField.from_stack(out.reshape((6,) + shape))


def transverse_from_longitudinal(dEz, dHz, n, ne):
    """Transverse components from ``(dEz/dx, dEz/dy)`` and ``(dHz/dx, dHz/dy)``.

    Returns ``(Ex, Ey, Hx, Hy)``.
    """
    q = n * n - ne * ne
    ezx, ezy = dEz
    hzx, hzy = dHz
    Hx = -(1j * n * n * ezy - 1j * ne * hzx) / q
    Ey = -(-1j * ne * ezy + 1j * hzx) / q
    Ex = (1j * ne * ezx + 1j * hzy) / q
    Hy = (1j * n * n * ezx + 1j * ne * hzy) / q
    return Ex, Ey, Hx, Hy


def boundary_mismatch(densities, disc: Discretization, wn: WavenumberSet, per_panel: int = 1,
                      offsets=(1, 2, 3, 4, 5, 6), delta: float = 5e-4):
    """Jumps of ``Ez, E_tau, Hz, H_tau`` across every interface.

    Fields are evaluated on both sides at distances ``k * delta * h``
    (``h`` the panel length, ``k`` in ``offsets``) along the normal through
    panel midpoints, and extrapolated to the boundary with the polynomial
    through those samples.  Returns a dict of max-norm jumps for
    ``"Ez", "Etau", "Hz", "Htau"`` relative to the largest sampled field
    magnitude, plus ``"scale"``.
    """
    ys = (np.arange(per_panel) + 0.5) / per_panel * 2 - 1
    pid = np.repeat(np.arange(disc.n_panels), per_panel)
    y = np.tile(ys, disc.n_panels)
    anc, off, tan, _ = disc.eval_panels(pid, y)
    base = anc + off
    nrm = np.stack([tan[:, 1], -tan[:, 0]], -1)
    h = disc.panel_lengths()[pid]
    ks = np.asarray(offsets, dtype=float)
    # Lagrange extrapolation weights to zero offset
    wts = np.array([np.prod([kk / (kk - k) for kk in ks if kk != k]) for k in ks])
    ifc = disc.panel_iface[pid]
    vals = {}
    for side, sgn in (("ext", 1.0), ("int", -1.0)):
        acc = np.zeros((6, len(pid)), dtype=complex)
        for k, wk in zip(ks, wts):
            P = base + sgn * (k * delta * h)[:, None] * nrm
            for i in range(disc.n_interfaces):
                sel = ifc == i
                reg = 0 if side == "ext" else i + 1
                F = eval_field(P[sel], reg, densities, disc, wn, check=False).stack()
                acc[:, sel] += wk * F
        vals[side] = acc
    jump = vals["ext"] - vals["int"]
    scale = max(np.max(np.abs(vals["ext"])), np.max(np.abs(vals["int"])), 1e-300)
    t1, t2 = tan[:, 0], tan[:, 1]
    res = {
        "Ez": np.max(np.abs(jump[2])) / scale,
        "Etau": np.max(np.abs(jump[0] * t1 + jump[1] * t2)) / scale,
        "Hz": np.max(np.abs(jump[5])) / scale,
        "Htau": np.max(np.abs(jump[3] * t1 + jump[4] * t2)) / scale,
        "scale": scale,
    }
    return res


@dataclass
class FieldGrid:
    x: np.ndarray
    y: np.ndarray
    region: np.ndarray          # (ny, nx)
    mask: np.ndarray            # True where the pixel is too close to a boundary
    fields: np.ndarray          # (6, ny, nx), NaN where masked
    normalization: float


def field_grid(bbox, resolution, densities, disc: Discretization, wn: WavenumberSet,
               normalize: bool = True) -> FieldGrid:
    """Fields on a row-major grid over ``bbox = (xmin, xmax, ymin, ymax)``.

    Pixels closer to a boundary than the local panel length are masked.
    With ``normalize`` the fields are scaled so that ``max |E| = 1``.
    """
    if np.isscalar(resolution):
        resolution = (resolution, resolution)
    nx, ny = int(resolution[0]), int(resolution[1])
    if nx < 1 or ny < 1:
        raise ValueError("resolution must be positive")
    xmin, xmax, ymin, ymax = map(float, bbox)
    if not all(np.isfinite([xmin, xmax, ymin, ymax])):
        raise ValueError("bounding box must be finite")
    x = np.linspace(xmin, xmax, nx)
    y = np.linspace(ymin, ymax, ny)
    X, Y = np.meshgrid(x, y)
    P = np.stack([X.ravel(), Y.ravel()], -1)
    region = locate(disc, P)
    plen = disc.panel_lengths()
    dn = np.full(len(P), np.inf)
    near_len = np.zeros(len(P))
    src = disc.points
    for lo in range(0, len(P), 2000):
        dd = np.hypot(*(P[lo:lo + 2000, None, :] - src[None]).transpose(2, 0, 1))
        j = np.argmin(dd, axis=1)
        dn[lo:lo + 2000] = dd[np.arange(len(j)), j]
        near_len[lo:lo + 2000] = plen[disc.panel_of[j]]
    mask = dn < near_len
    fields = np.full((6, len(P)), np.nan + 0j)
    for reg in np.unique(region):
        sel = (region == reg) & ~mask
        if sel.any():
            fields[:, sel] = eval_field(P[sel], int(reg), densities, disc, wn, check=False).stack()
    norm = 1.0
    if normalize:
        emag = np.sqrt(np.nansum(np.abs(fields[:3]) ** 2, axis=0))
        m = np.nanmax(emag) if np.any(np.isfinite(emag)) else 0.0
        if m > 0:
            norm = 1.0 / m
            fields *= norm
    return FieldGrid(x, y, region.reshape(ny, nx), mask.reshape(ny, nx),
                     fields.reshape(6, ny, nx), norm)
