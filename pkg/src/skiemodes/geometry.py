"""Interface curves, panel splitting with dyadic corner grading, node frames.

Points are stored as ``anchor + offset``.  For polygons the anchor of a
panel is its nearest vertex and the offset is an exact multiple of the
edge vector, so two points near the same corner have a difference that is
accurate to full *relative* precision even on panels of width 1e-9.  Smooth
curves anchor at their centre.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import gauss_legendre, lagrange_basis

__all__ = [
    "ValidationError",
    "Circle",
    "Ellipse",
    "PerturbedCircle",
    "Polygon",
    "Curve",
    "Panel",
    "build_curve",
    "panelize",
    "Discretization",
    "discretize",
]


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Circle:
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    start_angle: float = 0.0


@dataclass(frozen=True)
class Ellipse:
    center: tuple = (0.0, 0.0)
    a: float = 1.0
    b: float = 1.0
    start_angle: float = 0.0


@dataclass(frozen=True)
class PerturbedCircle:
    """Boundary ``|r(theta) - c| = d/2 (1 + h sin(m theta))``."""

    center: tuple = (0.0, 0.0)
    diameter: float = 1.0
    amplitude: float = 0.0
    lobes: int = 7
    start_angle: float = 0.0


@dataclass(frozen=True)
class Polygon:
    vertices: tuple = ()


def _segments_cross(p1, p2, p3, p4):
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return (orient(p1, p2, p3) * orient(p1, p2, p4) < 0
            and orient(p3, p4, p1) * orient(p3, p4, p2) < 0)


class Curve:
    """A closed, counter-clockwise parametrized curve.

    Smooth curves use ``t in [0, 2 pi)``; a polygon with ``m`` sides uses
    ``t in [0, m)`` with side ``k`` covering ``[k, k + 1]``.
    """

    def __init__(self, spec):
        self.spec = spec
        if isinstance(spec, Polygon):
            v = np.asarray(spec.vertices, dtype=float)
            if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
                raise ValidationError("polygon needs at least three 2D vertices")
            area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
            if area == 0:
                raise ValidationError("degenerate polygon")
            if area < 0:
                v = v[::-1].copy()
            m = len(v)
            edges = np.roll(v, -1, axis=0) - v
            if np.any(np.hypot(edges[:, 0], edges[:, 1]) == 0):
                raise ValidationError("repeated polygon vertex")
            for i in range(m):
                for j in range(i + 1, m):
                    if j == i + 1 or (i == 0 and j == m - 1):
                        continue
                    if _segments_cross(v[i], v[(i + 1) % m], v[j], v[(j + 1) % m]):
                        raise ValidationError("self-intersecting polygon")
            self.kind = "polygon"
            self.vertices = v
            self.edges = edges
            self.period = float(m)
            self.corners = np.arange(m, dtype=float)
            self.center = v.mean(axis=0)
        else:
            self.center = np.asarray(spec.center, dtype=float)
            self.period = 2 * np.pi
            self.corners = np.zeros(0)
            if isinstance(spec, Circle):
                if not spec.radius > 0:
                    raise ValidationError("circle radius must be positive")
                self.kind = "circle"
            elif isinstance(spec, Ellipse):
                if not (spec.a > 0 and spec.b > 0):
                    raise ValidationError("ellipse semi-axes must be positive")
                self.kind = "ellipse"
            elif isinstance(spec, PerturbedCircle):
                if not spec.diameter > 0:
                    raise ValidationError("diameter must be positive")
                if not abs(spec.amplitude) < 1:
                    raise ValidationError("perturbation amplitude must satisfy |h| < 1")
                self.kind = "perturbed_circle"
                # a star-shaped curve is simple when r(theta) > 0; also reject
                # amplitudes that make it fold back on itself
                th = np.linspace(0, 2 * np.pi, 4001)
                _, tang, _ = self._smooth(th)
                turn = np.unwrap(np.arctan2(tang[:, 1], tang[:, 0]))
                if turn[-1] - turn[0] < 2 * np.pi - 1e-6 or np.any(np.diff(turn) < -1.0):
                    raise ValidationError("perturbed circle is not simple")
            else:
                raise ValidationError(f"unknown curve spec {spec!r}")

    @property
    def smooth(self) -> bool:
        return self.kind != "polygon"

    def _smooth(self, t):
        """Offset from centre, unit tangent and speed for smooth curves."""
        s = self.spec
        th = t + s.start_angle
        c, sn = np.cos(th), np.sin(th)
        if self.kind == "circle":
            off = s.radius * np.stack([c, sn], -1)
            d = s.radius * np.stack([-sn, c], -1)
        elif self.kind == "ellipse":
            off = np.stack([s.a * c, s.b * sn], -1)
            d = np.stack([-s.a * sn, s.b * c], -1)
        else:
            rad = 0.5 * s.diameter * (1 + s.amplitude * np.sin(s.lobes * th))
            drad = 0.5 * s.diameter * s.amplitude * s.lobes * np.cos(s.lobes * th)
            off = rad[..., None] * np.stack([c, sn], -1)
            d = drad[..., None] * np.stack([c, sn], -1) + rad[..., None] * np.stack([-sn, c], -1)
        speed = np.hypot(d[..., 0], d[..., 1])
        return off, d / speed[..., None], speed

    def chord(self, t, dt):
        """``r(t + dt) - r(t)`` to full relative precision for small ``dt``.

        Only for smooth curves; uses half-angle forms so nearby points do
        not lose digits to cancellation.
        """
        s = self.spec
        th = np.asarray(t, dtype=float) + s.start_angle
        dt = np.asarray(dt, dtype=float)
        sh = np.sin(0.5 * dt)
        mid = th + 0.5 * dt
        ux, uy = -2 * sh * np.sin(mid), 2 * sh * np.cos(mid)   # e(t+dt) - e(t)
        if self.kind == "circle":
            return s.radius * np.stack([ux, uy], -1)
        if self.kind == "ellipse":
            return np.stack([s.a * ux, s.b * uy], -1)
        half = 0.5 * s.diameter
        rad_p = half * (1 + s.amplitude * np.sin(s.lobes * (th + dt)))
        drad = half * s.amplitude * 2 * np.cos(s.lobes * mid) * np.sin(0.5 * s.lobes * dt)
        return np.stack([rad_p * ux + drad * np.cos(th), rad_p * uy + drad * np.sin(th)], -1)

    def frame(self, t):
        """Positions, unit tangents, outward normals and speeds ``|dr/dt|``."""
        t = np.asarray(t, dtype=float)
        if self.smooth:
            off, tang, speed = self._smooth(t)
            pos = self.center + off
        else:
            m = len(self.vertices)
            tt = np.mod(t, self.period)
            k = np.minimum(np.floor(tt).astype(int), m - 1)
            frac = tt - k
            e = self.edges[k]
            pos = self.vertices[k] + frac[..., None] * e
            speed = np.hypot(e[..., 0], e[..., 1])
            tang = e / speed[..., None]
        normal = np.stack([tang[..., 1], -tang[..., 0]], -1)
        return pos, tang, normal, speed

    def perimeter(self) -> float:
        if not self.smooth:
            return float(np.sum(np.hypot(self.edges[:, 0], self.edges[:, 1])))
        x, w = np.polynomial.legendre.leggauss(64)
        total = 0.0
        nseg = 64
        for i in range(nseg):
            a, b = 2 * np.pi * i / nseg, 2 * np.pi * (i + 1) / nseg
            t = a + 0.5 * (b - a) * (x + 1)
            total += 0.5 * (b - a) * np.dot(w, self._smooth(t)[2])
        return total


def build_curve(spec) -> Curve:
    """Validate ``spec`` and return its :class:`Curve`."""
    return Curve(spec)


@dataclass
class Panel:
    """A parameter interval of a curve carrying ``p`` Gauss-Legendre nodes.

    For polygon panels ``anchor_t`` is the parameter of the nearest vertex
    and ``d0 < d1`` are the exact parameter offsets of the panel ends from it.
    """

    curve: Curve
    t0: float
    t1: float
    p: int
    anchor_t: float | None = None
    d0: float = 0.0
    d1: float = 0.0
    side: int = -1
    # filled in post-init
    nodes_y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.nodes_y = gauss_legendre(self.p).nodes

    @property
    def anchor(self) -> np.ndarray:
        if self.anchor_t is None:
            return self.curve.center
        m = len(self.curve.vertices)
        return self.curve.vertices[int(round(self.anchor_t)) % m]

    def geometry(self, y):
        """Offsets from :attr:`anchor`, unit tangents, normals and ``|dr/dy|``."""
        y = np.asarray(y, dtype=float)
        if self.anchor_t is None:
            t = self.t0 + 0.5 * (y + 1) * (self.t1 - self.t0)
            off, tang, speed = self.curve._smooth(t)
            speed = speed * 0.5 * (self.t1 - self.t0)
        else:
            d = 0.5 * (1 - y) * self.d0 + 0.5 * (1 + y) * self.d1
            e = self.curve.edges[self.side]
            off = d[..., None] * e
            le = np.hypot(e[0], e[1])
            tang = np.broadcast_to(e / le, off.shape).copy()
            speed = np.full(y.shape, le * 0.5 * (self.d1 - self.d0))
        normal = np.stack([tang[..., 1], -tang[..., 0]], -1)
        return off, tang, normal, speed

    @property
    def length(self) -> float:
        _, w = np.polynomial.legendre.leggauss(self.p)
        return float(np.dot(w, self.geometry(self.nodes_y)[3]))

    def interpolation_matrix(self, y):
        """Map nodal values to values at local parameters ``y``."""
        return lagrange_basis(self.nodes_y, y)


def _graded_side(n_base: int, levels: int):
    """Panel breakpoints on ``[0, 1]`` with dyadic refinement at both ends.

    Returns a list of ``(anchor_end, d0, d1)`` with ``d`` measured from the
    anchoring end of the side (``0`` or ``1``), exact in binary floating point
    when ``n_base`` is a power of two, and accurate to rounding otherwise.
    """
    h = 1.0 / n_base
    pieces = []
    # end at 0
    if levels > 0:
        pieces.append((0, 0.0, h * 2.0 ** -levels))
        for lv in range(levels, 0, -1):
            pieces.append((0, h * 2.0 ** -lv, h * 2.0 ** -(lv - 1)))
        start = 1
    else:
        start = 0
    stop = n_base - 1 if levels > 0 else n_base
    for i in range(start, stop):
        a, b = i * h, (i + 1) * h
        if a + b <= 1.0:
            pieces.append((0, a, b))
        else:
            pieces.append((1, -(1.0 - a), -(1.0 - b)))
    if levels > 0:
        for lv in range(1, levels + 1):
            pieces.append((1, -h * 2.0 ** -(lv - 1), -h * 2.0 ** -lv))
        pieces.append((1, -h * 2.0 ** -levels, 0.0))
    return pieces


def panelize(curve: Curve, n_panels: int, p: int = 10, corner_levels: int | None = None):
    """Split ``curve`` into panels.

    Smooth curves get ``n_panels`` panels of equal parameter length.  For
    polygons ``n_panels`` is the number of base panels per side; the two
    end panels of every side are then halved ``corner_levels`` times toward
    the vertex, giving ``n_panels + 2 * corner_levels`` panels per side.
    """
    if n_panels < 1:
        raise ValidationError("n_panels must be >= 1")
    if p < 2:
        raise ValidationError("p must be >= 2")
    if curve.smooth:
        if corner_levels:
            raise ValidationError("corner grading requested for a curve without corners")
        ts = np.linspace(0.0, curve.period, n_panels + 1)
        return [Panel(curve, ts[i], ts[i + 1], p) for i in range(n_panels)]
    if corner_levels is None:
        raise ValidationError("polygons require corner grading (corner_levels >= 0)")
    if corner_levels > 0 and n_panels < 2:
        raise ValidationError("graded polygon sides need at least two base panels")
    panels = []
    m = len(curve.vertices)
    for k in range(m):
        for end, d0, d1 in _graded_side(n_panels, corner_levels):
            anchor = float(k + end)
            panels.append(Panel(curve, k + end + d0, k + end + d1, p,
                                anchor_t=anchor, d0=d0, d1=d1, side=k))
    return panels


@dataclass
class Discretization:
    """All interfaces, their panels and flattened node data.

    Node ``g`` belongs to interface ``iface[g]`` (region ``iface[g] + 1``
    inside; region 0 is the shared exterior), panel ``panel_of[g]``.
    """

    curves: list
    panels: list            # list (per interface) of lists of Panel
    p: int

    def __post_init__(self):
        anchors, offs, tans, spd, wts, ifc, pid, ys = [], [], [], [], [], [], [], []
        self.panel_list = []
        self.panel_iface = []
        self.panel_start = []
        g = 0
        _, wgl = np.polynomial.legendre.leggauss(self.p)
        for i, plist in enumerate(self.panels):
            for pan in plist:
                off, tan, _, sp = pan.geometry(pan.nodes_y)
                anchors.append(np.broadcast_to(pan.anchor, off.shape))
                offs.append(off)
                tans.append(tan)
                spd.append(sp)
                wts.append(sp * wgl)
                ifc.append(np.full(self.p, i))
                pid.append(np.full(self.p, len(self.panel_list)))
                ys.append(pan.nodes_y)
                self.panel_start.append(g)
                self.panel_list.append(pan)
                self.panel_iface.append(i)
                g += self.p
        self.anchor = np.concatenate(anchors)
        self.offset = np.concatenate(offs)
        self.tangent = np.concatenate(tans)
        self.normal = np.stack([self.tangent[:, 1], -self.tangent[:, 0]], -1)
        self.speed = np.concatenate(spd)
        self.weights = np.concatenate(wts)
        self.iface = np.concatenate(ifc)
        self.panel_of = np.concatenate(pid)
        self.local_y = np.concatenate(ys)
        self.node_t = np.concatenate([pan.t0 + 0.5 * (pan.nodes_y + 1) * (pan.t1 - pan.t0)
                                      for pan in self.panel_list])
        self.panel_iface = np.asarray(self.panel_iface)
        self.panel_start = np.asarray(self.panel_start)
        counts = [len(pl) * self.p for pl in self.panels]
        self.iface_start = np.concatenate([[0], np.cumsum(counts)])
        # per-panel arrays for vectorized evaluation at arbitrary y
        pl = self.panel_list
        self._pan_curve = self.panel_iface
        self._pan_t0 = np.array([q.t0 for q in pl])
        self._pan_t1 = np.array([q.t1 for q in pl])
        self._pan_d0 = np.array([q.d0 for q in pl])
        self._pan_d1 = np.array([q.d1 for q in pl])
        self._pan_anchor = np.array([q.anchor for q in pl])
        self._pan_edge = np.array([q.curve.edges[q.side] if q.anchor_t is not None else (0.0, 0.0)
                                   for q in pl])
        self._pan_poly = np.array([q.anchor_t is not None for q in pl])
        pts = self.points.reshape(-1, self.p, 2)
        ends = np.concatenate([self.eval_panels(np.arange(self.n_panels), np.full(self.n_panels, -1.0))[1][:, None],
                               self.eval_panels(np.arange(self.n_panels), np.full(self.n_panels, 1.0))[1][:, None]],
                              axis=1) + self._pan_anchor[:, None]
        allp = np.concatenate([pts, ends], axis=1)
        self.panel_center = allp.mean(axis=1)
        self.panel_radius = np.max(np.hypot(*(allp - self.panel_center[:, None]).transpose(2, 0, 1)), axis=1)

    def eval_panels(self, pid, y):
        """Anchors, offsets, unit tangents and ``|dr/dy|`` at local ``y`` of panels ``pid``."""
        pid = np.asarray(pid)
        y = np.asarray(y, dtype=float)
        off = np.empty(y.shape + (2,))
        tan = np.empty(y.shape + (2,))
        spd = np.empty(y.shape)
        poly = self._pan_poly[pid]
        if poly.any():
            pp = pid[poly]
            d0, d1 = self._pan_d0[pp], self._pan_d1[pp]
            e = self._pan_edge[pp]
            d = 0.5 * (1 - y[poly]) * d0 + 0.5 * (1 + y[poly]) * d1
            off[poly] = d[:, None] * e
            le = np.hypot(e[:, 0], e[:, 1])
            tan[poly] = e / le[:, None]
            spd[poly] = le * 0.5 * (d1 - d0)
        sm = ~poly
        if sm.any():
            for ci in np.unique(self._pan_curve[pid[sm]]):
                sel = sm & (self._pan_curve[pid] == ci)
                pp = pid[sel]
                t0, t1 = self._pan_t0[pp], self._pan_t1[pp]
                t = t0 + 0.5 * (y[sel] + 1) * (t1 - t0)
                o, tg, sp = self.curves[ci]._smooth(t)
                off[sel], tan[sel], spd[sel] = o, tg, sp * 0.5 * (t1 - t0)
        return self._pan_anchor[pid], off, tan, spd

    def _smooth_fix(self, d, tnode, pid, y):
        """Recompute ``d`` for same-curve pairs on smooth curves via chords."""
        same = (self.iface[tnode] == self._pan_curve[pid]) & ~self._pan_poly[pid]
        if not same.any():
            return d
        tn, pq, yq = tnode[same], pid[same], y[same]
        t0, t1 = self._pan_t0[pq], self._pan_t1[pq]
        tq = t0 + 0.5 * (yq + 1) * (t1 - t0)
        dt = np.where(self.panel_of[tn] == pq, 0.5 * (self.local_y[tn] - yq) * (t1 - t0),
                      self.node_t[tn] - tq)
        ci = self.iface[tn]
        out = np.empty(dt.shape + (2,))
        for c in np.unique(ci):
            sel = ci == c
            out[sel] = self.curves[c].chord(tq[sel], dt[sel])
        d[same] = out
        return d

    def pair_difference(self, tnode, pid, y):
        """Accurate ``P - Q`` for target nodes and source points ``(pid, y)`` (broadcast)."""
        tnode, pid, y = np.broadcast_arrays(np.asarray(tnode), np.asarray(pid), np.asarray(y, float))
        anc, off, _, _ = self.eval_panels(pid, y)
        d = (self.anchor[tnode] - anc) + (self.offset[tnode] - off)
        return self._smooth_fix(d, tnode, pid, y)

    def node_difference(self, tnode, snode):
        """Accurate ``P - Q`` between node sets (broadcast)."""
        tnode, snode = np.broadcast_arrays(np.asarray(tnode), np.asarray(snode))
        d = (self.anchor[tnode] - self.anchor[snode]) + (self.offset[tnode] - self.offset[snode])
        return self._smooth_fix(d, tnode, self.panel_of[snode], self.local_y[snode])

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    @property
    def n_interfaces(self) -> int:
        return len(self.curves)

    @property
    def n_panels(self) -> int:
        return len(self.panel_list)

    @property
    def points(self) -> np.ndarray:
        return self.anchor + self.offset

    def nodes_of(self, i: int) -> slice:
        return slice(int(self.iface_start[i]), int(self.iface_start[i + 1]))

    def unknown_index(self, component: int, nodes=None) -> np.ndarray:
        """Global unknown indices of ``component`` (0..3) at ``nodes``.

        Unknowns are grouped per interface; inside interface ``i`` the layout
        is ``[J_tau, J_z, M_tau, M_z]``, each a contiguous run of that
        interface's nodes.
        """
        if nodes is None:
            nodes = np.arange(self.n_nodes)
        nodes = np.asarray(nodes)
        i = self.iface[nodes]
        start = self.iface_start[i]
        n_i = self.iface_start[i + 1] - start
        return 4 * start + component * n_i + (nodes - start)

    def panel_lengths(self) -> np.ndarray:
        w = self.weights.reshape(-1, self.p)
        return w.sum(axis=1)


def _check_disjoint(curves):
    samples = []
    for c in curves:
        t = np.linspace(0, c.period, 721)[:-1]
        samples.append(c.frame(t)[0])
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            d = np.hypot(*(samples[i][:, None, :] - samples[j][None, :, :]).transpose(2, 0, 1))
            if d.min() == 0 or _inside(samples[j][0], samples[i]) or _inside(samples[i][0], samples[j]):
                raise ValidationError(f"interfaces {i} and {j} intersect or are nested")
            # crossing check on the sampled polygons
            if _polylines_cross(samples[i], samples[j]):
                raise ValidationError(f"interfaces {i} and {j} intersect")


def _inside(pt, poly):
    x, y = pt
    xs, ys = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(xs, -1), np.roll(ys, -1)
    cond = (ys > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = xs + (y - ys) * (x2 - xs) / (y2 - ys)
    return bool(np.count_nonzero(cond & (x < xint)) % 2)


def _polylines_cross(a, b):
    # bounding-box rejection first
    if (a[:, 0].max() < b[:, 0].min() or b[:, 0].max() < a[:, 0].min()
            or a[:, 1].max() < b[:, 1].min() or b[:, 1].max() < a[:, 1].min()):
        return False
    a1, a2 = a, np.roll(a, -1, axis=0)
    b1, b2 = b, np.roll(b, -1, axis=0)

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))
    P1, P2 = a1[:, None], a2[:, None]
    Q1, Q2 = b1[None], b2[None]
    c = ((orient(P1, P2, Q1) * orient(P1, P2, Q2) < 0)
         & (orient(Q1, Q2, P1) * orient(Q1, Q2, P2) < 0))
    return bool(c.any())


def discretize(specs, n_panels, p: int = 10, corner_levels: int | None = 25) -> Discretization:
    """Build curves for ``specs`` and panelize each.

    ``n_panels`` may be a single count or one per interface.
    """
    curves = [build_curve(s) for s in specs]
    _check_disjoint(curves)
    if np.isscalar(n_panels):
        n_panels = [int(n_panels)] * len(curves)
    panels = []
    for c, n in zip(curves, n_panels):
        panels.append(panelize(c, n, p, None if c.smooth else corner_levels))
    return Discretization(curves, panels, p)
