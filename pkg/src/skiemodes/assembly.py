"""Dense Nystrom assembly of the boundary system ``M(ne) = D + A(ne)``.

Layout: unknowns are grouped per interface; within interface ``i`` the four
densities ``J_tau, J_z, M_tau, M_z`` follow each other, each over all nodes
of that interface.  Rows use the same layout for the conditions
``[H_z], -[H_tau], [E_z], -[E_tau]``.

A same-interface block is the exterior kernel minus the interior kernel
(singular parts cancelled analytically, see :mod:`skiemodes.kernels`).  A
block coupling two different interfaces carries the exterior kernel only.

Quadrature
----------
A (target node, source panel) pair is integrated with the panel's own Gauss
nodes when the target is well separated (``dist >= FAR_RATIO * radius`` and
``|kappa| radius`` small).  Every other pair is resolved adaptively once per
geometry: the coarse Gauss rule is compared against its two halves and
bisected until they agree; self pairs use the log-augmented rule on the two
sub-intervals touching the target.  Pairs accepted at the first level join
the plain Gauss part; the rest keep their own nodes and weights (a *plan*),
with densities interpolated from the panel nodes.  The plan depends on the
wavenumbers only through the kernel's smoothness, so it is built once and
reused for nearby ``ne``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import Discretization
from .kernels import PairGeometry, WavenumberSet, block_kernel
from .quadrature import LOG_RULE_ORDER, PanelIntegrator, lagrange_basis
from .specfun import DomainError

__all__ = ["SystemMatrix", "Assembler", "QuadraturePlan", "assemble", "apply",
           "DegenerateWavenumberError"]

log = logging.getLogger(__name__)

FAR_RATIO = 4.0
FAR_KAPPA_RADIUS = 1.5
GUARD = 1e-10


class DegenerateWavenumberError(DomainError):
    pass


@dataclass
class SystemMatrix:
    matrix: np.ndarray
    ne: complex
    disc: Discretization = field(repr=False, default=None)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        return apply(self, x)


def apply(M, x):
    """Matrix-vector product ``M x``."""
    A = M.matrix if isinstance(M, SystemMatrix) else np.asarray(M)
    x = np.asarray(x)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    return A @ x


@dataclass
class QuadraturePlan:
    """Special (target node, source panel) pairs with their own nodes."""

    target: np.ndarray        # per special pair
    panel: np.ndarray
    start: np.ndarray         # offsets into the node arrays (len = npairs + 1)
    d: np.ndarray             # target minus source per node, (npts, 2)
    tan_q: np.ndarray
    weight: np.ndarray        # quadrature weight times |dr/dy|
    interp: np.ndarray        # (npts, p) Lagrange values
    kappa_ref: float
    failed: list
    build_seconds: float = 0.0

    @property
    def n_pairs(self):
        return len(self.target)

    @property
    def n_points(self):
        return len(self.weight)


class Assembler:
    """Assembles ``M(ne)`` for a discretization and material indices.

    Parameters
    ----------
    disc : Discretization
    indices : sequence of float
        ``indices[0]`` is the cladding index, ``indices[i + 1]`` the index
        inside interface ``i``.
    tol : float
        Adaptive quadrature tolerance (absolute, relative to O(1) entries).
    branch : str
        Square-root branch for the transverse wavenumbers.
    """

    def __init__(self, disc: Discretization, indices, tol: float = 1e-13,
                 branch: str = "outgoing", chunk_pairs: int = 400_000,
                 rebuild_factor: float = 1.2):
        self.disc = disc
        self.indices = np.asarray(indices, dtype=float)
        if len(self.indices) != disc.n_interfaces + 1:
            raise ValueError("need one index for the cladding plus one per interface")
        if np.any(self.indices <= 0):
            raise ValueError("refractive indices must be positive")
        if disc.p not in LOG_RULE_ORDER:
            raise ValueError(f"panel order p must be one of {sorted(LOG_RULE_ORDER)}")
        self.tol = tol
        self.branch = branch
        self.chunk_pairs = chunk_pairs
        self.rebuild_factor = rebuild_factor
        self.plan = None
        self.timings = {}

    # -- wavenumbers --------------------------------------------------------
    def wavenumbers(self, ne) -> WavenumberSet:
        try:
            return WavenumberSet.build(self.indices, ne, self.branch, GUARD)
        except DomainError as exc:
            raise DegenerateWavenumberError(str(exc)) from None

    def _media(self, wn, i_t, i_s):
        """``(media, c1, c2)`` for targets on interface i_t, sources on i_s."""
        n2 = self.indices ** 2
        ext = (1.0, n2[0], wn.q[0], wn.kappa[0])
        if i_t == i_s:
            j = i_s + 1
            return [ext, (-1.0, n2[j], wn.q[j], wn.kappa[j])], 0.0, n2[0] - n2[j]
        return [ext], 1.0, n2[0]

    def diagonal(self):
        d = np.empty(4 * self.disc.n_nodes)
        n2 = self.indices ** 2
        for i in range(self.disc.n_interfaces):
            sl = self.disc.nodes_of(i)
            m = sl.stop - sl.start
            base = 4 * sl.start
            d[base:base + 2 * m] = 0.5 * (n2[0] + n2[i + 1])
            d[base + 2 * m:base + 4 * m] = 1.0
        return d

    # -- kernel at arbitrary (target node, source point) --------------------
    def _kernel_points(self, wn, tnode, i_s, d, tan_q):
        """Kernel blocks ``(npts, 4, 4)`` for targets ``tnode``, sources on interfaces ``i_s``."""
        disc = self.disc
        out = np.empty((len(tnode), 4, 4), dtype=complex)
        i_t = disc.iface[tnode]
        for a in np.unique(i_t):
            for b in np.unique(i_s[i_t == a]):
                sel = (i_t == a) & (i_s == b)
                g = PairGeometry(d[sel], disc.tangent[tnode[sel]], tan_q[sel])
                media, c1, c2 = self._media(wn, a, b)
                out[sel] = np.moveaxis(block_kernel(g, wn.ne, media, c1, c2), -1, 0)
        return out

    # -- plan ---------------------------------------------------------------
    def _candidate_pairs(self, wn):
        """(target, panel) pairs that cannot be trusted to the plain Gauss rule."""
        disc = self.disc
        kmax = float(np.max(np.abs(wn.kappa)))
        pts = disc.points
        ts, ps = [], []
        step = max(1, self.chunk_pairs // max(disc.n_panels, 1))
        for lo in range(0, disc.n_nodes, step):
            t = np.arange(lo, min(lo + step, disc.n_nodes))
            dist = np.hypot(*(pts[t][:, None, :] - disc.panel_center[None]).transpose(2, 0, 1))
            rad = disc.panel_radius[None]
            near = (dist < FAR_RATIO * rad) | (kmax * rad > FAR_KAPPA_RADIUS)
            near[np.arange(len(t)), disc.panel_of[t]] = True
            a, b = np.nonzero(near)
            ts.append(t[a])
            ps.append(b)
        return np.concatenate(ts), np.concatenate(ps)

    def build_plan(self, ne) -> QuadraturePlan:
        t0 = time.perf_counter()
        wn = self.wavenumbers(ne)
        disc = self.disc
        p = disc.p
        tgt, pan = self._candidate_pairs(wn)
        selfp = disc.panel_of[tgt] == pan
        y_t = disc.local_y[tgt]
        # items: far-ish pairs as one smooth item, self pairs as two log items
        ns = int(selfp.sum())
        idx = np.arange(len(tgt))
        item_pair = np.concatenate([idx[~selfp], idx[selfp], idx[selfp]])
        item_a = np.concatenate([np.full((~selfp).sum(), -1.0), np.full(ns, -1.0), y_t[selfp]])
        item_b = np.concatenate([np.full((~selfp).sum(), 1.0), y_t[selfp], np.full(ns, 1.0)])
        item_s = np.concatenate([np.zeros((~selfp).sum(), int), np.ones(ns, int), -np.ones(ns, int)])
        accept = np.concatenate([np.ones((~selfp).sum(), bool), np.zeros(2 * ns, bool)])
        x_gl = disc.panel_list[0].nodes_y
        top = np.polynomial.legendre.Legendre.basis(p - 1)

        def integrand(pair, y):
            tn = tgt[pair]
            pid = pan[pair]
            _, _, tq, spd = disc.eval_panels(pid, y)
            d = disc.pair_difference(tn, pid, y)
            K = self._kernel_points(wn, tn, disc.panel_iface[pid], d, tq).reshape(-1, 16)
            K *= spd[:, None]
            return np.concatenate([K, K * top(y)[:, None]], axis=1)

        integ = PanelIntegrator(n=p, log_order=LOG_RULE_ORDER[p], tol=self.tol)
        pp, py, pw, _, failed = integ.run(integrand, item_pair, item_a, item_b, item_s, accept)
        counts = np.bincount(pp, minlength=len(tgt))
        order = np.argsort(pp, kind="stable")
        pp, py, pw = pp[order], py[order], pw[order]
        # a non-self pair kept at exactly the panel's Gauss nodes is plain Gauss
        start = np.concatenate([[0], np.cumsum(counts)])
        plain = np.zeros(len(tgt), bool)
        cand = np.nonzero((counts == p) & ~selfp)[0]
        if len(cand):
            yy = py[start[cand][:, None] + np.arange(p)]
            plain[cand] = np.all(np.abs(yy - x_gl[None]) <= 1e-14, axis=1)
        keep = ~plain
        keep_pts = np.repeat(keep, counts)
        py, pw, pp = py[keep_pts], pw[keep_pts], pp[keep_pts]
        counts = counts[keep]
        pairs = np.nonzero(keep)[0]
        tn = tgt[pairs]
        pid = pan[pairs]
        tn_pts = np.repeat(tn, counts)
        pid_pts = np.repeat(pid, counts)
        _, _, tq, spd = disc.eval_panels(pid_pts, py)
        d = disc.pair_difference(tn_pts, pid_pts, py)
        plan = QuadraturePlan(
            target=tn, panel=pid, start=np.concatenate([[0], np.cumsum(counts)]),
            d=d, tan_q=tq, weight=pw * spd, interp=lagrange_basis(x_gl, py),
            kappa_ref=float(np.max(np.abs(wn.kappa))),
            failed=[(int(tgt[f]), int(pan[f])) for f in failed])
        plan.build_seconds = time.perf_counter() - t0
        if plan.failed:
            log.warning("adaptive quadrature hit the depth limit on %d pairs", len(plan.failed))
        log.info("plan: %d candidate pairs, %d special, %d points, %.2fs",
                 len(tgt), plan.n_pairs, plan.n_points, plan.build_seconds)
        self.plan = plan
        return plan

    def _ensure_plan(self, wn):
        k = float(np.max(np.abs(wn.kappa)))
        if (self.plan is None or k > self.rebuild_factor * self.plan.kappa_ref
                or k < self.plan.kappa_ref / self.rebuild_factor):
            self.build_plan(wn.ne)
        return self.plan

    # -- assembly -------------------------------------------------------------
    def assemble(self, ne) -> SystemMatrix:
        wn = self.wavenumbers(ne)
        plan = self._ensure_plan(wn)
        disc = self.disc
        t0 = time.perf_counter()
        N = disc.n_nodes
        M = np.zeros((4 * N, 4 * N), dtype=complex)
        self._dense(wn, M)
        t1 = time.perf_counter()
        self._special(wn, plan, M)
        t2 = time.perf_counter()
        M[np.diag_indices(4 * N)] += self.diagonal()
        self.timings = {"dense": t1 - t0, "special": t2 - t1}
        return SystemMatrix(M, complex(ne), disc)

    def _dense(self, wn, M):
        disc = self.disc
        w = disc.weights
        for a in range(disc.n_interfaces):
            ra = disc.nodes_of(a)
            na = ra.stop - ra.start
            for b in range(disc.n_interfaces):
                rb = disc.nodes_of(b)
                nb = rb.stop - rb.start
                media, c1, c2 = self._media(wn, a, b)
                blk = M[4 * ra.start:4 * ra.stop, 4 * rb.start:4 * rb.stop].reshape(4, na, 4, nb)
                step = max(1, self.chunk_pairs // nb)
                src = np.arange(rb.start, rb.stop)
                for lo in range(0, na, step):
                    tt = np.arange(ra.start + lo, min(ra.start + lo + step, ra.stop))
                    d = disc.node_difference(tt[:, None], src[None])
                    coinc = (d[..., 0] == 0) & (d[..., 1] == 0)
                    if coinc.any():
                        d[coinc] = (1.0, 0.0)     # placeholder, overwritten by the plan
                    g = PairGeometry(d, disc.tangent[tt][:, None], disc.tangent[src][None])
                    K = block_kernel(g, wn.ne, media, c1, c2)
                    K *= w[src]
                    blk[:, lo:lo + len(tt)] = K.transpose(0, 2, 1, 3)

    def _special(self, wn, plan, M, chunk_points: int = 40_000):
        disc = self.disc
        p = disc.p
        if plan.n_pairs == 0:
            return
        starts = plan.start
        rows_base = disc.unknown_index(0, plan.target)
        ifc_t = disc.iface[plan.target]
        n_t = disc.iface_start[ifc_t + 1] - disc.iface_start[ifc_t]
        src0 = disc.panel_start[plan.panel]
        cols_base = disc.unknown_index(0, src0)
        ifc_s = disc.iface[src0]
        n_s = disc.iface_start[ifc_s + 1] - disc.iface_start[ifc_s]
        lo = 0
        npairs = plan.n_pairs
        while lo < npairs:
            hi = int(np.searchsorted(starts, starts[lo] + chunk_points, side="right")) - 1
            hi = min(max(hi, lo + 1), npairs)
            a, b = starts[lo], starts[hi]
            cnt = np.diff(starts[lo:hi + 1])
            tn = np.repeat(plan.target[lo:hi], cnt)
            i_s = np.repeat(disc.panel_iface[plan.panel[lo:hi]], cnt)
            K = self._kernel_points(wn, tn, i_s, plan.d[a:b], plan.tan_q[a:b])
            K *= plan.weight[a:b, None, None]
            contrib = K[:, :, :, None] * plan.interp[a:b, None, None, :]
            C = np.add.reduceat(contrib.reshape(b - a, -1), starts[lo:hi] - a, axis=0)
            C = C.reshape(-1, 4, 4, p)
            sl = slice(lo, hi)
            rows = rows_base[sl, None] + np.arange(4)[None] * n_t[sl, None]        # (np, 4)
            cols = (cols_base[sl, None, None] + np.arange(4)[None, :, None] * n_s[sl, None, None]
                    + np.arange(p)[None, None, :])                               # (np, 4, p)
            M[rows[:, :, None, None], cols[:, None, :, :]] = C
            lo = hi


def assemble(disc: Discretization, indices, ne, **kw) -> SystemMatrix:
    """One-shot assembly (builds a fresh quadrature plan)."""
    return Assembler(disc, indices, **kw).assemble(ne)
