"""Quadrature rules and a vectorized adaptive panel integrator.

Three kinds of rules are used on a panel parametrized by ``y in [-1, 1]``:

* Gauss-Legendre for smooth integrands;
* a log-augmented product rule on ``[0, 1]`` exact for ``s^j`` and
  ``s^j log s`` (``j < order``), used on the sub-interval touching a
  logarithmic singularity;
* adaptive bisection, where each interval's estimate is accepted once it
  agrees with the sum over its two halves.

The log rules are generated in extended precision by
:func:`generate_log_rule` and shipped in ``data/log_rules.json``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

__all__ = [
    "QuadRule",
    "ConvergenceError",
    "ConfigurationError",
    "gauss_legendre",
    "generate_log_rule",
    "log_rule_01",
    "log_rule_at",
    "log_ggq_rule",
    "LOG_RULE_ORDER",
    "adaptive_integrate",
    "PanelIntegrator",
    "lagrange_basis",
]

# panel order p -> order of the shipped [0, 1] log rule
LOG_RULE_ORDER = {10: 16, 16: 24}
# estimates closer than this multiple of their summed rounding level agree
ROUNDING_FACTOR = 64


class ConvergenceError(RuntimeError):
    """Adaptive subdivision hit its depth limit.

    ``estimate`` holds the best available value.
    """

    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class QuadRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "smooth"

    def __len__(self):
        return len(self.nodes)

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int) -> QuadRule:
    """``n``-point Gauss-Legendre rule on ``[-1, 1]``."""
    if n < 1:
        raise ValueError("Gauss-Legendre rule needs n >= 1")
    x, w = _gl(n)
    return QuadRule(x, w, "smooth")


def generate_log_rule(order: int, dps: int = 60):
    """Build the ``[0, 1]`` rule exact for ``s^j, s^j log s`` (``j < order``).

    Nodes are ``u_i^2`` with ``u_i`` the ``2*order`` Gauss-Legendre points
    of ``[0, 1]`` (refined by Newton in ``dps``-digit arithmetic); the
    weights solve the moment system in the shifted Legendre basis at the
    same precision.  No randomness is involved, so the output is
    bit-reproducible for fixed ``order`` and ``dps``.
    """
    import mpmath as mp

    with mp.workdps(dps):
        nn = 2 * order
        x0, _ = np.polynomial.legendre.leggauss(nn)
        u = [(1 + mp.findroot(lambda t: mp.legendre(nn, t), mp.mpf(float(xi)))) / 2
             for xi in x0]
        s = [ui ** 2 for ui in u]
        a = mp.matrix(nn, nn)
        b = mp.matrix(nn, 1)
        for j in range(order):
            c = mp.taylor(lambda t: mp.legendre(j, 2 * t - 1), 0, j)
            b[j] = mp.fsum(c[m] / (m + 1) for m in range(j + 1))
            b[order + j] = -mp.fsum(c[m] / (m + 1) ** 2 for m in range(j + 1))
            for i in range(nn):
                pj = mp.legendre(j, 2 * s[i] - 1)
                a[j, i] = pj
                a[order + j, i] = pj * mp.log(s[i])
        w = mp.lu_solve(a, b)
        return (np.array([float(v) for v in s]), np.array([float(v) for v in w]))


@lru_cache(maxsize=None)
def _shipped_rules():
    text = resources.files("skiemodes").joinpath("data/log_rules.json").read_text()
    data = json.loads(text)
    return {int(k): (np.array(v["nodes"]), np.array(v["weights"])) for k, v in data["rules"].items()}


def log_rule_01(order: int) -> QuadRule:
    """Shipped log-augmented rule on ``[0, 1]`` (singular end at 0)."""
    rules = _shipped_rules()
    if order not in rules:
        raise ConfigurationError(f"no shipped log rule of order {order}; have {sorted(rules)}")
    s, w = rules[order]
    return QuadRule(s, w, "log-augmented")


def log_rule_at(x_t: float, order: int = 16) -> QuadRule:
    """Rule on ``[-1, 1]`` exact for ``f + g log|x - x_t|`` (f, g of degree < order)."""
    if not -1.0 < x_t < 1.0:
        raise ValueError("target must lie strictly inside (-1, 1)")
    base = log_rule_01(order)
    left = 1.0 + x_t
    right = 1.0 - x_t
    nodes = np.concatenate([x_t - left * base.nodes[::-1], x_t + right * base.nodes])
    weights = np.concatenate([left * base.weights[::-1], right * base.weights])
    return QuadRule(nodes, weights, "log-augmented")


def log_ggq_rule(p: int, target_index: int) -> QuadRule:
    """Self-panel rule for the ``target_index``-th (0-based) of ``p`` Gauss nodes."""
    if p not in LOG_RULE_ORDER:
        raise ConfigurationError(f"log rules are shipped for p in {sorted(LOG_RULE_ORDER)}, not {p}")
    if not 0 <= target_index < p:
        raise IndexError("target_index out of range")
    x, _ = _gl(p)
    return log_rule_at(float(x[target_index]), LOG_RULE_ORDER[p])


def lagrange_basis(nodes: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Values ``L[k, j] = l_j(y_k)`` of the Lagrange basis on ``nodes``.

    Barycentric evaluation; exact (to rounding) at the nodes themselves.
    """
    nodes = np.asarray(nodes, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    d = y[:, None] - nodes[None, :]
    hit = d == 0
    d[hit] = 1.0
    t = bw[None, :] / d
    out = t / t.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = hit[rows].astype(float)
    return out


def adaptive_integrate(f, a: float, b: float, tol: float = 1e-13, n: int = 16,
                       max_depth: int = 50):
    """Adaptive Gauss-Legendre integral of ``f`` over ``[a, b]``.

    ``f`` maps an array of abscissae to values (scalar or trailing vector
    axes).  An interval is accepted when its ``n``-point estimate agrees with
    the sum over its halves to within its share of ``tol`` (absolute or
    relative to the running total, whichever is looser).
    """
    x, w = _gl(n)

    def rule(lo, hi):
        h = 0.5 * (hi - lo)
        vals = np.asarray(f(lo + h * (x + 1)))
        return h * np.tensordot(w, vals, axes=(0, 0))

    whole = rule(a, b)
    stack = [(a, b, whole, 0)]
    total = 0.0
    scale = max(np.max(np.abs(whole)), 1e-300)
    failed = False
    while stack:
        lo, hi, coarse, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        fine = left + right
        err = np.max(np.abs(fine - coarse))
        share = (hi - lo) / (b - a)
        if err <= max(tol, tol * scale) * share or err <= 1e-15 * scale * share:
            total = total + fine
        elif depth >= max_depth:
            total = total + fine
            failed = True
        else:
            stack.append((mid, hi, right, depth + 1))
            stack.append((lo, mid, left, depth + 1))
    if failed:
        raise ConvergenceError("adaptive_integrate: subdivision limit reached", total)
    return total


class PanelIntegrator:
    """Batched adaptive integration over many (target, panel) pairs at once.

    Each work item is an interval ``[a, b]`` of a panel's local parameter,
    tagged with a pair id and an optional logarithmic singular endpoint
    (``sing = -1`` at ``a``, ``+1`` at ``b``, ``0`` none).  The callback
    ``integrand(pair, y)`` must return per-point values of shape
    ``(npts, m)``; weights include the ``[a, b] -> [-1, 1]`` Jacobian only.
    It may instead return ``(values, rel_noise)`` with ``rel_noise`` of shape
    ``(npts,)`` giving the relative rounding level of each value (default
    machine epsilon), for integrands evaluated from ill-conditioned data.

    An item is accepted when coarse and refined estimates differ by at most
    ``tol * max(scale * (b - a)/2, |estimate|)``, or by no more than the
    rounding noise of the summands.

    The result is a quadrature *plan*: for every pair, a set of nodes ``y``
    and weights ``w`` that integrate the callback to the requested tolerance.
    """

    def __init__(self, n: int = 10, log_order: int = 16, tol: float = 1e-13,
                 max_depth: int = 40, batch_points: int = 60000, scale: float = 1.0):
        self.n = n
        self.scale = scale
        self.x, self.w = _gl(n)
        base = log_rule_01(log_order)
        self.sx, self.sw = base.nodes, base.weights
        self.tol = tol
        self.max_depth = max_depth
        self.batch_points = batch_points

    def _nodes(self, a, b, sing):
        """Quadrature nodes/weights for intervals; rows padded to equal length."""
        h = 0.5 * (b - a)
        ns = len(self.sx)
        npt = max(self.n, ns)
        y = np.zeros((len(a), npt))
        w = np.zeros((len(a), npt))
        smooth = sing == 0
        if smooth.any():
            y[smooth, :self.n] = a[smooth, None] + h[smooth, None] * (self.x + 1)
            w[smooth, :self.n] = h[smooth, None] * self.w
            # padding duplicates a node with zero weight
            y[smooth, self.n:] = y[smooth, :1]
        lft = sing == -1
        if lft.any():
            L = (b - a)[lft, None]
            y[lft, :ns] = a[lft, None] + L * self.sx
            w[lft, :ns] = L * self.sw
            y[lft, ns:] = y[lft, :1]
        rgt = sing == 1
        if rgt.any():
            L = (b - a)[rgt, None]
            y[rgt, :ns] = b[rgt, None] - L * self.sx
            w[rgt, :ns] = L * self.sw
            y[rgt, ns:] = y[rgt, :1]
        return y, w

    def _estimate(self, integrand, pair, a, b, sing):
        y, w = self._nodes(a, b, sing)
        valid = w != 0
        counts = valid.sum(axis=1)
        vals = integrand(np.broadcast_to(pair[:, None], y.shape)[valid], y[valid])
        noise = np.finfo(float).eps
        if isinstance(vals, tuple):
            vals, noise = vals
            noise = np.maximum(np.asarray(noise, float), np.finfo(float).eps)[:, None]
        contrib = w[valid][:, None] * vals
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        # rounding level of the sum, below which differences are not resolvable
        size = np.add.reduceat(np.abs(contrib) * noise, starts, axis=0).max(axis=1)
        return np.add.reduceat(contrib, starts, axis=0), size, y, w

    def run(self, integrand, pair, a, b, sing, accept_coarse=None):
        """Return ``(plan_pair, plan_y, plan_w, integrals, failed_pairs)``.

        ``accept_coarse`` (bool per item) lets the caller keep the coarse
        rule itself once it is validated; otherwise the validated halves
        are stored.
        """
        pair = np.asarray(pair)
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        sing = np.asarray(sing)
        npair = int(pair.max()) + 1 if len(pair) else 0
        if accept_coarse is None:
            accept_coarse = np.zeros(len(pair), bool)
        out_p, out_y, out_w = [], [], []
        integrals = None
        failed = []
        coarse = None
        depth = np.zeros(len(pair), int)
        per_item = max(self.n, len(self.sx))
        while len(pair):
            chunk = max(1, self.batch_points // (3 * per_item))
            next_items = []
            for lo in range(0, len(pair), chunk):
                sl = slice(lo, lo + chunk)
                p_, a_, b_, s_ = pair[sl], a[sl], b[sl], sing[sl]
                d_, ac_ = depth[sl], accept_coarse[sl]
                if coarse is None:
                    c_, _, yc, wc = self._estimate(integrand, p_, a_, b_, s_)
                else:
                    c_ = coarse[sl]
                    yc, wc = self._nodes(a_, b_, s_)
                m = 0.5 * (a_ + b_)
                sl_ = np.where(s_ == -1, -1, 0)
                sr_ = np.where(s_ == 1, 1, 0)
                l_, size_l, yl, wl = self._estimate(integrand, p_, a_, m, sl_)
                r_, size_r, yr, wr = self._estimate(integrand, p_, m, b_, sr_)
                noise = ROUNDING_FACTOR * (size_l + size_r)
                fine = l_ + r_
                if integrals is None:
                    integrals = np.zeros((npair, fine.shape[1]), dtype=fine.dtype)
                err = np.max(np.abs(fine - c_), axis=1)
                share = 0.5 * (b_ - a_)
                mag = np.maximum(np.max(np.abs(fine), axis=1), self.scale * share)
                ok = err <= np.maximum(self.tol * mag, noise)
                give_up = ~ok & (d_ >= self.max_depth)
                if give_up.any():
                    failed.extend(np.unique(p_[give_up]).tolist())
                    ok = ok | give_up
                keep_c = ok & ac_
                keep_f = ok & ~ac_
                if keep_c.any():
                    np.add.at(integrals, p_[keep_c], c_[keep_c])
                    self._emit(out_p, out_y, out_w, p_[keep_c], yc[keep_c], wc[keep_c])
                if keep_f.any():
                    np.add.at(integrals, p_[keep_f], fine[keep_f])
                    self._emit(out_p, out_y, out_w, p_[keep_f], yl[keep_f], wl[keep_f])
                    self._emit(out_p, out_y, out_w, p_[keep_f], yr[keep_f], wr[keep_f])
                bad = ~ok
                if bad.any():
                    next_items.append((
                        np.concatenate([p_[bad], p_[bad]]),
                        np.concatenate([a_[bad], m[bad]]),
                        np.concatenate([m[bad], b_[bad]]),
                        np.concatenate([sl_[bad], sr_[bad]]),
                        np.concatenate([d_[bad] + 1, d_[bad] + 1]),
                        np.concatenate([l_[bad], r_[bad]]),
                    ))
            if not next_items:
                break
            pair, a, b, sing, depth, coarse = (np.concatenate(t) for t in zip(*next_items))
            accept_coarse = np.zeros(len(pair), bool)
        if not out_p:
            return (np.zeros(0, int), np.zeros(0), np.zeros(0), integrals, failed)
        return (np.concatenate(out_p), np.concatenate(out_y), np.concatenate(out_w),
                integrals, sorted(set(failed)))

    @staticmethod
    def _emit(out_p, out_y, out_w, p, y, w):
        nz = w != 0
        out_p.append(np.broadcast_to(p[:, None], y.shape)[nz])
        out_y.append(y[nz])
        out_w.append(w[nz])
