"""Locate effective indices where the boundary system is singular.

The scalar objective is ``f(ne) = 1 / (u^T M(ne)^{-1} v)`` for two fixed
random vectors; it vanishes at modes and is analytic elsewhere, so Müller's
three-point iteration converges to its zeros.  Every converged root is
confirmed by the singular values of ``M``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator
from scipy.sparse.linalg import gmres as _scipy_gmres

from .assembly import SystemMatrix

__all__ = [
    "ProbeVectors",
    "Objective",
    "objective",
    "MullerResult",
    "muller_iterate",
    "ScanResult",
    "scan_objective",
    "nullspace",
    "solve_dense",
    "GMRESResult",
    "gmres",
    "Mode",
    "refine_mode",
    "DEFAULT_SEED",
]

log = logging.getLogger(__name__)

DEFAULT_SEED = 20240607
SVD_DENSE_LIMIT = 6000


@dataclass(frozen=True)
class ProbeVectors:
    u: np.ndarray
    v: np.ndarray
    seed: int

    @classmethod
    def generate(cls, n: int, seed: int = DEFAULT_SEED):
        rng = np.random.default_rng(seed)
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        return cls(u, v, seed)


def _matrix(M):
    return M.matrix if isinstance(M, SystemMatrix) else np.asarray(M)


def objective(M, probes: ProbeVectors) -> complex:
    """``1 / (u^T M^{-1} v)``; returns exactly 0 when ``M`` is exactly singular."""
    A = _matrix(M)
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            lu = sla.lu_factor(A, check_finite=False)
        except (sla.LinAlgError, sla.LinAlgWarning):
            return 0j
    if np.any(np.diag(lu[0]) == 0):
        return 0j
    x = sla.lu_solve(lu, probes.v, check_finite=False)
    return 1.0 / (probes.u @ x)


class Objective:
    """``ne -> f(ne)`` bound to an assembler and fixed probes; counts calls."""

    def __init__(self, assembler, probes: ProbeVectors | None = None, seed: int = DEFAULT_SEED):
        self.assembler = assembler
        n = 4 * assembler.disc.n_nodes
        self.probes = probes if probes is not None else ProbeVectors.generate(n, seed)
        self.calls = 0

    def __call__(self, ne) -> complex:
        self.calls += 1
        return objective(self.assembler.assemble(ne), self.probes)


@dataclass
class MullerResult:
    root: complex
    f_root: complex
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def muller_iterate(f, guesses, tol: float = 1e-13, max_iter: int = 50,
                   f_floor: float = 0.0) -> MullerResult:
    """Müller's method for a zero of the complex function ``f``.

    Stops when the step is at most ``tol * max(1, |x|)`` or ``|f| <= f_floor``.
    Of the two roots of the interpolating quadratic the one giving the larger
    denominator (the smaller step) is taken.  Returns the best iterate with
    ``converged=False`` after ``max_iter`` steps.
    """
    x = [complex(g) for g in guesses]
    if len(x) != 3 or len(set(x)) != 3:
        raise ValueError("need three distinct initial guesses")
    fx = [complex(f(xi)) for xi in x]
    history = list(zip(x, fx))
    for xi, fi in zip(x, fx):
        if abs(fi) <= f_floor:
            return MullerResult(xi, fi, 0, True, history)
    scale = max(abs(x[2] - x[1]), abs(x[1] - x[0]))
    for it in range(1, max_iter + 1):
        x0, x1, x2 = x
        f0, f1, f2 = fx
        if x2 == x1 or x1 == x0:
            # coincident iterates: restart around the newest one
            x1 = x2 - scale * 1e-3
            x0 = x2 + scale * 1e-3
            f1, f0 = complex(f(x1)), complex(f(x0))
        q = (x2 - x1) / (x1 - x0)
        A = q * f2 - q * (1 + q) * f1 + q * q * f0
        B = (2 * q + 1) * f2 - (1 + q) ** 2 * f1 + q * q * f0
        C = (1 + q) * f2
        disc = np.sqrt(B * B - 4 * A * C)
        den = B + disc if abs(B + disc) >= abs(B - disc) else B - disc
        if den == 0:
            step = (x2 - x1) * (1 + 0.5j)
        else:
            step = -(x2 - x1) * 2 * C / den
        x3 = x2 + step
        f3 = complex(f(x3))
        history.append((x3, f3))
        x, fx = [x1, x2, x3], [f1, f2, f3]
        if abs(f3) <= f_floor or abs(step) <= tol * max(1.0, abs(x3)):
            return MullerResult(x3, f3, it, True, history)
    best = min(history, key=lambda t: abs(t[1]))
    return MullerResult(best[0], best[1], max_iter, False, history)


@dataclass
class ScanResult:
    points: np.ndarray
    values: np.ndarray         # |f|
    candidates: list           # guess triples
    minima: np.ndarray         # ne at the local minima


def scan_objective(f, window, samples=64) -> ScanResult:
    """Sample ``|f|`` over a real interval or complex rectangle.

    ``window`` is ``(lo, hi)`` (real) or ``(lo, hi)`` complex corners;
    ``samples`` an int (real) or ``(n_re, n_im)``.  Local minima of ``|f|``
    that are lower than their neighbours by a relative margin yield guess
    triples spaced half a sample apart.
    """
    lo, hi = complex(window[0]), complex(window[1])
    if lo == hi or (lo.real == hi.real):
        raise ValueError("empty scan window")
    complex_window = lo.imag != hi.imag
    margin = 1e-8
    cands, mins = [], []
    if not complex_window:
        n = int(samples)
        if n < 3:
            raise ValueError("need at least 3 samples")
        pts = np.linspace(lo.real, hi.real, n) + 1j * lo.imag
        vals = np.array([abs(f(z)) for z in pts])
        h = pts[1] - pts[0]
        for i in range(1, n - 1):
            a, b, c = vals[i - 1], vals[i], vals[i + 1]
            if b <= a and b < c and b < (1 - margin) * max(a, c):
                z = pts[i]
                # shift toward the lower neighbour
                z = z + (0.25 * h if c < a else -0.25 * h)
                cands.append((z - 0.25 * h, z, z + 0.25 * h))
                mins.append(pts[i])
        return ScanResult(pts, vals, cands, np.array(mins))
    nr, ni = (samples, samples) if np.isscalar(samples) else samples
    xr = np.linspace(lo.real, hi.real, int(nr))
    xi = np.linspace(lo.imag, hi.imag, int(ni))
    pts = xr[None, :] + 1j * xi[:, None]
    vals = np.array([[abs(f(z)) for z in row] for row in pts])
    hr = xr[1] - xr[0]
    hi_ = xi[1] - xi[0]
    for a in range(1, len(xi) - 1):
        for b in range(1, len(xr) - 1):
            nb = vals[a - 1:a + 2, b - 1:b + 2].copy()
            v = nb[1, 1]
            nb[1, 1] = np.inf
            if v < nb.min() and v < (1 - margin) * np.max(vals[a - 1:a + 2, b - 1:b + 2]):
                z = pts[a, b]
                cands.append((z - 0.25 * hr, z + 0.25j * hi_, z + 0.25 * hr))
                mins.append(z)
    return ScanResult(pts, vals, cands, np.array(mins))


def nullspace(M, rel_threshold: float = 1e-10, n_small: int = 3):
    """Multiplicity, orthonormal null basis and singular values of ``M``.

    Returns ``(multiplicity, basis, sigma)`` where ``basis`` has one column
    per singular value below ``rel_threshold * sigma_max`` and ``sigma`` is
    the full descending list.  Large matrices avoid the full SVD: singular
    values come from a values-only SVD and the basis from block inverse
    iteration with one LU factorization.
    """
    A = _matrix(M)
    n = A.shape[0]
    if n <= SVD_DENSE_LIMIT:
        _, s, vh = sla.svd(A, full_matrices=False, check_finite=False)
        mult = int(np.sum(s <= rel_threshold * s[0]))
        basis = vh[n - mult:].conj().T[:, ::-1] if mult else np.zeros((n, 0), complex)
        return mult, basis, s
    s = sla.svd(A.copy(), compute_uv=False, check_finite=False, overwrite_a=True)
    mult = int(np.sum(s <= rel_threshold * s[0]))
    if mult == 0:
        return 0, np.zeros((n, 0), complex), s
    lu = sla.lu_factor(A, check_finite=False)
    rng = np.random.default_rng(DEFAULT_SEED)
    X = rng.standard_normal((n, mult + 1)) + 1j * rng.standard_normal((n, mult + 1))
    for _ in range(4):
        # x <- (M^H M)^{-1} x
        X = sla.lu_solve(lu, X, trans=2, check_finite=False)
        X = sla.lu_solve(lu, X, check_finite=False)
        X, _ = np.linalg.qr(X)
    # Rayleigh-Ritz on the block to pick the smallest directions
    _, _, wh = np.linalg.svd(A @ X, full_matrices=False)
    V = X @ wh.conj().T
    return mult, V[:, ::-1][:, :mult], s


def solve_dense(M, b):
    """Backward-stable dense solve of ``M x = b``."""
    A = _matrix(M)
    b = np.asarray(b)
    if b.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch")
    return sla.solve(A, b, check_finite=False)


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: list
    true_residual: float


def gmres(M, b, tol: float = 1e-14, max_iter: int = 500) -> GMRESResult:
    """Unrestarted GMRES (scipy) with residual history and a true-residual check.

    ``iterations`` counts Arnoldi steps; ``converged`` is judged on the
    true relative residual ``|b - M x| / |b| <= tol``.
    """
    A = _matrix(M)
    b = np.asarray(b, dtype=complex)
    if b.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch")
    hist = []
    op = LinearOperator(A.shape, matvec=lambda v: A @ v, dtype=complex)
    x, info = _scipy_gmres(op, b, rtol=tol, atol=0.0, restart=max_iter, maxiter=1,
                           callback=hist.append, callback_type="pr_norm")
    nb = np.linalg.norm(b)
    true = float(np.linalg.norm(b - A @ x) / nb) if nb else 0.0
    if true > tol:
        log.warning("GMRES stopped at relative residual %.3e after %d iterations", true, len(hist))
    return GMRESResult(x, len(hist), true <= tol, hist, true)


@dataclass
class Mode:
    ne: complex
    multiplicity: int
    basis: np.ndarray = field(repr=False)
    sigma_ratio: float
    singular_values: np.ndarray = field(repr=False)
    iterations: int
    converged: bool
    seed: int = DEFAULT_SEED


def refine_mode(assembler, guesses, probes: ProbeVectors | None = None, tol: float = 1e-13,
                max_iter: int = 50, rel_threshold: float = 1e-10, certify: bool = True) -> Mode:
    """Müller search from ``guesses`` followed by the singular-value check."""
    fobj = Objective(assembler, probes)
    res = muller_iterate(fobj, guesses, tol=tol, max_iter=max_iter)
    if not certify:
        return Mode(res.root, 0, np.zeros((0, 0)), np.nan, np.zeros(0), res.iterations,
                    res.converged, fobj.probes.seed)
    M = assembler.assemble(res.root)
    mult, basis, s = nullspace(M, rel_threshold)
    return Mode(res.root, mult, basis, float(s[-1] / s[0]), s[-(mult + 3):], res.iterations,
                res.converged and mult > 0, fobj.probes.seed)
