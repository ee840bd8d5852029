"""Mode-finding runs, the point-source accuracy study and convergence studies."""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..assembly import Assembler
from ..fields import eval_field, locate
from ..modefinder import (DEFAULT_SEED, Objective, ProbeVectors, gmres, refine_mode,
                          scan_objective)
from .config import Config, parse_complex
from .oracles import fiber_dispersion_oracle, point_source_fields

__all__ = [
    "THREADS_ENV",
    "thread_count",
    "RunReport",
    "build_assembler",
    "candidate_guesses",
    "run_modes",
    "PointSourceResult",
    "run_point_source_verification",
    "ConvergenceResult",
    "run_convergence_study",
    "fit_order",
]

log = logging.getLogger(__name__)

THREADS_ENV = "SKIEMODES_THREADS"


def thread_count() -> int:
    """Worker threads for scan-phase objective evaluations."""
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class RunReport:
    """Everything needed to reproduce and judge a mode-finding run."""

    modes: list
    settings: dict
    seed: int
    diagnostics: list = field(default_factory=list)
    scan: dict | None = None
    timings: dict = field(default_factory=dict)

    @property
    def indices(self):
        return [m.ne for m in self.modes]


def build_assembler(config: Config, tol: float | None = None) -> Assembler:
    disc = config.discretization()
    kw = {} if tol is None else {"tol": tol}
    return Assembler(disc, config.indices, branch=config.physics.branch, **kw)


def _triple(g: complex, spread: float):
    g = complex(g)
    return (g * (1 - spread), g, g * (1 + spread) + 1j * spread * abs(g) * 0.1)


def candidate_guesses(config: Config, objective=None):
    """Guess triples from explicit guesses, the fiber oracle or a scan.

    Returns ``(triples, scan_trace)``.  Search keys: ``guesses`` (values or
    triples), ``spread`` (relative half-width for single-value guesses),
    ``oracle: fiber`` with optional ``window``, and ``window`` + ``samples``
    for a scan of ``|f|``.
    """
    s = config.search
    spread = float(s.get("spread", 1e-9))
    triples = []
    for g in s.get("guesses") or []:
        if isinstance(g, (list, tuple)) and len(g) == 3:
            triples.append(tuple(parse_complex(v) for v in g))
        else:
            triples.append(_triple(parse_complex(g), spread))
    trace = None
    if s.get("oracle") == "fiber":
        if len(config.inclusions) != 1 or config.inclusions[0].shape != "circle":
            raise ValueError("the fiber oracle needs a single circular core")
        inc = config.inclusions[0]
        unit = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9}[config.physics.length_unit]
        lam = config.physics.wavelength / unit
        modes = fiber_dispersion_oracle(float(inc.params["radius"]), config.physics.n_cladding, inc.n, lam)
        lo, hi = -np.inf, np.inf
        if s.get("window") is not None:
            lo, hi = (parse_complex(v).real for v in s["window"][:2])
        for m in modes:
            if lo <= m.ne <= hi:
                triples.append(_triple(m.ne, float(s.get("oracle_spread", 1e-8))))
    elif s.get("window") is not None and objective is not None:
        win = [parse_complex(v) for v in s["window"]]
        samples = s.get("samples", 64)
        sc = scan_objective(objective, win, samples if np.isscalar(samples) else tuple(samples))
        triples.extend(sc.candidates)
        trace = {"points": [[complex(z).real, complex(z).imag] for z in np.ravel(sc.points)],
                 "abs_f": np.ravel(sc.values).tolist()}
    return triples, trace


class _ParallelObjective:
    """Evaluates the objective at many points with a thread pool."""

    def __init__(self, objective, threads: int):
        self.objective = objective
        self.threads = threads

    def __call__(self, z):
        return self.objective(z)

    def many(self, zs):
        if self.threads == 1:
            return [self.objective(z) for z in zs]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(self.objective, zs))


def run_modes(config: Config) -> RunReport:
    """Find, certify and deduplicate the modes requested by ``config``."""
    t0 = time.perf_counter()
    s = config.search
    seed = int(s.get("seed", DEFAULT_SEED))
    asm = build_assembler(config, s.get("quad_tol"))
    probes = ProbeVectors.generate(4 * asm.disc.n_nodes, seed)
    obj = Objective(asm, probes)
    if s.get("window") is not None and not s.get("guesses") and s.get("oracle") is None:
        # build the quadrature plan once, then scan (possibly in parallel)
        win = [parse_complex(v) for v in s["window"]]
        asm._ensure_plan(asm.wavenumbers(0.5 * (win[0] + win[1])))
        par = _ParallelObjective(obj, thread_count())
        pre = {}
        samples = s.get("samples", 64)
        if np.isscalar(samples) and win[0].imag == win[1].imag:
            pts = np.linspace(win[0].real, win[1].real, int(samples)) + 1j * win[0].imag
            pre = dict(zip(pts.tolist(), par.many(pts.tolist())))
        cached = lambda z: pre[z] if z in pre else obj(z)   # noqa: E731
        triples, trace = candidate_guesses(config, cached)
    else:
        triples, trace = candidate_guesses(config)
    t1 = time.perf_counter()
    tol = float(s.get("tol", 1e-13))
    max_iter = int(s.get("max_iter", 50))
    rel = float(s.get("rel_threshold", 1e-10))
    merge = float(s.get("merge_tol", 1e-11))
    modes, diags = [], []
    for tr in triples:
        m = refine_mode(asm, tr, probes, tol=tol, max_iter=max_iter, rel_threshold=rel)
        diags.append({"guess": [tr[1].real, tr[1].imag], "ne": [m.ne.real, m.ne.imag],
                      "iterations": m.iterations, "converged": bool(m.converged),
                      "multiplicity": m.multiplicity, "sigma_ratio": m.sigma_ratio})
        if not m.converged:
            log.info("guess %s did not converge to a certified mode", tr[1])
            continue
        if any(abs(m.ne - k.ne) <= merge * max(1.0, abs(k.ne)) for k in modes):
            continue
        modes.append(m)
    modes.sort(key=lambda m: -m.ne.real)
    t2 = time.perf_counter()
    return RunReport(modes, config.settings(), seed, diags, trace,
                     {"setup_scan": t1 - t0, "refine": t2 - t1, "total": t2 - t0,
                      "objective_calls": obj.calls})


# -- point-source verification -------------------------------------------------

@dataclass
class PointSourceResult:
    n_unknowns: int
    probe_ne: complex
    iterations: int
    converged: bool
    residual: float
    max_rel_error: float
    interior_error: float
    exterior_error: float
    timings: dict = field(default_factory=dict)


def _sources_and_points(disc, n_test: int = 16):
    """Source locations and test points for the artificial transmission problem.

    For each interface: an interior source (for the exterior field) at the
    centroid, an exterior source (for the interior field) beyond the curve,
    interior test points halfway between centroid and boundary and exterior
    test points further out.
    """
    src_in, src_out, pts_in, pts_ext = [], [], [], []
    ang = 2 * np.pi * (np.arange(n_test) + 0.37) / n_test
    for i, c in enumerate(disc.curves):
        nodes = disc.points[disc.nodes_of(i)]
        cen = nodes.mean(axis=0)
        ext = np.max(np.hypot(*(nodes - cen).T))
        src_in.append(cen + 0.1 * ext * np.array([0.31, -0.17]))
        src_out.append(cen + 1.8 * ext * np.array([np.cos(0.9), np.sin(0.9)]))
        # ray points: scale the boundary sample in each direction
        dirs = np.stack([np.cos(ang), np.sin(ang)], -1)
        proj = (nodes - cen) @ dirs.T
        rad = np.max(np.abs(proj), axis=0)
        pts_in.append(cen + 0.45 * rad[:, None] * dirs)
        pts_ext.append(cen + 1.5 * ext * dirs)
    return src_in, src_out, pts_in, pts_ext


def run_point_source_verification(config: Config, probe_ne: complex = 1.451, tol: float = 1e-14,
                                  max_iter: int = 500, n_test: int = 16) -> PointSourceResult:
    """Solve a transmission problem with a known solution and measure the field error.

    The exterior field is generated by line sources inside the inclusions and
    the field inside inclusion ``i`` by a line source outside it.  The
    right-hand side is the difference of their boundary traces in the row
    layout of the system; after a GMRES solve the represented fields are
    compared with the exact ones at test points away from the boundary.
    """
    t0 = time.perf_counter()
    asm = build_assembler(config)
    disc = asm.disc
    ne = complex(probe_ne)
    M = asm.assemble(ne)
    wn = asm.wavenumbers(ne)
    t1 = time.perf_counter()
    src_in, src_out, pts_in, pts_ext = _sources_and_points(disc, n_test)
    n = wn.n
    kap = wn.kappa

    def exterior(P):
        return sum(point_source_fields(P, s, n[0], ne, kap[0], 1.0 + 0.2j * k, 0.5 - 0.3j)
                   for k, s in enumerate(src_in))

    def interior(i, P):
        return point_source_fields(P, src_out[i], n[i + 1], ne, kap[i + 1], 0.8 - 0.1j, 0.3 + 0.6j)

    b = np.zeros(4 * disc.n_nodes, dtype=complex)
    for i in range(disc.n_interfaces):
        sl = disc.nodes_of(i)
        P = disc.points[sl]
        tau = disc.tangent[sl]
        jump = exterior(P) - interior(i, P)
        Et = jump[0] * tau[:, 0] + jump[1] * tau[:, 1]
        Ht = jump[3] * tau[:, 0] + jump[4] * tau[:, 1]
        nodes = np.arange(sl.start, sl.stop)
        for c, row in enumerate((jump[5], -Ht, jump[2], -Et)):
            b[disc.unknown_index(c, nodes)] = row
    res = gmres(M, b, tol=tol, max_iter=max_iter)
    t2 = time.perf_counter()
    err_int = 0.0
    for i in range(disc.n_interfaces):
        P = pts_in[i]
        P = P[locate(disc, P) == i + 1]
        num = eval_field(P, i + 1, res.x, disc, wn, check=False).stack()
        ex = interior(i, P)
        err_int = max(err_int, float(np.max(np.abs(num - ex)) / np.max(np.abs(ex))))
    P = np.concatenate(pts_ext)
    P = P[locate(disc, P) == 0]
    num = eval_field(P, 0, res.x, disc, wn, check=False).stack()
    ex = exterior(P)
    err_ext = float(np.max(np.abs(num - ex)) / np.max(np.abs(ex)))
    t3 = time.perf_counter()
    return PointSourceResult(4 * disc.n_nodes, ne, res.iterations, res.converged, res.true_residual,
                             max(err_int, err_ext), err_int, err_ext,
                             {"assemble": t1 - t0, "gmres": t2 - t1, "fields": t3 - t2})


# -- convergence studies -------------------------------------------------------

@dataclass
class ConvergenceResult:
    resolutions: list
    values: list            # ne (or field error) per resolution
    errors: list            # |x(N) - x(ref)| / |x(ref)|
    slope: float            # fitted order, -d log(err) / d log(N)
    reference: complex


def fit_order(resolutions, errors) -> float:
    """Least-squares order ``-d log err / d log N`` over positive errors."""
    N = np.asarray(resolutions, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = e > 0
    if ok.sum() < 2:
        return float("nan")
    return float(-np.polyfit(np.log(N[ok]), np.log(e[ok]), 1)[0])


def _at_resolution(config: Config, nodes: int) -> Config:
    """``config`` with ``nodes`` points per curve (per side for polygons)."""
    if any(i.shape in ("square", "polygon") for i in config.inclusions):
        return config.with_overrides(nodes_per_side=int(nodes))
    if nodes % config.p:
        raise ValueError(f"points per curve must be a multiple of p = {config.p}")
    base = config.panels
    return config.with_overrides(panel_scale=(nodes // config.p) / base)


def run_convergence_study(config: Config, ladder, guess=None) -> ConvergenceResult:
    """Mode index versus resolution; the finest resolution is the reference.

    ``ladder`` lists points per curve (per side for squares/polygons) and
    must be increasing.  Each level starts Müller from the previous root.
    """
    ladder = [int(v) for v in ladder]
    if len(ladder) < 2 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("resolution ladder must be increasing with at least two levels")
    s = config.search
    if guess is None:
        gs = s.get("guesses") or []
        if not gs:
            raise ValueError("a convergence study needs a starting guess")
        guess = parse_complex(gs[0] if not isinstance(gs[0], (list, tuple)) or len(gs[0]) == 2
                              else gs[0][1])
    guess = complex(guess)
    spread = float(s.get("spread", 1e-9))
    vals = []
    for N in ladder:
        cfg = _at_resolution(config, N)
        asm = build_assembler(cfg)
        m = refine_mode(asm, _triple(guess, spread),
                        ProbeVectors.generate(4 * asm.disc.n_nodes, int(s.get("seed", DEFAULT_SEED))),
                        tol=float(s.get("tol", 1e-13)), certify=False)
        vals.append(complex(m.ne))
        guess = m.ne
    ref = vals[-1]
    errs = [abs(v - ref) / abs(ref) for v in vals]
    return ConvergenceResult(ladder, vals, errs, fit_order(ladder[:-1], errs[:-1]), ref)
