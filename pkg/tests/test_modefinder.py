"""Objective, Müller iteration, scans, null spaces and linear solvers."""
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from skiemodes import modefinder
from skiemodes.assembly import Assembler
from skiemodes.modefinder import (DEFAULT_SEED, Objective, ProbeVectors, gmres, muller_iterate,
                                  nullspace, objective, refine_mode, scan_objective, solve_dense)

from conftest import EX1_FUNDAMENTAL, EX1_MODES


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_muller_exact_on_quadratics(r1, r2):
    # a double root is only determined to sqrt(eps)
    assume(abs(r1 - r2) > 0.1)
    f = lambda z: (z - r1) * (z - r2)
    res = muller_iterate(f, [4.0, 4.5 + 0.2j, 5.0], max_iter=3)
    root = res.root
    assert min(abs(root - r1), abs(root - r2)) <= 1e-11 * max(1, abs(root))
    assert res.history[3][0] == pytest.approx(root, abs=1e-11 * max(1, abs(root)))


def test_muller_z2_plus_1():
    res = muller_iterate(lambda z: z * z + 1, [0.5j, 0.8j, 1.3j])
    assert res.converged and abs(res.root - 1j) <= 1e-14


def test_muller_errors_and_nonconvergence():
    with pytest.raises(ValueError):
        muller_iterate(lambda z: z, [1.0, 1.0, 2.0])
    res = muller_iterate(lambda z: np.exp(z), [0.0, 0.1, 0.2], max_iter=5)
    assert not res.converged and res.iterations == 5
    assert abs(res.f_root) == min(abs(v) for _, v in res.history)


def test_matched_media_objective_constant(matched_circle):
    disc, idx = matched_circle
    asm = Assembler(disc, idx)
    pr = ProbeVectors.generate(4 * disc.n_nodes)
    ref = 1.0 / (pr.u @ (pr.v / asm.diagonal()))
    for ne in (1.3, 1.47 + 0.01j, 1.6):
        assert abs(objective(asm.assemble(ne), pr) - ref) <= 1e-14 * abs(ref)
    scan = scan_objective(Objective(asm, pr), (1.3, 1.6), 16)
    assert len(scan.candidates) == 0


def test_probe_determinism(ex1):
    a = ProbeVectors.generate(40, 7)
    b = ProbeVectors.generate(40, 7)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    M = ex1.assembler.assemble(1.446)
    p1 = ProbeVectors.generate(M.shape[0], 11)
    p2 = ProbeVectors.generate(M.shape[0], 11)
    assert objective(M, p1) == objective(M, p2)


def test_objective_dips_at_mode(ex1):
    f = Objective(ex1.assembler)
    r = EX1_MODES[1]
    near = min(abs(f(r + d)) for d in (-1e-11, 0.0, 1e-11))
    away = abs(f(r + 1e-4))
    assert near <= 1e-6 * away


def test_reciprocal_linearity(ex1):
    M = ex1.assembler.assemble(1.446 + 1e-5j)
    n = M.shape[0]
    rng = np.random.default_rng(3)
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v1 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    a, b = 0.7 + 0.2j, -1.3

    def g(v):
        return 1.0 / objective(M, ProbeVectors(u, v, 0))
    lhs = g(a * v1 + b * v2)
    rhs = a * g(v1) + b * g(v2)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(g(v1)), abs(g(v2)))


def test_root_from_real_guesses(ex1):
    mode = refine_mode(ex1.assembler, [1.4448732, 1.4448733, 1.4448734])
    assert abs(mode.ne - EX1_MODES[0]) <= 1e-12
    assert mode.converged and mode.sigma_ratio <= 1e-10


def test_root_invariance_across_seeds(ex1):
    roots = []
    for seed in (DEFAULT_SEED, 1, 99):
        pr = ProbeVectors.generate(4 * ex1.disc.n_nodes, seed)
        roots.append(refine_mode(ex1.assembler, [1.4471153, 1.4471154, 1.4471156], pr).ne)
    assert max(abs(r - roots[0]) for r in roots) <= 1e-12


def test_scan_finds_example1_modes(ex1):
    scan = scan_objective(Objective(ex1.assembler), (1.4441, 1.4474), 64)
    assert len(scan.minima) >= 5
    with pytest.raises(ValueError):
        scan_objective(lambda z: z, (1.0, 1.0))


def test_fundamental_is_doubly_degenerate(ex1):
    mult, basis, s = nullspace(ex1.assembler.assemble(EX1_FUNDAMENTAL))
    assert mult == 2
    M = ex1.assembler.assemble(EX1_FUNDAMENTAL).matrix
    assert np.allclose(basis.conj().T @ basis, np.eye(2), atol=1e-12)
    for v in basis.T:
        assert np.linalg.norm(M @ v) <= 1e-10 * s[0]


def test_nullspace_of_diagonal():
    mult, basis, s = nullspace(np.diag(np.arange(1.0, 9.0)))
    assert mult == 0 and basis.shape == (8, 0)


def test_nullspace_large_path(monkeypatch):
    # the inverse-iteration branch on a matrix with a known 2-D null space
    rng = np.random.default_rng(5)
    n = 60
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    W, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    sv = np.linspace(1, 2, n)
    sv[-2:] = [1e-15, 3e-16]
    A = Q @ np.diag(sv) @ W.conj().T
    monkeypatch.setattr(modefinder, "SVD_DENSE_LIMIT", 10)
    mult, basis, s = nullspace(A)
    assert mult == 2
    assert np.linalg.norm(A @ basis) <= 1e-12
    P = W[:, -2:]
    assert np.linalg.norm(basis - P @ (P.conj().T @ basis)) <= 1e-10


def test_gmres_and_dense_agree(ex1):
    I = np.eye(10, dtype=complex)
    b = np.arange(10.0) + 1j
    r = gmres(I, b)
    assert r.iterations == 1 and np.allclose(r.x, b, rtol=1e-15, atol=0)
    M = ex1.assembler.assemble(1.451)
    rng = np.random.default_rng(2)
    b = rng.standard_normal(M.shape[0]) + 0j
    r = gmres(M, b)
    x = solve_dense(M, b)
    assert r.converged and r.true_residual <= 1e-14
    assert np.linalg.norm(r.x - x) <= 1e-12 * np.linalg.norm(x)
    with pytest.raises(ValueError):
        gmres(M, b[:-1])
    with pytest.raises(ValueError):
        solve_dense(M, b[:-1])
