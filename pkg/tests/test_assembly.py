"""System matrix structure and the Example 1 singularity."""
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skiemodes.assembly import Assembler, DegenerateWavenumberError, SystemMatrix, apply
from skiemodes.geometry import Circle, Polygon, discretize
from skiemodes.kernels import PairGeometry, block_kernel
from skiemodes.modefinder import solve_dense

from conftest import EX1_MODES


def test_matched_media_is_diagonal(matched_circle):
    disc, idx = matched_circle
    asm = Assembler(disc, idx)
    M = asm.assemble(1.46 + 1e-3j)
    assert np.array_equal(M.matrix, np.diag(asm.diagonal()).astype(complex))
    # and on a polygon with graded corners
    sq = discretize([Polygon(((0, 0), (2, 0), (2, 2), (0, 2)))], 3, corner_levels=4)
    asm = Assembler(sq, [1.3, 1.3])
    M = asm.assemble(1.2)
    assert np.array_equal(M.matrix, np.diag(asm.diagonal()).astype(complex))


def test_matched_media_two_interfaces_couple():
    # cross-interface blocks carry the cladding kernel even with matched media
    disc = discretize([Circle((0, 0), 1.0), Circle((4, 0), 1.0)], 3)
    asm = Assembler(disc, [1.4, 1.4, 1.4])
    M = asm.assemble(1.5).matrix
    n0 = disc.nodes_of(0).stop
    A = M - np.diag(asm.diagonal())
    own = np.concatenate([disc.unknown_index(c, np.arange(n0)) for c in range(4)])
    other = np.setdiff1d(np.arange(M.shape[0]), own)
    assert np.all(A[np.ix_(own, own)] == 0)
    assert np.max(np.abs(A[np.ix_(own, other)])) > 1e-3


def test_diagonal_values(ex1):
    d = ex1.assembler.diagonal()
    n = ex1.disc.n_nodes
    assert np.allclose(d[:2 * n], (1.444 ** 2 + 1.4475 ** 2) / 2, rtol=1e-15)
    assert np.all(d[2 * n:] == 1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 3), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_block_antisymmetry(r, a, tp, tq):
    d = np.array([r * np.cos(a), r * np.sin(a)])
    g = PairGeometry(d, np.array([np.cos(tp), np.sin(tp)]), np.array([np.cos(tq), np.sin(tq)]))
    ne = 1.446
    media = [(1.0, 1.444 ** 2, 1.444 ** 2 - ne ** 2, 0.1j), (-1.0, 1.4475 ** 2, 1.4475 ** 2 - ne ** 2, 0.07)]
    B = block_kernel(g, ne, media, 0.0, 1.444 ** 2 - 1.4475 ** 2)
    for (i, j), (k, l) in [((0, 2), (2, 0)), ((0, 3), (2, 1)), ((1, 2), (3, 0)), ((1, 3), (3, 1))]:
        assert B[i, j] == -B[k, l]


def test_example1_singular(ex1):
    M = ex1.assembler.assemble(EX1_MODES[0]).matrix
    s = np.linalg.svd(M, compute_uv=False)
    assert s[-1] / s[0] < 1e-12
    s2 = np.linalg.svd(ex1.assembler.assemble(1.4460).matrix, compute_uv=False)
    assert s2[-1] / s2[0] > 1e-6


def test_apply(ex1):
    M = ex1.assembler.assemble(1.446)
    rng = np.random.default_rng(1)
    n = M.shape[0]
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    a, b = 0.3 - 1.2j, 2.5
    lhs = apply(M, a * x + b * y)
    rhs = a * apply(M, x) + b * apply(M, y)
    assert np.linalg.norm(lhs - rhs) <= 1e-14 * np.linalg.norm(lhs)
    sol = solve_dense(M, y)
    assert np.linalg.norm(apply(M, sol) - y) / np.linalg.norm(y) <= 1e-12
    with pytest.raises(ValueError):
        apply(M, x[:-1])
    D = SystemMatrix(np.diag(ex1.assembler.diagonal()).astype(complex), 1.446, ex1.disc)
    e = np.zeros(n)
    e[7] = 1
    assert np.array_equal(apply(D, e), ex1.assembler.diagonal()[7] * e)


def test_degenerate_wavenumber(ex1):
    with pytest.raises(DegenerateWavenumberError):
        ex1.assembler.assemble(1.4475)


def test_bad_inputs():
    disc = discretize([Circle((0, 0), 1.0)], 3)
    with pytest.raises(ValueError):
        Assembler(disc, [1.0])
    with pytest.raises(ValueError):
        Assembler(disc, [1.0, -1.0])
    with pytest.raises(ValueError):
        Assembler(discretize([Circle((0, 0), 1.0)], 3, p=12), [1.0, 1.2])


def _fourier_response(panels, p, m=2):
    """Operator applied to e^{i m theta} densities on a circle, per component."""
    disc = discretize([Circle((0.0, 0.0), 4.0)], panels, p=p)
    M = Assembler(disc, [1.444, 1.4475]).assemble(1.446).matrix
    th = disc.node_t
    e = np.exp(1j * m * th)
    n = disc.n_nodes
    out = []
    for c in range(4):
        x = np.zeros(4 * n, complex)
        x[c * n:(c + 1) * n] = e
        y = (M @ x).reshape(4, n) / e
        # rotation invariance: each row block is a constant
        assert np.max(np.abs(y - y[:, :1])) <= 1e-11 * np.max(np.abs(y))
        out.append(y[:, 0])
    return np.array(out)


def test_self_convergence_between_orders():
    a = _fourier_response(8, 10)
    b = _fourier_response(16, 16)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


@pytest.mark.slow
def test_assembly_cost_quadratic():
    # dense part only: the adaptive plan is built once and reused
    def run(panels):
        disc = discretize([Circle((0.0, 0.0), 30.0)], panels)
        asm = Assembler(disc, [1.444, 1.4475])
        asm.assemble(1.446)
        best = np.inf
        for _ in range(3):
            t = time.perf_counter()
            asm.assemble(1.4461)
            best = min(best, asm.timings["dense"])
        return best
    t1, t2 = run(40), run(80)
    ratio = t2 / t1
    print(f"assembly time ratio on doubling: {ratio:.2f} (ideal 4)")
    assert 4 * 0.85 <= ratio <= 4 * 1.15
