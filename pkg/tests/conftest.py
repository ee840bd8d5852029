"""Shared fixtures: the Example 1 step-index fiber at 50 nodes."""
from types import SimpleNamespace

import numpy as np
import pytest

from skiemodes.app import load_config
from skiemodes.app.runs import build_assembler
from skiemodes.geometry import Circle, discretize
from skiemodes.modefinder import nullspace

# effective indices of the 25 um core (see the fiber oracle tests)
EX1_MODES = [1.444873245456804, 1.445573321563491, 1.445671696122978,
             1.446222363089593, 1.447115413503111]
EX1_FUNDAMENTAL = 1.447348182402461


@pytest.fixture(scope="session")
def ex1():
    cfg = load_config("example1")
    asm = build_assembler(cfg)
    return SimpleNamespace(config=cfg, assembler=asm, disc=asm.disc,
                           radius=25.0 * cfg.physics.length_scale)


@pytest.fixture(scope="session")
def ex1_mode(ex1):
    """Null vector of the rotationally symmetric mode 1.447115413503111 (simple)."""
    ne = EX1_MODES[-1]
    M = ex1.assembler.assemble(ne)
    mult, basis, s = nullspace(M)
    assert mult == 1
    return SimpleNamespace(ne=ne, x=basis[:, 0], wn=ex1.assembler.wavenumbers(ne), s=s)


@pytest.fixture
def matched_circle():
    disc = discretize([Circle((0.0, 0.0), 3.0)], 6)
    return disc, [1.45, 1.45]


def rng(seed=0):
    return np.random.default_rng(seed)


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE_LINES = []


def record_criterion(number: int, ok: bool, detail: str) -> str:
    """Print and remember one ``CRITERION n: PASS|FAIL`` line."""
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
