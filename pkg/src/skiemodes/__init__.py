"""Boundary-integral solver for guided and leaky modes of optical waveguides.

Modules
-------
specfun     Bessel/Hankel functions of order 0 and 1 with a log-split form.
geometry    Curves, panels with corner grading and their discretization.
quadrature  Gauss-Legendre, log-singular and adaptive panel rules.
kernels     Layer-potential kernels and the 4x4 boundary block.
assembly    Nystrom assembly of the boundary system ``M(ne)``.
modefinder  Müller root search, singular-value certification, GMRES.
fields      Field evaluation from boundary densities.
app         Configs, runs, oracles and the command-line interface.
"""
from .assembly import Assembler, SystemMatrix, assemble
from .fields import boundary_mismatch, eval_field, field_grid
from .geometry import Circle, Ellipse, PerturbedCircle, Polygon, discretize
from .modefinder import Mode, refine_mode

__version__ = "0.1.0"

__all__ = [
    "Assembler",
    "SystemMatrix",
    "assemble",
    "boundary_mismatch",
    "eval_field",
    "field_grid",
    "Circle",
    "Ellipse",
    "PerturbedCircle",
    "Polygon",
    "discretize",
    "Mode",
    "refine_mode",
]
