"""Magnetic Neumann eigenvalues of planar domains, their torsion-function
reduction to weighted Sturm-Liouville problems, and the reverse
Faber-Krahn comparison chain."""
from ._accel import USE_NUMBA
from .geometry import DomainSpec, Mesh, area, build_mesh, disk, ellipse, fourier_star, parse_domain
from .levelset import GProfile, LevelProfile

__version__ = "0.1.0"

__all__ = ["USE_NUMBA", "DomainSpec", "Mesh", "area", "build_mesh", "disk", "ellipse",
           "fourier_star", "parse_domain", "GProfile", "LevelProfile"]
