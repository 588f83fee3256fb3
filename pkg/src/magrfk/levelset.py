"""Level-line statistics of a P1 torsion function and the area profile G(a).

The super-level sets of a piecewise-linear field are polygons, so the
distribution function and the level-line integrals are computed exactly by
clipping each triangle (see :func:`magrfk.kernels.slice_levels`).
"""
from dataclasses import dataclass, field

import numpy as np

from .kernels import slice_levels

FOUR_PI = 4.0 * np.pi
TOL_ISO = 0.02
# a level counts as resolved once it encloses the area of a disk this many
# mesh sizes across (in radius); see LevelProfile.resolved
RESOLVE_LAYERS = 3.0


class LevelSetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LevelProfile:
    """Level statistics on thresholds ``t`` descending from ``t_star`` to 0.

    Index 0 is ``t = t_star`` (``mu = 0``) and the last index is ``t = 0``
    (``mu = a_star``); both endpoints are filled in from their limits and
    ``sliced`` marks the entries computed by actual slicing.
    """

    t: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    perimeter: np.ndarray
    flux: np.ndarray
    ncut: np.ndarray
    nfull: np.ndarray
    sliced: np.ndarray
    t_star: float
    a_star: float
    min_area: float = 0.0

    @property
    def resolved(self):
        """Sliced levels that contain a whole triangle and enclose at least ``min_area``.

        Right below the maximum the P1 field is a cone over the star of the top
        vertex, and the level-line integral collapses linearly to zero. A few
        element layers further out it still swings by several percent from
        level to level because each short level line crosses only a handful of
        triangles. ``min_area`` is ``pi (RESOLVE_LAYERS h)^2``, so the excluded
        part of the area range shrinks like ``h^2``.
        """
        return self.sliced & (self.nfull > 0) & (self.mu >= self.min_area)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,mu,gamma,perimeter,flux\n")
            for row in zip(self.t, self.mu, self.gamma, self.perimeter, self.flux):
                fh.write(",".join(f"{x:.12e}" for x in row) + "\n")


@dataclass(frozen=True, eq=False)
class GProfile:
    """Samples ``G_i`` of the area profile on an ascending grid ``a_i`` in [0, a_star].

    Evaluation between samples is piecewise linear with constant extension.
    """

    a: np.ndarray
    G: np.ndarray
    a_star: float
    is_constant: bool = False
    constant: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        if self.is_constant:
            return np.full_like(np.asarray(x, dtype=float), self.constant)
        return np.interp(x, self.a, self.G)

    @classmethod
    def constant_profile(cls, value, a_star):
        return cls(a=np.array([0.0, a_star]), G=np.array([value, value]), a_star=float(a_star),
                   is_constant=True, constant=float(value))

    @classmethod
    def from_function(cls, func, a_star, n=2001):
        a = np.linspace(0.0, a_star, n)
        return cls(a=a, G=np.asarray(func(a), dtype=float), a_star=float(a_star))

    def capped(self, cap):
        """``min(G, cap)`` on the same grid (constant profiles stay constant)."""
        if self.is_constant:
            return GProfile.constant_profile(min(self.constant, cap), self.a_star)
        return GProfile(a=self.a, G=np.minimum(self.G, cap), a_star=self.a_star)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("a,G\n")
            for x, y in zip(self.a, self.G):
                fh.write(f"{x:.12e},{y:.12e}\n")


def level_profile(psi, n_levels=200, resolve_layers=RESOLVE_LAYERS):
    """Slice the P1 field ``psi`` at ``n_levels`` thresholds uniform in
    ``[t_star * 1e-3, t_star * (1 - 1e-3)]``."""
    mesh = psi.mesh
    vals = np.asarray(psi.values, dtype=float)
    interior = ~mesh.is_boundary
    if np.any(vals < -1e-14 * max(1.0, np.abs(vals).max())):
        raise LevelSetError("field takes negative values; not a torsion-type function")
    if interior.any() and np.any(vals[interior] <= 0):
        raise LevelSetError("field is not positive inside the domain")
    t_star = float(vals.max())
    area, _ = mesh.geometry()
    a_star = float(area.sum())
    gnorm = np.linalg.norm(psi.gradient(), axis=1)
    if t_star <= 0:
        raise LevelSetError("field vanishes identically")

    thr = np.linspace(t_star * (1 - 1e-3), t_star * 1e-3, n_levels)
    tri_vals = vals[mesh.triangles]
    tri_pts = mesh.vertices[mesh.triangles]
    mu, gamma, perim, flux, ncut, nfull = slice_levels(tri_vals, tri_pts, gnorm, area, thr)

    # boundary level: Green's identity side uses the triangle owning each boundary edge
    bnd_len, bnd_flux = _boundary_line(mesh, gnorm)
    t = np.concatenate([[t_star], thr, [0.0]])
    g_first = gamma[0]
    g_last = gamma[-1]
    return LevelProfile(
        t=t,
        mu=np.concatenate([[0.0], mu, [a_star]]),
        gamma=np.concatenate([[g_first], gamma, [g_last]]),
        perimeter=np.concatenate([[0.0], perim, [bnd_len]]),
        flux=np.concatenate([[0.0], flux, [bnd_flux]]),
        ncut=np.concatenate([[0], ncut, [len(mesh.boundary_nodes)]]),
        nfull=np.concatenate([[0], nfull, [mesh.nt]]),
        sliced=np.concatenate([[False], np.ones(n_levels, dtype=bool), [False]]),
        t_star=t_star,
        a_star=a_star,
        min_area=float(np.pi * (resolve_layers * mesh.h) ** 2),
    )


def _boundary_line(mesh, gnorm):
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    owner = np.tile(np.arange(mesh.nt), 3)
    lookup = dict(zip(map(tuple, e), owner))
    length = 0.0
    flux = 0.0
    for i, j in mesh.boundary_edges:
        ln = float(np.linalg.norm(mesh.vertices[i] - mesh.vertices[j]))
        length += ln
        flux += ln * gnorm[lookup[(min(i, j), max(i, j))]]
    return length, flux


def _checked_levels(profile, min_fraction):
    return profile.sliced & (profile.mu >= min_fraction * profile.a_star)


def flux_identity_check(profile, min_fraction=0.05):
    """Largest relative gap between ``int_{level} |grad psi|`` and the enclosed area."""
    mask = _checked_levels(profile, min_fraction)
    if not mask.any():
        return float("nan")
    return float(np.max(np.abs(profile.flux[mask] - profile.mu[mask]) / profile.mu[mask]))


def derivative_identity_check(profile, min_fraction=0.05):
    """Largest relative gap between ``mu(t)`` and the trapezoid integral of
    ``gamma`` from ``t`` up to ``t_star``."""
    t = profile.t[::-1]
    g = profile.gamma[::-1]
    # cumulative trapezoid from t=0 upwards, then flip to integrate down from t_star
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])
    upper = (cum[-1] - cum)[::-1]
    mask = _checked_levels(profile, min_fraction)
    if not mask.any():
        return float("nan")
    return float(np.max(np.abs(upper[mask] - profile.mu[mask]) / profile.mu[mask]))


def g_profile(profile, n_points=None, tie_tol=1e-12):
    """Compose ``gamma`` with the inverse distribution function on a uniform a-grid.

    Only resolved levels enter the interpolation; outside their range G is
    extended by the nearest resolved value. Exactly tied ``mu`` values are
    collapsed to the first threshold; a decrease of ``mu`` beyond ``tie_tol``
    is rejected.
    """
    if n_points is None:
        n_points = int(profile.sliced.sum()) + 1
    keep = profile.resolved
    if keep.sum() < 2:
        raise LevelSetError("fewer than two resolved levels; refine the mesh")
    mu = profile.mu[keep]
    t = profile.t[keep]
    gam = profile.gamma[keep]
    d = np.diff(mu)
    scale = tie_tol * profile.a_star
    if np.any(d < -scale):
        raise LevelSetError("distribution function is not monotone")
    first = np.concatenate([[True], d > scale])
    n_ties = int((~first).sum())
    mu, t, gam = mu[first], t[first], gam[first]

    a = np.linspace(0.0, profile.a_star, n_points)
    t_of_a = np.interp(a, mu, t)
    # gamma as a function of t: t is descending along the profile
    G = np.interp(t_of_a, t[::-1], gam[::-1])
    meta = {"ties_collapsed": n_ties, "levels_used": int(len(mu)),
            "levels_unresolved": int((profile.sliced & ~profile.resolved).sum())}
    return GProfile(a=a, G=G, a_star=profile.a_star, meta=meta)


def profile_from_mesh(mesh, n_levels=200, n_points=None):
    """Convenience chain: torsion solve, slicing and the area profile."""
    from .fem import solve_torsion

    psi = solve_torsion(mesh)
    prof = level_profile(psi, n_levels)
    return psi, prof, g_profile(prof, n_points)
