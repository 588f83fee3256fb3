"""One-dimensional weighted Sturm-Liouville problems.

Two families share one P1 Galerkin core:

* the area-variable problem ``-(P f')' + beta^2 Q f = kappa f`` on ``[0, a_star]``
  with ``P = a G(a)`` and ``Q = a / G(a)``;
* the disk radial problems ``-v'' - v'/r + (beta r/2 - n/r)^2 v = kappa v`` on
  ``[0, R]`` with weight ``r dr``.

Both use natural boundary conditions, which the weak form imposes for free.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .levelset import FOUR_PI, TOL_ISO, GProfile

GRADING = 1.05
FIRST_CELL = 1e-4
N_GRID = 4000
N_MAX = 12
SHIFT = -1e-8

_GAUSS2 = (np.array([-1.0, 1.0]) / np.sqrt(3.0), np.array([1.0, 1.0]))
_GAUSS3 = (np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)]), np.array([5.0, 8.0, 5.0]) / 9.0)


class SturmError(RuntimeError):
    pass


class BracketError(SturmError):
    """The bisection bracket shows no sign change."""


# ---------------------------------------------------------------------------
# grids

def graded_grid(start, stop, n_cells, first=None, ratio=GRADING):
    """Nodes on ``[start, stop]``: geometric cells growing by ``ratio`` from
    ``first`` until they reach the uniform spacing that fills the rest with
    exactly ``n_cells`` cells in total."""
    length = stop - start
    if n_cells < 1 or length <= 0:
        raise ValueError("need a positive interval and at least one cell")
    if first is None:
        first = FIRST_CELL * length
    step = length / n_cells
    if first >= step:
        return np.linspace(start, stop, n_cells + 1)
    graded = []
    for _ in range(200):
        graded = []
        size = first
        while size < step and len(graded) < n_cells - 1:
            graded.append(size)
            size *= ratio
        rest = n_cells - len(graded)
        new_step = (length - sum(graded)) / rest
        if abs(new_step - step) <= 1e-14 * length:
            break
        step = new_step
    cells = np.concatenate([graded, np.full(n_cells - len(graded), step)])
    nodes = start + np.concatenate([[0.0], np.cumsum(cells)])
    nodes[-1] = stop
    return nodes


def _log_graded_grid(start, stop, n_cells, ratio=GRADING):
    """Cells proportional to the distance from 0, switching to uniform cells."""
    return graded_grid(start, stop, n_cells, first=start * (ratio - 1.0), ratio=ratio)


# ---------------------------------------------------------------------------
# 1-D P1 Galerkin core

@dataclass(frozen=True, eq=False)
class _Forms:
    """Quadrature data of ``int p u'v' + q u v`` and ``int w u v`` on the nodes ``x``."""

    x: np.ndarray
    h: np.ndarray
    wq: np.ndarray
    phi: tuple
    pv: np.ndarray
    qv: np.ndarray
    wv: np.ndarray

    def matrices(self):
        """Tridiagonal stiffness and mass matrices."""
        h, wq, (pl, pr) = self.h, self.wq, self.phi
        kd = (wq * self.pv).sum(axis=1) / h**2
        wqq = wq * self.qv
        wqw = wq * self.wv
        n = len(self.x)

        def tri(ll, rr, lr):
            d = np.zeros(n)
            d[:-1] += ll
            d[1:] += rr
            return sp.diags([lr, d, lr], [-1, 0, 1], format="csc")

        K = tri(kd + (wqq * pl * pl).sum(axis=1), kd + (wqq * pr * pr).sum(axis=1),
                -kd + (wqq * pl * pr).sum(axis=1))
        M = tri((wqw * pl * pl).sum(axis=1), (wqw * pr * pr).sum(axis=1),
                (wqw * pl * pr).sum(axis=1))
        return K, M

    def rayleigh(self, f):
        """Rayleigh quotient summed cell by cell from nonnegative terms.

        The assembled ``f @ K @ f`` cancels large ``p/h`` entries against each
        other and loses about ``eps * ||K||`` absolutely; this form does not.
        """
        pl, pr = self.phi
        fq = f[:-1, None] * pl + f[1:, None] * pr
        df = (np.diff(f) / self.h)[:, None]
        num = (self.wq * (self.pv * df**2 + self.qv * fq**2)).sum()
        den = (self.wq * self.wv * fq**2).sum()
        return float(num / den)


def _forms(x, p, q, w, rule):
    """``p``, ``q`` and ``w`` are vectorised callables evaluated at the Gauss points."""
    xi, wt = rule
    h = np.diff(x)
    mid = 0.5 * (x[1:] + x[:-1])
    pts = mid[:, None] + 0.5 * h[:, None] * xi[None, :]
    wq = 0.5 * h[:, None] * wt[None, :]
    phi = (0.5 * (1.0 - xi)[None, :], 0.5 * (1.0 + xi)[None, :])
    return _Forms(x=x, h=h, wq=wq, phi=phi, pv=p(pts), qv=q(pts), wv=w(pts))


def _lowest(forms, k):
    K, M = forms.matrices()
    n = K.shape[0]
    if k > n:
        raise SturmError(f"requested {k} eigenpairs of a {n}-dimensional problem")
    if n <= 400 or k >= n - 1:
        import scipy.linalg

        vals, vecs = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, k - 1])
    else:
        try:
            vals, vecs = spla.eigsh(K, k=k, M=M, sigma=SHIFT, which="LM",
                                    v0=np.ones(n), tol=0.0)
        except spla.ArpackNoConvergence as exc:
            raise SturmError(f"eigensolver did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    vals = np.array(vals, dtype=float)
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        v = v / np.sqrt(v @ (M @ v))
        s = np.sum(v)
        if s < 0 or (s == 0 and v[np.argmax(np.abs(v))] < 0):
            v = -v
        vecs[:, j] = v
        vals[j] = forms.rayleigh(v)
    return vals, vecs


# ---------------------------------------------------------------------------
# area-variable problem

def _as_profile(G, a_star):
    if isinstance(G, GProfile):
        return G
    if callable(G):
        return G
    return GProfile.constant_profile(float(G), a_star)


@dataclass(frozen=True, eq=False)
class SLProblem:
    """``-(aG f')' + beta^2 (a/G) f = kappa f`` on ``[0, a_star]``.

    ``G`` is a :class:`GProfile`, a constant, or any positive vectorised callable.
    Positivity of ``G`` is required; the isoperimetric lower bound ``G >= 4 pi``
    is only recorded in :attr:`meets_lower_bound` because sampled profiles can
    dip below it by their discretisation error.
    """

    G: object
    beta: float
    a_star: float

    def __post_init__(self):
        if self.a_star <= 0:
            raise ValueError("a_star must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        object.__setattr__(self, "G", _as_profile(self.G, self.a_star))
        if np.any(self.G_samples() <= 0):
            raise ValueError("G must be positive")

    def G_samples(self):
        if isinstance(self.G, GProfile):
            return np.asarray(self.G.G, dtype=float)
        return np.asarray(self.G(np.linspace(0.0, self.a_star, 2001)), dtype=float)

    @property
    def meets_lower_bound(self):
        return bool(self.G_samples().min() >= FOUR_PI * (1.0 - TOL_ISO))

    @property
    def G_max(self):
        return float(self.G_samples().max())

    def P(self, a):
        return a * self.G(a)

    def Q(self, a):
        return a / self.G(a)


@dataclass(frozen=True, eq=False)
class SLSpectrum:
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # shape (k, n_nodes)
    grid: np.ndarray

    @property
    def kappa1(self):
        return float(self.eigenvalues[0])

    @property
    def f1(self):
        return self.eigenfunctions[0]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("k,kappa\n")
            for k, lam in enumerate(self.eigenvalues, 1):
                fh.write(f"{k},{lam:.12e}\n")

    def eigenfunction_csv(self, path, k=1):
        with open(path, "w") as fh:
            fh.write("a,f\n")
            for x, y in zip(self.grid, self.eigenfunctions[k - 1]):
                fh.write(f"{x:.12e},{y:.12e}\n")


def sl_forms(problem, grid):
    b2 = problem.beta**2
    return _forms(grid, problem.P, lambda a: b2 * problem.Q(a), np.ones_like, _GAUSS2)


def sl_matrices(problem, grid):
    return sl_forms(problem, grid).matrices()


def sl_eigs(problem, k=1, n_grid=N_GRID):
    """Lowest ``k`` eigenpairs on a grid of ``n_grid`` cells graded toward a = 0."""
    grid = graded_grid(0.0, problem.a_star, n_grid)
    if k > len(grid):
        raise SturmError(f"requested {k} eigenpairs on {len(grid)} nodes")
    vals, vecs = _lowest(sl_forms(problem, grid), k)
    return SLSpectrum(eigenvalues=vals, eigenfunctions=vecs.T.copy(), grid=grid)


def rayleigh_quotient(problem, f, grid):
    """Discrete Rayleigh quotient of nodal values ``f`` on ``grid``."""
    return sl_forms(problem, grid).rayleigh(np.asarray(f, dtype=float))


def kappa(G, beta, a_star, n_grid=N_GRID):
    return sl_eigs(SLProblem(G, beta, a_star), 1, n_grid).kappa1


def kappa_disk(beta, a_star, n_grid=N_GRID):
    """First eigenvalue for the disk profile ``G = 4 pi``."""
    return kappa(FOUR_PI, beta, a_star, n_grid)


# ---------------------------------------------------------------------------
# disk radial problems

@dataclass(frozen=True)
class RadialProblem:
    n: int
    beta: float
    R: float

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")

    def grid(self, n_grid):
        if self.n == 0:
            return graded_grid(0.0, self.R, n_grid)
        return _log_graded_grid(self.R * FIRST_CELL, self.R, n_grid)

    def forms(self, grid):
        n, b = self.n, self.beta

        def pot(r):
            return r * (0.5 * b * r - n / r) ** 2 if n else 0.25 * b * b * r**3

        return _forms(grid, lambda r: r, pot, lambda r: r, _GAUSS3)


def disk_radial_kappa(n, beta, R=1.0, n_grid=N_GRID, return_vector=False):
    """First eigenvalue of the radial problem in angular channel ``n``."""
    prob = RadialProblem(int(n), float(beta), float(R))
    grid = prob.grid(n_grid)
    vals, vecs = _lowest(prob.forms(grid), 1)
    if return_vector:
        return float(vals[0]), grid, vecs[:, 0]
    return float(vals[0])


def channel_lower_bound(n, beta, R=1.0):
    """``R^-2 |n| (|n| - R^2 beta)``, a lower bound for channel ``n``.

    The potential satisfies ``(beta r/2 - n/r)^2 >= n^2/r^2 - n beta`` and
    ``n^2/r^2 >= n^2/R^2`` on the disk, so every channel eigenvalue is at least
    ``|n|^2/R^2 - |n| beta``.
    """
    m = abs(n)
    return (m * m - m * R * R * beta) / (R * R)


@dataclass(frozen=True)
class DiskLambda:
    value: float
    n: int
    n_max: int
    channels: dict


def disk_lambda1(beta, R=1.0, n_max=N_MAX, n_grid=N_GRID):
    """``min_n kappa_1(n, beta, R)`` over ``|n| <= n_max``; ``n_max`` grows until
    the channel lower bound of the first excluded ``|n|`` exceeds the minimum."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    channels = {}
    m = 0
    while True:
        for n in sorted({-m, m}):
            channels[n] = disk_radial_kappa(n, beta, R, n_grid)
        best = min(channels.values())
        if m >= n_max and channel_lower_bound(m + 1, beta, R) > best:
            break
        m += 1
    n_best = min(channels, key=lambda n: (channels[n], abs(n), -n))
    return DiskLambda(value=channels[n_best], n=n_best, n_max=m, channels=channels)


def radial_gap(beta, n_max=N_MAX, n_grid=N_GRID):
    """``min_{0<|n|<=n_max} kappa_1(n, beta, 1) - kappa_1(0, beta, 1)`` and the minimising n."""
    k0 = disk_radial_kappa(0, beta, 1.0, n_grid)
    others = {n: disk_radial_kappa(n, beta, 1.0, n_grid)
              for n in range(-n_max, n_max + 1) if n != 0}
    n_best = min(others, key=lambda n: (others[n], abs(n), -n))
    return others[n_best] - k0, n_best, k0, others[n_best]


@dataclass(frozen=True)
class BetaStar:
    value: float
    bracket: tuple
    iterations: int
    crossing_mode: int


def beta_star(tol=1e-5, bracket=(1.0, 8.0), n_max=N_MAX, n_grid=4000):
    """Bisection for the field strength where a nonzero channel overtakes n = 0."""
    if tol < 1e-5:
        raise ValueError("tol must be at least 1e-5")
    lo, hi = map(float, bracket)
    f_lo = radial_gap(lo, n_max, n_grid)[0]
    f_hi = radial_gap(hi, n_max, n_grid)[0]
    if not (f_lo > 0 > f_hi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: gaps {f_lo:.3e}, {f_hi:.3e}")
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if radial_gap(mid, n_max, n_grid)[0] > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    value = 0.5 * (lo + hi)
    mode = radial_gap(value + 0.01, n_max, n_grid)[1]
    return BetaStar(value=value, bracket=(lo, hi), iterations=it, crossing_mode=mode)
