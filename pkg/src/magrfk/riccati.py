"""Phase-plane data of first eigenfunctions and derivatives along profile paths.

For the first eigenfunction ``f`` of the area-variable problem the pair
``X = f``, ``Y = P f'`` solves a first-order system, and ``R = Y / X`` obeys
``R' = beta^2 Q - kappa - R^2 / P``. Everything here post-processes
:func:`magrfk.sturm.sl_eigs` output; nothing integrates the ODE from a = 0.
"""
from dataclasses import dataclass

import numpy as np

from .levelset import FOUR_PI, GProfile
from .sturm import N_GRID, SLProblem, sl_eigs

# relative accuracy of the 1-D eigenvalues (cellwise Rayleigh quotients of
# shift-invert eigenvectors); observed rounding is near 1e-15
SOLVER_TOL = 1e-12
DEGENERACY_GAP = 1e-8
FD_STEP = 1e-4


class RiccatiError(RuntimeError):
    pass


class HypothesisError(ValueError):
    """Inputs violate the ordering the monotonicity statement needs."""


def solver_tolerance(kappa):
    return SOLVER_TOL * max(1.0, abs(kappa))


@dataclass(frozen=True, eq=False)
class PhasePath:
    a: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    R: np.ndarray
    a_cell: np.ndarray
    Y_cell: np.ndarray
    kappa: float
    beta: float

    def comparison_margin(self):
        """``min_i (beta a_i - |R_i|)`` over interior nodes (positive when the bound holds)."""
        inner = slice(1, -1)
        return float(np.min(self.beta * self.a[inner] - np.abs(self.R[inner])))

    def endpoint_ratio(self):
        """Largest of ``|Y|`` on the first and last cells relative to ``max |Y|``."""
        top = np.abs(self.Y_cell).max()
        if top == 0:
            return 0.0
        return float(max(abs(self.Y_cell[0]), abs(self.Y_cell[-1])) / top)

    def origin_slope(self, n=10):
        """Least-squares slope of ``|Y|`` against ``a`` on the first ``n`` interior nodes,
        and the ratio of ``|Y(a_1)|/a_1`` to the median of ``|Y_i|/a_i`` there."""
        a = self.a[1:n + 1]
        y = np.abs(self.Y[1:n + 1])
        slope = float(a @ y / (a @ a))
        q = y / a
        med = float(np.median(q))
        return slope, float(q[0] / med) if med > 0 else 0.0


def phase_path(spectrum, problem):
    """``(X, Y, R)`` of the first eigenfunction.

    ``Y`` is ``P f'`` per cell, with ``P`` averaged over the cell by the same
    2-point rule as the assembly; interior nodes take the mean of their two
    cells and the end nodes extrapolate linearly from the two nearest cells.
    """
    a = spectrum.grid
    X = np.asarray(spectrum.f1, dtype=float)
    if np.any(X[1:-1] <= 0):
        raise RiccatiError("first eigenfunction changes sign; wrong branch")
    h = np.diff(a)
    mid = 0.5 * (a[1:] + a[:-1])
    g = 0.5 * h / np.sqrt(3.0)
    p_bar = 0.5 * (problem.P(mid - g) + problem.P(mid + g))
    y_cell = p_bar * np.diff(X) / h

    Y = np.empty_like(X)
    Y[1:-1] = 0.5 * (y_cell[1:] + y_cell[:-1])
    if len(y_cell) > 1:
        Y[0] = y_cell[0] + (y_cell[0] - y_cell[1]) * (a[0] - mid[0]) / (mid[0] - mid[1])
        Y[-1] = y_cell[-1] + (y_cell[-1] - y_cell[-2]) * (a[-1] - mid[-1]) / (mid[-1] - mid[-2])
    else:
        Y[0] = Y[-1] = y_cell[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(X != 0, Y / X, np.nan)
    return PhasePath(a=a, X=X, Y=Y, R=R, a_cell=mid, Y_cell=y_cell,
                     kappa=spectrum.kappa1, beta=problem.beta)


def riccati_rhs(problem, kappa, a, R):
    return problem.beta**2 * problem.Q(a) - kappa - R**2 / problem.P(a)


def riccati_residual(path, problem, kappa=None):
    """Max normalised residual of the Riccati equation on the inner 90% of ``[0, a_star]``.

    ``R'`` is a centred difference over neighbouring nodes.
    """
    kappa = path.kappa if kappa is None else kappa
    a, R = path.a, path.R
    dR = (R[2:] - R[:-2]) / (a[2:] - a[:-2])
    ai = a[1:-1]
    res = dR - riccati_rhs(problem, kappa, ai, R[1:-1])
    inner = (ai >= 0.05 * problem.a_star) & (ai <= 0.95 * problem.a_star)
    scale = problem.beta**2 * float(np.max(problem.Q(a))) + abs(kappa)
    if scale <= SOLVER_TOL:
        # zero field: kappa is rounding noise, report the absolute residual
        return float(np.max(np.abs(res[inner])))
    return float(np.max(np.abs(res[inner])) / scale)


def F(problem, kappa, a, Z):
    """Right-hand side of the Riccati equation as a function of ``(a, Z)``."""
    return riccati_rhs(problem, kappa, a, Z)


def barrier_identity_error(problem, kappa, a):
    """``max |F(a, +-beta a) + kappa|``; the barrier lines ``Z = +-beta a`` give exactly ``-kappa``."""
    a = np.asarray(a, dtype=float)
    a = a[a > 0]
    b = problem.beta
    err = [np.abs(F(problem, kappa, a, s * b * a) + kappa) for s in (1.0, -1.0)]
    return float(np.max(err))


# ---------------------------------------------------------------------------
# convex paths of profiles

@dataclass(frozen=True, eq=False)
class ConvexPath:
    """``G_z = (1 - z) G0 + z G1`` for z in [0, 1]."""

    G0: object
    G1: object
    beta: float
    a_star: float
    n_grid: int = N_GRID

    def __post_init__(self):
        for name in ("G0", "G1"):
            g = getattr(self, name)
            if not isinstance(g, GProfile) and not callable(g):
                object.__setattr__(self, name, GProfile.constant_profile(float(g), self.a_star))

    def G(self, z):
        g0, g1 = self.G0, self.G1
        return lambda a: (1.0 - z) * g0(a) + z * g1(a)

    def delta(self, a):
        return self.G1(a) - self.G0(a)

    def problem(self, z):
        return SLProblem(self.G(z), self.beta, self.a_star)

    def common_grid(self):
        pts = [np.linspace(0.0, self.a_star, 2001)]
        for g in (self.G0, self.G1):
            if isinstance(g, GProfile) and not g.is_constant:
                pts.append(g.a)
        return np.unique(np.concatenate(pts))

    def kappa(self, z, k=1):
        return sl_eigs(self.problem(z), k, self.n_grid).eigenvalues[:k]


def fh_derivative(path, z):
    """``kappa'(z)`` from the phase-plane integral of the first eigenfunction."""
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    problem = path.problem(z)
    spec = sl_eigs(problem, 2, path.n_grid)
    if spec.eigenvalues[1] - spec.eigenvalues[0] < DEGENERACY_GAP:
        raise RiccatiError("first eigenvalue is numerically degenerate")
    pp = phase_path(spec, problem)
    a = pp.a
    integrand = np.zeros_like(a)
    pos = a > 0
    ap = a[pos]
    Gz = problem.G(ap)
    integrand[pos] = (pp.Y[pos] ** 2 - problem.beta**2 * ap**2 * pp.X[pos] ** 2) \
        * path.delta(ap) / (ap * Gz**2)
    return float(np.trapezoid(integrand, a)), spec.kappa1


def fd_derivative(path, z, eps=FD_STEP):
    """Central difference of ``kappa(z)``; one-sided at the ends of [0, 1]."""
    lo, hi = max(0.0, z - eps), min(1.0, z + eps)
    return float((path.kappa(hi)[0] - path.kappa(lo)[0]) / (hi - lo))


@dataclass(frozen=True, eq=False)
class Sweep:
    z: np.ndarray
    kappa: np.ndarray
    kappa_prime_fh: np.ndarray
    kappa_prime_fd: np.ndarray
    verdict: str
    min_step: float
    tolerance: float

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("z,kappa,kappa_prime_fh,kappa_prime_fd\n")
            for row in zip(self.z, self.kappa, self.kappa_prime_fh, self.kappa_prime_fd):
                fh.write(",".join(f"{x:.12e}" for x in row) + "\n")


def check_ordering(path, tol=1e-12):
    """Returns ``max(G1 - G0)`` on the common grid; raises if ``G0 > G1`` anywhere."""
    a = path.common_grid()
    d = path.delta(a)
    scale = tol * max(1.0, float(np.max(np.abs(path.G0(a)))))
    if np.any(d < -scale):
        raise HypothesisError(f"G0 exceeds G1 by up to {-d.min():.3e}")
    return float(d.max())


def monotonicity_sweep(path, n_z=11, derivatives=True):
    """``kappa(z)`` on a uniform z-grid with a strict-decrease verdict.

    Each step must fall by more than ten times the solver tolerance; identical
    endpoints give the verdict ``"degenerate"``.
    """
    spread = check_ordering(path)
    z = np.linspace(0.0, 1.0, n_z)
    kap = np.array([path.kappa(v)[0] for v in z])
    fh = np.full(n_z, np.nan)
    fd = np.full(n_z, np.nan)
    if derivatives:
        for i, v in enumerate(z):
            fh[i] = fh_derivative(path, v)[0]
            fd[i] = fd_derivative(path, v)
    tol = 10.0 * solver_tolerance(float(np.max(np.abs(kap))))
    steps = -np.diff(kap)
    if spread <= 0:
        verdict = "degenerate"
    elif np.all(steps > tol):
        verdict = "strictly decreasing"
    else:
        verdict = "not strictly decreasing"
    return Sweep(z=z, kappa=kap, kappa_prime_fh=fh, kappa_prime_fd=fd, verdict=verdict,
                 min_step=float(steps.min()), tolerance=tol)


# ---------------------------------------------------------------------------
# truncation

@dataclass(frozen=True, eq=False)
class Truncation:
    n: np.ndarray
    kappa: np.ndarray
    limit: float
    stabilized_from: int
    non_increasing: bool
    tolerance: float

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("n,kappa\n")
            for n, k in zip(self.n, self.kappa):
                fh.write(f"{n},{k:.12e}\n")


def truncation_sequence(G, beta, N, a_star=None, n_grid=N_GRID):
    """``kappa_1(min(G, 4 n pi), beta)`` for ``n = 1..N``.

    Capping from above keeps every term bounded and makes the profiles
    increase with ``n``; once ``4 n pi`` clears ``max G`` the profile is ``G``
    itself and the sequence is constant.
    """
    if not isinstance(G, GProfile):
        G = GProfile.constant_profile(float(G), a_star)
    n = np.arange(1, N + 1)
    kap = np.array([sl_eigs(SLProblem(G.capped(FOUR_PI * k), beta, G.a_star), 1, n_grid).kappa1
                    for k in n])
    tol = 10.0 * solver_tolerance(float(np.max(np.abs(kap))))
    gmax = float(np.max(G.G)) if not G.is_constant else G.constant
    clear = n[FOUR_PI * n >= gmax]
    return Truncation(n=n, kappa=kap, limit=float(kap[-1]),
                      stabilized_from=int(clear[0]) if len(clear) else -1,
                      non_increasing=bool(np.all(np.diff(kap) <= tol)), tolerance=tol)


def spiked_profile(a_star, base=FOUR_PI, peak=100 * np.pi, lo=0.4, hi=0.6, n=2001):
    """``base`` with a plateau ``peak`` on ``[lo a_star, hi a_star]``."""
    a = np.linspace(0.0, a_star, n)
    G = np.where((a >= lo * a_star) & (a <= hi * a_star), peak, base)
    return GProfile(a=a, G=G, a_star=float(a_star))
