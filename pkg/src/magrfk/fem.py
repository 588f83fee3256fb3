"""P1 finite elements: torsion Poisson problem and magnetic Neumann eigenproblem."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .kernels import magnetic_local

DENSE_LIMIT = 2000
SHIFT = -1e-8


class FEMError(RuntimeError):
    """Singular system or degenerate mesh."""


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: object
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.mesh.nv:
            raise ValueError("field length does not match the vertex count")

    @property
    def max(self):
        return float(self.values.max())

    def gradient(self):
        """Constant P1 gradient per triangle, shape (nt, 2)."""
        _, grad = self.mesh.geometry()
        return np.einsum("ei,eid->ed", self.values[self.mesh.triangles], grad)


@dataclass(frozen=True, eq=False)
class ComplexField:
    mesh: object
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.mesh.nv:
            raise ValueError("field length does not match the vertex count")


@dataclass(frozen=True, eq=False)
class VectorPotentialField:
    """Vector potential, constant on each triangle; ``values`` has shape (nt, 2)."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.mesh.nt, 2):
            raise ValueError("vector potential must have shape (nt, 2)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("vector potential has non-finite entries")

    def circulation(self, loop):
        """Line integral of A along a closed vertex loop; each edge uses the
        mean of the (at most two) triangles sharing it."""
        return _circulation(self, loop)


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray
    eigenfunctions: list
    residuals: np.ndarray

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("k,lambda,residual\n")
            for k, (lam, res) in enumerate(zip(self.eigenvalues, self.residuals), 1):
                fh.write(f"{k},{lam:.12e},{res:.3e}\n")


def _check_mesh(mesh):
    area, _ = mesh.geometry()
    if np.any(area <= 0) or not np.all(np.isfinite(area)):
        raise FEMError("mesh has degenerate or inverted triangles")


def _assemble(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh.nv, mesh.nv))


def magnetic_matrices(mesh, A, beta):
    """Sparse ``(S, M)`` for the form ``int |grad u - i beta A u|^2`` and the L2 product.

    ``A`` may be a :class:`VectorPotentialField` or an (nt, 2) array.
    """
    _check_mesh(mesh)
    area, grad = mesh.geometry()
    a = A.values if isinstance(A, VectorPotentialField) else np.asarray(A, dtype=float)
    S_loc, M_loc = magnetic_local(area, grad, a, beta)
    S = _assemble(mesh, S_loc)
    M = _assemble(mesh, M_loc)
    if beta == 0:
        S = S.real.tocsr()
    return S, M


def stiffness_mass(mesh):
    return magnetic_matrices(mesh, np.zeros((mesh.nt, 2)), 0.0)


def solve_torsion(mesh):
    """P1 solution of ``-Lap psi = 1`` in the domain, ``psi = 0`` on the boundary."""
    K, _ = stiffness_mass(mesh)
    area, _ = mesh.geometry()
    load = np.zeros(mesh.nv)
    np.add.at(load, mesh.triangles.ravel(), np.repeat(area / 3.0, 3))
    free = ~mesh.is_boundary
    if not free.any():
        return ScalarField(mesh, np.zeros(mesh.nv))
    Kff = K[free][:, free].tocsc()
    try:
        lu = spla.splu(Kff)
    except RuntimeError as exc:
        raise FEMError(f"torsion system is singular: {exc}") from exc
    sol = lu.solve(load[free])
    if not np.all(np.isfinite(sol)):
        raise FEMError("torsion system is singular")
    psi = np.zeros(mesh.nv)
    psi[free] = sol
    return ScalarField(mesh, psi)


def vector_potential_standard(mesh):
    """``A_S = (-y/2, x/2)`` sampled at triangle centroids."""
    c = mesh.centroids
    return VectorPotentialField(mesh, np.column_stack([-0.5 * c[:, 1], 0.5 * c[:, 0]]))


def vector_potential_torsion(psi):
    """``A = -rot grad psi = (d_y psi, -d_x psi)`` from the P1 gradient."""
    g = psi.gradient()
    return VectorPotentialField(psi.mesh, np.column_stack([g[:, 1], -g[:, 0]]))


def gauge_shift(A, f):
    """``A + grad f`` for a P1 scalar field ``f`` on the same mesh."""
    return VectorPotentialField(A.mesh, A.values + f.gradient())


def _circulation(A, loop):
    mesh = A.mesh
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    owner = np.tile(np.arange(mesh.nt), 3)
    key = np.sort(e, axis=1)
    table = {}
    for (i, j), el in zip(map(tuple, key), owner):
        table.setdefault((i, j), []).append(el)
    total = 0.0
    loop = list(loop)
    for i, j in zip(loop, loop[1:] + loop[:1]):
        els = table[(min(i, j), max(i, j))]
        a = A.values[els].mean(axis=0)
        total += float(a @ (mesh.vertices[j] - mesh.vertices[i]))
    return total


def vertex_patch_loop(mesh, v):
    """Counter-clockwise loop of the neighbours of interior vertex ``v``, and the patch area."""
    t = mesh.triangles
    els = np.nonzero((t == v).any(axis=1))[0]
    nxt = {}
    for el in els:
        tri = list(t[el])
        k = tri.index(v)
        nxt[tri[(k + 1) % 3]] = tri[(k + 2) % 3]
    start = next(iter(nxt))
    loop = [start]
    while nxt[loop[-1]] != start:
        loop.append(nxt[loop[-1]])
        if len(loop) > len(nxt):
            raise ValueError(f"vertex {v} is not an interior vertex")
    return loop, float(mesh.triangle_areas[els].sum())


def _normalize(vec, M):
    vec = vec / np.sqrt(np.real(np.vdot(vec, M @ vec)))
    k = int(np.argmax(np.abs(vec)))
    return vec * (np.abs(vec[k]) / vec[k])


def magnetic_eigs(mesh, A, beta, k=1, dense_limit=DENSE_LIMIT):
    """Lowest ``k`` eigenpairs of the Neumann problem ``S(beta A) u = lam M u``.

    Dense LAPACK below ``dense_limit`` unknowns, shift-invert Lanczos at
    ``sigma = -1e-8`` above. Eigenfunctions are M-normalised with the entry of
    largest modulus made real positive.
    """
    n = mesh.nv
    if k < 1 or k > n:
        raise ValueError(f"requested {k} eigenpairs of a {n}-dimensional problem")
    S, M = magnetic_matrices(mesh, A, beta)
    if n <= dense_limit or k >= n - 1:
        vals, vecs = scipy.linalg.eigh(S.toarray(), M.toarray(), subset_by_index=[0, k - 1])
    else:
        v0 = np.ones(n, dtype=S.dtype)
        try:
            vals, vecs = spla.eigsh(S, k=k, M=M.tocsc(), sigma=SHIFT, which="LM", v0=v0, tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise EigenSolverError(f"ARPACK did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    vals = np.real(vals)
    funcs, res = [], []
    for j in range(k):
        u = _normalize(vecs[:, j], M)
        Mu = M @ u
        res.append(np.linalg.norm(S @ u - vals[j] * Mu) / np.linalg.norm(Mu))
        funcs.append(ComplexField(mesh, u))
    return EigenResult(eigenvalues=vals, eigenfunctions=funcs, residuals=np.array(res))


def rayleigh_quotient(mesh, A, beta, u):
    S, M = magnetic_matrices(mesh, A, beta)
    return float(np.real(np.vdot(u, S @ u)) / np.real(np.vdot(u, M @ u)))
