"""Smooth planar domains and conforming triangulations of them."""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

MAX_FOURIER_MODES = 8


class InvalidDomainError(ValueError):
    """The domain parameters do not describe a valid simply connected domain."""


class MeshingError(RuntimeError):
    """A valid domain could not be triangulated at the requested resolution."""


@dataclass(frozen=True)
class DomainSpec:
    """Analytic description of a smooth, star-shaped planar domain.

    Use the :func:`disk`, :func:`ellipse` and :func:`fourier_star` constructors.
    For ``fourier_star`` the boundary is ``r(theta) = r0 + sum_k c_k cos(k theta)
    + s_k sin(k theta)`` with ``k = 1..K``.
    """

    kind: str
    radius: float = 1.0
    semi_axes: tuple = (1.0, 1.0)
    r0: float = 1.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def __post_init__(self):
        if self.kind == "disk":
            if not self.radius > 0:
                raise InvalidDomainError(f"disk radius must be positive, got {self.radius}")
        elif self.kind == "ellipse":
            ax, ay = self.semi_axes
            if not (ax > 0 and ay > 0):
                raise InvalidDomainError(f"ellipse semi-axes must be positive, got {self.semi_axes}")
        elif self.kind == "fourier_star":
            if max(len(self.cos_coeffs), len(self.sin_coeffs)) > MAX_FOURIER_MODES:
                raise InvalidDomainError(f"at most {MAX_FOURIER_MODES} Fourier modes are supported")
            spread = sum(abs(c) for c in self.cos_coeffs) + sum(abs(s) for s in self.sin_coeffs)
            if not self.r0 - spread > 0:
                raise InvalidDomainError(
                    f"radius function may vanish: r0={self.r0} <= sum|coeffs|={spread}")
        else:
            raise InvalidDomainError(f"unknown domain kind {self.kind!r}")

    def _coeffs(self):
        K = max(len(self.cos_coeffs), len(self.sin_coeffs))
        c = np.zeros(K)
        s = np.zeros(K)
        c[:len(self.cos_coeffs)] = self.cos_coeffs
        s[:len(self.sin_coeffs)] = self.sin_coeffs
        return c, s

    def boundary(self, theta):
        """Points of the boundary curve, shape (len(theta), 2), counter-clockwise."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "ellipse":
            ax, ay = self.semi_axes
            return np.column_stack([ax * np.cos(theta), ay * np.sin(theta)])
        r = self.polar_radius(theta)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def polar_radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "disk":
            return np.full_like(theta, self.radius)
        if self.kind == "ellipse":
            ax, ay = self.semi_axes
            return ax * ay / np.hypot(ay * np.cos(theta), ax * np.sin(theta))
        c, s = self._coeffs()
        k = np.arange(1, len(c) + 1)
        kt = np.multiply.outer(theta, k)
        return self.r0 + np.cos(kt) @ c + np.sin(kt) @ s

    def speed(self, theta):
        """|d boundary / d theta|."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "disk":
            return np.full_like(theta, self.radius)
        if self.kind == "ellipse":
            ax, ay = self.semi_axes
            return np.hypot(ax * np.sin(theta), ay * np.cos(theta))
        c, s = self._coeffs()
        k = np.arange(1, len(c) + 1)
        kt = np.multiply.outer(theta, k)
        dr = -np.sin(kt) @ (k * c) + np.cos(kt) @ (k * s)
        return np.hypot(self.polar_radius(theta), dr)

    def describe(self):
        if self.kind == "disk":
            return f"disk(R={self.radius:g})"
        if self.kind == "ellipse":
            return "ellipse({:g},{:g})".format(*self.semi_axes)
        terms = [f"r0={self.r0:g}"]
        terms += [f"c{k}={v:g}" for k, v in enumerate(self.cos_coeffs, 1) if v]
        terms += [f"s{k}={v:g}" for k, v in enumerate(self.sin_coeffs, 1) if v]
        return "fourier_star(" + ",".join(terms) + ")"


def disk(radius=1.0):
    return DomainSpec("disk", radius=float(radius))


def ellipse(ax, ay):
    return DomainSpec("ellipse", semi_axes=(float(ax), float(ay)))


def fourier_star(r0=1.0, cos_coeffs=(), sin_coeffs=()):
    return DomainSpec("fourier_star", r0=float(r0),
                      cos_coeffs=tuple(float(c) for c in cos_coeffs),
                      sin_coeffs=tuple(float(s) for s in sin_coeffs))


def parse_domain(text):
    """Parse ``disk:1``, ``ellipse:2,0.5`` or ``fourier_star:r0=1,c2=0.15``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip()
    items = [x.strip() for x in rest.split(",") if x.strip()]
    try:
        if kind == "disk":
            return disk(float(items[0]) if items else 1.0)
        if kind == "ellipse":
            return ellipse(float(items[0]), float(items[1]))
        if kind == "fourier_star":
            r0 = 1.0
            c = [0.0] * MAX_FOURIER_MODES
            s = [0.0] * MAX_FOURIER_MODES
            for item in items:
                key, _, val = item.partition("=")
                key = key.strip()
                if key == "r0":
                    r0 = float(val)
                elif key[0] in "cs" and key[1:].isdigit():
                    k = int(key[1:])
                    if not 1 <= k <= MAX_FOURIER_MODES:
                        raise InvalidDomainError(f"Fourier index out of range in {item!r}")
                    (c if key[0] == "c" else s)[k - 1] = float(val)
                else:
                    raise InvalidDomainError(f"unknown fourier_star term {item!r}")
            while c and c[-1] == 0.0:
                c.pop()
            while s and s[-1] == 0.0:
                s.pop()
            return fourier_star(r0, c, s)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, InvalidDomainError):
            raise
        raise InvalidDomainError(f"cannot parse domain {text!r}: {exc}") from exc
    raise InvalidDomainError(f"unknown domain kind in {text!r}")


def area(domain):
    """Exact area of the domain."""
    if domain.kind == "disk":
        return np.pi * domain.radius ** 2
    if domain.kind == "ellipse":
        ax, ay = domain.semi_axes
        return np.pi * ax * ay
    c, s = domain._coeffs()
    return np.pi * domain.r0 ** 2 + 0.5 * np.pi * float(np.sum(c ** 2) + np.sum(s ** 2))


def equivalent_disk(domain):
    """Radius of the centred disk with the same area."""
    return float(np.sqrt(area(domain) / np.pi))


def polygon_area(xy):
    """Shoelace area of a closed polygon given as an (n, 2) vertex array."""
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_polygon(points, poly, chunk=4096):
    """Even-odd rule; points exactly on an edge may go either way."""
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    out = np.empty(len(points), dtype=bool)
    for start in range(0, len(points), chunk):
        pts = points[start:start + chunk]
        x, y = pts[:, 0][:, None], pts[:, 1][:, None]
        straddle = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        out[start:start + chunk] = (straddle & (x < xcross)).sum(axis=1) % 2 == 1
    return out


# ---------------------------------------------------------------------------
# meshes

@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with an ordered boundary loop.

    ``boundary_nodes`` lists the boundary vertices counter-clockwise and
    ``boundary_edges[k] = (boundary_nodes[k], boundary_nodes[k+1])``.
    ``boundary_param`` is the curve parameter of each boundary node, or None
    for meshes read from disk.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    h: float
    boundary_param: np.ndarray = None
    domain: DomainSpec = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_nodes", "boundary_param"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def nt(self):
        return len(self.triangles)

    @property
    def boundary_edges(self):
        b = self.boundary_nodes
        return np.column_stack([b, np.roll(b, -1)])

    @property
    def is_boundary(self):
        mask = np.zeros(self.nv, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    def geometry(self):
        """Cached ``(area, grad)`` per triangle, see :func:`kernels.triangle_geometry`."""
        if "geom" not in self._cache:
            from .kernels import triangle_geometry

            self._cache["geom"] = triangle_geometry(self.vertices, self.triangles)
        return self._cache["geom"]

    @property
    def triangle_areas(self):
        return self.geometry()[0]

    @property
    def area(self):
        return float(self.triangle_areas.sum())

    @property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self):
        """Unique undirected edges, shape (ne, 2), sorted per row."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def max_edge_length(self):
        e = self.edges()
        return float(np.max(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)))

    def boundary_polygon(self):
        return self.vertices[self.boundary_nodes]


def _boundary_samples(domain, h):
    """Boundary parameters at (nearly) uniform arclength spacing <= h."""
    m = 20000
    th = np.linspace(0.0, 2 * np.pi, m + 1)
    sp = domain.speed(th)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * np.diff(th))])
    length = s[-1]
    nb = max(int(np.ceil(length / h - 1e-9)), 12)
    targets = np.arange(nb) * (length / nb)
    return np.interp(targets, s, th), length


def _hex_lattice(lo, hi, h):
    dy = h * np.sqrt(3.0) / 2.0
    ny = int(np.ceil((hi[1] - lo[1]) / dy)) + 2
    nx = int(np.ceil((hi[0] - lo[0]) / h)) + 2
    j = np.arange(-ny, ny + 1)
    i = np.arange(-nx, nx + 1)
    I, J = np.meshgrid(i, j)
    x = (I + 0.5 * (J % 2)) * h
    y = J * dy
    pts = np.column_stack([x.ravel(), y.ravel()])
    keep = ((pts >= lo - h) & (pts <= hi + h)).all(axis=1)
    return pts[keep]


def _triangulate(points, poly, nb):
    tri = Delaunay(points)
    t = tri.simplices
    cent = points[t].mean(axis=1)
    t = t[points_in_polygon(cent, poly)]
    p = points[t]
    det = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
           - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    flip = det < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return t[np.abs(det) > 1e-14 * np.max(np.abs(det))]


def _check_boundary(triangles, nb):
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
    free = key[counts == 1]
    want = np.sort(np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb]), axis=1)
    if len(free) != nb:
        return False
    return bool(np.array_equal(np.unique(free, axis=0), np.unique(want, axis=0)))


def build_mesh(domain, h, smoothing=4):
    """Triangulate ``domain`` with target edge length ``h``.

    Boundary vertices sit exactly on the analytic curve at uniform arclength
    spacing; interior vertices start on a hexagonal lattice, receive a few
    Laplacian smoothing sweeps and are re-triangulated (Delaunay) each sweep.
    """
    if not h > 0:
        raise InvalidDomainError(f"mesh size must be positive, got {h}")
    theta, length = _boundary_samples(domain, h)
    bpts = domain.boundary(theta)
    nb = len(bpts)
    seg = np.linalg.norm(np.roll(bpts, -1, axis=0) - bpts, axis=1)
    if seg.min() <= 0:
        raise MeshingError("boundary polygon has coincident vertices")

    lo, hi = bpts.min(axis=0), bpts.max(axis=0)
    cand = _hex_lattice(lo, hi, h)
    cand = cand[points_in_polygon(cand, bpts)]
    dense = np.concatenate([bpts + s * (np.roll(bpts, -1, axis=0) - bpts) for s in (0.0, 0.25, 0.5, 0.75)])
    dist, _ = cKDTree(dense).query(cand)
    interior = cand[dist > 0.55 * h]
    pts = np.concatenate([bpts, interior])

    tris = _triangulate(pts, bpts, nb)
    for _ in range(smoothing):
        nbrs_sum = np.zeros_like(pts)
        deg = np.zeros(len(pts))
        for a, b in ((0, 1), (1, 2), (2, 0)):
            np.add.at(nbrs_sum, tris[:, a], pts[tris[:, b]])
            np.add.at(nbrs_sum, tris[:, b], pts[tris[:, a]])
            np.add.at(deg, tris[:, a], 1.0)
            np.add.at(deg, tris[:, b], 1.0)
        new = pts.copy()
        inner = np.arange(nb, len(pts))
        inner = inner[deg[inner] > 0]
        new[inner] = nbrs_sum[inner] / deg[inner, None]
        moved_ok = points_in_polygon(new[nb:], bpts)
        new[nb:][~moved_ok] = pts[nb:][~moved_ok]
        pts = new
        tris = _triangulate(pts, bpts, nb)

    used = np.unique(tris)
    if len(used) != len(pts):
        raise MeshingError("triangulation left vertices unused")
    if not _check_boundary(tris, nb):
        raise MeshingError(
            f"boundary polygon not recovered by the triangulation (h={h} too coarse for {domain.describe()})")
    return Mesh(vertices=pts, triangles=tris.astype(np.int64), boundary_nodes=np.arange(nb),
                h=float(h), boundary_param=theta, domain=domain)


def refine(mesh):
    """Split every triangle into four; new boundary vertices are placed on the curve."""
    v = mesh.vertices
    t = mesh.triangles
    e_all = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e_sorted = np.sort(e_all, axis=1)
    edges, inv = np.unique(e_sorted, axis=0, return_inverse=True)
    inv = inv.ravel()
    mid_index = mesh.nv + np.arange(len(edges))
    new_v = np.concatenate([v, 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])])

    nt = mesh.nt
    m01, m12, m20 = (mid_index[inv[k * nt:(k + 1) * nt]] for k in range(3))
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    new_t = np.concatenate([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])

    bn = mesh.boundary_nodes
    nb = len(bn)
    lookup = {tuple(e): i for i, e in enumerate(edges)}
    new_bn = np.empty(2 * nb, dtype=np.int64)
    new_param = None if mesh.boundary_param is None else np.empty(2 * nb)
    for k in range(nb):
        i, j = bn[k], bn[(k + 1) % nb]
        mid = mid_index[lookup[(min(i, j), max(i, j))]]
        new_bn[2 * k] = i
        new_bn[2 * k + 1] = mid
        if new_param is not None:
            ta = mesh.boundary_param[k]
            tb = mesh.boundary_param[(k + 1) % nb]
            if tb <= ta:
                tb += 2 * np.pi
            tm = 0.5 * (ta + tb)
            new_param[2 * k] = ta
            new_param[2 * k + 1] = tm
            if mesh.domain is not None:
                new_v[mid] = mesh.domain.boundary([tm])[0]
    return Mesh(vertices=new_v, triangles=new_t, boundary_nodes=new_bn, h=mesh.h / 2,
                boundary_param=new_param, domain=mesh.domain)


def save_mesh(mesh, path):
    """Write the plain-text mesh format: ``nv nt nb`` then vertices, triangles, boundary edges."""
    lines = [f"{mesh.nv} {mesh.nt} {len(mesh.boundary_nodes)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += ["{} {} {}".format(*tri) for tri in mesh.triangles]
    lines += ["{} {}".format(*e) for e in mesh.boundary_edges]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path, h=float("nan")):
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    nv, nt, nb = (int(x) for x in rows[0])
    verts = np.array(rows[1:1 + nv], dtype=float).reshape(nv, 2)
    tris = np.array(rows[1 + nv:1 + nv + nt], dtype=np.int64).reshape(nt, 3)
    bedges = np.array(rows[1 + nv + nt:1 + nv + nt + nb], dtype=np.int64).reshape(nb, 2)
    if not np.array_equal(bedges[:, 1], np.roll(bedges[:, 0], -1)):
        raise ValueError("boundary edges do not form a single ordered loop")
    return Mesh(vertices=verts, triangles=tris, boundary_nodes=bedges[:, 0].copy(), h=h)
