"""Command-line experiment pipeline.

Subcommands ``reverse-fk``, ``beta-star``, ``convergence``, ``monotonicity``
and ``mesh-export`` read a flat key-value config (see :mod:`magrfk.config`) and
write one CSV per stage plus ``report.txt`` into ``--out``. The exit code is 0
when every verdict holds, 1 when some verdict fails and 2 on a pipeline error.
"""
import argparse
import contextlib
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import fem, geometry, levelset, riccati, sturm
from .config import ConfigError, load_config, parse_number
from .levelset import FOUR_PI, GProfile

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
ORDER_RANGE = (1.7, 2.3)
FH_RTOL = 1e-3

_ERRORS = (ConfigError, geometry.InvalidDomainError, geometry.MeshingError, fem.FEMError,
           fem.EigenSolverError, levelset.LevelSetError, sturm.SturmError,
           riccati.RiccatiError, riccati.HypothesisError)


class PipelineError(RuntimeError):
    pass


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except _ERRORS as exc:
        raise PipelineError(f"[{name}] {type(exc).__name__}: {exc}") from exc


@dataclass(frozen=True)
class Verdict:
    """One checked relation with its numerical slack and tolerance.

    ``kind`` is ``"le"`` (holds when ``slack >= -tol``), ``"lt"`` (strict:
    ``slack > tol``), ``"eq"`` (``|slack| <= tol``) or ``"ge0"`` (``slack >= 0``,
    used for range checks already folded into the slack).
    """

    name: str
    kind: str
    slack: float
    tol: float

    @property
    def holds(self):
        s, t = self.slack, self.tol
        if not np.isfinite(s):
            return False
        return {"le": s >= -t, "lt": s > t, "eq": abs(s) <= t, "ge0": s >= 0}[self.kind]

    def line(self):
        tag = "PASS" if self.holds else "FAIL"
        return f"{tag}  {self.name}  [{self.kind}]  slack={self.slack:.6e}  tol={self.tol:.6e}"


def range_verdict(name, value, lo, hi):
    return Verdict(name, "ge0", min(value - lo, hi - value), 0.0)


class Report:
    def __init__(self, out, title):
        self.out = out
        self.lines = [title, ""]
        self.verdicts = []
        os.makedirs(out, exist_ok=True)

    def add(self, text=""):
        self.lines.append(text)

    def check(self, verdict):
        self.verdicts.append(verdict)
        self.lines.append(verdict.line())
        return verdict

    def path(self, name):
        return os.path.join(self.out, name)

    def finish(self):
        n_fail = sum(not v.holds for v in self.verdicts)
        self.lines += ["", f"verdicts: {len(self.verdicts)}  failed: {n_fail}"]
        with open(self.path("report.txt"), "w") as fh:
            fh.write("\n".join(self.lines) + "\n")
        return EXIT_FAIL if n_fail else EXIT_OK


def write_table(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12e}"
    return str(x)


def _tag(*parts):
    return re.sub(r"[^A-Za-z0-9.]+", "_", "__".join(str(p) for p in parts)).strip("_")


# ---------------------------------------------------------------------------
# reverse Faber-Krahn chain

def _mesh_level(mesh, beta, n_levels, n_grid):
    with stage("torsion"):
        psi = fem.solve_torsion(mesh)
    with stage("levelset"):
        prof = levelset.level_profile(psi, n_levels)
        G = levelset.g_profile(prof)
    with stage("fem-eigs"):
        eig = fem.magnetic_eigs(mesh, fem.vector_potential_torsion(psi), beta, k=1)
    with stage("sturm"):
        kG = sturm.kappa(G, beta, G.a_star, n_grid)
    return {"mesh": mesh, "profile": prof, "G": G, "eig": eig,
            "lambda": float(eig.eigenvalues[0]), "kappa_G": kG}


def fk_case(domain, beta, h, cfg):
    """All quantities of the chain for one (domain, beta, h), with refinement deltas."""
    with stage("mesh"):
        coarse = geometry.build_mesh(domain, h)
        fine = geometry.refine(coarse)
    c = _mesh_level(coarse, beta, cfg.n_levels, cfg.n_grid)
    f = _mesh_level(fine, beta, cfg.n_levels, cfg.n_grid)
    a_star = geometry.area(domain)
    R = geometry.equivalent_disk(domain)
    with stage("sturm"):
        kG_2n = sturm.kappa(c["G"], beta, c["G"].a_star, 2 * cfg.n_grid)
        k4 = sturm.kappa_disk(beta, a_star, cfg.n_grid)
        k4_2n = sturm.kappa_disk(beta, a_star, 2 * cfg.n_grid)
        disk = sturm.disk_lambda1(beta, R, cfg.n_max, cfg.n_grid)
        disk_2n = sturm.disk_radial_kappa(disk.n, beta, R, 2 * cfg.n_grid)
    inside = beta * a_star <= cfg.beta_star * np.pi
    return {
        "domain": domain, "beta": beta, "h": h, "coarse": c, "fine": f,
        "a_star": a_star, "R_star": R, "inside": inside,
        "lambda": c["lambda"], "kappa_G": c["kappa_G"], "kappa_4pi": k4,
        "lambda_disk": disk.value, "disk_mode": disk.n,
        "d_lambda": abs(c["lambda"] - f["lambda"]),
        "d_kappa_G_mesh": abs(c["kappa_G"] - f["kappa_G"]),
        "d_kappa_G_grid": abs(c["kappa_G"] - kG_2n),
        "d_kappa_4pi_grid": abs(k4 - k4_2n),
        "d_disk_grid": abs(disk.value - disk_2n),
        "G_min": float(np.min(c["G"].G)),
    }


def fk_verdicts(case, cfg):
    """Link verdicts. Tolerances are twice the h -> h/2 change of the link's
    slack plus the n_grid -> 2 n_grid changes of the 1-D quantities in it."""
    c, f = case["coarse"], case["fine"]
    is_disk = case["domain"].kind == "disk"
    out = []
    rel = max(case["d_lambda"] / abs(case["lambda"]) if case["lambda"] else 0.0,
              case["d_kappa_G_mesh"] / abs(case["kappa_G"]) if case["kappa_G"] else 0.0)
    out.append(Verdict("converged: relative h->h/2 change of lambda1, kappa1(G)", "le",
                       cfg.conv_tol - rel, 0.0))
    converged = out[0].holds

    s1 = c["kappa_G"] - c["lambda"]
    s1f = f["kappa_G"] - f["lambda"]
    t1 = 2.0 * (abs(s1 - s1f) + case["d_kappa_G_grid"])
    s2 = case["kappa_4pi"] - c["kappa_G"]
    s2f = case["kappa_4pi"] - f["kappa_G"]
    t2 = 2.0 * (abs(s2 - s2f) + case["d_kappa_G_grid"] + case["d_kappa_4pi_grid"])
    kind = "eq" if is_disk else "lt"
    links = [
        Verdict("lambda1(Omega) <= kappa1(G_Omega)", kind, s1, t1),
        Verdict("kappa1(G_Omega) <= kappa1(4pi)", kind, s2, t2),
    ]
    if case["inside"]:
        s3 = case["lambda_disk"] - case["kappa_4pi"]
        t3 = 2.0 * (case["d_kappa_4pi_grid"] + case["d_disk_grid"])
        links.append(Verdict("kappa1(4pi) = lambda1(Omega*)", "eq", s3, t3))
        s4 = case["lambda_disk"] - c["lambda"]
        s4f = case["lambda_disk"] - f["lambda"]
        t4 = 2.0 * (abs(s4 - s4f) + case["d_disk_grid"])
        links.append(Verdict("lambda1(Omega) <= lambda1(Omega*)", kind, s4, t4))
    if not converged:
        links = [Verdict(v.name + " (unconverged)", v.kind, float("nan"), v.tol) for v in links]
    out += links
    out.append(Verdict("min G_Omega >= 4pi (1 - tol_iso)", "le",
                       case["G_min"] - FOUR_PI * (1.0 - cfg.tol_iso), 0.0))
    return out


def run_reverse_fk(cfg, out):
    rep = Report(out, "reverse Faber-Krahn chain")
    rows = []
    for domain in cfg.domains:
        for beta in cfg.betas:
            for h in cfg.h:
                case = fk_case(domain, beta, h, cfg)
                tag = _tag(domain.describe(), f"beta{beta:g}", f"h{h:g}")
                c = case["coarse"]
                c["profile"].to_csv(rep.path(f"{tag}__level_profile.csv"))
                c["G"].to_csv(rep.path(f"{tag}__g_profile.csv"))
                c["eig"].to_csv(rep.path(f"{tag}__fem_eigs.csv"))
                regime = "theorem regime" if case["inside"] else \
                    "outside-theorem regime (conjecture regime)"
                rep.add(f"case {domain.describe()}  beta={beta:g}  h={h:g}  "
                        f"beta*a*={beta * case['a_star']:.6f}  [{regime}]")
                for key in ("lambda", "kappa_G", "kappa_4pi", "lambda_disk"):
                    rep.add(f"  {key:12s} = {case[key]:.12e}")
                    rows.append((tag, key, case[key]))
                rep.add(f"  disk minimising mode n = {case['disk_mode']}")
                for key in ("d_lambda", "d_kappa_G_mesh", "d_kappa_G_grid",
                            "d_kappa_4pi_grid", "d_disk_grid", "G_min"):
                    rep.add(f"  {key:16s} = {case[key]:.6e}")
                    rows.append((tag, key, case[key]))
                if not case["inside"]:
                    diff = c["lambda"] - case["lambda_disk"]
                    sign = "below" if diff < 0 else "above"
                    rep.add(f"  observed: lambda1(Omega) - lambda1(Omega*) = {diff:.6e} "
                            f"({sign}; conjecture regime, not asserted)")
                for v in fk_verdicts(case, cfg):
                    rep.check(v)
                rep.add()
    write_table(rep.path("reverse_fk.csv"), ("case", "quantity", "value"), rows)
    return rep.finish()


# ---------------------------------------------------------------------------
# beta star

def run_beta_star(cfg, out):
    rep = Report(out, "critical field strength of the unit disk")
    rows = []
    with stage("sturm"):
        for b in cfg.table_betas:
            gap, n, k0, kn = sturm.radial_gap(b, cfg.n_max, cfg.n_grid)
            rows.append((b, k0, kn, n))
            rep.add(f"beta={b:g}  kappa1(0)={k0:.10f}  min_n!=0={kn:.10f} (n={n})")
            if b <= 1.0:
                rep.check(Verdict(f"n=0 minimal at beta={b:g}", "lt", gap,
                                  10 * riccati.solver_tolerance(k0)))
            elif gap < 0:
                rep.add(f"  observed: nonzero mode n={n} below n=0 by {-gap:.3e}")
        res = sturm.beta_star(cfg.tol, cfg.bracket, cfg.n_max, cfg.n_grid)
    write_table(rep.path("beta_star_table.csv"),
                ("beta", "kappa1_n0", "kappa1_min_nonzero", "argmin_n"), rows)
    rep.add()
    rep.add(f"beta* = {res.value:.8f}  bracket=[{res.bracket[0]:.8f}, {res.bracket[1]:.8f}]  "
            f"bisection steps={res.iterations}")
    rep.add(f"crossing mode at beta*+0.01: n = {res.crossing_mode}")
    rep.check(Verdict("beta* vs reference 3.84754", "eq", res.value - 3.84754,
                      max(cfg.tol, 1e-3)))
    rep.check(Verdict("beta* >= 1", "le", res.value - 1.0, 0.0))
    write_table(rep.path("beta_star.csv"), ("beta_star", "lo", "hi", "crossing_mode"),
                [(res.value, res.bracket[0], res.bracket[1], res.crossing_mode)])
    return rep.finish()


# ---------------------------------------------------------------------------
# convergence

def orders(values):
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(np.abs(d[:-1] / d[1:]))


def run_convergence(cfg, out):
    domain, beta = cfg.domains[0], cfg.betas[0]
    rep = Report(out, f"convergence study: {domain.describe()}, beta={beta:g}")
    rows = []
    for h in cfg.h_levels:
        with stage("mesh"):
            mesh = geometry.build_mesh(domain, h)
        lev = _mesh_level(mesh, beta, cfg.n_levels, cfg.n_grid)
        dev = float(np.max(np.abs(lev["G"].G - FOUR_PI)) / FOUR_PI)
        rows.append((h, mesh.nv, lev["lambda"], dev, lev["kappa_G"]))
        rep.add(f"h={h:g}  nv={mesh.nv}  lambda1={lev['lambda']:.10e}  "
                f"|G-4pi|/4pi={dev:.4e}  kappa1(G)={lev['kappa_G']:.10e}")
    write_table(rep.path("convergence_mesh.csv"),
                ("h", "nv", "lambda1", "G_dev", "kappa1_G"), rows)
    lam_orders = orders([r[2] for r in rows])
    for i, p in enumerate(lam_orders):
        rep.check(range_verdict(f"lambda1 order at h={cfg.h_levels[i + 2]:g}", p, *ORDER_RANGE))
    if domain.kind == "disk":
        devs = [r[3] for r in rows]
        for i in range(1, len(devs)):
            rep.check(Verdict(f"disk G deviation decreases at h={cfg.h_levels[i]:g}", "lt",
                              devs[i - 1] - devs[i], 0.0))

    a_star = geometry.area(domain)
    with stage("sturm"):
        ks = [sturm.kappa_disk(beta, a_star, n) for n in cfg.grid_levels]
    write_table(rep.path("convergence_grid.csv"), ("n_grid", "kappa1_4pi"),
                zip(cfg.grid_levels, ks))
    for n, k in zip(cfg.grid_levels, ks):
        rep.add(f"n_grid={n}  kappa1(4pi)={k:.14e}")
    for i, p in enumerate(orders(ks)):
        rep.check(range_verdict(f"kappa1(4pi) grid order at n={cfg.grid_levels[i + 2]}",
                                p, *ORDER_RANGE))
    return rep.finish()


# ---------------------------------------------------------------------------
# monotonicity along convex paths

def _profile_side(text, cfg, a_star):
    """A constant (``4pi``, ``12.5``) or a domain spec whose area profile is computed."""
    try:
        return GProfile.constant_profile(parse_number(text), a_star), None
    except ConfigError:
        pass
    domain = geometry.parse_domain(text)
    with stage("mesh"):
        mesh = geometry.build_mesh(domain, cfg.h[0])
    with stage("torsion"):
        psi = fem.solve_torsion(mesh)
    with stage("levelset"):
        G = levelset.g_profile(levelset.level_profile(psi, cfg.n_levels))
    return G, domain


def _pair_profiles(pair, cfg):
    a_star = cfg.a_star
    sides = []
    for text in pair:
        try:
            parse_number(text)
        except ConfigError:
            with stage("config"):
                a_star = geometry.area(geometry.parse_domain(text))
    for text in pair:
        sides.append(_profile_side(text, cfg, a_star))
    (g0, _), (g1, _) = sides
    if abs(g0.a_star - g1.a_star) > 1e-3 * g0.a_star:
        raise PipelineError("[config] pair profiles live on different areas")
    # a mesh profile carries the polygon area; use it for both sides
    a_star = g1.a_star if not g1.is_constant else g0.a_star
    g0 = GProfile.constant_profile(g0.constant, a_star) if g0.is_constant else g0
    g1 = GProfile.constant_profile(g1.constant, a_star) if g1.is_constant else g1
    return g0, g1, a_star


def run_monotonicity(cfg, out):
    beta = cfg.betas[0]
    rep = Report(out, f"monotonicity along G_z paths, beta={beta:g}")
    for i, pair in enumerate(cfg.pairs):
        g0, g1, a_star = _pair_profiles(pair, cfg)
        path = riccati.ConvexPath(g0, g1, beta, a_star, cfg.n_grid)
        with stage("riccati"):
            sw = riccati.monotonicity_sweep(path, cfg.n_z)
        sw.to_csv(rep.path(f"sweep_{i}.csv"))
        rep.add(f"pair {i}: G0 = {pair[0]}  G1 = {pair[1]}  a*={a_star:.10f}  verdict: {sw.verdict}")
        rep.check(Verdict(f"pair {i}: kappa(z) strictly decreasing", "lt", sw.min_step,
                          sw.tolerance))
        inner = (sw.z > 0) & (sw.z < 1)
        rel = np.abs(sw.kappa_prime_fh - sw.kappa_prime_fd) / np.abs(sw.kappa_prime_fd)
        rep.check(Verdict(f"pair {i}: FH vs FD derivative (z in (0,1))", "le",
                          FH_RTOL - float(np.max(rel[inner])), 0.0))
        below = sw.kappa < beta
        if below.any():
            rep.check(Verdict(f"pair {i}: kappa'(z) < 0 where kappa < beta", "lt",
                              -float(np.max(sw.kappa_prime_fh[below])), 0.0))
        if (~below).any():
            rep.add(f"  kappa >= beta at z = {sw.z[~below].tolist()} (sign check skipped there)")

    spike = riccati.spiked_profile(cfg.a_star)
    with stage("riccati"):
        tr = riccati.truncation_sequence(spike, beta, cfg.truncation_n, n_grid=cfg.n_grid)
        direct = sturm.kappa(spike, beta, cfg.a_star, cfg.n_grid)
    tr.to_csv(rep.path("truncation.csv"))
    rep.add(f"truncation: limit {tr.limit:.12e}, cap clears max G from n = {tr.stabilized_from}")
    rep.check(Verdict("truncation sequence non-increasing", "le",
                      -float(np.max(np.diff(tr.kappa))) + 0.0, tr.tolerance))
    if tr.stabilized_from > 0:
        tail = tr.kappa[tr.n >= tr.stabilized_from]
        rep.check(Verdict("truncation tail equals the uncapped solve", "eq",
                          float(np.max(np.abs(tail - direct))), tr.tolerance))
    return rep.finish()


# ---------------------------------------------------------------------------
# mesh export

def run_mesh_export(cfg, out):
    rep = Report(out, "mesh export")
    rows = []
    for domain in cfg.domains:
        for h in cfg.h:
            with stage("mesh"):
                mesh = geometry.build_mesh(domain, h)
                for _ in range(cfg.refine):
                    mesh = geometry.refine(mesh)
            name = _tag(domain.describe(), f"h{h:g}", f"r{cfg.refine}") + ".mesh"
            geometry.save_mesh(mesh, rep.path(name))
            err = mesh.area - geometry.area(domain)
            rows.append((name, mesh.nv, mesh.nt, len(mesh.boundary_nodes), mesh.h, err))
            rep.add(f"{name}: nv={mesh.nv} nt={mesh.nt} nb={len(mesh.boundary_nodes)} "
                    f"area error={err:.3e} max edge/h={mesh.max_edge_length() / mesh.h:.3f}")
    write_table(rep.path("meshes.csv"), ("file", "nv", "nt", "nb", "h", "area_error"), rows)
    return rep.finish()


COMMANDS = {
    "reverse-fk": run_reverse_fk,
    "beta-star": run_beta_star,
    "convergence": run_convergence,
    "monotonicity": run_monotonicity,
    "mesh-export": run_mesh_export,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="magrfk", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file (defaults apply without one)")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with stage("config"):
            cfg = load_config(args.config)
        code = COMMANDS[args.command](cfg, args.out)
    except PipelineError as exc:
        print(f"magrfk {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    with open(os.path.join(args.out, "report.txt")) as fh:
        sys.stdout.write(fh.read())
    return code


if __name__ == "__main__":
    sys.exit(main())
