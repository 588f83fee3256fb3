"""Time the numba and numpy variants of the two hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--h 0.02] [--repeat 5]

Both variants are called directly, so the MAGRFK_NUMBA flag does not matter
here. The first numba call (compilation or cache load) is excluded.
"""
import argparse
import timeit

import numpy as np

from magrfk import _accel, fem, geometry, kernels


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--h", type=float, default=0.02)
    ap.add_argument("--levels", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    mesh = geometry.build_mesh(geometry.disk(1.0), args.h)
    area, grad = kernels.triangle_geometry(mesh.vertices, mesh.triangles)
    A = fem.vector_potential_standard(mesh).values
    psi = fem.solve_torsion(mesh)
    vals = np.ascontiguousarray(psi.values[mesh.triangles])
    pts = np.ascontiguousarray(mesh.vertices[mesh.triangles])
    gnorm = np.linalg.norm(psi.gradient(), axis=1)
    thr = np.linspace(psi.max * (1 - 1e-3), psi.max * 1e-3, args.levels)

    cases = {
        "magnetic_local": (kernels._magnetic_local_nb, kernels._magnetic_local_np,
                           (area, grad, A, 1.0)),
        "slice_levels": (kernels._slice_levels_nb, kernels._slice_levels_np,
                         (vals, pts, gnorm, area, thr)),
    }
    print(f"disk mesh h={args.h}: {mesh.nv} vertices, {mesh.nt} triangles, "
          f"{args.levels} levels, numba available: {_accel.HAVE_NUMBA}")
    print(f"{'kernel':16s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}  max|diff|")
    for name, (nb, npy, a) in cases.items():
        out_nb = nb(*a)  # warm-up
        out_np = npy(*a)
        diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y))))
                   for x, y in zip(out_nb, out_np))
        t_nb = best(lambda: nb(*a), args.repeat)
        t_np = best(lambda: npy(*a), args.repeat)
        print(f"{name:16s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:8.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
