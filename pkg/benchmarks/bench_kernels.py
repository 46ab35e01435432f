"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 20]

Inputs match a 10x10 RIS with the default dictionary (1324 columns) and a
15-cycle protocol run.
"""
import argparse
import timeit

import numpy as np

from unifloc import _kernels_py
from unifloc.dictionary import GridSpec, build_angle_grid, choose_ff_reference_range
from unifloc.geometry import RisGeometry

try:
    from unifloc import _kernels as compiled
except ImportError:
    compiled = None


def _cases(rng):
    geom = RisGeometry.square(10)
    y, z = np.ascontiguousarray(geom.y), np.ascontiguousarray(geom.z)
    spec = GridSpec()
    angles = build_angle_grid(spec)
    r0 = choose_ff_reference_range(geom, spec)
    R = np.repeat(np.linspace(10 * geom.wavelength, r0, 40), len(angles))
    th = np.tile(angles[:, 0], 40)
    ph = np.tile(angles[:, 1], 40)

    C, k = 1324, 15
    AT = np.ascontiguousarray(rng.normal(size=(C, k)) + 1j * rng.normal(size=(C, k)))
    g = rng.normal(size=k) + 1j * rng.normal(size=k)

    N, P = geom.n_elements, 3
    ds = np.ascontiguousarray(rng.normal(size=(P, N)) + 1j * rng.normal(size=(P, N)))
    hist = np.exp(2j * np.pi * rng.random((5, N)))
    M = hist @ ds.T
    J = np.ascontiguousarray((M.conj().T @ M).real)
    beta = np.exp(2j * np.pi * rng.random(N))
    w = np.ones(P)
    f0, _ = _kernels_py.crb_objective(ds, J, beta, w, 0.0, 2.0)
    return {
        "max_phase_errors (4000 pts)": ("max_phase_errors", (y, z, geom.wavelength, R, th, ph)),
        "column_losses (1324 x 15)": ("column_losses", (AT, g, 1224)),
        "crb_objective (N=100)": ("crb_objective", (ds, J, beta, w, 0.0, 2.0)),
        "crb_gradient (N=100)": ("crb_gradient", (ds, J, beta, w, 0.0, 2.0)),
        "riemannian_descent (N=100)": ("riemannian_descent",
                                       (ds, J, beta, w, 0.0, 2.0, 1e12, f0, 0.0, 50,
                                        1.0, 0.5, 1e-4, 60)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':32s} {'python [us]':>12s} {'compiled [us]':>14s} {'speedup':>8s}")
    for label, (name, call_args) in cases.items():
        py = getattr(_kernels_py, name)
        n = max(1, int(0.2 / max(timeit.timeit(lambda: py(*call_args), number=1), 1e-7)))
        t_py = min(timeit.repeat(lambda: py(*call_args), number=n, repeat=args.repeat)) / n
        if compiled is None:
            print(f"{label:32s} {t_py * 1e6:12.1f} {'n/a':>14s} {'':>8s}")
            continue
        cc = getattr(compiled, name)
        t_c = min(timeit.repeat(lambda: cc(*call_args), number=n, repeat=args.repeat)) / n
        print(f"{label:32s} {t_py * 1e6:12.1f} {t_c * 1e6:14.1f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
