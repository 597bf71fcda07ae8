"""Compare the compiled and numpy pair kernels.

Times full single-layer assembly on the sphere with both backends and checks
that they agree. Usage::

    python benchmarks/bench_kernels.py --degree 1 --level 2 --repeat 3
"""

import argparse
import time

import numpy as np

from aefie import kernels
from aefie.geometry import sphere
from aefie.operators import Assembler, Frequency, QuadratureSettings
from aefie.spaces import Mesh, SpaceKind, build_space


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _micro(backend, repeat, rng):
    K, Q, n = 200, 16, 4
    X1, X2 = rng.normal(size=(K, Q, 3)), rng.normal(size=(K, Q, 3)) + 4.0
    VL1, VL2 = rng.normal(size=(K, Q, n, 3)), rng.normal(size=(K, Q, n, 3))
    VP1, VP2 = rng.normal(size=(K, Q, 1, 1)), rng.normal(size=(K, Q, 1, 1))
    fn = kernels.get_backend(backend)[0]
    return _time(lambda: fn(X1, X2, VL1, VL2, VP1, VP2, 0.7), repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--degree", type=int, default=1)
    ap.add_argument("--level", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy fallback only")

    geo = sphere()
    mesh = Mesh(geo, args.level)
    f1 = build_space(SpaceKind.FORM1, geo, args.degree, args.level, mesh=mesh)
    f2 = build_space(SpaceKind.FORM2, geo, args.degree, args.level, mesh=mesh)
    settings = QuadratureSettings().resolved(args.degree)
    kappa = Frequency(3e6).wavenumber()
    rng = np.random.default_rng(0)

    print(f"sphere p={args.degree} level={args.level}: N_j={f1.dim} N_phi={f2.dim}, best of {args.repeat}")
    print(f"{'backend':<8} {'kernel [ms]':>12} {'assembly [s]':>13}")
    results = {}
    for name in backends:
        t_micro, _ = _micro(name, args.repeat, rng)
        asm = Assembler(f1, f2, settings, backend=name)
        t_asm, results[name] = _time(lambda: asm.assemble(kappa), args.repeat)
        print(f"{name:<8} {1e3 * t_micro:12.2f} {t_asm:13.3f}")
    if len(results) == 2:
        (Lp, Pp), (Lc, Pc) = results["python"], results["cython"]
        dev = max(np.linalg.norm(Lc - Lp) / np.linalg.norm(Lp), np.linalg.norm(Pc - Pp) / np.linalg.norm(Pp))
        print(f"relative Frobenius deviation between backends: {dev:.1e}")


if __name__ == "__main__":
    main()
