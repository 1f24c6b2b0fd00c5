"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--cells 200 800 3200] [--repeat 5]

Prints per-call times for each kernel and the time of a short second-order
porous-media run with each backend swapped in.
"""

import argparse
import timeit

import numpy as np

from fvdegen import _pykernels, kernels
from fvdegen import model as M
from fvdegen import solver as S
from fvdegen.flux import FluxScheme
from fvdegen.mesh import build_cartesian, build_uniform_1d

try:
    from fvdegen import _ckernels
except ImportError:
    _ckernels = None

KERNELS = ("fu_linear", "muscl_traces", "divergence")


def _inputs(rows, n, seed=0):
    rng = np.random.default_rng(seed)
    ue = rng.uniform(0, 2, (rows, n + 4))
    ue[rng.uniform(size=ue.shape) < 0.2] = 0.0
    he = np.ascontiguousarray(np.log1p(ue[:, 1 : n + 3]))
    dV = rng.normal(size=(rows, n + 1))
    dist = np.full(n + 1, 1.0 / n)
    bufs = [np.empty((rows, n + 1)) for _ in range(4)]
    return ue, he, dV, dist, bufs


def time_kernels(mod, rows, n, repeat):
    ue, he, dV, dist, (F, A, um, up) = _inputs(rows, n)
    width = np.full(n, 1.0 / n)
    out = np.zeros((rows, n))
    calls = {
        "fu_linear": lambda: mod.fu_linear(ue, he, dV, dist, True, F, A, um, up),
        "muscl_traces": lambda: mod.muscl_traces(ue, um, up),
        "divergence": lambda: mod.divergence(F, width, out),
    }
    res = {}
    for name, fn in calls.items():
        number = max(1, 200_000 // (rows * n))
        res[name] = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
    return res


def time_run(mod, n, steps):
    for name in KERNELS:
        setattr(kernels, name, getattr(mod, name))
    ax = build_uniform_1d(-2, 2, n)
    mesh = build_cartesian([ax, ax])
    u0 = S.project_initial(lambda x, y: np.maximum(1 - x * x - y * y, 0.0), mesh)
    cfg = S.SolverConfig(FluxScheme.parse("fu2"), dt=1e-5, t_final=steps * 1e-5)
    start = timeit.default_timer()
    res = S.run(cfg, M.porous_media(3.0), mesh, S.neumann(), u0, record=False)
    return timeit.default_timer() - start, res.final.values


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cells", type=int, nargs="+", default=[200, 800, 3200])
    p.add_argument("--rows", type=int, default=1)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--run-cells", type=int, default=64, help="cells per axis of the 2D run")
    p.add_argument("--run-steps", type=int, default=200)
    args = p.parse_args(argv)

    if _ckernels is None:
        print("compiled extension not built; only the numpy backend is available")
        return 1
    backends = {"cython": _ckernels, "python": _pykernels}

    print(f"{'kernel':<14}{'cells':>8}{'cython [us]':>14}{'python [us]':>14}{'speedup':>10}")
    for n in args.cells:
        times = {b: time_kernels(m, args.rows, n, args.repeat) for b, m in backends.items()}
        for name in KERNELS:
            c, py = times["cython"][name], times["python"][name]
            print(f"{name:<14}{n:>8}{c * 1e6:>14.2f}{py * 1e6:>14.2f}{py / c:>10.2f}")

    original = {name: getattr(kernels, name) for name in KERNELS}
    try:
        runs = {b: time_run(m, args.run_cells, args.run_steps) for b, m in backends.items()}
    finally:
        for name, fn in original.items():
            setattr(kernels, name, fn)
    same = np.array_equal(runs["cython"][1], runs["python"][1])
    print(f"\nfu2 run, {args.run_cells}x{args.run_cells} cells, {args.run_steps} steps:")
    for b, (sec, _) in runs.items():
        print(f"  {b:<7}{sec:8.3f} s")
    print(f"  speedup {runs['python'][0] / runs['cython'][0]:.2f}, identical results: {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
