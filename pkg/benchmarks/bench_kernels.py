"""Benchmark the compiled path kernels against the NumPy fallback.

Runs each kernel entry point on identical inputs through both backends,
checks agreement, and reports best-of-k wall times with the speedup
factor. Usage:

    python3 benchmarks/bench_kernels.py [--paths 20000] [--substeps 64]
                                        [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import driftbayes as db
from driftbayes import _kernels
from driftbayes._kernels import fallback


def specs():
    tab_grid = np.linspace(-6.0, 6.0, 65)
    return [
        ("linear d=1", db.ou_spec(1.0)),
        ("tabulated d=1", db.DriftSpec(
            dim=1,
            form=db.TabulatedForm(tuple(tab_grid),
                                  (tuple(-np.tanh(tab_grid) - 0.3 * tab_grid),)),
            growth_K=2.0, dissipativity=db.Dissipativity(0.1, 1.0))),
        ("radial d=2", db.DriftSpec(
            dim=2, form=db.PotentialForm(db.sqrt_blend_profile([1.0, 0.3])),
            growth_K=1.5, dissipativity=db.Dissipativity(0.5, 1.0, 2.0))),
    ]


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_case(label, spec, n_paths, substeps, repeat):
    desc = spec.kernel_descriptor()
    kind, params, grid, values = desc
    rng = np.random.default_rng(8)
    dt = 0.5 / substeps
    x0 = rng.standard_normal((n_paths, spec.dim))
    incs = rng.standard_normal((n_paths, substeps, spec.dim)) * np.sqrt(dt)

    entry_points = [
        ("euler_endpoints",
         lambda: _kernels._core.euler_endpoints(
             kind, params, grid, values, x0, dt, incs),
         lambda: fallback.euler_endpoints(
             kind, params, grid, values, x0, dt, incs)),
        ("girsanov_log_weights",
         lambda: _kernels._core.girsanov_log_weights(
             kind, params, grid, values, x0, dt, incs),
         lambda: fallback.girsanov_log_weights(
             kind, params, grid, values, x0, dt, incs)),
    ]
    rows = []
    for name, compiled_fn, fallback_fn in entry_points:
        t_fb, out_fb = best_of(fallback_fn, repeat)
        if _kernels._core is None:
            rows.append((label, name, None, t_fb, None))
            continue
        t_c, out_c = best_of(compiled_fn, repeat)
        err = float(np.max(np.abs(np.asarray(out_c) - np.asarray(out_fb))))
        scale = max(1.0, float(np.max(np.abs(out_fb))))
        if err > 1e-9 * scale:
            raise SystemExit(f"backend mismatch in {label}/{name}: {err}")
        rows.append((label, name, t_c, t_fb, t_fb / t_c))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--substeps", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    print(f"active backend: {_kernels.backend_name}")
    if _kernels._core is None:
        print("compiled extension unavailable; timing the fallback only")
    print(f"paths={args.paths} substeps={args.substeps} "
          f"(best of {args.repeat})\n")
    header = (f"{'drift':<14} {'kernel':<22} {'compiled':>10} "
              f"{'fallback':>10} {'speedup':>8}")
    print(header)
    print("-" * len(header))
    for label, spec in specs():
        for row in run_case(label, spec, args.paths, args.substeps,
                            args.repeat):
            _, name, t_c, t_fb, ratio = row
            t_c_s = f"{t_c * 1e3:8.1f}ms" if t_c is not None else "       --"
            ratio_s = f"{ratio:7.1f}x" if ratio is not None else "      --"
            print(f"{label:<14} {name:<22} {t_c_s:>10} "
                  f"{t_fb * 1e3:8.1f}ms {ratio_s:>8}")


if __name__ == "__main__":
    main()
