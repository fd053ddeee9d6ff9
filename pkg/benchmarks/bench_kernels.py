"""Time the numba kernels against their numpy twins, plus one full solver step.

    python3 benchmarks/bench_kernels.py --n 64 --repeat 20

The step timing uses whichever kernel set is active; run once with
``MPS_NUMBA=0`` to time the numpy path end to end.
"""

import argparse
import time

import numpy as np

from micropolar import kernels
from micropolar import solver as sv
from micropolar.grid import WaveGrid
from micropolar.initial_data import ProfileParams, build_a0, default_box


def best_of(fn, repeat):
    fn()  # warm-up (and numba compile)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n, rng):
    g = WaveGrid((n, n, n))
    k1, k2, k3 = g.wavenumbers
    half = g.half_shape

    def cplx(lead):
        return rng.standard_normal((lead,) + half) + 1j * rng.standard_normal((lead,) + half)

    v, c = cplx(3), cplx(3)
    t6, t9 = cplx(6), cplx(9)
    mask = np.ascontiguousarray(g.dealias_mask * g.nyquist_mask)
    coef = np.ascontiguousarray(sv.propagator_coefficients(g.ksq, 1e-3))
    return {
        "leray": (v, k1, k2, k3),
        "sym_tensor_div": (t6, k1, k2, k3, mask),
        "tensor_div": (t9, k1, k2, k3, mask),
        "apply_propagator": (v, c, coef, k1, k2, k3),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--steps", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = kernel_cases(args.n, rng)
    print(f"grid {args.n}^3, best of {args.repeat}")
    print(f"{'kernel':18s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, call_args in cases.items():
        t_np = best_of(lambda: kernels.NUMPY_KERNELS[name](*call_args), args.repeat)
        if kernels.NUMBA_KERNELS:
            t_nb = best_of(lambda: kernels.NUMBA_KERNELS[name](*call_args), args.repeat)
            print(f"{name:18s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.2f}")
        else:
            print(f"{name:18s} {1e3 * t_np:10.2f} {'n/a':>10s}")

    eps = 0.25
    grid = WaveGrid((args.n,) * 3, default_box(eps))
    a0 = build_a0(ProfileParams(eps), grid)
    cfg = sv.SolverConfig(dt=1e-3, t_end=1.0)
    zero = np.zeros((3,) + grid.half_shape, dtype=np.complex128)
    active = "numba" if kernels.USE_NUMBA else "numpy"
    for label, system in (
        ("full", sv.FullSystem(grid)),
        ("perturbation", sv.PerturbationSystem(grid, sv.AuxiliaryFields(a0))),
    ):
        integ = sv.Integrator(system, cfg)
        t = best_of(lambda: integ.step(zero, zero, 0.0, cfg.dt), args.steps)
        print(f"step {label:13s} {1e3 * t:10.1f} ms ({active} kernels)")


if __name__ == "__main__":
    main()
