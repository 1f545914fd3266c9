"""Benchmark the compiled kernels against the NumPy fallback.

Runs each hot kernel on identical inputs under every available backend and
reports per-call wall time plus the speedup of the compiled path.  End-to-end
generator timings (which include RNG draws and Python-side plumbing) are
included so the kernel share of total cost is visible.

Usage:
    python3 benchmarks/benchmark_backends.py [--n 200000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from spcelab.backend import available_backends
from spcelab.contextual import CapDistribution, ExperimentSetting, sample_contextual_trials
from spcelab.directions import Direction, orthonormal_frame
from spcelab.lrhv import SphereEnsemble, DeterministicSignResponse, sample_series
from spcelab.quantum import build_singlet, sample_trials
from spcelab.streams import DOMAIN_SIMULATE, substream


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(mod, n, rng):
    u = rng.random((n, 2))
    u_z = np.ascontiguousarray(u[:, 0])
    u_phi = np.ascontiguousarray(u[:, 1])
    out3 = np.empty((n, 3))
    frame = orthonormal_frame(np.array([0.0, 0.0, 1.0]))
    cos_theta = 1.0 - 0.05 * rng.random(n)
    dots = 2.0 * rng.random(n) - 1.0
    u_sel = rng.random(n)
    x = np.empty(n, dtype=np.int8)
    y = np.empty(n, dtype=np.int8)
    lams = rng.normal(size=(n, 3))
    lams /= np.linalg.norm(lams, axis=1, keepdims=True)
    lams = np.ascontiguousarray(lams)
    a = np.array([0.0, 0.0, 1.0])
    b = np.array([np.sin(np.pi / 4), 0.0, np.cos(np.pi / 4)])
    dirs_a = np.tile(a, (4, 1))
    dirs_b = np.tile(b, (4, 1))
    counts = np.zeros((4, 2, 2), dtype=np.int64)
    frame_b = orthonormal_frame(b)
    cos_b = 1.0 - 0.05 * rng.random(n)
    uphi_a = rng.random(n)
    uphi_b = rng.random(n)
    u_out = rng.random(n)
    out_dots = np.empty(n)
    return {
        "sphere_directions": lambda: mod.sphere_directions(u_z, u_phi, out3),
        "cap_directions": lambda: mod.cap_directions(frame, cos_theta, u_phi, out3),
        "row_dots": lambda: mod.row_dots(out3, out3, out_dots),
        "singlet_pair_outcomes": lambda: mod.singlet_pair_outcomes(dots, u_sel, x, y),
        "sign_outcomes": lambda: mod.sign_outcomes(lams, a, b, x, y),
        "sign_tally": lambda: mod.sign_tally(lams, dirs_a, dirs_b, counts),
        "contextual_outcomes": lambda: mod.contextual_outcomes(
            frame, cos_theta, uphi_a, frame_b, cos_b, uphi_b, u_out, x, y
        ),
    }


def end_to_end_cases(n):
    a = Direction.from_polar_deg(0.0)
    b = Direction.from_polar_deg(45.0)
    setting = ExperimentSetting(CapDistribution(a, 0.05), CapDistribution(b, 0.05))
    state = build_singlet()
    return {
        "sample_trials (quantum)": lambda: sample_trials(
            state, a, b, n, substream(1, DOMAIN_SIMULATE)
        ),
        "sample_contextual_trials": lambda: sample_contextual_trials(
            setting, n, substream(2, DOMAIN_SIMULATE)
        ),
        "sample_series (lrhv iid)": lambda: sample_series(
            SphereEnsemble(), DeterministicSignResponse(), a, b, n, substream(3, DOMAIN_SIMULATE)
        ),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=200_000, help="rows per kernel call")
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions (best taken)")
    args = parser.parse_args()

    backends = available_backends()
    names = list(backends)
    print(f"backends: {', '.join(names)}   n = {args.n}   repeat = {args.repeat}")
    print()
    header = f"{'kernel':28s}" + "".join(f"{name:>14s}" for name in names)
    if len(names) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))

    rng_seed = 12345
    per_backend = {
        name: kernel_cases(mod, args.n, np.random.default_rng(rng_seed))
        for name, mod in backends.items()
    }
    for kernel in next(iter(per_backend.values())):
        times = [timeit(per_backend[name][kernel], args.repeat) for name in names]
        row = f"{kernel:28s}" + "".join(f"{t * 1e3:11.2f} ms" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:9.1f}x"
        print(row)

    print()
    print("end-to-end generators (active backend only):")
    for label, fn in end_to_end_cases(args.n).items():
        t = timeit(fn, args.repeat)
        print(f"  {label:30s}{t * 1e3:11.2f} ms")


if __name__ == "__main__":
    main()
