"""Compiled-vs-numpy kernel benchmark on a realistic likelihood workload.

Builds a simulated four-armed dataset, extracts the likelihood context the
sampler uses, and times each kernel under both implementations on identical
buffers. Parity is asserted before timing; a speedup table goes to stdout.

Run:  python3 benchmarks/bench_kernels.py [--subjects 30] [--reps 200]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from banditlab import _ckernels, _pykernels
from banditlab.choicemodels import Model
from banditlab.domain import restless4_spec, stationary2_spec
from banditlab.estim.contexts import build_context
from banditlab.runner import RunPlan, run


def bench(fn, args, reps: int) -> float:
    """Median seconds per call."""
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def sm_args(ctx, rng):
    n = ctx.n_subjects
    a = ctx.arrays
    return (
        rng.uniform(0.05, 0.5, n),
        rng.normal(0.5, 0.3, n),
        rng.normal(2.0, 1.0, n),
        a["Q"],
        a["S"],
        a["prev"],
        a["choice"],
        ctx.offsets,
    )


def probit_args(ctx, rng):
    n = ctx.n_subjects
    a = ctx.arrays
    return (
        rng.uniform(0.5, 2.0, n),
        rng.normal(0.0, 0.5, n),
        rng.normal(0.0, 0.5, n),
        a["V"],
        a["RU"],
        a["VTU"],
        a["chose_first"],
        ctx.offsets,
    )


def qcare_args(ctx, rng):
    n = ctx.n_subjects
    a = ctx.arrays
    return (
        rng.uniform(0.1, 1.0, n),
        a["dmu"],
        a["n_first"],
        a["n_second"],
        a["chose_first"],
        a["include"],
        ctx.offsets,
    )


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--subjects", type=int, default=30)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)

    rest = run(
        RunPlan(
            env_spec=restless4_spec(),
            agent_kind="sm3",
            agent_params={"beta": 0.2, "phi": 0.9, "rho": 5.0},
            n_trials=args.subjects,
            trials_per_subject=1,
            master_seed=args.seed,
        )
    )
    stat = run(
        RunPlan(
            env_spec=stationary2_spec(),
            agent_kind="ts",
            n_trials=args.subjects * 20,
            trials_per_subject=20,
            master_seed=args.seed,
        )
    )

    cases = [
        ("sm_loglik  (4-armed)", "sm_loglik", build_context(Model.SM3, rest), sm_args),
        ("sm_loglik  (2-armed)", "sm_loglik", build_context(Model.SM3, stat), sm_args),
        ("probit_loglik", "probit_loglik", build_context(Model.PROBIT, stat), probit_args),
        ("qcare_loglik", "qcare_loglik", build_context(Model.QCARE, stat), qcare_args),
    ]

    if _ckernels.IMPL == _pykernels.IMPL:
        raise SystemExit("compiled kernels unavailable; nothing to compare")

    print(f"{args.subjects} subjects, median of {args.reps} calls\n")
    print(f"{'kernel':<22} {'rows':>7} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for label, name, ctx, make in cases:
        call_args = make(ctx, rng)
        fast = getattr(_ckernels, name)(*call_args)
        slow = getattr(_pykernels, name)(*call_args)
        if not np.allclose(fast, slow, rtol=1e-10, atol=1e-10):
            raise SystemExit(f"parity failure in {name}")
        t_slow = bench(getattr(_pykernels, name), call_args, args.reps)
        t_fast = bench(getattr(_ckernels, name), call_args, args.reps)
        rows = int(ctx.offsets[-1])
        print(
            f"{label:<22} {rows:>7} {t_slow * 1e3:>9.3f}ms {t_fast * 1e3:>9.3f}ms "
            f"{t_slow / t_fast:>7.1f}x"
        )


if __name__ == "__main__":
    main()
