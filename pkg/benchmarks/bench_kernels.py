"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Each workload runs once per backend by swapping the functions that
``infsurv._backend`` hands to the rest of the package.
"""

import argparse
import time

import numpy as np

from infsurv import GenConfig, LpProblem, RSFParams, fit_rsf, generate_cox_weibull, solve_lp
from infsurv import _backend, _fallback
from infsurv.explain import ExplainConfig, explain_inf
from infsurv.core import build_time_grid, nelson_aalen
from infsurv.cox import fit_cox

KERNELS = ("logrank_scan", "route_tree", "simplex_core")


def backends():
    out = {"python": _fallback}
    try:
        from infsurv import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out


def activate(module):
    for name in KERNELS:
        setattr(_backend, name, getattr(module, name))


def workloads():
    data = generate_cox_weibull(GenConfig(n=300, seed=0))
    model = fit_cox(data)
    baseline = nelson_aalen(data, build_time_grid(data))
    rng = np.random.default_rng(0)
    lps = []
    for _ in range(20):
        A = rng.normal(size=(10, 6))
        lps.append(LpProblem(-np.abs(rng.normal(size=6)), A, A @ np.full(6, 0.5) + 1.0,
                             upper=np.full(6, 5.0)))
    forest = fit_rsf(data, RSFParams(n_trees=5), seed=0)
    return {
        "rsf fit (10 trees, n=300)": lambda: fit_rsf(data, RSFParams(n_trees=10), seed=1),
        "rsf predict (5 trees, 300 rows x20)": lambda: [forest.predict_chf(data.features)
                                                        for _ in range(20)],
        "lp solve (20 dense 10x6)": lambda: [solve_lp(p) for p in lps],
        "explain (N=1000, Cox)": lambda: explain_inf(model, baseline, data.features[0],
                                                     ExplainConfig(n_neighbors=1000)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    saved = {name: getattr(_backend, name) for name in KERNELS}
    mods = backends()
    jobs = workloads()
    print(f"{'workload':40s}" + "".join(f"{name:>12s}" for name in mods) + f"{'speedup':>10s}")
    try:
        for label, job in jobs.items():
            times = {}
            for name, mod in mods.items():
                activate(mod)
                best = np.inf
                for _ in range(args.repeat):
                    start = time.perf_counter()
                    job()
                    best = min(best, time.perf_counter() - start)
                times[name] = best
            ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{label:40s}" + "".join(f"{t:11.4f}s" for t in times.values()) + f"{ratio:9.1f}x")
    finally:
        for name, fn in saved.items():
            setattr(_backend, name, fn)


if __name__ == "__main__":
    main()
