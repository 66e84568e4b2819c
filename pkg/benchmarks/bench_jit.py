"""Wall time of the numba kernels against the pure-numpy fallback.

Each backend runs in its own process because AFFROLL_DISABLE_JIT is read at
import time.  Usage: python3 benchmarks/bench_jit.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = """
import json, sys, time
import affroll
from affroll import scenario as sc
from affroll.integrate import integrate

cases = {"fig5_eps2 reduced, t in [0, 20]": ("fig5_eps2", 20.0),
         "fig6_E-8 homsphere, t in [0, 50]": ("fig6_E-8", 50.0)}
out = {"backend": affroll.backend_name(), "cases": {}}
for label, (name, t1) in cases.items():
    s = sc.preset(name)
    p = sc.build_params(s)
    system = sc.build_system(s, p)
    y0 = sc.initial_state(s, p)
    opts = sc.integrator_options(s)
    t0 = time.perf_counter()
    integrate(system, y0, (0.0, 0.01), opts)
    warm = time.perf_counter() - t0
    best = float("inf")
    for _ in range(int(sys.argv[1])):
        t0 = time.perf_counter()
        tr = integrate(system, y0, (0.0, t1), opts)
        best = min(best, time.perf_counter() - t0)
    out["cases"][label] = {"first_call_s": warm, "best_s": best, "steps": len(tr) - 1}
print(json.dumps(out))
"""


def run_backend(disable, repeat):
    env = dict(os.environ)
    env.pop("AFFROLL_DISABLE_JIT", None)
    if disable:
        env["AFFROLL_DISABLE_JIT"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], capture_output=True, text=True, env=env,
                         check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit = run_backend(False, args.repeat)
    ref = run_backend(True, args.repeat)
    print(f"{'case':36s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s} {'steps':>7s} {'compile s':>10s}")
    for label, a in jit["cases"].items():
        b = ref["cases"][label]
        print(f"{label:36s} {a['best_s']:10.3f} {b['best_s']:10.3f} {b['best_s'] / a['best_s']:8.1f} "
              f"{a['steps']:7d} {a['first_call_s']:10.2f}")
    if jit["backend"] != "numba":
        print("numba is not importable here; both columns ran the numpy fallback")


if __name__ == "__main__":
    main()
