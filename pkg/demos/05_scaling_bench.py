"""Timing: joint activation vs exhaustive search as the array grows.

The exhaustive baseline enumerates 2^S - 1 subsets, so its wall clock
roughly doubles per added module; the joint method solves one activation
path and grows mildly.
"""

from xlwpt.bench import bench_timing
from xlwpt.scenario import ScenarioConfig

cfg = ScenarioConfig(seed=0)
records, growth = bench_timing(cfg, s_values=(4, 5, 6, 7, 8))

print("%-6s" % "S", "PA-SA [s]", "PA-ES [s]")
for (s, t_sa), (_, t_es) in zip(records["PA-SA"], records["PA-ES"]):
    print("%-6d %9.3f %9.3f" % (s, t_sa, t_es))

print("\nfitted wall-clock growth per added module:")
for method in ("PA-SA", "PA-ES"):
    print("  %-6s x%.2f" % (method, growth[method]))
