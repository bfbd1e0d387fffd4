"""Chained V-cycles on the 1D Dirichlet problem, with the error series.

The solver smooths with the normalized relaxation (I - A) v + f at every
level and treats the coarsest grid by smoothing alone, so each cycle is a
fixed sequence of affine updates.  The per-cycle relative error against a
direct-solve reference contracts at a steady rate.
"""

from qmglab import MgConfig, ProblemCase, assemble_1d, solve

system = assemble_1d(1024, ProblemCase(1, 1))
config = MgConfig(num_levels=9, num_cycles=14, nu=6)
solution, trace = solve(system, config)

print(f"N = {system.free_dof_count}, levels = {config.num_levels}, nu = {config.nu}")
print(f"{'cycle':>6} {'relative error':>16} {'ratio':>8}")
prev = 1.0
for cycle, eps in trace.epsilon_series():
    print(f"{cycle:>6} {eps:>16.3e} {eps / prev:>8.3f}")
    prev = eps

reached = next(c for c, e in trace.epsilon_series() if e <= 1e-10)
print(f"\nreached 1e-10 after {reached + 1} cycles")
