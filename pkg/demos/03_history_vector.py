"""Walk through the block layout of a tiny history-vector run.

Every iterate, residual, and restricted residual of the solver occupies
one block of the long vector x; the emulation writes each block with a
single payload-times-source update and must agree with the recording
solver bit for bit.
"""

import numpy as np

from qmglab import MgConfig, ProblemCase, assemble_1d, build_hierarchy, run_qmg, solve
from qmglab.analysis import index_probability

system = assemble_1d(8, ProblemCase(1, 1))
config = MgConfig(num_levels=2, num_cycles=2, nu=2)
hierarchy = build_hierarchy(system, config)
solution, trace = solve(system, config, hierarchy=hierarchy)
x = run_qmg(system, config, hierarchy=hierarchy)

idx = x.indexer
print(f"blocks per cycle = {idx.blocks_per_cycle}, written blocks = {idx.total_written}")
print(f"copies = {idx.copies}, total blocks = {idx.block_count}")
print(f"logical length = {x.logical_length}\n")

print(f"{'block':>6} {'cycle':>6} {'level':>6} {'step':>5} {'kind':>20} {'norm':>12}")
for i in range(idx.total_written + 1):
    cycle, level, step, kind = idx.describe(i)
    norm = float(np.linalg.norm(x.blocks[i]))
    print(f"{i:>6} {cycle:>6} {level:>6} {step:>5} {kind:>20} {norm:>12.4e}")

final_matches = np.array_equal(x.final_block(), solution)
print(f"\nfinal block equals the solver output exactly: {final_matches}")

report = index_probability(x)
print(f"index-window probability p = {report.p_index:.4f} (bound 0.5)")
