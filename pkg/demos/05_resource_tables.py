"""Reproduce the reference resource table and the qubit-overhead sweep.

The encoded length (T + c + 1) N follows from the layout arithmetic
alone; the sweep then re-runs the 1D Dirichlet problem at growing sizes,
stopping each run at 1e-10, and reports how the state-register qubit
count compares with the work-register count.
"""

from qmglab import MgConfig, ProblemCase, assemble_1d, solve
from qmglab.analysis import SweepPoint, converged_cycles, qubit_multiple_series
from qmglab.cases import tables_report

print("reference targets versus computed values")
print(f"{'case':>8} {'N':>7} {'len(x)':>10} {'match':>6} {'log2N':>6} {'log2len':>8}")
for row in tables_report():
    label = f"{row['dimension']}D-{row['case_id']}"
    flag = "yes" if row["len_x_match"] and row["n_match"] else "NO"
    print(
        f"{label:>8} {row['n']:>7} {row['len_x']:>10} {flag:>6} "
        f"{row['log2_n']:>6} {row['log2_len']:>8}"
    )
    for note in row["errata"].values():
        print(f"         note: {note}")

print("\nqubit overhead sweep, 1D Dirichlet, each size run to 1e-10")
points = []
for power in range(5, 14):
    n_elements = 1 << power
    system = assemble_1d(n_elements, ProblemCase(1, 1))
    config = MgConfig(num_levels=power, num_cycles=32, nu=6)
    _, trace = solve(system, config)
    used = converged_cycles(trace, 1e-10)
    points.append(
        SweepPoint(
            n=system.free_dof_count,
            cal_L=power - 1,
            nu=6,
            cycles_used=used,
            epsilon_tilde=trace.errors[used - 1],
        )
    )

print(f"{'N':>6} {'cycles':>7} {'len(x)':>10} {'q_work':>7} {'q_state':>8} {'ratio':>7}")
for row in qubit_multiple_series(points):
    print(
        f"{row['n']:>6} {row['cycles_used']:>7} {row['len_x']:>10} "
        f"{row['qubits_work']:>7} {row['qubits_state']:>8} {row['ratio']:>7.3f}"
    )
