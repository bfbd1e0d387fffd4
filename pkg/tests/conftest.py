"""Shared fixtures: reduced-size runs of all seven benchmark cases."""

from types import SimpleNamespace

import numpy as np
import pytest

from qmglab import MgConfig, build_hierarchy, run_qmg, solve
from qmglab.cases import REDUCED_CASES, assemble_case

REDUCED_CYCLES = 12
REDUCED_NU = 6


def run_reduced_case(dim, case_id, v0=None, cycles=REDUCED_CYCLES, elements=None, levels=None):
    """Solve one benchmark case at its reduced size and emulate the history."""
    default_elements, default_levels = REDUCED_CASES[(dim, case_id)]
    system = assemble_case(dim, case_id, elements or default_elements)
    config = MgConfig(
        num_levels=levels or default_levels, num_cycles=cycles, nu=REDUCED_NU
    )
    hierarchy = build_hierarchy(system, config)
    solution, trace = solve(system, config, v0=v0, hierarchy=hierarchy)
    x = run_qmg(system, config, v0=v0, hierarchy=hierarchy)
    return SimpleNamespace(
        dim=dim,
        case_id=case_id,
        system=system,
        config=config,
        hierarchy=hierarchy,
        solution=solution,
        trace=trace,
        x=x,
    )


@pytest.fixture(scope="session")
def reduced_runs():
    """Zero-initial-guess reduced runs of all seven cases, solved and emulated."""
    return {
        key: run_reduced_case(*key) for key in sorted(REDUCED_CASES)
    }


def iterate_block_pairs(run):
    """Yield (block index, history block, trace entry) over every slot."""
    indexer = run.x.indexer
    nu = indexer.nu
    for cycle in range(indexer.cal_V + 1):
        for level in range(indexer.cal_L + 1):
            for step in range(2 * nu):
                idx = (
                    indexer.i_pre(cycle, level, step)
                    if step < nu
                    else indexer.i_post(cycle, level, step)
                )
                yield idx, run.x.blocks[idx], run.trace.iterate(cycle, level, step)
            if level < indexer.cal_L:
                r, rc = run.trace.residual_pair(cycle, level)
                yield (
                    indexer.i_pre(cycle, level, nu),
                    run.x.blocks[indexer.i_pre(cycle, level, nu)],
                    r,
                )
                yield (
                    indexer.i_pre(cycle, level, nu + 1),
                    run.x.blocks[indexer.i_pre(cycle, level, nu + 1)],
                    rc,
                )


def max_relative_block_error(run):
    worst = 0.0
    for _, got, expected in iterate_block_pairs(run):
        scale = max(float(np.linalg.norm(expected)), 1e-300)
        worst = max(worst, float(np.linalg.norm(got - expected)) / scale)
    return worst
