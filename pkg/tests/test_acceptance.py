"""Acceptance suite: one test per exit criterion, printing PASS/FAIL lines.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
summary lines.
"""

import numpy as np

from qmglab.analysis import (
    SweepPoint,
    ceil_log2,
    converged_cycles,
    index_probability,
    qubit_multiple_series,
)
from qmglab.blockenc import apply_encoded, dilate, product_encoding, tiny_end_to_end
from qmglab.cases import REDUCED_CASES, REFERENCE_CASES, assemble_case, history_length
from qmglab.fem import ProblemCase, assemble_1d, assemble_2d, exact_solution_1d
from qmglab.multigrid import MgConfig, build_hierarchy, reference_solution, solve
from conftest import max_relative_block_error, run_reduced_case

import scipy.sparse.linalg as spla


def _verdict(number: int, description: str, ok: bool) -> None:
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {description}")
    assert ok, f"criterion {number} failed: {description}"


def test_criterion_1_table_reproduction():
    expected_len = {
        (1, 1): 46926239,
        (1, 2): 50601984,
        (2, 1): 79693389,
        (2, 2): 55603648,
        (2, 3): 72156955,
        (2, 4): 35803136,
        (2, 5): 36362560,
    }
    ok = True
    for key, cfg in REFERENCE_CASES.items():
        system = assemble_case(*key)
        n = system.free_dof_count
        ok &= n == cfg.target_n
        got = history_length(cfg.levels, cfg.cycles, cfg.nu, n)
        ok &= got == expected_len[key] == cfg.target_len
        ok &= ceil_log2(n) == cfg.target_log2_n
        ok &= ceil_log2(got) == cfg.target_log2_len
    # two published cells contradict their own row's N and are stored as
    # errata: the ceil(log2 N) values of 2D cases 2 and 3 read 14 and 13
    # in the source table but compute to 13 and 14
    ok &= REFERENCE_CASES[(2, 2)].target_log2_n == 13
    ok &= REFERENCE_CASES[(2, 3)].target_log2_n == 14
    ok &= "log2_n" in REFERENCE_CASES[(2, 2)].errata
    ok &= "cycles" in REFERENCE_CASES[(2, 5)].errata
    _verdict(1, "all seven encoded lengths and qubit columns reproduced", ok)


def test_criterion_2_oracle_equivalence(reduced_runs):
    worst = 0.0
    for key, run in reduced_runs.items():
        worst = max(worst, max_relative_block_error(run))
    ok = worst <= 1e-12
    _verdict(
        2,
        f"history blocks match the solver trace (worst rel err {worst:.2e})",
        ok,
    )


def test_criterion_3_zero_guess_probability_bound(reduced_runs):
    ok = True
    observed = []
    for key, run in reduced_runs.items():
        errors = [e for e in run.trace.errors if e > 1e-11]
        monotone = all(b <= a for a, b in zip(errors, errors[1:]))
        p = index_probability(run.x).p_index
        observed.append(p)
        ok &= monotone and p >= 0.5
    _verdict(
        3,
        f"zero-guess window probability >= 1/2 on all cases (min {min(observed):.3f})",
        ok,
    )


def test_criterion_4_initial_error_probability_bound():
    ok = True
    rng = np.random.default_rng(7)
    for (dim, case_id), (elements, levels) in REDUCED_CASES.items():
        small = tuple(max(e // 2, 4) for e in elements)
        run0 = run_reduced_case(dim, case_id, elements=small, levels=levels - 1, cycles=10)
        reference = reference_solution(run0.hierarchy, run0.config)
        direction = rng.normal(size=reference.shape[0])
        direction /= np.linalg.norm(direction)
        for frac in (0.1, 0.5, 0.9):
            eps = frac * np.linalg.norm(reference)
            v0 = reference + eps * direction
            run = run_reduced_case(
                dim, case_id, v0=v0, elements=small, levels=levels - 1, cycles=10
            )
            errors = [e for e in run.trace.errors if e > 1e-11]
            monotone = all(b <= a for a, b in zip(errors, errors[1:]))
            report = index_probability(run.x, reference=reference, initial_guess=v0)
            bound = report.lemma_initial_error_bound
            ok &= monotone and bound is not None and report.p_index >= bound
    _verdict(4, "initial-error probability bound holds for eps fractions 0.1/0.5/0.9", ok)


def test_criterion_5_convergence_full_size():
    results = []
    for key, max_cycles in (((1, 1), 32), ((2, 1), 52)):
        cfg = REFERENCE_CASES[key]
        system = assemble_case(*key)
        config = MgConfig(num_levels=cfg.levels, num_cycles=max_cycles, nu=6)
        _, trace = solve(system, config)
        used = converged_cycles(trace, 1e-10)
        to_target = trace.errors[:used]
        monotone = all(b <= a for a, b in zip(to_target, to_target[1:]))
        results.append((key, used, monotone))
    ok = all(m for _, _, m in results) and all(u <= c for (_, u, _), c in zip(results, (32, 52)))
    detail = ", ".join(f"{k}: {u} cycles" for k, u, _ in results)
    _verdict(5, f"1e-10 reached monotonically within budget ({detail})", ok)


def test_criterion_6_tiny_statevector_end_to_end():
    ok = True
    worst_dir, worst_p = 0.0, 0.0
    for n_elements in (4, 8):  # three and seven unknowns
        for cycles in (1, 2):
            system = assemble_1d(n_elements, ProblemCase(1, 1))
            config = MgConfig(num_levels=2, num_cycles=cycles, nu=2)
            report = tiny_end_to_end(config, system)
            worst_dir = max(worst_dir, report["direction_residual"])
            worst_p = max(worst_p, report["p_abs_diff"])
            ok &= report["direction_residual"] <= 1e-10
            ok &= report["p_abs_diff"] <= 1e-12
    _verdict(
        6,
        f"dilated product matches emulation (dir {worst_dir:.1e}, prob {worst_p:.1e})",
        ok,
    )


def test_criterion_7_block_encoding_properties():
    rng = np.random.default_rng(99)
    ok = True
    for _ in range(100):
        n = int(rng.integers(1, 17))
        a = rng.normal(size=(n, n))
        alpha = float(np.linalg.norm(a, 2)) * float(rng.uniform(1.0, 1.8))
        enc = dilate(a, alpha)
        ok &= np.abs(enc.unitary.T @ enc.unitary - np.eye(2 * n)).max() <= 1e-10
        b = rng.normal(size=n)
        b /= np.linalg.norm(b)
        prob, _ = apply_encoded(enc, b)
        lifted = np.concatenate([b, np.zeros(n)])
        proj = (enc.unitary @ lifted)[:n]
        ok &= abs(prob - float(proj @ proj)) <= 1e-12

    # product closure at dimension <= 8
    for n in (2, 5, 8):
        a = rng.normal(size=(n, n))
        b = rng.normal(size=(n, n))
        alpha = float(np.linalg.norm(a, 2)) * 1.2
        beta = float(np.linalg.norm(b, 2)) * 1.4
        ua, ub = dilate(a, alpha).unitary, dilate(b, beta).unitary

        def lift(u, which):
            t = u.reshape(2, n, 2, n)
            m = np.zeros((2, 2, n, 2, 2, n))
            for other in range(2):
                if which == 0:
                    m[:, other, :, :, other, :] = t
                else:
                    m[other, :, :, other, :, :] = t
            return m.reshape(4 * n, 4 * n)

        prod = lift(ua, 0) @ lift(ub, 1)
        ok &= np.abs(prod[:n, :n] - (a @ b) / (alpha * beta)).max() <= 1e-10

    # ancilla-count formula spot checks for 2, 4, and 8 factors
    base = dilate(np.eye(2), 1.0)
    for j, expected in ((2, 3), (4, 4), (8, 5)):
        ok &= product_encoding([base] * j).a_comp == expected
    _verdict(7, "dilation, probability identity, closure, and ancilla counts", ok)


def test_criterion_8_fem_suite():
    ok = True
    # Galerkin identity at every level of both dimensions
    for system, levels in (
        (assemble_1d(256, ProblemCase(1, 1)), 7),
        (assemble_1d(256, ProblemCase(1, 2)), 7),
        (assemble_2d(32, 32, ProblemCase(2, 1)), 5),
        (assemble_2d(32, 16, ProblemCase(2, 2)), 5),
        (assemble_2d(16, 16, ProblemCase(2, 5)), 5),
    ):
        hierarchy = build_hierarchy(system, MgConfig(num_levels=levels, num_cycles=1, nu=2))
        for lv, nxt in zip(hierarchy.levels, hierarchy.levels[1:]):
            product = (lv.restrict @ lv.op @ lv.prolong).toarray()
            ok &= np.abs(product - nxt.op.toarray()).max() <= 1e-12 * np.abs(
                nxt.op.toarray()
            ).max()

    # 1D nodal exactness
    for case_id in (1, 2):
        system = assemble_1d(128, ProblemCase(1, case_id))
        u = spla.spsolve(system.matrix.tocsc(), system.rhs)
        exact = exact_solution_1d(ProblemCase(1, case_id), system.dof_coords)
        ok &= np.abs(u - exact).max() <= 1e-10 * np.abs(exact).max()

    # 2D patch test with an inhomogeneous linear Dirichlet field
    def field(x, y):
        return 1.5 - 0.4 * x + 0.9 * y

    patch = assemble_2d(8, 8, ProblemCase(2, 1, forcing=0.0), dirichlet_values=field)
    u = spla.spsolve(patch.matrix.tocsc(), patch.rhs)
    expected = field(patch.dof_coords[:, 0], patch.dof_coords[:, 1])
    ok &= np.abs(u - expected).max() <= 1e-10 * np.abs(expected).max()
    _verdict(8, "Galerkin identity, 1D nodal exactness, 2D patch test", ok)


def test_criterion_9_qubit_multiple_trend():
    points = []
    for power in range(5, 14):
        n_elements = 1 << power
        levels = power  # coarsest grid keeps two elements, one unknown
        system = assemble_1d(n_elements, ProblemCase(1, 1))
        config = MgConfig(num_levels=levels, num_cycles=32, nu=6)
        _, trace = solve(system, config)
        used = converged_cycles(trace, 1e-10)
        points.append(
            SweepPoint(
                n=system.free_dof_count,
                cal_L=levels - 1,
                nu=6,
                cycles_used=used,
                epsilon_tilde=trace.errors[used - 1],
            )
        )
    rows = qubit_multiple_series(points)
    ok = rows[-1]["ratio"] <= rows[0]["ratio"]
    detail = f"ratio {rows[0]['ratio']:.3f} -> {rows[-1]['ratio']:.3f} over N {rows[0]['n']}..{rows[-1]['n']}"
    _verdict(9, f"qubit multiple non-increasing across the size sweep ({detail})", ok)
