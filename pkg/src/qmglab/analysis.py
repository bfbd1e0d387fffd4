"""Success probabilities, subnormalization factors, and qubit accounting.

The quantities reported here describe a completed history-vector run:

* the probability of the index register landing in the final-iterate
  window [T, T+c], with the conservative monotone-convergence bounds
  (1/2 from a zero initial guess; the squared-ratio bound when an
  initial guess with known error is supplied);
* the product Z of per-operation subnormalization factors, which sets
  the ancilla success probability 1/Z^2 and the amplitude-amplification
  round count;
* qubit counts for the work register, the full state, and the dilation
  ancillas, plus the total encoded length (T + c + 1) N.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .multigrid import CycleTrace, GridHierarchy
from .norms import copy_opnorm, correction_opnorm, spectral_norm, writer_opnorm
from .qmg import (
    KIND_FINAL_COPY,
    KIND_PROLONG,
    KIND_RESIDUAL_COPY,
    PAYLOAD_PROLONG,
    BlockIndexer,
    BlockOperation,
    HistoryVector,
    _payload_matrix,
    resolve_copy_count,
)

__all__ = [
    "SuccessReport",
    "ResourceReport",
    "index_probability",
    "z_factor",
    "z_factor_log2",
    "qubit_report",
    "convergence_series",
    "p_versus_cycles",
    "converged_cycles",
    "qubit_multiple_series",
    "ceil_log2",
    "write_convergence_csv",
    "write_block_ratio_csv",
    "write_p_series_csv",
    "write_qubit_multiple_csv",
]


@dataclass
class SuccessReport:
    """Index-register success probability and its conservative bounds."""

    p_index: float
    lemma_zero_guess_bound: float
    lemma_initial_error_bound: float | None
    block_norm_ratios: np.ndarray
    p_anc_estimate: float | None = None
    Z: float | None = None
    log2_Z: float | None = None

    # aliases matching the report schema
    @property
    def lemma5_bound(self) -> float:
        return self.lemma_zero_guess_bound

    @property
    def lemma6_bound(self) -> float | None:
        return self.lemma_initial_error_bound


@dataclass(frozen=True)
class ResourceReport:
    """Qubit and length accounting for one run layout."""

    len_x: int
    qubits_work: int
    qubits_total_state: int
    xi: int
    amplification_rounds: float | None = None
    cycles_used: int | None = None
    epsilon_tilde: float | None = None


def ceil_log2(n: int) -> int:
    """Exact ceil(log2 n) for positive integers, free of float rounding."""
    if n < 1:
        raise ValueError("n must be positive")
    return (n - 1).bit_length()


def index_probability(
    x: HistoryVector,
    reference: np.ndarray | None = None,
    initial_guess: np.ndarray | None = None,
) -> SuccessReport:
    """Probability of measuring the index register in the window [T, T+c].

    The window holds the final iterate and its c copies, so the
    probability is the window's squared norm over the total.  When a
    reference solution and an initial guess are supplied, the
    initial-error bound 0.5 ((norm(ref) - eps) / (norm(ref) + eps))^2 is
    evaluated as well (it applies only when eps <= norm(ref)).
    """
    norms = x.block_norms()
    final = norms[-1]
    c = x.copy_count
    total_sq = float(norms @ norms) + c * final * final
    window_sq = (c + 1) * final * final
    p = window_sq / total_sq if total_sq > 0.0 else 0.0

    ratios = np.zeros_like(norms)
    if final > 0.0:
        ratios = norms / final

    bound6 = None
    if reference is not None and initial_guess is not None:
        ref_norm = float(np.linalg.norm(reference))
        eps = float(np.linalg.norm(np.asarray(reference) - np.asarray(initial_guess)))
        if eps <= ref_norm and ref_norm > 0.0:
            bound6 = 0.5 * ((ref_norm - eps) / (ref_norm + eps)) ** 2

    return SuccessReport(
        p_index=float(p),
        lemma_zero_guess_bound=0.5,
        lemma_initial_error_bound=bound6,
        block_norm_ratios=ratios,
    )


def _zeta(op: BlockOperation, hierarchy: GridHierarchy, cache: dict) -> float:
    """Subnormalization of one operation from its payload norm."""
    if op.kind in (KIND_RESIDUAL_COPY, KIND_FINAL_COPY):
        return copy_opnorm(1.0)
    if op.kind == KIND_PROLONG:
        key = (op.level, PAYLOAD_PROLONG)
        if key not in cache:
            cache[key] = spectral_norm(hierarchy.levels[op.level].prolong)
        return correction_opnorm(cache[key])
    (_, tag) = op.sources[0]
    key = (op.level, tag)
    if key not in cache:
        cache[key] = spectral_norm(_payload_matrix(hierarchy, op.level, tag))
    return writer_opnorm(cache[key])


def z_factor_log2(schedule, hierarchy: GridHierarchy, pessimism: float = 1.0) -> float:
    """log2 of the product of per-operation subnormalizations.

    Long schedules overflow a float product, so the log is the primary
    quantity; :func:`z_factor` exponentiates it.
    """
    if pessimism < 1.0:
        raise ValueError("the pessimism multiplier must be >= 1")
    cache: dict = {}
    total = 0.0
    for op in schedule:
        zeta = _zeta(op, hierarchy, cache) * pessimism
        total += op.multiplicity * math.log2(zeta)
    return total


def z_factor(schedule, hierarchy: GridHierarchy, pessimism: float = 1.0) -> float:
    """Product of per-operation subnormalizations (may overflow to inf)."""
    log2_z = z_factor_log2(schedule, hierarchy, pessimism)
    try:
        return float(2.0 ** log2_z)
    except OverflowError:
        return float("inf")


def qubit_report(
    indexer: BlockIndexer,
    n: int,
    z: float | None = None,
    cycles_used: int | None = None,
    epsilon_tilde: float | None = None,
) -> ResourceReport:
    """Qubit counts and encoded length for a run layout.

    The dilation ancilla total is one working ancilla plus the counter
    register of the ancilla-reuse gadget over T + c + 1 factors.
    """
    len_x = indexer.block_count * n
    rounds = None
    if z is not None:
        rounds = float(math.ceil(z)) if math.isfinite(z) else float("inf")
    return ResourceReport(
        len_x=len_x,
        qubits_work=ceil_log2(n) if n > 1 else 0,
        qubits_total_state=ceil_log2(len_x),
        xi=1 + ceil_log2(indexer.block_count) + 1,
        amplification_rounds=rounds,
        cycles_used=cycles_used,
        epsilon_tilde=epsilon_tilde,
    )


def convergence_series(trace: CycleTrace) -> list:
    """Per-cycle relative error pairs (cycle, epsilon_tilde)."""
    return trace.epsilon_series()


def p_versus_cycles(x: HistoryVector) -> list:
    """Index success probability had the run stopped after each cycle.

    Block prefixes of the full run coincide with shorter runs, so each
    truncation's probability (with its own full copy count) is pure
    bookkeeping over the prefix norms.
    """
    norms = x.block_norms()
    sq = norms * norms
    prefix = np.cumsum(sq)
    tv = x.indexer.blocks_per_cycle
    out = []
    for cycle in range(x.indexer.cal_V + 1):
        t = (cycle + 1) * tv
        final_sq = sq[t]
        total = prefix[t] + t * final_sq
        window = (t + 1) * final_sq
        out.append((cycle, float(window / total) if total > 0 else 0.0))
    return out


def converged_cycles(trace: CycleTrace, tol: float = 1e-10) -> int:
    """Number of cycles needed to reach the tolerance; raises if never."""
    for cycle, eps in enumerate(trace.errors):
        if eps <= tol:
            return cycle + 1
    raise RuntimeError(
        f"run did not reach {tol:g}: final relative error {trace.errors[-1]:.3e}"
    )


@dataclass(frozen=True)
class SweepPoint:
    """One problem size of a qubit-multiple sweep, run to tolerance."""

    n: int
    cal_L: int
    nu: int
    cycles_used: int
    epsilon_tilde: float


def qubit_multiple_series(points, copies_policy="T") -> list:
    """Qubit overhead series: per size, ceil-log lengths and their ratio.

    Each point must come from a run that actually reached the target
    tolerance; the layout uses the cycle count that achieved it.
    """
    rows = []
    for pt in points:
        tv = 2 * (pt.cal_L + 1) * pt.nu + 2 * pt.cal_L - 1
        total = pt.cycles_used * tv
        indexer = BlockIndexer(
            cal_V=pt.cycles_used - 1,
            cal_L=pt.cal_L,
            nu=pt.nu,
            copies=resolve_copy_count(copies_policy, total),
        )
        report = qubit_report(indexer, pt.n, cycles_used=pt.cycles_used)
        ratio = report.qubits_total_state / report.qubits_work
        rows.append(
            {
                "n": pt.n,
                "cycles_used": pt.cycles_used,
                "len_x": report.len_x,
                "qubits_work": report.qubits_work,
                "qubits_state": report.qubits_total_state,
                "ratio": ratio,
            }
        )
    return rows


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row)
            )
            fh.write("\n")


def write_convergence_csv(series, path) -> None:
    _write_csv(path, ["cycle_index", "epsilon_tilde"], series)


def write_block_ratio_csv(report: SuccessReport, path) -> None:
    rows = [(i, float(r)) for i, r in enumerate(report.block_norm_ratios)]
    _write_csv(path, ["block_index", "ratio"], rows)


def write_p_series_csv(series, path) -> None:
    _write_csv(path, ["cycle", "p_index"], series)


def write_qubit_multiple_csv(rows, path) -> None:
    _write_csv(
        path,
        ["n", "cycles_used", "len_x", "qubits_work", "qubits_state", "ratio"],
        [
            (r["n"], r["cycles_used"], r["len_x"], r["qubits_work"], r["qubits_state"], r["ratio"])
            for r in rows
        ],
    )
