"""Geometric multigrid V-cycle solver with full iterate recording.

The solver runs on a normalized hierarchy: every level operator is scaled
so its 2-norm sits just below one, which turns each relaxation sweep into
the plain affine update ``v <- (I - A) v + f``.  Restriction operators
absorb the ratio between adjacent level scales, so the coarse operators
still satisfy the Galerkin identity ``A_coarse = restrict @ A @ prolong``
exactly in the stored representation.

The coarsest level is treated by smoothing only (one extra relaxation in
place of the residual computation, then the usual post-smoothing), never
by a direct solve, so that every arithmetic step of the solver corresponds
one-to-one with a block operation of the history-vector emulation in
:mod:`qmglab.qmg`.

Every iterate and residual is recorded in a :class:`CycleTrace` keyed by
(cycle, level, step); the trace is the ground-truth oracle the emulation
is verified against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import AssembledSystem
from .norms import certified_scale

__all__ = [
    "MgConfig",
    "GridLevel",
    "GridHierarchy",
    "CycleTrace",
    "DivergenceError",
    "build_hierarchy",
    "smooth_step",
    "v_cycle",
    "solve",
    "reference_solution",
    "write_trace_csv",
]

#: Systems at or below this size use a sparse direct solve for the error
#: reference; larger ones fall back to a deeply converged iterative run.
DIRECT_REFERENCE_LIMIT = 20000

#: Extra V-cycles used to build the reference when direct solve is too big.
REFERENCE_EXTRA_CYCLES = 200


class DivergenceError(RuntimeError):
    """Raised when the per-cycle error grows by more than 10x."""


@dataclass(frozen=True)
class MgConfig:
    """V-cycle parameters.

    ``nu`` follows the step-index convention of the block layout: nu - 1
    pre-smoothing and nu - 1 post-smoothing sweeps per level.  The total
    number of cycles is ``num_cycles``.  ``smoother_scale`` optionally
    pins the fine-level normalization; by default it is 1.05 times a
    certified power-iteration estimate of the largest eigenvalue.
    """

    num_levels: int
    num_cycles: int
    nu: int
    smoother_scale: float | None = None
    coarse_strategy: str = "smoothing"

    def __post_init__(self):
        if self.num_levels < 2:
            raise ValueError("num_levels must be >= 2")
        if self.num_cycles < 1:
            raise ValueError("num_cycles must be >= 1")
        if self.nu < 2:
            raise ValueError("nu must be >= 2")
        if self.coarse_strategy != "smoothing":
            raise ValueError("only the smoothing-only coarse strategy is supported")

    @property
    def coarsest_level(self) -> int:
        return self.num_levels - 1


@dataclass
class GridLevel:
    """Operators of one grid level, in the normalized representation."""

    op: sp.csr_matrix  # A_L / scale_L
    neg_op: sp.csr_matrix  # exact negation of op, same sparsity
    smoother: sp.csr_matrix  # I - op
    scale: float  # normalization applied to the raw operator
    ndof: int
    free_shape: tuple  # free node count per direction
    prolong: sp.csr_matrix | None = None  # level L+1 -> L
    restrict: sp.csr_matrix | None = None  # level L -> L+1, ratio absorbed
    restrict_scale: float | None = None  # restrict == restrict_scale * prolong.T


@dataclass
class GridHierarchy:
    levels: list
    sigma: float  # fine-level normalization
    rhs_scaled: np.ndarray  # fine rhs divided by sigma
    dimension: int

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def ndofs(self) -> list:
        return [lv.ndof for lv in self.levels]


def prolongation_1d(n_fine_elements: int, fixed_low: bool, fixed_high: bool) -> sp.csr_matrix:
    """Linear interpolation from the n/2-element grid to the n-element grid.

    Rows and columns range over free nodes only; eliminated boundary
    nodes contribute their zero value implicitly.
    """
    if n_fine_elements % 2:
        raise ValueError("fine grid must have an even number of elements")
    nc = n_fine_elements // 2
    fine_free = _free_nodes(n_fine_elements, fixed_low, fixed_high)
    coarse_free = _free_nodes(nc, fixed_low, fixed_high)
    fmap = {node: r for r, node in enumerate(fine_free)}
    cmap = {node: c for c, node in enumerate(coarse_free)}

    rows, cols, vals = [], [], []
    for node, r in fmap.items():
        if node % 2 == 0:
            j = node // 2
            if j in cmap:
                rows.append(r)
                cols.append(cmap[j])
                vals.append(1.0)
        else:
            for j in ((node - 1) // 2, (node + 1) // 2):
                if j in cmap:
                    rows.append(r)
                    cols.append(cmap[j])
                    vals.append(0.5)
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(len(fmap), len(cmap))
    ).tocsr()


def _free_nodes(n_elements: int, fixed_low: bool, fixed_high: bool) -> list:
    lo = 1 if fixed_low else 0
    hi = n_elements - 1 if fixed_high else n_elements
    return list(range(lo, hi + 1))


def _level_prolongation(system: AssembledSystem, level: int) -> sp.csr_matrix:
    """Interpolation from level+1 to level for the system's grid."""
    if system.dimension == 1:
        (n_el,) = system.elements
        ((fl, fh),) = system.dirichlet_ends
        return prolongation_1d(n_el >> level, fl, fh)
    (nx, ny) = system.elements
    (fx0, fxl), (fy0, fyl) = system.dirichlet_ends
    px = prolongation_1d(nx >> level, fx0, fxl)
    py = prolongation_1d(ny >> level, fy0, fyl)
    # dof index = iy * nx_free + ix (x fastest), matching assembly order
    return sp.kron(py, px, format="csr")


def _free_counts(system: AssembledSystem, level: int) -> tuple:
    counts = []
    for n_el, (fl, fh) in zip(system.elements, system.dirichlet_ends):
        counts.append(len(_free_nodes(n_el >> level, fl, fh)))
    return tuple(counts)


def build_hierarchy(system: AssembledSystem, config: MgConfig) -> GridHierarchy:
    """Build the normalized multigrid hierarchy for an assembled system.

    Coarse operators are Galerkin products; each level is rescaled by a
    certified estimate of its largest eigenvalue so the stored operator
    norm stays at or below one, and the restriction absorbs the scale
    ratio between adjacent levels.
    """
    n_coarsenings = config.num_levels - 1
    for n_el in system.elements:
        if n_el % (1 << n_coarsenings) != 0:
            raise ValueError(
                f"{n_el} elements cannot be coarsened {n_coarsenings} times"
            )
    coarsest = _free_counts(system, n_coarsenings)
    if min(coarsest) < 1:
        raise ValueError("coarsest grid has no free dofs")

    weighting = 0.5 if system.dimension == 1 else 0.25

    raw_ops = [system.matrix]
    prolongs = []
    for level in range(n_coarsenings):
        p = _level_prolongation(system, level)
        prolongs.append(p)
        raw_ops.append((weighting * (p.T @ raw_ops[-1] @ p)).tocsr())

    scales = [certified_scale(a) for a in raw_ops]
    if config.smoother_scale is not None:
        if config.smoother_scale < scales[0] / 1.05:
            raise ValueError(
                "smoother_scale is below the estimated largest eigenvalue "
                f"({scales[0] / 1.05:.6g}) of the fine operator"
            )
        scales[0] = config.smoother_scale

    levels = []
    for idx, (raw, s) in enumerate(zip(raw_ops, scales)):
        op = (raw / s).tocsr()
        neg = op.copy()
        neg.data = -neg.data
        smoother = (sp.identity(op.shape[0], format="csr") - op).tocsr()
        levels.append(
            GridLevel(
                op=op,
                neg_op=neg,
                smoother=smoother,
                scale=s,
                ndof=op.shape[0],
                free_shape=_free_counts(system, idx),
            )
        )
    for idx, p in enumerate(prolongs):
        ratio = weighting * scales[idx] / scales[idx + 1]
        levels[idx].prolong = p
        levels[idx].restrict = (ratio * p.T).tocsr()
        levels[idx].restrict_scale = ratio

    return GridHierarchy(
        levels=levels,
        sigma=scales[0],
        rhs_scaled=system.rhs / scales[0],
        dimension=system.dimension,
    )


def smooth_step(a, v: np.ndarray, f: np.ndarray, smoother=None) -> np.ndarray:
    """One relaxation sweep ``(I - A) v + f`` on the normalized operator."""
    if a.shape[1] != v.shape[0] or f.shape[0] != a.shape[0]:
        raise ValueError("operator and vector dimensions do not match")
    if smoother is None:
        smoother = sp.identity(a.shape[0], format="csr") - sp.csr_matrix(a)
    return smoother @ v + f


class CycleTrace:
    """Every iterate and residual of a multigrid run, keyed by (V, L, v).

    Iterate steps follow the block layout convention: v = 0 is a level's
    initial guess, 1..nu-1 the pre-smoothing sweeps, nu the corrected (or
    coarsest extra-relaxation) iterate, nu+1..2nu-1 the post-smoothing
    sweeps.  Residuals are stored per (V, L) as the pair (residual,
    restricted residual).  Each slot may be recorded exactly once.
    """

    def __init__(self):
        self.iterates = {}
        self.residuals = {}
        self.errors = []

    def record_iterate(self, cycle: int, level: int, step: int, value: np.ndarray) -> None:
        key = (cycle, level, step)
        if key in self.iterates:
            raise ValueError(f"iterate slot {key} already recorded")
        self.iterates[key] = value

    def record_residual(self, cycle: int, level: int, residual, restricted) -> None:
        key = (cycle, level)
        if key in self.residuals:
            raise ValueError(f"residual slot {key} already recorded")
        self.residuals[key] = (residual, restricted)

    def iterate(self, cycle: int, level: int, step: int) -> np.ndarray:
        return self.iterates[(cycle, level, step)]

    def residual_pair(self, cycle: int, level: int):
        return self.residuals[(cycle, level)]

    def epsilon_series(self) -> list:
        return [(cycle, eps) for cycle, eps in enumerate(self.errors)]


def _v_cycle_at(
    hierarchy: GridHierarchy,
    level: int,
    v: np.ndarray,
    f: np.ndarray,
    config: MgConfig,
    trace: CycleTrace | None,
    cycle: int,
) -> np.ndarray:
    lv = hierarchy.levels[level]
    nu = config.nu

    def record(step, value):
        if trace is not None:
            trace.record_iterate(cycle, level, step, value)

    if level > 0:
        record(0, v)  # the zero initial guess of the coarse correction

    for step in range(1, nu):
        v = lv.smoother @ v + f
        record(step, v)

    if level < config.coarsest_level:
        r = f - lv.op @ v
        rc = lv.restrict @ r
        if trace is not None:
            trace.record_residual(cycle, level, r, rc)
        e = _v_cycle_at(
            hierarchy, level + 1, np.zeros(rc.shape[0]), rc, config, trace, cycle
        )
        v = lv.prolong @ e + v
        record(nu, v)
    else:
        # no residual at the bottom: one extra relaxation starts the ascent
        v = lv.smoother @ v + f
        record(nu, v)

    for step in range(nu + 1, 2 * nu):
        v = lv.smoother @ v + f
        record(step, v)
    return v


def v_cycle(
    hierarchy: GridHierarchy,
    v0: np.ndarray,
    f: np.ndarray,
    config: MgConfig,
    trace: CycleTrace | None = None,
    cycle_index: int = 0,
) -> np.ndarray:
    """One V-cycle on the finest level, recording iterates into the trace."""
    n = hierarchy.levels[0].ndof
    if v0.shape[0] != n or f.shape[0] != n:
        raise ValueError("v0 and f must be sized to the finest level")
    if config.num_levels != hierarchy.num_levels:
        raise ValueError("config.num_levels does not match the hierarchy")
    if trace is not None and (cycle_index, 0, 0) not in trace.iterates:
        trace.record_iterate(cycle_index, 0, 0, v0)
    return _v_cycle_at(hierarchy, 0, v0, f, config, trace, cycle_index)


def reference_solution(hierarchy: GridHierarchy, config: MgConfig) -> np.ndarray:
    """High-accuracy solution used for the relative error series."""
    lv = hierarchy.levels[0]
    if lv.ndof <= DIRECT_REFERENCE_LIMIT:
        return spla.spsolve(lv.op.tocsc(), hierarchy.rhs_scaled)
    v = np.zeros(lv.ndof)
    deep = MgConfig(
        num_levels=config.num_levels,
        num_cycles=1,
        nu=config.nu,
        smoother_scale=None,
    )
    for cycle in range(config.num_cycles + REFERENCE_EXTRA_CYCLES):
        v = _v_cycle_at(hierarchy, 0, v, hierarchy.rhs_scaled, deep, None, cycle)
    return v


def solve(
    system: AssembledSystem,
    config: MgConfig,
    v0: np.ndarray | None = None,
    hierarchy: GridHierarchy | None = None,
):
    """Run ``num_cycles`` chained V-cycles and return (solution, trace).

    The trace carries every iterate and residual plus the per-cycle
    relative error against a high-accuracy reference.  A cycle whose
    error grows by more than 10x aborts with :class:`DivergenceError`.
    """
    if hierarchy is None:
        hierarchy = build_hierarchy(system, config)
    f = hierarchy.rhs_scaled
    n = hierarchy.levels[0].ndof
    v = np.zeros(n) if v0 is None else np.asarray(v0, dtype=float)
    if v.shape[0] != n:
        raise ValueError("v0 must be sized to the finest level")

    u_ref = reference_solution(hierarchy, config)
    e0 = float(np.linalg.norm(v - u_ref))
    if e0 == 0.0:
        e0 = float(np.linalg.norm(u_ref)) or 1.0

    trace = CycleTrace()
    trace.record_iterate(0, 0, 0, v)
    for cycle in range(config.num_cycles):
        v = _v_cycle_at(hierarchy, 0, v, f, config, trace, cycle)
        eps = float(np.linalg.norm(v - u_ref)) / e0
        if trace.errors and eps > 10.0 * trace.errors[-1]:
            raise DivergenceError(
                f"cycle {cycle}: relative error grew from "
                f"{trace.errors[-1]:.3e} to {eps:.3e}"
            )
        trace.errors.append(eps)
        if cycle + 1 < config.num_cycles:
            # the next cycle starts from this cycle's final iterate
            trace.record_iterate(cycle + 1, 0, 0, v)
    return v, trace


def write_trace_csv(trace: CycleTrace, path) -> None:
    """Per-cycle relative error as CSV rows: cycle_index, epsilon_tilde."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("cycle_index,epsilon_tilde\n")
        for cycle, eps in trace.epsilon_series():
            fh.write(f"{cycle},{eps!r}\n")
