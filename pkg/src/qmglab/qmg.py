"""History-vector emulation: every multigrid iterate as one block of x.

A run of ``cal_V + 1`` V-cycles over ``cal_L + 1`` levels is laid out as a
single block vector x.  Blocks are indexed 0..T+c where

* ``T_V = 2 (cal_L + 1) nu + 2 cal_L - 1``  blocks per cycle,
* ``T = (cal_V + 1) T_V``                   blocks written by the solver,
* ``c``                                     trailing copies of block T.

Within a cycle the descent lays out, per level, the pre-smoothing iterates
(steps 0..nu-1), the residual, and the restricted residual; the ascent
lays out the corrected iterate (step nu) and the post-smoothing iterates
(steps nu+1..2nu-1).  The final iterate of one cycle is the same physical
block as the next cycle's initial iterate, so cycle boundaries share a
block rather than copying it.

Each block is produced by one operation of the form "add payload times a
source block into the target block", the payload being the smoother, the
negated operator, a transfer operator, or the identity.  Constant terms
(the forcing vector on the finest level, restricted residuals on coarse
levels) are preloaded into their target blocks, either by the initial
state or by identity-copy operations, before the writer touches them.

Coarse levels start from a zero initial guess, so their step-0 blocks are
never written; they stay zero by construction.  The c trailing copies of
the final iterate are virtual: norms and probabilities account for them
without materializing.
"""

from __future__ import annotations

from dataclasses import dataclass
import struct

import numpy as np

from .fem import AssembledSystem
from .multigrid import GridHierarchy, MgConfig, build_hierarchy

__all__ = [
    "BlockIndexer",
    "BlockOperation",
    "HistoryVector",
    "build_initial_state",
    "build_schedule",
    "apply_operation",
    "run_qmg",
    "resolve_copy_count",
    "write_block_norms_csv",
    "write_blocks_binary",
    "read_blocks_binary",
]

KIND_PRE = "pre_smooth"
KIND_RESIDUAL = "residual"
KIND_RESTRICT = "restrict"
KIND_RESIDUAL_COPY = "residual_copy"
KIND_POST = "post_smooth"
KIND_PROLONG = "prolong"
KIND_FINAL_COPY = "final_copy"

PAYLOAD_SMOOTHER = "smoother"
PAYLOAD_NEG_OP = "neg_operator"
PAYLOAD_RESTRICT = "restriction"
PAYLOAD_PROLONG = "prolongation"
PAYLOAD_IDENTITY = "identity"

#: kinds that overwrite an empty block instead of adding to the target
COPY_KINDS = frozenset({KIND_RESIDUAL_COPY, KIND_FINAL_COPY})


@dataclass(frozen=True)
class BlockIndexer:
    """Block index arithmetic for one run layout."""

    cal_V: int  # highest cycle index; total cycles = cal_V + 1
    cal_L: int  # coarsest level index; total levels = cal_L + 1
    nu: int
    copies: int  # trailing copies of the final block

    def __post_init__(self):
        if self.cal_V < 0 or self.cal_L < 1 or self.nu < 2 or self.copies < 0:
            raise ValueError("invalid indexer parameters")

    @property
    def blocks_per_cycle(self) -> int:
        return 2 * (self.cal_L + 1) * self.nu + 2 * self.cal_L - 1

    @property
    def total_written(self) -> int:
        return (self.cal_V + 1) * self.blocks_per_cycle

    @property
    def block_count(self) -> int:
        return self.total_written + self.copies + 1

    def i_pre(self, cycle: int, level: int, step: int) -> int:
        """Index of a descent block: steps 0..nu-1 are iterates, and at
        levels above the coarsest, nu is the residual and nu+1 its
        restriction."""
        self._check_cycle_level(cycle, level)
        limit = self.nu + 1 if level < self.cal_L else self.nu - 1
        if not 0 <= step <= limit:
            raise ValueError(f"pre step {step} out of range at level {level}")
        return cycle * self.blocks_per_cycle + level * (self.nu + 2) + step

    def i_post(self, cycle: int, level: int, step: int) -> int:
        """Index of an ascent block, steps nu..2nu-1."""
        self._check_cycle_level(cycle, level)
        if not self.nu <= step <= 2 * self.nu - 1:
            raise ValueError(f"post step {step} out of range")
        return (
            cycle * self.blocks_per_cycle
            + 2 * self.cal_L * (self.nu + 1)
            - level * self.nu
            + step
        )

    def _check_cycle_level(self, cycle: int, level: int) -> None:
        if not 0 <= cycle <= self.cal_V:
            raise ValueError(f"cycle {cycle} out of range 0..{self.cal_V}")
        if not 0 <= level <= self.cal_L:
            raise ValueError(f"level {level} out of range 0..{self.cal_L}")

    def zero_guess_blocks(self) -> list:
        """Blocks holding the zero initial guesses of coarse corrections."""
        return [
            self.i_pre(cycle, level, 0)
            for cycle in range(self.cal_V + 1)
            for level in range(1, self.cal_L + 1)
        ]

    def describe(self, index: int) -> tuple:
        """Map a block index to (cycle, level, step, kind)."""
        t = self.total_written
        if not 0 <= index <= t + self.copies:
            raise ValueError(f"block index {index} out of range")
        if index > t:
            return (self.cal_V, 0, 2 * self.nu - 1, "copy")
        tv, nu, call = self.blocks_per_cycle, self.nu, self.cal_L
        if index % tv == 0:
            if index == 0:
                return (0, 0, 0, "initial")
            return (index // tv - 1, 0, 2 * nu - 1, "post_smooth")
        cycle, r = divmod(index, tv)
        last_pre = call * (nu + 2) + nu - 1
        if r <= last_pre:
            level, step = divmod(r, nu + 2)
            if step == 0:
                kind = "zero_guess"
            elif step < nu:
                kind = "pre_smooth"
            elif step == nu:
                kind = "residual"
            else:
                kind = "restricted_residual"
            return (cycle, level, step, kind)
        for level in range(call, -1, -1):
            step = r - 2 * call * (nu + 1) + level * nu
            if nu <= step <= 2 * nu - 1:
                if step == nu:
                    kind = "coarse_relax" if level == call else "corrected"
                else:
                    kind = "post_smooth"
                return (cycle, level, step, kind)
        raise AssertionError("unreachable block index")


def resolve_copy_count(policy, total_written: int) -> int:
    """Copy-count policy: "T", "T-1", or an explicit non-negative integer."""
    if policy is None or policy == "T":
        return total_written
    if policy == "T-1":
        return total_written - 1
    copies = int(policy)
    if copies < 0:
        raise ValueError("copy count must be non-negative")
    return copies


@dataclass(frozen=True)
class BlockOperation:
    """One block update: target <- sum of payload @ source (+ preload).

    ``sources`` is a tuple of (block index, payload tag).  ``level`` names
    the grid level whose operators supply the payload.  Copy kinds
    overwrite their (empty) target instead of adding into it; a final
    copy is stored once with ``multiplicity`` equal to the copy count.
    """

    kind: str
    target: int
    sources: tuple
    level: int
    multiplicity: int = 1


class HistoryVector:
    """Blocks 0..T at native level size, plus virtual trailing copies."""

    def __init__(self, indexer: BlockIndexer, hierarchy: GridHierarchy):
        if hierarchy.num_levels != indexer.cal_L + 1:
            raise ValueError("hierarchy depth does not match the indexer")
        self.indexer = indexer
        self.hierarchy = hierarchy
        self.level_dims = hierarchy.ndofs
        self.finest_dim = self.level_dims[0]
        t = indexer.total_written
        self._level_of = np.empty(t + 1, dtype=np.int64)
        for i in range(t + 1):
            _, level, _, kind = indexer.describe(i)
            # a restricted residual holds next-coarser-level content
            self._level_of[i] = level + 1 if kind == "restricted_residual" else level
        shared_zeros = [np.zeros(n) for n in self.level_dims]
        self.blocks = [shared_zeros[self._level_of[i]] for i in range(t + 1)]
        self.written = np.zeros(t + 1, dtype=bool)
        self.preloaded = np.zeros(t + 1, dtype=bool)
        self.kinds = ["zero"] * (t + 1)

    @property
    def copy_count(self) -> int:
        return self.indexer.copies

    @property
    def logical_length(self) -> int:
        return self.indexer.block_count * self.finest_dim

    def block_level(self, index: int) -> int:
        return int(self._level_of[min(index, self.indexer.total_written)])

    def final_block(self) -> np.ndarray:
        return self.blocks[self.indexer.total_written]

    def set_preload(self, index: int, value: np.ndarray, kind: str = "preload") -> None:
        if self.written[index] or self.preloaded[index]:
            raise ValueError(f"block {index} already holds content")
        if value.shape[0] != self.level_dims[self.block_level(index)]:
            raise ValueError("preload does not match the block's level size")
        self.blocks[index] = value
        self.preloaded[index] = True
        self.kinds[index] = kind

    def materialize(self, index: int) -> np.ndarray:
        """Block ``index`` zero-padded to the finest dimension.

        Indices T+1..T+c return the final block's content: trailing
        copies are identical to block T by construction.
        """
        t = self.indexer.total_written
        if not 0 <= index <= t + self.indexer.copies:
            raise ValueError(f"block index {index} out of range")
        src = self.blocks[min(index, t)]
        out = np.zeros(self.finest_dim)
        out[: src.shape[0]] = src
        return out

    def materialize_full(self) -> np.ndarray:
        """The padded vector over all blocks, trailing copies included."""
        return np.concatenate(
            [self.materialize(i) for i in range(self.indexer.block_count)]
        )

    def block_norms(self) -> np.ndarray:
        """Euclidean norms of blocks 0..T (padding does not change them)."""
        return np.array([float(np.linalg.norm(b)) for b in self.blocks])

    def total_sq_norm(self) -> float:
        """Squared norm of x with the virtual copies accounted for."""
        norms = self.block_norms()
        final = norms[-1]
        return float(norms @ norms + self.indexer.copies * final * final)


def build_initial_state(
    v0: np.ndarray, hierarchy: GridHierarchy, indexer: BlockIndexer
) -> HistoryVector:
    """Initial state: v0 in block 0 and the scaled forcing vector in every
    finest-level block that a smoothing or residual step will consume."""
    x = HistoryVector(indexer, hierarchy)
    n = x.finest_dim
    v0 = np.asarray(v0, dtype=float)
    if v0.shape[0] != n:
        raise ValueError("v0 must be sized to the finest level")
    f = hierarchy.rhs_scaled
    if f.shape[0] != n:
        raise ValueError("forcing vector must be sized to the finest level")

    x.set_preload(0, v0.copy(), kind="initial")
    for cycle in range(indexer.cal_V + 1):
        for step in range(1, indexer.nu + 1):
            x.set_preload(indexer.i_pre(cycle, 0, step), f, kind="forcing")
        for step in range(indexer.nu + 1, 2 * indexer.nu):
            x.set_preload(indexer.i_post(cycle, 0, step), f, kind="forcing")
    return x


def build_schedule(indexer: BlockIndexer) -> list:
    """The ordered block operations of the full run.

    Per cycle: descend level by level emitting nu-1 smoothing writes, the
    residual write, the restriction write, and the identity fan-out that
    preloads the next level's constant terms; at the bottom the residual
    is replaced by one extra relaxation; then ascend emitting
    post-smoothing writes and the two-source correction write.  One
    final-copy operation with multiplicity c closes the schedule.
    """
    ops = []
    nu, call = indexer.nu, indexer.cal_L
    for cycle in range(indexer.cal_V + 1):
        for level in range(call + 1):
            for step in range(1, nu):
                ops.append(
                    BlockOperation(
                        kind=KIND_PRE,
                        target=indexer.i_pre(cycle, level, step),
                        sources=((indexer.i_pre(cycle, level, step - 1), PAYLOAD_SMOOTHER),),
                        level=level,
                    )
                )
            if level == call:
                # extra relaxation in place of a residual at the bottom
                ops.append(
                    BlockOperation(
                        kind=KIND_PRE,
                        target=indexer.i_post(cycle, call, nu),
                        sources=((indexer.i_pre(cycle, call, nu - 1), PAYLOAD_SMOOTHER),),
                        level=call,
                    )
                )
                break
            ops.append(
                BlockOperation(
                    kind=KIND_RESIDUAL,
                    target=indexer.i_pre(cycle, level, nu),
                    sources=((indexer.i_pre(cycle, level, nu - 1), PAYLOAD_NEG_OP),),
                    level=level,
                )
            )
            restricted = indexer.i_pre(cycle, level, nu + 1)
            ops.append(
                BlockOperation(
                    kind=KIND_RESTRICT,
                    target=restricted,
                    sources=((indexer.i_pre(cycle, level, nu), PAYLOAD_RESTRICT),),
                    level=level,
                )
            )
            ops.extend(_residual_fanout(indexer, cycle, level + 1, restricted))
        for level in range(call, -1, -1):
            if level < call:
                ops.append(
                    BlockOperation(
                        kind=KIND_PROLONG,
                        target=indexer.i_post(cycle, level, nu),
                        sources=(
                            (indexer.i_post(cycle, level + 1, 2 * nu - 1), PAYLOAD_PROLONG),
                            (indexer.i_pre(cycle, level, nu - 1), PAYLOAD_IDENTITY),
                        ),
                        level=level,
                    )
                )
            for step in range(nu + 1, 2 * nu):
                ops.append(
                    BlockOperation(
                        kind=KIND_POST,
                        target=indexer.i_post(cycle, level, step),
                        sources=((indexer.i_post(cycle, level, step - 1), PAYLOAD_SMOOTHER),),
                        level=level,
                    )
                )
    if indexer.copies > 0:
        ops.append(
            BlockOperation(
                kind=KIND_FINAL_COPY,
                target=indexer.total_written + 1,
                sources=((indexer.total_written, PAYLOAD_IDENTITY),),
                level=0,
                multiplicity=indexer.copies,
            )
        )
    return ops


def _residual_fanout(indexer: BlockIndexer, cycle: int, level: int, restricted: int) -> list:
    """Identity copies spreading a restricted residual over the blocks at
    ``level`` that consume it as a constant term: the pre-smoothing
    targets, the residual (or bottom-level relaxation) target, and the
    post-smoothing targets."""
    nu = indexer.nu
    targets = [indexer.i_pre(cycle, level, step) for step in range(1, nu)]
    if level < indexer.cal_L:
        targets.append(indexer.i_pre(cycle, level, nu))
    else:
        targets.append(indexer.i_post(cycle, indexer.cal_L, nu))
    targets.extend(
        indexer.i_post(cycle, level, step) for step in range(nu + 1, 2 * nu)
    )
    ops = []
    source = restricted
    for tgt in targets:
        ops.append(
            BlockOperation(
                kind=KIND_RESIDUAL_COPY,
                target=tgt,
                sources=((source, PAYLOAD_IDENTITY),),
                level=level,
            )
        )
        source = tgt
    return ops


def _payload_matrix(hierarchy: GridHierarchy, level: int, tag: str):
    lv = hierarchy.levels[level]
    if tag == PAYLOAD_SMOOTHER:
        return lv.smoother
    if tag == PAYLOAD_NEG_OP:
        return lv.neg_op
    if tag == PAYLOAD_RESTRICT:
        return lv.restrict
    if tag == PAYLOAD_PROLONG:
        return lv.prolong
    if tag == PAYLOAD_IDENTITY:
        return None
    raise ValueError(f"unknown payload tag {tag!r}")


def apply_operation(x: HistoryVector, op: BlockOperation) -> HistoryVector:
    """Apply one block operation in place and return the history vector.

    Writers add their payload products to whatever was preloaded into the
    target; copies require a completely untouched target.  All other
    blocks are left unchanged.  Final copies are virtual and validate
    only.
    """
    if op.kind == KIND_FINAL_COPY:
        t = x.indexer.total_written
        if not (op.target == t + 1 and op.multiplicity == x.indexer.copies):
            raise ValueError("final copy does not match the layout")
        return x

    if x.written[op.target]:
        raise ValueError(f"block {op.target} already written")
    if op.kind in COPY_KINDS:
        if x.preloaded[op.target]:
            raise ValueError(f"copy target {op.target} already holds content")
        (src, tag) = op.sources[0]
        if tag != PAYLOAD_IDENTITY:
            raise ValueError("copies must carry the identity payload")
        if x.block_level(src) != x.block_level(op.target):
            raise ValueError("copy source and target live on different levels")
        x.blocks[op.target] = x.blocks[src]
        x.preloaded[op.target] = True
        x.kinds[op.target] = op.kind
        return x

    target_dim = x.level_dims[x.block_level(op.target)]
    acc = None
    for src, tag in op.sources:
        payload = _payload_matrix(x.hierarchy, op.level, tag)
        vec = x.blocks[src]
        if payload is None:
            term = vec
            if vec.shape[0] != target_dim:
                raise ValueError("identity source does not match the target level")
        else:
            if payload.shape[1] != vec.shape[0]:
                raise ValueError(
                    f"payload {tag} at level {op.level} does not match source block {src}"
                )
            if payload.shape[0] != target_dim:
                raise ValueError("payload range does not match the target level")
            term = payload @ vec
        acc = term if acc is None else acc + term
    if x.preloaded[op.target]:
        acc = acc + x.blocks[op.target]
    x.blocks[op.target] = acc
    x.written[op.target] = True
    x.kinds[op.target] = op.kind
    return x


def run_qmg(
    system: AssembledSystem,
    config: MgConfig,
    v0: np.ndarray | None = None,
    copies=None,
    hierarchy: GridHierarchy | None = None,
) -> HistoryVector:
    """Build the full history vector of a multigrid run.

    ``copies`` follows the copy-count policy ("T", "T-1", or an integer);
    the default is one copy per written block.
    """
    if hierarchy is None:
        hierarchy = build_hierarchy(system, config)
    tv = 2 * config.num_levels * config.nu + 2 * (config.num_levels - 1) - 1
    total = config.num_cycles * tv
    indexer = BlockIndexer(
        cal_V=config.num_cycles - 1,
        cal_L=config.num_levels - 1,
        nu=config.nu,
        copies=resolve_copy_count(copies, total),
    )
    if v0 is None:
        v0 = np.zeros(hierarchy.levels[0].ndof)
    x = build_initial_state(v0, hierarchy, indexer)
    for op in build_schedule(indexer):
        apply_operation(x, op)
    return x


def write_block_norms_csv(x: HistoryVector, path) -> None:
    """Dump block norms as CSV rows: block_index, level, kind, norm."""
    norms = x.block_norms()
    final = norms[-1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("block_index,level,kind,norm\n")
        for i, norm in enumerate(norms):
            fh.write(f"{i},{x.block_level(i)},{x.kinds[i]},{float(norm)!r}\n")
        t = x.indexer.total_written
        for j in range(1, x.indexer.copies + 1):
            fh.write(f"{t + j},0,copy,{float(final)!r}\n")


def write_blocks_binary(x: HistoryVector, indices, path) -> None:
    """Dump selected blocks as length-prefixed little-endian float64."""
    with open(path, "wb") as fh:
        for index in indices:
            values = x.materialize(index) if index > x.indexer.total_written else x.blocks[index]
            fh.write(struct.pack("<Q", values.shape[0]))
            fh.write(np.asarray(values, dtype="<f8").tobytes())


def read_blocks_binary(path) -> list:
    """Read back a block dump written by :func:`write_blocks_binary`."""
    blocks = []
    with open(path, "rb") as fh:
        while True:
            header = fh.read(8)
            if not header:
                break
            (count,) = struct.unpack("<Q", header)
            data = fh.read(8 * count)
            blocks.append(np.frombuffer(data, dtype="<f8").copy())
    return blocks
