"""Unitary dilation of block operations and tiny-scale statevector checks.

A real matrix A with ``norm(A) <= alpha`` embeds into an orthogonal matrix
with A/alpha as its top-left block.  Applying that dilation to a state
``(b, 0)`` and keeping the top half multiplies b by A/alpha, which succeeds
(the ancilla reads zero) with probability ``norm(A b)^2 / alpha^2``.

At tiny scale the whole emulated run can be checked this way: every block
operation is assembled as a dense matrix on the padded index-times-work
space, dilated with its exact 2-norm as the subnormalization, and the
dilations are applied factor by factor to an explicit statevector.  Each
factor touches its own ancilla exactly once, so projecting that ancilla
onto zero immediately after the factor acts is equivalent to projecting
all ancillas at the end; the working register therefore never needs more
than one explicit ancilla at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .fem import AssembledSystem
from .multigrid import GridHierarchy, MgConfig, build_hierarchy
from .qmg import (
    COPY_KINDS,
    KIND_FINAL_COPY,
    PAYLOAD_IDENTITY,
    BlockIndexer,
    BlockOperation,
    _payload_matrix,
    build_initial_state,
    build_schedule,
    run_qmg,
)

__all__ = [
    "BlockEncoding",
    "EncodingProduct",
    "dilate",
    "apply_encoded",
    "product_encoding",
    "expand_operations",
    "assemble_operation_matrix",
    "tiny_end_to_end",
]

#: Hard cap on the padded statevector dimension for explicit dilations.
MAX_DENSE_DIM = 2048

#: Cap from the one-ancilla working register: 2 * dim <= 2**22.
MAX_STATE_DIM = 1 << 22


@dataclass(frozen=True)
class BlockEncoding:
    """An orthogonal dilation of matrix / alpha with one ancilla."""

    alpha: float
    ancillas: int
    matrix: np.ndarray
    unitary: np.ndarray


@dataclass(frozen=True)
class EncodingProduct:
    """Resource accounting for a product of block encodings.

    ``a_comp`` is the ancilla count of the gadget that reuses one
    factor's ancillas across the whole product: the largest per-factor
    count plus a counter register of ceil(log2 j) + 1 qubits.
    """

    factors: tuple
    Z: float
    a_naive: int
    a_comp: int


def dilate(a: np.ndarray, alpha: float) -> BlockEncoding:
    """One-ancilla orthogonal dilation of a/alpha.

    With the SVD a/alpha = W S V^T the dilation is::

        U = [[ W S V^T,            W sqrt(I-S^2) W^T ],
             [ V sqrt(I-S^2) V^T,  -V S W^T          ]]

    Requires ``alpha >= norm(a)``; singular values are clamped at one to
    absorb roundoff when alpha equals the norm exactly.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("dilate expects a square matrix")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    w, s, vt = np.linalg.svd(a / alpha)
    if s.size and s[0] > 1.0 + 1e-9:
        raise ValueError(
            f"alpha ({alpha:.6g}) is below the matrix 2-norm ({alpha * s[0]:.6g})"
        )
    s = np.minimum(s, 1.0)
    comp = np.sqrt(1.0 - s * s)
    v = vt.T
    top_left = (w * s) @ vt
    top_right = (w * comp) @ w.T
    bottom_left = (v * comp) @ v.T
    bottom_right = -(v * s) @ w.T
    unitary = np.block([[top_left, top_right], [bottom_left, bottom_right]])
    return BlockEncoding(alpha=float(alpha), ancillas=1, matrix=a, unitary=unitary)


def apply_encoded(enc: BlockEncoding, b: np.ndarray):
    """Encoded matrix-vector product on a unit vector.

    Returns ``(success_prob, post_state)`` where the probability is
    ``norm(A b)^2 / alpha^2`` and the post state is the normalized
    product, or None when A b vanishes.
    """
    b = np.asarray(b, dtype=float)
    if abs(np.linalg.norm(b) - 1.0) > 1e-10:
        raise ValueError("b must be a unit vector")
    ab = enc.matrix @ b
    norm_ab = float(np.linalg.norm(ab))
    prob = (norm_ab / enc.alpha) ** 2
    if norm_ab == 0.0:
        return 0.0, None
    return prob, ab / norm_ab


def product_encoding(factors) -> EncodingProduct:
    """Resource counts for applying the factors' matrices in sequence.

    Builds no matrices: the product subnormalization is the product of
    the factor alphas, and the ancilla counts follow the naive sum and
    the compression-gadget bound.
    """
    factors = tuple(factors)
    if not factors:
        raise ValueError("product_encoding needs at least one factor")
    dims = {f.matrix.shape[0] for f in factors}
    if len(dims) != 1:
        raise ValueError("factors have mismatched dimensions")
    j = len(factors)
    z = 1.0
    for f in factors:
        z *= f.alpha
    a_naive = sum(f.ancillas for f in factors)
    a_comp = max(f.ancillas for f in factors) + math.ceil(math.log2(j)) + 1
    return EncodingProduct(factors=factors, Z=z, a_naive=a_naive, a_comp=a_comp)


def expand_operations(schedule, indexer: BlockIndexer) -> list:
    """Schedule with the multiplicity-c final copy unrolled into c ops."""
    out = []
    for op in schedule:
        if op.kind == KIND_FINAL_COPY:
            t = indexer.total_written
            for j in range(1, op.multiplicity + 1):
                out.append(
                    BlockOperation(
                        kind=KIND_FINAL_COPY,
                        target=t + j,
                        sources=((t + j - 1, PAYLOAD_IDENTITY),),
                        level=op.level,
                    )
                )
        else:
            out.append(op)
    return out


def assemble_operation_matrix(
    op: BlockOperation, indexer: BlockIndexer, hierarchy: GridHierarchy
) -> np.ndarray:
    """Dense matrix of one block operation on the padded block space.

    Writers are the identity on the whole space plus shift terms adding
    payload products into the target block; copies drop the target from
    the identity sum and overwrite it with the source block instead.
    """
    n = hierarchy.ndofs[0]
    dim = indexer.block_count * n
    mat = np.eye(dim)
    t0 = op.target * n
    if op.kind in COPY_KINDS:
        mat[t0 : t0 + n, t0 : t0 + n] = 0.0
    for src, tag in op.sources:
        emb = np.zeros((n, n))
        if tag == PAYLOAD_IDENTITY:
            lvl_dim = hierarchy.ndofs[0 if op.kind == KIND_FINAL_COPY else op.level]
            emb[:lvl_dim, :lvl_dim] = np.eye(lvl_dim)
        else:
            payload = _payload_matrix(hierarchy, op.level, tag).toarray()
            emb[: payload.shape[0], : payload.shape[1]] = payload
        mat[t0 : t0 + n, src * n : src * n + n] += emb
    return mat


def tiny_end_to_end(
    config: MgConfig,
    system: AssembledSystem,
    v0: np.ndarray | None = None,
    copies=None,
) -> dict:
    """Explicit statevector check of the whole dilated operator product.

    Every block operation is assembled, dilated with its exact 2-norm,
    and applied to the running statevector; the per-factor ancilla is
    projected onto zero as it retires.  The projected state must align
    with the emulated history vector and the success probability must
    equal ``norm(x)^2 / (Z^2 norm(x_in)^2)``.
    """
    hierarchy = build_hierarchy(system, config)
    x = run_qmg(system, config, v0=v0, copies=copies, hierarchy=hierarchy)
    indexer = x.indexer
    n = x.finest_dim
    dim = indexer.block_count * n
    if 2 * dim > MAX_STATE_DIM:
        raise ValueError(f"statevector dimension 2*{dim} exceeds {MAX_STATE_DIM}")
    if dim > MAX_DENSE_DIM:
        raise ValueError(
            f"padded dimension {dim} exceeds the dense dilation cap {MAX_DENSE_DIM}"
        )

    if v0 is None:
        v0 = np.zeros(n)
    x_in = build_initial_state(v0, hierarchy, indexer).materialize_full()
    x_in_norm = float(np.linalg.norm(x_in))
    if x_in_norm == 0.0:
        raise ValueError("initial state is identically zero")

    state = x_in / x_in_norm
    z = 1.0
    ops = expand_operations(build_schedule(indexer), indexer)
    for op in ops:
        mat = assemble_operation_matrix(op, indexer, hierarchy)
        alpha = float(np.linalg.norm(mat, 2))
        enc = dilate(mat, alpha)
        lifted = np.concatenate([state, np.zeros(dim)])
        state = (enc.unitary @ lifted)[:dim]
        z *= alpha

    p_statevector = float(state @ state)
    x_full = x.materialize_full()
    x_norm_sq = float(x_full @ x_full)
    p_formula = x_norm_sq / (z * z * x_in_norm * x_in_norm)

    state_dir = state / np.linalg.norm(state)
    x_dir = x_full / np.sqrt(x_norm_sq)
    direction_residual = float(np.linalg.norm(state_dir - x_dir))

    return {
        "block_count": indexer.block_count,
        "work_dim": n,
        "state_dim": dim,
        "operation_count": len(ops),
        "Z": z,
        "p_statevector": p_statevector,
        "p_formula": p_formula,
        "p_abs_diff": abs(p_statevector - p_formula),
        "direction_residual": direction_residual,
        "x_norm_sq": x_norm_sq,
        "x_in_norm": x_in_norm,
    }
