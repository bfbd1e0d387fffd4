"""Finite element assembly for 1D and 2D Poisson benchmark problems.

The governing equations are u'' = f on (0, 1) in 1D and the Laplace
operator applied to u equal to f on the unit square in 2D, with a constant
forcing f (default 1).  Both are assembled in symmetric positive definite
form, i.e. as the stiffness system for the negated equation: the matrix is
the usual stiffness matrix and the load carries a minus sign.

Seven boundary-condition cases are supported:

* 1D case 1: u(0) = u(1) = 0
* 1D case 2: u(0) = 0, u'(1) = 1
* 2D case 1: homogeneous Dirichlet on all four edges
* 2D case 2: Dirichlet on x=0, x=L, y=0; zero-flux on y=L
* 2D case 3: Dirichlet on x=0, x=L; zero-flux on y=0, y=L
* 2D case 4: Dirichlet on x=0, y=0; zero-flux on x=L, y=L
* 2D case 5: Dirichlet on x=0; zero-flux on the other three edges

Dirichlet degrees of freedom are eliminated (row/column deletion), so the
returned system acts on free dofs only.  Elements are piecewise linear in
1D and four-noded bilinear quadrilaterals in 2D (2x2 Gauss quadrature,
exact for these integrands).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ProblemCase",
    "AssembledSystem",
    "assemble_1d",
    "assemble_2d",
    "exact_solution_1d",
    "dirichlet_flags_2d",
    "write_matrix_market",
]

_VALID_CASES = {(1, 1), (1, 2), (2, 1), (2, 2), (2, 3), (2, 4), (2, 5)}

# Dirichlet flags per 2D case as (x=0, x=L, y=0, y=L).  Non-Dirichlet edges
# carry a homogeneous natural (zero-flux) condition and contribute no load.
_DIRICHLET_2D = {
    1: (True, True, True, True),
    2: (True, True, True, False),
    3: (True, True, False, False),
    4: (True, False, True, False),
    5: (True, False, False, False),
}


@dataclass(frozen=True)
class ProblemCase:
    """One benchmark problem: spatial dimension, boundary case, data."""

    dimension: int
    case_id: int
    domain_length: float = 1.0
    forcing: float = 1.0

    def __post_init__(self):
        if (self.dimension, self.case_id) not in _VALID_CASES:
            raise ValueError(
                f"unknown case: dimension={self.dimension}, case_id={self.case_id}"
            )
        if self.domain_length <= 0:
            raise ValueError("domain_length must be positive")

    @property
    def dirichlet_flags(self) -> tuple:
        """Dirichlet indicator per boundary piece.

        1D: (left, right).  2D: (x=0, x=L, y=0, y=L).
        """
        if self.dimension == 1:
            return (True, True) if self.case_id == 1 else (True, False)
        return _DIRICHLET_2D[self.case_id]


@dataclass(frozen=True)
class AssembledSystem:
    """Sparse SPD system over free dofs plus the grid bookkeeping."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_dof_count: int
    dof_coords: np.ndarray
    grid_shape: tuple
    case: ProblemCase
    elements: tuple
    dirichlet_ends: tuple  # per direction: (low end fixed, high end fixed)
    spacings: tuple

    @property
    def dimension(self) -> int:
        return self.case.dimension


def _require_power_of_two(n: int, name: str) -> None:
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"{name} must be a power of two >= 2, got {n}")


def _free_range(n_nodes_per_dir: int, fixed_low: bool, fixed_high: bool) -> np.ndarray:
    last = n_nodes_per_dir - 1
    lo = 1 if fixed_low else 0
    hi = last - 1 if fixed_high else last
    return np.arange(lo, hi + 1)


def assemble_1d(n_elements: int, case: ProblemCase) -> AssembledSystem:
    """Assemble the P1 system for u'' = f on (0, L) with the case BCs.

    Case 1 eliminates both end nodes (N = n_elements - 1); case 2
    eliminates node 0 and adds the flux datum u'(L) = 1 as a boundary
    load at the right end (N = n_elements).
    """
    if case.dimension != 1:
        raise ValueError("assemble_1d requires a 1D case")
    _require_power_of_two(n_elements, "n_elements")

    length = case.domain_length
    h = length / n_elements
    n_nodes = n_elements + 1
    fixed_low, fixed_high = case.dirichlet_flags

    # Full P1 stiffness and load on all nodes.  Exact element integrals:
    # element stiffness (1/h) [[1,-1],[-1,1]], element load f*h/2 per node.
    main = np.full(n_nodes, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n_nodes - 1, -1.0 / h)
    k_full = sp.diags([off, main, off], [-1, 0, 1], format="csr")

    b_full = np.full(n_nodes, -case.forcing * h)
    b_full[0] = b_full[-1] = -case.forcing * h / 2.0
    if case.case_id == 2:
        b_full[-1] += 1.0  # u'(L) = 1 enters the weak form as a point load

    free = _free_range(n_nodes, fixed_low, fixed_high)
    matrix = k_full[np.ix_(free, free)].tocsr()
    rhs = b_full[free]
    coords = free * h

    return AssembledSystem(
        matrix=matrix,
        rhs=rhs,
        free_dof_count=free.size,
        dof_coords=coords,
        grid_shape=(free.size,),
        case=case,
        elements=(n_elements,),
        dirichlet_ends=((fixed_low, fixed_high),),
        spacings=(h,),
    )


def _q4_stiffness(hx: float, hy: float) -> np.ndarray:
    """Element stiffness of a bilinear quad on an hx-by-hy rectangle."""
    g = 1.0 / np.sqrt(3.0)
    gauss = [(-g, -g), (g, -g), (g, g), (-g, g)]
    ke = np.zeros((4, 4))
    det_j = hx * hy / 4.0
    for xi, eta in gauss:
        dn_dxi = np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)]) / 4.0
        dn_deta = np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)]) / 4.0
        dn_dx = dn_dxi * (2.0 / hx)
        dn_dy = dn_deta * (2.0 / hy)
        ke += (np.outer(dn_dx, dn_dx) + np.outer(dn_dy, dn_dy)) * det_j
    return ke


def dirichlet_flags_2d(case_id: int) -> tuple:
    """Dirichlet indicators (x=0, x=L, y=0, y=L) for a 2D case."""
    try:
        return _DIRICHLET_2D[case_id]
    except KeyError:
        raise ValueError(f"unknown 2D case_id {case_id}") from None


def assemble_2d(
    nx_elements: int,
    ny_elements: int,
    case: ProblemCase,
    dirichlet_values=None,
) -> AssembledSystem:
    """Assemble the Q4 bilinear system on a regular nx-by-ny element grid.

    Dirichlet dofs are eliminated per the case flags.  ``dirichlet_values``
    may supply an inhomogeneous boundary field as a callable (x, y) -> g;
    the benchmark cases all use g = 0.  Zero-flux edges contribute no load.
    """
    if case.dimension != 2:
        raise ValueError("assemble_2d requires a 2D case")
    _require_power_of_two(nx_elements, "nx_elements")
    _require_power_of_two(ny_elements, "ny_elements")

    length = case.domain_length
    hx = length / nx_elements
    hy = length / ny_elements
    nnx, nny = nx_elements + 1, ny_elements + 1
    dx0, dxl, dy0, dyl = case.dirichlet_flags

    ke = _q4_stiffness(hx, hy)

    # Vectorized element assembly.  Node id = j * nnx + i, x fastest.
    ex, ey = np.meshgrid(np.arange(nx_elements), np.arange(ny_elements), indexing="ij")
    ex, ey = ex.ravel(), ey.ravel()
    n0 = ey * nnx + ex
    conn = np.stack([n0, n0 + 1, n0 + 1 + nnx, n0 + nnx], axis=1)

    n_el = conn.shape[0]
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    vals = np.tile(ke.ravel(), n_el)  # row-major, matching repeat/tile layout
    k_full = sp.coo_matrix((vals, (rows, cols)), shape=(nnx * nny, nnx * nny)).tocsr()

    b_full = np.zeros(nnx * nny)
    np.add.at(b_full, conn.ravel(), -case.forcing * hx * hy / 4.0)

    free_x = _free_range(nnx, dx0, dxl)
    free_y = _free_range(nny, dy0, dyl)
    free = (free_y[:, None] * nnx + free_x[None, :]).ravel()

    matrix = k_full[np.ix_(free, free)].tocsr()
    rhs = b_full[free]

    if dirichlet_values is not None:
        mask = np.zeros(nnx * nny, dtype=bool)
        mask[free] = True
        fixed = np.flatnonzero(~mask)
        xf = (fixed % nnx) * hx
        yf = (fixed // nnx) * hy
        g = np.asarray([dirichlet_values(x, y) for x, y in zip(xf, yf)], dtype=float)
        rhs = rhs - k_full[np.ix_(free, fixed)] @ g

    xs = (free % nnx) * hx
    ys = (free // nnx) * hy
    coords = np.column_stack([xs, ys])

    return AssembledSystem(
        matrix=matrix,
        rhs=rhs,
        free_dof_count=free.size,
        dof_coords=coords,
        grid_shape=(free_x.size, free_y.size),
        case=case,
        elements=(nx_elements, ny_elements),
        dirichlet_ends=((dx0, dxl), (dy0, dyl)),
        spacings=(hx, hy),
    )


def exact_solution_1d(case: ProblemCase, x):
    """Closed-form solution of the 1D benchmark at position(s) x in [0, 1].

    Case 1: x (x - 1) / 2.  Case 2: x^2 / 2.
    """
    if case.dimension != 1:
        raise ValueError("exact_solution_1d requires a 1D case")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > case.domain_length):
        raise ValueError("x outside the domain")
    if case.case_id == 1:
        out = x * (x - case.domain_length) / 2.0
    else:
        out = x * x / 2.0
    return out if out.ndim else float(out)


def write_matrix_market(system: AssembledSystem, matrix_path, rhs_path) -> None:
    """Export matrix and rhs in Matrix Market coordinate text format."""
    from scipy.io import mmwrite

    mmwrite(str(matrix_path), system.matrix.tocoo())
    mmwrite(str(rhs_path), sp.coo_matrix(system.rhs.reshape(-1, 1)))
