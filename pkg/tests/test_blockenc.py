import numpy as np
import pytest

from qmglab.blockenc import (
    MAX_DENSE_DIM,
    apply_encoded,
    assemble_operation_matrix,
    dilate,
    expand_operations,
    product_encoding,
    tiny_end_to_end,
)
from qmglab.fem import ProblemCase, assemble_1d
from qmglab.multigrid import MgConfig, build_hierarchy
from qmglab.qmg import (
    KIND_RESIDUAL_COPY,
    PAYLOAD_IDENTITY,
    BlockOperation,
    build_initial_state,
    build_schedule,
    run_qmg,
)

rng = np.random.default_rng(20240817)


def test_dilate_identity():
    enc = dilate(np.eye(3), 1.0)
    expected = np.block(
        [[np.eye(3), np.zeros((3, 3))], [np.zeros((3, 3)), -np.eye(3)]]
    )
    assert np.allclose(enc.unitary, expected, atol=1e-14)


def test_dilate_zero_matrix():
    enc = dilate(np.zeros((4, 4)), 1.0)
    assert np.abs(enc.unitary[:4, :4]).max() == 0.0
    assert np.abs(enc.unitary.T @ enc.unitary - np.eye(8)).max() <= 1e-12


def test_dilate_diagonal_example():
    a = np.diag([0.6, 0.8])
    enc = dilate(a, 1.0)
    assert np.abs(enc.unitary[:2, :2] - a).max() <= 1e-12
    assert np.abs(enc.unitary.T @ enc.unitary - np.eye(4)).max() <= 1e-12


def test_dilate_rejects_small_alpha():
    with pytest.raises(ValueError):
        dilate(np.diag([2.0, 1.0]), 1.0)
    with pytest.raises(ValueError):
        dilate(np.ones((2, 3)), 5.0)
    with pytest.raises(ValueError):
        dilate(np.eye(2), 0.0)


def test_hundred_random_dilations_orthogonal_with_exact_probability():
    for _ in range(100):
        n = int(rng.integers(1, 17))
        a = rng.normal(size=(n, n))
        alpha = float(np.linalg.norm(a, 2) * rng.uniform(1.0, 2.0))
        enc = dilate(a, alpha)
        resid = np.abs(enc.unitary.T @ enc.unitary - np.eye(2 * n)).max()
        assert resid <= 1e-10
        assert np.abs(enc.unitary[:n, :n] - a / alpha).max() <= 1e-10
        b = rng.normal(size=n)
        b /= np.linalg.norm(b)
        prob, _ = apply_encoded(enc, b)
        # statevector route: apply the dilation to (b, 0), project the
        # ancilla-zero half
        lifted = np.concatenate([b, np.zeros(n)])
        projected = (enc.unitary @ lifted)[:n]
        assert abs(prob - float(projected @ projected)) <= 1e-12


def test_apply_encoded_examples():
    enc = dilate(np.eye(3), 1.0)
    b = np.array([0.6, 0.8, 0.0])
    prob, post = apply_encoded(enc, b)
    assert prob == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(post, b, atol=1e-14)

    enc = dilate(np.diag([0.6, 0.8]), 1.0)
    prob, post = apply_encoded(enc, np.array([1.0, 0.0]))
    assert prob == pytest.approx(0.36, abs=1e-14)

    enc = dilate(np.zeros((2, 2)), 1.0)
    prob, post = apply_encoded(enc, np.array([1.0, 0.0]))
    assert prob == 0.0 and post is None

    with pytest.raises(ValueError):
        apply_encoded(enc, np.array([1.0, 1.0]))


def lift_two_ancilla(u, n, which):
    """Lift a one-ancilla dilation to the (anc0, anc1, work) space."""
    t = u.reshape(2, n, 2, n)
    m = np.zeros((2, 2, n, 2, 2, n))
    for other in range(2):
        if which == 0:
            m[:, other, :, :, other, :] = t
        else:
            m[other, :, :, other, :, :] = t
    return m.reshape(4 * n, 4 * n)


@pytest.mark.parametrize("n", [2, 5, 8])
def test_product_of_dilations_encodes_the_product(n):
    a = rng.normal(size=(n, n))
    b = rng.normal(size=(n, n))
    alpha = float(np.linalg.norm(a, 2)) * 1.25
    beta = float(np.linalg.norm(b, 2)) * 1.5
    ua = dilate(a, alpha).unitary
    ub = dilate(b, beta).unitary
    prod = lift_two_ancilla(ua, n, 0) @ lift_two_ancilla(ub, n, 1)
    assert np.abs(prod[:n, :n] - (a @ b) / (alpha * beta)).max() <= 1e-12


def test_product_encoding_counts():
    enc1 = dilate(np.eye(2), 2.0)
    enc2 = dilate(np.eye(2), 3.0)
    prod = product_encoding([enc1, enc2])
    assert prod.Z == pytest.approx(6.0)
    assert prod.a_naive == 2
    assert prod.a_comp == 1 + 1 + 1

    ones = [dilate(np.eye(2), 1.0) for _ in range(4)]
    assert product_encoding(ones).Z == pytest.approx(1.0)
    assert product_encoding(ones).a_comp == 1 + 2 + 1
    eight = [dilate(np.eye(2), 1.0) for _ in range(8)]
    assert product_encoding(eight).a_comp == 1 + 3 + 1

    with pytest.raises(ValueError):
        product_encoding([])
    with pytest.raises(ValueError):
        product_encoding([enc1, dilate(np.eye(3), 1.0)])


def test_gadget_ancillas_beat_naive_from_four_factors():
    # with equal one-ancilla factors the counter register pays off only
    # once four or more factors share it
    base = dilate(np.eye(2), 1.0)
    for j in (4, 5, 8, 16, 32):
        prod = product_encoding([base] * j)
        assert prod.a_comp <= prod.a_naive


def test_tiny_end_to_end_2d_case():
    from qmglab.fem import assemble_2d

    system = assemble_2d(4, 4, ProblemCase(2, 1))
    config = MgConfig(num_levels=2, num_cycles=1, nu=2)
    report = tiny_end_to_end(config, system)
    assert report["direction_residual"] <= 1e-10
    assert report["p_abs_diff"] <= 1e-12


def test_rolled_ancilla_equals_full_two_ancilla_projection():
    n = 3
    a = rng.normal(size=(n, n))
    b = rng.normal(size=(n, n))
    alpha = float(np.linalg.norm(a, 2)) * 1.1
    beta = float(np.linalg.norm(b, 2)) * 1.3
    ua = dilate(a, alpha).unitary
    ub = dilate(b, beta).unitary
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)

    # full space: both ancillas explicit, project (0, 0) at the end
    full = lift_two_ancilla(ua, n, 0) @ lift_two_ancilla(ub, n, 1)
    state0 = np.zeros(4 * n)
    state0[:n] = v
    projected_full = (full @ state0)[:n]

    # rolled: project each ancilla right after its factor acts
    s = (ub @ np.concatenate([v, np.zeros(n)]))[:n]
    s = (ua @ np.concatenate([s, np.zeros(n)]))[:n]
    assert np.abs(s - projected_full).max() <= 1e-14


def tiny_case(n_elements, cycles):
    system = assemble_1d(n_elements, ProblemCase(1, 1))
    config = MgConfig(num_levels=2, num_cycles=cycles, nu=2)
    return system, config


@pytest.mark.parametrize("n_elements,cycles", [(4, 1), (4, 2), (8, 1), (8, 2)])
def test_tiny_end_to_end_matches_emulation(n_elements, cycles):
    system, config = tiny_case(n_elements, cycles)
    report = tiny_end_to_end(config, system)
    assert report["direction_residual"] <= 1e-10
    assert report["p_abs_diff"] <= 1e-12
    assert 0.0 < report["p_statevector"] < 1.0


def test_tiny_end_to_end_nonzero_guess():
    system, config = tiny_case(4, 1)
    v0 = np.array([0.25, -0.1, 0.05])
    report = tiny_end_to_end(config, system, v0=v0)
    assert report["direction_residual"] <= 1e-10
    assert report["p_abs_diff"] <= 1e-12


def test_identity_only_schedule_preserves_input_direction():
    # forcing zero: every preload vanishes, and a schedule of copies over
    # empty blocks acts as the identity, so the projected probability is
    # exactly 1/Z^2 with the state pointing along the input
    system = assemble_1d(4, ProblemCase(1, 1, forcing=0.0))
    config = MgConfig(num_levels=2, num_cycles=1, nu=2)
    hierarchy = build_hierarchy(system, config)
    from qmglab.qmg import BlockIndexer

    indexer = BlockIndexer(cal_V=0, cal_L=1, nu=2, copies=0)
    v0 = np.array([0.4, 0.2, -0.3])
    x_in = build_initial_state(v0, hierarchy, indexer).materialize_full()
    state = x_in / np.linalg.norm(x_in)
    z = 1.0
    for target, source in ((2, 1), (3, 2)):
        op = BlockOperation(
            kind=KIND_RESIDUAL_COPY,
            target=target,
            sources=((source, PAYLOAD_IDENTITY),),
            level=0,
        )
        mat = assemble_operation_matrix(op, indexer, hierarchy)
        alpha = float(np.linalg.norm(mat, 2))
        assert alpha == pytest.approx(np.sqrt(2.0), rel=1e-12)
        enc = dilate(mat, alpha)
        lifted = np.concatenate([state, np.zeros(state.shape[0])])
        state = (enc.unitary @ lifted)[: state.shape[0]]
        z *= alpha
    p = float(state @ state)
    assert p == pytest.approx(1.0 / z**2, rel=1e-12)
    direction = state / np.linalg.norm(state)
    assert np.abs(direction - x_in / np.linalg.norm(x_in)).max() <= 1e-12


def test_z_bounds_product_norm():
    system, config = tiny_case(4, 1)
    hierarchy = build_hierarchy(system, config)
    x = run_qmg(system, config, hierarchy=hierarchy)
    ops = expand_operations(build_schedule(x.indexer), x.indexer)
    product = np.eye(x.indexer.block_count * x.finest_dim)
    z = 1.0
    for op in ops:
        mat = assemble_operation_matrix(op, x.indexer, hierarchy)
        z *= float(np.linalg.norm(mat, 2))
        product = mat @ product
    assert z >= np.linalg.norm(product, 2)


def test_dimension_cap_enforced():
    system = assemble_1d(256, ProblemCase(1, 1))
    config = MgConfig(num_levels=2, num_cycles=4, nu=6)
    with pytest.raises(ValueError, match="cap|dimension"):
        tiny_end_to_end(config, system)
    assert MAX_DENSE_DIM == 2048
