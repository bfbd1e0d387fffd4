"""Unitary dilations, encoded matrix-vector products, and the tiny check.

A matrix over its 2-norm sits in the top-left block of an orthogonal
dilation; applying the dilation and reading the ancilla-zero half
multiplies by the encoded matrix.  Chaining the dilations of every block
operation reproduces the emulated history vector, with ancilla success
probability norm(x)^2 / (Z^2 norm(x_in)^2).
"""

import numpy as np

from qmglab import MgConfig, ProblemCase, assemble_1d, dilate, apply_encoded, tiny_end_to_end

a = np.array([[0.0, 0.6], [0.8, 0.0]])
enc = dilate(a, 1.0)
print("dilation of a 2x2 contraction")
print(enc.unitary.round(3))
resid = np.abs(enc.unitary.T @ enc.unitary - np.eye(4)).max()
print(f"orthogonality residual {resid:.1e}")

b = np.array([1.0, 0.0])
prob, post = apply_encoded(enc, b)
print(f"encoded product success probability {prob:.3f}, post state {post}")

print("\ntiny end-to-end statevector check (3 unknowns, one cycle)")
system = assemble_1d(4, ProblemCase(1, 1))
config = MgConfig(num_levels=2, num_cycles=1, nu=2)
report = tiny_end_to_end(config, system)
for key in ("block_count", "state_dim", "operation_count", "Z"):
    print(f"  {key} = {report[key]}")
print(f"  p (statevector)      = {report['p_statevector']:.6e}")
print(f"  p (norm formula)     = {report['p_formula']:.6e}")
print(f"  direction residual   = {report['direction_residual']:.2e}")
