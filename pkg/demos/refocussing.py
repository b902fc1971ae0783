"""Show that echo pulses remove entangling crosstalk from one MS gate.

First the coherent identity on the unitary level, then the residual two-body
rate left behind when the echo pulses themselves are noisy.
"""
import math

import numpy as np

from ionqec.circuit import Circuit, IonLayout, circuit_unitary, compile_circuit, cnot, insert_refocussing, unitary_fidelity
from ionqec.estimator import refocus_process_sampling

layout = IonLayout.default()
gate = compile_circuit(Circuit((cnot(0, 1),), layout.num_ions))
ideal = circuit_unitary(gate)
for eps in (0.0, 0.01, 0.05):
    bare = circuit_unitary(gate, eps, layout)
    echoed = circuit_unitary(insert_refocussing(gate, layout), eps, layout)
    print(f"crosstalk angle {eps:.2f}: bare infidelity {1 - unitary_fidelity(ideal, bare):.2e}, "
          f"echoed {1 - unitary_fidelity(ideal, echoed):.2e}")

p_1q, p_c = 1e-5, 1e-3
rates = refocus_process_sampling(p_1q, p_c, 20_000_000, np.random.default_rng(1))
print(f"\nresidual Z_n U_CT rate {rates['Z_n U_CT']:.2e} (p_1q/3 = {p_1q / 3:.2e}), "
      f"input crosstalk {p_c:.0e}, suppression x{p_c / max(rates['Z_n U_CT'], 1e-30):.0f}")
assert math.isclose(sum(rates.values()), 1.0)
